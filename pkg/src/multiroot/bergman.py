"""Square-integrable norms on the ball and the derivative bounds they imply.

Two norm backends are provided.

``complex_exact``
    The analytic norm on the complex ball B(omega, R) with normalized
    measure.  Monomials centered at omega are orthogonal, with

        || (z - omega)^alpha ||^2 = n! alpha! / (n + |alpha|)! * R^(2|alpha|),

    so the norm of a truncated polynomial is a finite exact sum.  The formula
    is validated against a Monte Carlo oracle in the test suite before
    anything downstream relies on it.

``appendix_slice``
    A real-slice surrogate: n!/pi^n/R^(2n) times the integral of |f|^2 over
    the real n-ball of radius R around omega.  For n = 2 it is computed by
    adaptive quadrature over the disk in polar coordinates (absolute
    tolerance 1e-8); other dimensions fall back to seeded Monte Carlo.

Certificates default to ``complex_exact``; the golden values in the test
suite pin ``appendix_slice``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, StructuralError
from .series import (
    AnalyticSystem,
    TruncatedSeries,
    ts_evaluate,
    ts_recenter,
)

__all__ = [
    "COMPLEX_EXACT",
    "APPENDIX_SLICE",
    "BallContext",
    "nu",
    "kappa",
    "norm_a2",
    "series_norm_a2",
    "lambda_bound",
    "derivative_bound",
    "gamma_bar_bound",
    "monte_carlo_norm_complex",
]

COMPLEX_EXACT = "complex_exact"
APPENDIX_SLICE = "appendix_slice"
_BACKENDS = (COMPLEX_EXACT, APPENDIX_SLICE)

# Fixed default seed for every stochastic fallback; DEFLATE_SEED overrides.
_DEFAULT_SEED = 20240801
_MC_SAMPLES = 200_000


def _seed() -> int:
    return int(os.environ.get("DEFLATE_SEED", _DEFAULT_SEED))


def _check_backend(backend: str) -> str:
    if backend not in _BACKENDS:
        raise DomainError(f"unknown norm backend {backend!r}; expected one of {_BACKENDS}")
    return backend


@dataclass(frozen=True)
class BallContext:
    """The ambient ball B(omega, R) in C^n."""

    omega: tuple[complex, ...]
    radius: float
    dim: int

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("ball radius must be positive")
        object.__setattr__(self, "omega", tuple(complex(w) for w in self.omega))
        if len(self.omega) != self.dim:
            raise StructuralError("ball center has wrong dimension")

    @staticmethod
    def of(system: AnalyticSystem) -> "BallContext":
        return BallContext(system.ball_center, system.ball_radius, system.dim)


def nu(x: Sequence[complex], ball: BallContext) -> float:
    """Relative offset ||x - omega|| / R; requires x inside the open ball."""
    if len(x) != ball.dim:
        raise StructuralError("point has wrong dimension")
    dist = math.sqrt(sum(abs(complex(xi) - wi) ** 2 for xi, wi in zip(x, ball.omega)))
    value = dist / ball.radius
    if value >= 1.0:
        raise DomainError(f"point lies outside the open ball (nu = {value:.6g})")
    return value


def kappa(x: Sequence[complex], ball: BallContext) -> float:
    nx = nu(x, ball)
    return max(1.0, (ball.dim + 1) / (ball.radius * (1.0 - nx * nx)))


def _monomial_weight(alpha, n: int, radius: float) -> float:
    deg = sum(alpha)
    w = math.factorial(n) / math.factorial(n + deg)
    for a in alpha:
        w *= math.factorial(a)
    return w * radius ** (2 * deg)


def _series_norm_complex(f: TruncatedSeries, ball: BallContext) -> float:
    if f.center != ball.omega:
        f = ts_recenter(f, ball.omega, f.order)
    total = 0.0
    for alpha, c in f.coefficients.items():
        total += abs(c) ** 2 * _monomial_weight(alpha, ball.dim, ball.radius)
    return math.sqrt(total)


def _series_norm_slice_sq(f: TruncatedSeries, ball: BallContext) -> float:
    n = ball.dim
    const = math.factorial(n) / math.pi**n / ball.radius ** (2 * n)
    if n == 2:
        w0, w1 = ball.omega

        def integrand(theta: float, r: float) -> float:
            z = (w0 + r * math.cos(theta), w1 + r * math.sin(theta))
            return abs(ts_evaluate(f, z)) ** 2 * r

        value, _err = integrate.dblquad(
            integrand,
            0.0,
            ball.radius,
            0.0,
            2.0 * math.pi,
            epsabs=1e-10,
            epsrel=1e-10,
        )
        return const * value
    # General n: seeded Monte Carlo over the real n-ball around omega.
    rng = np.random.default_rng(_seed())
    g = rng.standard_normal((_MC_SAMPLES, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = ball.radius * rng.random(_MC_SAMPLES) ** (1.0 / n)
    pts = radii[:, None] * g
    vals = np.empty(_MC_SAMPLES)
    for k in range(_MC_SAMPLES):
        z = tuple(ball.omega[i] + pts[k, i] for i in range(n))
        vals[k] = abs(ts_evaluate(f, z)) ** 2
    vol = math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * ball.radius**n
    return const * vol * float(vals.mean())


def series_norm_a2(f: TruncatedSeries, ball: BallContext, backend: str) -> float:
    """A^2 norm of a single equation over the ball."""
    _check_backend(backend)
    if backend == COMPLEX_EXACT:
        return _series_norm_complex(f, ball)
    return math.sqrt(_series_norm_slice_sq(f, ball))


def norm_a2(f: AnalyticSystem, backend: str) -> float:
    """System norm: equation norms added in quadrature."""
    _check_backend(backend)
    ball = BallContext.of(f)
    if backend == COMPLEX_EXACT:
        return math.sqrt(sum(_series_norm_complex(eq, ball) ** 2 for eq in f.equations))
    return math.sqrt(sum(_series_norm_slice_sq(eq, ball) for eq in f.equations))


def lambda_bound(f: AnalyticSystem, x: Sequence[complex], backend: str) -> float:
    """||f|| / (1 - nu_x^2)^((n+1)/2)."""
    ball = BallContext.of(f)
    nx = nu(x, ball)
    return norm_a2(f, backend) / (1.0 - nx * nx) ** ((ball.dim + 1) / 2.0)


def derivative_bound(
    f: AnalyticSystem, x: Sequence[complex], k: int, backend: str
) -> float:
    """Upper bound on ||D^k f(x)||: ||f|| (n+1)...(n+k) / (R^k (1-nu^2)^((n+1)/2+k))."""
    if k < 0:
        raise DomainError("derivative order k must be nonnegative")
    ball = BallContext.of(f)
    n = ball.dim
    nx = nu(x, ball)
    rising = 1.0
    for j in range(1, k + 1):
        rising *= n + j
    denom = ball.radius**k * (1.0 - nx * nx) ** ((n + 1) / 2.0 + k)
    return norm_a2(f, backend) * rising / denom


def gamma_bar_bound(f: AnalyticSystem, zeta: Sequence[complex], backend: str) -> float:
    """Upper bound on sup_{k>=2} (||D^k f(zeta)|| / k!)^(1/(k-1)).

    From (1/k!)||D^k f|| <= lambda * kappa^k, the supremum of
    (lambda kappa^k)^(1/(k-1)) over integer k >= 2 is kappa when
    lambda*kappa <= 1 (limit value) and lambda*kappa^2 otherwise (k = 2).
    """
    ball = BallContext.of(f)
    lam = lambda_bound(f, zeta, backend)
    kap = kappa(zeta, ball)
    return kap * max(1.0, lam * kap)


def monte_carlo_norm_complex(
    f: TruncatedSeries,
    ball: BallContext,
    samples: int = 1_000_000,
    seed: int | None = None,
) -> float:
    """Monte Carlo estimate of the complex-ball norm (oracle for tests).

    The measure is normalized, so the squared norm is just the mean of |f|^2
    over points drawn uniformly from the complex ball (real dimension 2n).
    Evaluation is vectorized over the sample batch.
    """
    n = ball.dim
    rng = np.random.default_rng(_seed() if seed is None else seed)
    g = rng.standard_normal((samples, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = ball.radius * rng.random(samples) ** (1.0 / (2 * n))
    pts = radii[:, None] * g
    z = pts[:, :n] + 1j * pts[:, n:]
    z += np.array(ball.omega, dtype=complex)[None, :]
    dz = z - np.array(f.center, dtype=complex)[None, :]
    vals = np.zeros(samples, dtype=complex)
    for alpha, c in f.coefficients.items():
        term = np.full(samples, c, dtype=complex)
        for i, a in enumerate(alpha):
            if a:
                term *= dz[:, i] ** a
        vals += term
    return math.sqrt(float(np.mean(np.abs(vals) ** 2)))
