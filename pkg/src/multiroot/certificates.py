"""Alpha- and gamma-theory certificates for (deflated) square systems.

Point quantities at x for a square system f:

    beta  = ||Df(x)^{-1} f(x)||           (Newton step length)
    lambda= ||f|| / (1 - nu_x^2)^((n+1)/2)
    kappa = max(1, (n+1) / (R (1 - nu_x^2)))
    mu    = ||Df(x)^{-1}||                (spectral)
    gamma = max(1, lambda kappa mu)
    alpha = beta kappa

The alpha certificate asserts a unique root in B(x0, theta) whenever

    alpha < 2 gamma + 1 - sqrt((2 gamma + 1)^2 - 1),

with the admissible window for u = kappa * theta

    (alpha + 1 - sqrt((alpha+1)^2 - 4 alpha (gamma+1))) / (2 (gamma+1))
        < u < 1 / (gamma + 1).

The gamma certificate gives a quadratic-convergence radius around a regular
root, and the deflated-system bound propagates gamma through a deflation
trace: gamma_ell <= ell + gamma_0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bergman import BallContext, gamma_bar_bound, kappa, lambda_bound, nu
from .deflation import DeflationTrace, deflation_sequence
from .errors import CertificateUnavailableError, DomainError
from .series import AnalyticSystem, jacobian, system_evaluate

__all__ = [
    "PointQuantities",
    "CertificateReport",
    "DeflatedGammaBound",
    "point_quantities",
    "alpha_certificate",
    "gamma_radius",
    "deflated_gamma_bound",
    "singular_alpha_certificate",
    "rank_stability_radius",
]


@dataclass(frozen=True)
class PointQuantities:
    beta: float
    lam: float
    kappa: float
    mu: float
    gamma: float
    alpha: float
    nu: float


@dataclass(frozen=True)
class CertificateReport:
    quantities: PointQuantities | None
    alpha_bound: float | None
    alpha_ok: bool
    theta_low: float | None
    theta_high: float | None
    gamma_radius: float | None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class DeflatedGammaBound:
    gamma0: float
    ell: int
    gamma_ell: float
    radius: float
    p: int
    p0: int
    mu_max: float


def point_quantities(
    f: AnalyticSystem, x: Sequence[complex], backend: str
) -> PointQuantities:
    """The certificate quantities for a square system at a point."""
    n = f.dim
    if f.size != n:
        raise CertificateUnavailableError(
            f"point quantities need a square system; got {f.size} equations in dimension {n}"
        )
    ball = BallContext.of(f)
    j0 = jacobian(f).eval_at(x)
    svals = np.linalg.svd(j0, compute_uv=False)
    if svals[-1] <= 1e-12 * max(svals[0], np.finfo(float).tiny):
        raise CertificateUnavailableError("Jacobian is numerically singular at the point")
    v = system_evaluate(f, x)
    beta = float(np.linalg.norm(np.linalg.solve(j0, v)))
    mu = float(1.0 / svals[-1])
    nx = nu(x, ball)
    lam = lambda_bound(f, x, backend)
    kap = kappa(x, ball)
    gamma = max(1.0, lam * kap * mu)
    alpha = beta * kap
    return PointQuantities(beta, lam, kap, mu, gamma, alpha, nx)


def _alpha_threshold(gamma: float) -> float:
    return 2.0 * gamma + 1.0 - math.sqrt((2.0 * gamma + 1.0) ** 2 - 1.0)


def alpha_certificate(
    f: AnalyticSystem, x0: Sequence[complex], backend: str
) -> CertificateReport:
    """Existence/uniqueness certificate at x0; a failed test is a report."""
    q = point_quantities(f, x0, backend)
    bound = _alpha_threshold(q.gamma)
    notes: list[str] = []
    if q.alpha >= bound:
        return CertificateReport(q, bound, False, None, None, None, tuple(notes))
    disc = (q.alpha + 1.0) ** 2 - 4.0 * q.alpha * (q.gamma + 1.0)
    u_low = (q.alpha + 1.0 - math.sqrt(disc)) / (2.0 * (q.gamma + 1.0))
    theta_low = u_low / q.kappa
    theta_high = 1.0 / (q.kappa * (q.gamma + 1.0))
    ball = BallContext.of(f)
    offset = math.sqrt(
        sum(abs(complex(a) - b) ** 2 for a, b in zip(x0, ball.omega))
    )
    if offset + theta_low >= ball.radius:
        notes.append(
            "B(x0, theta_low) is not contained in the ambient ball; the "
            "certificate is not valid at this radius"
        )
    return CertificateReport(
        q, bound, True, theta_low, theta_high, None, tuple(notes)
    )


def gamma_radius(f: AnalyticSystem, zeta: Sequence[complex], backend: str) -> float:
    """Quadratic-convergence radius (2g+1-sqrt(4g^2+3g))/(kappa (g+1)) at zeta."""
    q = point_quantities(f, zeta, backend)
    g = q.gamma
    return (2.0 * g + 1.0 - math.sqrt(4.0 * g * g + 3.0 * g)) / (q.kappa * (g + 1.0))


def deflated_radius_formula(
    gamma0: float, ell: int, kap: float, p: int, nu_zeta: float, n: int
) -> float:
    """Admissible u/kappa radius for the gamma_ell bound (closed form)."""
    x = (1.0 - nu_zeta * nu_zeta) ** ((n + 1) / 2.0)
    u = min(
        1.0 / (p + 1.0),
        x / (6.0 * (ell + gamma0) * (4.0 * kap**p * (1.0 + ell + gamma0) + x)),
    )
    return u / kap


def deflated_gamma_bound(
    trace: DeflationTrace, zeta: Sequence[complex], backend: str
) -> DeflatedGammaBound:
    """gamma_ell <= ell + gamma0 with the admissible ball radius.

    gamma0 = (2 p0 / (p0 + 1)) * lambda(f, zeta) * kappa^p0 * mu, where f is
    the trace's input system, p0 and p are the valuations observed by the
    trace's selections, and mu is the largest pivot-block inverse norm along
    the trace.
    """
    if trace.deflated is None:
        raise CertificateUnavailableError("trace is incomplete (no deflated system)")
    if not trace.mu_values:
        raise CertificateUnavailableError("trace carries no pivot-block data")
    f = trace.input_system
    ball = BallContext.of(f)
    n = ball.dim
    nz = nu(zeta, ball)
    lam0 = lambda_bound(f, zeta, backend)
    kap = kappa(zeta, ball)
    mu = trace.mu_max
    p0 = trace.p0
    p = trace.p
    ell = trace.thickness
    gamma0 = (2.0 * p0 / (p0 + 1.0)) * lam0 * kap**p0 * mu
    gamma_ell = ell + gamma0
    return DeflatedGammaBound(
        gamma0=gamma0,
        ell=ell,
        gamma_ell=gamma_ell,
        radius=deflated_radius_formula(gamma0, ell, kap, p, nz, n),
        p=p,
        p0=p0,
        mu_max=mu,
    )


def singular_alpha_certificate(
    f: AnalyticSystem, x0: Sequence[complex], backend: str
) -> tuple[CertificateReport, DeflationTrace]:
    """Existence certificate for a singular root via a deflation sequence.

    Verifies, per step, the smallness gate and the rank record (deficient
    before the last step, full at the end), then applies the alpha
    certificate to the deflated system.  Failed hypotheses are reported in
    the notes, never raised.
    """
    trace = deflation_sequence(f, x0, backend)
    notes: list[str] = []
    for k, step in enumerate(trace.steps):
        if step.kind == "extraction":
            continue
        if step.gate is not None and not step.gate.passed:
            notes.append(
                f"hypothesis 1.1 failed at k={k}: ||F_k(x0)|| = "
                f"{step.gate.value_norm:.6g} > eta = {step.gate.eta:.6g}"
            )
    if trace.deflated is None:
        if not notes:
            notes.append("deflation did not produce a square system")
        return (
            CertificateReport(None, None, False, None, None, None, tuple(notes)),
            trace,
        )
    report = alpha_certificate(trace.deflated, x0, backend)
    if not report.alpha_ok:
        notes.append("hypothesis 2 failed: the deflated system fails the alpha test")
    return (
        CertificateReport(
            report.quantities,
            report.alpha_bound,
            report.alpha_ok,
            report.theta_low,
            report.theta_high,
            gamma_radius(trace.deflated, x0, backend),
            tuple(notes) + report.notes,
        ),
        trace,
    )


def rank_stability_radius(
    f: AnalyticSystem,
    zeta: Sequence[complex],
    epsilon: float,
    backend: str,
) -> float:
    """Radius around zeta where the epsilon-rank of Df equals rank Df(zeta).

    Requires 0 <= epsilon < min(2 - sqrt(2), sigma_r(zeta)/2) with sigma_r the
    smallest nonzero singular value of Df(zeta); the radius is
    epsilon / (2 gamma_bar(f, zeta)) with gamma_bar its norm-based bound.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    j0 = jacobian(f).eval_at(zeta)
    svals = np.linalg.svd(j0, compute_uv=False)
    nonzero = [s for s in svals if s > 1e-12 * max(svals[0], np.finfo(float).tiny)]
    if not nonzero:
        raise DomainError("Jacobian vanishes at zeta; no nonzero singular value")
    sigma_r = float(nonzero[-1])
    cap = min(2.0 - math.sqrt(2.0), sigma_r / 2.0)
    if epsilon >= cap:
        raise DomainError(
            f"epsilon = {epsilon:.6g} must be below min(2 - sqrt 2, sigma_r/2) = {cap:.6g}"
        )
    if epsilon == 0.0:
        return 0.0
    return epsilon / (2.0 * gamma_bar_bound(f, zeta, backend))
