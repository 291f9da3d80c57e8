"""Threshold-free numerical rank via symmetric functions of singular values.

The decision needs no user-supplied tolerance: from the singular values we
form the elementary symmetric functions s_k and the ratios

    b_k = s_{n-k+1} / s_{n-k},   g_k = s_{n-k-1} / s_{n-k}  (g_n = 1),
    a_k = b_k * g_k.

If some a_m < 1/9 (smallest such m), the matrix has epsilon-rank n - m with
the certified threshold

    epsilon = (3 a_m + 1 - sqrt((3 a_m + 1)^2 - 16 a_m)) / (4 g_m),

and the defining inequality sigma_{n-m} > epsilon >= sigma_{n-m+1} holds.
Otherwise the matrix has full rank n and sigma_n > 1/(10 g_m) for the
smallest m with s_{n-m} != 0; the report carries that theorem-backed value
as epsilon (the smallest singular value itself is available in ``sigma``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RankReport",
    "singular_values",
    "elementary_symmetric",
    "rank_quantities",
    "numerical_rank",
]

A_THRESHOLD = 1.0 / 9.0


@dataclass(frozen=True)
class RankReport:
    """Singular values, symmetric-function ratios, and the certified rank."""

    sigma: tuple[float, ...]
    s: tuple[float, ...]
    b: tuple[float | None, ...]
    g: tuple[float | None, ...]
    a: tuple[float | None, ...]
    m: int | None
    rank: int
    epsilon: float
    full_rank: bool

    @property
    def n(self) -> int:
        return len(self.sigma)


def singular_values(m) -> np.ndarray:
    """Nonincreasing singular values; wide matrices are transposed first."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.shape[0] < m.shape[1]:
        m = m.T
    return np.linalg.svd(m, compute_uv=False)


def elementary_symmetric(sigma) -> list[float]:
    """s_0..s_n for the polynomial prod (lambda - sigma_i); s_0 = 1.

    Computed by the stable incremental product recurrence (all terms are
    nonnegative, so no cancellation occurs).
    """
    sigma = [float(x) for x in sigma]
    if any(x < 0 for x in sigma):
        raise ValueError("singular values must be nonnegative")
    s = [1.0]
    for x in sigma:
        s.append(0.0)
        for k in range(len(s) - 1, 0, -1):
            s[k] += x * s[k - 1]
    return s


def rank_quantities(s):
    """(b, g, a) for k = 1..n from the symmetric functions s_0..s_n.

    A ratio with zero denominator is reported as None ("undefined") and is
    skipped by the rank scan.
    """
    if s[0] != 1.0:
        raise ValueError("s_0 must equal 1")
    n = len(s) - 1
    b: list[float | None] = []
    g: list[float | None] = []
    a: list[float | None] = []
    for k in range(1, n + 1):
        denom = s[n - k]
        if denom == 0.0:
            bk = None
        else:
            bk = s[n - k + 1] / denom
        if k == n:
            gk = 1.0
        elif denom == 0.0:
            gk = None
        else:
            gk = s[n - k - 1] / denom
        ak = None if (bk is None or gk is None) else bk * gk
        b.append(bk)
        g.append(gk)
        a.append(ak)
    return b, g, a


def numerical_rank(m) -> RankReport:
    """Certified (rank, epsilon) for a complex matrix; no threshold input."""
    sigma = singular_values(m)
    n = int(sigma.shape[0])
    s = elementary_symmetric(sigma)
    b, g, a = rank_quantities(s)
    for k in range(1, n + 1):
        ak = a[k - 1]
        if ak is not None and ak < A_THRESHOLD:
            gk = g[k - 1]
            disc = (3.0 * ak + 1.0) ** 2 - 16.0 * ak
            epsilon = (3.0 * ak + 1.0 - np.sqrt(disc)) / (4.0 * gk)
            return RankReport(
                sigma=tuple(float(x) for x in sigma),
                s=tuple(s),
                b=tuple(b),
                g=tuple(g),
                a=tuple(a),
                m=k,
                rank=n - k,
                epsilon=float(epsilon),
                full_rank=False,
            )
    # Full rank: the smallest m with s_{n-m} != 0 certifies sigma_n > 1/(10 g_m).
    m_full = next((k for k in range(1, n + 1) if s[n - k] != 0.0), n)
    g_m = g[m_full - 1]
    epsilon = 0.0 if not g_m else 1.0 / (10.0 * g_m)
    return RankReport(
        sigma=tuple(float(x) for x in sigma),
        s=tuple(s),
        b=tuple(b),
        g=tuple(g),
        a=tuple(a),
        m=m_full,
        rank=n,
        epsilon=float(epsilon),
        full_rank=True,
    )
