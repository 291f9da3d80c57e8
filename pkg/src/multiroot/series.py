"""Truncated multivariate power-series arithmetic.

Every system handled by this package is represented as a tuple of
:class:`TruncatedSeries`: finitely many Taylor coefficients around a common
center, indexed by exponent vectors.  A series of order ``p`` stores all
coefficients of total degree ``<= p``; absent exponents are zero.  All
operations are pure functions returning new values, so series, matrices and
systems are safe to share between threads.

Coefficients live in complex double precision; real data embeds with zero
imaginary parts.  Iteration over stored terms is always in graded
lexicographic order, which keeps every downstream computation and report
deterministic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import SingularPivotError, StructuralError

__all__ = [
    "TruncatedSeries",
    "SeriesMatrix",
    "AnalyticSystem",
    "ts_add",
    "ts_sub",
    "ts_scale",
    "ts_mul",
    "ts_derivative",
    "ts_evaluate",
    "ts_recenter",
    "ts_reciprocal",
    "ts_truncate",
    "max_coeff",
    "is_zero_series",
    "series_close",
    "jacobian",
    "schur_complement",
    "system_evaluate",
    "recenter_system",
]

# Relative threshold used by the zero test and by coefficient-wise equality.
ZERO_RTOL = 1e-12

Exponent = tuple[int, ...]
Point = tuple[complex, ...]


def _as_point(x: Sequence[complex]) -> Point:
    return tuple(complex(v) for v in x)


def _grlex_key(alpha: Exponent) -> tuple[int, Exponent]:
    return (sum(alpha), alpha)


class TruncatedSeries:
    """A multivariate Taylor polynomial around a fixed center.

    Parameters
    ----------
    center:
        Point in C^n the series is expanded around.
    order:
        Maximum retained total degree.
    coefficients:
        Mapping from exponent tuples (length n, nonnegative ints) to complex
        coefficients.  Terms of total degree beyond ``order`` are rejected.
    """

    __slots__ = ("center", "order", "coefficients")

    def __init__(
        self,
        center: Sequence[complex],
        order: int,
        coefficients: dict[Exponent, complex] | None = None,
    ):
        if order < 0:
            raise StructuralError("series order must be nonnegative")
        self.center: Point = _as_point(center)
        self.order: int = int(order)
        n = len(self.center)
        coeffs: dict[Exponent, complex] = {}
        for alpha, c in (coefficients or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n:
                raise StructuralError(
                    f"exponent {alpha} has length {len(alpha)}, expected {n}"
                )
            if any(a < 0 for a in alpha):
                raise StructuralError(f"negative exponent in {alpha}")
            if sum(alpha) > self.order:
                raise StructuralError(
                    f"term of degree {sum(alpha)} exceeds order {self.order}"
                )
            c = complex(c)
            if c != 0:
                coeffs[alpha] = coeffs.get(alpha, 0.0) + c
        self.coefficients = coeffs

    @property
    def dim(self) -> int:
        return len(self.center)

    def items(self) -> Iterator[tuple[Exponent, complex]]:
        """Stored terms in graded lexicographic order."""
        for alpha in sorted(self.coefficients, key=_grlex_key):
            yield alpha, self.coefficients[alpha]

    def coefficient(self, alpha: Sequence[int]) -> complex:
        return self.coefficients.get(tuple(int(a) for a in alpha), 0.0)

    @property
    def constant(self) -> complex:
        return self.coefficients.get((0,) * self.dim, 0.0)

    def degree(self) -> int:
        """Largest total degree with a stored (nonzero) coefficient."""
        return max((sum(a) for a in self.coefficients), default=0)

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return ts_add(self, other)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return ts_sub(self, other)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return ts_mul(self, other)
        return ts_scale(self, other)

    def __rmul__(self, other):
        return ts_scale(self, other)

    def __neg__(self) -> "TruncatedSeries":
        return ts_scale(self, -1.0)

    def __call__(self, x: Sequence[complex]) -> complex:
        return ts_evaluate(self, x)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        terms = ", ".join(f"{a}:{c:.6g}" for a, c in itertools.islice(self.items(), 6))
        more = "..." if len(self.coefficients) > 6 else ""
        return f"TruncatedSeries(order={self.order}, {{{terms}{more}}})"


def _check_same_frame(a: TruncatedSeries, b: TruncatedSeries) -> None:
    if a.dim != b.dim:
        raise StructuralError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.center != b.center:
        raise StructuralError(f"center mismatch: {a.center} vs {b.center}")


def ts_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Coefficient-wise sum, truncated to min(a.order, b.order)."""
    _check_same_frame(a, b)
    order = min(a.order, b.order)
    coeffs: dict[Exponent, complex] = {}
    for alpha, c in itertools.chain(a.coefficients.items(), b.coefficients.items()):
        if sum(alpha) <= order:
            coeffs[alpha] = coeffs.get(alpha, 0.0) + c
    return TruncatedSeries(a.center, order, coeffs)


def ts_sub(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    return ts_add(a, ts_scale(b, -1.0))


def ts_scale(a: TruncatedSeries, c: complex) -> TruncatedSeries:
    c = complex(c)
    return TruncatedSeries(
        a.center, a.order, {alpha: v * c for alpha, v in a.coefficients.items()}
    )


def ts_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product; terms of total degree > min(a.order, b.order) discarded."""
    _check_same_frame(a, b)
    order = min(a.order, b.order)
    coeffs: dict[Exponent, complex] = {}
    for alpha, ca in a.coefficients.items():
        da = sum(alpha)
        if da > order:
            continue
        for beta, cb in b.coefficients.items():
            if da + sum(beta) > order:
                continue
            gamma = tuple(i + j for i, j in zip(alpha, beta))
            coeffs[gamma] = coeffs.get(gamma, 0.0) + ca * cb
    return TruncatedSeries(a.center, order, coeffs)


def ts_truncate(f: TruncatedSeries, order: int) -> TruncatedSeries:
    """Keep terms of total degree <= order.

    Raising the order is allowed: a :class:`TruncatedSeries` is treated as an
    exact polynomial, so the new coefficients are genuinely zero.
    """
    coeffs = {a: c for a, c in f.coefficients.items() if sum(a) <= order}
    return TruncatedSeries(f.center, order, coeffs)


def ts_derivative(f: TruncatedSeries, var: int) -> TruncatedSeries:
    """Formal partial derivative; the order drops by one (floor at zero)."""
    if not 0 <= var < f.dim:
        raise StructuralError(f"variable index {var} out of range for n={f.dim}")
    coeffs: dict[Exponent, complex] = {}
    for alpha, c in f.coefficients.items():
        k = alpha[var]
        if k > 0:
            beta = alpha[:var] + (k - 1,) + alpha[var + 1:]
            coeffs[beta] = coeffs.get(beta, 0.0) + k * c
    return TruncatedSeries(f.center, max(f.order - 1, 0), coeffs)


def ts_evaluate(f: TruncatedSeries, x: Sequence[complex]) -> complex:
    """Value of the truncated polynomial at the point x."""
    x = _as_point(x)
    if len(x) != f.dim:
        raise StructuralError(f"point has dimension {len(x)}, expected {f.dim}")
    dx = [xi - ci for xi, ci in zip(x, f.center)]
    # Per-variable power tables up to the largest exponent actually stored.
    maxexp = [0] * f.dim
    for alpha in f.coefficients:
        for i, a in enumerate(alpha):
            if a > maxexp[i]:
                maxexp[i] = a
    powers = []
    for i in range(f.dim):
        row = [1.0 + 0.0j]
        for _ in range(maxexp[i]):
            row.append(row[-1] * dx[i])
        powers.append(row)
    total = 0.0 + 0.0j
    for alpha, c in f.coefficients.items():
        term = c
        for i, a in enumerate(alpha):
            if a:
                term *= powers[i][a]
        total += term
    return total


def ts_recenter(
    f: TruncatedSeries, new_center: Sequence[complex], new_order: int
) -> TruncatedSeries:
    """Taylor expansion of f around a new center, truncated at new_order.

    Exact for polynomials whenever ``new_order >= deg f``; in general only the
    coefficients up to ``new_order`` are produced and ``new_order <= f.order``
    is required.
    """
    if new_order > f.order:
        raise StructuralError(
            f"new_order {new_order} exceeds stored order {f.order}"
        )
    new_center = _as_point(new_center)
    if len(new_center) != f.dim:
        raise StructuralError("new center has wrong dimension")
    delta = [nc - oc for nc, oc in zip(new_center, f.center)]
    coeffs: dict[Exponent, complex] = {}
    for alpha, c in f.coefficients.items():
        # (u + delta)^alpha expanded variable by variable.
        per_var: list[list[complex]] = []
        for i, a in enumerate(alpha):
            row = [math.comb(a, b) * delta[i] ** (a - b) for b in range(a + 1)]
            per_var.append(row)
        for beta in itertools.product(*(range(a + 1) for a in alpha)):
            if sum(beta) > new_order:
                continue
            w = c
            for i, b in enumerate(beta):
                w *= per_var[i][b]
            if w != 0:
                coeffs[beta] = coeffs.get(beta, 0.0) + w
    return TruncatedSeries(new_center, new_order, coeffs)


def max_coeff(f: TruncatedSeries) -> float:
    return max((abs(c) for c in f.coefficients.values()), default=0.0)


def is_zero_series(f: TruncatedSeries, ref_magnitude: float | None = None) -> bool:
    """Numerically-zero test with a relative threshold.

    ``ref_magnitude`` supplies the magnitude scale of the computation that
    produced ``f`` (e.g. the parent series in a selection step); it defaults
    to f's own largest coefficient.
    """
    m = max_coeff(f)
    ref = m if ref_magnitude is None else ref_magnitude
    return m <= ZERO_RTOL * (1.0 + ref)


def series_close(a: TruncatedSeries, b: TruncatedSeries) -> bool:
    """Coefficient-wise equality up to the package zero threshold."""
    if a.dim != b.dim or a.center != b.center:
        return False
    scale = 1.0 + max(max_coeff(a), max_coeff(b))
    keys = set(a.coefficients) | set(b.coefficients)
    return all(
        abs(a.coefficients.get(k, 0.0) - b.coefficients.get(k, 0.0))
        <= ZERO_RTOL * scale
        for k in keys
    )


def ts_reciprocal(f: TruncatedSeries, order: int) -> TruncatedSeries:
    """Series g with f*g = 1 up to the given order.

    Computed by the truncated Neumann recursion with exactly ``order``
    correction terms; truncation is formal, so no convergence check is
    needed.  Requires a nonvanishing constant coefficient.
    """
    c0 = f.constant
    if abs(c0) <= ZERO_RTOL * (1.0 + max_coeff(f)):
        raise SingularPivotError("reciprocal of a series with vanishing constant term")
    g = ts_truncate(f, order)
    n = f.dim
    # h has zero constant term, so h^k starts at degree k and the sum is exact.
    h = TruncatedSeries(
        f.center,
        order,
        {a: c / c0 for a, c in g.coefficients.items() if sum(a) > 0},
    )
    one = TruncatedSeries(f.center, order, {(0,) * n: 1.0})
    acc = one
    term = one
    for _ in range(order):
        term = ts_mul(term, ts_scale(h, -1.0))
        acc = ts_add(acc, term)
    return ts_scale(acc, 1.0 / c0)


@dataclass(frozen=True)
class SeriesMatrix:
    """A rows x cols matrix of series sharing one center.

    Entries are stored row-major.  Orders may differ between entries (a
    Jacobian of mixed-order equations); binary operations truncate to the
    smaller order as usual.
    """

    rows: int
    cols: int
    entries: tuple[TruncatedSeries, ...]

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise StructuralError("negative matrix dimensions")
        if len(self.entries) != self.rows * self.cols:
            raise StructuralError(
                f"{len(self.entries)} entries for {self.rows}x{self.cols} matrix"
            )
        centers = {e.center for e in self.entries}
        if len(centers) > 1:
            raise StructuralError("matrix entries disagree on center")

    @staticmethod
    def from_rows(rows: Sequence[Sequence[TruncatedSeries]]) -> "SeriesMatrix":
        r = len(rows)
        c = len(rows[0]) if r else 0
        if any(len(row) != c for row in rows):
            raise StructuralError("ragged matrix rows")
        return SeriesMatrix(r, c, tuple(itertools.chain.from_iterable(rows)))

    def entry(self, i: int, j: int) -> TruncatedSeries:
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> tuple[TruncatedSeries, ...]:
        return self.entries[i * self.cols : (i + 1) * self.cols]

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> "SeriesMatrix":
        ents = [self.entry(i, j) for i in row_idx for j in col_idx]
        return SeriesMatrix(len(row_idx), len(col_idx), tuple(ents))

    def eval_at(self, x: Sequence[complex]) -> np.ndarray:
        vals = [ts_evaluate(e, x) for e in self.entries]
        return np.array(vals, dtype=complex).reshape(self.rows, self.cols)

    def min_order(self) -> int:
        return min((e.order for e in self.entries), default=0)


def _mat_mul(a: SeriesMatrix, b: SeriesMatrix, order: int) -> SeriesMatrix:
    if a.cols != b.rows:
        raise StructuralError("matrix product shape mismatch")
    out = []
    for i in range(a.rows):
        row = []
        for j in range(b.cols):
            acc = None
            for k in range(a.cols):
                term = ts_mul(ts_truncate(a.entry(i, k), order), ts_truncate(b.entry(k, j), order))
                acc = term if acc is None else ts_add(acc, term)
            if acc is None:
                raise StructuralError("empty inner dimension in matrix product")
            row.append(acc)
        out.append(row)
    return SeriesMatrix.from_rows(out)


def _mat_sub(a: SeriesMatrix, b: SeriesMatrix) -> SeriesMatrix:
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise StructuralError("matrix difference shape mismatch")
    ents = tuple(ts_sub(x, y) for x, y in zip(a.entries, b.entries))
    return SeriesMatrix(a.rows, a.cols, ents)


def _mat_inverse(a: SeriesMatrix, order: int) -> SeriesMatrix:
    """Inverse of a square series matrix: constant-block inverse composed
    with a truncated Neumann correction (exact at the given order)."""
    if a.rows != a.cols:
        raise StructuralError("inverse of a non-square series matrix")
    r = a.rows
    center = a.entries[0].center
    n = len(center)
    a0 = a.eval_at(center)
    svals = np.linalg.svd(a0, compute_uv=False)
    if svals[-1] <= 1e-12 * max(svals[0], np.finfo(float).tiny):
        raise SingularPivotError("pivot block is numerically singular at the center")
    a0inv = np.linalg.inv(a0)

    def const_matrix(m: np.ndarray) -> SeriesMatrix:
        ents = [
            TruncatedSeries(center, order, {(0,) * n: m[i, j]})
            for i in range(r)
            for j in range(r)
        ]
        return SeriesMatrix(r, r, tuple(ents))

    ident = const_matrix(np.eye(r))
    a0inv_m = const_matrix(a0inv)
    # N = A0^{-1} (A - A0) has no constant term, so N^k starts at degree k
    # and the Neumann sum (I + N)^{-1} = sum (-N)^k is exact at this order.
    lifted = SeriesMatrix(r, r, tuple(ts_truncate(e, order) for e in a.entries))
    n_mat = _mat_sub(_mat_mul(a0inv_m, lifted, order), ident)
    neg_n = ts_scale_matrix(n_mat, -1.0)
    acc = ident
    term = ident
    for _ in range(order):
        term = _mat_mul(term, neg_n, order)
        acc = _mat_add_scaled(acc, term, 1.0)
    return _mat_mul(acc, a0inv_m, order)


def _mat_add_scaled(a: SeriesMatrix, b: SeriesMatrix, c: complex) -> SeriesMatrix:
    ents = tuple(ts_add(x, ts_scale(y, c)) for x, y in zip(a.entries, b.entries))
    return SeriesMatrix(a.rows, a.cols, ents)


def ts_scale_matrix(a: SeriesMatrix, c: complex) -> SeriesMatrix:
    return SeriesMatrix(a.rows, a.cols, tuple(ts_scale(e, c) for e in a.entries))


def schur_complement(
    m: SeriesMatrix,
    row_idx: Sequence[int],
    col_idx: Sequence[int],
    order: int,
) -> SeriesMatrix:
    """D - C A^{-1} B for the pivot block A = m[row_idx, col_idx].

    The inverse of A is the constant-block inverse composed with a truncated
    Neumann correction; everything is truncated at ``order``.  Returns the
    (rows-r) x (cols-r) matrix over the complementary rows and columns, which
    is empty when the pivot exhausts the rows or the columns.
    """
    row_idx = list(row_idx)
    col_idx = list(col_idx)
    r = len(row_idx)
    if r != len(col_idx) or r < 1:
        raise StructuralError("pivot row and column index sets must have equal size >= 1")
    if len(set(row_idx)) != r or len(set(col_idx)) != r:
        raise StructuralError("duplicate pivot indices")
    other_rows = [i for i in range(m.rows) if i not in set(row_idx)]
    other_cols = [j for j in range(m.cols) if j not in set(col_idx)]
    if not other_rows or not other_cols:
        return SeriesMatrix(len(other_rows), len(other_cols), ())
    a = m.submatrix(row_idx, col_idx)
    b = m.submatrix(row_idx, other_cols)
    c = m.submatrix(other_rows, col_idx)
    d = m.submatrix(other_rows, other_cols)
    a_inv = _mat_inverse(a, order)
    prod = _mat_mul(_mat_mul(c, a_inv, order), b, order)
    d_trunc = SeriesMatrix(d.rows, d.cols, tuple(ts_truncate(e, order) for e in d.entries))
    return _mat_sub(d_trunc, prod)


@dataclass(frozen=True)
class AnalyticSystem:
    """An ordered list of series sharing a center, plus the ambient ball."""

    dim: int
    equations: tuple[TruncatedSeries, ...]
    ball_center: Point
    ball_radius: float

    def __post_init__(self):
        if self.ball_radius <= 0:
            raise StructuralError("ball radius must be strictly positive")
        object.__setattr__(self, "equations", tuple(self.equations))
        object.__setattr__(self, "ball_center", _as_point(self.ball_center))
        if len(self.ball_center) != self.dim:
            raise StructuralError("ball center has wrong dimension")
        if not self.equations:
            raise StructuralError("a system needs at least one equation")
        center = self.equations[0].center
        for eq in self.equations:
            if eq.dim != self.dim:
                raise StructuralError("equation dimension disagrees with system")
            if eq.center != center:
                raise StructuralError("equations disagree on center")
        offset = math.sqrt(
            sum(abs(c - w) ** 2 for c, w in zip(center, self.ball_center))
        )
        if offset >= self.ball_radius:
            raise StructuralError("series center lies outside the open ball")

    @property
    def center(self) -> Point:
        return self.equations[0].center

    @property
    def size(self) -> int:
        return len(self.equations)

    def max_order(self) -> int:
        return max(eq.order for eq in self.equations)

    def min_order(self) -> int:
        return min(eq.order for eq in self.equations)

    def with_equations(self, equations: Iterable[TruncatedSeries]) -> "AnalyticSystem":
        return AnalyticSystem(self.dim, tuple(equations), self.ball_center, self.ball_radius)


def system_evaluate(f: AnalyticSystem, x: Sequence[complex]) -> np.ndarray:
    return np.array([ts_evaluate(eq, x) for eq in f.equations], dtype=complex)


def recenter_system(
    f: AnalyticSystem,
    new_center: Sequence[complex],
    order: int | None = None,
    ball_at_center: bool = False,
) -> AnalyticSystem:
    """Recenter every equation; optionally move the ball to the new center."""
    new_center = _as_point(new_center)
    eqs = tuple(
        ts_recenter(eq, new_center, eq.order if order is None else min(order, eq.order))
        for eq in f.equations
    )
    ball_center = new_center if ball_at_center else f.ball_center
    return AnalyticSystem(f.dim, eqs, ball_center, f.ball_radius)


def jacobian(f: AnalyticSystem) -> SeriesMatrix:
    """The s x n matrix of partial-derivative series."""
    rows = [[ts_derivative(eq, j) for j in range(f.dim)] for eq in f.equations]
    return SeriesMatrix.from_rows(rows)
