"""Deflation sequences and the singular Newton operator.

The pipeline, for a point x0 near a multiple root:

1. *Selection* replaces each equation by the partial derivatives one order
   below its observed valuation, found by recursive smallness gating: an
   equation whose value at x0 falls under the threshold

       eta = 2 alpha0 / ((n+1)(n+2) (R + ||f_k||) R^(n-2))

   is provisionally kept and its nonzero gradient entries are examined; the
   first derivative that fails the gate retains its parent.
2. *Kerneling* splits the Jacobian along an invertible r x r pivot block and
   appends the Schur-complement entries to the pivot equations.
3. Steps 1-2 repeat until the Jacobian reaches full numerical rank; a square
   system of full rank is then extracted.  The number of kerneling rounds is
   the *thickness* of the sequence.

Classical Newton on the extracted square system is the singular Newton
operator of the original system.  Every routine here is a pure function over
immutable snapshots; traces are safe to share once built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.linalg

from .bergman import BallContext, norm_a2, series_norm_a2
from .errors import (
    DomainError,
    ExtractionError,
    LinearSolveError,
    NonTerminationError,
    RankDeficiencyError,
    TruncationExhaustedError,
)
from .rank import RankReport, numerical_rank
from .series import (
    AnalyticSystem,
    TruncatedSeries,
    is_zero_series,
    jacobian,
    max_coeff,
    recenter_system,
    schur_complement,
    series_close,
    system_evaluate,
    ts_derivative,
    ts_evaluate,
    ts_truncate,
)

__all__ = [
    "ALPHA0",
    "C0",
    "SmallnessGate",
    "SelectionRecord",
    "DeflationStep",
    "DeflationTrace",
    "eta_threshold",
    "is_small",
    "select",
    "select_detailed",
    "pivot_selection",
    "kernel_op",
    "deflation_sequence",
    "truncated_deflation",
    "extract_square",
    "singular_newton_step",
    "newton_iterate",
]


def _first_positive_root_alpha0() -> float:
    # (1 - 4u + 2u^2)^2 - 2u expands to 4u^4 - 16u^3 + 20u^2 - 10u + 1.
    roots = np.roots([4.0, -16.0, 20.0, -10.0, 1.0])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-10 and r.real > 0)
    return float(real[0])


ALPHA0 = _first_positive_root_alpha0()
C0 = float(sum(0.5 ** (2**k - 1) for k in range(8)))

_STAGNATION_RTOL = 1e-15
# Brute-force extraction is exact-optimal; beyond this many subsets fall back
# to rank-revealing QR.
_EXTRACT_BRUTE_LIMIT = 5000


@dataclass(frozen=True)
class SmallnessGate:
    """Outcome of one evaluation-smallness test."""

    alpha0: float
    c0: float
    eta: float
    value_norm: float
    passed: bool


@dataclass(frozen=True)
class SelectionRecord:
    """Provenance of one retained equation: source index and derivative."""

    source: int
    derivative: tuple[int, ...]

    @property
    def depth(self) -> int:
        return sum(self.derivative)


@dataclass(frozen=True)
class DeflationStep:
    """One system of the sequence with its gate, rank and pivot data.

    ``kind`` is "selection" for F_0 = S(f), "kerneling" for each later
    F_{k+1} = S(K(F_k)), and "extraction" for the final square system.  The
    pivot lists attached to a step are the ones derived from its own rank
    report: the Schur pivots when the rank is deficient, the extracted
    equation indices at full rank.
    """

    kind: str
    system: AnalyticSystem
    gate: SmallnessGate | None
    rank_report: RankReport | None
    pivot_rows: tuple[int, ...] | None
    pivot_cols: tuple[int, ...] | None
    provenance: tuple[SelectionRecord, ...] = ()
    mu: float | None = None


@dataclass(frozen=True)
class DeflationTrace:
    """The full record of a deflation run."""

    steps: tuple[DeflationStep, ...]
    thickness: int
    deflated: AnalyticSystem | None
    input_system: AnalyticSystem
    deflated_indices: tuple[int, ...] | None
    p0: int
    p: int
    mu_values: tuple[float, ...]

    @property
    def gate_failed(self) -> bool:
        return self.deflated is None and any(
            s.gate is not None and not s.gate.passed for s in self.steps
        )

    @property
    def mu_max(self) -> float:
        return max(self.mu_values) if self.mu_values else float("nan")


def eta_threshold(norm_f: float, n: int, radius: float) -> float:
    """Smallness threshold 2 alpha0 / ((n+1)(n+2)(R + ||f||) R^(n-2))."""
    if n < 2:
        raise DomainError("eta threshold requires ambient dimension n >= 2")
    if radius <= 0:
        raise DomainError("eta threshold requires a positive radius")
    if norm_f < 0:
        raise DomainError("negative norm")
    return 2.0 * ALPHA0 / ((n + 1) * (n + 2) * (radius + norm_f) * radius ** (n - 2))


def _gate_value_norm(values: np.ndarray, n: int) -> float:
    """Evaluation norm used by system-level gates.

    Euclidean norm of the n smallest component magnitudes.  For square or
    underdetermined systems this is the plain euclidean norm; for the
    overdetermined systems produced by selection/kerneling it measures the
    best square subsystem, which is what the extracted system will consist
    of.  (See the test suite: the golden gate values, and the fact that the
    canonical example must pass its round-1 gate, both force this choice over
    the all-component norm.)
    """
    mags = np.sort(np.abs(values))
    take = mags[: min(n, mags.size)]
    return float(np.sqrt(np.sum(take**2)))


def is_small(
    f: TruncatedSeries | AnalyticSystem,
    x0: Sequence[complex],
    ball: BallContext,
    backend: str,
) -> SmallnessGate:
    """Gate test: is the evaluation at x0 below the eta threshold?"""
    if isinstance(f, AnalyticSystem):
        norm = norm_a2(f, backend)
        value = _gate_value_norm(system_evaluate(f, x0), f.dim)
    else:
        norm = series_norm_a2(f, ball, backend)
        value = abs(ts_evaluate(f, x0))
    eta = eta_threshold(norm, ball.dim, ball.radius)
    return SmallnessGate(ALPHA0, C0, eta, value, value <= eta)


def _unit(n: int, i: int) -> tuple[int, ...]:
    return tuple(1 if j == i else 0 for j in range(n))


def _select_walk(
    eq: TruncatedSeries,
    record: SelectionRecord,
    pending: tuple[TruncatedSeries, SelectionRecord],
    x0: Sequence[complex],
    ball: BallContext,
    backend: str,
    retained: list[tuple[TruncatedSeries, SelectionRecord]],
) -> None:
    gate = is_small(eq, x0, ball, backend)
    if not gate.passed:
        series, rec = pending
        if not any(series_close(series, kept) for kept, _ in retained):
            retained.append((series, rec))
        return
    if eq.order == 0:
        # A passer with nothing left to differentiate is numerically the
        # zero function at this truncation order; the branch contributes no
        # equation (the recursive algorithm runs on an empty set).
        return
    parent_scale = max_coeff(eq)
    for i in range(eq.dim):
        d = ts_derivative(eq, i)
        if is_zero_series(d, ref_magnitude=parent_scale):
            continue
        drec = SelectionRecord(
            record.source,
            tuple(a + b for a, b in zip(record.derivative, _unit(eq.dim, i))),
        )
        _select_walk(d, drec, (eq, record), x0, ball, backend, retained)


def select_detailed(
    f: AnalyticSystem, x0: Sequence[complex], backend: str
) -> tuple[AnalyticSystem, tuple[SelectionRecord, ...]]:
    """Selection operator with provenance records for each retained equation."""
    ball = BallContext.of(f)
    retained: list[tuple[TruncatedSeries, SelectionRecord]] = []
    for k, eq in enumerate(f.equations):
        rec = SelectionRecord(k, (0,) * f.dim)
        _select_walk(eq, rec, (eq, rec), x0, ball, backend, retained)
    if not retained:
        raise TruncationExhaustedError(
            "selection retained no equations: every branch stayed under its "
            "gate to the end of the stored truncation order"
        )
    system = f.with_equations(series for series, _ in retained)
    return system, tuple(rec for _, rec in retained)


def select(f: AnalyticSystem, x0: Sequence[complex], backend: str) -> AnalyticSystem:
    """Selection operator S: recursive smallness-gated derivative replacement."""
    system, _records = select_detailed(f, x0, backend)
    return system


def pivot_selection(j0, r: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Index sets of a well-conditioned r x r pivot block of a numeric matrix.

    Greedy complete pivoting: repeatedly take the entry of largest magnitude
    (ties broken by smallest column, then smallest row) and eliminate.  A
    deterministic replacement for the usual "assume the leading r rows and
    columns work" convention.
    """
    j0 = np.atleast_2d(np.asarray(j0, dtype=complex))
    rows, cols = j0.shape
    if not 1 <= r <= min(rows, cols):
        raise DomainError(f"pivot count r={r} out of range for {rows}x{cols}")
    scale = float(np.linalg.norm(j0, 2))
    work = j0.copy()
    avail_rows = list(range(rows))
    avail_cols = list(range(cols))
    row_idx: list[int] = []
    col_idx: list[int] = []
    for _ in range(r):
        best = None
        for j in avail_cols:
            for i in avail_rows:
                mag = abs(work[i, j])
                if best is None or mag > best[0]:
                    best = (mag, i, j)
        mag, pi, pj = best
        if mag < 1e-12 * max(scale, np.finfo(float).tiny):
            raise RankDeficiencyError(
                f"pivot magnitude {mag:.3e} below 1e-12 * ||J|| while seeking rank {r}"
            )
        row_idx.append(pi)
        col_idx.append(pj)
        avail_rows.remove(pi)
        avail_cols.remove(pj)
        for i in avail_rows:
            factor = work[i, pj] / work[pi, pj]
            if factor != 0:
                work[i, :] -= factor * work[pi, :]
    return tuple(row_idx), tuple(col_idx)


def _schur_residual(j0: np.ndarray, values: np.ndarray, rows, cols) -> float:
    """||K(f)(x0)|| for a candidate pivot: pivot-equation values plus the
    evaluated Schur-complement entries."""
    s, n = j0.shape
    other_rows = [i for i in range(s) if i not in set(rows)]
    other_cols = [j for j in range(n) if j not in set(cols)]
    a0 = j0[np.ix_(rows, cols)]
    acc = float(np.sum(np.abs(values[list(rows)]) ** 2))
    if other_rows and other_cols:
        schur = j0[np.ix_(other_rows, other_cols)] - j0[np.ix_(other_rows, cols)] @ np.linalg.solve(
            a0, j0[np.ix_(rows, other_cols)]
        )
        acc += float(np.sum(np.abs(schur) ** 2))
    return math.sqrt(acc)


# Candidate caps for the exhaustive pivot/extraction searches; beyond them the
# greedy complete-pivoting / RRQR fallbacks take over.
_PIVOT_BRUTE_LIMIT = 2000


def _kerneling_pivots(
    j0: np.ndarray, values: np.ndarray, r: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Pivot block choice for one kerneling round.

    Among all nonsingular r x r pivot blocks, take the one minimizing the
    kerneling residual ||K(f)(x0)|| (the quantity the kerneling acceptance
    inequality tests).  Candidates within 0.1% of the best are tied and
    resolved by smallest column indices, then smallest row indices.  Falls
    back to greedy complete pivoting when the search space is large.
    """
    s, n = j0.shape
    if math.comb(s, r) * math.comb(n, r) > _PIVOT_BRUTE_LIMIT:
        return pivot_selection(j0, r)
    scale = float(np.linalg.norm(j0, 2))
    candidates: list[tuple[float, tuple[int, ...], tuple[int, ...]]] = []
    for rows in combinations(range(s), r):
        for cols in combinations(range(n), r):
            a0 = j0[np.ix_(rows, cols)]
            smin = float(np.linalg.svd(a0, compute_uv=False)[-1])
            if smin <= 1e-12 * max(scale, np.finfo(float).tiny):
                continue
            candidates.append((_schur_residual(j0, values, rows, cols), cols, rows))
    if not candidates:
        raise RankDeficiencyError(
            f"no nonsingular {r}x{r} pivot block found (rank report disagrees "
            "with the matrix)"
        )
    kmin = min(c[0] for c in candidates)
    band = kmin * (1.0 + 1e-3) + 1e-15 * scale
    tied = [c for c in candidates if c[0] <= band]
    _knorm, cols, rows = min(tied, key=lambda c: (c[1], c[2]))
    return rows, cols


def kernel_op(
    f: AnalyticSystem,
    x0: Sequence[complex],
    rank_report: RankReport,
    pivots: tuple[Sequence[int], Sequence[int]],
    order: int | None = None,
) -> AnalyticSystem:
    """Kerneling operator K: pivot equations plus vec(Schur(Df)).

    The output keeps the r pivot-row equations first, followed by the
    (s-r)(n-r) Schur-complement entries row-major, all truncated to
    ``order``.  The default order is the Jacobian's (one below the system's),
    matching the truncated-deflation schedule.
    """
    r = rank_report.rank
    if r < 1:
        raise DomainError("kerneling requires rank >= 1")
    if r >= f.dim:
        raise DomainError("kerneling requires rank < n (nothing to eliminate)")
    row_idx, col_idx = pivots
    if len(row_idx) != r or len(col_idx) != r:
        raise DomainError("pivot index sets must have length equal to the rank")
    jac = jacobian(f)
    if order is None:
        order = jac.min_order()
    schur = schur_complement(jac, row_idx, col_idx, order)
    equations = [ts_truncate(f.equations[i], order) for i in row_idx]
    equations.extend(schur.entries)
    return f.with_equations(equations)


def _extract_square_indexed(
    f: AnalyticSystem, x0: Sequence[complex]
) -> tuple[AnalyticSystem, tuple[int, ...], RankReport]:
    n = f.dim
    j0 = jacobian(f).eval_at(x0)
    overall = numerical_rank(j0)
    if overall.rank < n:
        raise ExtractionError(
            f"jacobian has numerical rank {overall.rank} < n = {n}; no square "
            "system of full rank exists"
        )
    s = f.size
    if s == n:
        chosen = tuple(range(n))
    elif math.comb(s, n) <= _EXTRACT_BRUTE_LIMIT:
        values = system_evaluate(f, x0)
        x0a = np.array([complex(t) for t in x0])
        smins = {
            combo: float(np.linalg.svd(j0[list(combo), :], compute_uv=False)[-1])
            for combo in combinations(range(s), n)
        }
        smax = max(smins.values())
        best: tuple[float, tuple[int, ...]] | None = None
        for combo, smin in smins.items():
            # Conditioning floor keeps near-degenerate subsets (e.g. parallel
            # rows) out of the running.
            if smin < 0.5 * smax or smin <= 1e-12 * max(smax, np.finfo(float).tiny):
                continue
            idx = list(combo)
            try:
                delta = np.linalg.solve(j0[idx, :], values[idx])
            except np.linalg.LinAlgError:
                continue
            candidate = tuple(x0a - delta)
            residual = float(
                np.linalg.norm([ts_evaluate(eq, candidate) for eq in f.equations])
            )
            if best is None or (residual, combo) < best:
                best = (residual, combo)
        if best is None:
            raise ExtractionError("no equation subset achieves full numerical rank")
        chosen = best[1]
    else:
        # Rank-revealing QR on the transpose ranks rows by conditioning.
        _q, _r, perm = scipy.linalg.qr(j0.T, pivoting=True)
        chosen = tuple(sorted(int(i) for i in perm[:n]))
    square = f.with_equations(f.equations[i] for i in chosen)
    report = numerical_rank(j0[list(chosen), :])
    if report.rank < n:
        raise ExtractionError("no equation subset achieves full numerical rank")
    return square, chosen, report


def extract_square(f: AnalyticSystem, x0: Sequence[complex]) -> AnalyticSystem:
    """A square subsystem whose Jacobian at x0 has full numerical rank.

    Among all n-subsets of equations (brute force while feasible), subsets
    whose smallest singular value falls under half the best are discarded;
    of the rest, the subset whose Newton point best satisfies the whole
    system is taken, in ascending equation order.
    """
    square, _idx, _report = _extract_square_indexed(f, x0)
    return square


def _run_rounds(
    f: AnalyticSystem,
    x0: Sequence[complex],
    backend: str,
    max_iters: int,
    truncation_orders: Sequence[int] | None,
) -> DeflationTrace:
    """Shared loop behind deflation_sequence and truncated_deflation."""
    ball = BallContext.of(f)
    current, records = select_detailed(f, x0, backend)
    if truncation_orders is not None:
        current = current.with_equations(
            ts_truncate(eq, min(eq.order, truncation_orders[0]))
            for eq in current.equations
        )
    p0 = max(rec.depth for rec in records) + 1
    round_valuations: list[int] = []
    mu_values: list[float] = []
    steps: list[DeflationStep] = []
    kind = "selection"
    rounds = 0
    while True:
        gate = is_small(current, x0, ball, backend)
        if not gate.passed:
            steps.append(
                DeflationStep(kind, current, gate, None, None, None, records)
            )
            return DeflationTrace(
                steps=tuple(steps),
                thickness=rounds,
                deflated=None,
                input_system=f,
                deflated_indices=None,
                p0=p0,
                p=max(round_valuations) if round_valuations else p0,
                mu_values=tuple(mu_values),
            )
        j0 = jacobian(current).eval_at(x0)
        report = numerical_rank(j0)
        if report.rank == 0:
            raise RankDeficiencyError(
                "numerical rank 0 after selection; every selected equation "
                "should contribute a nonzero gradient"
            )
        if report.rank < current.dim:
            pivots = _kerneling_pivots(j0, system_evaluate(current, x0), report.rank)
            a0 = j0[np.ix_(pivots[0], pivots[1])]
            mu_values.append(float(1.0 / np.linalg.svd(a0, compute_uv=False)[-1]))
            steps.append(
                DeflationStep(kind, current, gate, report, pivots[0], pivots[1], records, mu_values[-1])
            )
            rounds += 1
            if rounds > max_iters:
                raise NonTerminationError(
                    f"deflation exceeded {max_iters} kerneling rounds"
                )
            kerneled = kernel_op(current, x0, report, pivots)
            current, records = select_detailed(kerneled, x0, backend)
            if truncation_orders is not None:
                if rounds >= len(truncation_orders):
                    raise NonTerminationError(
                        "truncated deflation needs more rounds than its order "
                        "schedule allows; increase ell"
                    )
                current = current.with_equations(
                    ts_truncate(eq, min(eq.order, truncation_orders[rounds]))
                    for eq in current.equations
                )
            round_valuations.append(max(rec.depth for rec in records) + 1)
            kind = "kerneling"
            continue
        # Full rank: extract and stop.
        square, chosen, square_report = _extract_square_indexed(current, x0)
        jsq = jacobian(square).eval_at(x0)
        mu_values.append(float(1.0 / np.linalg.svd(jsq, compute_uv=False)[-1]))
        steps.append(
            DeflationStep(kind, current, gate, report, chosen, tuple(range(current.dim)), records, mu_values[-1])
        )
        steps.append(
            DeflationStep(
                "extraction", square, None, square_report, chosen, tuple(range(current.dim)), ()
            )
        )
        return DeflationTrace(
            steps=tuple(steps),
            thickness=rounds,
            deflated=square,
            input_system=f,
            deflated_indices=chosen,
            p0=p0,
            p=max(round_valuations) if round_valuations else p0,
            mu_values=tuple(mu_values),
        )


def deflation_sequence(
    f: AnalyticSystem,
    x0: Sequence[complex],
    backend: str,
    max_iters: int | None = None,
) -> DeflationTrace:
    """F0 = S(f), F_{k+1} = S(K(F_k)) until the Jacobian reaches rank n.

    Each round gates ||F(x0)|| against eta(||F||); a failed gate ends the run
    with ``deflated = None`` and the failing gate on record.  The iteration
    cap is a numerical safety net only (the exact theory terminates by strict
    multiplicity drop).
    """
    if max_iters is None:
        max_iters = f.dim * max(f.max_order(), 1) ** 2
    return _run_rounds(f, x0, backend, max_iters, None)


def truncated_deflation(
    f: AnalyticSystem,
    x0: Sequence[complex],
    ell: int,
    backend: str,
) -> DeflationTrace:
    """Deflation with the order schedule T_k truncated at (ell+1) - k.

    Equivalent to the full sequence as far as the singular Newton operator is
    concerned, provided ell is the true thickness and the input order is at
    least ell + 1.
    """
    if ell < 0:
        raise DomainError("ell must be nonnegative")
    if f.min_order() < ell + 1:
        raise DomainError(
            f"series order {f.min_order()} too small for truncated deflation at ell={ell}"
        )
    schedule = [ell + 1 - k for k in range(ell + 1)]
    return _run_rounds(f, x0, backend, ell, schedule)


def singular_newton_step(
    f: AnalyticSystem, x0: Sequence[complex], backend: str
) -> tuple[complex, ...]:
    """One step of the singular Newton operator at x0.

    The system is recentered and re-truncated at x0 (order preserved, ball
    carried to x0), a deflation sequence is run, and classical Newton is
    applied to the extracted square system; if no deflated system exists the
    point is returned unchanged.
    """
    x0 = tuple(complex(v) for v in x0)
    local = recenter_system(f, x0, ball_at_center=True)
    trace = deflation_sequence(local, x0, backend)
    if trace.deflated is None:
        return x0
    square = trace.deflated
    j0 = jacobian(square).eval_at(x0)
    v = system_evaluate(square, x0)
    try:
        delta = np.linalg.solve(j0, v)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - extraction certifies rank
        raise LinearSolveError("deflated Jacobian failed to solve") from exc
    return tuple(complex(a - b) for a, b in zip(x0, delta))


def newton_iterate(
    f: AnalyticSystem,
    x0: Sequence[complex],
    steps: int,
    backend: str,
) -> list[tuple[complex, ...]]:
    """Trajectory of the singular Newton operator, stopping at stagnation."""
    if steps < 1:
        raise DomainError("steps must be >= 1")
    traj = [tuple(complex(v) for v in x0)]
    for _ in range(steps):
        prev = traj[-1]
        nxt = singular_newton_step(f, prev, backend)
        if nxt == prev:
            # Gate failure or an exact fixed point: record once and stop.
            traj.append(nxt)
            break
        traj.append(nxt)
        move = math.sqrt(sum(abs(a - b) ** 2 for a, b in zip(nxt, prev)))
        scale = 1.0 + math.sqrt(sum(abs(a) ** 2 for a in prev))
        if move <= _STAGNATION_RTOL * scale:
            break
    return traj
