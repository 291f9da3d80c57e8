from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from multiroot.cli import parse_system
from multiroot.deflation import deflation_sequence, select_detailed
from multiroot.series import AnalyticSystem, TruncatedSeries

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures"

# Golden coefficient tables for the worked example; the reference values
# carry five significant digits, hence the 1e-3 relative matching.
SELECTED_GOLDEN = [
    {(0, 0): 0.00019940, (1, 0): 2.0012, (0, 1): 1.9990, (1, 1): 2.0},
    {(0, 0): 0.00019904, (0, 1): 1.9978, (1, 0): 2.0012, (1, 1): 2.0, (0, 2): -1.0},
    {(0, 0): 0.00020061, (1, 0): 1.9990, (0, 1): 2.0012, (2, 0): 1.0, (0, 2): 1.0},
    {(0, 0): 0.00020085, (1, 0): 1.9978, (0, 1): 2.0010, (2, 0): 1.0, (1, 1): -2.0},
]
KERNELED_GOLDEN = [
    {(0, 0): 0.00019940, (1, 0): 2.0012, (0, 1): 1.9990},
    {(0, 0): -0.0012, (0, 1): -2.0},
    {(0, 0): 0.0043976, (0, 1): 3.9956, (1, 0): -3.9956},
    {(0, 0): 0.0053963, (1, 0): -5.9944, (0, 1): 3.9922},
]
DEFLATED_GOLDEN = [
    {(0, 0): 0.00019940, (1, 0): 2.0012, (0, 1): 1.9990},
    {(0, 0): 0.0043976, (0, 1): 3.9956, (1, 0): -3.9956},
]


def series_matches(eq: TruncatedSeries, expected: dict, rtol: float = 1e-3) -> bool:
    scale = max(abs(v) for v in expected.values())
    keys = set(expected) | set(eq.coefficients)
    for key in keys:
        got = eq.coefficient(key)
        want = expected.get(key, 0.0)
        tol = rtol * (abs(want) if want else scale)
        if abs(got - want) > tol:
            return False
    return True


def assert_system_multiset(system: AnalyticSystem, expected: list[dict], rtol=1e-3):
    """Coefficient match between equations and golden rows, up to row order."""
    assert system.size == len(expected)
    remaining = list(expected)
    for eq in system.equations:
        hit = next((i for i, exp in enumerate(remaining) if series_matches(eq, exp, rtol)), None)
        assert hit is not None, f"no golden row matches {dict(eq.items())}"
        remaining.pop(hit)
    assert not remaining


def relerr(got, want) -> float:
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    return float(np.linalg.norm(got - want) / np.linalg.norm(want))


@pytest.fixture(scope="session")
def gy2():
    system, point, options = parse_system(str(FIXTURES / "gy2.json"))
    return system, point, options["backend"]


@pytest.fixture(scope="session")
def gy2_exact():
    system, point, options = parse_system(str(FIXTURES / "gy2_exact.json"))
    return system, point, options["backend"]


@pytest.fixture(scope="session")
def gy2_selected(gy2):
    system, point, backend = gy2
    selected, records = select_detailed(system, point, backend)
    return selected, records, point, backend


@pytest.fixture(scope="session")
def gy2_trace(gy2):
    system, point, backend = gy2
    return deflation_sequence(system, point, backend), point, backend


def random_polynomial(rng, n=2, degree=3, center=None, order=None, real=False):
    center = center or (0.0,) * n
    coeffs = {}
    for alpha in _exponents(n, degree):
        c = rng.standard_normal() + (0.0 if real else 1j * rng.standard_normal())
        coeffs[alpha] = c
    return TruncatedSeries(center, order or degree, coeffs)


def _exponents(n, degree):
    if n == 1:
        return [(d,) for d in range(degree + 1)]
    out = []
    for d in range(degree + 1):
        for rest in _exponents(n - 1, degree - d):
            out.append((d,) + rest)
    return out


def random_system(rng, n=2, s=2, degree=3, radius=1.0, real=False):
    eqs = tuple(random_polynomial(rng, n, degree, real=real) for _ in range(s))
    return AnalyticSystem(n, eqs, (0.0,) * n, radius)


def interior_point(rng, n=2, max_nu=0.8, radius=1.0, real=False):
    g = rng.standard_normal(n) + (0.0 if real else 1j * rng.standard_normal(n))
    g = g / np.linalg.norm(g)
    r = radius * max_nu * rng.random() ** (1.0 / (2 * n))
    return tuple(r * g)
