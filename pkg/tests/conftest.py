"""Shared oracles and random generators for the test suite.

The quadrature oracle evaluates PI operators pointwise with Gauss-Legendre
rules on the split intervals [a, s] and [s, b]; it never touches the
symbolic integration code it is used to check.
"""

import sys

import numpy as np
import pytest

from piestab.model import PDESpec, check_admissibility
from piestab.pialg import PIOperator
from piestab.polyalg import MatPoly1, MatPoly2

GAUSS_X, GAUSS_W = np.polynomial.legendre.leggauss(40)


def gauss(lo, hi):
    """Nodes and weights of the 40-point Gauss rule on [lo, hi]."""
    half = 0.5 * (hi - lo)
    return half * (GAUSS_X + 1.0) + lo, half * GAUSS_W


def quad(f, lo, hi):
    """Integral of a (possibly matrix-valued) callable over [lo, hi]."""
    x, w = gauss(lo, hi)
    return sum(wi * np.asarray(f(xi)) for xi, wi in zip(x, w))


def apply_quadrature(P: PIOperator, v, s: float) -> np.ndarray:
    """``(P v)(s)`` by quadrature, for a callable ``v``."""
    a, b = P.interval
    out = P.R0(s) @ v(s)
    out = out + quad(lambda t: P.R1(s, t) @ v(t), a, s)
    return out + quad(lambda t: P.R2(s, t) @ v(t), s, b)


def inner_quadrature(u, v, a, b) -> float:
    """``<u, v>_{L2}`` of two column-vector callables."""
    return float(quad(lambda s: (np.asarray(u(s)).T @ np.asarray(v(s)))[0, 0], a, b))


def random_poly1(rng, rows, cols, deg=3, scale=1.0) -> MatPoly1:
    return MatPoly1(scale * rng.standard_normal((rows, cols, deg + 1)))


def random_poly2(rng, rows, cols, deg=2, scale=1.0) -> MatPoly2:
    return MatPoly2(scale * rng.standard_normal((rows, cols, deg + 1, deg + 1)))


def random_operator(rng, rows, cols, deg=2, interval=(0.0, 1.0)) -> PIOperator:
    return PIOperator(random_poly1(rng, rows, cols, deg), random_poly2(rng, rows, cols, deg),
                      random_poly2(rng, rows, cols, deg), interval)


LAYOUTS = [(0, 1, 0), (0, 0, 1), (1, 1, 1), (0, 2, 1)]


def random_spec(rng, n, interval=(0.0, 1.0), deg=2) -> PDESpec:
    """A random admissible spec with layout ``n`` (resampled until
    ``sigma_min(B_T)`` is comfortably away from zero)."""
    n0, n1, n2 = n
    nx, nS = n0 + n1 + n2, n1 + 2 * n2
    nD = nx + nS
    for _ in range(100):
        spec = PDESpec(n=n, A0=random_poly1(rng, nx, nD, deg),
                       A1=random_poly2(rng, nx, nD, deg - 1),
                       A2=random_poly2(rng, nx, nD, deg - 1),
                       B=rng.standard_normal((nS, 2 * nS)),
                       BI=random_poly1(rng, nS, nD, deg - 1, scale=0.3),
                       interval=interval, name="random")
        rep = check_admissibility(spec)
        if rep.sigma_min > 0.1 and rep.condition < 1e3:
            return spec
    raise RuntimeError("could not draw an admissible spec")


def random_specs(count=20, seed=2024):
    rng = np.random.default_rng(seed)
    return [random_spec(rng, LAYOUTS[k % len(LAYOUTS)]) for k in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion that ran."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
