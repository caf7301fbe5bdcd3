"""Shipped case studies.

* ``mckendrick`` -- age-structured transport with an integral birth law.
* ``dirichlet-diffusion`` -- ``x_t = lam x + x_ss`` with ``x(0) = x(1) = 0``.
* ``rd-observer`` -- a reaction-diffusion plant coupled to an observer whose
  gain is a polynomial fit of the backstepping kernel; the boundary flux
  measurement is written as ``int_0^1 x_ss``.
"""

from __future__ import annotations

import math

import numpy as np

from .model import PDESpec
from .polyalg import MatPoly1, MatPoly2

FIXTURES = ("mckendrick", "dirichlet-diffusion", "rd-observer")

# default parameter values per fixture
DEFAULTS = {
    "mckendrick": {"c": 0.0},
    "dirichlet-diffusion": {"lam": 1.0},
    "rd-observer": {"lam": 5.0, "degree": 1},
}

FIT_POINTS = 200
SERIES_RTOL = 1e-14


class FixtureError(ValueError):
    pass


def mckendrick(c: float = 0.0) -> PDESpec:
    """``x_t = -x_s + c x``, ``x(0) = int_0^1 (s - s^2) x ds``."""
    A0 = MatPoly1.const([[c, -1.0]])
    BI = MatPoly1.from_entries(1, 2, {(0, 0): [0.0, 1.0, -1.0]})
    return PDESpec(n=(0, 1, 0), A0=A0, A1=MatPoly2.zeros(1, 2), A2=MatPoly2.zeros(1, 2),
                   B=np.array([[1.0, 0.0]]), BI=BI, name="mckendrick",
                   parameters={"c": float(c)})


def dirichlet_diffusion(lam: float = 1.0) -> PDESpec:
    A0 = MatPoly1.const([[lam, 0.0, 1.0]])
    B = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
    return PDESpec(n=(0, 0, 1), A0=A0, A1=MatPoly2.zeros(1, 3), A2=MatPoly2.zeros(1, 3),
                   B=B, BI=MatPoly1.zeros(2, 3), name="dirichlet-diffusion",
                   parameters={"lam": float(lam)})


def bessel_i1_over_z(z2: float) -> float:
    """``I_1(z) / z`` from its power series in ``z**2``; terms stop below 1e-14 relative."""
    term = 0.5
    total = term
    k = 0
    while True:
        k += 1
        term *= (z2 / 4.0) / (k * (k + 1))
        total += term
        if abs(term) < SERIES_RTOL * abs(total):
            return total


def observer_gain(lam: float, s) -> np.ndarray:
    """``l(s) = -sqrt(lam) I_1(sqrt(lam (1 - s^2))) / sqrt(1 - s^2)``.

    Written as ``-lam * I_1(z)/z`` with ``z**2 = lam (1 - s^2)`` so the
    endpoint ``s = 1`` needs no special case.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.array([-lam * bessel_i1_over_z(lam * (1.0 - si * si)) for si in s])


def fit_observer_gain(lam: float, degree: int) -> np.ndarray:
    """Monomial coefficients (ascending) of the least-squares fit of ``l`` on a
    200-point uniform grid of [0, 1]."""
    if degree < 0:
        raise FixtureError("degree must be >= 0")
    s = np.linspace(0.0, 1.0, FIT_POINTS)
    V = np.vander(s, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, observer_gain(lam, s), rcond=None)
    return coef


def rd_observer(lam: float = 5.0, degree: int = 1, gain=None) -> PDESpec:
    """Plant ``x`` and observer ``xh`` with ``n = (0, 0, 2)``.

    ``xh_t = lam xh + xh_ss + l_n(s) int_0^1 (x_ss - xh_ss) dt``; both states
    carry homogeneous Dirichlet conditions.
    """
    ln = np.asarray(fit_observer_gain(lam, degree) if gain is None else gain, dtype=float)
    if lam == 0.0 and gain is None:
        ln = np.zeros(1)
    # x_D = [x, xh, dx, dxh, ddx, ddxh]
    A0 = np.zeros((2, 6))
    A0[0, 0] = A0[1, 1] = lam
    A0[0, 4] = A0[1, 5] = 1.0
    K = np.zeros((2, 6, len(ln), 1))
    K[1, 4, :, 0] = ln
    K[1, 5, :, 0] = -ln
    B = np.zeros((4, 8))
    B[0, 0] = B[1, 1] = 1.0     # x(0), xh(0)
    B[2, 4] = B[3, 5] = 1.0     # x(1), xh(1)
    return PDESpec(n=(0, 0, 2), A0=MatPoly1.const(A0), A1=MatPoly2(K), A2=MatPoly2(K),
                   B=B, BI=MatPoly1.zeros(4, 6), name="rd-observer",
                   parameters={"lam": float(lam), "degree": int(degree)})


def fixture_spec(name: str, **params) -> PDESpec:
    if name not in FIXTURES:
        raise FixtureError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    merged = dict(DEFAULTS[name])
    unknown = set(params) - set(merged)
    if unknown:
        raise FixtureError(f"invalid parameters for {name}: {sorted(unknown)}")
    merged.update({k: v for k, v in params.items() if v is not None})
    for k, v in merged.items():
        if not math.isfinite(float(v)):
            raise FixtureError(f"parameter {k} must be finite")
    if name == "mckendrick":
        return mckendrick(float(merged["c"]))
    if name == "dirichlet-diffusion":
        return dirichlet_diffusion(float(merged["lam"]))
    deg = merged["degree"]
    if int(deg) != deg or deg < 0:
        raise FixtureError("rd-observer degree must be a nonnegative integer")
    return rd_observer(float(merged["lam"]), int(deg))
