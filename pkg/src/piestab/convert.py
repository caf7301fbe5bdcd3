"""PDE -> PIE conversion.

``T`` maps the fundamental state ``x_f = [x0; dx1; ddx2]`` back to the PDE
state and ``A`` is the dynamics acting on ``x_f``.  ``A`` is built by
composing the PDE dynamics operator with the map ``x_f -> x_D``; the
explicit kernel formulas are evaluated separately as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (NotAdmissibleError, PDESpec, StateLayout, check_admissibility,
                    structural_matrices, validate)
from .specfile import canonical_hash
from .pialg import PIOperator, compose, kernel_equal
from .polyalg import (MatPoly1, MatPoly2, integrate, integrate_beta, lift, outer,
                      product3, shift_affine, _pad_to)

PATH_TOL = 1e-10


class PathMismatchError(RuntimeError):
    """Composition-built and closed-form ``A`` disagree (internal consistency)."""


@dataclass
class PIESystem:
    T: PIOperator
    A: PIOperator
    layout: StateLayout
    spec: PDESpec | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def nx(self) -> int:
        return self.T.rows

    @property
    def interval(self):
        return self.T.interval

    def scaled(self, c: float) -> "PIESystem":
        return PIESystem(self.T * c, self.A * c, self.layout, self.spec, dict(self.provenance))


def compute_BQ(spec: PDESpec, L: StateLayout, BT: np.ndarray) -> MatPoly1:
    """``B_Q`` with ``x_c(a) = int_a^b B_Q(t) x_f(t) dt``."""
    a, b = spec.interval
    nS, nx = L.nS, L.nx
    if nS == 0:
        return MatPoly1.zeros(0, nx)
    M = structural_matrices(L)
    U1, U2, Q = M["U1"], M["U2"], M["Q"]
    B = np.asarray(spec.B, dtype=float).reshape(nS, 2 * nS)
    term1 = spec.BI @ MatPoly1.const(U1)
    term2 = MatPoly1.const(B[:, nS:]) @ shift_affine(Q, b, -1)      # B [0; Q(b - s)]
    kern = MatPoly2.in_theta(spec.BI @ MatPoly1.const(U2)) @ lift(Q, -1.0, 1.0)  # Q(t - s)
    term3 = integrate(kern, "s", "b", a, b)
    return MatPoly1.const(np.linalg.inv(BT)) @ (term1 - term2 + term3)


def _require_admissible(spec: PDESpec):
    L = validate(spec)
    rep = check_admissibility(spec)
    if not rep.admissible:
        raise NotAdmissibleError(rep)
    return L, rep


def build_T(spec: PDESpec) -> PIOperator:
    L, rep = _require_admissible(spec)
    a, _ = spec.interval
    n0, nx, nS = L.n0, L.nx, L.nS
    G0 = np.zeros((nx, nx))
    G0[:n0, :n0] = np.eye(n0)
    if nS == 0:
        return PIOperator.multiplier(G0, spec.interval)
    M = structural_matrices(L)
    BQ = compute_BQ(spec, L, rep.BT)
    r = L.n1 + L.n2
    T1 = shift_affine(M["T"], -a).block(slice(0, r), slice(None))
    Q1 = M["Q"].block(slice(0, r), slice(None))
    G2low = outer(T1, BQ)
    G1low = lift(Q1) + G2low
    pad = MatPoly2.zeros(n0, nx)
    G1 = MatPoly2(np.concatenate([_pad_to(pad.coef, G1low.coef.shape[-2:]), G1low.coef], axis=-4))
    G2 = MatPoly2(np.concatenate([_pad_to(pad.coef, G2low.coef.shape[-2:]), G2low.coef], axis=-4))
    return PIOperator(MatPoly1.const(G0), G1, G2, spec.interval)


def build_Dmap(spec: PDESpec) -> PIOperator:
    """The map ``x_f -> x_D`` as a PIOperator ``{U1, R_D1, R_D2}``."""
    L, rep = _require_admissible(spec)
    a, _ = spec.interval
    M = structural_matrices(L)
    U1, U2 = M["U1"], M["U2"]
    if L.nS == 0:
        return PIOperator.multiplier(U1, spec.interval)
    BQ = compute_BQ(spec, L, rep.BT)
    U2p = MatPoly2.const(U2)
    RD2 = U2p @ outer(shift_affine(M["T"], -a), BQ)
    RD1 = RD2 + U2p @ lift(M["Q"])
    return PIOperator(MatPoly1.const(U1), RD1, RD2, spec.interval)


def _dynamics_operator(spec: PDESpec) -> PIOperator:
    return PIOperator(spec.A0, spec.A1, spec.A2, spec.interval)


def build_A(spec: PDESpec, path: str = "composition") -> PIOperator:
    if path == "composition":
        return compose(_dynamics_operator(spec), build_Dmap(spec))
    if path != "closed_form":
        raise ValueError(f"unknown path {path!r}")
    a, b = spec.interval
    Dm = build_Dmap(spec)
    U1, RD1, RD2 = Dm.R0, Dm.R1, Dm.R2
    A0s = MatPoly2.in_s(spec.A0)
    U1t = MatPoly2.in_theta(U1)
    A1, A2 = spec.A1.coef, spec.A2.coef
    Ah0 = spec.A0 @ U1
    Ah1 = [(A0s @ RD1).coef, (spec.A1 @ U1t).coef,
           integrate_beta(product3(A1, RD2.coef), "a", "theta", a, b),
           integrate_beta(product3(A1, RD1.coef), "theta", "s", a, b),
           integrate_beta(product3(A2, RD1.coef), "s", "b", a, b)]
    Ah2 = [(A0s @ RD2).coef, (spec.A2 @ U1t).coef,
           integrate_beta(product3(A1, RD2.coef), "a", "s", a, b),
           integrate_beta(product3(A2, RD2.coef), "s", "theta", a, b),
           integrate_beta(product3(A2, RD1.coef), "theta", "b", a, b)]

    def total(grids):
        shp = (max(g.shape[-2] for g in grids), max(g.shape[-1] for g in grids))
        return MatPoly2(sum(_pad_to(g, shp) for g in grids))

    return PIOperator(Ah0, total(Ah1), total(Ah2), spec.interval)


def convert(spec: PDESpec) -> PIESystem:
    L, rep = _require_admissible(spec)
    T = build_T(spec)
    A = build_A(spec, "composition")
    ok, disc = kernel_equal(A, build_A(spec, "closed_form"), PATH_TOL)
    if not ok:
        raise PathMismatchError(f"composition and closed-form A differ by {disc:.3e}")
    prov = {"spec_hash": canonical_hash(spec), "closed_form_discrepancy": disc,
            "B_T": rep.BT.tolist()}
    return PIESystem(T, A, L, spec, prov)
