"""Parametric PDE class: states ordered by differentiability, boundary data,
dimension checks and the admissibility test."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polyalg import MatPoly1, MatPoly2, integrate_full, shift_affine

ADMISSIBILITY_RTOL = 1e-9


class ValidationError(ValueError):
    """A PDE spec violates a dimension invariant.  ``errors`` lists each one."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class NotAdmissibleError(ValueError):
    def __init__(self, report: "AdmissibilityReport"):
        super().__init__(f"boundary conditions not admissible: sigma_min(B_T) = "
                         f"{report.sigma_min:.3e}")
        self.report = report


@dataclass(frozen=True)
class StateLayout:
    """Block bookkeeping for ``n = (n0, n1, n2)``.

    ``x_D = [x0; x1; x2; dx1; dx2; ddx2]``, ``x_c = [x1; x2; dx2]``,
    ``x_b = [x_c(a); x_c(b)]`` and ``x_f = [x0; dx1; ddx2]``.
    """

    n0: int
    n1: int
    n2: int

    @property
    def nx(self) -> int:
        return self.n0 + self.n1 + self.n2

    @property
    def nS(self) -> int:
        return self.n1 + 2 * self.n2

    @property
    def nD(self) -> int:
        return self.nx + self.nS

    @property
    def nb(self) -> int:
        return 2 * self.nS

    def xD_offsets(self) -> dict[str, int]:
        n0, n1, n2 = self.n0, self.n1, self.n2
        return {"x0": 0, "x1": n0, "x2": n0 + n1, "dx1": n0 + n1 + n2,
                "dx2": n0 + 2 * n1 + n2, "ddx2": n0 + 2 * n1 + 2 * n2}

    def derivative_orders(self) -> list[int]:
        """Derivative order mapping each state row of ``x`` to ``x_f``."""
        return [0] * self.n0 + [1] * self.n1 + [2] * self.n2


@dataclass
class PDESpec:
    """``{n, G_b = {B, B_I}, G_p = {A0, A1, A2}}`` on ``interval``."""

    n: tuple[int, int, int]
    A0: MatPoly1
    A1: MatPoly2
    A2: MatPoly2
    B: np.ndarray
    BI: MatPoly1
    interval: tuple[float, float] = (0.0, 1.0)
    name: str = ""
    parameters: dict = field(default_factory=dict)

    @property
    def layout(self) -> StateLayout:
        return StateLayout(*self.n)


@dataclass
class AdmissibilityReport:
    BT: np.ndarray
    sigma_min: float
    sigma_max: float
    condition: float
    admissible: bool

    @property
    def verdict(self) -> str:
        return "admissible" if self.admissible else "not_admissible"

    def to_dict(self) -> dict:
        return {"B_T": np.asarray(self.BT).tolist(), "sigma_min": self.sigma_min,
                "sigma_max": self.sigma_max,
                "condition": self.condition if np.isfinite(self.condition) else None,
                "verdict": self.verdict}


def validate(spec: PDESpec) -> StateLayout:
    errors = []
    a, b = spec.interval
    if not a < b:
        errors.append(f"domain: need a < b, got [{a}, {b}]")
    if len(spec.n) != 3 or any(int(k) != k or k < 0 for k in spec.n):
        errors.append(f"n: need three nonnegative integers, got {spec.n}")
        raise ValidationError(errors)
    L = spec.layout
    nx, nD, nS = L.nx, L.nD, L.nS
    for name, P in (("A0", spec.A0), ("A1", spec.A1), ("A2", spec.A2)):
        if P.shape != (nx, nD):
            errors.append(f"dynamics {name}: expected {nx}x{nD}, got {P.shape[0]}x{P.shape[1]}")
    B = np.atleast_2d(np.asarray(spec.B, dtype=float)) if np.size(spec.B) else np.zeros((0, 2 * nS))
    nbc = B.shape[0]
    if B.shape[1] != 2 * nS:
        errors.append(f"bc B: expected {2 * nS} columns (2 n_S), got {B.shape[1]}")
    if nbc != nS:
        errors.append(f"boundary condition count: n_BC = {nbc} but n_S = {nS}")
    if spec.BI.shape != (nbc, nD):
        errors.append(f"bc BI: expected {nbc}x{nD}, got {spec.BI.shape[0]}x{spec.BI.shape[1]}")
    if errors:
        raise ValidationError(errors)
    return L


def structural_matrices(L: StateLayout) -> dict:
    """``U1``, ``U2`` and the polynomials ``T(eta)``, ``Q(eta)``.

    ``T`` and ``Q`` realize ``x_c(s) = T(s-a) x_c(a) + int_a^s Q(s-t) x_f(t) dt``.
    """
    n0, n1, n2 = L.n0, L.n1, L.n2
    nx, nS, nD = L.nx, L.nS, L.nD
    off = L.xD_offsets()
    U1 = np.zeros((nD, nx))
    U1[off["x0"]:off["x0"] + n0, 0:n0] = np.eye(n0)
    U1[off["dx1"]:off["dx1"] + n1, n0:n0 + n1] = np.eye(n1)
    U1[off["ddx2"]:off["ddx2"] + n2, n0 + n1:nx] = np.eye(n2)
    U2 = np.zeros((nD, nS))
    U2[off["x1"]:off["x1"] + n1, 0:n1] = np.eye(n1)
    U2[off["x2"]:off["x2"] + n2, n1:n1 + n2] = np.eye(n2)
    U2[off["dx2"]:off["dx2"] + n2, n1 + n2:nS] = np.eye(n2)

    T = np.zeros((nS, nS, 2))
    T[:, :, 0] = np.eye(nS)
    T[n1:n1 + n2, n1 + n2:nS, 1] = np.eye(n2)
    Q = np.zeros((nS, nx, 2))
    Q[0:n1, n0:n0 + n1, 0] = np.eye(n1)
    Q[n1:n1 + n2, n0 + n1:nx, 1] = np.eye(n2)
    Q[n1 + n2:nS, n0 + n1:nx, 0] = np.eye(n2)
    return {"U1": U1, "U2": U2, "T": MatPoly1(T), "Q": MatPoly1(Q)}


def compute_BT(spec: PDESpec, L: StateLayout | None = None) -> np.ndarray:
    L = L or validate(spec)
    a, b = spec.interval
    M = structural_matrices(L)
    T = M["T"]
    nS = L.nS
    if nS == 0:
        return np.zeros((0, 0))
    B = np.asarray(spec.B, dtype=float).reshape(nS, 2 * nS)
    stacked = np.vstack([T(0.0), T(b - a)])
    Ta = shift_affine(T, -a)  # T(s - a)
    integrand = spec.BI @ MatPoly1.const(M["U2"]) @ Ta
    return B @ stacked - integrate_full(integrand, a, b)


def check_admissibility(spec: PDESpec) -> AdmissibilityReport:
    L = validate(spec)
    BT = compute_BT(spec, L)
    if BT.size == 0:
        return AdmissibilityReport(BT, np.inf, 0.0, 1.0, True)
    sv = np.linalg.svd(BT, compute_uv=False)
    smax, smin = float(sv[0]), float(sv[-1])
    cond = smax / smin if smin > 0 else np.inf
    ok = smin > ADMISSIBILITY_RTOL * max(1.0, smax)
    return AdmissibilityReport(BT, smin, smax, cond, bool(ok))


# ---------------------------------------------------------------------------
# helpers acting on polynomial PDE states


def derivative_stack(L: StateLayout, x: MatPoly1) -> MatPoly1:
    """``x_D`` for a polynomial state ``x`` (an ``n_x x k`` MatPoly1)."""
    n0, n1, n2 = L.n0, L.n1, L.n2
    x0 = x.block(slice(0, n0), slice(None))
    x1 = x.block(slice(n0, n0 + n1), slice(None))
    x2 = x.block(slice(n0 + n1, L.nx), slice(None))
    parts = [x0, x1, x2, x1.deriv(), x2.deriv(), x2.deriv().deriv()]
    D = max(p.coef.shape[-1] for p in parts)
    return MatPoly1(np.concatenate(
        [np.pad(p.coef, [(0, 0)] * (p.coef.ndim - 1) + [(0, D - p.coef.shape[-1])]) for p in parts],
        axis=-3))


def apply_D(L: StateLayout, x: MatPoly1) -> MatPoly1:
    """``D x = [x0; dx1; ddx2]``."""
    xD = derivative_stack(L, x)
    M = structural_matrices(L)
    return MatPoly1.const(M["U1"].T) @ xD


def continuous_stack(L: StateLayout, x: MatPoly1) -> MatPoly1:
    M = structural_matrices(L)
    return MatPoly1.const(M["U2"].T) @ derivative_stack(L, x)


def bc_residual(spec: PDESpec, x: MatPoly1) -> np.ndarray:
    """``B x_b - int B_I x_D`` for a polynomial state."""
    L = spec.layout
    a, b = spec.interval
    if L.nS == 0:
        return np.zeros((0, x.cols))
    xc = continuous_stack(L, x)
    xb = np.vstack([xc(a), xc(b)])
    B = np.asarray(spec.B, dtype=float).reshape(L.nS, 2 * L.nS)
    return B @ xb - integrate_full(spec.BI @ derivative_stack(L, x), a, b)


def x_inner(L: StateLayout, x: MatPoly1, y: MatPoly1, interval) -> float:
    """``<D x, D y>_{L2}``, the inner product that makes ``T`` unitary."""
    a, b = interval
    return float(integrate_full(apply_D(L, x).T @ apply_D(L, y), a, b)[0, 0])
