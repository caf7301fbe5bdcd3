"""Lyapunov stability LPI for a PIE ``T x_f' = A x_f``.

Find ``P = Z_P* Q_P Z_P + alpha I`` and ``Q_H >= 0`` with

    -(T* P A + A* P T) - delta T* T = Z_H* Q_H Z_H,    Q_P >= 0.

Both sides are 3-PI operators with polynomial kernels, so the identity is
imposed coefficient by coefficient, giving a semidefinite feasibility
problem in the entries of ``Q_P`` and ``Q_H``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from . import sdp
from .convert import PIESystem
from .pialg import (GramBasis, PIOperator, adjoint, compose, gram_linear_map, gram_operator,
                    svec_to_sym)
from .polyalg import MatPoly1, _pad_to

log = logging.getLogger(__name__)

ALPHA = 1e-4
DELTA = 1e-4
MAX_DP = 3
EQ_TOL = 1e-7
EIG_RTOL = 1e-8
ZERO_RTOL = 1e-12

VERDICTS = ("certified_stable", "infeasible_at_degree", "solver_failure")
NO_CERT_TEXT = "no certificate at this degree"


class DegreeError(ValueError):
    """``Z_H`` cannot represent some monomials present in the left-hand side."""

    def __init__(self, missing: list[tuple]):
        shown = ", ".join(_fmt_mon(m) for m in missing[:12])
        more = f" (+{len(missing) - 12} more)" if len(missing) > 12 else ""
        super().__init__(f"d_H too small: missing monomials {shown}{more}")
        self.missing = missing


class BisectionError(ValueError):
    pass


def _fmt_mon(m: tuple) -> str:
    slot, i, j, *e = m
    if slot == "R0":
        return f"R0[{i},{j}] s^{e[0]}"
    return f"R1[{i},{j}] s^{e[0]} t^{e[1]}"


def default_dH(pie: PIESystem, d_P: int) -> int:
    return pie.T.degree + pie.A.degree + 2 * d_P + 1


# ---------------------------------------------------------------------------
# coefficient extraction


def _coef_matrix(op: PIOperator, D1: int, D2: tuple[int, int]) -> tuple[np.ndarray, list[tuple]]:
    """Rows ``(batch..., K)`` of independent coefficients of a self-adjoint
    operator: ``R0`` upper triangle and all of ``R1``."""
    n = op.rows
    r0 = _pad_to(op.R0.coef[..., None], (D1, 1))[..., 0]
    r1 = _pad_to(op.R1.coef, D2)
    iu = np.triu_indices(n)
    r0 = r0[..., iu[0], iu[1], :]
    labels = [("R0", int(i), int(j), p) for i, j in zip(*iu) for p in range(D1)]
    labels += [("R1", i, j, p, q) for i in range(n) for j in range(n)
               for p in range(D2[0]) for q in range(D2[1])]
    batch = op.batch_shape
    flat = np.concatenate([r0.reshape(batch + (-1,)), r1.reshape(batch + (-1,))], axis=-1)
    return flat, labels


def _shapes(*ops: PIOperator) -> tuple[int, tuple[int, int]]:
    D1 = max(op.R0.coef.shape[-1] for op in ops)
    Ds = max(max(op.R1.coef.shape[-2], op.R2.coef.shape[-1]) for op in ops)
    Dt = max(max(op.R1.coef.shape[-1], op.R2.coef.shape[-2]) for op in ops)
    return D1, (Ds, Dt)


def lhs_operators(pie: PIESystem, ZP: GramBasis, alpha: float, delta: float):
    """``(G_const, G_var, tri)``: the left-hand side is
    ``G_const + sum_v Q_P[tri[v]] G_var[v]``."""
    T, A = pie.T, pie.A
    Ts = adjoint(T)
    TsA = compose(Ts, A)
    G_const = (TsA + adjoint(TsA)) * (-alpha) - compose(Ts, T) * delta
    Pv, tri = gram_linear_map(ZP)
    X = compose(Ts, compose(Pv, A))
    G_var = -(X + adjoint(X))
    return G_const, G_var, tri


def lhs_operator(pie: PIESystem, ZP: GramBasis, QP: np.ndarray, alpha: float,
                 delta: float) -> PIOperator:
    """``-(T* P A + A* P T) - delta T* T`` for a concrete ``Q_P``."""
    T, A = pie.T, pie.A
    n = pie.nx
    P = PIOperator.identity(n, pie.interval) * alpha
    if ZP.size:
        P = P + gram_operator(ZP, QP)
    X = compose(adjoint(T), compose(P, A))
    return -(X + adjoint(X)) - compose(adjoint(T), T) * delta


# ---------------------------------------------------------------------------


@dataclass
class LPIProblem:
    pie: PIESystem
    ZP: GramBasis
    ZH: GramBasis
    alpha: float
    delta: float
    data: sdp.SDPData
    labels: list[tuple]
    row_scale: np.ndarray
    triP: list[tuple[int, int]]
    triH: list[tuple[int, int]]
    assembly_seconds: float = 0.0

    @property
    def d_P(self) -> int:
        return self.ZP.d1

    @property
    def d_H(self) -> int:
        return self.ZH.d2

    def export(self, path=None) -> str:
        return sdp.export_interchange(self.data, path)

    def summary(self) -> dict:
        return {"d_P": self.d_P, "d_H": self.d_H, "alpha": self.alpha, "delta": self.delta,
                "blocks": list(self.data.blocks), "constraints": self.data.m}


def _block_columns(tri, m: int, offset: int):
    """Full-vec column indices and weights for the upper-triangular parameters."""
    cols_a, cols_b, wts = [], [], []
    for k, l in tri:
        cols_a.append(offset + k * m + l)
        cols_b.append(offset + l * m + k)
        wts.append(1.0 if k == l else 0.5)
    return np.array(cols_a), np.array(cols_b), np.array(wts)


def assemble(pie: PIESystem, d_P: int = 1, d_H: int | None = None, alpha: float = ALPHA,
             delta: float = DELTA) -> LPIProblem:
    if alpha <= 0 or delta <= 0:
        raise ValueError("alpha and delta must be positive")
    t0 = time.perf_counter()
    n, interval = pie.nx, pie.interval
    d_H = default_dH(pie, d_P) if d_H is None else int(d_H)
    ZP = GramBasis(n, d_P, d_P, interval)
    # Z_H* Q_H Z_H only needs a pointwise block on the x0 components: the
    # multiplier of the left-hand side vanishes elsewhere.
    ZH = GramBasis(n, d_H, d_H, interval, multiplier_states=tuple(range(pie.layout.n0)))
    if n == 0:
        data = sdp.SDPData((), sp.csr_matrix((0, 0)), np.zeros(0))
        return LPIProblem(pie, ZP, ZH, alpha, delta, data, [], np.zeros(0), [], [],
                          time.perf_counter() - t0)

    G_const, G_var, triP = lhs_operators(pie, ZP, alpha, delta)
    Hw, triH = gram_linear_map(ZH)
    D1, D2 = _shapes(G_const, G_var, Hw)
    g0, labels = _coef_matrix(G_const, D1, D2)
    gv, _ = _coef_matrix(G_var, D1, D2)
    hw, _ = _coef_matrix(Hw, D1, D2)

    scale = max(np.abs(g0).max(initial=0.0), np.abs(gv).max(initial=0.0),
                np.abs(hw).max(initial=0.0), 1e-300)
    thr = ZERO_RTOL * scale
    gv[np.abs(gv) < thr] = 0.0
    hw[np.abs(hw) < thr] = 0.0
    g0[np.abs(g0) < thr] = 0.0
    has_h = np.any(hw != 0, axis=0)
    has_g = np.any(gv != 0, axis=0) | (g0 != 0)
    missing = [labels[k] for k in np.flatnonzero(has_g & ~has_h)]
    if missing:
        raise DegreeError(missing)
    rows = np.flatnonzero(has_h | has_g)

    # constraint: sum_v q_v gv[v] - sum_w h_w hw[w] = -g0
    coefP = gv[:, rows].T                    # (ncons, nvP)
    coefH = -hw[:, rows].T
    rhs = -g0[rows]
    rs = np.maximum(np.abs(coefP).max(axis=1, initial=0.0), np.abs(coefH).max(axis=1, initial=0.0))
    coefP /= rs[:, None]
    coefH /= rs[:, None]
    rhs = rhs / rs

    mP, mH = ZP.size, ZH.size
    blocks = tuple(b for b in (mP, mH) if b > 0)
    offH = mP * mP if mP else 0
    mats = []
    for coef, tri, m, off in ((coefP, triP, mP, 0), (coefH, triH, mH, offH)):
        if m == 0:
            continue
        ca, cb, w = _block_columns(tri, m, off)
        csr = sp.csr_matrix(coef * w[None, :])
        N = sum(k * k for k in blocks)
        Sa = sp.csr_matrix((np.ones(len(ca)), (np.arange(len(ca)), ca)), shape=(len(ca), N))
        Sb = sp.csr_matrix((np.ones(len(cb)), (np.arange(len(cb)), cb)), shape=(len(cb), N))
        diag = np.array([k == l for k, l in tri])
        Sb = sp.diags((~diag).astype(float)) @ Sb
        mats.append(csr @ (Sa + Sb))
    Amat = sum(mats[1:], mats[0]).tocsr()
    Amat.eliminate_zeros()
    data = sdp.SDPData(blocks, Amat, rhs)
    return LPIProblem(pie, ZP, ZH, alpha, delta, data, [labels[k] for k in rows], rs,
                      triP, triH, time.perf_counter() - t0)


# ---------------------------------------------------------------------------


@dataclass
class StabilityCertificate:
    verdict: str
    Q_P: np.ndarray
    Q_H: np.ndarray
    alpha: float
    delta: float
    d_P: int
    d_H: int
    equality_residual: float
    min_eig_P: float
    min_eig_H: float
    solver_status: str
    iterations: int
    message: str = ""
    timing: dict = field(default_factory=dict)
    margin: float = float("nan")
    margin_bound: float = float("nan")
    ZP: GramBasis | None = None
    ZH: GramBasis | None = None

    @property
    def certified(self) -> bool:
        return self.verdict == "certified_stable"

    def describe(self) -> str:
        if self.verdict == "certified_stable":
            return f"certified stable (d_P={self.d_P}, d_H={self.d_H})"
        if self.verdict == "infeasible_at_degree":
            return f"{NO_CERT_TEXT} (d_P={self.d_P}, d_H={self.d_H})"
        return f"solver failure: {self.message}"

    def to_dict(self, include_gram: bool = False) -> dict:
        out = {"verdict": self.verdict, "d_P": self.d_P, "d_H": self.d_H,
               "alpha": self.alpha, "delta": self.delta,
               "equality_residual": _finite(self.equality_residual),
               "min_eig_Q_P": _finite(self.min_eig_P), "min_eig_Q_H": _finite(self.min_eig_H),
               "solver_status": self.solver_status, "iterations": self.iterations,
               "margin": _finite(self.margin), "margin_bound": _finite(self.margin_bound),
               "gram_sizes": [int(self.Q_P.shape[0]), int(self.Q_H.shape[0])],
               "message": self.message or self.describe()}
        if include_gram:
            out["Q_P"] = self.Q_P.tolist()
            out["Q_H"] = self.Q_H.tolist()
        return out


def _finite(x: float):
    return float(x) if np.isfinite(x) else None


def _min_eig(Q: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(Q)[0]) if Q.size else 0.0


def _psd_ok(Q: np.ndarray) -> bool:
    if Q.size == 0:
        return True
    return _min_eig(Q) >= -EIG_RTOL * max(np.linalg.norm(Q, 2), 1e-300)


def solve(prob: LPIProblem, max_iter: int = sdp.MAX_ITER) -> StabilityCertificate:
    mP, mH = prob.ZP.size, prob.ZH.size
    t0 = time.perf_counter()
    common = dict(alpha=prob.alpha, delta=prob.delta, d_P=prob.d_P, d_H=prob.d_H,
                  ZP=prob.ZP, ZH=prob.ZH)
    if prob.data.m == 0 and not prob.data.blocks:
        return StabilityCertificate("certified_stable", np.zeros((mP, mP)), np.zeros((mH, mH)),
                                    equality_residual=0.0, min_eig_P=0.0, min_eig_H=0.0,
                                    solver_status="optimal", iterations=0,
                                    message="empty problem", **common)
    res = sdp.solve_feasibility(prob.data, max_iter=max_iter)
    timing = {"assemble": prob.assembly_seconds, "solve": time.perf_counter() - t0}
    X = list(res.X)
    QP = X.pop(0) if mP else np.zeros((0, 0))
    QH = X.pop(0) if mH else np.zeros((0, 0))
    xv = np.concatenate([QP.ravel(), QH.ravel()])
    resid = float(np.max(np.abs(prob.data.A @ xv - prob.data.b), initial=0.0))
    eP, eH = _min_eig(QP), _min_eig(QH)
    sol_status = res.solution.status if res.solution is not None else "breakdown"
    if res.status == "feasible":
        ok = resid <= EQ_TOL and _psd_ok(QP) and _psd_ok(QH)
        verdict = "certified_stable" if ok else "solver_failure"
        msg = (f"eigenvalue margin {res.margin:.2e}" if ok else
               f"solution fails checks (residual {resid:.2e}, eig {eP:.2e}/{eH:.2e})")
    elif res.status == "infeasible":
        verdict, msg = "infeasible_at_degree", f"{NO_CERT_TEXT}: {res.message}"
    else:
        verdict, msg = "solver_failure", res.message
    return StabilityCertificate(verdict, QP, QH, equality_residual=resid, min_eig_P=eP,
                                min_eig_H=eH, solver_status=sol_status,
                                iterations=res.iterations, message=msg, timing=timing,
                                margin=res.margin, margin_bound=res.bound, **common)


def certify(pie: PIESystem, d_P: int | None = None, d_H: int | None = None,
            alpha: float = ALPHA, delta: float = DELTA, max_d_P: int = MAX_DP) -> StabilityCertificate:
    """Solve at ``d_P`` (or escalate ``1, 2, ..., max_d_P`` until certified)."""
    degrees = [d_P] if d_P is not None else list(range(1, max_d_P + 1))
    cert = None
    for d in degrees:
        prob = assemble(pie, d, d_H, alpha, delta)
        cert = solve(prob)
        log.info("d_P=%d d_H=%d: %s (%d its)", d, prob.d_H, cert.verdict, cert.iterations)
        if cert.certified:
            break
    return cert


# ---------------------------------------------------------------------------
# independent verification


@dataclass
class VerificationReport:
    verified: bool
    kernel_residual: float
    min_eig_P: float
    min_eig_H: float
    min_lyapunov_margin: float
    min_positivity_margin: float
    failures: list[str]

    def to_dict(self) -> dict:
        return {"verified": self.verified, "kernel_residual": self.kernel_residual,
                "min_eig_Q_P": self.min_eig_P, "min_eig_Q_H": self.min_eig_H,
                "min_lyapunov_margin": self.min_lyapunov_margin,
                "min_positivity_margin": self.min_positivity_margin,
                "failures": list(self.failures)}


def _max_coef_diff(P: PIOperator, Q: PIOperator) -> tuple[float, float]:
    diffs, mags = [], []
    for a, b in ((P.R0.coef, Q.R0.coef), (P.R1.coef, Q.R1.coef), (P.R2.coef, Q.R2.coef)):
        shp = tuple(max(x, y) for x, y in zip(a.shape[-2:], b.shape[-2:])) if a.ndim == 4 \
            else None
        if shp is None:
            D = max(a.shape[-1], b.shape[-1])
            a2 = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(0, D - a.shape[-1])])
            b2 = np.pad(b, [(0, 0)] * (b.ndim - 1) + [(0, D - b.shape[-1])])
        else:
            a2, b2 = _pad_to(a, shp), _pad_to(b, shp)
        diffs.append(np.abs(a2 - b2).max(initial=0.0))
        mags.append(max(np.abs(a2).max(initial=0.0), np.abs(b2).max(initial=0.0)))
    return max(diffs), max(mags)


def _inner(u: MatPoly1, v: MatPoly1, nodes, weights) -> float:
    return float(np.sum(weights * np.sum(u.eval_many(nodes) * v.eval_many(nodes), axis=(0, 1))))


def verify_certificate(pie: PIESystem, cert: StabilityCertificate, samples: int = 50,
                       seed: int = 0, tol: float = 1e-7) -> VerificationReport:
    """Recompute both sides of the LPI from ``Q_P``, ``Q_H`` and test sampled
    quadratic forms with Gauss-Legendre quadrature."""
    failures = []
    ZP, ZH = cert.ZP, cert.ZH
    if ZP is None or ZH is None:
        raise ValueError("certificate carries no Gram bases")
    if ZP.n != pie.nx:
        return VerificationReport(False, np.inf, np.nan, np.nan, np.nan, np.nan,
                                  [f"dimension mismatch: certificate for n_x={ZP.n}, PIE has {pie.nx}"])
    eP, eH = _min_eig(cert.Q_P), _min_eig(cert.Q_H)
    if not _psd_ok(cert.Q_P):
        failures.append(f"Q_P has eigenvalue {eP:.3e}")
    if not _psd_ok(cert.Q_H):
        failures.append(f"Q_H has eigenvalue {eH:.3e}")
    G = lhs_operator(pie, ZP, cert.Q_P, cert.alpha, cert.delta)
    H = gram_operator(ZH, cert.Q_H) if ZH.size else PIOperator.zero(pie.nx, pie.nx, pie.interval)
    diff, mag = _max_coef_diff(G, H)
    rel = diff / max(1.0, mag)
    if rel > 1e-6:
        failures.append(f"kernel identity residual {rel:.3e}")

    a, b = pie.interval
    x, w = np.polynomial.legendre.leggauss(64)
    nodes = 0.5 * (b - a) * (x + 1) + a
    weights = 0.5 * (b - a) * w
    rng = np.random.default_rng(seed)
    n = pie.nx
    P = PIOperator.identity(n, pie.interval) * cert.alpha
    if ZP.size:
        P = P + gram_operator(ZP, cert.Q_P)
    Gfree = G + compose(adjoint(pie.T), pie.T) * cert.delta
    lyap, pos = np.inf, np.inf
    for _ in range(samples):
        v = MatPoly1(rng.standard_normal((n, 1, 6)))
        nv = _inner(v, v, nodes, weights)
        v = v * (1.0 / np.sqrt(nv))
        Tv = pie.T(v)
        lyap = min(lyap, _inner(v, Gfree(v), nodes, weights) - cert.delta * _inner(Tv, Tv, nodes, weights))
        pos = min(pos, _inner(v, P(v), nodes, weights) - cert.alpha)
    if lyap < -tol:
        failures.append(f"<v, G v> < delta ||T v||^2 by {-lyap:.3e}")
    if pos < -tol:
        failures.append(f"<v, P v> < alpha ||v||^2 by {-pos:.3e}")
    return VerificationReport(not failures, rel, eP, eH, float(lyap), float(pos), failures)


# ---------------------------------------------------------------------------
# parameter bisection


@dataclass
class BisectionResult:
    lo: float
    hi: float
    threshold: float | None
    points: list[tuple[float, str]]
    stable_side: str                       # "lo" or "hi"
    spectral_threshold: float | None = None
    spectral_points: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "lpi_threshold": self.threshold,
                "stable_side": self.stable_side,
                "points": [{"value": v, "verdict": r} for v, r in self.points],
                "spectral_threshold": self.spectral_threshold,
                "spectral_points": [{"value": v, "rightmost": _finite(r)}
                                    for v, r in self.spectral_points]}


def _check_monotone(points: list[tuple[float, str]]) -> None:
    seq = [r == "certified_stable" for _, r in sorted(points)]
    changes = sum(1 for u, v in zip(seq, seq[1:]) if u != v)
    if changes > 1:
        raise BisectionError("non-monotone verdict sequence: "
                             + ", ".join(f"{v:g}:{r}" for v, r in sorted(points)))


def bisect_parameter(family: Callable[[float], PIESystem], lo: float, hi: float,
                     tol: float = 0.01, verdict: Callable[[PIESystem], str] | None = None,
                     spectral: Callable[[PIESystem], float] | None = None,
                     grid: int = 0) -> BisectionResult:
    """Bisect LPI verdicts of ``family(p)`` on ``[lo, hi]`` to width ``tol``.

    ``verdict`` maps a PIE to a verdict string (default: :func:`certify`).
    ``spectral`` maps a PIE to its rightmost eigenvalue; when given, the
    oracle's zero crossing is located with Brent's method.  ``grid > 0``
    evaluates that many interior points first to detect non-monotonicity.
    """
    verdict = verdict or (lambda pie: certify(pie).verdict)
    cache: dict[float, str] = {}

    def run(p: float) -> str:
        if p not in cache:
            cache[p] = verdict(family(p))
            log.info("p=%g: %s", p, cache[p])
        return cache[p]

    if hi < lo:
        lo, hi = hi, lo
    v_lo = run(lo)
    if lo == hi:
        return BisectionResult(lo, hi, None, [(lo, v_lo)], "lo" if v_lo == "certified_stable" else "hi")
    v_hi = run(hi)
    for p in np.linspace(lo, hi, grid + 2)[1:-1]:
        run(float(p))
    _check_monotone(list(cache.items()))
    ok_lo, ok_hi = v_lo == "certified_stable", v_hi == "certified_stable"
    if ok_lo == ok_hi:
        raise BisectionError(f"verdicts at both ends agree ({v_lo}); the interval does not "
                             "bracket a threshold")
    stable_side = "lo" if ok_lo else "hi"
    certified = sorted(p for p, r in cache.items() if r == "certified_stable")
    failed = sorted(p for p, r in cache.items() if r != "certified_stable")
    a = certified[-1] if ok_lo else failed[-1]
    b = failed[0] if ok_lo else certified[0]
    while b - a > tol:
        mid = 0.5 * (a + b)
        good = run(mid) == "certified_stable"
        if good == ok_lo:
            a = mid
        else:
            b = mid
    res = BisectionResult(lo, hi, 0.5 * (a + b), sorted(cache.items()), stable_side)
    if spectral is not None:
        res.spectral_threshold, res.spectral_points = spectral_threshold(family, lo, hi, spectral)
    return res


def spectral_threshold(family: Callable[[float], PIESystem], lo: float, hi: float,
                       rightmost: Callable[[PIESystem], float], xtol: float = 1e-8):
    """Zero crossing of the rightmost eigenvalue on ``[lo, hi]`` (``None`` if no sign change)."""
    pts = []

    def f(p):
        r = rightmost(family(p))
        pts.append((float(p), float(r)))
        return r

    f_lo, f_hi = f(lo), f(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0:
        return None, pts
    root = brentq(f, lo, hi, xtol=xtol)
    return float(root), sorted(pts)
