"""Dense block semidefinite programming.

Problem form (the SDPA "dual" / CSDP convention)::

    maximize   <C, X>
    subject to <A_i, X> = b_i,  i = 1..m
               X = diag(X_1, ..., X_K) >= 0

with dual ``minimize b'y  s.t.  sum_i y_i A_i - C = Z >= 0``.

The solver is an infeasible-start primal-dual path-following method with
the HKM search direction and Mehrotra predictor-corrector steps.  Primal
infeasibility is reported when the dual iterate becomes an improving ray.
"""

from __future__ import annotations

import logging
import math
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

MAX_ITER = 200
PRIMAL_TOL = 1e-8
DUAL_TOL = 1e-8
GAP_TOL = 1e-9
RAY_RATIO = 1e8
STEP_FRACTION = 0.98
REFINE_STEPS = 2

EXTERNAL_SOLVER_ENV = "PIESTAB_SDPA_EXE"


class SDPBreakdown(RuntimeError):
    """Numerical failure inside an interior-point step."""

    def __init__(self, step: str, iteration: int, detail: str = ""):
        super().__init__(f"numerical breakdown in {step} at iteration {iteration}"
                         + (f": {detail}" if detail else ""))
        self.step = step
        self.iteration = iteration


def _smax(M) -> float:
    M = sp.csr_matrix(M)
    return float(np.max(np.abs(M.data))) if M.nnz else 0.0


@dataclass
class SDPData:
    """Block structure, constraint matrices and right-hand sides.

    ``A`` is an ``m x N`` sparse matrix with ``N = sum(n_k**2)``; row ``i``
    holds the row-major vectorization of each block of ``A_i`` (both
    triangles).  ``C`` is the objective in the same layout, or ``None``.
    """

    blocks: tuple[int, ...]
    A: sp.csr_matrix
    b: np.ndarray
    C: sp.csr_matrix | None = None

    def __post_init__(self):
        self.blocks = tuple(int(n) for n in self.blocks)
        if any(n <= 0 for n in self.blocks):
            raise ValueError("block dimensions must be positive")
        N = sum(n * n for n in self.blocks)
        self.A = sp.csr_matrix(self.A, shape=(len(self.b), N)) if self.A is not None \
            else sp.csr_matrix((len(self.b), N))
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape != (self.b.size, N):
            raise ValueError(f"A must be {self.b.size}x{N}, got {self.A.shape}")
        if self.C is not None:
            self.C = sp.csr_matrix(self.C, shape=(1, N))
        if not np.all(np.isfinite(self.A.data)) or not np.all(np.isfinite(self.b)):
            raise ValueError("non-finite SDP data")
        perm = self._transpose_perm()
        if _smax(self.A - self.A[:, perm]) > 1e-12 * max(1.0, _smax(self.A)):
            raise ValueError("constraint matrices must be symmetric")
        if self.C is not None and _smax(self.C - self.C[:, perm]) > 0:
            raise ValueError("objective matrix must be symmetric")
        if self.m > self.cone_dim:
            raise ValueError(f"{self.m} constraints exceed the cone dimension {self.cone_dim}")

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def offsets(self) -> list[int]:
        out, o = [], 0
        for n in self.blocks:
            out.append(o)
            o += n * n
        return out

    @property
    def cone_dim(self) -> int:
        return sum(n * (n + 1) // 2 for n in self.blocks)

    def _transpose_perm(self) -> np.ndarray:
        perm = []
        for n, o in zip(self.blocks, self.offsets):
            idx = np.arange(n * n).reshape(n, n)
            perm.append(o + idx.T.ravel())
        return np.concatenate(perm) if perm else np.zeros(0, dtype=int)

    @classmethod
    def from_entries(cls, blocks, constraints, objective=None) -> "SDPData":
        """``constraints``: list of ``(entries, rhs)`` with entries
        ``(block, row, col, value)`` (0-based, either triangle; mirrored)."""
        blocks = tuple(int(n) for n in blocks)
        offs = np.concatenate([[0], np.cumsum([n * n for n in blocks])]).astype(int)

        def coo(entries):
            r, c, v = [], [], []
            for blk, i, j, val in entries:
                n = blocks[blk]
                r.append(offs[blk] + i * n + j)
                v.append(float(val))
                if i != j:
                    r.append(offs[blk] + j * n + i)
                    v.append(float(val))
            return r, v

        rows, cols, vals = [], [], []
        for k, (entries, _) in enumerate(constraints):
            c, v = coo(entries)
            rows += [k] * len(c)
            cols += c
            vals += v
        N = int(offs[-1])
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(constraints), N))
        A.sum_duplicates()
        C = None
        if objective:
            c, v = coo(objective)
            C = sp.csr_matrix((v, ([0] * len(c), c)), shape=(1, N))
            C.sum_duplicates()
        return cls(blocks, A, np.array([r for _, r in constraints], dtype=float), C)

    def constraint_block(self, i: int, k: int) -> np.ndarray:
        n, o = self.blocks[k], self.offsets[k]
        return self.A[i, o:o + n * n].toarray().reshape(n, n)

    def objective_block(self, k: int) -> np.ndarray:
        n, o = self.blocks[k], self.offsets[k]
        if self.C is None:
            return np.zeros((n, n))
        return self.C[0, o:o + n * n].toarray().reshape(n, n)


@dataclass
class SDPSolution:
    status: str                      # optimal | infeasible_detected | max_iter
    X: list[np.ndarray]
    y: np.ndarray
    Z: list[np.ndarray]
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    ray_ratio: float = 0.0
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def primal_objective(self) -> float:
        return self._pobj

    def min_eigenvalues(self) -> list[float]:
        return [float(np.linalg.eigvalsh(Xk)[0]) if Xk.size else 0.0 for Xk in self.X]


# ---------------------------------------------------------------------------


def _vec(blocks: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([B.ravel() for B in blocks]) if blocks else np.zeros(0)


def _unvec(v: np.ndarray, sizes) -> list[np.ndarray]:
    out, o = [], 0
    for n in sizes:
        out.append(v[o:o + n * n].reshape(n, n))
        o += n * n
    return out


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _is_pd(X: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return False
    return True


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest ``t`` with ``X + t dX >= 0`` (``X`` positive definite)."""
    L = np.linalg.cholesky(X)
    W = sla.solve_triangular(L, sla.solve_triangular(L, dX, lower=True).T, lower=True)
    lam = np.linalg.eigvalsh(_sym(W))[0]
    return math.inf if lam >= 0 else -1.0 / lam


class _BlockOps:
    """Per-block views of the constraint matrix used to form the Schur complement."""

    def __init__(self, data: SDPData):
        self.sizes = data.blocks
        self.m = data.m
        self.blocks = []
        A = data.A.tocsc()
        for n, o in zip(data.blocks, data.offsets):
            Ak = A[:, o:o + n * n].tocoo()
            # stacked rows (i, p) x column q  ->  A_i[p, q]
            S = sp.csr_matrix((Ak.data, (Ak.row * n + Ak.col // n, Ak.col % n)),
                              shape=(self.m * n, n))
            self.blocks.append((n, Ak.tocsr(), S))

    def schur(self, X: list[np.ndarray], Zinv: list[np.ndarray]) -> np.ndarray:
        m = self.m
        M = np.zeros((m, m))
        for (n, Ak, S), Xk, Zk in zip(self.blocks, X, Zinv):
            if Ak.nnz == 0:
                continue
            AX = (S @ Xk).reshape(m, n, n)          # A_i X
            if m > n:
                # H_i = X A_i Z^-1, then M_ji = <A_j, H_i>
                H = np.matmul(np.transpose(AX, (0, 2, 1)), Zk)
                M += (Ak @ H.reshape(m, n * n).T).T
            else:
                AZ = (S @ Zk).reshape(m, n, n)      # A_j Z^-1
                M += AX.reshape(m, n * n) @ np.transpose(AZ, (0, 2, 1)).reshape(m, n * n).T
        return _sym(M)


def _independent_rows(A: sp.csr_matrix, b: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; flag inconsistent systems.

    Returns ``(keep, inconsistent, y_ray)`` where ``y_ray`` (when
    inconsistent) satisfies ``A' y = 0`` and ``b' y = 1``.
    """
    m = A.shape[0]
    if m == 0:
        return np.arange(0), False, None
    G = (A @ A.T).toarray()
    w = np.linalg.eigvalsh(G)
    if w[0] > tol * max(w[-1], 1.0):
        return np.arange(m), False, None
    Ad = A.toarray()
    _, R, piv = sla.qr(Ad.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > tol ** 0.5 * max(d[0], 1e-300)))
    keep = np.sort(piv[:rank])
    # consistency: b must lie in the range of A A' restricted to kept rows
    coef, *_ = np.linalg.lstsq(Ad[keep].T, Ad.T, rcond=None)   # A' = A_keep' coef
    resid = b - coef.T @ b[keep]
    scale = 1.0 + np.max(np.abs(b))
    if np.max(np.abs(resid)) > 1e-9 * scale:
        y = np.zeros(m)
        j = int(np.argmax(np.abs(resid)))
        y[j] = 1.0
        y[keep] -= coef[:, j]
        y /= b @ y
        return keep, True, y
    return keep, False, None


def solve(data: SDPData, max_iter: int = MAX_ITER, verbose: bool = False) -> SDPSolution:
    """Solve to ``PRIMAL_TOL``/``DUAL_TOL``/``GAP_TOL``; deterministic for identical input.

    Internally the problem is written as ``min <c, x>`` with ``c = -C`` and
    embedded in the homogeneous self-dual system

        A x - b tau = 0,   A'w + s - c tau = 0,   b'w - <c, x> - kappa = 0,

    whose central path stays well defined when the feasible set has no
    interior.  ``tau > 0`` in the limit recovers a solution, ``kappa > 0``
    an infeasibility certificate.  The CSDP-convention dual variable is
    ``y = -w / tau`` and ``Z = s / tau``.
    """
    sizes = data.blocks
    keep, inconsistent, yray = _independent_rows(data.A, data.b)
    if inconsistent:
        X = [np.zeros((n, n)) for n in sizes]
        Z = [np.zeros((n, n)) for n in sizes]
        sol = SDPSolution("infeasible_detected", X, -yray, Z, math.inf, 0.0, math.inf, 0,
                          math.inf, "equality constraints are inconsistent")
        sol._pobj = 0.0
        return sol
    A = data.A[keep]
    b = data.b[keep]
    m = b.size
    c = -data.C.toarray().ravel() if data.C is not None else np.zeros(A.shape[1])
    ops = _BlockOps(SDPData(sizes, A, b, data.C))
    At = A.T.tocsr()
    nu = sum(sizes)
    nrm_b, nrm_c = np.linalg.norm(b), np.linalg.norm(c)
    c_b = _unvec(c, sizes)
    has_c = bool(np.any(c))

    x = [np.eye(n) for n in sizes]
    s = [np.eye(n) for n in sizes]
    w = np.zeros(m)
    tau = kappa = 1.0

    history = []
    best = (math.inf,)
    status, msg = "max_iter", ""
    pinf = dinf = gap = ray = math.inf
    it = 0

    def inner(U, V):
        return float(sum(np.vdot(u, v) for u, v in zip(U, V)))

    for it in range(max_iter + 1):
        xv, sv = _vec(x), _vec(s)
        Atw = At @ w
        rp = tau * b - A @ xv                      # A x - b tau = 0
        rd = tau * c - Atw - sv                    # A'w + s - c tau = 0
        cx, bw = float(c @ xv), float(b @ w)
        rg = kappa - bw + cx                       # b'w - c'x - kappa = 0
        mu = (float(xv @ sv) + tau * kappa) / (nu + 1)

        pinf = np.linalg.norm(rp) / tau / (1.0 + nrm_b)
        dinf = np.linalg.norm(rd) / tau / (1.0 + nrm_c)
        pobj, dobj = -cx / tau, -bw / tau          # CSDP-convention objectives
        gap = float(xv @ sv) / tau ** 2 / (1.0 + abs(pobj) + abs(dobj))
        ray = bw / max(np.linalg.norm(Atw + sv), 1e-300) if bw > 0 else 0.0
        history.append((it, pinf, dinf, gap, ray, tau, kappa))
        merit = max(pinf, dinf, gap)
        if merit < best[0]:
            best = (merit, x, s, w, tau, kappa, pinf, dinf, gap, it)
        if verbose:
            log.info("it %3d pinf %.2e dinf %.2e gap %.2e ray %.2e tau %.2e kappa %.2e",
                     it, pinf, dinf, gap, ray, tau, kappa)
        if pinf <= PRIMAL_TOL and dinf <= DUAL_TOL and gap <= GAP_TOL:
            status = "optimal"
            break
        if ray >= RAY_RATIO:
            status, msg = "infeasible_detected", f"dual ray ratio {ray:.3e}"
            break
        if has_c and cx < 0 and np.linalg.norm(A @ xv) * RAY_RATIO <= -cx:
            msg = "primal unbounded (dual infeasible)"
            break
        if it == max_iter:
            msg = f"iteration cap {max_iter} reached"
            break

        try:
            sinv = [np.linalg.inv(sk) for sk in s]
        except np.linalg.LinAlgError as exc:
            raise SDPBreakdown("dual inverse", it, str(exc)) from exc
        M = ops.schur(x, sinv)
        try:
            cf = sla.cho_factor(M + 1e-14 * max(np.trace(M), 1.0) / max(m, 1) * np.eye(m))
            solve0 = lambda r: sla.cho_solve(cf, r)
        except (np.linalg.LinAlgError, ValueError):
            try:
                lu = sla.lu_factor(M)
                solve0 = lambda r: sla.lu_solve(lu, r)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SDPBreakdown("Schur factorization", it, str(exc)) from exc

        def solveM(r, solve0=solve0, M=M):
            u = solve0(r)
            for _ in range(REFINE_STEPS):
                u = u + solve0(r - M @ u)
            return u

        def W(V):
            return [_sym(xk @ vk @ si) for xk, vk, si in zip(x, V, sinv)]

        Wc = W(c_b) if has_c else [np.zeros_like(xk) for xk in x]
        q = A @ _vec(Wc)
        cWc = inner(c_b, Wc)
        v1 = solveM(q + b)

        def direction(sigma, eta, corr=None):
            # complementarity: dx = Rc - W(ds), tau dk + kappa dt = sigma mu - tau kappa [- dt_a dk_a]
            Rc = [sigma * mu * si - xk for xk, si in zip(x, sinv)]
            rk = sigma * mu - tau * kappa
            if corr is not None:
                (dxa, dsa, dta, dka) = corr
                Rc = [R - dx @ ds @ si for R, dx, ds, si in zip(Rc, dxa, dsa, sinv)]
                rk -= dta * dka
            Rc = [_sym(R) for R in Rc]
            rdb = _unvec(eta * rd, sizes)
            Wrd = W(rdb)
            # A dx - b dt = eta rp  ->  M dy - (q + b) dt = r1
            r1 = eta * rp - A @ _vec(Rc) + A @ _vec(Wrd)
            # b'dy - c'dx - dk = eta rg  ->  (b - q)'dy + (cWc + kappa/tau) dt = r2
            r2 = eta * rg + inner(c_b, Rc) - inner(c_b, Wrd) + rk / tau
            u1 = solveM(r1)
            denom = float((b - q) @ v1) + cWc + kappa / tau
            if not np.isfinite(denom) or abs(denom) < 1e-300:
                raise SDPBreakdown("homogeneous elimination", it, "zero pivot")
            dt = (r2 - float((b - q) @ u1)) / denom
            dw = u1 + dt * v1
            if not (np.all(np.isfinite(dw)) and np.isfinite(dt)):
                raise SDPBreakdown("Schur solve", it, "non-finite direction")
            ds = _unvec(eta * rd - At @ dw + dt * c, sizes)
            dx = [R - Wd for R, Wd in zip(Rc, W(ds))]
            dk = (rk - kappa * dt) / tau
            return dx, dw, ds, dt, dk

        def step(dx, ds, dt, dk):
            try:
                a = min([_max_step(xk, d) for xk, d in zip(x, dx)]
                        + [_max_step(sk, d) for sk, d in zip(s, ds)] + [math.inf])
            except np.linalg.LinAlgError as exc:
                raise SDPBreakdown("step length", it, str(exc)) from exc
            if dt < 0:
                a = min(a, -tau / dt)
            if dk < 0:
                a = min(a, -kappa / dk)
            return a

        dxa, dwa, dsa, dta, dka = direction(0.0, 1.0)
        aa = min(1.0, step(dxa, dsa, dta, dka))
        mu_aff = (inner([xk + aa * d for xk, d in zip(x, dxa)], [sk + aa * d for sk, d in zip(s, dsa)])
                  + (tau + aa * dta) * (kappa + aa * dka)) / (nu + 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
        dx, dw, ds, dt, dk = direction(sigma, 1.0 - sigma, (dxa, dsa, dta, dka))
        a = min(1.0, STEP_FRACTION * step(dx, ds, dt, dk))
        if verbose:
            log.info("    step %.3e sigma %.3e", a, sigma)
        # rounding near the boundary can leave the cone; back off until both
        # iterates factor
        for _ in range(60):
            xn = [_sym(xk + a * d) for xk, d in zip(x, dx)]
            sn = [_sym(sk + a * d) for sk, d in zip(s, ds)]
            if all(_is_pd(v) for v in xn + sn):
                break
            a *= 0.5
        x, s = xn, sn
        w = w + a * dw
        tau += a * dt
        kappa += a * dk
        if a < 1e-10:
            msg = f"step length collapsed at iteration {it}"
            break

    if status == "max_iter" and best[0] < max(pinf, dinf, gap):
        # late iterations can lose accuracy; report the best iterate seen
        _, x, s, w, tau, kappa, pinf, dinf, gap, best_it = best
        msg = f"{msg}; best iterate {best_it} reported"
    X = [xk / tau for xk in x]
    Z = [sk / tau for sk in s]
    y = -w / tau
    if status == "infeasible_detected":
        # report the normalized ray itself: b'y = -1 in the CSDP convention
        y = -w / float(b @ w)
        Z = [sk / float(b @ w) for sk in s]
    sol = SDPSolution(status, X, y, Z, float(pinf), float(dinf), float(gap), it, float(ray),
                      msg, history)
    sol._pobj = float(-c @ _vec(X))
    if keep.size != data.m:
        yfull = np.zeros(data.m)
        yfull[keep] = sol.y
        sol.y = yfull
    return sol


# ---------------------------------------------------------------------------
# feasibility with a margin and facial reduction

MARGIN_CAP = 1.0
MARGIN_TOL = 1e-7
ACCEPT_RESIDUAL = 1e-6
POLISH_ROUNDS = 50
POLISH_TARGET = 1e-10


@dataclass
class FeasibilityResult:
    """Outcome of :func:`solve_feasibility`.

    ``status`` is ``feasible`` (``X`` is PSD and meets the equalities to the
    residual reported in ``residual``), ``infeasible`` (the dual bound on the
    margin is below ``-tol``, or the equalities are inconsistent) or
    ``failed``.  ``margin`` is the primal eigenvalue margin reached,
    ``bound`` the dual upper bound on it.
    """

    status: str
    X: list[np.ndarray]
    margin: float
    bound: float
    residual: float
    solution: SDPSolution | None
    message: str = ""

    @property
    def iterations(self) -> int:
        return self.solution.iterations if self.solution is not None else 0


def margin_problem(data: SDPData, cap: float = MARGIN_CAP) -> SDPData:
    """``max t  s.t.  <A_i, Xt + t I> = b_i,  Xt >= 0,  -cap <= t <= cap``.

    ``t = t1 - cap`` with ``t1 + u = 2 cap``; ``t1`` and ``u`` are appended
    as two ``1 x 1`` blocks.  The problem is strictly feasible whenever the
    equalities are consistent and some solution has eigenvalues above
    ``-cap``.
    """
    blocks = data.blocks + (1, 1)
    N0 = data.A.shape[1]
    e = np.zeros(data.m)
    for n, o in zip(data.blocks, data.offsets):
        diag = o + np.arange(n) * (n + 1)
        e += np.asarray(data.A[:, diag].sum(axis=1)).ravel()
    A = sp.hstack([data.A, sp.csr_matrix(e[:, None]), sp.csr_matrix((data.m, 1))])
    cap_row = sp.csr_matrix(([1.0, 1.0], ([0, 0], [N0, N0 + 1])), shape=(1, N0 + 2))
    A = sp.vstack([A, cap_row]).tocsr()
    b = np.concatenate([data.b + cap * e, [2.0 * cap]])
    C = sp.csr_matrix(([1.0], ([0], [N0])), shape=(1, N0 + 2))
    return SDPData(blocks, A, b, C)


def _psd_part(X: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(X)
    return _sym((U * np.maximum(w, 0.0)) @ U.T)


def _residual(data: SDPData, X: list[np.ndarray]) -> float:
    r = float(np.max(np.abs(data.A @ _vec(X) - data.b), initial=0.0))
    return r / (1.0 + float(np.max(np.abs(data.b), initial=0.0)))


def _polish(data: SDPData, X: list[np.ndarray], rounds: int = POLISH_ROUNDS) -> list[np.ndarray]:
    """Alternate projections onto the affine set and the cone; keeps the best point."""
    keep, _, _ = _independent_rows(data.A, data.b)
    A, b = data.A[keep].toarray(), data.b[keep]
    Q, R = np.linalg.qr(A.T)
    sizes = data.blocks
    best, best_r = X, _residual(data, X)
    for _ in range(rounds):
        if best_r <= POLISH_TARGET:
            break
        v = _vec(X)
        v = v + Q @ sla.solve_triangular(R, b - A @ v, trans="T")
        X = [_psd_part(Xk) for Xk in _unvec(v, sizes)]
        r = _residual(data, X)
        if r < best_r:
            best, best_r = X, r
    return best


def solve_feasibility(data: SDPData, max_iter: int = MAX_ITER, cap: float = MARGIN_CAP,
                      tol: float = MARGIN_TOL, verbose: bool = False) -> FeasibilityResult:
    """Find ``X >= 0`` with ``<A_i, X> = b_i`` through the eigenvalue-margin problem.

    Many problems of interest have feasible sets without interior, or are
    feasible only in the limit; the margin problem stays well posed in both
    cases.  A margin within ``tol`` of zero is accepted: the iterate is
    projected onto the cone and its equality residual is reported, so the
    caller decides whether it is small enough.  A dual bound below ``-tol``
    proves that no solution has eigenvalues above that bound.
    """
    sizes = data.blocks
    zero = [np.zeros((n, n)) for n in sizes]
    keep, inconsistent, _ = _independent_rows(data.A, data.b)
    if inconsistent:
        return FeasibilityResult("infeasible", zero, -math.inf, -math.inf, math.inf, None,
                                 "equality constraints are inconsistent")
    if not sizes:
        return FeasibilityResult("feasible", [], math.inf, math.inf, 0.0, None, "empty problem")
    mp = margin_problem(data, cap)
    try:
        sol = solve(mp, max_iter=max_iter, verbose=verbose)
    except SDPBreakdown as exc:
        return FeasibilityResult("failed", zero, math.nan, math.nan, math.inf, None, str(exc))
    if sol.status == "infeasible_detected":
        # cannot happen for consistent equalities unless every solution
        # has an eigenvalue below -cap
        return FeasibilityResult("infeasible", zero, -math.inf, -cap, math.inf, sol,
                                 f"margin below {-cap:g}: {sol.message}")
    t = float(sol.X[-2][0, 0]) - cap
    bound = float(mp.b @ sol.y) - cap if sol.dual_residual <= ACCEPT_RESIDUAL else math.inf
    nb = len(sizes)
    X = [_psd_part(sol.X[k] + t * np.eye(sizes[k])) for k in range(nb)]
    if t >= -tol:
        X = _polish(data, X)
    resid = _residual(data, X)
    if verbose:
        log.info("margin %.3e, bound %.3e, residual %.3e (%s)", t, bound, resid, sol.status)
    if bound < -tol:
        return FeasibilityResult("infeasible", X, t, bound, resid, sol,
                                 f"best eigenvalue margin is at most {bound:.3e}")
    if t >= -tol and resid <= ACCEPT_RESIDUAL:
        return FeasibilityResult("feasible", X, t, bound, resid, sol, sol.message)
    return FeasibilityResult("failed", X, t, bound, resid, sol,
                             f"margin problem {sol.status}: margin {t:.3e}, bound {bound:.3e}, "
                             f"residual {resid:.3e} {sol.message}".strip())


# ---------------------------------------------------------------------------
# sparse interchange format


def _fmt(v: float) -> str:
    return repr(float(v))


def export_interchange(data: SDPData, path: str | Path | None = None) -> str:
    """Sparse SDPA text.  Matrix 0 is the objective ``C``; entries are
    upper-triangular with 1-based indices."""
    lines = [str(data.m), str(len(data.blocks)),
             " ".join(str(n) for n in data.blocks),
             " ".join(_fmt(v) for v in data.b)]

    def emit(row, k_label):
        row = row.tocoo()
        items = []
        for col, val in zip(row.col, row.data):
            blk = int(np.searchsorted(np.array(data.offsets), col, side="right") - 1)
            n, o = data.blocks[blk], data.offsets[blk]
            i, j = divmod(int(col) - o, n)
            if i <= j and val != 0.0:
                items.append((blk, i, j, val))
        for blk, i, j, val in sorted(items):
            lines.append(f"{k_label} {blk + 1} {i + 1} {j + 1} {_fmt(val)}")

    if data.C is not None:
        emit(data.C, 0)
    for i in range(data.m):
        emit(data.A[i], i + 1)
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def external_solver() -> str | None:
    """Executable named by ``PIESTAB_SDPA_EXE`` if it exists (cross-check runs only)."""
    exe = os.environ.get(EXTERNAL_SOLVER_ENV)
    if not exe:
        return None
    return shutil.which(exe) or (exe if Path(exe).is_file() else None)


def run_external(data: SDPData, timeout: float = 600.0) -> str | None:
    """Run the external solver on the exported problem; returns its stdout."""
    exe = external_solver()
    if exe is None:
        return None
    with tempfile.TemporaryDirectory() as tmp:
        f = Path(tmp) / "problem.dat-s"
        export_interchange(data, f)
        out = Path(tmp) / "problem.out"
        res = subprocess.run([exe, str(f), str(out)], capture_output=True, text=True,
                             timeout=timeout, check=False)
        return res.stdout
