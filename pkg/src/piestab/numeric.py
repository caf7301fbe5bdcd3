"""Collocation oracle: discretized PI operators, pencil spectra and time stepping.

Functions are sampled at ``N`` Chebyshev-Gauss-Lobatto nodes of ``[a, b]``.
Variable-limit integrals use the spectral antiderivative of the Chebyshev
interpolant, evaluated back at the nodes.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.chebyshev as C
import scipy.linalg as sla

from .convert import PIESystem
from .pialg import PIOperator

log = logging.getLogger(__name__)

INF_FILTER = 1e8
DEFAULT_N = 32
MAX_N = 256
CONVERGENCE_TOL = 1e-6
RESOLUTION_TOL = 1e-4


class PencilError(RuntimeError):
    pass


class StepMatrixError(RuntimeError):
    pass


@dataclass(frozen=True)
class CollocationGrid:
    """Nodes (ascending), Clenshaw-Curtis weights and cumulative integration
    matrices ``L`` (``int_a^s``) and ``U`` (``int_s^b``)."""

    nodes: np.ndarray
    weights: np.ndarray
    L: np.ndarray
    U: np.ndarray
    interval: tuple[float, float]
    to_cheb: np.ndarray          # node values -> Chebyshev coefficients

    @property
    def N(self) -> int:
        return self.nodes.size

    @classmethod
    def build(cls, N: int, interval=(0.0, 1.0)) -> "CollocationGrid":
        if N < 2:
            raise ValueError("need at least 2 nodes")
        a, b = map(float, interval)
        t = -np.cos(np.pi * np.arange(N) / (N - 1))      # ascending on [-1, 1]
        V = C.chebvander(t, N - 1)
        Vinv = np.linalg.inv(V)
        # antiderivative from -1 of each T_k, as coefficient columns
        anti = np.stack([C.chebint(np.eye(N)[k], lbnd=-1) for k in range(N)], axis=1)
        Lref = C.chebvander(t, N) @ anti @ Vinv
        half = 0.5 * (b - a)
        L = half * Lref
        w = L[-1].copy()
        U = w[None, :] - L
        return cls(a + half * (t + 1.0), w, L, U, (a, b), Vinv)

    def integrate(self, f: np.ndarray) -> float:
        return float(self.weights @ f)


def discretize(P: PIOperator, grid: CollocationGrid) -> np.ndarray:
    """Matrix of ``P`` acting on stacked samples (component-major: ``c * N + j``)."""
    N, s = grid.N, grid.nodes
    r, c = P.rows, P.cols
    M = np.zeros((r * N, c * N))
    R0 = P.R0.eval_many(s)                    # (r, c, N)
    R1 = P.R1.eval_grid(s, s)                 # (r, c, N, N)
    R2 = P.R2.eval_grid(s, s)
    for i in range(r):
        for j in range(c):
            blk = R1[i, j] * grid.L + R2[i, j] * grid.U
            blk[np.diag_indices(N)] += R0[i, j]
            M[i * N:(i + 1) * N, j * N:(j + 1) * N] = blk
    return M


def sample(v, grid: CollocationGrid) -> np.ndarray:
    """Stack samples of a column MatPoly1 (or callable returning ``(k,)``)."""
    vals = np.array([np.ravel(v(x)) for x in grid.nodes])   # (N, k)
    return vals.T.ravel()


@dataclass
class DiscretizedPIE:
    T: np.ndarray
    A: np.ndarray
    grid: CollocationGrid
    pie: PIESystem

    @classmethod
    def build(cls, pie: PIESystem, N: int = DEFAULT_N) -> "DiscretizedPIE":
        grid = CollocationGrid.build(N, pie.interval)
        return cls(discretize(pie.T, grid), discretize(pie.A, grid), grid, pie)

    @property
    def nx(self) -> int:
        return self.pie.nx

    def reconstruct(self, xf: np.ndarray) -> np.ndarray:
        return self.T @ xf

    def l2_norm(self, v: np.ndarray) -> float:
        blocks = v.reshape(-1, self.grid.N)
        return float(np.sqrt(max(sum(self.grid.integrate(b * b) for b in blocks), 0.0)))


@dataclass
class Spectrum:
    """Pencil eigenvalues split into resolved (``finite``), ``unresolved`` and
    ``infinite``.  A finite eigenvalue is unresolved when the Chebyshev
    coefficients of its eigenvector have not decayed over the top quarter
    of the spectrum (such modes grow with ``N`` and are discretization
    artifacts)."""

    finite: np.ndarray          # sorted by decreasing real part
    infinite: np.ndarray
    N: int
    history: list
    unresolved: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    @property
    def rightmost(self) -> float:
        return float(self.finite[0].real) if self.finite.size else -np.inf

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "classification"])
        for vals, label in ((self.finite, "finite"), (self.unresolved, "unresolved"),
                            (self.infinite, "infinite")):
            for lam in vals:
                re, im = (lam.real, lam.imag) if np.isfinite(lam) else (np.inf, 0.0)
                w.writerow([repr(float(re)), repr(float(im)), label])
        return buf.getvalue()


def _sort(lam: np.ndarray) -> np.ndarray:
    return lam[np.lexsort((-lam.imag, -lam.real))]


def pencil_eigenvalues(D: DiscretizedPIE):
    """``(finite, unresolved, infinite)`` eigenvalues of ``A_N v = lam T_N v``."""
    empty = np.zeros(0, complex)
    if D.A.size == 0:
        return empty, empty, empty
    w, V = sla.eig(D.A, D.T, right=True, homogeneous_eigvals=True)
    alpha, beta = w
    if np.all(np.abs(beta) < 1e-14 * max(1.0, np.abs(alpha).max())) and D.T.any():
        raise PencilError(f"pencil singular at N = {D.grid.N}: cond(T_N) = {np.linalg.cond(D.T):.3e}")
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = alpha / beta
    bad = ~np.isfinite(lam) | (np.abs(lam) > INF_FILTER)
    N = D.grid.N
    coef = np.einsum("kj,cjm->ckm", D.grid.to_cheb, V.reshape(-1, N, V.shape[1]))
    mag = np.abs(coef).max(axis=0)                       # (N, modes)
    tail = mag[-max(N // 4, 1):].max(axis=0) / np.maximum(mag.max(axis=0), 1e-300)
    unres = ~bad & (tail > RESOLUTION_TOL)
    ok = ~bad & ~unres
    return _sort(lam[ok]), _sort(lam[unres]), lam[bad]


def spectrum(pie: PIESystem, N: int | None = None, max_N: int = MAX_N,
             tol: float = CONVERGENCE_TOL) -> Spectrum:
    """Generalized eigenvalues of ``(A_N, T_N)``.

    With ``N`` given the grid is fixed; otherwise ``N`` doubles from 32 until
    the rightmost real part moves by less than ``tol`` or reaches ``max_N``.
    """
    if N is not None:
        fin, unres, inf = pencil_eigenvalues(DiscretizedPIE.build(pie, N))
        out = Spectrum(fin, inf, N, [], unres)
        out.history.append((N, out.rightmost))
        return out
    history = []
    n, prev = DEFAULT_N, None
    while True:
        fin, unres, inf = pencil_eigenvalues(DiscretizedPIE.build(pie, n))
        out = Spectrum(fin, inf, n, history, unres)
        history.append((n, out.rightmost))
        if prev is not None and abs(out.rightmost - prev) < tol:
            return out
        if 2 * n > max_N:
            return out
        prev = out.rightmost
        n *= 2


@dataclass
class Trajectory:
    t: np.ndarray
    xf: np.ndarray              # (steps+1, nx*N)
    x: np.ndarray               # reconstructed T x_f
    xf_norm: np.ndarray
    x_norm: np.ndarray
    grid: CollocationGrid
    notes: list = field(default_factory=list)

    def to_csv(self, which: str = "x") -> str:
        data = self.x if which == "x" else self.xf
        N = self.grid.N
        nblk = data.shape[1] // N if N else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{c + 1}_node_{j + 1}" for c in range(nblk) for j in range(N)])
        for tk, row in zip(self.t, data):
            w.writerow([repr(float(tk))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def decay_rate(self, t0: float = 0.0, t1: float | None = None) -> float:
        """Least-squares slope of ``-log ||x(t)||`` over ``[t0, t1]``."""
        t1 = self.t[-1] if t1 is None else t1
        m = (self.t >= t0) & (self.t <= t1 + 1e-12)
        return float(-np.polyfit(self.t[m], np.log(self.x_norm[m]), 1)[0])


def simulate(D: DiscretizedPIE, xf0: np.ndarray, horizon: float, h: float) -> Trajectory:
    """Trapezoidal stepping ``(T - h/2 A) x_{k+1} = (T + h/2 A) x_k``."""
    if h <= 0 or horizon < 0:
        raise ValueError("need h > 0 and horizon >= 0")
    steps = int(round(horizon / h))
    lhs = D.T - 0.5 * h * D.A
    rhs = D.T + 0.5 * h * D.A
    try:
        lu = sla.lu_factor(lhs, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise StepMatrixError(f"step matrix singular ({exc}); try a smaller h or larger N") from exc
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(np.diag(lu[0]))):
        raise StepMatrixError("step matrix numerically singular; try a smaller h or larger N")
    xf = np.empty((steps + 1, xf0.size))
    xf[0] = xf0
    for k in range(steps):
        xf[k + 1] = sla.lu_solve(lu, rhs @ xf[k])
    x = xf @ D.T.T
    t = h * np.arange(steps + 1)
    return Trajectory(t, xf, x, np.array([D.l2_norm(v) for v in xf]),
                      np.array([D.l2_norm(v) for v in x]), D.grid, _spurious_notes(D, h))


def _spurious_notes(D: DiscretizedPIE, h: float) -> list[str]:
    """Warn about unresolved eigenvalues with positive real part.

    The trapezoidal rule is not L-stable: such a mode is amplified by
    ``|(1 + h lam/2) / (1 - h lam/2)| > 1`` per step and eventually swamps
    the trajectory even when it starts at round-off level.
    """
    try:
        _, unres, _ = pencil_eigenvalues(D)
    except PencilError:
        return []
    bad = unres[unres.real > 0]
    if not bad.size:
        return []
    lam = bad[np.argmax(np.abs((1 + 0.5 * h * bad) / (1 - 0.5 * h * bad)))]
    g = float(np.abs((1 + 0.5 * h * lam) / (1 - 0.5 * h * lam)))
    msg = (f"{bad.size} unresolved eigenvalue(s) with positive real part (largest factor from "
           f"{lam.real:.3e}); spurious growth by {g:.6f} per step once excited")
    log.warning(msg)
    return [msg]
