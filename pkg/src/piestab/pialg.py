"""The *-algebra of 3-PI operators with polynomial kernels.

An operator ``P = {R0, R1, R2}`` on ``L2[a, b]`` acts as::

    (P v)(s) = R0(s) v(s) + int_a^s R1(s, t) v(t) dt + int_s^b R2(s, t) v(t) dt

Kernels may carry leading batch axes (see :mod:`piestab.polyalg`); all
operations broadcast over them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .polyalg import (DimensionError, MatPoly1, MatPoly2, integrate, integrate_beta,
                      product3, _pad_to)

DEFAULT_TOL = 1e-10


class PIOperator:
    """A 3-PI operator of dimension ``rows x cols`` on the interval ``(a, b)``."""

    __slots__ = ("R0", "R1", "R2", "interval")

    def __init__(self, R0: MatPoly1, R1: MatPoly2, R2: MatPoly2, interval=(0.0, 1.0)):
        if not (R0.shape == R1.shape == R2.shape):
            raise DimensionError(f"kernel shapes differ: {R0.shape}, {R1.shape}, {R2.shape}")
        a, b = float(interval[0]), float(interval[1])
        if not a < b:
            raise ValueError(f"invalid interval ({a}, {b})")
        self.R0, self.R1, self.R2 = R0, R1, R2
        self.interval = (a, b)

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, rows: int, cols: int, interval=(0.0, 1.0)) -> "PIOperator":
        return cls(MatPoly1.zeros(rows, cols), MatPoly2.zeros(rows, cols),
                   MatPoly2.zeros(rows, cols), interval)

    @classmethod
    def identity(cls, n: int, interval=(0.0, 1.0)) -> "PIOperator":
        return cls.multiplier(MatPoly1.identity(n), interval)

    @classmethod
    def multiplier(cls, R0, interval=(0.0, 1.0)) -> "PIOperator":
        if not isinstance(R0, MatPoly1):
            R0 = MatPoly1.const(R0)
        r, c = R0.shape
        z = MatPoly2(np.zeros(R0.batch_shape + (r, c, 1, 1)))
        return cls(R0, z, z, interval)

    @classmethod
    def vstack(cls, ops: list["PIOperator"]) -> "PIOperator":
        ops = [o for o in ops if o.rows > 0]
        interval = ops[0].interval
        def cat(polys, cls_, naxes):
            shp = tuple(max(p.coef.shape[-k] for p in polys) for k in range(naxes, 0, -1))
            return cls_(np.concatenate([_pad_to(p.coef, shp) for p in polys], axis=-(naxes + 2)))
        return cls(cat([o.R0 for o in ops], MatPoly1, 1),
                   cat([o.R1 for o in ops], MatPoly2, 2),
                   cat([o.R2 for o in ops], MatPoly2, 2), interval)

    # shape --------------------------------------------------------------
    @property
    def rows(self) -> int:
        return self.R0.rows

    @property
    def cols(self) -> int:
        return self.R0.cols

    @property
    def dims(self) -> tuple[int, int]:
        return self.R0.shape

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return np.broadcast_shapes(self.R0.batch_shape, self.R1.batch_shape, self.R2.batch_shape)

    @property
    def degree(self) -> int:
        """Largest total degree over the three kernels."""
        return max(self.R0.degree, self.R1.total_degree, self.R2.total_degree)

    def _check(self, other: "PIOperator") -> None:
        if self.interval != other.interval:
            raise ValueError(f"interval mismatch {self.interval} vs {other.interval}")

    def __getitem__(self, idx) -> "PIOperator":
        """Index the batch axes."""
        return PIOperator(MatPoly1(self.R0.coef[idx]), MatPoly2(self.R1.coef[idx]),
                          MatPoly2(self.R2.coef[idx]), self.interval)

    def block(self, rows, cols) -> "PIOperator":
        return PIOperator(self.R0.block(rows, cols), self.R1.block(rows, cols),
                          self.R2.block(rows, cols), self.interval)

    # linear structure ---------------------------------------------------
    def __add__(self, other: "PIOperator") -> "PIOperator":
        self._check(other)
        return PIOperator(self.R0 + other.R0, self.R1 + other.R1, self.R2 + other.R2,
                          self.interval)

    def __neg__(self) -> "PIOperator":
        return PIOperator(-self.R0, -self.R1, -self.R2, self.interval)

    def __sub__(self, other: "PIOperator") -> "PIOperator":
        return self + (-other)

    def __mul__(self, c) -> "PIOperator":
        return PIOperator(self.R0 * c, self.R1 * c, self.R2 * c, self.interval)

    __rmul__ = __mul__

    def __matmul__(self, other: "PIOperator") -> "PIOperator":
        return compose(self, other)

    @property
    def star(self) -> "PIOperator":
        return adjoint(self)

    def __call__(self, v: MatPoly1) -> MatPoly1:
        return apply(self, v)

    def __repr__(self) -> str:
        return (f"PIOperator(dims={self.dims}, degree={self.degree}, "
                f"interval={self.interval}, batch={self.batch_shape})")


# ---------------------------------------------------------------------------


def apply(P: PIOperator, v: MatPoly1) -> MatPoly1:
    """Exact image of a polynomial function ``v`` (a ``cols x k`` MatPoly1)."""
    if v.rows != P.cols:
        raise DimensionError(f"operator has {P.cols} columns, function has {v.rows} rows")
    a, b = P.interval
    vt = MatPoly2.in_theta(v)
    return (P.R0 @ v
            + integrate(P.R1 @ vt, "a", "s", a, b)
            + integrate(P.R2 @ vt, "s", "b", a, b))


def add(P: PIOperator, Q: PIOperator) -> PIOperator:
    return P + Q


def scale(c: float, P: PIOperator) -> PIOperator:
    return P * c


def _sum2(*grids: np.ndarray) -> MatPoly2:
    shp = (max(g.shape[-2] for g in grids), max(g.shape[-1] for g in grids))
    batch = np.broadcast_shapes(*(g.shape[:-2] for g in grids))
    out = np.zeros(batch + shp)
    for g in grids:
        out = out + _pad_to(g, shp)
    return MatPoly2(out)


def compose(P: PIOperator, Q: PIOperator) -> PIOperator:
    """Kernels of ``P o Q``.

    Exchanging the order of the two integrations and splitting at the
    diagonal gives, with ``b`` the integration variable of the outer
    operator::

        R1 = P0 Q1 + P1 Q0(t) + int_t^s P1 Q1 + int_a^t P1 Q2 + int_s^b P2 Q1
        R2 = P0 Q2 + P2 Q0(t) + int_a^s P1 Q2 + int_t^b P2 Q1 + int_s^t P2 Q2
    """
    P._check(Q)
    if P.cols != Q.rows:
        raise DimensionError(f"cannot compose {P.dims} with {Q.dims}")
    a, b = P.interval
    P0s = MatPoly2.in_s(P.R0)
    Q0t = MatPoly2.in_theta(Q.R0)
    P1, P2 = P.R1.coef, P.R2.coef
    Q1, Q2 = Q.R1.coef, Q.R2.coef
    p11 = product3(P1, Q1)
    p12 = product3(P1, Q2)
    p21 = product3(P2, Q1)
    p22 = product3(P2, Q2)
    R0 = P.R0 @ Q.R0
    R1 = _sum2((P0s @ Q.R1).coef, (P.R1 @ Q0t).coef,
               integrate_beta(p11, "theta", "s", a, b),
               integrate_beta(p12, "a", "theta", a, b),
               integrate_beta(p21, "s", "b", a, b))
    R2 = _sum2((P0s @ Q.R2).coef, (P.R2 @ Q0t).coef,
               integrate_beta(p12, "a", "s", a, b),
               integrate_beta(p21, "theta", "b", a, b),
               integrate_beta(p22, "s", "theta", a, b))
    return PIOperator(R0, R1, R2, P.interval)


def adjoint(P: PIOperator) -> PIOperator:
    """``P*`` with respect to the L2 inner product."""
    return PIOperator(P.R0.T, P.R2.T.swap_vars(), P.R1.T.swap_vars(), P.interval)


def kernel_equal(P: PIOperator, Q: PIOperator, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Coefficientwise comparison.

    Returns ``(equal, discrepancy)`` where the discrepancy is the largest
    coefficient difference divided by ``max(1, largest coefficient)``.
    """
    P._check(Q)
    if P.dims != Q.dims:
        raise DimensionError(f"dimension mismatch {P.dims} vs {Q.dims}")
    D = P - Q
    diff = max(np.max(np.abs(D.R0.coef)), np.max(np.abs(D.R1.coef)), np.max(np.abs(D.R2.coef)))
    mag = max(np.max(np.abs(k.coef)) for k in (P.R0, P.R1, P.R2, Q.R0, Q.R1, Q.R2))
    disc = float(diff / max(1.0, mag))
    return disc <= tol, disc


def is_self_adjoint(P: PIOperator, tol: float = DEFAULT_TOL) -> bool:
    return kernel_equal(P, adjoint(P), tol)[0]


# ---------------------------------------------------------------------------
# Gram (positive cone) parameterization


def monomials_2d(d: int) -> list[tuple[int, int]]:
    """Exponent pairs ``(i, j)`` with ``i + j <= d``, graded order."""
    return [(k - j, j) for k in range(d + 1) for j in range(k + 1)]


@dataclass(frozen=True)
class GramBasis:
    """Monomial basis ``Z`` defining ``Z v = [Z1(s) v(s); int_a^s Z2 v; int_s^b Z2 v]``.

    ``Z1`` holds ``s**k`` for ``k <= d1``; ``Z2`` holds ``s**i t**j`` for
    ``i + j <= d2``.  Each scalar monomial is Kronecker-multiplied with the
    identity on the state components.  ``multiplier_states`` restricts the
    pointwise block to a subset of components (default: all); ``d1 = -1``
    drops it.
    """

    n: int
    d1: int
    d2: int
    interval: tuple[float, float] = (0.0, 1.0)
    multiplier_states: tuple[int, ...] | None = None

    @property
    def mult_states(self) -> tuple[int, ...]:
        if self.multiplier_states is None:
            return tuple(range(self.n))
        return tuple(self.multiplier_states)

    @property
    def n_mult(self) -> int:
        return (self.d1 + 1) * len(self.mult_states) if self.d1 >= 0 else 0

    @property
    def n_kernel(self) -> int:
        return len(monomials_2d(self.d2)) * self.n if self.d2 >= 0 else 0

    @property
    def size(self) -> int:
        """Row count ``m`` of the stacked image (the Gram matrix is ``m x m``)."""
        return self.n_mult + 2 * self.n_kernel

    def row_labels(self) -> list[tuple[str, tuple[int, ...], int]]:
        """``(block, exponents, component)`` for each row of ``Z``."""
        out = []
        if self.d1 >= 0:
            out += [("mult", (k,), c) for k in range(self.d1 + 1) for c in self.mult_states]
        if self.d2 >= 0:
            mons = monomials_2d(self.d2)
            out += [("lower", e, c) for e in mons for c in range(self.n)]
            out += [("upper", e, c) for e in mons for c in range(self.n)]
        return out

    def operator(self) -> PIOperator:
        """``Z`` as an ``m x n`` PIOperator."""
        m, n = self.size, self.n
        D1 = max(self.d1, 0) + 1
        D2 = max(self.d2, 0) + 1
        R0 = np.zeros((m, n, D1))
        R1 = np.zeros((m, n, D2, D2))
        R2 = np.zeros((m, n, D2, D2))
        for r, (blk, e, c) in enumerate(self.row_labels()):
            if blk == "mult":
                R0[r, c, e[0]] = 1.0
            elif blk == "lower":
                R1[r, c, e[0], e[1]] = 1.0
            else:
                R2[r, c, e[0], e[1]] = 1.0
        return PIOperator(MatPoly1(R0), MatPoly2(R1), MatPoly2(R2), self.interval)

    def scalar_rows(self) -> PIOperator:
        """Batch of ``1 x 1`` operators, one per scalar monomial row (no component)."""
        labels = []
        if self.d1 >= 0:
            labels += [("mult", (k,)) for k in range(self.d1 + 1)]
        if self.d2 >= 0:
            mons = monomials_2d(self.d2)
            labels += [("lower", e) for e in mons] + [("upper", e) for e in mons]
        ms = len(labels)
        D1 = max(self.d1, 0) + 1
        D2 = max(self.d2, 0) + 1
        R0 = np.zeros((ms, 1, 1, D1))
        R1 = np.zeros((ms, 1, 1, D2, D2))
        R2 = np.zeros((ms, 1, 1, D2, D2))
        for r, (blk, e) in enumerate(labels):
            if blk == "mult":
                R0[r, 0, 0, e[0]] = 1.0
            elif blk == "lower":
                R1[r, 0, 0, e[0], e[1]] = 1.0
            else:
                R2[r, 0, 0, e[0], e[1]] = 1.0
        return PIOperator(MatPoly1(R0), MatPoly2(R1), MatPoly2(R2), self.interval)

    def scalar_index(self) -> list[tuple[int, int]]:
        """For each row of ``Z``: ``(scalar row index, component)``."""
        out = []
        n1 = self.d1 + 1 if self.d1 >= 0 else 0
        nk = len(monomials_2d(self.d2)) if self.d2 >= 0 else 0
        if self.d1 >= 0:
            out += [(k, c) for k in range(n1) for c in self.mult_states]
        for off in (n1, n1 + nk):
            out += [(off + k, c) for k in range(nk) for c in range(self.n)]
        return out


def gram_operator(Z: GramBasis, Q) -> PIOperator:
    """``Z* Q Z`` via the generic adjoint and composition."""
    Q = np.asarray(Q, dtype=float)
    m = Z.size
    if Q.shape != (m, m):
        raise DimensionError(f"Gram matrix must be {m}x{m}, got {Q.shape}")
    if not np.allclose(Q, Q.T, atol=1e-12 * max(1.0, np.max(np.abs(Q), initial=0.0))):
        raise ValueError("Gram matrix must be symmetric")
    if m == 0:
        return PIOperator.zero(Z.n, Z.n, Z.interval)
    Zop = Z.operator()
    return compose(adjoint(Zop), compose(PIOperator.multiplier(Q, Z.interval), Zop))


@lru_cache(maxsize=32)
def gram_pair_operators(Z: GramBasis) -> PIOperator:
    """Batch ``(ms, ms)`` of scalar operators ``z_k* z_l`` for scalar rows ``z_k``.

    Since each row of ``Z`` is a scalar monomial row acting on a single
    component, ``Z* Q Z`` is assembled from these by placing ``Q[k, l]``
    times ``z_k* z_l`` at entry ``(component_k, component_l)``.  The result
    depends only on the basis and is cached (read-only arrays).
    """
    rows = Z.scalar_rows()
    left = adjoint(rows)[:, None]
    right = rows[None, :]
    out = compose(left, right)
    for poly in (out.R0, out.R1, out.R2):
        poly.coef.flags.writeable = False
    return out


def gram_linear_map(Z: GramBasis) -> tuple[PIOperator, list[tuple[int, int]]]:
    """Batched operator ``G[v]`` with ``Z* Q Z = sum_v x_v G[v]``.

    The parameters ``x_v`` are the upper-triangular entries ``Q[k, l]``
    (``k <= l``) in the returned order.
    """
    pairs = gram_pair_operators(Z)
    idx = Z.scalar_index()
    m, n = Z.size, Z.n
    tri = [(k, l) for k in range(m) for l in range(k, m)]
    nv = len(tri)
    R0s, R1s, R2s = pairs.R0.coef, pairs.R1.coef, pairs.R2.coef
    R0 = np.zeros((nv, n, n, R0s.shape[-1]))
    R1 = np.zeros((nv, n, n) + R1s.shape[-2:])
    R2 = np.zeros((nv, n, n) + R2s.shape[-2:])
    for v, (k, l) in enumerate(tri):
        (sk, ck), (sl, cl) = idx[k], idx[l]
        R0[v, ck, cl] += R0s[sk, sl, 0, 0]
        R1[v, ck, cl] += R1s[sk, sl, 0, 0]
        R2[v, ck, cl] += R2s[sk, sl, 0, 0]
        if k != l:
            R0[v, cl, ck] += R0s[sl, sk, 0, 0]
            R1[v, cl, ck] += R1s[sl, sk, 0, 0]
            R2[v, cl, ck] += R2s[sl, sk, 0, 0]
    return PIOperator(MatPoly1(R0), MatPoly2(R1), MatPoly2(R2), Z.interval), tri


def svec_to_sym(x: np.ndarray, m: int) -> np.ndarray:
    """Inverse of the upper-triangular parameter ordering used by ``gram_linear_map``."""
    Q = np.zeros((m, m))
    iu = np.triu_indices(m)
    Q[iu] = x
    return Q + np.triu(Q, 1).T
