"""Matrix-valued polynomials in one variable (s) and two variables (s, theta).

Coefficients live in the monomial basis and are stored densely:

* ``MatPoly1.coef`` has shape ``(..., rows, cols, D)``; ``coef[..., i, j, p]``
  multiplies ``s**p``.
* ``MatPoly2.coef`` has shape ``(..., rows, cols, Ds, Dt)``;
  ``coef[..., i, j, p, q]`` multiplies ``s**p * theta**q``.

Leading ``...`` axes are optional batch axes.  They let a polynomial carry
coefficients that depend linearly on a vector of parameters (one batch
index per parameter), which is how the LPI assembly tracks decision
variables through the operator algebra.  Every operation broadcasts over
them.
"""

from __future__ import annotations

from math import comb
from typing import Mapping, Sequence

import numpy as np

CANON_RTOL = 1e-14

LIMITS = ("a", "b", "s", "theta")


class DimensionError(ValueError):
    """Raised when matrix dimensions do not conform."""


def _canon(coef: np.ndarray, naxes: int) -> np.ndarray:
    coef = np.array(coef, dtype=float)
    if not np.all(np.isfinite(coef)):
        raise ValueError("polynomial coefficients must be finite")
    scale = np.max(np.abs(coef)) if coef.size else 0.0
    if scale > 0:
        coef[np.abs(coef) < CANON_RTOL * scale] = 0.0
    # trim trailing zero slices along each degree axis (keep at least one)
    for k in range(naxes):
        ax = coef.ndim - naxes + k
        n = coef.shape[ax]
        while n > 1:
            sl = np.take(coef, n - 1, axis=ax)
            if np.any(sl):
                break
            n -= 1
        if n != coef.shape[ax]:
            coef = np.take(coef, range(n), axis=ax)
    return coef


def _pad_to(coef: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    k = len(shape)
    pads = [(0, 0)] * (coef.ndim - k) + [(0, t - c) for c, t in zip(coef.shape[-k:], shape)]
    return np.pad(coef, pads)


class MatPoly1:
    """Matrix-valued polynomial ``P(s)``."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        coef = np.asarray(coef, dtype=float)
        if coef.ndim < 3:
            raise ValueError("MatPoly1 coefficients need shape (..., rows, cols, D)")
        if coef.shape[-1] == 0:
            coef = np.zeros(coef.shape[:-1] + (1,))
        self.coef = _canon(coef, 1)

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int) -> "MatPoly1":
        return cls(np.zeros((rows, cols, 1)))

    @classmethod
    def const(cls, mat) -> "MatPoly1":
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return cls(mat[..., None])

    @classmethod
    def identity(cls, n: int) -> "MatPoly1":
        return cls.const(np.eye(n))

    @classmethod
    def from_entries(cls, rows: int, cols: int,
                     entries: Mapping[tuple[int, int], Sequence[float]]) -> "MatPoly1":
        deg = max((len(c) for c in entries.values()), default=1)
        coef = np.zeros((rows, cols, max(deg, 1)))
        for (i, j), c in entries.items():
            if not (0 <= i < rows and 0 <= j < cols):
                raise DimensionError(f"entry ({i}, {j}) outside {rows}x{cols}")
            coef[i, j, : len(c)] = c
        return cls(coef)

    @classmethod
    def scalar(cls, coeffs: Sequence[float]) -> "MatPoly1":
        return cls(np.asarray(coeffs, dtype=float).reshape(1, 1, -1))

    # shape --------------------------------------------------------------
    @property
    def rows(self) -> int:
        return self.coef.shape[-3]

    @property
    def cols(self) -> int:
        return self.coef.shape[-2]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coef.shape[:-3]

    @property
    def degree(self) -> int:
        return self.coef.shape[-1] - 1

    def is_zero(self) -> bool:
        return not np.any(self.coef)

    def entries(self) -> dict[tuple[int, int], list[float]]:
        """Sparse ``(i, j) -> coefficient list`` view (unbatched only)."""
        out = {}
        for i in range(self.rows):
            for j in range(self.cols):
                c = np.trim_zeros(self.coef[i, j], "b")
                if c.size:
                    out[(i, j)] = c.tolist()
        return out

    # evaluation ---------------------------------------------------------
    def __call__(self, s) -> np.ndarray:
        s = float(s)
        out = np.zeros(self.coef.shape[:-1])
        for p in range(self.coef.shape[-1] - 1, -1, -1):
            out = out * s + self.coef[..., p]
        return out

    def eval_many(self, s: np.ndarray) -> np.ndarray:
        """Evaluate at an array of points; result has shape ``(..., rows, cols, len(s))``."""
        s = np.asarray(s, dtype=float)
        V = s[None, :] ** np.arange(self.coef.shape[-1])[:, None]
        return self.coef @ V

    # ring operations ----------------------------------------------------
    def _check_same(self, other: "MatPoly1") -> None:
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "MatPoly1") -> "MatPoly1":
        self._check_same(other)
        D = max(self.coef.shape[-1], other.coef.shape[-1])
        return MatPoly1(_pad_to(self.coef, (D,)) + _pad_to(other.coef, (D,)))

    def __neg__(self) -> "MatPoly1":
        return MatPoly1(-self.coef)

    def __sub__(self, other: "MatPoly1") -> "MatPoly1":
        return self + (-other)

    def __mul__(self, c) -> "MatPoly1":
        return MatPoly1(self.coef * float(c))

    __rmul__ = __mul__

    def __matmul__(self, other: "MatPoly1") -> "MatPoly1":
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        Da, Db = self.coef.shape[-1], other.coef.shape[-1]
        batch = np.broadcast_shapes(self.batch_shape, other.batch_shape)
        out = np.zeros(batch + (self.rows, other.cols, Da + Db - 1))
        for p in range(Da):
            out[..., p : p + Db] += np.einsum("...ik,...kjq->...ijq", self.coef[..., p], other.coef)
        return MatPoly1(out)

    @property
    def T(self) -> "MatPoly1":
        return MatPoly1(np.swapaxes(self.coef, -3, -2))

    def deriv(self) -> "MatPoly1":
        D = self.coef.shape[-1]
        if D == 1:
            return MatPoly1(np.zeros_like(self.coef))
        return MatPoly1(self.coef[..., 1:] * np.arange(1, D))

    def antiderivative(self) -> "MatPoly1":
        """Antiderivative vanishing at s = 0."""
        D = self.coef.shape[-1]
        out = np.zeros(self.coef.shape[:-1] + (D + 1,))
        out[..., 1:] = self.coef / np.arange(1, D + 1)
        return MatPoly1(out)

    def block(self, rows: slice | Sequence[int], cols: slice | Sequence[int]) -> "MatPoly1":
        c = self.coef[..., rows, :, :][..., cols, :]
        return MatPoly1(c)

    def __repr__(self) -> str:
        return f"MatPoly1(shape={self.shape}, degree={self.degree}, batch={self.batch_shape})"


class MatPoly2:
    """Matrix-valued polynomial ``P(s, theta)``."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        coef = np.asarray(coef, dtype=float)
        if coef.ndim < 4:
            raise ValueError("MatPoly2 coefficients need shape (..., rows, cols, Ds, Dt)")
        if coef.shape[-1] == 0 or coef.shape[-2] == 0:
            coef = np.zeros(coef.shape[:-2] + (1, 1))
        self.coef = _canon(coef, 2)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "MatPoly2":
        return cls(np.zeros((rows, cols, 1, 1)))

    @classmethod
    def const(cls, mat) -> "MatPoly2":
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return cls(mat[..., None, None])

    @classmethod
    def from_entries(cls, rows: int, cols: int,
                     entries: Mapping[tuple[int, int], Sequence[Sequence[float]]]) -> "MatPoly2":
        ds = max((len(g) for g in entries.values()), default=1)
        dt = max((len(r) for g in entries.values() for r in g), default=1)
        coef = np.zeros((rows, cols, max(ds, 1), max(dt, 1)))
        for (i, j), g in entries.items():
            if not (0 <= i < rows and 0 <= j < cols):
                raise DimensionError(f"entry ({i}, {j}) outside {rows}x{cols}")
            for p, row in enumerate(g):
                coef[i, j, p, : len(row)] = row
        return cls(coef)

    @classmethod
    def in_s(cls, p: MatPoly1) -> "MatPoly2":
        """Embed ``P(s)`` as a two-variable polynomial constant in theta."""
        return cls(p.coef[..., None])

    @classmethod
    def in_theta(cls, p: MatPoly1) -> "MatPoly2":
        """Embed ``P(theta)``."""
        return cls(p.coef[..., None, :])

    @property
    def rows(self) -> int:
        return self.coef.shape[-4]

    @property
    def cols(self) -> int:
        return self.coef.shape[-3]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coef.shape[:-4]

    @property
    def degree(self) -> tuple[int, int]:
        return (self.coef.shape[-2] - 1, self.coef.shape[-1] - 1)

    @property
    def total_degree(self) -> int:
        nz = np.nonzero(np.any(self.coef.reshape((-1,) + self.coef.shape[-2:]), axis=0))
        if nz[0].size == 0:
            return 0
        return int(np.max(nz[0] + nz[1]))

    def is_zero(self) -> bool:
        return not np.any(self.coef)

    def entries(self) -> dict[tuple[int, int], list[list[float]]]:
        out = {}
        for i in range(self.rows):
            for j in range(self.cols):
                g = self.coef[i, j]
                if np.any(g):
                    out[(i, j)] = g.tolist()
        return out

    def __call__(self, s, theta) -> np.ndarray:
        s, theta = float(s), float(theta)
        Ds, Dt = self.coef.shape[-2:]
        vs = s ** np.arange(Ds)
        vt = theta ** np.arange(Dt)
        return np.einsum("...pq,p,q->...", self.coef, vs, vt)

    def eval_grid(self, s: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Values on the tensor grid; shape ``(..., rows, cols, len(s), len(theta))``."""
        s = np.asarray(s, dtype=float)
        theta = np.asarray(theta, dtype=float)
        Ds, Dt = self.coef.shape[-2:]
        Vs = s[:, None] ** np.arange(Ds)[None, :]
        Vt = theta[:, None] ** np.arange(Dt)[None, :]
        return np.einsum("...pq,ip,jq->...ij", self.coef, Vs, Vt)

    def at_theta(self, theta) -> MatPoly1:
        Dt = self.coef.shape[-1]
        return MatPoly1(self.coef @ (float(theta) ** np.arange(Dt)))

    def at_s(self, s) -> MatPoly1:
        """Partial evaluation at a fixed s; result is a polynomial in theta."""
        Ds = self.coef.shape[-2]
        return MatPoly1(np.einsum("...pq,p->...q", self.coef, float(s) ** np.arange(Ds)))

    def _check_same(self, other: "MatPoly2") -> None:
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "MatPoly2") -> "MatPoly2":
        self._check_same(other)
        Ds = max(self.coef.shape[-2], other.coef.shape[-2])
        Dt = max(self.coef.shape[-1], other.coef.shape[-1])
        return MatPoly2(_pad_to(self.coef, (Ds, Dt)) + _pad_to(other.coef, (Ds, Dt)))

    def __neg__(self) -> "MatPoly2":
        return MatPoly2(-self.coef)

    def __sub__(self, other: "MatPoly2") -> "MatPoly2":
        return self + (-other)

    def __mul__(self, c) -> "MatPoly2":
        return MatPoly2(self.coef * float(c))

    __rmul__ = __mul__

    def __matmul__(self, other: "MatPoly2") -> "MatPoly2":
        """Pointwise matrix product ``P(s,theta) Q(s,theta)``."""
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        As, At = self.coef.shape[-2:]
        Bs, Bt = other.coef.shape[-2:]
        batch = np.broadcast_shapes(self.batch_shape, other.batch_shape)
        out = np.zeros(batch + (self.rows, other.cols, As + Bs - 1, At + Bt - 1))
        for p in range(As):
            for q in range(At):
                out[..., p : p + Bs, q : q + Bt] += np.einsum(
                    "...ik,...kjuv->...ijuv", self.coef[..., p, q], other.coef)
        return MatPoly2(out)

    @property
    def T(self) -> "MatPoly2":
        return MatPoly2(np.swapaxes(self.coef, -4, -3))

    def swap_vars(self) -> "MatPoly2":
        """``P(theta, s)`` (variables exchanged, matrix not transposed)."""
        return MatPoly2(np.swapaxes(self.coef, -2, -1))

    def deriv_s(self) -> "MatPoly2":
        Ds = self.coef.shape[-2]
        if Ds == 1:
            return MatPoly2(np.zeros_like(self.coef))
        return MatPoly2(self.coef[..., 1:, :] * np.arange(1, Ds)[:, None])

    def on_diagonal(self) -> MatPoly1:
        """``P(s, s)``."""
        Ds, Dt = self.coef.shape[-2:]
        out = np.zeros(self.coef.shape[:-2] + (Ds + Dt - 1,))
        for p in range(Ds):
            out[..., p : p + Dt] += self.coef[..., p, :]
        return MatPoly1(out)

    def block(self, rows, cols) -> "MatPoly2":
        return MatPoly2(self.coef[..., rows, :, :, :][..., cols, :, :])

    def __repr__(self) -> str:
        return f"MatPoly2(shape={self.shape}, degree={self.degree}, batch={self.batch_shape})"


# ---------------------------------------------------------------------------
# functional interface


def eval(p: MatPoly1, s) -> np.ndarray:  # noqa: A001 - mirrors the math name
    return p(s)


def eval2(p: MatPoly2, s, theta) -> np.ndarray:
    return p(s, theta)


def add(p, q):
    return p + q


def mul(p, q):
    return p @ q


def scale(c, p):
    return p * c


def outer(p_s: MatPoly1, q_theta: MatPoly1) -> MatPoly2:
    """``P(s) Q(theta)`` as a two-variable polynomial."""
    if p_s.cols != q_theta.rows:
        raise DimensionError(f"cannot multiply {p_s.shape} by {q_theta.shape}")
    return MatPoly2(np.einsum("...ikp,...kjq->...ijpq", p_s.coef, q_theta.coef))


def _affine_powers(cs: float, ct: float, c0: float, D: int) -> np.ndarray:
    """Coefficients of ``(cs*s + ct*theta + c0)**k`` as grids, k < D."""
    out = np.zeros((D, D, D))
    for k in range(D):
        for i in range(k + 1):          # power of s
            for j in range(k - i + 1):  # power of theta
                r = k - i - j
                out[k, i, j] = (comb(k, i) * comb(k - i, j)
                                * cs**i * ct**j * c0**r)
    return out


def shift_affine(p: MatPoly1, offset: float, sign: int = 1) -> MatPoly1:
    """``p(sign*s + offset)`` by binomial expansion."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    D = p.coef.shape[-1]
    pw = _affine_powers(float(sign), 0.0, float(offset), D)[:, :, 0]  # (k, i)
    return MatPoly1(np.einsum("...k,ki->...i", p.coef, pw))


def lift(p: MatPoly1, cs: float = 1.0, ct: float = -1.0, c0: float = 0.0) -> MatPoly2:
    """``p(cs*s + ct*theta + c0)`` as a MatPoly2; defaults give ``p(s - theta)``."""
    D = p.coef.shape[-1]
    pw = _affine_powers(float(cs), float(ct), float(c0), D)
    return MatPoly2(np.einsum("...k,kij->...ij", p.coef, pw))


def _antideriv_last(coef: np.ndarray) -> np.ndarray:
    D = coef.shape[-1]
    out = np.zeros(coef.shape[:-1] + (D + 1,))
    out[..., 1:] = coef / np.arange(1, D + 1)
    return out


def _limit_value(F: np.ndarray, lim, a: float, b: float) -> np.ndarray:
    """Evaluate ``F[..., p, q]`` (theta-antiderivative) at a theta limit -> poly in s."""
    Ds, Dt = F.shape[-2:]
    if lim == "s":
        out = np.zeros(F.shape[:-2] + (Ds + Dt - 1,))
        for q in range(Dt):
            out[..., q : q + Ds] += F[..., :, q]
        return out
    if lim == "a":
        t = a
    elif lim == "b":
        t = b
    elif isinstance(lim, (int, float)) and not isinstance(lim, bool):
        t = float(lim)
    else:
        raise ValueError(f"unsupported limit symbol {lim!r}")
    return F @ (t ** np.arange(Dt))


def integrate(p: MatPoly2, lo, hi, a: float = 0.0, b: float = 1.0) -> MatPoly1:
    """``int_lo^hi p(s, theta) dtheta`` with limits in {'a', 'b', 's'} (or numbers)."""
    F = _antideriv_last(p.coef)
    up = _limit_value(F, hi, a, b)
    dn = _limit_value(F, lo, a, b)
    D = max(up.shape[-1], dn.shape[-1])
    return MatPoly1(_pad_to(up, (D,)) - _pad_to(dn, (D,)))


def integrate_full(p: MatPoly1, a: float, b: float) -> np.ndarray:
    """``int_a^b p(s) ds`` as a matrix."""
    F = _antideriv_last(p.coef)
    D = F.shape[-1]
    return F @ (b ** np.arange(D)) - F @ (a ** np.arange(D))


def product3(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Coefficients of ``P(s,beta) Q(beta,theta)`` indexed ``[..., i, j, p, m, v]``
    for ``s**p beta**m theta**v``."""
    Ps, Pb = P.shape[-2:]
    Qb, Qt = Q.shape[-2:]
    batch = np.broadcast_shapes(P.shape[:-4], Q.shape[:-4])
    out = np.zeros(batch + (P.shape[-4], Q.shape[-3], Ps, Pb + Qb - 1, Qt))
    for q in range(Pb):
        for u in range(Qb):
            out[..., :, :, :, q + u, :] += np.einsum(
                "...ikp,...kjv->...ijpv", P[..., q], Q[..., u, :])
    return out


def integrate_beta(C: np.ndarray, lo: str, hi: str, a: float, b: float) -> np.ndarray:
    """Integrate a three-variable grid ``C[..., p, m, v]`` (s**p beta**m theta**v)
    over beta from ``lo`` to ``hi``; limits in {'a', 'b', 's', 'theta'}.

    Returns a two-variable coefficient grid ``[..., p, v]``."""
    Ds, Db, Dt = C.shape[-3:]
    F = np.zeros(C.shape[:-2] + (Db + 1, Dt))
    F[..., 1:, :] = C / np.arange(1, Db + 1)[:, None]

    def at(lim):
        if lim == "s":
            out = np.zeros(C.shape[:-3] + (Ds + Db, Dt))
            for m in range(Db + 1):
                out[..., m : m + Ds, :] += F[..., :, m, :]
            return out
        if lim == "theta":
            out = np.zeros(C.shape[:-3] + (Ds, Dt + Db))
            for m in range(Db + 1):
                out[..., :, m : m + Dt] += F[..., :, m, :]
            return out
        if lim == "a":
            t = a
        elif lim == "b":
            t = b
        else:
            raise ValueError(f"unsupported limit symbol {lim!r}")
        return np.einsum("...pmv,m->...pv", F, t ** np.arange(Db + 1))

    up, dn = at(hi), at(lo)
    shp = (max(up.shape[-2], dn.shape[-2]), max(up.shape[-1], dn.shape[-1]))
    return _pad_to(up, shp) - _pad_to(dn, shp)


def to_json(p) -> dict:
    """Sparse JSON encoding used by spec files and reports."""
    if isinstance(p, MatPoly2):
        ents = [{"row": i, "col": j, "grid": g} for (i, j), g in p.entries().items()]
    else:
        ents = [{"row": i, "col": j, "coeffs": c} for (i, j), c in p.entries().items()]
    return {"rows": p.rows, "cols": p.cols, "entries": ents}


def from_json(d: Mapping, two_var: bool = False):
    rows, cols = int(d["rows"]), int(d["cols"])
    if two_var:
        ents = {}
        for e in d.get("entries", []):
            if "grid" in e:
                ents[(e["row"], e["col"])] = e["grid"]
            else:
                ents[(e["row"], e["col"])] = [[c] for c in e["coeffs"]]
        return MatPoly2.from_entries(rows, cols, ents)
    ents = {(e["row"], e["col"]): e["coeffs"] for e in d.get("entries", [])}
    return MatPoly1.from_entries(rows, cols, ents)
