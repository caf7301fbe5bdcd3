import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import quad, random_poly1, random_poly2
from piestab import polyalg as pa
from piestab.polyalg import DimensionError, MatPoly1, MatPoly2

SETTINGS = settings(max_examples=40, deadline=None, derandomize=True)


def coef_close(p, q, tol=1e-12):
    a, b = p.coef, q.coef
    shp = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    a = np.pad(a, [(0, m - k) for k, m in zip(a.shape, shp)])
    b = np.pad(b, [(0, m - k) for k, m in zip(b.shape, shp)])
    return np.abs(a - b).max(initial=0.0) <= tol * max(1.0, np.abs(a).max(initial=0.0))


seeds = st.integers(0, 2**31 - 1)


# --- evaluation -------------------------------------------------------------


def test_eval_s_minus_s2_at_half():
    p = MatPoly1.scalar([0.0, 1.0, -1.0])
    assert pa.eval(p, 0.5)[0, 0] == 0.25


def test_eval_zero_polynomial():
    z = MatPoly1.zeros(2, 3)
    assert np.array_equal(pa.eval(z, 0.37), np.zeros((2, 3)))


def test_eval2_dirichlet_kernel_vanishes_at_corner():
    # (s - theta) - s (1 - theta) = -theta + s theta
    k = MatPoly2.from_entries(1, 1, {(0, 0): [[0.0, -1.0], [0.0, 1.0]]})
    assert pa.eval2(k, 1.0, 1.0)[0, 0] == 0.0


def test_eval_matches_horner(rng):
    p = random_poly1(rng, 2, 2, 5)
    s = 0.731
    ref = sum(p.coef[..., k] * s**k for k in range(6))
    assert np.allclose(p(s), ref, rtol=1e-14)


# --- ring operations ---------------------------------------------------------


def test_add_inverse_is_zero(rng):
    p = random_poly1(rng, 2, 3)
    assert pa.add(p, -p).is_zero()


def test_identity_multiplication(rng):
    p = random_poly1(rng, 3, 2)
    assert coef_close(pa.mul(MatPoly1.identity(3), p), p)


def test_s_times_s():
    s = MatPoly1.scalar([0.0, 1.0])
    assert coef_close(pa.mul(s, s), MatPoly1.scalar([0.0, 0.0, 1.0]))


def test_scale_zero_gives_zero(rng):
    assert pa.scale(0.0, random_poly2(rng, 2, 2)).is_zero()


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        random_poly1(rng, 2, 3) + random_poly1(rng, 3, 2)
    with pytest.raises(DimensionError):
        random_poly1(rng, 2, 3) @ random_poly1(rng, 2, 3)


@SETTINGS
@given(seeds)
def test_ring_laws_one_variable(seed):
    rng = np.random.default_rng(seed)
    p, q, r = (random_poly1(rng, 2, 2) for _ in range(3))
    assert coef_close((p + q) + r, p + (q + r))
    assert coef_close((p @ q) @ r, p @ (q @ r))
    assert coef_close(p @ (q + r), p @ q + p @ r)
    assert coef_close((p + q) @ r, p @ r + q @ r)


@SETTINGS
@given(seeds)
def test_ring_laws_two_variables(seed):
    rng = np.random.default_rng(seed)
    p, q, r = (random_poly2(rng, 2, 2) for _ in range(3))
    assert coef_close((p @ q) @ r, p @ (q @ r))
    assert coef_close(p @ (q + r), p @ q + p @ r)


def test_canonical_drops_tiny_coefficients():
    p = MatPoly1.scalar([1.0, 0.0, 1e-20])
    assert p.degree == 0


# --- substitution ------------------------------------------------------------


def test_shift_s_by_minus_a():
    p = MatPoly1.scalar([0.0, 1.0])
    assert coef_close(pa.shift_affine(p, -0.3), MatPoly1.scalar([-0.3, 1.0]))


def test_lift_eta_to_s_minus_theta():
    g = pa.lift(MatPoly1.scalar([0.0, 1.0]))
    assert g.entries() == {(0, 0): [[0.0, -1.0], [1.0, 0.0]]}


def test_lift_eta_squared():
    g = pa.lift(MatPoly1.scalar([0.0, 0.0, 1.0]))
    assert g.entries() == {(0, 0): [[0.0, 0.0, 1.0], [0.0, -2.0, 0.0], [1.0, 0.0, 0.0]]}


@SETTINGS
@given(seeds, st.floats(-2, 2), st.sampled_from([1, -1]), st.floats(-1, 1))
def test_shift_affine_then_eval(seed, offset, sign, s):
    p = random_poly1(np.random.default_rng(seed), 2, 1, 4)
    assert np.allclose(pa.shift_affine(p, offset, sign)(s), p(sign * s + offset),
                       rtol=1e-12, atol=1e-12)


def test_shift_affine_rejects_bad_sign(rng):
    with pytest.raises(ValueError):
        pa.shift_affine(random_poly1(rng, 1, 1), 0.0, 2)


# --- integration -------------------------------------------------------------


def test_integrate_constant_up_to_s():
    out = pa.integrate(MatPoly2.const([[1.0]]), "a", "s")
    assert coef_close(out, MatPoly1.scalar([0.0, 1.0]))


def test_integrate_theta_minus_theta2_from_s():
    k = MatPoly2.in_theta(MatPoly1.scalar([0.0, 1.0, -1.0]))
    out = pa.integrate(k, "s", "b")
    assert coef_close(out, MatPoly1.scalar([1 / 6, 0.0, -0.5, 1 / 3]), 1e-14)


def test_integrate_full_s_minus_s2():
    assert abs(pa.integrate_full(MatPoly1.scalar([0.0, 1.0, -1.0]), 0.0, 1.0)[0, 0] - 1 / 6) < 1e-15


def test_integrate_rejects_unknown_limit(rng):
    with pytest.raises(ValueError):
        pa.integrate(random_poly2(rng, 1, 1), "a", "x")


@SETTINGS
@given(seeds, st.floats(-1, 1.5), st.sampled_from([("a", "s"), ("s", "b"), ("a", "b")]))
def test_integrate_matches_quadrature(seed, s0, limits):
    a, b = -1.0, 1.5
    p = random_poly2(np.random.default_rng(seed), 2, 2, 4)
    lo = {"a": a, "b": b, "s": s0}[limits[0]]
    hi = {"a": a, "b": b, "s": s0}[limits[1]]
    ref = quad(lambda t: p(s0, t), lo, hi)
    got = pa.integrate(p, *limits, a=a, b=b)(s0)
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(ref).max()))


def test_integrate_beta_matches_quadrature(rng):
    # int_theta^s P(s, beta) Q(beta, theta) d beta
    P, Q = random_poly2(rng, 2, 3), random_poly2(rng, 3, 2)
    C = pa.product3(P.coef, Q.coef)
    got = MatPoly2(pa.integrate_beta(C, "theta", "s", 0.0, 1.0))
    s, t = 0.8, 0.3
    ref = quad(lambda beta: P(s, beta) @ Q(beta, t), t, s)
    assert np.allclose(got(s, t), ref, rtol=1e-10)


# --- serialization -----------------------------------------------------------


def test_json_round_trip(rng):
    p1, p2 = random_poly1(rng, 2, 3), random_poly2(rng, 3, 2)
    assert coef_close(pa.from_json(pa.to_json(p1)), p1, 0.0)
    assert coef_close(pa.from_json(pa.to_json(p2), two_var=True), p2, 0.0)
