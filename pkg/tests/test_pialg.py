import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (apply_quadrature, inner_quadrature, random_operator, random_poly1)
from piestab import pialg
from piestab.convert import convert
from piestab.fixtures import mckendrick
from piestab.pialg import (GramBasis, PIOperator, adjoint, apply, compose, gram_linear_map,
                           gram_operator, kernel_equal, svec_to_sym)
from piestab.polyalg import DimensionError, MatPoly1, MatPoly2, integrate_full

SETTINGS = settings(max_examples=15, deadline=None, derandomize=True)
seeds = st.integers(0, 2**31 - 1)

ONE2 = MatPoly2.const([[1.0]])
ZERO2 = MatPoly2.zeros(1, 1)
LOWER = PIOperator(MatPoly1.zeros(1, 1), ONE2, ZERO2)


def poly_close(p, q, tol=1e-10):
    grid = np.linspace(0.0, 1.0, 7)
    return np.allclose(p.eval_many(grid), q.eval_many(grid), rtol=tol, atol=tol)


# --- apply -------------------------------------------------------------------


def test_identity_apply(rng):
    v = random_poly1(rng, 3, 1)
    assert poly_close(apply(PIOperator.identity(3), v), v)


def test_lower_integration_of_one_is_s():
    out = apply(LOWER, MatPoly1.scalar([1.0]))
    assert poly_close(out, MatPoly1.scalar([0.0, 1.0]))


def test_mckendrick_T_of_one():
    pie = convert(mckendrick(0.0))
    x = apply(pie.T, MatPoly1.scalar([1.0]))
    assert poly_close(x, MatPoly1.scalar([0.1, 1.0]), 1e-13)
    # boundary condition x(0) = int (t - t^2) x(t) dt
    h = MatPoly1.scalar([0.0, 1.0, -1.0])
    assert abs(x(0.0)[0, 0] - integrate_full(h @ x, 0.0, 1.0)[0, 0]) < 1e-14


def test_apply_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        apply(random_operator(rng, 2, 3), random_poly1(rng, 2, 1))


@SETTINGS
@given(seeds)
def test_apply_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    P = random_operator(rng, 2, 3, interval=(-0.5, 1.0))
    v = random_poly1(rng, 3, 1)
    got = apply(P, v)
    for s in (-0.5, 0.1, 0.7, 1.0):
        ref = apply_quadrature(P, v, s)
        assert np.allclose(got(s), ref, rtol=1e-9, atol=1e-9 * np.abs(ref).max())


# --- add / scale -------------------------------------------------------------


def test_add_negation_is_zero(rng):
    P = random_operator(rng, 2, 2)
    ok, disc = kernel_equal(pialg.add(P, pialg.scale(-1.0, P)), PIOperator.zero(2, 2))
    assert ok and disc == 0.0


def test_scale_zero(rng):
    assert kernel_equal(pialg.scale(0.0, random_operator(rng, 2, 2)), PIOperator.zero(2, 2))[0]


def test_add_multipliers(rng):
    A, B = rng.standard_normal((2, 2, 2))
    S = pialg.add(PIOperator.multiplier(A), PIOperator.multiplier(B))
    assert kernel_equal(S, PIOperator.multiplier(A + B))[0]


def test_add_interval_mismatch(rng):
    with pytest.raises(ValueError):
        random_operator(rng, 1, 1) + random_operator(rng, 1, 1, interval=(0.0, 2.0))


# --- compose -----------------------------------------------------------------


def test_compose_identity_left(rng):
    Q = random_operator(rng, 2, 3)
    assert kernel_equal(compose(PIOperator.identity(2), Q), Q)[0]


def test_compose_two_lower_operators():
    out = compose(LOWER, LOWER)
    s_minus_theta = MatPoly2.from_entries(1, 1, {(0, 0): [[0.0, -1.0], [1.0, 0.0]]})
    expect = PIOperator(MatPoly1.zeros(1, 1), s_minus_theta, ZERO2)
    assert kernel_equal(out, expect, 1e-14)[0]


@SETTINGS
@given(seeds)
def test_compose_matches_nested_apply(seed):
    rng = np.random.default_rng(seed)
    P, Q = random_operator(rng, 2, 3), random_operator(rng, 3, 2)
    PQ = compose(P, Q)
    assert PQ.degree <= P.degree + Q.degree + 1
    for _ in range(10):
        v = random_poly1(rng, 2, 1)
        assert poly_close(apply(PQ, v), apply(P, apply(Q, v)), 1e-9)


@SETTINGS
@given(seeds)
def test_compose_associative(seed):
    rng = np.random.default_rng(seed)
    P, Q, R = (random_operator(rng, 2, 2) for _ in range(3))
    ok, disc = kernel_equal(compose(P, compose(Q, R)), compose(compose(P, Q), R), 1e-10)
    assert ok, disc


# --- adjoint -----------------------------------------------------------------


def test_adjoint_symmetric_multiplier(rng):
    M = rng.standard_normal((3, 3))
    P = PIOperator.multiplier(M + M.T)
    assert kernel_equal(adjoint(P), P, 0.0)[0]


def test_adjoint_involution(rng):
    P = random_operator(rng, 2, 3)
    assert kernel_equal(adjoint(adjoint(P)), P, 0.0)[0]


@SETTINGS
@given(seeds)
def test_adjoint_inner_product(seed):
    rng = np.random.default_rng(seed)
    P = random_operator(rng, 2, 3)
    u, v = random_poly1(rng, 3, 1), random_poly1(rng, 2, 1)
    lhs = inner_quadrature(lambda s: apply_quadrature(P, u, s), v, 0.0, 1.0)
    rhs = inner_quadrature(u, adjoint(P)(v), 0.0, 1.0)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@SETTINGS
@given(seeds)
def test_adjoint_contravariant(seed):
    rng = np.random.default_rng(seed)
    P, Q = random_operator(rng, 2, 3), random_operator(rng, 3, 2)
    assert kernel_equal(adjoint(compose(P, Q)), compose(adjoint(Q), adjoint(P)), 1e-10)[0]


# --- gram operators ----------------------------------------------------------


def test_gram_degree_zero_identity():
    Z = GramBasis(2, 0, -1)
    assert Z.size == 2
    assert kernel_equal(gram_operator(Z, np.eye(2)), PIOperator.identity(2), 1e-14)[0]


def test_gram_zero_matrix():
    Z = GramBasis(1, 1, 1)
    assert kernel_equal(gram_operator(Z, np.zeros((Z.size, Z.size))), PIOperator.zero(1, 1))[0]


def test_gram_rejects_bad_matrix():
    Z = GramBasis(1, 1, 1)
    with pytest.raises(DimensionError):
        gram_operator(Z, np.eye(Z.size + 1))
    Q = np.eye(Z.size)
    Q[0, 1] = 1.0
    with pytest.raises(ValueError):
        gram_operator(Z, Q)


def test_gram_quadratic_form_nonnegative(rng):
    Z = GramBasis(2, 1, 2)
    F = rng.standard_normal((Z.size, 3))
    G = gram_operator(Z, F @ F.T)
    for _ in range(20):
        v = random_poly1(rng, 2, 1)
        val = inner_quadrature(v, lambda s: apply_quadrature(G, v, s), 0.0, 1.0)
        assert val >= -1e-9


def test_gram_linear_map_matches_gram_operator(rng):
    Z = GramBasis(2, 1, 1, multiplier_states=(0,))
    F = rng.standard_normal((Z.size, Z.size))
    Q = F @ F.T
    W, tri = gram_linear_map(Z)
    x = np.array([Q[k, l] for k, l in tri])
    combined = PIOperator(MatPoly1(np.tensordot(x, W.R0.coef, 1)),
                          MatPoly2(np.tensordot(x, W.R1.coef, 1)),
                          MatPoly2(np.tensordot(x, W.R2.coef, 1)))
    assert kernel_equal(combined, gram_operator(Z, Q), 1e-10)[0]
    assert np.array_equal(svec_to_sym(x, Z.size), Q)


# --- kernel_equal ------------------------------------------------------------


def test_kernel_equal_self_and_perturbed(rng):
    P = random_operator(rng, 2, 2)
    assert kernel_equal(P, P) == (True, 0.0)
    ok, disc = kernel_equal(P, P + PIOperator.identity(2) * 1e-6, 1e-10)
    assert not ok and disc > 1e-10
