import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LAYOUTS, random_spec
from piestab.fixtures import dirichlet_diffusion, mckendrick
from piestab.model import (PDESpec, StateLayout, ValidationError, check_admissibility,
                           compute_BT, structural_matrices, validate)
from piestab.polyalg import MatPoly1, MatPoly2

SETTINGS = settings(max_examples=20, deadline=None, derandomize=True)


def neumann():
    spec = dirichlet_diffusion(0.0)
    spec.B = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
    return spec


# --- validate ----------------------------------------------------------------


def test_validate_mckendrick():
    L = validate(mckendrick(0.3))
    assert (L.nx, L.nS, L.nD) == (1, 1, 2)


def test_validate_dirichlet():
    L = validate(dirichlet_diffusion(1.0))
    assert (L.nx, L.nS) == (1, 2)


def test_validate_bc_count():
    spec = dirichlet_diffusion(1.0)
    spec.B = spec.B[:1]
    spec.BI = MatPoly1.zeros(1, 3)
    with pytest.raises(ValidationError, match="boundary condition count"):
        validate(spec)


def test_validate_reports_each_block():
    spec = dirichlet_diffusion(1.0)
    spec.A0 = MatPoly1.zeros(1, 2)
    spec.A1 = MatPoly2.zeros(2, 3)
    with pytest.raises(ValidationError) as err:
        validate(spec)
    msg = str(err.value)
    assert "A0" in msg and "A1" in msg


def test_validate_domain():
    spec = mckendrick(0.0)
    spec.interval = (1.0, 1.0)
    with pytest.raises(ValidationError, match="domain"):
        validate(spec)


# --- structural matrices -----------------------------------------------------


def test_structural_first_order():
    M = structural_matrices(StateLayout(0, 1, 0))
    assert np.array_equal(M["T"](0.7), [[1.0]])
    assert np.array_equal(M["Q"](0.7), [[1.0]])
    assert np.array_equal(M["U1"], [[0.0], [1.0]])
    assert np.array_equal(M["U2"], [[1.0], [0.0]])


def test_structural_second_order():
    M = structural_matrices(StateLayout(0, 0, 1))
    eta = 0.4
    assert np.array_equal(M["T"](eta), [[1.0, eta], [0.0, 1.0]])
    assert np.array_equal(M["Q"](eta), [[eta], [1.0]])


def test_structural_no_differentiable_states():
    M = structural_matrices(StateLayout(1, 0, 0))
    assert M["T"].shape == (0, 0) and M["Q"].shape == (0, 1)
    assert np.array_equal(M["U1"], [[1.0]]) and M["U2"].shape == (1, 0)


@pytest.mark.parametrize("n", LAYOUTS + [(2, 0, 2), (1, 3, 0)])
def test_structural_embeddings_orthogonal(n):
    L = StateLayout(*n)
    M = structural_matrices(L)
    U1, U2 = M["U1"], M["U2"]
    assert np.array_equal(U1.T @ U1, np.eye(L.nx))
    assert np.array_equal(U2.T @ U2, np.eye(L.nS))
    assert not (U1.T @ U2).any()


@pytest.mark.parametrize("n", LAYOUTS)
@SETTINGS
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_T_group_law(n, e1, e2):
    T = structural_matrices(StateLayout(*n))["T"]
    assert np.array_equal(T(0.0), np.eye(T.rows))
    assert np.allclose(T(e1) @ T(e2), T(e1 + e2), rtol=1e-14, atol=1e-14)


# --- B_T and admissibility ---------------------------------------------------


def test_BT_dirichlet():
    assert np.array_equal(compute_BT(dirichlet_diffusion(1.0)), [[1.0, 0.0], [1.0, 1.0]])


def test_BT_mckendrick():
    assert abs(compute_BT(mckendrick(0.0))[0, 0] - 5 / 6) < 1e-15


def test_BT_neumann_singular():
    assert np.array_equal(compute_BT(neumann()), [[0.0, 1.0], [0.0, 1.0]])


def test_admissibility_verdicts():
    rep = check_admissibility(dirichlet_diffusion(1.0))
    assert rep.admissible and abs(rep.sigma_min - (np.sqrt(5) - 1) / 2) < 1e-14
    rep = check_admissibility(mckendrick(0.0))
    assert rep.admissible and abs(rep.sigma_min - 5 / 6) < 1e-14
    assert not check_admissibility(neumann()).admissible


@pytest.mark.parametrize("n", LAYOUTS)
def test_BT_without_integral_terms(n):
    spec = random_spec(np.random.default_rng(7), n, interval=(-0.5, 1.5))
    spec.BI = MatPoly1.zeros(*spec.BI.shape)
    T = structural_matrices(spec.layout)["T"]
    assert np.array_equal(compute_BT(spec), spec.B @ np.vstack([T(0.0), T(2.0)]))


def test_spec_dataclass_layout():
    spec = PDESpec(n=(1, 0, 0), A0=MatPoly1.const([[-1.0]]), A1=MatPoly2.zeros(1, 1),
                   A2=MatPoly2.zeros(1, 1), B=np.zeros((0, 0)), BI=MatPoly1.zeros(0, 1))
    assert validate(spec).nS == 0
    assert check_admissibility(spec).admissible
