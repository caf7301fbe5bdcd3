from dataclasses import replace

import numpy as np
import pytest

from piestab import lpi
from piestab.convert import PIESystem, convert
from piestab.fixtures import dirichlet_diffusion, mckendrick
from piestab.lpi import (NO_CERT_TEXT, BisectionError, DegreeError, assemble, bisect_parameter,
                         certify, solve, verify_certificate)
from piestab.model import StateLayout
from piestab.numeric import spectrum
from piestab.pialg import PIOperator


def diffusion(lam):
    return convert(dirichlet_diffusion(lam))


@pytest.fixture(scope="module")
def cert9():
    pie = diffusion(9.0)
    return pie, certify(pie, d_P=1)


def test_degree_too_small_reports_missing_monomials():
    with pytest.raises(DegreeError) as err:
        assemble(diffusion(1.0), d_P=1, d_H=3)
    assert err.value.missing
    assert "R1" in str(err.value)


def test_smallest_workable_degree():
    cert = solve(assemble(diffusion(1.0), d_P=1, d_H=4))
    assert cert.verdict == "certified_stable"


def test_default_degree_heuristic():
    pie = diffusion(1.0)
    assert lpi.default_dH(pie, 1) == pie.T.degree + pie.A.degree + 3
    assert assemble(pie, 1).d_H == lpi.default_dH(pie, 1)


def test_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        assemble(diffusion(1.0), 1, alpha=0.0)


def test_certified_below_pi_squared(cert9):
    pie, cert = cert9
    assert cert.verdict == "certified_stable"
    assert cert.equality_residual <= lpi.EQ_TOL
    assert cert.min_eig_P >= -lpi.EIG_RTOL * max(np.linalg.norm(cert.Q_P, 2), 1.0)
    assert spectrum(pie, N=32).rightmost < 0


def test_no_certificate_above_pi_squared():
    cert = certify(diffusion(12.0), d_P=1)
    assert cert.verdict == "infeasible_at_degree"
    assert NO_CERT_TEXT in cert.message and NO_CERT_TEXT in cert.describe()
    assert "unstable" not in cert.describe()
    assert cert.margin_bound < 0


def test_mckendrick_without_growth():
    assert certify(convert(mckendrick(0.0)), d_P=1).verdict == "certified_stable"


def test_verification_passes(cert9):
    pie, cert = cert9
    rep = verify_certificate(pie, cert)
    assert rep.verified, rep.failures
    assert rep.min_lyapunov_margin >= -1e-7
    assert rep.min_positivity_margin >= -1e-7


def test_verification_catches_negative_gram(cert9):
    pie, cert = cert9
    bad = replace(cert, Q_H=cert.Q_H - 1e-3 * np.eye(len(cert.Q_H)))
    rep = verify_certificate(pie, bad)
    assert not rep.verified
    assert any("Q_H" in f for f in rep.failures)


def test_verification_catches_wrong_system(cert9):
    _, cert = cert9
    rep = verify_certificate(diffusion(12.0), cert)
    assert not rep.verified
    assert rep.kernel_residual > 1e-3


def test_verification_dimension_mismatch(cert9):
    _, cert = cert9
    pie = convert(dirichlet_diffusion(1.0))
    two = PIESystem(PIOperator.identity(2), PIOperator.identity(2) * -1.0, StateLayout(2, 0, 0))
    assert not verify_certificate(two, cert).verified
    assert verify_certificate(pie, cert).kernel_residual > 0


def test_scaling_invariance():
    pie = diffusion(9.0)
    assert certify(pie.scaled(3.0), d_P=1).verdict == "certified_stable"
    assert certify(diffusion(12.0).scaled(3.0), d_P=1).verdict == "infeasible_at_degree"


def test_monotone_in_degree():
    pie = diffusion(9.0)
    low = solve(assemble(pie, 1, 7))
    high = solve(assemble(pie, 2, 9))
    assert low.certified and high.certified


def test_A_equals_minus_T():
    base = diffusion(1.0)
    pie = PIESystem(base.T, base.T * -1.0, base.layout)
    cert = certify(pie, d_P=1)
    assert cert.certified
    assert verify_certificate(pie, cert).verified


def test_empty_system():
    empty = PIESystem(PIOperator.zero(0, 0), PIOperator.zero(0, 0), StateLayout(0, 0, 0))
    prob = assemble(empty, 1)
    assert prob.data.m == 0
    assert solve(prob).verdict == "certified_stable"


def test_certificate_dict():
    cert = certify(diffusion(1.0), d_P=1)
    d = cert.to_dict(include_gram=True)
    assert d["verdict"] == "certified_stable"
    assert np.array(d["Q_P"]).shape == cert.Q_P.shape


def test_export(tmp_path):
    prob = assemble(diffusion(1.0), 1)
    text = prob.export(tmp_path / "lpi.dat-s")
    assert int(text.splitlines()[0]) == prob.data.m


# --- bisection ------------------------------------------------------------------


def spectral_verdict(pie):
    # cheap stand-in for the LPI verdict; exact threshold pi^2 on diffusion
    return "certified_stable" if spectrum(pie, N=24).rightmost < 0 else "infeasible_at_degree"


def test_bisect_degenerate_interval():
    res = bisect_parameter(diffusion, 5.0, 5.0, verdict=spectral_verdict)
    assert res.threshold is None and res.points == [(5.0, "certified_stable")]


def test_bisect_logic_on_diffusion():
    res = bisect_parameter(diffusion, 5.0, 15.0, tol=0.01, verdict=spectral_verdict,
                           spectral=lambda p: spectrum(p, N=32).rightmost)
    assert abs(res.threshold - np.pi ** 2) < 0.01
    assert abs(res.spectral_threshold - np.pi ** 2) < 1e-6
    assert res.stable_side == "lo"
    assert res.to_dict()["lpi_threshold"] == res.threshold


def test_bisect_reports_non_monotone():
    # the family is the identity; verdicts alternate in bands of width 4
    weird = lambda p: "certified_stable" if p % 4 < 2 else "infeasible_at_degree"
    with pytest.raises(BisectionError, match="non-monotone"):
        bisect_parameter(lambda p: p, 1.0, 13.0, verdict=weird, grid=20)


def test_bisect_needs_bracket():
    with pytest.raises(BisectionError):
        bisect_parameter(diffusion, 1.0, 2.0, verdict=spectral_verdict)


@pytest.mark.slow
def test_bisect_lpi_diffusion():
    res = bisect_parameter(lambda lam: diffusion(lam), 5.0, 15.0, tol=0.1,
                           verdict=lambda pie: certify(pie, d_P=1).verdict)
    # LPI is sufficient only: the threshold cannot exceed pi^2 by more than tol
    assert np.pi ** 2 - 0.5 < res.threshold < np.pi ** 2 + 0.1
