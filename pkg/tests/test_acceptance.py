"""Acceptance criteria A1-A7.

Each criterion records one PASS/FAIL line (printed in the terminal summary)
and then asserts.  Tolerances are the stated ones; a failing criterion is
left failing and analysed in the project's decision ledger.
"""

import time

import numpy as np
import pytest

from conftest import (apply_quadrature, inner_quadrature, random_operator, random_poly1,
                      random_specs)
from piestab import lpi
from piestab.convert import build_A, convert
from piestab.fixtures import dirichlet_diffusion, mckendrick, rd_observer
from piestab.model import apply_D, bc_residual, x_inner
from piestab.numeric import DiscretizedPIE, simulate, spectrum
from piestab.pialg import GramBasis, adjoint, apply, compose, gram_operator, kernel_equal
from piestab.polyalg import integrate_full

from test_convert import bc_satisfying_state

pytestmark = pytest.mark.slow

RESULTS = []
PAPER_C = 0.740625
PI2 = np.pi ** 2


def report(tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


class Recorder:
    """LPI verdict function that keeps every certified system for A6."""

    def __init__(self, store, label, **kw):
        self.store, self.label, self.kw = store, label, kw

    def __call__(self, pie, tag=None):
        cert = lpi.certify(pie, **self.kw)
        if cert.certified:
            self.store.append((f"{self.label} {tag or ''}".strip(), pie, cert))
        return cert


@pytest.fixture(scope="session")
def certified():
    return []


def mckendrick_rightmost(pie):
    return spectrum(pie, N=48).rightmost


@pytest.fixture(scope="session")
def a1(certified):
    t0 = time.perf_counter()
    rec = Recorder(certified, "A1 mckendrick", max_d_P=2)
    res = lpi.bisect_parameter(lambda c: convert(mckendrick(c)), 0.0, 1.5, tol=0.01,
                               verdict=lambda pie: rec(pie, f"c={pie.spec.parameters['c']:g}").verdict,
                               spectral=mckendrick_rightmost)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def a2(certified):
    t0 = time.perf_counter()
    rec = Recorder(certified, "A2 diffusion", max_d_P=2)
    c9 = rec(convert(dirichlet_diffusion(9.0)), "lam=9")
    c105 = rec(convert(dirichlet_diffusion(10.5)), "lam=10.5")
    res = lpi.spectral_threshold(lambda lam: convert(dirichlet_diffusion(lam)), 5.0, 15.0,
                                 lambda pie: spectrum(pie, N=64).rightmost)
    return c9, c105, res[0], time.perf_counter() - t0


@pytest.fixture(scope="session")
def a3(certified):
    t0 = time.perf_counter()
    rec = Recorder(certified, "A3 rd-observer", max_d_P=3)
    out = {}
    for lam, deg in ((5.0, 1), (6.0, 1), (6.0, 4)):
        out[(lam, deg)] = rec(convert(rd_observer(lam, deg)), f"lam={lam:g} degree={deg}")
    return out, time.perf_counter() - t0


def test_A1_mckendrick_threshold(a1):
    res, secs = a1
    lpi_ok = res.threshold is not None and abs(res.threshold - PAPER_C) <= 0.02
    spec_ok = res.spectral_threshold is not None and abs(res.spectral_threshold - PAPER_C) <= 0.005
    rm = mckendrick_rightmost(convert(mckendrick(PAPER_C)))
    ok = report("A1", lpi_ok and spec_ok and secs <= 300,
                f"LPI threshold {res.threshold} (target {PAPER_C} +/- 0.02), spectral threshold "
                f"{res.spectral_threshold} on [0, 1.5] (target +/- 0.005; rightmost at "
                f"c={PAPER_C} is {rm:.4f}), {secs:.0f} s")
    assert ok


def test_A2_diffusion_threshold(a2):
    c9, c105, thr, secs = a2
    ok = report("A2", c9.certified and not c105.certified and thr is not None
                and abs(thr - PI2) <= 1e-3 and secs <= 120,
                f"lam=9 {c9.verdict} (d_P={c9.d_P}), lam=10.5 {c105.verdict} (d_P<={c105.d_P}), "
                f"spectral threshold {thr:.6f} vs pi^2 {PI2:.6f}, {secs:.0f} s")
    assert ok


def test_A3_observer_degrees(a3):
    out, secs = a3
    v = {k: c.verdict for k, c in out.items()}
    ok = report("A3", v[(5.0, 1)] == "certified_stable"
                and v[(6.0, 1)] != "certified_stable"
                and v[(6.0, 4)] == "certified_stable" and secs <= 600,
                f"lam=5 degree 1: {v[(5.0, 1)]}; lam=6 degree 1: {v[(6.0, 1)]} "
                f"(d_P={out[(6.0, 1)].d_P}, expected no certificate at d_P<=3); "
                f"lam=6 degree 4: {v[(6.0, 4)]}; {secs:.0f} s")
    assert ok


def test_A4_structural_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = {"DT": 0.0, "TD": 0.0, "unitary": 0.0, "bc": 0.0, "paths": 0.0}
    grid = np.linspace(0.0, 1.0, 11)
    for spec in random_specs(20):
        pie = convert(spec)
        L = spec.layout
        for _ in range(3):
            xf, yf = random_poly1(rng, L.nx, 1, 4), random_poly1(rng, L.nx, 1, 4)
            x = pie.T(xf)
            worst["DT"] = max(worst["DT"], np.abs((apply_D(L, x) - xf).eval_many(grid)).max())
            worst["bc"] = max(worst["bc"], np.abs(bc_residual(spec, x)).max(initial=0.0))
            lhs = x_inner(L, x, pie.T(yf), spec.interval)
            rhs = integrate_full(xf.T @ yf, *spec.interval)[0, 0]
            worst["unitary"] = max(worst["unitary"], abs(lhs - rhs) / max(1.0, abs(rhs)))
            z = bc_satisfying_state(spec, rng)
            worst["TD"] = max(worst["TD"], np.abs((pie.T(apply_D(L, z)) - z).eval_many(grid)).max()
                              / max(1.0, np.abs(z.eval_many(grid)).max()))
        worst["paths"] = max(worst["paths"],
                             kernel_equal(build_A(spec), build_A(spec, "closed_form"))[1])
    secs = time.perf_counter() - t0
    ok = report("A4", all(v <= 1e-10 for k, v in worst.items() if k != "TD")
                and worst["TD"] <= 1e-9 and secs <= 120,
                ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {secs:.0f} s")
    assert ok


def test_A5_algebra_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    err_adj = err_comp = 0.0
    for _ in range(50):
        P, Q = random_operator(rng, 2, 3), random_operator(rng, 3, 2)
        u, v = random_poly1(rng, 3, 1), random_poly1(rng, 2, 1)
        lhs = inner_quadrature(lambda s: apply_quadrature(P, u, s), v, 0.0, 1.0)
        rhs = inner_quadrature(u, adjoint(P)(v), 0.0, 1.0)
        err_adj = max(err_adj, abs(lhs - rhs) / max(1.0, abs(lhs)))
        PQ = compose(P, Q)
        inner_v = apply(Q, v)
        for s in (0.0, 0.3, 0.77, 1.0):
            ref = apply_quadrature(P, inner_v, s)
            err_comp = max(err_comp, np.abs(apply_quadrature(PQ, v, s) - ref).max()
                           / max(1.0, np.abs(ref).max()))
    Z = GramBasis(2, 1, 2)
    F = rng.standard_normal((Z.size, 4))
    G = gram_operator(Z, F @ F.T)
    low = min(inner_quadrature(w, lambda s: apply_quadrature(G, w, s), 0.0, 1.0)
              for w in (random_poly1(rng, 2, 1) for _ in range(50)))
    secs = time.perf_counter() - t0
    ok = report("A5", err_adj <= 1e-9 and err_comp <= 1e-9 and low >= -1e-9 and secs <= 60,
                f"adjoint {err_adj:.1e}, composition {err_comp:.1e}, "
                f"min gram form {low:.2e}, {secs:.0f} s")
    assert ok


def test_A6_certificate_soundness(a1, a2, a3, certified):
    bad = []
    for label, pie, cert in certified:
        rep = lpi.verify_certificate(pie, cert)
        rm = spectrum(pie, N=48).rightmost
        if not rep.verified or not rm < 0:
            bad.append(f"{label}: verified={rep.verified} rightmost={rm:.3g}")
    ok = report("A6", bool(certified) and not bad,
                f"{len(certified)} certificates checked" + ("; " + "; ".join(bad) if bad else ""))
    assert ok


def test_A7_simulation():
    N, h = 32, 1e-3
    D = DiscretizedPIE.build(convert(dirichlet_diffusion(0.0)), N)
    xf0 = -PI2 * np.sin(np.pi * D.grid.nodes)
    rate = simulate(D, xf0, 0.2, h).decay_rate()
    D = DiscretizedPIE.build(convert(mckendrick(1.0)), N)
    traj = simulate(D, np.ones(N), 1.0, h)
    grows = traj.x_norm[-1] > traj.x_norm[0]
    ok = report("A7", abs(rate / PI2 - 1.0) <= 0.02 and grows,
                f"diffusion decay rate {rate:.4f} vs pi^2 {PI2:.4f}; McKendrick c=1 "
                f"||x(0)|| = {traj.x_norm[0]:.4f}, ||x(1)|| = {traj.x_norm[-1]:.4f}")
    assert ok
