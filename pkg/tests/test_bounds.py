import math

import numpy as np
import pytest

from agpkit.agp import AGPBuild
from agpkit.bounds import (
    asymptotic_exponent,
    eps_poly,
    eps_res,
    eq5_bound,
    error_budget,
    fit_eq5_constant,
    max_variance,
    variance_dlh,
)
from agpkit.evolve import evolve_tau_zero
from agpkit.polyapprox import build_odd_approximant, sup_error
from agpkit.spinchain import ChainModel, IsingParams, spectrum_profile


@pytest.fixture(scope="module")
def l4():
    model = ChainModel(IsingParams.benchmark(4))
    return model, spectrum_profile(model, 61)


def test_variance_identities(l4):
    model, prof = l4
    g = prof.gs_vectors[10]
    assert variance_dlh(g, 3.0 * np.eye(model.dim)) == pytest.approx(0.0, abs=1e-14)
    assert variance_dlh(g, model.dh) == pytest.approx(np.sum(prof.couplings[10] ** 2), rel=1e-10)


def test_variance_is_extensive():
    L = np.arange(4, 9)
    var = [max_variance(spectrum_profile(m, 21), m.dh) for m in (ChainModel(IsingParams.benchmark(int(k))) for k in L)]
    slope, icpt = np.polyfit(L, var, 1)
    fit = slope * L + icpt
    assert slope > 0
    assert np.max(np.abs(fit - var) / np.asarray(var)) < 0.1


def test_bound_arithmetic():
    assert eq5_bound(1.0, 1.0, 5, 2.0, 3.0) == 0.0
    assert eq5_bound(0.1, 1.0, 1, 2.0, 3.0) == pytest.approx(6.0)
    vals = [math.log(eq5_bound(0.1, 1.0, d, 1.0, 1.0) / math.log(d) ** 2) for d in (10, 11)]
    assert vals[1] - vals[0] == pytest.approx(2 * math.log(0.9 / 1.1), rel=1e-12)
    with pytest.raises(ValueError):
        eq5_bound(0.1, 1.0, 0, 1.0, 1.0)


def test_asymptotic_exponent():
    assert asymptotic_exponent(0.1, 1.0, 0) == 0.0
    r = 0.05
    exact = 2 * math.log((1 - r) / (1 + r))
    assert asymptotic_exponent(r, 1.0, 1) == pytest.approx(exact, rel=0.15)
    with pytest.warns(UserWarning):
        asymptotic_exponent(0.5, 1.0, 3)


def test_completeness_split_at_full_band(l4):
    model, prof = l4
    approx = build_odd_approximant(prof.delta_coupled, prof.omega_coupled, 4)
    assert eps_poly(approx, prof) == pytest.approx(sup_error(approx) ** 2 * max_variance(prof, model.dh), rel=1e-10)
    assert eps_res(prof, approx).actual == 0.0


def test_eps_poly_bounds_simulation(l4):
    model, prof = l4
    for d in (2, 4, 6):
        approx = build_odd_approximant(prof.delta_coupled, prof.omega_coupled, d)
        sim = evolve_tau_zero(model, AGPBuild(model, "universal", approx=approx)).final_infidelity
        assert eps_poly(approx, prof) >= sim


def test_cutoff_trade_off(l4):
    model, prof = l4
    omega = prof.omega_coupled
    cuts = [omega, 0.8 * omega, 0.6 * omega, 0.4 * omega]
    approx = [build_odd_approximant(prof.delta_coupled, w, 5) for w in cuts]
    sup = [sup_error(a) for a in approx]
    res = [eps_res(prof, a).actual for a in approx]
    assert all(b < a for a, b in zip(sup, sup[1:]))
    assert res[0] == 0.0 and all(b >= a for a, b in zip(res, res[1:]))
    env = eps_res(prof, approx[-1])
    assert env.envelope > 0 and env.actual > 0


def test_budget_components_nonnegative(l4):
    model, prof = l4
    approx = build_odd_approximant(prof.delta_coupled, 0.7 * prof.omega_coupled, 4)
    b = error_budget(approx, prof, model.dh, C=2.0)
    for v in (b.eps_poly, b.eps_res, b.eps_res_envelope, b.eq5_bound, b.variance):
        assert v >= 0
    assert b.total == b.eps_poly + b.eps_res
    assert b.asymptotic_exponent < 0


def test_fitted_constant_bounds_every_point():
    ds = [2, 4, 6, 8]
    y = [eq5_bound(0.2, 3.0, d, 1.5, 0.7) * f for d, f in zip(ds, (1.0, 0.5, 2.0, 0.9))]
    fit = fit_eq5_constant(ds, y, 0.2, 3.0, 1.5)
    assert fit.C_envelope == pytest.approx(1.4)
    assert all(v <= eq5_bound(0.2, 3.0, d, 1.5, fit.C_envelope) * (1 + 1e-12) for d, v in zip(ds, y))
    assert fit.C_log_lsq <= fit.C_envelope
    assert fit.slope_bound == pytest.approx(2 * math.log((1 - 0.2 / 3) / (1 + 0.2 / 3)))


def test_budget_optimum_near_simulated_optimum():
    model = ChainModel(IsingParams.benchmark(6))
    prof = spectrum_profile(model, 101)
    delta, omega = prof.delta_coupled, prof.omega_coupled
    cuts = list(np.geomspace(1.5 * delta, omega, 12))
    totals = [error_budget(build_odd_approximant(delta, w, 5), prof, model.dh).total for w in cuts]
    sims = [
        evolve_tau_zero(model, AGPBuild(model, "universal", approx=build_odd_approximant(delta, w, 5), route="commutator")).final_infidelity
        for w in cuts
    ]
    w_budget = cuts[int(np.argmin(totals))]
    w_sim = cuts[int(np.argmin(sims))]
    assert 0.5 <= w_budget / w_sim <= 2.0
