import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agpkit.agp import (
    AGPBuild,
    CommutatorCache,
    SingularGaugeError,
    VariationalFit,
    assemble_agp,
    commutator,
    exact_agp,
    gamma_moments,
    krylov_chain,
    nested_commutators,
    trace_inner,
    trace_norm,
    universal_coeffs,
    variational_coeffs,
    variational_objective,
    variational_objective_moments,
)
from agpkit.polyapprox import build_odd_approximant
from agpkit.spinchain import ChainModel, IsingParams, eigh_fixed_phase, spectrum_profile

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def test_single_qubit_exact_agp_closed_form():
    hz, hx, hp = 0.7, 1.3, 2.0
    h = hz * SZ + hx * SX
    e, v = eigh_fixed_phase(h)
    a = exact_agp(e, v, hp * SX)
    np.testing.assert_allclose(a, hp * hz / (2 * (hz**2 + hx**2)) * SY, atol=1e-14)


def test_exact_agp_vanishes_for_commuting_drive():
    e, v = eigh_fixed_phase(0.9 * SX)
    np.testing.assert_allclose(exact_agp(e, v, 0.4 * SX), 0, atol=1e-15)


def test_exact_agp_rejects_singular_gauge():
    # degenerate levels joined by the drive
    e = np.array([0.0, 0.0, 1.0])
    v = np.eye(3, dtype=complex)
    dh = np.zeros((3, 3), dtype=complex)
    dh[0, 1] = dh[1, 0] = 1.0
    with pytest.raises(SingularGaugeError):
        exact_agp(e, v, dh)
    dh2 = np.zeros((3, 3), dtype=complex)
    dh2[0, 2] = dh2[2, 0] = 1.0
    a = exact_agp(e, v, dh2)
    assert a[0, 1] == 0


def test_single_qubit_commutator_pauli_algebra():
    hz, hx, hp = 0.7, 1.3, 2.0
    h = hz * SZ + hx * SX
    (c1,) = nested_commutators(h, hp * SX, 1)
    np.testing.assert_allclose(c1, 2j * hz * hp * SY, atol=1e-14)


def test_commuting_family_gives_zero_commutators():
    for c in nested_commutators(0.9 * SX, 0.4 * SX, 3):
        np.testing.assert_allclose(c, 0, atol=1e-15)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4), st.floats(0, 1))
@settings(max_examples=20, deadline=None)
def test_eigenbasis_elements_follow_polynomial(coeffs, lam):
    model = ChainModel(IsingParams.benchmark(3))
    h = model.hamiltonian(lam)
    a = assemble_agp(nested_commutators(h, model.dh, len(coeffs)), coeffs)
    assert np.max(np.abs(a - a.conj().T)) <= 1e-10 * max(1.0, np.max(np.abs(a)))
    assert abs(np.trace(a)) <= 1e-10 * max(1.0, np.max(np.abs(a)))
    e, v = model.eigh(lam)
    om = e[:, None] - e[None, :]
    p = sum(c * om ** (2 * k - 1) for k, c in enumerate(coeffs, start=1))
    target = -1j * p * (v.conj().T @ model.dh @ v)
    np.testing.assert_allclose(v.conj().T @ a @ v, target, atol=1e-9 * max(1.0, np.max(np.abs(target))))


def test_assembly_contract():
    h, dh = SZ, SX
    comms = nested_commutators(h, dh, 2)
    np.testing.assert_allclose(assemble_agp(comms, [0.0, 0.0]), 0)
    with pytest.raises(ValueError):
        assemble_agp(comms, [1.0])
    approx = build_odd_approximant(0.2, 2.0, 3)
    assert list(universal_coeffs(approx)) == list(approx.monomial)


def test_universal_elements_approach_exact():
    model = ChainModel(IsingParams.benchmark(4))
    prof = spectrum_profile(model, 41)
    lam = 0.5
    e, v = model.eigh(lam)
    exact = v.conj().T @ exact_agp(e, v, model.dh) @ v
    errs = []
    for d in (4, 12):
        approx = build_odd_approximant(prof.delta_coupled, prof.omega_coupled, d)
        a = AGPBuild(model, "universal", approx=approx, route="commutator").operator_at(lam)
        elems = v.conj().T @ a @ v
        errs.append(np.max(np.abs(elems[1:, 0] - exact[1:, 0])))
    assert errs[1] < errs[0] / 10


def test_gamma_moments_against_commutator_norms():
    model = ChainModel(IsingParams.benchmark(3))
    lam = 0.4
    h = model.hamiltonian(lam)
    e, v = model.eigh(lam)
    mom = gamma_moments(e, v, model.dh, 4, lam)
    x = v.conj().T @ model.dh @ v
    assert mom[0] == pytest.approx(0.5 * (np.sum(np.abs(x) ** 2) - np.sum(np.abs(np.diag(x)) ** 2)), rel=1e-12)
    op = model.dh
    for k in range(1, 5):
        op = commutator(h, op)
        # Frobenius norm squared of L^k X over ordered pairs is twice the folded moment
        assert np.sum(np.abs(op) ** 2) / 2 == pytest.approx(mom[k], rel=1e-10)
    g = np.array(mom.gammas)
    assert np.all(g[2:] * g[:-2] >= g[1:-1] ** 2 * (1 - 1e-12))


def test_variational_d1_closed_form():
    model = ChainModel(IsingParams.benchmark(3))
    e, v = model.eigh(0.2)
    mom = gamma_moments(e, v, model.dh, 2)
    assert variational_coeffs(mom, 1)[0] == pytest.approx(mom[1] / mom[2], rel=1e-12)


def test_variational_solves_moment_system():
    model = ChainModel(IsingParams.benchmark(4))
    e, v = model.eigh(0.5)
    mom = gamma_moments(e, v, model.dh, 8)
    c = variational_coeffs(mom, 4)
    for j in range(1, 5):
        lhs = sum(c[k - 1] * mom[k + j] for k in range(1, 5))
        assert lhs == pytest.approx(mom[j], rel=1e-7)


def test_variational_is_stationary_and_moment_objective_agrees():
    model = ChainModel(IsingParams.benchmark(4))
    lam = 0.5
    h = model.hamiltonian(lam)
    e, v = model.eigh(lam)
    for d in (1, 2, 3):
        mom = gamma_moments(e, v, model.dh, 2 * d)
        c = variational_coeffs(mom, d)
        comms = nested_commutators(h, model.dh, d)
        s0 = variational_objective(h, model.dh, assemble_agp(comms, c))
        tr = float(np.real(np.trace(model.dh @ model.dh)))
        assert variational_objective_moments(mom, c, tr) == pytest.approx(s0, rel=1e-8)
        for k in range(d):
            for f in (1.01, 0.99):
                cp = np.array(c)
                cp[k] *= f
                assert variational_objective(h, model.dh, assemble_agp(comms, cp)) > s0


def test_variational_fit_matches_hankel_solution():
    model = ChainModel(IsingParams.benchmark(4))
    e, v = model.eigh(0.3)
    d = 3
    c = variational_coeffs(gamma_moments(e, v, model.dh, 2 * d), d)
    fit = VariationalFit.from_spectrum(e, v, model.dh, d)
    w = np.linspace(0.1, 6.0, 13)
    p_hankel = sum(ck * w ** (2 * k - 1) for k, ck in enumerate(c, start=1))
    np.testing.assert_allclose(fit(w), p_hankel, rtol=1e-6)


def test_commutator_route_matches_spectral_route():
    model = ChainModel(IsingParams.benchmark(4))
    approx = build_odd_approximant(0.5, 6.0, 3)
    spec = AGPBuild(model, "universal", approx=approx)
    comm = AGPBuild(model, "universal", approx=approx, route="commutator")
    var_s = AGPBuild(model, "variational", d=2)
    var_c = AGPBuild(model, "variational", d=2, route="commutator")
    for lam in (0.0, 0.37, 1.0):
        a = comm.operator_at(lam)
        np.testing.assert_allclose(spec.operator_at(lam), a, atol=1e-8 * np.max(np.abs(a)))
        b = var_c.operator_at(lam)
        np.testing.assert_allclose(var_s.operator_at(lam), b, atol=1e-7 * np.max(np.abs(b)))
    with pytest.raises(ValueError):
        AGPBuild(model, "exact", route="commutator")
    with pytest.raises(ValueError):
        AGPBuild(model, "universal")


def test_commutator_cache_is_polynomial_in_lambda():
    model = ChainModel(IsingParams.benchmark(3))
    cache = CommutatorCache(model.h0, model.v, model.dh, 3)
    for lam in (0.0, 0.6):
        direct = nested_commutators(model.hamiltonian(lam), model.dh, 2)
        np.testing.assert_allclose(cache.depth_at(1, lam), direct[0], atol=1e-12)
        np.testing.assert_allclose(cache.depth_at(3, lam), direct[1], atol=1e-10)


def test_krylov_single_qubit():
    chain = krylov_chain(SZ, SX, 3)
    assert chain.b[0] == pytest.approx(2.0)
    assert trace_norm(SX) == pytest.approx(1.0)
    assert trace_inner(SX, SY) == 0


def test_krylov_terminates_for_commuting_pair():
    chain = krylov_chain(SX, SX, 5)
    assert len(chain.ops) == 1
    assert len(chain.b) == 0


def test_krylov_orthonormal_and_moment_consistent():
    model = ChainModel(IsingParams.benchmark(5))
    h = model.hamiltonian(0.3)
    chain = krylov_chain(h, model.dh, 15)
    assert np.all(chain.b > 0)
    gram = np.array([[trace_inner(a, b) for b in chain.ops] for a in chain.ops])
    assert np.max(np.abs(gram - np.eye(len(chain.ops)))) < 1e-8
    e, v = model.eigh(0.3)
    mom = gamma_moments(e, v, model.dh, 6)
    for k in range(1, 7):
        val = 0.5 * model.dim * trace_norm(model.dh) ** 2 * chain.liouvillian_moment(k)
        assert val == pytest.approx(mom[k], rel=1e-8)
    with pytest.raises(ValueError):
        chain.liouvillian_moment(len(chain.ops))
