import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agpkit.bounds import variance_dlh
from agpkit.spinchain import (
    GOLDEN_RATIO,
    ChainModel,
    IsingParams,
    dlambda_h,
    eigh_fixed_phase,
    hamiltonian,
    matrix_element_decay,
    parity_operator,
    parity_project,
    spectrum_profile,
)

# independent 2x2 / 4x4 construction, most significant bit = site 1
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def brute_two_site(J, hz, hx):
    return (
        J * np.kron(Z, Z)
        + hz * (np.kron(Z, I2) + np.kron(I2, Z))
        + hx * (np.kron(X, I2) + np.kron(I2, X))
    )


def test_single_site_closed_form():
    p = IsingParams(L=1, J=1.0, h_z=0.3, h_x_start=0.5, h_x_end=2.5)
    for lam in (0.0, 0.4, 1.0):
        e = np.linalg.eigvalsh(hamiltonian(p, lam))
        r = math.hypot(0.3, p.h_x(lam))
        np.testing.assert_allclose(e, [-r, r], atol=1e-14)


def test_two_site_matches_brute_force():
    p = IsingParams(L=2, J=1.0, h_z=0.0, h_x_start=0.5, h_x_end=2.5)
    np.testing.assert_allclose(hamiltonian(p, 0.0), brute_two_site(1.0, 0.0, 0.5), atol=1e-15)
    p2 = IsingParams(L=2, J=-1.0, h_z=0.7, h_x_start=0.5, h_x_end=2.5)
    np.testing.assert_allclose(hamiltonian(p2, 0.3), brute_two_site(-1.0, 0.7, 0.5 + 0.3 * 2.0), atol=1e-15)


def test_benchmark_point():
    p = IsingParams.benchmark(6, J=1.0)
    assert p.h_z == pytest.approx(1 / GOLDEN_RATIO)
    assert (p.h_x_start, p.h_x_end) == (0.5, 2.5)
    assert IsingParams.benchmark(6, integrable=True).h_z == 0.0
    with pytest.raises(ValueError):
        IsingParams(L=0)


def test_dlambda_is_exact_difference():
    p = IsingParams.benchmark(3)
    eps = 0.1
    fd = (hamiltonian(p, 0.5 + eps) - hamiltonian(p, 0.5 - eps)) / (2 * eps)
    np.testing.assert_allclose(fd, dlambda_h(p), atol=1e-13)
    single = IsingParams.benchmark(1, J=1.0)
    np.testing.assert_allclose(dlambda_h(single), 2.0 * X)


@given(st.integers(1, 6), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 1))
@settings(max_examples=25, deadline=None)
def test_hermitian_and_eigen_residual(L, J, hz, lam):
    if abs(J) < 1e-3:
        J = 1.0
    p = IsingParams(L=L, J=J, h_z=hz)
    h = hamiltonian(p, lam)
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12
    e, v = eigh_fixed_phase(h)
    assert np.all(np.diff(e) >= 0)
    assert np.linalg.norm(h @ v - v * e) <= 1e-10 * max(1.0, np.linalg.norm(h, 2))
    lead = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])]
    np.testing.assert_allclose(lead.imag, 0, atol=1e-14)
    assert np.all(lead.real > 0)


def test_parity_symmetry_and_projection():
    L = 4
    p = IsingParams.benchmark(L, integrable=True)
    h = hamiltonian(p, 0.3)
    P = parity_operator(L)
    assert np.linalg.norm(h @ P - P @ h) <= 1e-12
    np.testing.assert_allclose(parity_project(np.eye(2**L), L), np.eye(2 ** (L - 1)), atol=1e-15)
    sub = np.linalg.eigvalsh(parity_project(h, L))
    full = np.linalg.eigvalsh(h)
    assert all(np.min(np.abs(full - s)) < 1e-10 for s in sub)
    with pytest.raises(ValueError):
        parity_project(hamiltonian(IsingParams.benchmark(L), 0.3), L)
    with pytest.raises(ValueError):
        ChainModel(IsingParams.benchmark(L), "positive-parity")


def test_reflection_symmetry_of_spectrum():
    L = 5
    p = IsingParams.benchmark(L)
    h = hamiltonian(p, 0.6)
    dim = 2**L
    perm = np.zeros((dim, dim))
    for s in range(dim):
        r = int(format(s, f"0{L}b")[::-1], 2)
        perm[r, s] = 1
    np.testing.assert_allclose(perm @ h @ perm.T, h, atol=1e-14)


def test_large_longitudinal_field_gap():
    # deep in the polarized regime the gap is one spin flip: 2 h_z minus the bond cost
    p = IsingParams(L=2, J=1.0, h_z=100.0, h_x_start=0.5, h_x_end=2.5)
    prof = spectrum_profile(ChainModel(p), 5)
    brute = min(np.diff(np.linalg.eigvalsh(brute_two_site(1.0, 100.0, p.h_x(lam))))[0] for lam in np.linspace(0, 1, 5))
    assert prof.delta == pytest.approx(brute, rel=1e-12)
    assert prof.delta == pytest.approx(2 * 100.0 - 2 * 1.0, rel=1e-3)


def test_gap_shift_invariance():
    model = ChainModel(IsingParams.benchmark(3))
    prof = spectrum_profile(model, 21)
    e = [np.linalg.eigvalsh(model.hamiltonian(l) + 7.0 * np.eye(8)) for l in prof.lambda_grid]
    assert min(x[1] - x[0] for x in e) == pytest.approx(prof.delta, rel=1e-12)
    assert prof.delta > 0 and prof.omega_big > prof.delta
    assert prof.delta <= prof.delta_coupled <= prof.omega_coupled <= prof.omega_big


def test_coupled_extremes_grow_with_size():
    ratios = []
    for L in (4, 5, 6):
        prof = spectrum_profile(ChainModel(IsingParams.benchmark(L)), 41)
        ratios.append(prof.omega_coupled / prof.delta_coupled)
    assert ratios[0] < ratios[1] < ratios[2]


def test_degenerate_ground_state_flagged():
    # at lam = 0 the two ferromagnetic states are exactly degenerate
    p = IsingParams(L=2, J=-1.0, h_z=0.0, h_x_start=0.0, h_x_end=1.0)
    with pytest.warns(UserWarning):
        prof = spectrum_profile(ChainModel(p), 3)
    assert prof.degenerate
    idle = IsingParams(L=2, J=-1.0, h_z=0.2, h_x_start=0.5, h_x_end=0.5)
    prof = spectrum_profile(ChainModel(idle), 3)
    assert math.isnan(prof.delta_coupled) and not prof.degenerate


def test_couplings_sum_to_variance():
    model = ChainModel(IsingParams.benchmark(5))
    prof = spectrum_profile(model, 11)
    for i in (0, 5, 10):
        assert np.sum(prof.couplings[i] ** 2) == pytest.approx(variance_dlh(prof.gs_vectors[i], model.dh), rel=1e-10)


def test_matrix_element_decay_envelope():
    prof = spectrum_profile(ChainModel(IsingParams.benchmark(6)), 21)
    omega, coupling = matrix_element_decay(prof)
    assert np.all(np.diff(omega) >= 0)
    keep = coupling > 1e-8 * coupling.max()
    top = omega[keep] > np.median(omega[keep])
    slope = np.polyfit(omega[keep][top], np.log(coupling[keep][top]), 1)[0]
    assert slope < 0
