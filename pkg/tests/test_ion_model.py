import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from sechgate.dynamics import propagate_state, propagate_unitary, state_trajectory
from sechgate.ion_model import (
    DIM,
    E,
    G0,
    G1,
    BarBasis,
    BlockadeParams,
    ConfigurationError,
    DecayChannel,
    IonParams,
    accelerated_hamiltonian,
    bar_basis_hamiltonian,
    embed,
    single_ion_hamiltonian,
    split_h0_v,
    two_ion_hamiltonian,
)
from sechgate.pulse_engine import (
    SechPulseParams,
    chirp_phase,
    complex_rabi,
    instantaneous_detuning,
    rabi_envelope,
    reference_pulse,
)

small = st.floats(-1, 1)
cplx = st.builds(complex, st.floats(-5, 5), st.floats(-5, 5))


def test_static_diagonal():
    h = single_ion_hamiltonian(IonParams(0.1, 0.03))
    assert np.allclose(h, np.diag([0, -0.03, 0.1]), atol=0)


def test_drive_half_factor():
    h = single_ion_hamiltonian(IonParams(), [(G0, 4.0)])
    assert h[E, G0] == 2.0
    assert h[G0, E] == 2.0


def test_duplicate_drive_rejected():
    with pytest.raises(ConfigurationError):
        single_ion_hamiltonian(IonParams(), [(G0, 1.0), (G0, 2.0)])
    with pytest.raises(ConfigurationError):
        single_ion_hamiltonian(IonParams(), [(E, 1.0)])


def test_hyperfine_bound_warns():
    with pytest.warns(UserWarning):
        IonParams(0.0, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        IonParams(0.0, 0.2)


@given(small, small, cplx, cplx)
def test_hamiltonians_hermitian(delta, dhf, a0, a1):
    ion = IonParams(delta, dhf * 0.05)
    for h in (single_ion_hamiltonian(ion, [(G0, a0), (G1, a1)]),
              bar_basis_hamiltonian(ion, BarBasis(delta), [(G0, a0), (G1, a1)]),
              two_ion_hamiltonian(ion, ion, BlockadeParams(3.0), {"control": [(G0, a0)], "target": [(G1, a1)]})):
        assert np.max(np.abs(h - h.conj().T)) < 1e-14


@given(st.floats(-np.pi, np.pi), small, small, cplx, cplx)
def test_bar_closed_form_matches_conjugation(alpha, delta, dhf, a0, a1):
    ion = IonParams(delta, dhf * 0.05)
    bar = BarBasis(alpha)
    drives = [(G0, a0), (G1, a1)]
    numeric = bar.to_bar(single_ion_hamiltonian(ion, drives))
    closed = bar_basis_hamiltonian(ion, bar, drives)
    assert np.max(np.abs(numeric - closed)) < 1e-12


def test_bar_couplings_two_color():
    alpha, phi, omega = 0.4, 1.1, 3.0
    ion = IonParams()
    h = bar_basis_hamiltonian(ion, BarBasis(alpha), [(G0, omega), (G1, np.exp(1j * phi) * omega)])
    s = 2 * np.sqrt(2)
    assert h[0, 1] == pytest.approx((omega + np.exp(1j * alpha) * np.exp(1j * phi) * omega) / s)
    assert h[0, 2] == pytest.approx((omega - np.exp(1j * alpha) * np.exp(1j * phi) * omega) / s)


def test_literal_addressing_phase_at_zero_alpha():
    # amplitude e^{i phi} on the second colour, phi = alpha + pi, alpha = 0
    h = bar_basis_hamiltonian(IonParams(), BarBasis(0.0), [(G0, 4.0), (G1, np.exp(1j * np.pi) * 4.0)])
    assert abs(h[0, 1]) < 1e-15
    assert abs(h[0, 2]) == pytest.approx(4 / np.sqrt(2))


@given(st.floats(-np.pi, np.pi))
def test_carrier_phase_addressing_any_alpha(alpha):
    # carrier phases (0, alpha + pi) enter as e^{-i phase}: only |1bar> couples
    a1 = 4.0 * np.exp(-1j * (alpha + np.pi))
    h = bar_basis_hamiltonian(IonParams(), BarBasis(alpha), [(G0, 4.0), (G1, a1)])
    assert abs(h[0, 1]) < 1e-14
    a1 = 4.0 * np.exp(-1j * alpha)
    h = bar_basis_hamiltonian(IonParams(), BarBasis(alpha), [(G0, 4.0), (G1, a1)])
    assert abs(h[0, 2]) < 1e-14


def test_zero_hyperfine_has_no_bar_block():
    h = bar_basis_hamiltonian(IonParams(0.1, 0.0), BarBasis(0.3), [(G0, 1.0)])
    assert np.all(h[1:, 1:] == 0)


def test_split_reconstructs_and_v_spectrum():
    ion = IonParams(0.1, 0.03)
    bar = BarBasis(0.7)
    drives = [(G0, 1.0 + 0.5j), (G1, -0.3j)]
    h0, v = split_h0_v(ion, bar, drives)
    assert np.array_equal(h0 + v, bar_basis_hamiltonian(ion, bar, drives))
    assert np.allclose(np.linalg.eigvalsh(v[1:, 1:]), [-0.03, 0.0], atol=1e-16)
    assert np.linalg.norm(v, 2) == pytest.approx(0.03, rel=1e-14)


@given(st.floats(-np.pi, np.pi))
def test_bar_basis_unitary_and_involutive(alpha):
    w = BarBasis(alpha).matrix()
    assert np.allclose(w.conj().T @ w, np.eye(3), atol=1e-14)
    # back-transforming the forward map gives the identity on the qubit subspace
    assert np.allclose((w.conj().T @ w)[:2, :2], np.eye(2), atol=1e-14)


def test_two_ion_without_blockade_is_tensor_sum():
    c, t = IonParams(0.1, 0.02), IonParams(-0.05, 0.01)
    h = two_ion_hamiltonian(c, t, BlockadeParams(0.0))
    expected = np.diag(np.add.outer(np.diag(single_ion_hamiltonian(c)), np.diag(single_ion_hamiltonian(t))).ravel())
    assert np.allclose(h, expected, atol=0)


def test_doubly_excited_energy():
    c, t = IonParams(0.1), IonParams(0.08)
    h = two_ion_hamiltonian(c, t, BlockadeParams(20.0))
    assert h[3 * E + E, 3 * E + E] == pytest.approx(0.1 + 0.08 + 20.0)


def test_unknown_ion_tag():
    with pytest.raises(ConfigurationError):
        two_ion_hamiltonian(IonParams(), IonParams(), BlockadeParams(), {"spectator": [(G0, 1.0)]})
    with pytest.raises(ConfigurationError):
        embed(np.eye(3), "bystander")


def test_basis_ordering():
    # control is the first tensor factor: |c t> sits at 3 c + t
    k = np.zeros((DIM, DIM))
    k[E, G1] = 1
    assert embed(k, "control")[3 * E + G0, 3 * G1 + G0] == 1
    assert embed(k, "target")[3 * G0 + E, 3 * G0 + G1] == 1


def test_blockade_suppresses_target_excitation():
    p = reference_pulse()
    ion = IonParams()

    def h(t, blockade):
        return two_ion_hamiltonian(ion, ion, blockade, {"target": [(G0, complex_rabi(p, t))]})

    psi = np.zeros(9, dtype=complex)
    psi[3 * E + G0] = 1
    blocked = propagate_state(lambda t: h(t, BlockadeParams()), psi, 0, p.t_end)
    free = propagate_state(lambda t: h(t, BlockadeParams(0.0)), psi, 0, p.t_end)
    pe = lambda v: sum(abs(v[3 * i + E]) ** 2 for i in range(3))  # noqa: E731
    assert pe(blocked) < 0.1
    assert pe(blocked) == pytest.approx(9.378e-8, rel=1e-2)
    assert pe(free) > 0.9999


@pytest.mark.parametrize("delta", [0.0, 0.6, -0.6])
def test_frame_equivalence(delta):
    p = reference_pulse()
    ion = IonParams(delta)
    t = np.linspace(0, p.t_end, 31)
    fixed = state_trajectory(lambda s: single_ion_hamiltonian(ion, [(G0, complex_rabi(p, s))]),
                             np.array([1, 0, 0], dtype=complex), t, tol=1e-11)

    def acc(s):
        return accelerated_hamiltonian(delta, float(rabi_envelope(p, s)), float(instantaneous_detuning(p, s)))

    moving = state_trajectory(acc, np.array([0, 1], dtype=complex), t, tol=1e-11)
    # |e> -> e^{i phi}|e> maps one frame onto the other
    ce = moving[:, 0] * np.exp(1j * chirp_phase(p, t))
    assert np.allclose(np.abs(fixed[:, E]) ** 2, np.abs(ce) ** 2, atol=1e-9)
    assert np.allclose(fixed[:, E] * np.conj(fixed[:, G0]), ce * np.conj(moving[:, 1]), atol=1e-8)


def test_bar_and_logical_propagation_agree(rng):
    for _ in range(3):
        p = SechPulseParams(rng.uniform(5, 30), rng.uniform(0, 4), rng.uniform(2, 9), 1.5)
        ion = IonParams(rng.uniform(-1, 1), rng.uniform(-0.3, 0.3))
        bar = BarBasis(rng.uniform(-np.pi, np.pi))
        ph = np.exp(1j * rng.uniform(-np.pi, np.pi))

        def drives(s):
            a = complex_rabi(p, s) / np.sqrt(2)
            return [(G0, a), (G1, ph * a)]

        u_log = propagate_unitary(lambda s: single_ion_hamiltonian(ion, drives(s)), 0, p.t_end, tol=1e-11)
        u_bar = propagate_unitary(lambda s: bar_basis_hamiltonian(ion, bar, drives(s)), 0, p.t_end, tol=1e-11)
        w = bar.matrix()[:, [2, 0, 1]]
        assert np.max(np.abs(w.conj().T @ u_log @ w - u_bar)) < 1e-9


def test_static_evolution_exact_in_bar_basis():
    ion = IonParams(0.2, 0.1)
    bar = BarBasis(0.4)
    u_log = expm(-1j * single_ion_hamiltonian(ion) * 2.0)
    u_bar = expm(-1j * bar_basis_hamiltonian(ion, bar) * 2.0)
    w = bar.matrix()[:, [2, 0, 1]]
    assert np.allclose(w.conj().T @ u_log @ w, u_bar, atol=1e-14)


def test_decay_channel_validation():
    assert DecayChannel.from_lifetime(100.0).gamma == pytest.approx(0.01)
    with pytest.raises(ValueError):
        DecayChannel(0.01, 0.3, 0.3)
    with pytest.raises(ValueError):
        DecayChannel(-1.0)
    with pytest.raises(ValueError):
        DecayChannel(0.01, 0.7, 0.7, dump=True)
    with pytest.raises(ValueError):
        DecayChannel.from_lifetime(0.0)
    assert DecayChannel(0.01, 0.3, 0.3, dump=True).dump_fraction == pytest.approx(0.4)


def test_blockade_non_negative():
    with pytest.raises(ValueError):
        BlockadeParams(-1.0)
