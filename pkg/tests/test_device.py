import math

import numpy as np
import pytest

from cpbbus.device import (
    FLUX_QUANTUM,
    HBAR,
    ControlSettings,
    DeviceParams,
    QubitControl,
    QubitParams,
    build_hamiltonian_full,
    build_hamiltonian_linear,
    build_interaction_hamiltonian,
    charging_energy,
    check_working_point,
    coupling_magnitudes,
    default_flux_sign,
    free_hamiltonian,
    interaction_sampler,
    linear_hamiltonian,
    qubit_frequencies,
    qubit_frequency,
    signed_couplings,
    tunable_coupling,
)
from cpbbus.device import E_CHARGE

OMEGA = 2 * math.pi * 100e6
QP = QubitParams(2 * math.pi * 5e9, 1e-15, 1e-16)


def device(n=2, **kw):
    return DeviceParams((QP,) * n, OMEGA, 30e-6, 0.1, x_zpf=5e-13, **kw)


def controls(n=2, **kw):
    return ControlSettings(tuple(QubitControl(**kw) for _ in range(n)))


def test_charging_energy_hand_arithmetic():
    expected = E_CHARGE ** 2 / (2 * 2.1e-15) / HBAR
    assert charging_energy(1e-15, 1e-16) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(ValueError):
        charging_energy(0, 1e-16)


def test_qubit_frequency_vanishes_at_degeneracy():
    assert qubit_frequency(1e10, 0.5) == 0.0
    assert qubit_frequency(1e10, 0.75) == pytest.approx(2e10)


def test_coupling_matches_hand_formula():
    g = tunable_coupling(QP.E_J0, 0.0, 0.1, 30e-6, 5e-13)
    expected = 2 * QP.E_J0 * math.pi * 0.1 * 30e-6 * 5e-13 / FLUX_QUANTUM
    assert g == pytest.approx(expected, rel=1e-14)
    assert g / (2 * math.pi) / 1e6 == pytest.approx(22.79, abs=0.01)


def test_coupling_switches_off_at_half_flux():
    assert tunable_coupling(QP.E_J0, 0.5, 0.1, 30e-6, 5e-13) == 0.0
    vals = [tunable_coupling(QP.E_J0, p, 0.1, 30e-6, 5e-13) for p in np.linspace(0, 0.5, 11)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_device_params_mass_xzpf_consistency():
    p = device()
    assert p.mass == pytest.approx(HBAR / (2 * OMEGA * 5e-13 ** 2))
    q = DeviceParams((QP,), OMEGA, 30e-6, 0.1, mass=p.mass)
    assert q.x_zpf == pytest.approx(5e-13)
    with pytest.raises(ValueError):
        DeviceParams((QP,), OMEGA, 30e-6, 0.1)
    with pytest.raises(ValueError):
        DeviceParams((QP,), OMEGA, 30e-6, 0.1, mass=p.mass, x_zpf=6e-13)
    with pytest.raises(ValueError):
        DeviceParams((QP,), -1.0, 30e-6, 0.1, x_zpf=5e-13)


def test_default_signs_alternate_and_override():
    assert device(4).flux_signs == (-1, 1, -1, 1)
    assert default_flux_sign(0) == -1
    assert device(2, flux_signs=(1, 1)).flux_signs == (1, 1)
    with pytest.raises(ValueError):
        device(2, flux_signs=(1, 2))


def test_signed_couplings_and_frequencies():
    p, c = device(), controls()
    g = coupling_magnitudes(p, c)
    assert np.allclose(signed_couplings(p, c), [-g[0], g[1]])
    assert np.all(qubit_frequencies(p, c) == 0)
    with pytest.raises(ValueError):
        coupling_magnitudes(p, controls(3))


def test_linear_hamiltonian_structure():
    h = linear_hamiltonian([0.0, 0.0], [0.2, -0.3], 1.0, 6)
    assert h.is_hermitian()
    assert h.dims == (2, 2, 6)
    # no coupling: spectrum is the free sum
    free = linear_hamiltonian([0.5, 0.7], [0.0, 0.0], 1.0, 4)
    w = np.sort(np.linalg.eigvalsh(free.data))
    expected = np.sort([n + s1 * 0.25 + s2 * 0.35 for n in range(4) for s1 in (1, -1)
                        for s2 in (1, -1)])
    assert np.allclose(w, expected)


def test_working_point_is_enforced():
    with pytest.raises(ValueError):
        check_working_point(controls(Phi_b=0.3))
    with pytest.raises(ValueError):
        build_hamiltonian_linear(device(), controls(Phi_b=0.3), 6)


def test_full_hamiltonian_reduces_to_linear_at_first_order():
    p, c = device(), controls()
    diffs = []
    for scale in (1.0, 10.0, 100.0):
        q = DeviceParams(p.qubits, p.omega, p.L, p.B, x_zpf=p.x_zpf * scale)
        full = build_hamiltonian_full(q, c, 8)
        lin = build_hamiltonian_linear(q, c, 8)
        diffs.append(np.max(np.abs(full.data - lin.data)))
    slope = np.polyfit(np.log10([1, 10, 100]), np.log10(diffs), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.05)


def test_interaction_hamiltonian_frame():
    p = device()
    c = controls().replace_qubit(1, Phi_x=0.5)
    t = 1.3e-9
    h = build_interaction_hamiltonian(0, p, c, t, 6)
    assert h.is_hermitian()
    # equals e^{iH0 t} V e^{-iH0 t} with H0 = omega b^dag b
    lin = build_hamiltonian_linear(p, c, 6).data
    h0 = free_hamiltonian(OMEGA, [0.0, 0.0], 6).data
    r = np.exp(1j * np.diagonal(h0).real * t)
    expected = r[:, None] * (lin - h0) * r.conj()[None, :]
    assert np.allclose(h.data, expected, atol=1e-6 * np.max(np.abs(lin - h0)))


def test_interaction_hamiltonian_rejects_two_couplers():
    with pytest.raises(ValueError):
        build_interaction_hamiltonian(0, device(), controls(), 0.0, 6)
    with pytest.raises(ValueError):
        build_interaction_hamiltonian(0, device(), controls(N_g=0.6).replace_qubit(1, Phi_x=0.5),
                                      0.0, 6)


def test_interaction_sampler_rotation_covariance():
    s = interaction_sampler({0: 0.3, 1: -0.2}, 1.0, 2, 5, qubit_freqs=[0.4, 0.0])
    t = 0.8
    r = np.exp(1j * s.rotation * t)
    assert np.allclose(s(t), r[:, None] * s(0.0) * r.conj()[None, :])
