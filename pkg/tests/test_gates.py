import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpbbus.gates import (
    CouplingWindow,
    GateReport,
    PulseSegment,
    alpha_from_duration,
    compose_segments,
    controlled_displacement,
    dispersive_effective_evolution,
    dispersive_effective_hamiltonian,
    dispersive_gate_check,
    extract_qubit_gate,
    extract_theta,
    four_pulse_gate,
    four_pulse_report,
    geometric_phase_gate,
    geometric_phase_theta,
    sector_parameters,
    sqrt_iswap,
    theta_from_alphas,
    windowed_evolution_analytic,
    windowed_evolution_numeric,
    xx_phase_gate,
)
from cpbbus.operators import (
    displacement,
    embed,
    fock_columns,
    number_operator,
    pauli,
    phase_min_distance,
    thermal,
)

N = 20
alphas = st.complex_numbers(max_magnitude=0.8, allow_nan=False, allow_infinity=False)


def vac_dist(u, v):
    return phase_min_distance(u, v, fock_columns(u.dims, 1))


def test_controlled_displacement_zero_is_identity():
    assert np.allclose(controlled_displacement(0, 0, N).data, np.eye(4 * N))


def test_controlled_displacement_sector_blocks():
    a = 0.4 + 0.3j
    v = controlled_displacement(a, 1, 10).data
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    rot = np.kron(np.kron(np.eye(2), h), np.eye(10))
    blocks = (rot @ v @ rot).reshape(2, 2, 10, 2, 2, 10)
    for q0 in range(2):
        assert np.allclose(blocks[q0, 0, :, q0, 0, :], displacement(a, 10).data)
        assert np.allclose(blocks[q0, 1, :, q0, 1, :], displacement(-a, 10).data)


def test_controlled_displacement_inverse_pair():
    a = 0.6 - 0.2j
    prod = controlled_displacement(a, 0, N) @ controlled_displacement(-a, 0, N)
    assert np.max(np.abs(prod.data - np.eye(4 * N))) < 1e-8


def test_alpha_from_duration_closed_form():
    g, w, t = 0.1, 1.0, 2.0
    assert alpha_from_duration(g, w, t) == pytest.approx(g * (1 - np.exp(1j * w * t)) / w)
    assert alpha_from_duration(g, w, 2 * math.pi) == pytest.approx(0, abs=1e-15)


def test_pulse_segment_consistency():
    seg = PulseSegment.from_duration(0, -0.1, 1.0, 1.3, -1)
    assert seg.signed_alpha == -seg.alpha
    with pytest.raises(ValueError):
        PulseSegment(0, 0.5, 1, 1.3, -0.1, 1.0)
    with pytest.raises(ValueError):
        PulseSegment(0, 0.5, sign=2)


def test_four_pulse_equal_phases_is_identity():
    u = four_pulse_gate(0.5 * np.exp(0.3j), 0.7 * np.exp(0.3j), N)
    assert vac_dist(u, np.eye(4 * N)) < 1e-10
    assert theta_from_alphas(0.5 * np.exp(0.3j), 0.7 * np.exp(0.3j)) == pytest.approx(0, abs=1e-15)


def test_theta_closed_form_examples():
    assert theta_from_alphas(1, 1j) == pytest.approx(2.0)
    a1, a2 = 0.3 + 0.1j, -0.2 + 0.5j
    assert theta_from_alphas(a1, a2) == pytest.approx(-theta_from_alphas(a2, a1))


@given(alphas, alphas)
@settings(max_examples=20, deadline=None)
def test_four_pulse_matches_xx_gate(a1, a2):
    u = four_pulse_gate(a1, a2, 25)
    theta = theta_from_alphas(a1, a2)
    assert vac_dist(u, np.kron(xx_phase_gate(theta), np.eye(25))) < 1e-7
    assert abs(extract_theta(u, reference=theta) - theta) < 1e-9


def test_four_pulse_commutes_with_sx_and_number():
    u = four_pulse_gate(0.5, 0.4j, N)
    dims = u.dims
    cols = fock_columns(dims, 3)
    for op in (embed(pauli("x"), 0, dims), embed(pauli("x"), 1, dims),
               embed(number_operator(N), 2, dims)):
        c = (u @ op - op @ u).data[:, cols]
        assert np.max(np.abs(c)) < 1e-8


def test_theta_linear_in_each_magnitude():
    thetas = [extract_theta(four_pulse_gate(r * 0.5, 0.4j, N)) for r in (0.5, 1.0, 1.5)]
    fit = np.polyfit([0.5, 1.0, 1.5], thetas, 1, full=True)
    assert fit[1].size == 0 or fit[1][0] < 1e-16
    assert fit[0][1] == pytest.approx(0, abs=1e-8)


def test_factorised_gate_has_no_residual_entanglement():
    u = np.kron(xx_phase_gate(0.3), np.eye(6))
    from cpbbus.operators import QOperator
    ext = extract_qubit_gate(QOperator(u, (2, 2, 6)))
    assert ext.residual_entanglement == pytest.approx(0, abs=1e-14)
    from cpbbus.operators import process_fidelity
    assert process_fidelity(ext.channel, xx_phase_gate(0.3)) == pytest.approx(1.0)


def test_mid_sequence_snapshot_is_entangled():
    half = compose_segments([PulseSegment(0, 0.5, -1), PulseSegment(1, 0.4j, -1)], N)
    assert extract_qubit_gate(half).residual_entanglement > 1e-3


def test_extract_qubit_gate_dimension_check():
    from cpbbus.operators import QOperator
    with pytest.raises(ValueError):
        extract_qubit_gate(QOperator(np.eye(12), (3, 4)))


def test_four_pulse_report_with_thermal_resonator():
    u, rep = four_pulse_report(0.5, 0.4j, 25, resonator_initial=thermal(25, 0.1))
    assert rep.process_fidelity > 1 - 1e-6
    assert rep.extras["residual_entanglement"] < 1e-8
    assert rep.theta == pytest.approx(theta_from_alphas(0.5, 0.4j))


def test_gate_report_range_validation():
    with pytest.raises(ValueError):
        GateReport(0.1, 1.1, 1.0, 1.0, 0.0, 0.0)
    rep = GateReport(0.1, 1.0 + 1e-12, 1.0, 1.0, 0.0, 0.0)
    assert rep.as_dict()["theta"] == 0.1


def test_windowed_analytic_matches_propagation():
    w = 1.0
    windows = [CouplingWindow(0.0, 1.7, {0: -0.1}), CouplingWindow(1.0, 3.0, {1: 0.15}),
               CouplingWindow(3.5, 4.0, {0: 0.2, 1: -0.05})]
    ua = windowed_evolution_analytic(windows, w, 2, 20)
    un, steps, err = windowed_evolution_numeric(windows, w, 2, 20, tolerance=1e-9)
    assert vac_dist(ua, un) < 1e-8
    assert steps > 0 and err < 1e-8


def test_sector_parameters_single_window_matches_alpha():
    c, t = -0.2, 1.9
    _, betas, _ = sector_parameters([CouplingWindow(0.0, t, {0: c})], 1.0, 1)
    a = alpha_from_duration(c, 1.0, t)
    assert betas[0] == pytest.approx(a)
    assert betas[1] == pytest.approx(-a)


def test_geometric_phase_formula_and_purity():
    w = 1.0
    u, rep = geometric_phase_gate(0.05, 0.05, w, 2, n_cut=20, method="analytic")
    assert rep.theta == pytest.approx(geometric_phase_theta(0.05, 0.05, w, 2))
    assert rep.resonator_purity > 1 - 1e-10
    num = number_operator(20)
    dims = u.dims
    n = embed(num, 2, dims)
    c = (u @ n - n @ u).data[:, fock_columns(dims, 1)]
    assert np.max(np.abs(c)) < 1e-6


def test_geometric_phase_zero_coupling_is_identity():
    _, rep = geometric_phase_gate(0.0, 0.05, 1.0, 1, n_cut=10, method="analytic")
    assert rep.theta == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        geometric_phase_gate(0.05, 0.05, 1.0, 0, n_cut=10)


def test_dispersive_effective_model():
    h = dispersive_effective_hamiltonian(0.1, 0.1, 0.5)
    # conserves total excitation number
    nz = np.kron(pauli("z").data, np.eye(2)) + np.kron(np.eye(2), pauli("z").data)
    assert np.allclose(h.data @ nz, nz @ h.data)
    u = dispersive_effective_evolution(0.1, 0.5)
    assert np.max(np.abs(u.data - sqrt_iswap())) < 1e-10
    with pytest.raises(ValueError):
        dispersive_effective_hamiltonian(0.1, 0.1, 0.0)


def test_dispersive_fidelity_improves_with_detuning():
    f = [dispersive_gate_check(0.01, r, 1.0, n_cut=12)[1].process_fidelity for r in (5, 20)]
    assert f[1] > f[0]
