"""End-to-end acceptance checks, one test per criterion (1 to 8).

Each test records a pass/fail line that the conftest prints in the
terminal summary, then asserts.  Expensive propagations are shared
through module-scoped fixtures so the n_cut convergence check reuses the
step counts of the n_cut = 25 runs.
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from cpbbus import cli
from cpbbus.device import default_flux_sign, interaction_sampler
from cpbbus.gates import (
    CouplingWindow,
    alpha_from_duration,
    controlled_displacement,
    dispersive_effective_evolution,
    dispersive_gate_check,
    extract_qubit_gate,
    extract_theta,
    four_pulse_gate,
    geometric_phase_gate,
    sqrt_iswap,
    windowed_evolution_numeric,
    xx_phase_gate,
)
from cpbbus.operators import QOperator, fock_columns, phase_min_distance
from cpbbus.propagator import PropagationSpec, propagate, propagate_fixed
from cpbbus.scheduler import (
    ALTERNATE_PREFACTOR,
    CONFIRMED_PREFACTOR,
    MAX_TRIPLE_SINE,
    ScheduleRequest,
    feasibility_study,
    solve_schedule,
    triple_sine,
)
from cpbbus.device import ControlSettings, DeviceParams, QubitControl, QubitParams
from cpbbus.network import NetworkSpec, crosstalk_metric, pair_gate_comparison, select_pair

OMEGA = 2 * math.pi * 100e6
CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def vacuum_distance(u, target):
    return phase_min_distance(u, target, fock_columns(u.dims, 1))


# -- criterion 1: propagated single-qubit pulse vs controlled displacement --

C1_RATIOS = (0.05, 0.1, 0.3)
C1_PHASES = (math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi)


def single_pulse(ratio, wt, n_cut, steps=None):
    c = default_flux_sign(0) * ratio * OMEGA
    t = wt / OMEGA
    sampler = interaction_sampler({0: c}, OMEGA, 2, n_cut)
    if steps is None:
        u, diag = propagate(PropagationSpec(sampler, 0.0, t, tolerance=1e-9, max_steps=1 << 20))
        steps = diag.steps
    else:
        u = QOperator(propagate_fixed(sampler, 0.0, t, steps), sampler.dims)
    target = controlled_displacement(alpha_from_duration(c, OMEGA, t), 0, n_cut)
    return vacuum_distance(u, target), steps


@pytest.fixture(scope="module")
def c1_results():
    out = {}
    for ratio in C1_RATIOS:
        for wt in C1_PHASES:
            t0 = time.perf_counter()
            d, steps = single_pulse(ratio, wt, 25)
            out[(ratio, wt)] = {"distance": d, "steps": steps, "seconds": time.perf_counter() - t0}
    return out


def test_criterion_1_controlled_displacement(c1_results, record):
    worst = max(r["distance"] for r in c1_results.values())
    slowest = max(r["seconds"] for r in c1_results.values())
    ok = worst < 1e-6
    record(1, ok, f"max vacuum-column distance {worst:.2e} over 12 points (< 1e-6); "
                  f"slowest point {slowest:.1f} s")
    assert ok


# -- criterion 2: random four-pulse compositions ---------------------------

C2_SEED = 20240611


def random_alpha_pairs(seed, count=50, max_abs=0.8):
    rng = np.random.default_rng(seed)
    r = max_abs * np.sqrt(rng.random((count, 2)))
    phi = 2 * math.pi * rng.random((count, 2))
    a = r * np.exp(1j * phi)
    return [(complex(x), complex(y)) for x, y in a]


def four_pulse_scores(n_cut):
    dist, resid, theta_err = [], [], []
    for a1, a2 in random_alpha_pairs(C2_SEED):
        theta = 2 * abs(a1) * abs(a2) * math.sin(np.angle(a2) - np.angle(a1))
        u = four_pulse_gate(a1, a2, n_cut)
        target = np.kron(xx_phase_gate(theta), np.eye(n_cut))
        dist.append(vacuum_distance(u, target))
        resid.append(extract_qubit_gate(u).residual_entanglement)
        theta_err.append(abs(extract_theta(u, reference=theta) - theta))
    return np.array(dist), np.array(resid), np.array(theta_err)


def measured_prefactor():
    """Fit the prefactor of theta = P g1 g2 f(x, y) / omega^2 from durations."""
    g1, g2 = 0.05 * OMEGA, 0.08 * OMEGA
    c1, c2 = default_flux_sign(0) * g1, default_flux_sign(1) * g2
    ratios = []
    for x, y in ((4 * math.pi / 3, 2 * math.pi / 3), (1.0, 2.5), (5.0, 0.7)):
        a1 = alpha_from_duration(c1, OMEGA, x / OMEGA)
        a2 = alpha_from_duration(c2, OMEGA, y / OMEGA)
        u = four_pulse_gate(a1, a2, 25)
        kernel = g1 * g2 * float(triple_sine(x, y)) / OMEGA ** 2
        theta = extract_theta(u, reference=2 * abs(a1) * abs(a2)
                              * math.sin(np.angle(a2) - np.angle(a1)))
        ratios.append(abs(theta / kernel))
    return ratios


@pytest.fixture(scope="module")
def c2_results():
    return four_pulse_scores(25)


def test_criterion_2_four_pulse(c2_results, record):
    dist, resid, theta_err = c2_results
    ratios = measured_prefactor()
    chosen = min((CONFIRMED_PREFACTOR, ALTERNATE_PREFACTOR),
                 key=lambda p: max(abs(r - p) for r in ratios))
    ok = dist.max() < 1e-7 and resid.max() < 1e-8 and chosen == CONFIRMED_PREFACTOR
    record(2, ok, f"max distance {dist.max():.2e} (< 1e-7), max residual entanglement "
                  f"{resid.max():.2e} (< 1e-8), max theta error {theta_err.max():.1e}; "
                  f"prefactor adjudication: measured {np.mean(ratios):.9f} -> "
                  f"{chosen:g} confirmed, {ALTERNATE_PREFACTOR:g} rejected")
    assert dist.max() < 1e-7
    assert resid.max() < 1e-8
    assert all(abs(r - CONFIRMED_PREFACTOR) < 1e-9 for r in ratios)


# -- criterion 3: geometric-phase gate ---------------------------------------

def geometric_fixed(n_cut, steps):
    g = 0.05 * OMEGA
    c = {0: default_flux_sign(0) * g, 1: default_flux_sign(1) * g}
    u, _, _ = windowed_evolution_numeric([CouplingWindow(0.0, 2 * math.pi / OMEGA, c)], OMEGA, 2,
                                         n_cut, fixed_steps=steps)
    return u


@pytest.fixture(scope="module")
def c3_results():
    g = 0.05 * OMEGA
    t0 = time.perf_counter()
    u, rep = geometric_phase_gate(g, g, OMEGA, 1, n_cut=25, tolerance=1e-8, method="propagate")
    return u, rep, time.perf_counter() - t0


def test_criterion_3_geometric_phase(c3_results, record):
    u, rep, seconds = c3_results
    expected = 4 * math.pi * 0.05 * 0.05
    rel = abs(abs(rep.theta) - expected) / expected
    ok = rep.resonator_purity >= 1 - 1e-6 and rel < 1e-4 and seconds < 60
    record(3, ok, f"purity {rep.resonator_purity:.15f} (>= 1 - 1e-6), |theta| {abs(rep.theta):.12f} "
                  f"vs pi/100 rel err {rel:.1e} (< 1e-4), {rep.extras['steps']} steps, "
                  f"{seconds:.1f} s")
    assert rep.resonator_purity >= 1 - 1e-6
    assert rel < 1e-4
    assert seconds < 60


# -- criterion 4: dispersive sqrt(iSWAP) --------------------------------------

C4_G = 0.01 * OMEGA
C4_RATIOS = (5, 10, 20)


@pytest.fixture(scope="module")
def c4_results():
    return {r: dispersive_gate_check(C4_G, r, OMEGA, n_cut=20) for r in C4_RATIOS}


def test_criterion_4_dispersive(c4_results, record):
    eff = max(float(np.max(np.abs(dispersive_effective_evolution(C4_G, r * C4_G).data
                                  - sqrt_iswap()))) for r in C4_RATIOS)
    fids = [c4_results[r][1].process_fidelity for r in C4_RATIOS]
    monotone = all(a < b for a, b in zip(fids, fids[1:]))
    ok = eff < 1e-10 and monotone
    record(4, ok, f"effective-model distance {eff:.1e} (< 1e-10); fidelity over delta/g 5/10/20 = "
                  + " / ".join(f"{f:.6f}" for f in fids)
                  + f" (monotone: {monotone}); recorded delta/g = 5 fidelity {fids[0]:.6f}")
    assert eff < 1e-10
    assert monotone


# -- criterion 5: feasibility estimates ---------------------------------------

def test_criterion_5_feasibility(record):
    t0 = time.perf_counter()
    study = feasibility_study(B=0.1, L=30e-6, x_zpf=5e-13, E_J0=5e9, omega=OMEGA)
    seconds = time.perf_counter() - t0
    g_cyclic = study["readings"]["cyclic"]["computed"]["coupling_rad_per_s"] / (2 * math.pi)
    ratio = max(g_cyclic, 30e6) / min(g_cyclic, 30e6)
    readings = study["readings_within_factor_3"]
    times = {name: study["readings"][name]["computed"]["four_pulse"]["confirmed"]["total_time"]
             for name in study["readings"]}
    flagged = not study["claimed_product_feasible"] and abs(MAX_TRIPLE_SINE - 0.6495) < 1e-4
    ok = ratio < 1.5 and bool(readings) and flagged and seconds < 60
    record(5, ok, f"g' = {g_cyclic / 1e6:.2f} MHz (factor {ratio:.2f} from 30 MHz, < 1.5); "
                  f"fastest gate " + ", ".join(f"{k} {v:.3e} s" for k, v in sorted(times.items()))
                  + f"; within 3x of 1e-7 s under {readings}; 0.69 > {MAX_TRIPLE_SINE:.4f} "
                    f"flagged infeasible: {flagged}")
    assert ratio < 1.5
    assert readings
    assert flagged
    assert seconds < 60


# -- criterion 6: truncation convergence 20 -> 25 -----------------------------

def test_criterion_6_truncation(c1_results, c2_results, c3_results, c4_results, record):
    changes = {}
    # 1: same step counts, smaller Fock space
    changes[1] = max(abs(single_pulse(r, wt, 20, res["steps"])[0] - res["distance"])
                     for (r, wt), res in c1_results.items())
    # 2
    dist20, resid20, _ = four_pulse_scores(20)
    dist25, resid25, _ = c2_results
    changes[2] = float(max(np.max(np.abs(dist20 - dist25)), np.max(np.abs(resid20 - resid25))))
    # 3
    u25, rep25, _ = c3_results
    u20 = geometric_fixed(20, rep25.extras["steps"])
    target = xx_phase_gate(rep25.extras["theta_formula"])
    d25 = vacuum_distance(u25, np.kron(target, np.eye(25)))
    d20 = vacuum_distance(u20, np.kron(target, np.eye(20)))
    changes[3] = abs(d20 - d25)
    # 4
    c4 = []
    for r in C4_RATIOS:
        u20, rep20 = c4_results[r]
        u25, rep25 = dispersive_gate_check(C4_G, r, OMEGA, n_cut=25)
        d20 = vacuum_distance(u20, np.kron(sqrt_iswap(), np.eye(20)))
        d25 = vacuum_distance(u25, np.kron(sqrt_iswap(), np.eye(25)))
        c4.append(max(abs(d20 - d25), abs(rep20.process_fidelity - rep25.process_fidelity)))
    changes[4] = max(c4)
    ok = all(v < 1e-8 for v in changes.values())
    record(6, ok, "change 20 -> 25 by criterion: "
                  + ", ".join(f"{k}: {v:.1e}" for k, v in changes.items()) + " (each < 1e-8)")
    for k, v in changes.items():
        assert v < 1e-8, f"criterion {k} result moved by {v:.2e} between n_cut 20 and 25"


# -- criterion 7: network selectivity -----------------------------------------

def test_criterion_7_network(record):
    qp = QubitParams(2 * math.pi * 5e9, 1e-15, 1e-16)
    params = DeviceParams((qp, qp, qp), OMEGA, 30e-6, 0.1, x_zpf=5e-13)
    spec = NetworkSpec(params, ControlSettings((QubitControl(),) * 3), n_cut=12)
    spec = NetworkSpec(params, select_pair(spec, 0, 2), n_cut=12)
    c = np.array(params.flux_signs) * np.array(
        [abs(x) for x in __import__("cpbbus.device", fromlist=["x"]).coupling_magnitudes(
            spec.params, spec.controls)])
    schedule = solve_schedule(ScheduleRequest(0.2, abs(c[0]), abs(c[2]), OMEGA,
                                              signs=(params.flux_signs[0], params.flux_signs[2])))
    comp = pair_gate_comparison(spec, 0, 2, schedule, method="propagate", tolerance=1e-10)
    xt_an = crosstalk_metric(spec, 0, 2, schedule, method="analytic")
    xt_num = crosstalk_metric(spec, 0, 2, schedule, method="propagate", tolerance=1e-10)
    spectator = abs(c[1])
    ok = comp["distance"] < 1e-8 and comp["theta_difference"] < 1e-8 and max(xt_an, xt_num) < 1e-10
    record(7, ok, f"spectator |g'| = {spectator:.1e}; pair vs isolated distance "
                  f"{comp['distance']:.1e}, theta difference {comp['theta_difference']:.1e} "
                  f"(< 1e-8); crosstalk analytic {xt_an:.1e}, propagated {xt_num:.1e} (< 1e-10)")
    assert spectator == 0.0
    assert comp["distance"] < 1e-8
    assert comp["theta_difference"] < 1e-8
    assert xt_an < 1e-10 and xt_num < 1e-10


# -- criterion 8: determinism of the CLI reports --------------------------------

def suite_configs(tmp_path):
    """Every shipped example config; the propagated geometric run is shortened."""
    out = []
    for path in sorted(CONFIGS.glob("*.yaml")):
        raw = yaml.safe_load(path.read_text())
        if raw.get("scenario") == "geometric-phase":
            raw["numeric"] = dict(raw.get("numeric", {}), n_cut=12, tolerance=1e-6)
        target = tmp_path / path.name
        target.write_text(yaml.safe_dump(raw, sort_keys=False))
        out.append(target)
    return out


def test_criterion_8_determinism(tmp_path, record):
    configs = suite_configs(tmp_path)
    runs = []
    for attempt in range(2):
        sections = {}
        for cfg in configs:
            out = tmp_path / f"run{attempt}" / cfg.stem
            assert cli.main(["--config", str(cfg), "--out", str(out)]) == 0
            report = json.loads((out / "report.json").read_text(encoding="utf-8"))
            sections[cfg.stem] = (json.dumps(report["determinism"], sort_keys=True).encode(),
                                  report["determinism_hash"])
        runs.append(sections)
    same = [k for k in runs[0] if runs[0][k] == runs[1][k]]
    ok = len(same) == len(configs)
    record(8, ok, f"{len(same)}/{len(configs)} scenario reports byte-identical across two runs")
    assert ok
