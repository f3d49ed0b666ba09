"""Command-line runner: YAML config in, report.json (and sweep.csv) out.

Exit codes: 0 success, 2 invalid configuration, 3 numerical
non-convergence, 4 infeasible schedule.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config, set_path
from .device import (
    check_working_point,
    coupling_magnitudes,
    qubit_frequencies,
    signed_couplings,
)
from .gates import (
    dispersive_effective_evolution,
    dispersive_gate_check,
    four_pulse_report,
    geometric_phase_gate,
    sqrt_iswap,
    theta_from_alphas,
    xx_phase_gate,
)
from .network import NetworkSpec, crosstalk_metric, pair_gate_comparison, select_pair
from .operators import fock_columns, phase_min_distance, thermal, vacuum
from .propagator import ConvergenceError
from .scheduler import (
    ALTERNATE_PREFACTOR,
    CONFIRMED_PREFACTOR,
    MAX_TRIPLE_SINE,
    InfeasibleScheduleError,
    PulseSchedule,
    ScheduleRequest,
    _timing_entry,
    budget_check,
    feasibility_study,
    simulate_schedule,
    solve_schedule,
    triple_sine,
)
from .gates import PulseSegment

logger = logging.getLogger("cpbbus")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INFEASIBLE = 0, 2, 3, 4
CSV_COLUMNS = ("index", "parameter", "value", "theta", "process_fidelity", "resonator_purity",
               "total_time", "g1", "g2", "status", "config_hash")


# -- JSON plumbing ------------------------------------------------------------

def plain(obj):
    """Convert numpy and complex values into JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [plain(obj.real), plain(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def canonical_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


# -- scenarios ------------------------------------------------------------------

def _resonator_state(cfg: RunConfig):
    n_cut = cfg.numeric.n_cut
    if cfg.resonator.state == "thermal":
        return thermal(n_cut, cfg.resonator.nbar)
    return vacuum(n_cut)


def _pair_couplings(cfg: RunConfig, i: int = 0, j: int = 1):
    c = signed_couplings(cfg.device, cfg.controls)
    return float(c[i]), float(c[j])


def _four_pulse(cfg: RunConfig) -> tuple[dict, dict]:
    fp, n_cut, w = cfg.four_pulse, cfg.numeric.n_cut, cfg.device.omega
    result, diag = {}, {}
    if fp.random_pairs:
        rng = np.random.default_rng(cfg.seed)
        worst = {"distance": 0.0, "residual_entanglement": 0.0, "theta_error": 0.0}
        for _ in range(fp.random_pairs):
            a1, a2 = (fp.max_alpha * math.sqrt(rng.random()) * np.exp(2j * math.pi * rng.random())
                      for _ in range(2))
            u, rep = four_pulse_report(a1, a2, n_cut)
            th = theta_from_alphas(a1, a2)
            target = np.kron(xx_phase_gate(th), np.eye(n_cut))
            worst["distance"] = max(worst["distance"],
                                    phase_min_distance(u, target, fock_columns(u.dims, 1)))
            worst["residual_entanglement"] = max(worst["residual_entanglement"],
                                                 rep.extras["residual_entanglement"])
            worst["theta_error"] = max(worst["theta_error"], abs(rep.theta - th))
        result["random_pairs"] = {"count": fp.random_pairs, "max_alpha": fp.max_alpha, **worst}
    if fp.t1 is not None:
        c1, c2 = _pair_couplings(cfg)
        segs = (PulseSegment.from_duration(0, c1, w, fp.t1, -1),
                PulseSegment.from_duration(1, c2, w, fp.t2, -1),
                PulseSegment.from_duration(0, c1, w, fp.t1, 1),
                PulseSegment.from_duration(1, c2, w, fp.t2, 1))
        a1, a2 = segs[0].alpha, segs[1].alpha
        total = fp.repetitions * 2 * (fp.t1 + fp.t2)
        u, rep = four_pulse_report(a1, a2, n_cut, _resonator_state(cfg), total, fp.repetitions)
        kernel = abs(c1 * c2) * float(triple_sine(w * fp.t1, w * fp.t2)) / w ** 2
        per_block = rep.theta / fp.repetitions
        prefactor = per_block / kernel if kernel else None
        result["prefactor_check"] = {
            "measured_prefactor": prefactor,
            "candidates": [CONFIRMED_PREFACTOR, ALTERNATE_PREFACTOR],
            "confirmed": None if prefactor is None else min(
                (CONFIRMED_PREFACTOR, ALTERNATE_PREFACTOR), key=lambda p: abs(abs(prefactor) - p)),
        }
        if cfg.numeric.method == "propagate":
            schedule = PulseSchedule(segs, fp.repetitions, total, rep.extras["theta_formula"], w)
            u_num, rep_num = simulate_schedule(schedule, n_cut, "propagate", cfg.numeric.tolerance)
            diag["propagated"] = {
                "distance_to_composition": phase_min_distance(u_num, u, fock_columns(u.dims, 1)),
                "theta": rep_num.theta, **{k: rep_num.extras[k] for k in ("steps", "error_estimate")},
            }
    elif fp.alpha1 is not None:
        a1, a2 = fp.alpha1, fp.alpha2
        u, rep = four_pulse_report(a1, a2, n_cut, _resonator_state(cfg), 0.0, fp.repetitions)
    elif not fp.random_pairs:
        raise ConfigError("four_pulse", "give t1/t2, alpha1/alpha2 or random_pairs")
    else:
        return result, diag
    result["alpha1"], result["alpha2"] = a1, a2
    result["report"] = rep.as_dict()
    return result, diag


def _require_degeneracy(cfg: RunConfig):
    check_working_point(cfg.controls)
    freqs = qubit_frequencies(cfg.device, cfg.controls)
    if np.any(np.abs(freqs) > 0):
        raise ConfigError("controls", "all qubits must sit at N_g = 0.5 for this scenario")


def _geometric(cfg: RunConfig) -> tuple[dict, dict]:
    _require_degeneracy(cfg)
    g = coupling_magnitudes(cfg.device, cfg.controls)
    signs = cfg.device.flux_signs[:2]
    u, rep = geometric_phase_gate(abs(g[0]), abs(g[1]), cfg.device.omega, cfg.geometric_phase.n,
                                  cfg.numeric.n_cut, cfg.numeric.tolerance, signs,
                                  cfg.numeric.method, _resonator_state(cfg))
    formula = rep.extras["theta_formula"]
    return ({"report": rep.as_dict(), "theta_formula": formula,
             "theta_relative_error": abs(abs(rep.theta) / abs(formula) - 1) if formula else None},
            {})


def _dispersive(cfg: RunConfig) -> tuple[dict, dict]:
    g = cfg.dispersive.g if cfg.dispersive.g is not None else abs(
        coupling_magnitudes(cfg.device, cfg.controls)[0])
    if g <= 0:
        raise ConfigError("dispersive.g", "coupling must be positive")
    signs = cfg.device.flux_signs[:2]
    _, rep = dispersive_gate_check(g, cfg.dispersive.delta_over_g, cfg.device.omega,
                                   cfg.numeric.n_cut, signs)
    u_eff = dispersive_effective_evolution(g, cfg.dispersive.delta_over_g * g, signs)
    return ({"report": rep.as_dict(), "g": g, "delta_over_g": cfg.dispersive.delta_over_g,
             "effective_model_distance": float(np.max(np.abs(u_eff.data - sqrt_iswap())))}, {})


def _schedule(cfg: RunConfig) -> tuple[dict, dict]:
    sc, w = cfg.schedule, cfg.device.omega
    g = coupling_magnitudes(cfg.device, cfg.controls)
    g1, g2 = abs(float(g[0])), abs(float(g[1]))
    feas = sc.feasibility
    claimed = feas.claimed_product if feas else 0.69
    reference = feas.reference_time if feas else 1e-7
    required = sc.theta_target / (CONFIRMED_PREFACTOR * g1 * g2 / w ** 2)
    result = {
        "interpretations": {
            "confirmed": _timing_entry(math.sqrt(g1 * g2), w, sc.theta_target, CONFIRMED_PREFACTOR,
                                       reference),
            "alternate": _timing_entry(math.sqrt(g1 * g2), w, sc.theta_target, ALTERNATE_PREFACTOR,
                                       reference),
        },
        "single_shot": {
            "max_product": MAX_TRIPLE_SINE,
            "required_product": required,
            "feasible": required <= MAX_TRIPLE_SINE,
            "claimed_product": claimed,
            "claimed_product_feasible": claimed <= MAX_TRIPLE_SINE,
        },
    }
    request = ScheduleRequest(sc.theta_target, g1, g2, w, sc.allow_repetitions, sc.max_repetitions,
                              signs=tuple(cfg.device.flux_signs[:2]), dead_time=sc.dead_time)
    schedule = solve_schedule(request)
    result["schedule"] = schedule.as_dict()
    if sc.T1 is not None:
        result["budget"] = budget_check(schedule, sc.T1, sc.T2)
    diag = {}
    if sc.simulate:
        _, rep = simulate_schedule(schedule, cfg.numeric.n_cut, cfg.numeric.method,
                                   cfg.numeric.tolerance, sc.dead_time, _resonator_state(cfg))
        result["report"] = rep.as_dict()
    if feas is not None:
        p = cfg.device
        result["feasibility"] = feasibility_study(p.B, p.L, p.x_zpf, feas.E_J0, w, sc.theta_target,
                                                  feas.claimed_product, feas.quoted_coupling,
                                                  feas.reference_time, feas.detuning_ratio)
    return result, diag


def _network(cfg: RunConfig) -> tuple[dict, dict]:
    i, j = cfg.network.pair
    spec = NetworkSpec(cfg.device, cfg.controls, cfg.numeric.n_cut)
    spec = NetworkSpec(cfg.device, select_pair(spec, i, j), cfg.numeric.n_cut)
    c = signed_couplings(spec.params, spec.controls)
    gi, gj = abs(float(c[i])), abs(float(c[j]))
    signs = (spec.params.flux_signs[i], spec.params.flux_signs[j])
    schedule = solve_schedule(ScheduleRequest(cfg.network.theta_target, gi, gj, spec.params.omega,
                                              signs=signs))
    spectators = None
    frac = cfg.network.spectator_coupling_fraction
    if frac is not None:
        spectators = {k: frac * gi * spec.params.flux_signs[k]
                      for k in range(spec.n_qubits) if k not in (i, j)}
    method = cfg.numeric.method
    comparison = pair_gate_comparison(spec, i, j, schedule, method, cfg.numeric.tolerance,
                                      spectators)
    result = {
        "pair": [i, j],
        "schedule": schedule.as_dict(),
        "comparison": comparison,
        "crosstalk": crosstalk_metric(spec, i, j, schedule, "analytic", cfg.numeric.tolerance,
                                      spectators),
    }
    if method == "propagate":
        result["crosstalk_propagated"] = crosstalk_metric(spec, i, j, schedule, "propagate",
                                                          cfg.numeric.tolerance, spectators)
    return result, {}


SCENARIO_RUNNERS = {
    "four-pulse": _four_pulse,
    "geometric-phase": _geometric,
    "dispersive": _dispersive,
    "schedule": _schedule,
    "network": _network,
}


def run_scenario(cfg: RunConfig) -> tuple[dict, dict]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result, diag = SCENARIO_RUNNERS[cfg.scenario](cfg)
    msgs = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    diag = dict(diag, warnings=msgs)
    return result, diag


# -- sweep --------------------------------------------------------------------

def _row_metrics(result: dict) -> dict:
    rep = result.get("report") or {}
    out = {k: rep.get(k) for k in ("theta", "process_fidelity", "resonator_purity", "total_time")}
    if "comparison" in result:
        out["theta"] = result["comparison"]["theta_network"]
        out["total_time"] = result["schedule"]["total_time"]
    return out


def sweep_rows(cfg: RunConfig) -> tuple[list[dict], str]:
    sw = cfg.sweep
    config_hash = sha256(cfg.raw)
    rows = []
    for index, value in enumerate(sw.values):
        entry = value if sw.unit is None else {"value": value, "unit": sw.unit}
        raw = set_path(cfg.raw, sw.parameter, entry)
        raw["scenario"] = sw.scenario
        point = parse_config(raw)
        try:
            result, _ = run_scenario(point)
            status = "ok"
        except InfeasibleScheduleError:
            # one unreachable grid point should not sink the whole table
            result, status = {}, "infeasible"
        pair = point.network.pair if sw.scenario == "network" else (0, 1)
        g = np.abs(coupling_magnitudes(point.device, point.controls))
        if sw.scenario == "dispersive" and point.dispersive.g is not None:
            g = np.full(2, point.dispersive.g)
        rows.append({"index": index, "parameter": sw.parameter, "value": value,
                     **_row_metrics(result), "g1": float(g[pair[0]]), "g2": float(g[pair[1]]),
                     "status": status, "config_hash": config_hash})
    return rows, config_hash


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % float(v)
    return str(v)


def write_sweep_csv(rows: list[dict], path: Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(row.get(c)) for c in CSV_COLUMNS])


# -- driver -------------------------------------------------------------------

def build_report(cfg: RunConfig, result: dict, diagnostics: dict, elapsed: float) -> dict:
    determinism = {
        "tool": {"name": "cpbbus", "version": __version__},
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config": cfg.raw,
        "config_hash": sha256(cfg.raw),
        "result": result,
        "diagnostics": diagnostics,
    }
    determinism = plain(determinism)
    return {
        "determinism": determinism,
        "determinism_hash": sha256(determinism),
        "metadata": {"timestamp": datetime.now(timezone.utc).isoformat(),
                     "elapsed_seconds": round(elapsed, 3)},
    }


def run(cfg: RunConfig, out_dir: str | Path) -> dict:
    """Execute one configuration and write its outputs; returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg.scenario == "sweep":
        rows, _ = sweep_rows(cfg)
        write_sweep_csv(rows, out / cfg.output.sweep_csv)
        result = {"sweep": {"scenario": cfg.sweep.scenario, "parameter": cfg.sweep.parameter,
                            "unit": cfg.sweep.unit, "rows": rows}}
        diagnostics = {}
    else:
        result, diagnostics = run_scenario(cfg)
    report = build_report(cfg, result, diagnostics, time.perf_counter() - t0)
    text = json.dumps(report, sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False)
    (out / cfg.output.report).write_text(text + "\n", encoding="utf-8")
    return report


def _fail(kind: str, message: str, path: str | None, code: int) -> int:
    payload = {"error": kind, "message": message}
    if path is not None:
        payload["path"] = path
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cpbbus", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="YAML configuration file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--scenario", choices=["four-pulse", "geometric-phase", "dispersive",
                                               "schedule", "network", "sweep"],
                        help="override the scenario named in the config")
    parser.add_argument("--seed", type=int, help="seed for randomised helpers (u64)")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.scenario, args.seed)
        report = run(cfg, args.out)
    except ConfigError as exc:
        return _fail("config", str(exc), exc.path, EXIT_CONFIG)
    except ConvergenceError as exc:
        return _fail("convergence", str(exc), None, EXIT_CONVERGENCE)
    except InfeasibleScheduleError as exc:
        return _fail("infeasible", str(exc), None, EXIT_INFEASIBLE)
    except (ValueError, IndexError) as exc:
        return _fail("config", str(exc), "", EXIT_CONFIG)
    logger.info("determinism hash %s", report["determinism_hash"])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
