"""Strict YAML run configuration.

Dimensioned quantities carry a unit tag, written either inline as
``"5 ghz"`` or as ``{value: 5, unit: ghz}``.  Cyclic frequency tags (hz,
mhz, ghz) are multiplied by 2 pi; ``rad_per_s`` is taken as is.  Unknown
keys anywhere are an error.
"""
from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .device import ControlSettings, DeviceParams, QubitControl, QubitParams

SCENARIOS = ("four-pulse", "geometric-phase", "dispersive", "schedule", "network", "sweep")

_TWO_PI = 2 * math.pi
UNITS = {
    "frequency": {"hz": _TWO_PI, "mhz": _TWO_PI * 1e6, "ghz": _TWO_PI * 1e9, "rad_per_s": 1.0},
    "time": {"second": 1.0},
    "length": {"meter": 1.0},
    "field": {"tesla": 1.0},
    "flux": {"phi0": 1.0},
    "capacitance": {"farad": 1.0},
    "mass": {"kilogram": 1.0},
}
ALL_UNITS = sorted({u for table in UNITS.values() for u in table})


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# -- primitive readers ------------------------------------------------------

def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _mapping(node, path: str, allowed: set, required: set = frozenset()) -> dict:
    if node is None:
        node = {}
    if not isinstance(node, dict):
        raise ConfigError(path, "expected a mapping")
    for key in node:
        if key not in allowed:
            raise ConfigError(_join(path, key), "unknown key")
    for key in required:
        if key not in node:
            raise ConfigError(_join(path, key), "required key missing")
    return node


_FLOAT_LITERAL = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+")


def _number(node, path: str) -> float:
    # YAML 1.1 reads "5.0e9" (no exponent sign) as a string; take it as the number it is
    if isinstance(node, str) and _FLOAT_LITERAL.fullmatch(node.strip()):
        node = float(node)
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(path, f"expected a number, got {node!r}")
    if not math.isfinite(node):
        raise ConfigError(path, "must be finite")
    return float(node)


def _integer(node, path: str, minimum: int | None = None) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(path, f"expected an integer, got {node!r}")
    if minimum is not None and node < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return int(node)


def _boolean(node, path: str) -> bool:
    if not isinstance(node, bool):
        raise ConfigError(path, f"expected true/false, got {node!r}")
    return node


def _choice(node, path: str, options) -> str:
    if node not in options:
        raise ConfigError(path, f"expected one of {list(options)}, got {node!r}")
    return node


def quantity(node, path: str, kind: str) -> float:
    """Convert a tagged quantity to SI (frequencies to rad/s, flux to Phi0)."""
    if isinstance(node, str):
        parts = node.split()
        if len(parts) != 2:
            raise ConfigError(path, f"expected '<number> <unit>', got {node!r}")
        raw, unit = parts
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(path, f"bad number {raw!r}") from None
    elif isinstance(node, dict):
        _mapping(node, path, {"value", "unit"}, {"value", "unit"})
        value = _number(node["value"], _join(path, "value"))
        unit = node["unit"]
    else:
        raise ConfigError(path, f"unit tag required ({'|'.join(sorted(UNITS[kind]))}), got {node!r}")
    if not isinstance(unit, str) or unit not in ALL_UNITS:
        raise ConfigError(path, f"unknown unit tag {unit!r}")
    table = UNITS[kind]
    if unit not in table:
        raise ConfigError(path, f"unit {unit!r} is not a {kind} unit ({'|'.join(sorted(table))})")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return value * table[unit]


def _complex(node, path: str) -> complex:
    if not isinstance(node, list) or len(node) != 2:
        raise ConfigError(path, "expected [real, imag]")
    return complex(_number(node[0], _join(path, 0)), _number(node[1], _join(path, 1)))


# -- blocks ------------------------------------------------------------------

@dataclass(frozen=True)
class NumericConfig:
    n_cut: int = 20
    tolerance: float = 1e-8
    method: str = "analytic"
    max_steps: int = 1 << 18


@dataclass(frozen=True)
class ResonatorConfig:
    state: str = "vacuum"
    nbar: float = 0.0


@dataclass(frozen=True)
class FourPulseConfig:
    t1: float | None = None
    t2: float | None = None
    alpha1: complex | None = None
    alpha2: complex | None = None
    random_pairs: int = 0
    max_alpha: float = 0.8
    repetitions: int = 1


@dataclass(frozen=True)
class GeometricConfig:
    n: int = 1


@dataclass(frozen=True)
class DispersiveConfig:
    delta_over_g: float = 5.0
    g: float | None = None


@dataclass(frozen=True)
class FeasibilityConfig:
    E_J0: float = 5e9
    quoted_coupling: float | None = 30e6
    claimed_product: float = 0.69
    reference_time: float = 1e-7
    detuning_ratio: float = 5.0


@dataclass(frozen=True)
class ScheduleConfig:
    theta_target: float = math.pi / 4
    allow_repetitions: bool = True
    max_repetitions: int = 10_000
    T1: float | None = None
    T2: float | None = None
    dead_time: float = 0.0
    simulate: bool = True
    feasibility: FeasibilityConfig | None = None


@dataclass(frozen=True)
class NetworkConfig:
    pair: tuple = (0, 1)
    theta_target: float = 0.3
    spectator_coupling_fraction: float | None = None


@dataclass(frozen=True)
class SweepConfig:
    scenario: str
    parameter: str
    values: tuple
    unit: str | None = None


@dataclass(frozen=True)
class OutputConfig:
    report: str = "report.json"
    sweep_csv: str = "sweep.csv"


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    seed: int
    device: DeviceParams
    controls: ControlSettings
    numeric: NumericConfig
    resonator: ResonatorConfig
    four_pulse: FourPulseConfig
    geometric_phase: GeometricConfig
    dispersive: DispersiveConfig
    schedule: ScheduleConfig
    network: NetworkConfig
    sweep: SweepConfig | None
    output: OutputConfig
    raw: dict = field(repr=False, compare=False)


def _device(node, path: str) -> DeviceParams:
    node = _mapping(node, path, {"qubits", "omega", "L", "B", "mass", "x_zpf", "flux_signs"},
                    {"qubits", "omega", "L", "B"})
    qpath = _join(path, "qubits")
    if not isinstance(node["qubits"], list) or not node["qubits"]:
        raise ConfigError(qpath, "expected a non-empty list")
    qubits = []
    for k, q in enumerate(node["qubits"]):
        p = _join(qpath, k)
        q = _mapping(q, p, {"E_J0", "C_J", "C_g"}, {"E_J0", "C_J", "C_g"})
        qubits.append(QubitParams(quantity(q["E_J0"], _join(p, "E_J0"), "frequency"),
                                  quantity(q["C_J"], _join(p, "C_J"), "capacitance"),
                                  quantity(q["C_g"], _join(p, "C_g"), "capacitance")))
    mass = quantity(node["mass"], _join(path, "mass"), "mass") if "mass" in node else None
    x_zpf = quantity(node["x_zpf"], _join(path, "x_zpf"), "length") if "x_zpf" in node else None
    signs = None
    if "flux_signs" in node:
        sp = _join(path, "flux_signs")
        if not isinstance(node["flux_signs"], list):
            raise ConfigError(sp, "expected a list of +1/-1")
        signs = tuple(_integer(s, _join(sp, i)) for i, s in enumerate(node["flux_signs"]))
    try:
        return DeviceParams(tuple(qubits), quantity(node["omega"], _join(path, "omega"), "frequency"),
                            quantity(node["L"], _join(path, "L"), "length"),
                            quantity(node["B"], _join(path, "B"), "field"), mass, x_zpf, signs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _controls(node, path: str, n_qubits: int) -> ControlSettings:
    node = _mapping(node, path, {"qubits"})
    items = node.get("qubits")
    if items is None:
        return ControlSettings(tuple(QubitControl() for _ in range(n_qubits)))
    qpath = _join(path, "qubits")
    if not isinstance(items, list) or len(items) != n_qubits:
        raise ConfigError(qpath, f"expected a list of {n_qubits} entries")
    out = []
    for k, q in enumerate(items):
        p = _join(qpath, k)
        q = _mapping(q, p, {"N_g", "Phi_b", "Phi_x"})
        out.append(QubitControl(
            N_g=_number(q["N_g"], _join(p, "N_g")) if "N_g" in q else 0.5,
            Phi_b=quantity(q["Phi_b"], _join(p, "Phi_b"), "flux") if "Phi_b" in q else 0.5,
            Phi_x=quantity(q["Phi_x"], _join(p, "Phi_x"), "flux") if "Phi_x" in q else 0.0,
        ))
    return ControlSettings(tuple(out))


def _numeric(node, path: str) -> NumericConfig:
    node = _mapping(node, path, {"n_cut", "tolerance", "method", "max_steps"})
    d = NumericConfig()
    tol = _number(node["tolerance"], _join(path, "tolerance")) if "tolerance" in node else d.tolerance
    if tol <= 0:
        raise ConfigError(_join(path, "tolerance"), "must be positive")
    return NumericConfig(
        n_cut=_integer(node["n_cut"], _join(path, "n_cut"), 2) if "n_cut" in node else d.n_cut,
        tolerance=tol,
        method=_choice(node["method"], _join(path, "method"), ("analytic", "propagate"))
        if "method" in node else d.method,
        max_steps=_integer(node["max_steps"], _join(path, "max_steps"), 2)
        if "max_steps" in node else d.max_steps,
    )


def _resonator(node, path: str) -> ResonatorConfig:
    node = _mapping(node, path, {"state", "nbar"})
    state = _choice(node.get("state", "vacuum"), _join(path, "state"), ("vacuum", "thermal"))
    nbar = _number(node["nbar"], _join(path, "nbar")) if "nbar" in node else 0.0
    if nbar < 0:
        raise ConfigError(_join(path, "nbar"), "must be non-negative")
    return ResonatorConfig(state, nbar)


def _four_pulse(node, path: str) -> FourPulseConfig:
    node = _mapping(node, path, {"t1", "t2", "alpha1", "alpha2", "random_pairs", "max_alpha",
                                 "repetitions"})
    has_t = "t1" in node or "t2" in node
    has_a = "alpha1" in node or "alpha2" in node
    if has_t and has_a:
        raise ConfigError(path, "give either t1/t2 or alpha1/alpha2, not both")
    for pair in (("t1", "t2"), ("alpha1", "alpha2")):
        if (pair[0] in node) != (pair[1] in node):
            raise ConfigError(path, f"{pair[0]} and {pair[1]} must be given together")
    return FourPulseConfig(
        t1=quantity(node["t1"], _join(path, "t1"), "time") if "t1" in node else None,
        t2=quantity(node["t2"], _join(path, "t2"), "time") if "t2" in node else None,
        alpha1=_complex(node["alpha1"], _join(path, "alpha1")) if "alpha1" in node else None,
        alpha2=_complex(node["alpha2"], _join(path, "alpha2")) if "alpha2" in node else None,
        random_pairs=_integer(node.get("random_pairs", 0), _join(path, "random_pairs"), 0),
        max_alpha=_number(node.get("max_alpha", 0.8), _join(path, "max_alpha")),
        repetitions=_integer(node.get("repetitions", 1), _join(path, "repetitions"), 1),
    )


def _feasibility(node, path: str) -> FeasibilityConfig:
    node = _mapping(node, path, {"E_J0_bare", "quoted_coupling_bare", "claimed_product",
                                 "reference_time", "detuning_ratio"})
    d = FeasibilityConfig()
    return FeasibilityConfig(
        E_J0=_number(node["E_J0_bare"], _join(path, "E_J0_bare")) if "E_J0_bare" in node else d.E_J0,
        quoted_coupling=(_number(node["quoted_coupling_bare"], _join(path, "quoted_coupling_bare"))
                         if node.get("quoted_coupling_bare") is not None else
                         (None if "quoted_coupling_bare" in node else d.quoted_coupling)),
        claimed_product=_number(node.get("claimed_product", d.claimed_product),
                                _join(path, "claimed_product")),
        reference_time=quantity(node["reference_time"], _join(path, "reference_time"), "time")
        if "reference_time" in node else d.reference_time,
        detuning_ratio=_number(node.get("detuning_ratio", d.detuning_ratio),
                               _join(path, "detuning_ratio")),
    )


def _schedule(node, path: str) -> ScheduleConfig:
    node = _mapping(node, path, {"theta_target", "allow_repetitions", "max_repetitions", "T1", "T2",
                                 "dead_time", "simulate", "feasibility"})
    d = ScheduleConfig()
    if ("T1" in node) != ("T2" in node):
        raise ConfigError(path, "T1 and T2 must be given together")
    return ScheduleConfig(
        theta_target=_number(node.get("theta_target", d.theta_target), _join(path, "theta_target")),
        allow_repetitions=_boolean(node.get("allow_repetitions", True), _join(path, "allow_repetitions")),
        max_repetitions=_integer(node.get("max_repetitions", d.max_repetitions),
                                 _join(path, "max_repetitions"), 1),
        T1=quantity(node["T1"], _join(path, "T1"), "time") if "T1" in node else None,
        T2=quantity(node["T2"], _join(path, "T2"), "time") if "T2" in node else None,
        dead_time=quantity(node["dead_time"], _join(path, "dead_time"), "time")
        if "dead_time" in node else 0.0,
        simulate=_boolean(node.get("simulate", True), _join(path, "simulate")),
        feasibility=_feasibility(node["feasibility"], _join(path, "feasibility"))
        if "feasibility" in node else None,
    )


def _network(node, path: str, n_qubits: int) -> NetworkConfig:
    node = _mapping(node, path, {"pair", "theta_target", "spectator_coupling_fraction"})
    pair = node.get("pair", [0, 1])
    pp = _join(path, "pair")
    if not isinstance(pair, list) or len(pair) != 2:
        raise ConfigError(pp, "expected two qubit indices")
    pair = tuple(_integer(v, _join(pp, k), 0) for k, v in enumerate(pair))
    if pair[0] == pair[1] or max(pair) >= n_qubits:
        raise ConfigError(pp, f"need two distinct indices below {n_qubits}")
    frac = node.get("spectator_coupling_fraction")
    return NetworkConfig(
        pair=pair,
        theta_target=_number(node.get("theta_target", 0.3), _join(path, "theta_target")),
        spectator_coupling_fraction=None if frac is None
        else _number(frac, _join(path, "spectator_coupling_fraction")),
    )


def _sweep(node, path: str) -> SweepConfig:
    node = _mapping(node, path, {"scenario", "parameter", "values", "start", "stop", "steps", "unit"},
                    {"scenario", "parameter"})
    scenario = _choice(node["scenario"], _join(path, "scenario"),
                       [s for s in SCENARIOS if s != "sweep"])
    param = node["parameter"]
    if not isinstance(param, str) or not param:
        raise ConfigError(_join(path, "parameter"), "expected a dotted path")
    if "values" in node:
        if any(k in node for k in ("start", "stop", "steps")):
            raise ConfigError(path, "give either values or start/stop/steps")
        vals = node["values"]
        if not isinstance(vals, list):
            raise ConfigError(_join(path, "values"), "expected a list")
        values = tuple(_number(v, _join(_join(path, "values"), i)) for i, v in enumerate(vals))
    else:
        _mapping(node, path, set(node), {"start", "stop", "steps"})
        start = _number(node["start"], _join(path, "start"))
        stop = _number(node["stop"], _join(path, "stop"))
        steps = _integer(node["steps"], _join(path, "steps"), 0)
        if steps == 1:
            values = (start,)
        else:
            values = tuple(start + (stop - start) * k / (steps - 1) for k in range(steps))
    unit = node.get("unit")
    if unit is not None and unit not in ALL_UNITS:
        raise ConfigError(_join(path, "unit"), f"unknown unit tag {unit!r}")
    return SweepConfig(scenario, param, values, unit)


def _output(node, path: str) -> OutputConfig:
    node = _mapping(node, path, {"report", "sweep_csv"})
    out = {}
    for key in ("report", "sweep_csv"):
        if key in node:
            if not isinstance(node[key], str) or not node[key]:
                raise ConfigError(_join(path, key), "expected a file name")
            out[key] = node[key]
    return OutputConfig(**out)


TOP_LEVEL = {"scenario", "seed", "device", "controls", "numeric", "resonator", "four_pulse",
             "geometric_phase", "dispersive", "schedule", "network", "sweep", "output"}


def parse_config(raw: Any, scenario: str | None = None, seed: int | None = None) -> RunConfig:
    """Validate a loaded document; ``scenario`` and ``seed`` override the file."""
    raw = copy.deepcopy(raw)
    if isinstance(raw, dict) and "determinism" in raw and "config" in raw.get("determinism", {}):
        raw = copy.deepcopy(raw["determinism"]["config"])  # a previous report
    node = _mapping(raw, "", TOP_LEVEL, {"device"})
    if scenario is not None:
        raw["scenario"] = scenario
    if seed is not None:
        raw["seed"] = seed
    if "scenario" not in raw:
        raise ConfigError("scenario", "required key missing")
    sc = _choice(raw["scenario"], "scenario", SCENARIOS)
    sd = _integer(raw.get("seed", 0), "seed", 0)
    if sd >= 2 ** 64:
        raise ConfigError("seed", "must fit in 64 bits")
    raw["seed"] = sd
    device = _device(node["device"], "device")
    controls = _controls(node.get("controls"), "controls", device.n_qubits)
    sweep = None
    if sc == "sweep":
        if "sweep" not in node:
            raise ConfigError("sweep", "required for the sweep scenario")
        sweep = _sweep(node["sweep"], "sweep")
    elif "sweep" in node:
        _sweep(node["sweep"], "sweep")
    return RunConfig(
        scenario=sc,
        seed=sd,
        device=device,
        controls=controls,
        numeric=_numeric(node.get("numeric"), "numeric"),
        resonator=_resonator(node.get("resonator"), "resonator"),
        four_pulse=_four_pulse(node.get("four_pulse"), "four_pulse"),
        geometric_phase=GeometricConfig(
            n=_integer(_mapping(node.get("geometric_phase"), "geometric_phase", {"n"}).get("n", 1),
                       "geometric_phase.n", 1)),
        dispersive=_dispersive(node.get("dispersive"), "dispersive"),
        schedule=_schedule(node.get("schedule"), "schedule"),
        network=_network(node.get("network"), "network", device.n_qubits),
        sweep=sweep,
        output=_output(node.get("output"), "output"),
        raw=raw,
    )


def _dispersive(node, path: str) -> DispersiveConfig:
    node = _mapping(node, path, {"delta_over_g", "g"})
    ratio = _number(node.get("delta_over_g", 5.0), _join(path, "delta_over_g"))
    if ratio <= 0:
        raise ConfigError(_join(path, "delta_over_g"), "must be positive")
    g = quantity(node["g"], _join(path, "g"), "frequency") if "g" in node else None
    return DispersiveConfig(ratio, g)


def load_config(path: str | Path, scenario: str | None = None, seed: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        docs = list(yaml.safe_load_all(text))
    except yaml.YAMLError as exc:
        raise ConfigError("", f"malformed YAML: {exc}") from None
    if len(docs) != 1:
        raise ConfigError("", "expected exactly one YAML document")
    return parse_config(docs[0], scenario, seed)


def set_path(raw: dict, dotted: str, value) -> dict:
    """Copy of ``raw`` with the existing entry at ``dotted`` replaced."""
    out = copy.deepcopy(raw)
    keys = dotted.split(".")
    node = out
    for depth, key in enumerate(keys):
        last = depth == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(key)
                node[idx]
            except (ValueError, IndexError):
                raise ConfigError(dotted, "unknown parameter path") from None
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict) and key in node:
            if last:
                node[key] = value
            else:
                node = node[key]
        else:
            raise ConfigError(dotted, "unknown parameter path")
    return out
