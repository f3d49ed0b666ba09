"""Several qubits on one resonator, coupled a pair at a time.

Spectators are parked at a tuning flux of half a flux quantum, where their
tunable coupling vanishes identically.  ``crosstalk_metric`` measures how
far the evolution with spectators present departs from the isolated pair.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .device import (
    ControlSettings,
    DeviceParams,
    build_hamiltonian_linear,
    signed_couplings,
)
from .gates import (
    CouplingWindow,
    extract_theta,
    sector_parameters,
    windowed_evolution_analytic,
    windowed_evolution_numeric,
)
from .operators import QOperator, displacement, phase_min_distance
from .scheduler import PulseSchedule, realize_timeline

DEFAULT_DIM_CAP = 2 ** 10 * 20
DECOUPLING_FLUX = 0.5


@dataclass(frozen=True)
class NetworkSpec:
    params: DeviceParams
    controls: ControlSettings
    n_cut: int = 20
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        n = self.params.n_qubits
        if n < 2:
            raise ValueError("a network needs at least two qubits")
        if len(self.controls.qubits) != n:
            raise ValueError(f"controls describe {len(self.controls.qubits)} qubits, device has {n}")
        if self.n_cut < 2:
            raise ValueError("n_cut must be >= 2")
        if self.dimension > self.dim_cap:
            raise ValueError(f"Hilbert dimension {self.dimension} exceeds the cap {self.dim_cap}")

    @property
    def n_qubits(self) -> int:
        return self.params.n_qubits

    @property
    def dimension(self) -> int:
        return 2 ** self.n_qubits * self.n_cut

    @property
    def dims(self) -> tuple:
        return (2,) * self.n_qubits + (self.n_cut,)


def build_network_hamiltonian(spec: NetworkSpec) -> QOperator:
    """Linear Hamiltonian with one coupling term per qubit (signs from the device)."""
    return build_hamiltonian_linear(spec.params, spec.controls, spec.n_cut)


def _check_pair(spec: NetworkSpec, i: int, j: int):
    n = spec.n_qubits
    for k in (i, j):
        if not 0 <= k < n:
            raise IndexError(f"qubit {k} out of range for {n} qubits")
    if i == j:
        raise ValueError("pair members must differ")


def select_pair(spec: NetworkSpec, i: int, j: int, active_flux: float | None = 0.0) -> ControlSettings:
    """Park every qubit outside (i, j) at the decoupling flux.

    The pair gets ``active_flux`` (maximal coupling at 0); pass None to keep
    their current setting.
    """
    _check_pair(spec, i, j)
    controls = spec.controls
    for k in range(spec.n_qubits):
        if k in (i, j):
            if active_flux is not None:
                controls = controls.replace_qubit(k, Phi_x=active_flux)
        else:
            controls = controls.replace_qubit(k, Phi_x=DECOUPLING_FLUX)
    return controls


def _pair_windows(schedule: PulseSchedule, i: int, j: int) -> list[CouplingWindow]:
    mapping = {0: i, 1: j}
    timeline = realize_timeline(schedule)
    return [CouplingWindow(w.start, w.stop, {mapping[q]: c for q, c in w.couplings.items()})
            for w in timeline.windows], timeline.wall_clock_time


def _spectator_windows(spec: NetworkSpec, i: int, j: int, duration: float,
                       spectator_couplings: Mapping[int, float] | None) -> list[CouplingWindow]:
    if spectator_couplings is None:
        c = signed_couplings(spec.params, spec.controls)
        spectator_couplings = {k: float(c[k]) for k in range(spec.n_qubits) if k not in (i, j)}
    return [CouplingWindow(0.0, duration, {k: v}) for k, v in spectator_couplings.items()
            if v != 0 and k not in (i, j)]


def embed_pair(u_pair: QOperator, i: int, j: int, n_qubits: int) -> QOperator:
    """Place a (2, 2, n_cut) operator on qubits (i, j); identity on the rest."""
    n_cut = u_pair.dims[-1]
    rest = [k for k in range(n_qubits) if k not in (i, j)]
    big = np.kron(u_pair.data, np.eye(2 ** len(rest)))
    # axes of big: (i, j, fock, *rest); move them to (0, ..., n-1, fock)
    shape = [2, 2, n_cut] + [2] * len(rest)
    source = {i: 0, j: 1, n_qubits: 2}
    source.update({k: 3 + r for r, k in enumerate(rest)})
    perm = [source[p] for p in range(n_qubits + 1)]
    m = len(shape)
    t = big.reshape(shape + shape).transpose(perm + [a + m for a in perm])
    side = 2 ** n_qubits * n_cut
    return QOperator(t.reshape(side, side), (2,) * n_qubits + (n_cut,))


def pair_gate_comparison(spec: NetworkSpec, i: int, j: int, schedule: PulseSchedule,
                         method: str = "propagate", tolerance: float = 1e-8,
                         spectator_couplings: Mapping[int, float] | None = None) -> dict:
    """Run the pair schedule inside the network and on an isolated pair.

    Returns the phase-minimised distance between the network propagator
    and the isolated one embedded with identity on the spectators, plus the
    XX phase extracted from each (spectators in |0>, resonator in vacuum).
    """
    _check_pair(spec, i, j)
    n, n_cut, omega = spec.n_qubits, spec.n_cut, schedule.omega
    windows, wall = _pair_windows(schedule, i, j)
    windows += _spectator_windows(spec, i, j, wall, spectator_couplings)
    iso_windows, _ = _pair_windows(schedule, 0, 1)
    info = {"method": method}
    if method == "analytic":
        u_net = windowed_evolution_analytic(windows, omega, n, n_cut)
        u_iso = windowed_evolution_analytic(iso_windows, omega, 2, n_cut)
    elif method == "propagate":
        u_net, s1, e1 = windowed_evolution_numeric(windows, omega, n, n_cut, tolerance)
        u_iso, s2, e2 = windowed_evolution_numeric(iso_windows, omega, 2, n_cut, tolerance)
        info.update(steps_network=s1, steps_isolated=s2, error_network=e1, error_isolated=e2)
    else:
        raise ValueError(f"unknown method {method!r}")
    embedded = embed_pair(u_iso, i, j, n)
    theta_iso = extract_theta(u_iso, reference=schedule.achieved_theta)
    theta_net = extract_theta(_pair_block(u_net, i, j), reference=schedule.achieved_theta)
    info.update(distance=phase_min_distance(u_net, embedded), theta_network=theta_net,
                theta_isolated=theta_iso, theta_difference=abs(theta_net - theta_iso))
    return info


def _pair_block(u: QOperator, i: int, j: int) -> QOperator:
    """Restriction to spectators in |0>: a (2, 2, n_cut) operator on the pair."""
    n = len(u.dims) - 1
    n_cut = u.dims[-1]
    t = u.data.reshape(u.dims + u.dims)
    idx = []
    for k in range(n):
        idx.append(slice(None) if k in (i, j) else 0)
    idx.append(slice(None))
    t = t[tuple(idx + idx)]
    if i > j:
        t = t.transpose(1, 0, 2, 4, 3, 5)
    return QOperator(t.reshape(4 * n_cut, 4 * n_cut), (2, 2, n_cut))


def crosstalk_metric(spec: NetworkSpec, i: int, j: int, schedule: PulseSchedule,
                     method: str = "analytic", tolerance: float = 1e-8,
                     spectator_couplings: Mapping[int, float] | None = None) -> float:
    """Distance between U_net (U_iso (x) I)^dagger and the identity.

    Spectator couplings come from the network's controls unless given.  The
    analytic method works sector by sector in the sx product basis (no
    dense matrix over the whole network is formed) and reports the
    phase-minimised max-norm distance in that basis; the propagate method
    builds both propagators in the computational basis.
    """
    _check_pair(spec, i, j)
    n, n_cut, omega = spec.n_qubits, spec.n_cut, schedule.omega
    pair, wall = _pair_windows(schedule, i, j)
    spectators = _spectator_windows(spec, i, j, wall, spectator_couplings)
    if method == "propagate":
        u_net, _, _ = windowed_evolution_numeric(pair + spectators, omega, n, n_cut, tolerance)
        u_iso, _, _ = windowed_evolution_numeric(pair, omega, n, n_cut, tolerance)
        residual = u_net.data @ u_iso.data.conj().T
        return phase_min_distance(residual, np.eye(residual.shape[0]))
    if method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    if not spectators:
        return 0.0
    _, beta_net, phi_net = sector_parameters(pair + spectators, omega, n)
    _, beta_iso, phi_iso = sector_parameters(pair, omega, n)
    blocks = []
    cache: dict = {}
    for bn, pn, bi, pi in zip(beta_net, phi_net, beta_iso, phi_iso):
        key = (complex(bn), float(pn), complex(bi), float(pi))
        if key not in cache:
            r = displacement(bn, n_cut).data @ displacement(bi, n_cut).data.conj().T
            cache[key] = np.exp(1j * (pn - pi)) * r
        blocks.append(cache[key])
    stacked = np.concatenate(blocks, axis=1)
    eye = np.tile(np.eye(n_cut), (1, len(blocks)))
    return phase_min_distance(stacked, eye)
