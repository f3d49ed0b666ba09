"""Charge-qubit / nanomechanical-resonator device model.

All energies are angular frequencies in rad/s (hbar = 1); fluxes are in
units of the flux quantum.  Qubit indices are 0-based: qubit 0 is the upper
Cooper-pair box, whose loop flux shifts by -B L x, and qubit 1 the lower one
(+B L x).  For more qubits the shift signs alternate unless overridden.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import constants

from .propagator import TimeDependentHamiltonian
from .operators import (
    QOperator,
    embed,
    fock_lowering,
    function_of_hermitian,
    pauli,
)

E_CHARGE = constants.e
PLANCK = constants.h
HBAR = constants.hbar
FLUX_QUANTUM = PLANCK / (2 * E_CHARGE)

_WORKING_POINT_TOL = 1e-9


def default_flux_sign(q: int) -> int:
    """(-1)^k with k = q + 1, i.e. -1 for qubit 0, +1 for qubit 1, ..."""
    return -1 if q % 2 == 0 else 1


def cos_pi(phi: float) -> float:
    """cos(pi*phi), exactly zero at half-integer phi."""
    r = math.fmod(float(phi), 2.0)
    if r < 0:
        r += 2.0
    if r in (0.5, 1.5):
        return 0.0
    return math.cos(math.pi * r)


def sin_pi(phi: float) -> float:
    """sin(pi*phi), exactly zero at integer phi."""
    r = math.fmod(float(phi), 2.0)
    if r < 0:
        r += 2.0
    if r in (0.0, 1.0):
        return 0.0
    return math.sin(math.pi * r)


@dataclass(frozen=True)
class QubitParams:
    E_J0: float  # Josephson energy of one junction in a SQUID loop, rad/s
    C_J: float   # junction capacitance, F
    C_g: float   # gate capacitance, F


@dataclass(frozen=True)
class DeviceParams:
    """Physical constants of the qubits, resonator and bias field.

    Give exactly one of ``mass`` or ``x_zpf``; the other is derived from
    x_zpf = sqrt(hbar / (2 m omega)).  Supplying both is allowed when they
    agree to 1e-6 relative.
    """

    qubits: tuple
    omega: float
    L: float
    B: float
    mass: float | None = None
    x_zpf: float | None = None
    flux_signs: tuple | None = None

    def __post_init__(self):
        qubits = tuple(self.qubits)
        if len(qubits) < 1:
            raise ValueError("at least one qubit is required")
        for q, p in enumerate(qubits):
            for name in ("E_J0", "C_J", "C_g"):
                v = getattr(p, name)
                if not (np.isfinite(v) and v > 0):
                    raise ValueError(f"qubit {q}: {name} must be positive, got {v}")
        for name in ("omega", "L"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if not (np.isfinite(self.B) and self.B >= 0):
            raise ValueError(f"B must be non-negative, got {self.B}")
        mass, x_zpf = self.mass, self.x_zpf
        if mass is None and x_zpf is None:
            raise ValueError("one of mass or x_zpf must be given")
        if mass is not None and not mass > 0:
            raise ValueError("mass must be positive")
        if x_zpf is not None and not x_zpf > 0:
            raise ValueError("x_zpf must be positive")
        if mass is None:
            mass = HBAR / (2 * self.omega * x_zpf ** 2)
        elif x_zpf is None:
            x_zpf = math.sqrt(HBAR / (2 * mass * self.omega))
        else:
            implied = math.sqrt(HBAR / (2 * mass * self.omega))
            if abs(implied - x_zpf) > 1e-6 * x_zpf:
                raise ValueError(f"mass implies x_zpf={implied:.6e}, inconsistent with {x_zpf:.6e}")
        signs = self.flux_signs
        if signs is None:
            signs = tuple(default_flux_sign(q) for q in range(len(qubits)))
        signs = tuple(int(s) for s in signs)
        if len(signs) != len(qubits) or any(s not in (-1, 1) for s in signs):
            raise ValueError(f"flux_signs must be one of +-1 per qubit, got {signs}")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "x_zpf", x_zpf)
        object.__setattr__(self, "flux_signs", signs)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)


@dataclass(frozen=True)
class QubitControl:
    N_g: float = 0.5     # gate charge number C_g V_g / 2e
    Phi_b: float = 0.5   # static loop bias, units of Phi0
    Phi_x: float = 0.0   # SQUID tuning flux; Phi_l = -Phi_r = Phi_x

    def __post_init__(self):
        for name in ("N_g", "Phi_b", "Phi_x"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class ControlSettings:
    qubits: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))

    def replace_qubit(self, q: int, **changes) -> "ControlSettings":
        qs = list(self.qubits)
        old = qs[q]
        qs[q] = QubitControl(**{**old.__dict__, **changes})
        return ControlSettings(tuple(qs))


# -- derived quantities ---------------------------------------------------

def charging_energy(C_J: float, C_g: float) -> float:
    """Single-electron charging energy e^2 / [2(2 C_J + C_g)] in rad/s."""
    if not (C_J > 0 and C_g > 0):
        raise ValueError("capacitances must be positive")
    return E_CHARGE ** 2 / (2 * (2 * C_J + C_g)) / HBAR


def qubit_frequency(E_c: float, N_g: float) -> float:
    """Signed splitting 4 E_c (2 N_g - 1); zero at charge degeneracy."""
    return 4 * E_c * (2 * N_g - 1)


def flux_coupling_kernel(B: float, L: float, x_zpf: float) -> float:
    """pi B L x_zpf / Phi0: the resonator phase per unit of (b + b^dagger)."""
    return math.pi * B * L * x_zpf / FLUX_QUANTUM


def bare_coupling(E_J: float, B: float, L: float, x_zpf: float) -> float:
    """Single-junction coupling E_J pi B L / (Phi0 sqrt(2 m omega))."""
    return E_J * flux_coupling_kernel(B, L, x_zpf)


def effective_josephson(E_J0: float, Phi_x: float) -> float:
    """SQUID-loop Josephson energy 2 E_J0 cos(pi Phi_x)."""
    return 2 * E_J0 * cos_pi(Phi_x)


def tunable_coupling(E_J0: float, Phi_x: float, B: float, L: float, x_zpf: float) -> float:
    """Flux-tunable qubit-resonator coupling g'; zero at Phi_x = 1/2."""
    return bare_coupling(effective_josephson(E_J0, Phi_x), B, L, x_zpf)


def _check_controls(params: DeviceParams, controls: ControlSettings):
    if len(controls.qubits) != params.n_qubits:
        raise ValueError(
            f"controls describe {len(controls.qubits)} qubits, device has {params.n_qubits}")


def qubit_frequencies(params: DeviceParams, controls: ControlSettings) -> np.ndarray:
    _check_controls(params, controls)
    return np.array([
        qubit_frequency(charging_energy(p.C_J, p.C_g), c.N_g)
        for p, c in zip(params.qubits, controls.qubits)
    ])


def coupling_magnitudes(params: DeviceParams, controls: ControlSettings) -> np.ndarray:
    """g'_k for every qubit (signed by cos(pi Phi_x), not by loop geometry)."""
    _check_controls(params, controls)
    return np.array([
        tunable_coupling(p.E_J0, c.Phi_x, params.B, params.L, params.x_zpf)
        for p, c in zip(params.qubits, controls.qubits)
    ])


def signed_couplings(params: DeviceParams, controls: ControlSettings) -> np.ndarray:
    """Coefficients of (b + b^dagger) sigma_x in the linear Hamiltonian."""
    return np.array(params.flux_signs) * coupling_magnitudes(params, controls)


# -- Hamiltonians ---------------------------------------------------------

def _dims(n_qubits: int, n_cut: int) -> tuple:
    return (2,) * n_qubits + (int(n_cut),)


def linear_hamiltonian(qubit_freqs: Sequence[float], couplings: Sequence[float], omega: float,
                       n_cut: int) -> QOperator:
    """omega b^dagger b + sum_k [w_k/2 sz_k + c_k (b + b^dagger) sx_k].

    ``couplings`` are the signed coefficients c_k (loop sign included).
    """
    n_qubits = len(qubit_freqs)
    if len(couplings) != n_qubits:
        raise ValueError("need one coupling per qubit")
    dims = _dims(n_qubits, n_cut)
    b = fock_lowering(n_cut)
    res = n_qubits
    h = omega * embed(b.dag() @ b, res, dims)
    x = embed(b + b.dag(), res, dims)
    for k, (wk, ck) in enumerate(zip(qubit_freqs, couplings)):
        if wk != 0:
            h = h + 0.5 * wk * embed(pauli("z"), k, dims)
        if ck != 0:
            h = h + ck * (embed(pauli("x"), k, dims) @ x)
    return h


def build_hamiltonian_full(params: DeviceParams, controls: ControlSettings, n_cut: int) -> QOperator:
    """Hamiltonian with the flux nonlinearity kept to all orders in x.

    H = omega b^dag b + sum_k w_k/2 sz_k
        - sum_k E_Jk [cos(pi Phi_b) cos(pi B L x / Phi0)
                      - s_k sin(pi Phi_b) sin(pi B L x / Phi0)] sx_k
    with E_Jk = 2 E_J0 cos(pi Phi_x) and x = x_zpf (b + b^dag).
    """
    _check_controls(params, controls)
    n = params.n_qubits
    dims = _dims(n, n_cut)
    b = fock_lowering(n_cut)
    phase = flux_coupling_kernel(params.B, params.L, params.x_zpf) * (b + b.dag())
    cos_x = embed(function_of_hermitian(phase, np.cos), n, dims)
    sin_x = embed(function_of_hermitian(phase, np.sin), n, dims)
    freqs = qubit_frequencies(params, controls)
    h = params.omega * embed(b.dag() @ b, n, dims)
    for k, (p, c) in enumerate(zip(params.qubits, controls.qubits)):
        if freqs[k] != 0:
            h = h + 0.5 * freqs[k] * embed(pauli("z"), k, dims)
        e_j = effective_josephson(p.E_J0, c.Phi_x)
        sx = embed(pauli("x"), k, dims)
        cb, sb = cos_pi(c.Phi_b), sin_pi(c.Phi_b)
        s_k = params.flux_signs[k]
        term = cb * cos_x - (s_k * sb) * sin_x
        h = h - e_j * (sx @ term)
    return QOperator(0.5 * (h.data + h.data.conj().T), dims)


def check_working_point(controls: ControlSettings):
    for k, c in enumerate(controls.qubits):
        if abs(sin_pi(c.Phi_b) - 1.0) > _WORKING_POINT_TOL:
            raise ValueError(
                f"qubit {k}: sin(pi Phi_b) = {sin_pi(c.Phi_b):.12g}, working point requires 1")


def build_hamiltonian_linear(params: DeviceParams, controls: ControlSettings, n_cut: int) -> QOperator:
    """First-order expansion in x at the sin(pi Phi_b) = 1 working point."""
    _check_controls(params, controls)
    check_working_point(controls)
    return linear_hamiltonian(qubit_frequencies(params, controls),
                              signed_couplings(params, controls), params.omega, n_cut)


def interaction_sampler(couplings: Mapping[int, float], omega: float, n_qubits: int, n_cut: int,
                        qubit_freqs: Sequence[float] | None = None) -> TimeDependentHamiltonian:
    """t -> sum_q c_q (b e^{-i omega t} + b^dag e^{i omega t}) sx_q.

    Interaction picture with respect to omega b^dagger b.  Qubits with a
    nonzero splitting keep their static w_q/2 sz_q term.  Calling the
    result at a time gives a plain array.
    """
    dims = _dims(n_qubits, n_cut)
    b = fock_lowering(n_cut)
    lower = np.zeros((math.prod(dims),) * 2, dtype=complex)
    for q, c in couplings.items():
        if c != 0:
            lower += c * (embed(pauli("x"), q, dims) @ embed(b, n_qubits, dims).data)
    static = np.zeros_like(lower)
    if qubit_freqs is not None:
        for q, w in enumerate(qubit_freqs):
            if w != 0:
                static += 0.5 * w * embed(pauli("z"), q, dims).data
    omega = float(omega)
    terms = [(static, None),
             (lower, lambda t: np.exp(-1j * omega * t)),
             (lower.conj().T, lambda t: np.exp(1j * omega * t))]
    number = np.real(np.diagonal(embed(b.dag() @ b, n_qubits, dims).data))
    return TimeDependentHamiltonian([(m, f) for m, f in terms if np.any(m)], dims,
                                    rotation=omega * number)


def _interaction_checks(k: int, params: DeviceParams, controls: ControlSettings):
    _check_controls(params, controls)
    check_working_point(controls)
    g = coupling_magnitudes(params, controls)
    if not 0 <= k < params.n_qubits:
        raise IndexError(f"qubit index {k} out of range")
    for q, gq in enumerate(g):
        if q != k and abs(gq) > 1e-12 * abs(g[k]):
            raise ValueError(f"qubit {q} is not decoupled (g'={gq:.3e}); only qubit {k} may couple")
    freqs = qubit_frequencies(params, controls)
    for q, c in enumerate(controls.qubits):
        if abs(2 * c.N_g - 1) > 1e-12:
            raise ValueError(f"qubit {q}: N_g={c.N_g} is not at charge degeneracy (w={freqs[q]:.3e})")
    return signed_couplings(params, controls)[k]


def interaction_hamiltonian_sampler(k: int, params: DeviceParams, controls: ControlSettings,
                                    n_cut: int) -> Callable[[float], np.ndarray]:
    coupling = _interaction_checks(k, params, controls)
    return interaction_sampler({k: coupling}, params.omega, params.n_qubits, n_cut)


def build_interaction_hamiltonian(k: int, params: DeviceParams, controls: ControlSettings, t: float,
                                  n_cut: int) -> QOperator:
    """Single-qubit coupling in the frame rotating with the resonator.

    H'_k(t) = s_k g'_k (b e^{-i omega t} + b^dag e^{i omega t}) sx_k, valid
    when only qubit ``k`` couples and both qubits sit at N_g = 1/2.
    """
    sample = interaction_hamiltonian_sampler(k, params, controls, n_cut)
    return QOperator(sample(t), sample.dims)


def resonator_number(n_qubits: int, n_cut: int) -> QOperator:
    b = fock_lowering(n_cut)
    return embed(b.dag() @ b, n_qubits, _dims(n_qubits, n_cut))


def qubit_operator(axis: str, q: int, n_qubits: int, n_cut: int) -> QOperator:
    return embed(pauli(axis), q, _dims(n_qubits, n_cut))


def free_hamiltonian(omega: float, qubit_freqs: Sequence[float], n_cut: int) -> QOperator:
    """omega b^dag b + sum_k w_k/2 sz_k, the frame for rotating-frame comparisons."""
    return linear_hamiltonian(qubit_freqs, [0.0] * len(qubit_freqs), omega, n_cut)

