"""Dense operator algebra on qubit-resonator Hilbert spaces.

Operators carry an ordered list of subsystem dimensions so that tensor
products and partial traces can be bookkept.  The convention throughout the
package is ``dims = [2, 2, ..., n_cut]``: charge qubits first, the resonator
Fock space last.

The charge basis follows ``sigma_z = |0><0| - |1><1|`` and
``sigma_x = |0><1| + |1><0|``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize


class TruncationWarning(UserWarning):
    """The Fock truncation is too small for the requested displacement."""


class MatrixExpError(ArithmeticError):
    """Matrix exponential failed to produce a finite result."""


_HERMITIAN_RTOL = 1e-10
_EXPM_NORM_CAP = 1e12
_PHASE_SCAN = 64


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class QOperator:
    """Square complex matrix with a subsystem-dimension signature."""

    data: np.ndarray
    dims: tuple

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"operator must be a square matrix, got shape {data.shape}")
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"invalid dims {dims}")
        if math.prod(dims) != data.shape[0]:
            raise ValueError(f"dims {dims} do not match matrix side {data.shape[0]}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    @property
    def shape(self):
        return self.data.shape

    def dag(self) -> "QOperator":
        return QOperator(self.data.conj().T, self.dims)

    def _check_dims(self, other: "QOperator"):
        if self.dims != other.dims:
            raise ValueError(f"dimension mismatch: {self.dims} vs {other.dims}")

    def __matmul__(self, other):
        if isinstance(other, QOperator):
            self._check_dims(other)
            return QOperator(self.data @ other.data, self.dims)
        return self.data @ other

    def __add__(self, other: "QOperator") -> "QOperator":
        self._check_dims(other)
        return QOperator(self.data + other.data, self.dims)

    def __sub__(self, other: "QOperator") -> "QOperator":
        self._check_dims(other)
        return QOperator(self.data - other.data, self.dims)

    def __mul__(self, scalar) -> "QOperator":
        return QOperator(self.data * scalar, self.dims)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "QOperator":
        return QOperator(self.data / scalar, self.dims)

    def __neg__(self) -> "QOperator":
        return QOperator(-self.data, self.dims)

    def norm_max(self) -> float:
        return _max_abs(self.data)

    def hermiticity_error(self) -> float:
        return _max_abs(self.data - self.data.conj().T)

    def is_hermitian(self, rtol: float = _HERMITIAN_RTOL) -> bool:
        return self.hermiticity_error() <= rtol * max(1.0, self.norm_max())

    def unitarity_error(self) -> float:
        """Max-norm of U^dagger U - I."""
        d = self.data
        return _max_abs(d.conj().T @ d - np.eye(d.shape[0]))

    def is_unitary(self, tol: float) -> bool:
        return self.unitarity_error() < tol

    def commutator(self, other: "QOperator") -> "QOperator":
        return self @ other - other @ self


@dataclass(frozen=True, eq=False)
class QState:
    """Pure state (1-D vector) or density matrix (2-D) with dims."""

    data: np.ndarray
    dims: tuple

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        side = math.prod(dims)
        if data.ndim == 1:
            if data.shape[0] != side:
                raise ValueError(f"dims {dims} do not match vector length {data.shape[0]}")
            if abs(np.linalg.norm(data) - 1.0) > 1e-12:
                raise ValueError("pure state is not normalised")
        elif data.ndim == 2:
            if data.shape != (side, side):
                raise ValueError(f"dims {dims} do not match density matrix {data.shape}")
            if _max_abs(data - data.conj().T) > 1e-12:
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(data) - 1.0) > 1e-12:
                raise ValueError("density matrix trace differs from 1")
            if np.min(np.linalg.eigvalsh(data)) < -1e-10:
                raise ValueError("density matrix has negative eigenvalues")
        else:
            raise ValueError("state must be a vector or a square matrix")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def purity(self) -> float:
        rho = self.density()
        return float(np.real(np.vdot(rho, rho)))


# -- elementary operators -------------------------------------------------

def identity(dims) -> QOperator:
    dims = (dims,) if isinstance(dims, (int, np.integer)) else tuple(dims)
    return QOperator(np.eye(math.prod(dims)), dims)


def fock_lowering(n_cut: int) -> QOperator:
    """Truncated annihilation operator b on Fock levels 0..n_cut-1."""
    if int(n_cut) != n_cut or n_cut < 2:
        raise ValueError(f"n_cut must be an integer >= 2, got {n_cut}")
    n_cut = int(n_cut)
    return QOperator(np.diag(np.sqrt(np.arange(1, n_cut, dtype=float)), k=1), (n_cut,))


def number_operator(n_cut: int) -> QOperator:
    b = fock_lowering(n_cut)
    return b.dag() @ b


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str) -> QOperator:
    """Pauli matrix in the charge basis {|0>, |1>}; sigma_z = diag(+1, -1)."""
    try:
        return QOperator(_PAULI[axis.lower()], (2,))
    except (KeyError, AttributeError):
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def sigma_plus() -> QOperator:
    """|0><1|, raising the sigma_z eigenvalue from -1 to +1."""
    return QOperator(np.array([[0, 1], [0, 0]], dtype=complex), (2,))


def sigma_minus() -> QOperator:
    return sigma_plus().dag()


def tensor(factors: Sequence[QOperator]) -> QOperator:
    factors = list(factors)
    if not factors:
        raise ValueError("tensor() needs at least one factor")
    data = reduce(np.kron, (f.data for f in factors))
    dims = tuple(itertools.chain.from_iterable(f.dims for f in factors))
    return QOperator(data, dims)


def embed(op: QOperator, position: int, dims: Sequence[int]) -> QOperator:
    """Place a single-subsystem operator at ``position`` of a product space."""
    dims = tuple(dims)
    if op.dims != (dims[position],):
        raise ValueError(f"operator dims {op.dims} do not fit subsystem {position} of {dims}")
    return tensor([op if k == position else identity(d) for k, d in enumerate(dims)])


# -- matrix functions -----------------------------------------------------

def _exp_of_hermitian_generator(h: np.ndarray, scale: complex) -> np.ndarray:
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)) @ v.conj().T


def matrix_exp(a) -> QOperator:
    """exp(A) for a square operator.

    Hermitian and skew-Hermitian inputs go through an eigendecomposition,
    which keeps exp(iH) unitary to machine precision.  Anything else falls
    back to scaling-and-squaring Pade (scipy).
    """
    if not isinstance(a, QOperator):
        arr = np.asarray(a, dtype=complex)
        a = QOperator(arr, (arr.shape[0],))
    m = a.data
    scale = max(1.0, _max_abs(m))
    tol = 1e-13 * scale
    if _max_abs(m - m.conj().T) <= tol:
        return QOperator(_exp_of_hermitian_generator(m, 1.0), a.dims)
    if _max_abs(m + m.conj().T) <= tol:
        return QOperator(_exp_of_hermitian_generator(-1j * m, 1j), a.dims)
    if np.linalg.norm(m, 1) > _EXPM_NORM_CAP:
        raise MatrixExpError(f"matrix norm {np.linalg.norm(m, 1):.3e} exceeds cap")
    out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise MatrixExpError("matrix exponential did not converge to a finite result")
    return QOperator(out, a.dims)


def function_of_hermitian(h: QOperator, f: Callable) -> QOperator:
    """Apply a scalar function to the spectrum of a Hermitian operator."""
    if not h.is_hermitian():
        raise ValueError("function_of_hermitian requires a Hermitian operator")
    m = 0.5 * (h.data + h.data.conj().T)
    w, v = np.linalg.eigh(m)
    try:
        fw = np.asarray(f(w), dtype=complex)
        if fw.shape != w.shape:
            raise TypeError
    except TypeError:
        fw = np.array([f(x) for x in w], dtype=complex)
    return QOperator((v * fw) @ v.conj().T, h.dims)


# -- displacements --------------------------------------------------------

def truncation_adequate(alpha: complex, n_cut: int) -> bool:
    """|alpha|^2 + 3|alpha| + 4 <= n_cut keeps the coherent tail below ~1e-8."""
    r = abs(alpha)
    return r * r + 3 * r + 4 <= n_cut


def displacement_generator(alpha: complex, n_cut: int) -> QOperator:
    b = fock_lowering(n_cut)
    return alpha * b.dag() - np.conj(alpha) * b


def displacement(alpha: complex, n_cut: int) -> QOperator:
    """D(alpha) = exp(alpha b^dagger - alpha* b) in the truncated Fock space."""
    if not truncation_adequate(alpha, n_cut):
        warnings.warn(
            f"n_cut={n_cut} is small for |alpha|={abs(alpha):.3g}",
            TruncationWarning,
            stacklevel=2,
        )
    return matrix_exp(displacement_generator(alpha, n_cut))


def top_fock_population(state, n_top: int = 2) -> float:
    """Population of the highest ``n_top`` Fock levels (last subsystem)."""
    rho = state.density() if isinstance(state, QState) else np.asarray(state)
    dims = state.dims
    n = dims[-1]
    rest = math.prod(dims[:-1])
    diag = np.real(np.diagonal(rho)).reshape(rest, n) if rho.ndim == 2 else np.abs(rho.reshape(rest, n)) ** 2
    return float(np.sum(diag[:, n - n_top:]))


# -- states ---------------------------------------------------------------

def basis(n: int, k: int) -> QState:
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return QState(v, (n,))


def vacuum(n_cut: int) -> QState:
    return basis(n_cut, 0)


def thermal(n_cut: int, nbar: float) -> QState:
    """Thermal resonator state with mean occupation ``nbar`` (renormalised)."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if nbar == 0:
        p = np.zeros(n_cut)
        p[0] = 1.0
    else:
        p = (nbar / (1.0 + nbar)) ** np.arange(n_cut)
        p /= p.sum()
    return QState(np.diag(p), (n_cut,))


def tensor_states(states: Sequence[QState]) -> QState:
    states = list(states)
    dims = tuple(itertools.chain.from_iterable(s.dims for s in states))
    if all(s.is_pure for s in states):
        return QState(reduce(np.kron, (s.data for s in states)), dims)
    rho = reduce(np.kron, (s.density() for s in states))
    return QState(0.5 * (rho + rho.conj().T), dims)


def pauli_product_states(n_qubits: int) -> list[np.ndarray]:
    """Fixed frame: all products of the six single-qubit Pauli eigenstates."""
    s = 1 / np.sqrt(2)
    single = [
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([s, s], dtype=complex),
        np.array([s, -s], dtype=complex),
        np.array([s, 1j * s], dtype=complex),
        np.array([s, -1j * s], dtype=complex),
    ]
    return [reduce(np.kron, combo) for combo in itertools.product(single, repeat=n_qubits)]


# -- partial trace --------------------------------------------------------

def partial_trace(state: QState, keep: Iterable[int]) -> QState:
    """Reduced density matrix over the subsystems listed in ``keep``."""
    dims = state.dims
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must not be empty")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise ValueError(f"keep indices {keep} out of range for dims {dims}")
    n = len(dims)
    drop = [k for k in range(n) if k not in keep]
    kd = tuple(dims[k] for k in keep)
    if state.is_pure:
        psi = state.data.reshape(dims)
        psi = np.transpose(psi, keep + drop).reshape(math.prod(kd), -1)
        rho = psi @ psi.conj().T
    else:
        rho = state.data.reshape(dims + dims)
        idx_row = list(range(n))
        idx_col = list(range(n, 2 * n))
        for k in drop:
            idx_col[k] = idx_row[k]
        out = [idx_row[k] for k in keep] + [idx_col[k] for k in keep]
        rho = np.einsum(rho, idx_row + idx_col, out).reshape(math.prod(kd), math.prod(kd))
    return QState(0.5 * (rho + rho.conj().T), kd)


# -- channels and fidelities ----------------------------------------------

def _pauli_basis(n_qubits: int) -> np.ndarray:
    """Columns are row-major vec of the normalised Pauli products."""
    single = [_PAULI_I, _PAULI["x"], _PAULI["y"], _PAULI["z"]]
    mats = [reduce(np.kron, combo) / np.sqrt(2) ** n_qubits
            for combo in itertools.product(single, repeat=n_qubits)]
    return np.stack([m.reshape(-1) for m in mats], axis=1)


_PAULI_I = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class Channel:
    """Qubit channel stored as its Pauli transfer matrix.

    Basis ordering is {I, X, Y, Z}/sqrt(2) per qubit, Kronecker-ordered with
    qubit 0 most significant.
    """

    ptm: np.ndarray
    n_qubits: int

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "Channel":
        kraus = [np.asarray(k, dtype=complex) for k in kraus]
        d = kraus[0].shape[0]
        n_qubits = int(round(math.log2(d)))
        if 2 ** n_qubits != d:
            raise ValueError("channel dimension must be a power of two")
        sup = sum(np.kron(k, k.conj()) for k in kraus)
        b = _pauli_basis(n_qubits)
        return cls(np.real(b.conj().T @ sup @ b), n_qubits)

    @classmethod
    def from_unitary(cls, u) -> "Channel":
        u = u.data if isinstance(u, QOperator) else u
        return cls.from_kraus([u])

    @classmethod
    def depolarizing(cls, n_qubits: int, p: float) -> "Channel":
        """rho -> (1-p) rho + p I/d; p = 1 is the fully depolarising channel."""
        r = np.eye(4 ** n_qubits) * (1 - p)
        r[0, 0] = 1.0
        return cls(r, n_qubits)

    def then(self, other: "Channel") -> "Channel":
        """Apply ``self`` first, then ``other``."""
        return Channel(other.ptm @ self.ptm, self.n_qubits)


def process_fidelity(actual: Channel, target) -> float:
    """Process (entanglement) fidelity of a channel against a target unitary.

    Global phases of the target drop out.
    """
    target = target.data if isinstance(target, QOperator) else np.asarray(target)
    if target.shape != (actual.dim, actual.dim):
        raise ValueError(f"target shape {target.shape} does not match channel dimension {actual.dim}")
    r_target = Channel.from_unitary(target).ptm
    f = float(np.trace(r_target.T @ actual.ptm)) / actual.dim ** 2
    return min(1.0, max(0.0, f))


def average_gate_fidelity(f_pro: float, d: int) -> float:
    return (d * f_pro + 1.0) / (d + 1.0)


# -- comparison helpers ---------------------------------------------------

def fock_columns(dims: Sequence[int], n_keep: int) -> np.ndarray:
    """Indices of basis states whose last (Fock) label is below ``n_keep``."""
    dims = tuple(dims)
    n = dims[-1]
    rest = math.prod(dims[:-1])
    return np.array([q * n + m for q in range(rest) for m in range(min(n_keep, n))])


def phase_min_distance(u, v, columns=None) -> float:
    """min over phi of max |U - e^{i phi} V|, optionally on a column subset.

    Used to compare unitaries that are only defined up to a global phase.
    """
    a = u.data if isinstance(u, QOperator) else np.asarray(u)
    b = v.data if isinstance(v, QOperator) else np.asarray(v)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if columns is not None:
        a = a[:, columns]
        b = b[:, columns]
    overlap = np.vdot(b, a)

    def cost(phi):
        return _max_abs(a - np.exp(1j * phi) * b)

    # the overlap phase is optimal for nearly equal operators; a coarse scan
    # covers the rest of the circle
    starts = [float(np.angle(overlap))] if abs(overlap) > 0 else []
    starts += list(np.linspace(-math.pi, math.pi, _PHASE_SCAN, endpoint=False))
    vals = [cost(p) for p in starts]
    k = int(np.argmin(vals))
    half = 2 * math.pi / _PHASE_SCAN
    res = scipy.optimize.minimize_scalar(cost, bounds=(starts[k] - half, starts[k] + half),
                                         method="bounded", options={"xatol": 1e-12})
    return float(min(vals[k], res.fun))
