"""Small dense quantum linear algebra: Paulis, states, channels and error metrics.

Conventions used throughout the package:

* qubit 0 is the leftmost tensor factor, so ``"ZX"`` is Z on qubit 0 and X on
  qubit 1, and basis kets are ordered ``|q0 q1>``;
* ``Z|0> = +|0>`` and the free Hamiltonian is ``-(w/2) Z`` so ``|0>`` is the
  ground state;
* Pauli strings are enumerated lexicographically over ``I, X, Y, Z``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

HERMITIAN_TOL = 1e-10
MAX_DIM = 4


def kron(*ops):
    return reduce(np.kron, ops)


def pauli_labels(n: int) -> list[str]:
    """All ``4**n`` Pauli labels in lexicographic order (``II, IX, IY, ...``)."""
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n)]


def pauli(label: str) -> np.ndarray:
    """Matrix of a Pauli string such as ``"ZX"``."""
    try:
        return kron(*(PAULIS[c] for c in label.upper()))
    except KeyError:
        raise ValueError(f"invalid Pauli label {label!r}") from None


def pauli_basis(n: int) -> np.ndarray:
    """Stack of the ``4**n`` Pauli matrices, shape ``(4**n, 2**n, 2**n)``."""
    return np.array([pauli(p) for p in pauli_labels(n)])


def num_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of 2")
    return n


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.linalg.norm(m - dagger(m)) <= tol


def is_unitary(m: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0]))) <= tol


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Return ``exp(-i h t)`` for a Hermitian ``h`` of dimension 2 or 4.

    Also accepts a stack of Hamiltonians with shape ``(k, d, d)``, in which
    case a stack of unitaries is returned.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] != h.shape[-2]:
        raise ValueError("Hamiltonian must be square")
    if h.shape[-1] > MAX_DIM:
        raise ValueError(f"dimension {h.shape[-1]} unsupported (max {MAX_DIM})")
    num_qubits(h.shape[-1])
    herm_err = np.max(np.abs(h - dagger(h))) if h.size else 0.0
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if herm_err > HERMITIAN_TOL * scale:
        raise ValueError(f"Hamiltonian is not Hermitian (deviation {herm_err:.2e})")
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    phases = np.exp(-1j * w * t)
    return (v * phases[..., None, :]) @ dagger(v)


def rotation(axis: str, angle: float) -> np.ndarray:
    """``exp(-i angle P / 2)`` for a Pauli string ``P``."""
    p = pauli(axis)
    return np.cos(angle / 2) * np.eye(p.shape[0]) - 1j * np.sin(angle / 2) * p


def embed(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Place a single-qubit operator on ``qubit`` of an ``n`` qubit register."""
    ops = [I2] * n
    ops[qubit] = op
    return kron(*ops)


# -- states -----------------------------------------------------------------

_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "r": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "l": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def ket(label: str) -> np.ndarray:
    """Product state from a label such as ``"0"``, ``"+"`` or ``"+0"``."""
    try:
        return kron(*(_KETS[c] for c in label))
    except KeyError:
        raise ValueError(f"invalid state label {label!r}") from None


def density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def check_state(psi: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    num_qubits(psi.shape[0])
    if abs(np.linalg.norm(psi) - 1) > tol:
        raise ValueError("state vector is not normalized")
    return psi


def check_density(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    num_qubits(rho.shape[0])
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-9:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def purity(rho: np.ndarray) -> float:
    """``Tr[rho^2]``."""
    rho = np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


def pauli_expectations(rho: np.ndarray) -> dict[str, float]:
    n = num_qubits(np.asarray(rho).shape[0])
    return {p: float(np.real(np.trace(rho @ pauli(p)))) for p in pauli_labels(n)}


def purity_from_pauli_expectations(expectations: Mapping[str, float], n: int) -> float:
    """Purity from the full set of Pauli expectation values, ``sum <P>^2 / d``."""
    labels = pauli_labels(n)
    missing = [p for p in labels if p not in expectations]
    if missing:
        raise ValueError(f"missing Pauli expectations: {missing}")
    values = np.array([expectations[p] for p in labels], dtype=float)
    if np.any(np.abs(values) > 1 + 1e-9):
        raise ValueError("Pauli expectations must lie in [-1, 1]")
    return float(np.sum(values**2) / 2**n)


# -- channels ---------------------------------------------------------------


@dataclass(frozen=True)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators."""

    ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.ops)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        num_qubits(d)
        total = sum(dagger(k) @ k for k in ops)
        if np.max(np.abs(total - np.eye(d))) > 1e-10:
            raise ValueError("Kraus operators are not trace preserving")
        object.__setattr__(self, "ops", ops)

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return num_qubits(self.dim)

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "KrausChannel":
        return cls((np.asarray(u, dtype=complex),))

    @classmethod
    def identity(cls, n: int = 1) -> "KrausChannel":
        return cls((np.eye(2**n, dtype=complex),))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ dagger(k) for k in self.ops)

    def compose(self, after: "KrausChannel") -> "KrausChannel":
        """Channel that applies ``self`` first and then ``after``."""
        return KrausChannel(tuple(b @ a for b in after.ops for a in self.ops))

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        return KrausChannel(tuple(np.kron(a, b) for a in self.ops for b in other.ops))


def amplitude_damping(gamma: float) -> KrausChannel:
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausChannel((k0, k1))


def phase_damping(coherence: float) -> KrausChannel:
    """Dephasing that multiplies the off-diagonal elements by ``coherence``."""
    p = (1 - coherence) / 2
    return KrausChannel((np.sqrt(1 - p) * I2, np.sqrt(p) * Z))


def depolarizing(p: float, n: int = 1) -> KrausChannel:
    """``rho -> (1 - p) rho + p I/d``."""
    d = 2**n
    labels = pauli_labels(n)
    weights = [1 - p + p / d**2] + [p / d**2] * (len(labels) - 1)
    return KrausChannel(tuple(np.sqrt(w) * pauli(lbl) for w, lbl in zip(weights, labels)))


def thermal_relaxation(duration: float, t1: float, t2: float) -> KrausChannel:
    """Amplitude damping at rate 1/T1 followed by pure dephasing at 1/T2 - 1/(2 T1)."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if t1 <= 0 or t2 <= 0:
        raise ValueError("T1 and T2 must be positive")
    if t2 > 2 * t1 * (1 + 1e-12):
        raise ValueError(f"T2={t2} exceeds 2*T1={2 * t1}")
    gamma = -np.expm1(-duration / t1)
    pure_rate = 1 / t2 - 1 / (2 * t1)
    return amplitude_damping(gamma).compose(phase_damping(np.exp(-duration * max(pure_rate, 0.0))))


def pauli_transfer_matrix(channel: KrausChannel | np.ndarray) -> np.ndarray:
    """PTM ``R_ij = Tr[P_i L(P_j)] / d`` (a unitary matrix is accepted too)."""
    if not isinstance(channel, KrausChannel):
        channel = KrausChannel.from_unitary(channel)
    n = channel.n_qubits
    if n > 2:
        raise ValueError("only 1 and 2 qubit channels are supported")
    basis = pauli_basis(n)
    images = np.array([channel(p) for p in basis])
    r = np.einsum("iab,jba->ij", basis, images).real / 2**n
    return r


def average_gate_error(ptm: np.ndarray, n: int | None = None) -> float:
    """Average gate error ``d/(d+1) (1 - Tr R / d^2)`` of an error channel's PTM."""
    ptm = np.asarray(ptm, dtype=float)
    if ptm.ndim != 2 or ptm.shape[0] != ptm.shape[1]:
        raise ValueError("PTM must be square")
    if n is None:
        n = num_qubits(int(round(np.sqrt(ptm.shape[0]))))
    d = 2**n
    if ptm.shape[0] != d * d:
        raise ValueError(f"PTM shape {ptm.shape} does not match {n} qubits")
    return float(d / (d + 1) * (1 - np.trace(ptm) / d**2))


def gate_error(actual: KrausChannel | np.ndarray, ideal: np.ndarray) -> float:
    """Average gate error of ``actual`` relative to the ideal unitary."""
    if not isinstance(actual, KrausChannel):
        actual = KrausChannel.from_unitary(actual)
    err = actual.compose(KrausChannel.from_unitary(dagger(np.asarray(ideal))))
    return average_gate_error(pauli_transfer_matrix(err), err.n_qubits)


def pauli_coefficients(u: np.ndarray) -> dict[str, complex]:
    """Coefficients ``c_P`` in ``u = sum_P c_P P``."""
    n = num_qubits(u.shape[0])
    return {p: complex(np.trace(pauli(p) @ u) / 2**n) for p in pauli_labels(n)}


# -- noise ------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Per-qubit T1/T2 (seconds) and optional readout confusion matrices.

    ``confusion[q][i, j]`` is the probability of reading ``j`` when qubit
    ``q`` is in state ``i``; rows sum to one.
    """

    t1: tuple[float, ...]
    t2: tuple[float, ...]
    confusion: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        t1 = tuple(float(v) for v in np.atleast_1d(self.t1))
        t2 = tuple(float(v) for v in np.atleast_1d(self.t2))
        if len(t1) != len(t2):
            raise ValueError("t1 and t2 need one entry per qubit")
        for a, b in zip(t1, t2):
            if a <= 0 or b <= 0:
                raise ValueError("T1 and T2 must be positive")
            if b > 2 * a * (1 + 1e-12):
                raise ValueError(f"T2={b} exceeds 2*T1={2 * a}")
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)
        if self.confusion is not None:
            conf = tuple(np.asarray(c, dtype=float) for c in self.confusion)
            if len(conf) != len(t1):
                raise ValueError("need one confusion matrix per qubit")
            for c in conf:
                check_confusion(c)
            object.__setattr__(self, "confusion", conf)

    @property
    def n_qubits(self) -> int:
        return len(self.t1)

    @classmethod
    def uniform(cls, n: int, t1: float, t2: float, readout_error: float = 0.0) -> "NoiseModel":
        conf = None
        if readout_error:
            e = readout_error
            conf = tuple(np.array([[1 - e, e], [e, 1 - e]]) for _ in range(n))
        return cls((t1,) * n, (t2,) * n, conf)

    @classmethod
    def noiseless(cls, n: int) -> "NoiseModel":
        return cls((np.inf,) * n, (np.inf,) * n)

    def channel(self, duration: float, qubits: Sequence[int] | None = None) -> KrausChannel:
        qubits = range(self.n_qubits) if qubits is None else qubits
        chans = [_relaxation(duration, self.t1[q], self.t2[q]) for q in qubits]
        return reduce(KrausChannel.tensor, chans)


def _relaxation(duration: float, t1: float, t2: float) -> KrausChannel:
    if np.isinf(t1) and np.isinf(t2):
        return KrausChannel.identity(1)
    if np.isinf(t1):
        return phase_damping(np.exp(-duration / t2))
    return thermal_relaxation(duration, t1, t2)


def check_confusion(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (2, 2) or np.any(c < 0) or np.any(np.abs(c.sum(axis=1) - 1) > 1e-12):
        raise ValueError("confusion matrix must be 2x2 row-stochastic")
    return c


def apply_gate_noise(
    rho: np.ndarray, noise: NoiseModel, duration: float, qubits: Sequence[int] | None = None
) -> np.ndarray:
    """Apply T1/T2 relaxation for ``duration`` seconds to every qubit of ``rho``.

    ``qubits`` maps the register positions of ``rho`` onto entries of the
    noise model (defaults to ``0..n-1``).
    """
    if duration == 0:
        return np.array(rho, dtype=complex)
    n = num_qubits(np.asarray(rho).shape[0])
    qubits = list(range(n)) if qubits is None else list(qubits)
    if len(qubits) != n:
        raise ValueError("qubits must name one noise entry per register qubit")
    return noise.channel(duration, qubits)(rho)
