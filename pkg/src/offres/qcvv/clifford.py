"""One- and two-qubit Clifford groups with native-gate decompositions.

Native gates are ``X90, X-90, Y90, Y-90`` pulses, virtual ``Z90, Z-90, Z180``
frame changes and ``CX`` (control first).  A native instruction is a tuple
``(name, qubits)``; sequences are listed in the order they are applied.

Elements are identified by their stabilizer tableau: the signed Pauli images of
``X_i`` and ``Z_i``.  The two-qubit group is stored as 20 right cosets of the
local group ``C1 x C1`` (576 elements); coset representatives use 0, 1, 2 or 3
CX gates in the proportions 1:9:9:1, giving an average of 1.5 CX per element.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..qcore import kron, pauli, pauli_basis, pauli_labels, rotation

Native = tuple[str, tuple[int, ...]]

CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

NATIVE_1Q = {
    "X90": rotation("X", np.pi / 2),
    "X-90": rotation("X", -np.pi / 2),
    "Y90": rotation("Y", np.pi / 2),
    "Y-90": rotation("Y", -np.pi / 2),
    "Z90": rotation("Z", np.pi / 2),
    "Z-90": rotation("Z", -np.pi / 2),
    "Z180": rotation("Z", np.pi),
}
VIRTUAL = frozenset({"Z90", "Z-90", "Z180"})


def native_unitary(gate: Native, n: int) -> np.ndarray:
    name, qubits = gate
    if name == "CX":
        if n != 2 or tuple(qubits) not in ((0, 1), (1, 0)):
            raise ValueError(f"bad CX qubits {qubits}")
        if tuple(qubits) == (0, 1):
            return CX
        h = kron(_H, _H)
        return h @ CX @ h
    u = NATIVE_1Q[name]
    if n == 1:
        return u
    return kron(u, np.eye(2)) if qubits[0] == 0 else kron(np.eye(2), u)


def sequence_unitary(gates, n: int) -> np.ndarray:
    u = np.eye(2**n, dtype=complex)
    for g in gates:
        u = native_unitary(g, n) @ u
    return u


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@lru_cache(maxsize=None)
def _gens(n: int):
    labels = pauli_labels(n)
    basis = pauli_basis(n)
    gens = []
    for q in range(n):
        for p in "XZ":
            gens.append(pauli("".join(p if k == q else "I" for k in range(n))))
    return labels, basis, np.array(gens)


def tableau(u: np.ndarray) -> tuple[tuple[str, int], ...]:
    """Signed Pauli images ``U g U^dag`` of ``X_0, Z_0, X_1, Z_1, ...``.

    Raises ``ValueError`` if ``u`` is not Clifford.
    """
    n = int(np.log2(u.shape[0]))
    labels, basis, gens = _gens(n)
    imgs = np.einsum("ij,gjk,lk->gil", u, gens, u.conj())
    coef = np.einsum("pij,gji->gp", basis, imgs).real / 2**n
    out = []
    for row in coef:
        k = int(np.argmax(np.abs(row)))
        if abs(abs(row[k]) - 1) > 1e-6:
            raise ValueError("not a Clifford unitary")
        out.append((labels[k], 1 if row[k] > 0 else -1))
    return tuple(out)


def symplectic_matrix(tab) -> np.ndarray:
    """Binary ``2n x 2n`` matrix of ``(x|z)`` bits; rows are images of X_i then Z_i."""
    n = len(tab) // 2
    m = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    rows = [tab[2 * q] for q in range(n)] + [tab[2 * q + 1] for q in range(n)]
    for r, (label, _) in enumerate(rows):
        for q, p in enumerate(label):
            m[r, q] = p in "XY"
            m[r, n + q] = p in "ZY"
    return m


def is_symplectic(m: np.ndarray) -> bool:
    n = m.shape[0] // 2
    omega = np.block([[np.zeros((n, n)), np.eye(n)], [np.eye(n), np.zeros((n, n))]]).astype(int)
    return bool(np.all((m.astype(int) @ omega @ m.T.astype(int)) % 2 == omega))


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    ov = np.trace(a.conj().T @ b)
    if abs(ov) < 1e-12:
        return False
    return np.allclose(a * (ov / abs(ov)), b, atol=tol)


@dataclass(frozen=True)
class CliffordElement:
    """Clifford group element: tableau, unitary and native decomposition."""

    n: int
    index: int
    tableau: tuple[tuple[str, int], ...]
    unitary: np.ndarray
    gates: tuple[Native, ...]

    @property
    def cx_count(self) -> int:
        return sum(g[0] == "CX" for g in self.gates)

    @property
    def pulse_count(self) -> int:
        return sum(g[0] not in VIRTUAL for g in self.gates)


class CliffordGroup:
    """Enumerated Clifford group on ``n`` qubits with lookup by tableau."""

    def __init__(self, n: int):
        if n not in (1, 2):
            raise ValueError("only 1 and 2 qubit Clifford groups are supported")
        self.n = n
        c1 = _single_qubit_table()
        if n == 1:
            self._elems = [(u, tuple((g, (0,)) for g in seq)) for u, seq in c1]
        else:
            self._elems = _two_qubit_table(c1)
        self._index = {tableau(u): i for i, (u, _) in enumerate(self._elems)}
        if len(self._index) != len(self._elems):
            raise RuntimeError("duplicate Clifford elements")

    def __len__(self) -> int:
        return len(self._elems)

    def __getitem__(self, i: int) -> CliffordElement:
        u, gates = self._elems[i]
        return CliffordElement(self.n, i, tableau(u), u, gates)

    def index_of(self, u: np.ndarray) -> int:
        return self._index[tableau(u)]

    def lookup(self, u: np.ndarray) -> CliffordElement:
        return self[self.index_of(u)]

    def identity(self) -> CliffordElement:
        return self.lookup(np.eye(2**self.n))

    def sample(self, rng: np.random.Generator) -> CliffordElement:
        return self[int(rng.integers(len(self)))]

    def inverse(self, c: CliffordElement) -> CliffordElement:
        return self.lookup(c.unitary.conj().T)

    def compose(self, *elems: CliffordElement) -> CliffordElement:
        """Element equal to applying ``elems`` in order."""
        u = np.eye(2**self.n, dtype=complex)
        for e in elems:
            u = e.unitary @ u
        return self.lookup(u)


@lru_cache(maxsize=None)
def clifford_group(n: int) -> CliffordGroup:
    return CliffordGroup(n)


def sample_clifford(n: int, rng: np.random.Generator) -> CliffordElement:
    """Uniformly random element of the ``n``-qubit Clifford group."""
    return clifford_group(n).sample(rng)


def decompose_clifford(c: CliffordElement) -> list[Native]:
    return list(c.gates)


@lru_cache(maxsize=None)
def _single_qubit_table():
    """All 24 elements as ``(unitary, gate names)`` with fewest pulses.

    Dijkstra over the Cayley graph: pulses cost one, virtual Z gates cost
    nothing except as a tie-breaker on sequence length.
    """
    start = np.eye(2, dtype=complex)
    best = {tableau(start): (0, 0)}
    found = {}
    heap = [(0, 0, 0, start, ())]
    counter = itertools.count(1)
    while heap:
        pulses, length, _, u, seq = heapq.heappop(heap)
        key = tableau(u)
        if key in found:
            continue
        found[key] = (u, seq)
        for name, g in NATIVE_1Q.items():
            v = g @ u
            k = tableau(v)
            cost = (pulses + (name not in VIRTUAL), length + 1)
            if k not in found and cost < best.get(k, (1 << 30, 0)):
                best[k] = cost
                heapq.heappush(heap, (*cost, next(counter), v, seq + (name,)))
    if len(found) != 24:
        raise RuntimeError("single-qubit Clifford enumeration failed")
    return tuple(found[k] for k in sorted(found, key=lambda k: (best[k], k)))


def _local(c1, a: int, b: int):
    ua, sa = c1[a]
    ub, sb = c1[b]
    gates = tuple((g, (0,)) for g in sa) + tuple((g, (1,)) for g in sb)
    return kron(ua, ub), gates


def _two_qubit_table(c1):
    """Coset representatives by CX count, then the full group as ``K r``."""
    locals_ = [_local(c1, a, b) for a in range(24) for b in range(24)]
    seen: set = set()
    reps = []

    def add(u, gates):
        if tableau(u) in seen:
            return False
        seen.update(tableau(lu @ u) for lu, _ in locals_)
        reps.append((u, gates))
        return True

    cx = (CX, (("CX", (0, 1)),))
    add(np.eye(4, dtype=complex), ())
    # one CX: CX (a x b)
    for lu, lg in locals_:
        if add(cx[0] @ lu, lg + cx[1]) and len(reps) == 10:
            break
    # two CX: CX (m) CX (a x b)
    order = sorted(range(len(locals_)), key=lambda i: (max(divmod(i, 24)), i))
    for i, (mu, mg) in itertools.product(order, locals_):
        lu, lg = locals_[i]
        if add(cx[0] @ mu @ cx[0] @ lu, lg + cx[1] + mg + cx[1]) and len(reps) == 19:
            break
    # SWAP class
    h, hg = _local(c1, _index_1q(c1, _H), _index_1q(c1, _H))
    add(cx[0] @ h @ cx[0] @ h @ cx[0], cx[1] + hg + cx[1] + hg + cx[1])
    if len(reps) != 20:
        raise RuntimeError("two-qubit coset search failed")
    return [(lu @ ru, rg + lg) for ru, rg in reps for lu, lg in locals_]


def _index_1q(c1, u) -> int:
    key = tableau(u)
    return next(i for i, (v, _) in enumerate(c1) if tableau(v) == key)
