"""Standard, interleaved and purity randomized benchmarking.

Sequences are simulated exactly on density matrices.  Native gates come from
a gate set: :class:`IdealGateSet` applies ideal unitaries followed by
relaxation for each gate's duration, :class:`PulseGateSet` propagates a pulse
schedule for the whole sequence so that frame-dependent (off-resonant) errors
appear with the correct absolute timing.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .. import analysis
from ..dynamics import PropagationOptions, evolve, measure_populations
from ..pulse import FrameChange, Schedule
from ..qcore import NoiseModel, pauli, pauli_labels, purity_from_pauli_expectations
from ..seeding import derive_seed
from .clifford import NATIVE_1Q, VIRTUAL, Native, clifford_group, native_unitary

MODES = ("standard", "interleaved", "purity")
_Z_ANGLE = {"Z90": np.pi / 2, "Z-90": -np.pi / 2, "Z180": np.pi}


class RBFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class RBSpec:
    """Randomized benchmarking experiment.

    ``durations`` maps native gate names to seconds (gates not listed take no
    time); it and ``noise`` configure the default :class:`IdealGateSet`.
    ``interleaved`` names the gate interleaved after every Clifford in
    ``"interleaved"`` mode.  ``shots=None`` gives exact probabilities.
    """

    n_qubits: int
    lengths: tuple[int, ...]
    samples: int = 10
    seed: int = 0
    mode: str = "standard"
    interleaved: Native | None = None
    noise: NoiseModel | None = None
    durations: Mapping[str, float] = field(default_factory=lambda: {"CX": 300e-9})
    shots: int | None = None

    def __post_init__(self):
        if self.n_qubits not in (1, 2):
            raise ValueError("RB supports 1 or 2 qubits")
        lengths = tuple(int(m) for m in self.lengths)
        if len(lengths) < 3 or any(m < 0 for m in lengths) or any(
                b <= a for a, b in zip(lengths, lengths[1:])):
            raise ValueError("lengths must be at least 3 strictly increasing non-negative integers")
        object.__setattr__(self, "lengths", lengths)
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if (self.mode == "interleaved") != (self.interleaved is not None):
            raise ValueError("interleaved mode needs exactly one interleaved gate")
        if self.noise is not None and self.noise.n_qubits != self.n_qubits:
            raise ValueError("noise model size does not match n_qubits")


@dataclass
class RBResult:
    mode: str
    n_qubits: int
    lengths: np.ndarray
    values: np.ndarray
    per_sample: np.ndarray = field(repr=False)
    fit: analysis.DecayFit
    epc: float
    epc_err: float
    epg: float
    epg_err: float
    reference: "RBResult | None" = None
    warnings: list[str] = field(default_factory=list)

    def confidence_interval(self, z: float = 1.96, per: str = "epg") -> tuple[float, float]:
        v, e = (self.epg, self.epg_err) if per == "epg" else (self.epc, self.epc_err)
        return v - z * e, v + z * e

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "n_qubits": self.n_qubits,
            "lengths": self.lengths.tolist(),
            "values": self.values.tolist(),
            "fit": {"A": self.fit.A, "alpha": self.fit.alpha, "B": self.fit.B,
                    "alpha_err": self.fit.alpha_err, "residual": self.fit.residual},
            "epc": self.epc, "epc_err": self.epc_err,
            "epg": self.epg, "epg_err": self.epg_err,
            "warnings": list(self.warnings),
        }
        if self.reference is not None:
            out["reference"] = self.reference.to_dict()
        return out


# -- gate sets ----------------------------------------------------------------


def _super(u: np.ndarray) -> np.ndarray:
    """Row-major superoperator of ``rho -> u rho u^dag``."""
    return np.kron(u, u.conj())


class IdealGateSet:
    """Ideal native unitaries, each followed by relaxation for its duration.

    ``coherent_errors`` maps a gate name to a full-register unitary applied
    right after every instance of that gate (before relaxation).  ``extra``
    adds non-native gates by ideal unitary, keyed by ``(name, qubits)``.
    """

    def __init__(self, n_qubits: int, noise: NoiseModel | None = None,
                 durations: Mapping[str, float] | None = None,
                 coherent_errors: Mapping[str, np.ndarray] | None = None,
                 extra: Mapping[Native, np.ndarray] | None = None):
        self.n_qubits = n_qubits
        self.noise = noise
        self.durations = dict(durations or {})
        self.coherent_errors = dict(coherent_errors or {})
        self.extra = dict(extra or {})
        self.confusion = None if noise is None else noise.confusion
        self._gate_cache: dict = {}
        self._block_cache: dict = {}

    def ideal_unitary(self, gate: Native) -> np.ndarray:
        gate = (gate[0], tuple(gate[1]))
        if gate in self.extra:
            return np.asarray(self.extra[gate], dtype=complex)
        return native_unitary(gate, self.n_qubits)

    def _gate_super(self, gate: Native) -> np.ndarray:
        if gate not in self._gate_cache:
            s = _super(self.ideal_unitary(gate))
            if gate[0] in self.coherent_errors:
                s = _super(np.asarray(self.coherent_errors[gate[0]], dtype=complex)) @ s
            tau = self.durations.get(gate[0], 0.0)
            if self.noise is not None and tau > 0:
                s = sum(_super(k) for k in self.noise.channel(tau).ops) @ s
            self._gate_cache[gate] = s
        return self._gate_cache[gate]

    def _block_super(self, block: tuple[Native, ...]) -> np.ndarray:
        if block not in self._block_cache:
            d = 2**self.n_qubits
            s = np.eye(d * d, dtype=complex)
            for g in block:
                s = self._gate_super(g) @ s
            self._block_cache[block] = s
        return self._block_cache[block]

    def run(self, blocks: Sequence[Sequence[Native]], rho0: np.ndarray) -> np.ndarray:
        d = rho0.shape[0]
        v = np.asarray(rho0, dtype=complex).reshape(-1)
        for b in blocks:
            v = self._block_super(tuple((g[0], tuple(g[1])) for g in b)) @ v
        return v.reshape(d, d)


class PulseGateSet:
    """Native gates as pulse schedules on a dynamics model.

    ``gates`` maps ``(name, qubits)`` to a schedule starting at zero.
    Virtual Z rotations become frame changes on ``frame_channels[qubit]``:
    ``Z(theta)`` shifts the phase of later pulses on those channels by
    ``-theta``.  ``ideal`` gives the target unitary of non-native gates.
    Relaxation comes from ``model.noise``.
    """

    def __init__(self, model, gates: Mapping[Native, Schedule],
                 frame_channels: Mapping[int, Sequence[str]],
                 ideal: Mapping[Native, np.ndarray] | None = None,
                 options: PropagationOptions | None = None):
        self.model = model
        self.n_qubits = model.n_qubits
        self.gates = {(k[0], tuple(k[1])): v for k, v in gates.items()}
        self.frame_channels = {int(q): tuple(c) for q, c in frame_channels.items()}
        self.ideal = {(k[0], tuple(k[1])): np.asarray(v, dtype=complex) for k, v in (ideal or {}).items()}
        opts = options or PropagationOptions()
        self.options = PropagationOptions(opts.dt_max, opts.frame, opts.rwa, "density")
        self.confusion = None if model.noise is None else model.noise.confusion

    def ideal_unitary(self, gate: Native) -> np.ndarray:
        gate = (gate[0], tuple(gate[1]))
        if gate in self.ideal:
            return self.ideal[gate]
        return native_unitary(gate, self.n_qubits)

    def schedule(self, blocks: Sequence[Sequence[Native]]) -> Schedule:
        items = []
        t = 0.0
        for g in itertools.chain.from_iterable(blocks):
            name, qubits = g[0], tuple(g[1])
            if name in VIRTUAL:
                for ch in self.frame_channels[qubits[0]]:
                    items.append((t, FrameChange(ch, -_Z_ANGLE[name])))
                continue
            try:
                sched = self.gates[(name, qubits)]
            except KeyError:
                raise KeyError(f"no pulse implementation for {(name, qubits)}") from None
            items.extend((t + t0, i) for t0, i in sched.items)
            t += sched.duration
        chans = set(itertools.chain.from_iterable(self.frame_channels.values()))
        return Schedule(tuple(items), frozenset(chans))

    def run(self, blocks: Sequence[Sequence[Native]], rho0: np.ndarray) -> np.ndarray:
        rho, _ = evolve(self.model, self.schedule(blocks), rho0, self.options)
        return rho


# -- sequences ----------------------------------------------------------------


def _measure_basis_gates():
    """Native pulse whose Z readout measures each Pauli, with the sign it carries."""
    z = pauli("Z")
    out = {"Z": ((), 1)}
    for target in "XY":
        p = pauli(target)
        for sign in (1, -1):
            hit = next((name for name, u in NATIVE_1Q.items() if name not in VIRTUAL
                        and np.allclose(u.conj().T @ z @ u, sign * p)), None)
            if hit:
                out[target] = ((hit,), sign)
                break
    return out


_POST = _measure_basis_gates()


def clifford_sequence(n: int, length: int, rng: np.random.Generator,
                      interleaved: Native | None = None, interleaved_unitary: np.ndarray | None = None):
    """Native-gate blocks of one RB sequence including the final inverse."""
    group = clifford_group(n)
    d = 2**n
    u = np.eye(d, dtype=complex)
    blocks = []
    for _ in range(length):
        c = group.sample(rng)
        blocks.append(c.gates)
        u = c.unitary @ u
        if interleaved is not None:
            blocks.append((interleaved,))
            u = interleaved_unitary @ u
    blocks.append(group.inverse(group.lookup(u)).gates)
    return blocks


def _rho0(n):
    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1
    return rho


def _survival(gateset, blocks, n, shots, seed):
    rho = gateset.run(blocks, _rho0(n))
    return float(measure_populations(rho, confusion=gateset.confusion, shots=shots, seed=seed)[0])


def _sequence_purity(gateset, blocks, n, shots, seed_key, master, apply_confusion=True):
    settings = list(itertools.product("XYZ", repeat=n))
    sums = {p: 0.0 for p in pauli_labels(n)}
    counts = {p: 0 for p in pauli_labels(n)}
    conf = gateset.confusion if apply_confusion else None
    for s in settings:
        post = []
        signs = []
        for q, b in enumerate(s):
            names, sign = _POST[b]
            post.extend((g, (q,)) for g in names)
            signs.append(sign)
        rho = gateset.run(list(blocks) + [tuple(post)], _rho0(n))
        seed = None if shots is None else derive_seed(master, *seed_key, "".join(s))
        probs = measure_populations(rho, confusion=conf, shots=shots, seed=seed).reshape((2,) * n)
        for label in pauli_labels(n):
            if any(p != "I" and p != b for p, b in zip(label, s)):
                continue
            val = probs
            for q, p in enumerate(label):
                if p != "I":
                    shape = [1] * n
                    shape[q] = 2
                    val = val * (signs[q] * np.array([1.0, -1.0])).reshape(shape)
            sums[label] += float(val.sum())
            counts[label] += 1
    exps = {p: np.clip(sums[p] / counts[p], -1, 1) for p in sums}
    return purity_from_pauli_expectations(exps, n)


def _collect(spec: RBSpec, gateset, interleaved: Native | None, threads: int, purity: bool):
    n = spec.n_qubits
    u_int = None if interleaved is None else gateset.ideal_unitary(interleaved)
    tag = "interleaved" if interleaved is not None else ("purity" if purity else "standard")

    def job(m, s):
        rng = np.random.default_rng(derive_seed(spec.seed, "rb", n, m, s))
        blocks = clifford_sequence(n, m, rng, interleaved, u_int)
        if purity:
            return _sequence_purity(gateset, blocks, n, spec.shots, (tag, m, s), spec.seed)
        seed = None if spec.shots is None else derive_seed(spec.seed, "shots", tag, m, s)
        return _survival(gateset, blocks, n, spec.shots, seed)

    keys = [(m, s) for m in spec.lengths for s in range(spec.samples)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = dict(zip(keys, pool.map(lambda k: job(*k), keys)))
    else:
        vals = {k: job(*k) for k in keys}
    return np.array([[vals[(m, s)] for s in range(spec.samples)] for m in spec.lengths])


def _fit(lengths, means, power):
    if np.ptp(means) < 1e-12:
        return analysis.DecayFit(0.0, 1.0, float(means[0]), np.zeros((3, 3)), 0.0, power)
    try:
        return analysis.fit_decay(lengths, means, power=power)
    except (RuntimeError, ValueError) as exc:
        raise RBFitError(str(exc)) from exc


def _floor_warnings(fit, lengths):
    w = []
    if fit.alpha ** (fit.power * max(lengths)) < 1e-3 or abs(fit.A) < 0.05:
        w.append("sequence decays to the asymptote; alpha and B are nearly degenerate")
    if not np.isfinite(fit.alpha_err):
        w.append("decay constant uncertainty is undefined")
    return w


def _result(spec, mode, data, power, n2):
    d = 2**spec.n_qubits
    lengths = np.array(spec.lengths)
    means = data.mean(axis=1)
    fit = _fit(lengths, means, power)
    scale = (d - 1) / d
    epc = scale * (1 - fit.alpha)
    epc_err = scale * fit.alpha_err
    if mode == "purity":
        epg = scale * (1 - fit.alpha ** (1 / n2))
        epg_err = scale * fit.alpha ** (1 / n2 - 1) / n2 * fit.alpha_err
    else:
        epg, epg_err = epc / n2, epc_err / n2
    return RBResult(mode, spec.n_qubits, lengths, means, data, fit, float(epc), float(epc_err),
                    float(epg), float(epg_err), warnings=_floor_warnings(fit, lengths))


def _gates_per_clifford(n):
    return 1.5 if n == 2 else 1.0


def default_gateset(spec: RBSpec) -> IdealGateSet:
    return IdealGateSet(spec.n_qubits, spec.noise, spec.durations)


def run_rb(spec: RBSpec, gateset=None, threads: int = 1) -> RBResult:
    """Standard or interleaved RB.

    Standard mode: EPC ``(d-1)/d (1-alpha)``; EPG is EPC/1.5 for two qubits
    (average CX count per Clifford) and EPC for one qubit.  Interleaved mode
    also runs the reference sequences (same Clifford draws) and reports the
    interleaved gate's EPG ``(d-1)/d (1 - alpha_int/alpha_ref)``.
    """
    gateset = gateset or default_gateset(spec)
    if spec.mode == "purity":
        return run_purity_rb(spec, gateset, threads)
    n2 = _gates_per_clifford(spec.n_qubits)
    ref = _result(spec, "standard", _collect(spec, gateset, None, threads, False), 1, n2)
    if spec.mode == "standard":
        return ref
    res = _result(spec, "interleaved", _collect(spec, gateset, spec.interleaved, threads, False), 1, 1.0)
    d = 2**spec.n_qubits
    ratio = res.fit.alpha / ref.fit.alpha
    rel = np.hypot(res.fit.alpha_err / res.fit.alpha, ref.fit.alpha_err / ref.fit.alpha)
    res.epg = float((d - 1) / d * (1 - ratio))
    res.epg_err = float((d - 1) / d * ratio * rel)
    res.reference = ref
    res.warnings += [f"reference: {w}" for w in ref.warnings]
    return res


def run_purity_rb(spec: RBSpec, gateset=None, threads: int = 1) -> RBResult:
    """Purity RB: ``Tr[rho^2]`` from 3^n Pauli settings fit to ``A g^(2m) + B``.

    EPC ``(d-1)/d (1-g)``; EPG ``(d-1)/d (1 - g^(1/n2))`` with ``n2 = 1.5``
    CX per Clifford for two qubits and 1 for one qubit.
    """
    gateset = gateset or default_gateset(spec)
    data = _collect(spec, gateset, None, threads, True)
    return _result(spec, "purity", data, 2, _gates_per_clifford(spec.n_qubits))


def sequence_purities(spec: RBSpec, gateset=None, length: int | None = None) -> np.ndarray:
    """Exact per-sequence purities before readout error (diagnostic)."""
    gateset = gateset or default_gateset(spec)
    n = spec.n_qubits
    m = spec.lengths[-1] if length is None else length
    out = []
    for s in range(spec.samples):
        rng = np.random.default_rng(derive_seed(spec.seed, "rb", n, m, s))
        blocks = clifford_sequence(n, m, rng)
        out.append(_sequence_purity(gateset, blocks, n, None, ("diag", m, s), spec.seed,
                                    apply_confusion=False))
    return np.array(out)


def depolarizing_gateset(n: int, p: float) -> IdealGateSet:
    """Gate set whose every Clifford is followed by depolarizing noise of strength ``p``.

    Implemented by attaching the channel to a zero-cost marker so that it acts
    once per Clifford block regardless of its native length.
    """
    gs = _DepolarizingGateSet(n, p)
    return gs


class _DepolarizingGateSet(IdealGateSet):
    def __init__(self, n, p):
        super().__init__(n)
        d = 2**n
        self.p = p
        ident = np.eye(d * d, dtype=complex)
        # maximally mixing map on row-major vec: rho -> Tr(rho) I/d
        mix = np.outer(np.eye(d).reshape(-1), np.eye(d).reshape(-1)) / d
        self._dep = (1 - p) * ident + p * mix

    def _block_super(self, block):
        return self._dep @ super()._block_super(block)


__all__ = [
    "RBSpec", "RBResult", "RBFitError", "IdealGateSet", "PulseGateSet", "clifford_sequence",
    "run_rb", "run_purity_rb", "sequence_purities", "depolarizing_gateset", "default_gateset",
]
