"""Driven qubit models, rotating frames and piecewise-constant propagation.

Every model is written in its *native* frame, the frame in which all
drive terms are stationary: the drive frame for a single Stark/Rabi drive,
the target frame for cross resonance and the driven-qubit frame for the
spectator model.  Other frames are reached with :func:`change_frame`.

A channel drive with complex amplitude ``c(t)`` contributes
``(Re c * Xop + Im c * Yop) / 2``; ``c(t) = amp * env(t - t0) *
exp(i (phase - detuning * t))`` with absolute time ``t`` so that detuned
channels keep a continuous frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .qcore import (
    X,
    Y,
    Z,
    NoiseModel,
    check_confusion,
    dagger,
    expm_hermitian,
    kron,
    num_qubits,
    pauli,
)
from .pulse import Pulse, Schedule

__all__ = [
    "DriveChannel",
    "SingleQubitDriveModel",
    "CrossResonanceModel",
    "SpectatorModel",
    "NoiseModel",
    "PropagationOptions",
    "propagate",
    "evolve",
    "change_frame",
    "frame_rotation",
    "rwa_validation",
    "measure_populations",
    "excited_population",
    "mhz",
    "ns",
    "us",
]

TWO_PI = 2 * np.pi
LOCAL_ERROR_TOL = 1e-6
PHASE_STEP = 0.05


def mhz(f):
    """Linear MHz to angular rad/s."""
    return TWO_PI * 1e6 * np.asarray(f, dtype=float) if np.ndim(f) else TWO_PI * 1e6 * float(f)


def ns(t):
    return 1e-9 * t


def us(t):
    return 1e-6 * t


@dataclass(frozen=True)
class DriveChannel:
    """Operators a channel drives, its frame offset and phase generator.

    The generator ``G`` (diagonal) satisfies
    ``exp(-i a G) Xop exp(i a G) = cos(a) Xop + sin(a) Yop``.
    """

    x_op: np.ndarray
    y_op: np.ndarray
    detuning: float
    generator: np.ndarray


class _Model:
    n_qubits: int
    rwa: bool
    carrier: float | None
    noise: NoiseModel | None

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def static_hamiltonian(self) -> np.ndarray:
        raise NotImplementedError

    def channels(self) -> dict[str, DriveChannel]:
        raise NotImplementedError

    def resonant_rates(self) -> np.ndarray:
        """Per-qubit rotation rate of each qubit's resonant frame, relative to native."""
        raise NotImplementedError

    def phase_generator(self) -> np.ndarray:
        """Generator of a common frame change on every drive channel."""
        return next(iter(self.channels().values())).generator


@dataclass(frozen=True)
class SingleQubitDriveModel(_Model):
    """``(detuning/2) Z`` plus drives ``(Omega/2)(cos X + sin Y)``.

    ``detuning`` is ``w_frame - w_qubit``.  ``channel_detunings`` maps channel
    names to their frame offsets from the native frame (two drives at
    different frequencies give the two-tone toy model).
    """

    detuning: float = 0.0
    channel_detunings: Mapping[str, float] = field(default_factory=lambda: {"d0": 0.0})
    rwa: bool = True
    carrier: float | None = None
    noise: NoiseModel | None = None

    n_qubits = 1

    def static_hamiltonian(self):
        return 0.5 * self.detuning * Z

    def channels(self):
        return {ch: DriveChannel(X, Y, float(d), 0.5 * Z) for ch, d in self.channel_detunings.items()}

    def resonant_rates(self):
        return np.array([-self.detuning])


_TWO_Q = {p: pauli(p) for p in ("XI", "YI", "ZX", "ZY", "IX", "IY", "ZI", "IZ", "ZZ")}


@dataclass(frozen=True)
class CrossResonanceModel(_Model):
    """Cross-resonance pair in the frame rotating at the target frequency.

    ``H = -(delta/2) ZI + zeta ZZ + (Omega/2)[cos (XI + mu ZX + nu IX) +
    sin (YI + mu ZY + nu IY)]`` with ``delta = w_target - w_control``.
    Channels: ``u0`` (CR tone), ``d1`` (target drive), ``d0`` (control drive
    at the control frequency, offset +delta from the native frame).
    """

    delta: float
    mu: float
    nu: float = 0.0
    zeta: float = 0.0
    rwa: bool = True
    carrier: float | None = None
    noise: NoiseModel | None = None

    n_qubits = 2

    def static_hamiltonian(self):
        return -0.5 * self.delta * _TWO_Q["ZI"] + self.zeta * _TWO_Q["ZZ"]

    def channels(self):
        t = _TWO_Q
        g = 0.5 * (t["ZI"] + t["IZ"])
        return {
            "u0": DriveChannel(t["XI"] + self.mu * t["ZX"] + self.nu * t["IX"],
                               t["YI"] + self.mu * t["ZY"] + self.nu * t["IY"], 0.0, g),
            "d1": DriveChannel(t["IX"], t["IY"], 0.0, g),
            "d0": DriveChannel(t["XI"], t["YI"], self.delta, g),
        }

    def resonant_rates(self):
        # the control precesses as exp(+i delta t Z/2) under -(delta/2) ZI
        return np.array([self.delta, 0.0])


@dataclass(frozen=True)
class SpectatorModel(_Model):
    """Driven qubit 0 with spectator qubit 1, both in the drive frame.

    ``H = (Omega/2)(XI + mu ZX + nu IX) - (delta/2) IZ`` with
    ``delta = w_spectator - w_driven``.  Channels: ``d0`` (driven qubit,
    carrying the crosstalk terms) and ``d1`` (spectator's own drive).
    """

    delta: float
    mu: float = 0.0
    nu: float = 0.0
    rwa: bool = True
    carrier: float | None = None
    noise: NoiseModel | None = None

    n_qubits = 2

    def static_hamiltonian(self):
        return -0.5 * self.delta * _TWO_Q["IZ"]

    def channels(self):
        t = _TWO_Q
        g = 0.5 * (t["ZI"] + t["IZ"])
        return {
            "d0": DriveChannel(t["XI"] + self.mu * t["ZX"] + self.nu * t["IX"],
                               t["YI"] + self.mu * t["ZY"] + self.nu * t["IY"], 0.0, g),
            "d1": DriveChannel(t["IX"], t["IY"], self.delta, g),
        }

    def resonant_rates(self):
        return np.array([0.0, self.delta])

    def swapped(self) -> "SpectatorModel":
        """Same pair with driven and spectator roles exchanged (``delta -> -delta``)."""
        return SpectatorModel(-self.delta, self.mu, self.nu, self.rwa, self.carrier, self.noise)


@dataclass(frozen=True)
class PropagationOptions:
    """Integrator settings.

    ``frame`` is ``"native"`` (alias ``"drive"``), ``"resonant"`` or an array
    of per-qubit rotation rates relative to the native frame.
    """

    dt_max: float | None = None
    frame: str | Sequence[float] = "native"
    rwa: bool | None = None
    mode: str = "unitary"

    def __post_init__(self):
        if self.dt_max is not None and not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.mode not in ("unitary", "density"):
            raise ValueError(f"unknown mode {self.mode!r}")


# -- frames -----------------------------------------------------------------


def _frame_rates(model, frame) -> np.ndarray:
    if isinstance(frame, str):
        if frame in ("native", "drive"):
            return np.zeros(model.n_qubits)
        if frame == "resonant":
            return np.asarray(model.resonant_rates(), dtype=float)
        raise ValueError(f"unknown frame {frame!r}")
    return _rates_from(frame, model.n_qubits)


def _rates_from(frame, n: int | None = None) -> np.ndarray:
    f = np.asarray(frame)
    if f.ndim == 2:
        if np.max(np.abs(f - np.diag(np.diag(f)))) > 1e-12:
            raise ValueError("frame generator must be diagonal")
        nq = num_qubits(f.shape[0])
        # G = -sum_q r_q Z_q / 2 evaluated on |1> of each qubit
        diag = np.real(np.diag(f))
        rates = np.array([diag[0] - diag[1 << (nq - 1 - q)] for q in range(nq)])
        return -rates
    f = np.atleast_1d(f).astype(float)
    if n is not None and f.shape != (n,):
        raise ValueError(f"expected {n} frame rates")
    return f


def frame_rotation(rates, t: float) -> np.ndarray:
    """Diagonal ``exp(-i sum_q r_q t Z_q / 2)`` taking native states to a frame with ``rates``."""
    rates = np.atleast_1d(rates)
    return kron(*(np.diag(np.exp([-0.5j * r * t, 0.5j * r * t])) for r in rates))


def change_frame(u: np.ndarray, from_frame, to_frame, t_start: float, t_end: float) -> np.ndarray:
    """Re-express a propagator between two diagonal rotating frames.

    Frames are per-qubit rates (rad/s, relative to a common reference) or
    diagonal generators ``G`` with states mapped by ``exp(iGt)``.
    """
    u = np.asarray(u, dtype=complex)
    n = num_qubits(u.shape[0])
    a = _rates_from(from_frame, n)
    b = _rates_from(to_frame, n)
    rel = b - a
    r_end = frame_rotation(rel, t_end)
    r_start = frame_rotation(rel, t_start)
    return r_end @ u @ dagger(r_start)


# -- propagation --------------------------------------------------------------


def _drive_term(ch: DriveChannel, c):
    c = np.asarray(c)
    return 0.5 * (np.real(c)[..., None, None] * ch.x_op + np.imag(c)[..., None, None] * ch.y_op)


@dataclass
class _Active:
    pulse: Pulse
    t0: float
    phase: float


def _amplitudes(act: _Active, ch: DriveChannel, t):
    p = act.pulse
    det = ch.detuning + p.detuning
    return p.amp * p.envelope(t - act.t0) * np.exp(1j * (act.phase - det * t))


def _hamiltonians(model, chans, actives, t, rwa):
    h = np.broadcast_to(model.static_hamiltonian(), (len(t), model.dim, model.dim)).copy()
    for act in actives:
        ch = chans[act.pulse.channel]
        c = _amplitudes(act, ch, t)
        h += _drive_term(ch, c)
        if not rwa:
            h += _drive_term(ch, np.conj(c) * np.exp(2j * model.carrier * t))
    return h


def _ordered_product(us: np.ndarray) -> np.ndarray:
    """``us[-1] @ ... @ us[0]`` by pairwise reduction."""
    while len(us) > 1:
        if len(us) % 2:
            tail = us[-1:]
            us = us[:-1]
        else:
            tail = None
        us = us[1::2] @ us[0::2]
        if tail is not None:
            us = np.concatenate([us, tail])
    return us[0]


def _spread(h: np.ndarray) -> float:
    w = np.linalg.eigvalsh(h)
    return float(np.max(w[..., -1] - w[..., 0]))


def _step_count(model, chans, actives, t0, t1, dt_max, rwa) -> int:
    span = t1 - t0
    probe = t0 + span * (np.arange(33) + 0.5) / 33
    hs = _hamiltonians(model, chans, actives, probe, rwa)
    omega = _spread(hs)
    if not rwa:
        omega = max(omega, 2 * abs(model.carrier))
    dt_auto = PHASE_STEP / omega if omega > 0 else span
    # local error ~ dt^3 ||[H, dH/dt]|| / 12
    eps = span * 1e-4
    dh = (_hamiltonians(model, chans, actives, probe + eps, rwa)
          - _hamiltonians(model, chans, actives, probe - eps, rwa)) / (2 * eps)
    comm = float(np.max(np.linalg.norm(hs @ dh - dh @ hs, ord=2, axis=(1, 2))))
    if comm > 0:
        dt_auto = min(dt_auto, 0.5 * (12 * LOCAL_ERROR_TOL / comm) ** (1 / 3))
    dt = dt_auto if dt_max is None else dt_max
    if comm * dt**3 / 12 > LOCAL_ERROR_TOL:
        raise ValueError(
            f"time step {dt:.3e}s too coarse: estimated local error {comm * dt**3 / 12:.2e}"
        )
    return max(1, int(math.ceil(span / dt - 1e-9)))


def _step_unitaries(model, chans, actives, t0, t1, n, rwa):
    dt = (t1 - t0) / n
    mids = t0 + dt * (np.arange(n) + 0.5)
    return expm_hermitian(_hamiltonians(model, chans, actives, mids, rwa), dt)


def _conjugate_phase(u, generator, theta):
    g = np.real(np.diag(generator))
    return u * np.exp(-1j * theta * (g[:, None] - g[None, :]))


def _conjugate_super(s, generator, theta):
    # row-major vec: vec(V rho V^dag) = (V kron conj(V)) vec(rho), V diagonal
    g = np.real(np.diag(generator))
    ph = np.exp(-1j * theta * (g[:, None] - g[None, :])).reshape(-1)
    return s * ph[:, None] * np.conj(ph)[None, :]


_KEY_DIGITS = 12


class _Engine:
    def __init__(self, model, options: PropagationOptions):
        self.model = model
        self.options = options
        self.rwa = model.rwa if options.rwa is None else options.rwa
        if not self.rwa and model.carrier is None:
            raise ValueError("non-RWA propagation needs the model's carrier frequency")
        self.chans = model.channels()
        self.h0 = model.static_hamiltonian()
        self.noise = model.noise if options.mode == "density" else None
        self._cache: dict = {}
        g0 = next(iter(self.chans.values())).generator
        self.shared_generator = g0 if all(
            np.allclose(c.generator, g0) for c in self.chans.values()) else None
        self.cacheable = self.rwa and self.shared_generator is not None and np.allclose(
            self.h0 @ g0, g0 @ self.h0)

    def static(self, dt):
        key = ("static", round(dt, 24))
        if key not in self._cache:
            self._cache[key] = expm_hermitian(self.h0, dt)
        return self._cache[key]

    def block_key(self, actives, a, b):
        """Canonical description of an interval up to a common phase offset."""
        parts = []
        ref = None
        for act in sorted(actives, key=lambda s: (s.pulse.channel, s.t0)):
            p = act.pulse
            det = self.chans[p.channel].detuning + p.detuning
            psi = act.phase - det * a
            if ref is None:
                ref = psi
            rel = float(np.mod(psi - ref, 2 * np.pi))
            parts.append((p.channel, p.envelope, p.amp, round(det, 3), round(act.t0 - a, 16),
                          round(rel, _KEY_DIGITS)))
        return (round(b - a, 16), tuple(parts)), ref

    def block(self, actives, a, b, density: bool):
        key, ref = self.block_key(actives, a, b)
        key = ("density" if density else "unitary",) + key
        if key not in self._cache:
            shifted = [_Active(s.pulse, s.t0 - a, s.phase - ref - (self.chans[s.pulse.channel].detuning
                                                                     + s.pulse.detuning) * a)
                       for s in actives]
            span = b - a
            if density:
                d = self.model.dim
                basis = np.eye(d * d, dtype=complex).reshape(d * d, d, d)
                out = _advance_steps(self, basis, shifted, 0.0, span, "density")
                self._cache[key] = out.reshape(d * d, d * d).T
            else:
                self._cache[key] = _ordered_product(self.interval_steps(shifted, 0.0, span))
        if density:
            return _conjugate_super(self._cache[key], self.shared_generator, ref)
        return _conjugate_phase(self._cache[key], self.shared_generator, ref)

    def interval_steps(self, actives, t0, t1):
        n = _step_count(self.model, self.chans, actives, t0, t1, self.options.dt_max, self.rwa)
        return _step_unitaries(self.model, self.chans, actives, t0, t1, n, self.rwa)


_ENGINES: dict = {}
_MAX_BLOCKS = 50000


def _engine(model, options) -> _Engine:
    """Engine reused across calls with the same model object and options."""
    key = (id(model), options)
    try:
        hit = _ENGINES.get(key)
    except TypeError:  # unhashable frame specification
        return _Engine(model, options)
    if hit is not None and hit[0] is model:
        eng = hit[1]
        if len(eng._cache) > _MAX_BLOCKS:
            eng._cache.clear()
        return eng
    if len(_ENGINES) >= 16:
        _ENGINES.clear()
    eng = _Engine(model, options)
    _ENGINES[key] = (model, eng)
    return eng


def _breakpoints(schedule: Schedule, checkpoints) -> np.ndarray:
    pts = {0.0, schedule.duration}
    for t0, instr in schedule.items:
        pts.add(t0)
        pts.add(t0 + instr.duration)
    for c in checkpoints:
        pts.add(float(c))
    pts = np.array(sorted(pts))
    # merge breakpoints closer than float noise
    keep = np.concatenate([[True], np.diff(pts) > 1e-18])
    return pts[keep]


def _apply(state, u, kind):
    if kind == "density":
        return u @ state @ dagger(u)
    return u @ state


def _apply_super(s, rho):
    d = rho.shape[-1]
    flat = rho.reshape(rho.shape[:-2] + (d * d,))
    return np.einsum("ij,...j->...i", s, flat).reshape(rho.shape)


def evolve(model, schedule: Schedule, state, options: PropagationOptions | None = None,
           checkpoints: Sequence[float] = ()):
    """Evolve ``state`` through ``schedule``; returns final state and checkpoint states.

    ``state`` is a vector or a matrix in unitary mode (a matrix is treated as
    an operator to left-multiply, e.g. the identity for a propagator) and a
    density matrix (or stack of them) in density mode.  States stay in the
    model's native frame.
    """
    options = options or PropagationOptions()
    unknown = set(p.channel for _, p in schedule.pulses()) - set(model.channels())
    if unknown:
        raise KeyError(f"schedule channels {sorted(unknown)} not bound to the model")
    eng = _engine(model, options)
    kind = "density" if options.mode == "density" else "unitary"
    state = np.array(state, dtype=complex)
    bps = _breakpoints(schedule, checkpoints)
    ckpts = sorted(set(float(c) for c in checkpoints))
    saved = {}
    acc: dict[str, float] = {}
    pulses = schedule.pulses()
    fcs = schedule.frame_changes()
    fc_idx = p_idx = ck_idx = 0
    started: list[_Active] = []
    while ck_idx < len(ckpts) and ckpts[ck_idx] <= 0:
        saved[ckpts[ck_idx]] = state.copy()
        ck_idx += 1
    for a, b in zip(bps[:-1], bps[1:]):
        while fc_idx < len(fcs) and fcs[fc_idx][0] <= a + 1e-18:
            fc = fcs[fc_idx][1]
            acc[fc.channel] = acc.get(fc.channel, 0.0) + fc.delta_phase
            fc_idx += 1
        while p_idx < len(pulses) and pulses[p_idx][0] <= a + 1e-18:
            t0, p = pulses[p_idx]
            started.append(_Active(p, t0, p.phase + acc.get(p.channel, 0.0)))
            p_idx += 1
        started = [s for s in started if s.t0 + s.pulse.duration > a + 1e-18]
        actives = [s for s in started if s.t0 < b - 1e-18]
        state = _advance(eng, state, actives, a, b, kind)
        while ck_idx < len(ckpts) and ckpts[ck_idx] <= b + 1e-15:
            saved[ckpts[ck_idx]] = state.copy()
            ck_idx += 1
    while ck_idx < len(ckpts):
        saved[ckpts[ck_idx]] = state.copy()
        ck_idx += 1
    return state, [saved[float(c)] for c in checkpoints]


def _advance(eng: _Engine, state, actives, a, b, kind):
    span = b - a
    if not actives and eng.rwa:
        state = _apply(state, eng.static(span), kind)
        return _noise(eng, state, span)
    if eng.cacheable:
        if kind == "unitary":
            return eng.block(actives, a, b, False) @ state
        if eng.noise is None:
            return _apply(state, eng.block(actives, a, b, False), kind)
        return _apply_super(eng.block(actives, a, b, True), state)
    return _advance_steps(eng, state, actives, a, b, kind)


def _advance_steps(eng, state, actives, a, b, kind):
    us = eng.interval_steps(actives, a, b)
    if kind == "unitary":
        return _ordered_product(us) @ state
    if eng.noise is None:
        return _apply(state, _ordered_product(us), kind)
    dt = (b - a) / len(us)
    chan = eng.noise.channel(dt)
    for u in us:
        state = _apply(state, u, kind)
        state = sum(k @ state @ dagger(k) for k in chan.ops)
    return state


def _noise(eng, rho, dt):
    if eng.noise is None:
        return rho
    chan = eng.noise.channel(dt)
    return sum(k @ rho @ dagger(k) for k in chan.ops)


def propagate(model, schedule: Schedule, options: PropagationOptions | None = None, rho0=None):
    """Propagate a schedule.

    Unitary mode returns the propagator in ``options.frame``.  Density mode
    returns the final density matrix for ``rho0`` (or, without ``rho0``, the
    superoperator ``S`` acting on column-stacked ``vec(rho)``).
    """
    options = options or PropagationOptions()
    rates = _frame_rates(model, options.frame)
    t_end = schedule.duration
    rot = frame_rotation(rates, t_end)
    d = model.dim
    if options.mode == "unitary":
        u, _ = evolve(model, schedule, np.eye(d, dtype=complex), options)
        return rot @ u
    if rho0 is not None:
        rho, _ = evolve(model, schedule, rho0, options)
        return rot @ rho @ dagger(rot)
    basis = np.zeros((d * d, d, d), dtype=complex)
    for k in range(d * d):
        basis[k].flat[k] = 1.0
    # basis[k] has its single 1 at row k // d, col k % d; vec is column stacking
    out, _ = evolve(model, schedule, basis, options)
    out = rot @ out @ dagger(rot)
    s = np.zeros((d * d, d * d), dtype=complex)
    for k in range(d * d):
        i, j = divmod(k, d)
        s[:, j * d + i] = out[k].reshape(-1, order="F")
    return s


def rwa_validation(model, schedule: Schedule, max_steps: int = 2_000_000) -> float:
    """Spectral-norm distance between RWA and full (counter-rotating) propagators."""
    if model.carrier is None:
        raise ValueError("model needs a carrier frequency for the non-RWA comparison")
    steps = schedule.duration * 2 * abs(model.carrier) / PHASE_STEP
    if steps > max_steps:
        raise ValueError(f"schedule needs ~{steps:.0f} steps, above the cap of {max_steps}")
    u_rwa = propagate(model, schedule, PropagationOptions(rwa=True))
    u_full = propagate(model, schedule, PropagationOptions(rwa=False))
    return float(np.linalg.norm(u_rwa - u_full, ord=2))


# -- measurement --------------------------------------------------------------


def _probabilities(state) -> np.ndarray:
    state = np.asarray(state)
    if state.ndim == 1:
        return np.abs(state) ** 2
    return np.real(np.diag(state))


def measure_populations(state, qubits: Sequence[int] | None = None, confusion=None,
                        shots: int | None = None, seed: int | None = None) -> np.ndarray:
    """Probabilities of each bitstring of ``qubits`` (first qubit most significant).

    ``confusion`` is one 2x2 row-stochastic matrix per measured qubit (or a
    single matrix used for all).  With ``shots`` the result is a sampled
    frequency vector using a seeded generator.
    """
    p = _probabilities(state)
    n = num_qubits(p.shape[0])
    qubits = list(range(n)) if qubits is None else list(qubits)
    p = np.clip(p, 0.0, None).reshape((2,) * n)
    keep = tuple(q for q in range(n) if q not in qubits)
    marg = p.sum(axis=keep) if keep else p
    order = sorted(qubits)
    marg = np.transpose(marg, [order.index(q) for q in qubits]) if len(qubits) > 1 else marg
    if confusion is not None:
        mats = confusion if isinstance(confusion, (list, tuple)) else [confusion] * len(qubits)
        if len(mats) != len(qubits):
            raise ValueError("need one confusion matrix per measured qubit")
        for ax, m in enumerate(mats):
            m = check_confusion(m)
            marg = np.moveaxis(np.tensordot(marg, m, axes=([ax], [0])), -1, ax)
    probs = marg.reshape(-1)
    probs = probs / probs.sum()
    if shots is not None:
        rng = np.random.default_rng(seed)
        probs = rng.multinomial(shots, probs) / shots
    return probs


def excited_population(state, qubit: int = 0, confusion=None) -> float:
    return float(measure_populations(state, [qubit], confusion)[1])
