"""Pulse envelopes, drive instructions and time-ordered schedules.

Envelopes are continuous functions of time measured from the pulse start;
they are sampled by the propagator rather than rasterized.  Amplitudes are
angular frequencies (rad/s) carried by :class:`Pulse`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Union

import numpy as np


@dataclass(frozen=True)
class Square:
    duration: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t <= self.duration), 1.0, 0.0)

    def derivative(self, t):
        raise ValueError("square envelope has no ordinary derivative")


def _gauss(t, center, sigma):
    return np.exp(-0.5 * ((t - center) / sigma) ** 2)


@dataclass(frozen=True)
class Gaussian:
    """Baseline-subtracted Gaussian, zero at both endpoints, unit peak."""

    sigma: float
    duration: float | None = None

    def __post_init__(self):
        if self.duration is None:
            object.__setattr__(self, "duration", 4 * self.sigma)

    def _baseline(self):
        return float(_gauss(0.0, self.duration / 2, self.sigma))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        b = self._baseline()
        v = (_gauss(t, self.duration / 2, self.sigma) - b) / (1 - b)
        return np.where((t >= 0) & (t <= self.duration), v, 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        c = self.duration / 2
        d = -(t - c) / self.sigma**2 * _gauss(t, c, self.sigma) / (1 - self._baseline())
        return np.where((t >= 0) & (t <= self.duration), d, 0.0)


@dataclass(frozen=True)
class FlatTopGaussian:
    """Flat top with Gaussian rise and fall, each ``2 sigma`` long."""

    sigma: float
    duration: float

    def __post_init__(self):
        if self.duration < 4 * self.sigma:
            raise ValueError("duration must cover the 2-sigma rise and fall")

    @property
    def rise(self) -> float:
        return 2 * self.sigma

    def _shape(self, t):
        r = self.rise
        b = float(_gauss(0.0, r, self.sigma))
        up = (_gauss(t, r, self.sigma) - b) / (1 - b)
        down = (_gauss(t, self.duration - r, self.sigma) - b) / (1 - b)
        return np.where(t < r, up, np.where(t > self.duration - r, down, 1.0))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t <= self.duration), self._shape(t), 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        r = self.rise
        b = float(_gauss(0.0, r, self.sigma))
        up = -(t - r) / self.sigma**2 * _gauss(t, r, self.sigma) / (1 - b)
        c = self.duration - r
        down = -(t - c) / self.sigma**2 * _gauss(t, c, self.sigma) / (1 - b)
        d = np.where(t < r, up, np.where(t > c, down, 0.0))
        return np.where((t >= 0) & (t <= self.duration), d, 0.0)


@dataclass(frozen=True)
class DragWrapped:
    """``base(t) + i beta base'(t)``; ``beta`` has units of time."""

    base: Union[Gaussian, FlatTopGaussian]
    beta: float

    @property
    def duration(self) -> float:
        return self.base.duration

    def __call__(self, t):
        return self.base(t) + 1j * self.beta * self.base.derivative(t)


Envelope = Union[Square, Gaussian, FlatTopGaussian, DragWrapped]


def drag_wrap(env: Envelope, beta: float) -> DragWrapped:
    """Add a derivative quadrature of relative amplitude ``beta`` (seconds)."""
    if isinstance(env, DragWrapped):
        return DragWrapped(env.base, env.beta + beta)
    if isinstance(env, Square):
        raise ValueError("DRAG needs a differentiable envelope, not Square")
    return DragWrapped(env, beta)


@dataclass(frozen=True)
class Pulse:
    """Drive pulse on ``channel``.

    ``amp`` is the peak Rabi rate in rad/s, ``detuning`` an extra frequency
    offset (rad/s) from the channel frame and ``phase`` the carrier phase.
    """

    channel: str
    envelope: Envelope
    amp: float
    detuning: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")

    @property
    def duration(self) -> float:
        return self.envelope.duration


@dataclass(frozen=True)
class FrameChange:
    channel: str
    delta_phase: float

    duration = 0.0


@dataclass(frozen=True)
class Delay:
    channel: str
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class Barrier:
    channels: tuple[str, ...]

    duration = 0.0


Instruction = Union[Pulse, FrameChange, Delay, Barrier]


def _instr_channels(instr) -> tuple[str, ...]:
    return instr.channels if isinstance(instr, Barrier) else (instr.channel,)


@dataclass(frozen=True)
class Schedule:
    """Immutable, time-ordered list of ``(start_time, instruction)`` pairs."""

    items: tuple[tuple[float, Instruction], ...] = ()
    channels: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        items = tuple(sorted(self.items, key=lambda it: it[0]))
        chans = set(self.channels)
        busy: dict[str, list[tuple[float, float]]] = {}
        for t0, instr in items:
            if t0 < 0:
                raise ValueError("instruction times must be non-negative")
            for ch in _instr_channels(instr):
                chans.add(ch)
                if isinstance(instr, (Pulse, Delay)) and instr.duration > 0:
                    busy.setdefault(ch, []).append((t0, t0 + instr.duration))
        for ch, spans in busy.items():
            spans.sort()
            for (a0, a1), (b0, _) in zip(spans, spans[1:]):
                if b0 < a1 - 1e-15:
                    raise ValueError(f"overlapping instructions on channel {ch!r}")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "channels", frozenset(chans))

    @property
    def duration(self) -> float:
        return max((t0 + i.duration for t0, i in self.items), default=0.0)

    def channel_end(self, channel: str) -> float:
        return max(
            (t0 + i.duration for t0, i in self.items if channel in _instr_channels(i)),
            default=0.0,
        )

    def append(self, instr: Instruction) -> "Schedule":
        """Schedule ``instr`` as soon as its channels are free."""
        chans = _instr_channels(instr) or tuple(self.channels)
        if isinstance(instr, Barrier):
            instr = Barrier(tuple(chans))
        start = max((self.channel_end(c) for c in chans), default=0.0)
        return Schedule(self.items + ((start, instr),), self.channels | set(chans))

    def extend(self, instrs: Iterable[Instruction]) -> "Schedule":
        s = self
        for i in instrs:
            s = s.append(i)
        return s

    def shift(self, dt: float) -> "Schedule":
        return Schedule(tuple((t0 + dt, i) for t0, i in self.items), self.channels)

    def insert(self, t0: float, instr: Instruction) -> "Schedule":
        return Schedule(self.items + ((t0, instr),), self.channels)

    def __add__(self, other: "Schedule") -> "Schedule":
        """Sequential concatenation: ``other`` starts after all of ``self``."""
        return Schedule(self.items + other.shift(self.duration).items, self.channels | other.channels)

    def __or__(self, other: "Schedule") -> "Schedule":
        """Parallel union with no time shift."""
        return Schedule(self.items + other.items, self.channels | other.channels)

    def pulses(self) -> list[tuple[float, Pulse]]:
        return [(t0, i) for t0, i in self.items if isinstance(i, Pulse)]

    def frame_changes(self, channel: str | None = None) -> list[tuple[float, FrameChange]]:
        return [
            (t0, i)
            for t0, i in self.items
            if isinstance(i, FrameChange) and (channel is None or i.channel == channel)
        ]

    def with_phase_offset(self, offset: float) -> "Schedule":
        """Copy with ``offset`` added to every pulse phase."""
        return Schedule(
            tuple((t0, replace(i, phase=i.phase + offset) if isinstance(i, Pulse) else i)
                  for t0, i in self.items),
            self.channels,
        )


def accumulated_phase(schedule: Schedule, channel: str, t: float) -> float:
    """Sum of frame changes on ``channel`` at times ``<= t``."""
    if channel not in schedule.channels:
        raise KeyError(f"unknown channel {channel!r}")
    return float(sum(fc.delta_phase for t0, fc in schedule.frame_changes(channel) if t0 <= t))


@dataclass(frozen=True)
class RotatedX:
    """Interrogating pi pulse whose phase trails each gate by ``phi / 2``."""

    x_pulse: Pulse


def build_cpa_schedule(gate: Schedule, phi: float, n: int, interrogation: RotatedX | None = None) -> Schedule:
    """Continuous phase amplification: ``n`` gate copies with a ``phi`` frame step.

    A frame change of ``phi`` is placed on every channel before repetitions
    ``2..n`` so the ``k``-th copy sees accumulated phase ``(k-1) phi``.  With
    a :class:`RotatedX` interrogation a pi pulse precedes each of those
    repetitions with phase ``phi/2`` ahead of the gate copy before it.
    """
    if n < 0:
        raise ValueError("number of repetitions must be non-negative")
    if n == 0:
        return Schedule()
    chans = set(gate.channels)
    if interrogation is not None:
        chans.add(interrogation.x_pulse.channel)
    chans = sorted(chans)
    items = list(gate.items)
    tg = gate.duration
    t = tg
    for _ in range(1, n):
        if interrogation is not None:
            xp = replace(interrogation.x_pulse, phase=interrogation.x_pulse.phase + phi / 2)
            items.append((t, xp))
            t += xp.duration
        items.extend((t, FrameChange(ch, phi)) for ch in chans)
        items.extend((t + t0, i) for t0, i in gate.items)
        t += tg
    return Schedule(tuple(items), frozenset(chans))


def repetition_ends(gate: Schedule, n: int, interrogation: RotatedX | None = None) -> np.ndarray:
    """End time of each gate copy in :func:`build_cpa_schedule` output."""
    tg = gate.duration
    tx = 0.0 if interrogation is None else interrogation.x_pulse.duration
    return np.array([tg + k * (tg + tx) for k in range(n)])
