"""Pulse-level gate sets for interleaved RB of off-resonant gates.

Single-qubit Cliffords use resonant Gaussian ``X/Y (+-90)`` pulses and
virtual Z frame changes.  The gates under test are a Stark ``Z`` gate (one
qubit) and a cross-resonance CNOT (two qubits), each optionally DRAG
corrected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize

from ..dynamics import (CrossResonanceModel, PropagationOptions, SingleQubitDriveModel, ns,
                        propagate)
from ..analysis import wrap
from ..framespec import calibrated_amplitude, flat_top_stark_gate, sector_peak, sector_unitaries
from ..pulse import FlatTopGaussian, FrameChange, Gaussian, Pulse, Schedule, drag_wrap
from ..qcore import NoiseModel, gate_error, kron, pauli, rotation
from .clifford import CX, NATIVE_1Q
from .rb import PulseGateSet

X_SIGMA = ns(7.11)
_PHASES = {"X90": 0.0, "X-90": np.pi, "Y90": np.pi / 2, "Y-90": -np.pi / 2}


def gaussian_1q_gates(channel: str, qubit: int, sigma: float = X_SIGMA) -> dict:
    """``X/Y (+-90)`` Gaussian pulses (duration ``4 sigma``) on a resonant channel."""
    env = Gaussian(sigma)
    amp = calibrated_amplitude(env, np.pi / 2)
    return {(name, (qubit,)): Schedule().append(Pulse(channel, env, amp, phase=ph))
            for name, ph in _PHASES.items()}


def x_pi_pulse(channel: str, sigma: float = X_SIGMA) -> Pulse:
    """Resonant Gaussian pi pulse about X (duration ``4 sigma``)."""
    env = Gaussian(sigma)
    return Pulse(channel, env, calibrated_amplitude(env, np.pi))


def _nearest_z(u: np.ndarray):
    names = ("Z90", "Z-90")
    errs = [gate_error(u, NATIVE_1Q[n]) for n in names]
    return NATIVE_1Q[names[int(np.argmin(errs))]]


def stark_gateset(delta: float, t_g: float, sigma: float, beta: float = 0.0,
                  noise: NoiseModel | None = None, x_sigma: float = X_SIGMA) -> PulseGateSet:
    """One-qubit gate set with a Stark ``Z`` gate named ``"ZS"``.

    The Stark tone runs on ``d0`` at the native (drive) frame; Clifford
    pulses run on ``q0``, resonant with the qubit.  The Stark amplitude is
    calibrated without DRAG and held fixed when ``beta`` is applied, as in a
    one-parameter DRAG calibration.
    """
    model = SingleQubitDriveModel(detuning=delta, channel_detunings={"d0": 0.0, "q0": -delta},
                                  noise=noise)
    sched, amp = flat_top_stark_gate(delta, t_g, sigma)
    env = sched.items[0][1].envelope
    gate = Schedule().append(Pulse("d0", drag_wrap(env, beta) if beta else env, amp))
    u = propagate(model, gate, PropagationOptions(frame="resonant"))
    gates = gaussian_1q_gates("q0", 0, x_sigma)
    gates[("ZS", (0,))] = gate
    return PulseGateSet(model, gates, {0: ("q0", "d0")}, ideal={("ZS", (0,)): _nearest_z(u)})


@dataclass(frozen=True)
class CXCalibration:
    """CR CNOT: CR pulse on ``u0`` with a simultaneous target drive on ``d1``.

    ``alpha`` is the virtual Z on the control after the pulse and
    ``rotary_amp`` the peak rate of the target drive.
    """

    schedule: Schedule
    omega: float
    alpha: float
    rotary_amp: float
    error: float


def cx_schedule(omega: float, envelope, rotary_amp: float, alpha: float) -> Schedule:
    s = Schedule().append(Pulse("u0", envelope, omega))
    base = envelope.base if hasattr(envelope, "base") else envelope
    s = s | Schedule().append(Pulse("d1", base, rotary_amp))
    return s.insert(s.duration, FrameChange("d0", -alpha))


def calibrate_cr_amplitude(model: CrossResonanceModel, omega0: float, envelope) -> float:
    """CR peak rate for which the dressed target-sector control phases differ by pi."""
    gate = lambda w: Schedule().append(Pulse("u0", envelope, w))  # noqa: E731

    def g(w):
        s = sector_unitaries(model, gate(w))
        return wrap(sector_peak(s["plus"]) - sector_peak(s["minus"]) - np.pi)

    return float(brentq(g, 0.8 * omega0, 1.2 * omega0, xtol=1e-6))


def calibrate_cx(model: CrossResonanceModel, omega: float, envelope,
                 tune_amplitude: bool = True) -> CXCalibration:
    """Fit the control virtual Z and target drive that turn the CR pulse into a CNOT.

    With ``tune_amplitude`` the CR rate is first set by
    :func:`calibrate_cr_amplitude` starting from ``omega``.  The error is the
    average gate error against CNOT of the resonant-frame unitary for a gate
    starting at ``t = 0``.
    """
    if tune_amplitude:
        omega = calibrate_cr_amplitude(model, omega, envelope)
    opts = PropagationOptions(frame="resonant")
    base = envelope.base if hasattr(envelope, "base") else envelope
    a0 = calibrated_amplitude(base, -np.pi / 2)

    def err(x):
        s = cx_schedule(omega, envelope, x[1] * a0, 0.0)
        u = propagate(model, s, opts)
        return gate_error(kron(rotation("Z", x[0]), np.eye(2)) @ u, CX)

    best = min((err([a, 1.0]), a) for a in np.linspace(-np.pi, np.pi, 13))
    res = minimize(err, [best[1], 1.0], method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 2000})
    alpha, scale = res.x
    sched = cx_schedule(omega, envelope, scale * a0, alpha)
    return CXCalibration(sched, float(omega), float(alpha), float(scale * a0), float(res.fun))


ZX90 = (np.eye(4) - 1j * pauli("ZX")) / np.sqrt(2)


def zx_schedule(omega: float, envelope, alpha: float) -> Schedule:
    s = Schedule().append(Pulse("u0", envelope, omega))
    return s.insert(s.duration, FrameChange("d0", -alpha))


def calibrate_zx(model: CrossResonanceModel, omega: float, envelope,
                 tune_amplitude: bool = True) -> CXCalibration:
    """CR pulse plus a control virtual Z fitted to ``exp(-i pi/4 ZX)``; no target drive."""
    if tune_amplitude:
        omega = calibrate_cr_amplitude(model, omega, envelope)
    opts = PropagationOptions(frame="resonant")
    u = propagate(model, Schedule().append(Pulse("u0", envelope, omega)), opts)

    def err(a):
        return gate_error(kron(rotation("Z", a), np.eye(2)) @ u, ZX90)

    grid = np.linspace(-np.pi, np.pi, 73)
    a0 = grid[int(np.argmin([err(a) for a in grid]))]
    res = minimize(lambda x: err(x[0]), [a0], method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-14})
    alpha = float(res.x[0])
    return CXCalibration(zx_schedule(omega, envelope, alpha), float(omega), alpha, 0.0, float(res.fun))


def cr_gateset(model: CrossResonanceModel, cx_variants: dict[str, CXCalibration],
               x_sigma: float = X_SIGMA) -> PulseGateSet:
    """Two-qubit gate set; ``cx_variants`` maps gate names (e.g. ``"CX"``) to calibrations.

    Qubit 0 (control) pulses use ``d0``; qubit 1 (target) pulses use ``d1``.
    Virtual Z on the target also shifts the CR tone ``u0``, which shares the
    target's frame.
    """
    gates = {}
    gates.update(gaussian_1q_gates("d0", 0, x_sigma))
    gates.update(gaussian_1q_gates("d1", 1, x_sigma))
    ideal = {}
    for name, cal in cx_variants.items():
        gates[(name, (0, 1))] = cal.schedule
        ideal[(name, (0, 1))] = CX
    return PulseGateSet(model, gates, {0: ("d0",), 1: ("d1", "u0")}, ideal=ideal)


def cr_envelope(t_g: float = ns(213.33), sigma: float = ns(14.22), beta: float = 0.0):
    env = FlatTopGaussian(sigma, t_g)
    return drag_wrap(env, beta) if beta else env
