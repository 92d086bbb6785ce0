"""Amplification experiments: continuous phase amplification and its variants.

Each executor builds schedules with :func:`offres.pulse.build_cpa_schedule`
(or a delay train for CPMG), propagates them with :mod:`offres.dynamics`
and returns excited-state populations per measured qubit.  One propagation
per phase value records every repetition count of the sweep via
checkpoints.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from . import analysis
from .dynamics import (
    CrossResonanceModel,
    PropagationOptions,
    SingleQubitDriveModel,
    SpectatorModel,
    evolve,
    measure_populations,
    propagate,
)
from .pulse import (
    Delay,
    FlatTopGaussian,
    Pulse,
    RotatedX,
    Schedule,
    Square,
    build_cpa_schedule,
    drag_wrap,
    repetition_ends,
)
from .qcore import density, gate_error, ket, rotation

__all__ = [
    "CalibrationError",
    "SweepSpec",
    "SweepResult",
    "CpmgSpec",
    "CpmgResult",
    "DragCalibration",
    "run_cpa",
    "run_state_selective_framespec",
    "run_spectator_framespec",
    "run_cpmg",
    "cpmg_peak_taus",
    "measure_stark_shift",
    "calibrate_drag",
    "calibrated_amplitude",
    "square_stark_gate",
    "optimize_square_stark",
    "flat_top_stark_gate",
    "stark_phase",
    "extrapolate_peak",
]


class CalibrationError(RuntimeError):
    """A calibration sweep has no usable optimum."""


def _strictly_increasing(xs, name):
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if np.any(np.diff(xs) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return xs


@dataclass(frozen=True)
class SweepSpec:
    """Phase-step and repetition grids of a CPA-type sweep."""

    phi_grid: Sequence[float]
    n_grid: Sequence[int]
    initial_state: str = "0"
    measured_qubits: Sequence[int] = (0,)

    def __post_init__(self):
        phis = _strictly_increasing(self.phi_grid, "phi_grid")
        ns_ = _strictly_increasing(self.n_grid, "n_grid")
        if np.any(ns_ < 1) or np.any(ns_ != np.round(ns_)):
            raise ValueError("n_grid must hold positive integers")
        object.__setattr__(self, "phi_grid", tuple(float(p) for p in phis))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in ns_))
        object.__setattr__(self, "measured_qubits", tuple(int(q) for q in self.measured_qubits))

    @classmethod
    def full_turn(cls, n_phi: int, n_grid, **kw) -> "SweepSpec":
        """``n_phi`` equally spaced phases covering ``[-pi, pi)``."""
        return cls(tuple(-np.pi + 2 * np.pi * np.arange(n_phi) / n_phi), n_grid, **kw)


@dataclass
class SweepResult:
    """Excited-state population grids of shape ``(len(n_grid), len(phi_grid))``."""

    phi_grid: tuple[float, ...]
    n_grid: tuple[int, ...]
    grids: dict[int, np.ndarray]
    metadata: dict = field(default_factory=dict)

    @property
    def populations(self) -> np.ndarray:
        return self.grids[next(iter(self.grids))]

    def populations_for(self, qubit: int) -> np.ndarray:
        return self.grids[qubit]

    def peaks(self, qubit: int | None = None, aggregation: str = "mean_over_N", n: int | None = None):
        return analysis.extract_peaks(self, aggregation, qubit=qubit, n=n)


def _tracked_excitation(state, qubit: int, n_qubits: int, theta: float, sign: int) -> float:
    """Population leaving the equatorial eigenstate ``|0> + sign e^{i theta}|1>``."""
    v = np.array([[1, np.exp(-1j * theta)], [1, -np.exp(-1j * theta)]]) / np.sqrt(2)
    full = v if n_qubits == 1 else (np.kron(v, np.eye(2)) if qubit == 0 else np.kron(np.eye(2), v))
    if state.ndim == 1:
        rotated = full @ state
    else:
        rotated = full @ state @ full.conj().T
    p1 = measure_populations(rotated, [qubit])[1]
    return float(p1 if sign > 0 else 1 - p1)


def _sweep(model, gate: Schedule, spec: SweepSpec, interrogation: RotatedX | None,
           options: PropagationOptions | None, metadata: dict,
           tracked: Mapping[int, int] | None = None) -> SweepResult:
    options = options or PropagationOptions()
    psi0 = ket(spec.initial_state)
    if psi0.shape[0] != model.dim:
        raise ValueError("initial_state does not match the model size")
    n_max = max(spec.n_grid)
    ends = repetition_ends(gate, n_max, interrogation)
    ckpts = [float(ends[n - 1]) for n in spec.n_grid]
    grids = {q: np.zeros((len(spec.n_grid), len(spec.phi_grid))) for q in spec.measured_qubits}
    for j, phi in enumerate(spec.phi_grid):
        sched = build_cpa_schedule(gate, phi, n_max, interrogation)
        if options.mode == "density":
            state0 = density(psi0)
        else:
            state0 = psi0
        _, states = evolve(model, sched, state0, options, ckpts)
        for i, st in enumerate(states):
            for q in spec.measured_qubits:
                if tracked and q in tracked:
                    theta = (spec.n_grid[i] - 1) * phi
                    grids[q][i, j] = _tracked_excitation(st, q, model.n_qubits, theta, tracked[q])
                else:
                    grids[q][i, j] = measure_populations(st, [q])[1]
    meta = {"model": type(model).__name__, "gate_duration_s": gate.duration}
    if interrogation is not None:
        meta["interrogation_duration_s"] = interrogation.x_pulse.duration
    meta.update(metadata)
    return SweepResult(spec.phi_grid, spec.n_grid, grids, meta)


def run_cpa(model, gate: Schedule, spec: SweepSpec, options: PropagationOptions | None = None) -> SweepResult:
    """Continuous phase amplification of a gate with frame-change interrogation."""
    return _sweep(model, gate, spec, None, options, {"experiment": "cpa"})


def run_state_selective_framespec(model: CrossResonanceModel, gate: Schedule, spec: SweepSpec,
                                  target_prep: str, x_pulse: Pulse,
                                  options: PropagationOptions | None = None) -> SweepResult:
    """CPA of a CR gate with a phase-tracking X_pi on the target between repetitions.

    The target starts in ``|+>`` or ``|->`` (``target_prep``) and the control
    in ``spec.initial_state``'s first character; the control population is
    reported (qubit 0) along with any other requested qubits.
    """
    if target_prep not in ("plus", "minus"):
        raise ValueError("target_prep must be 'plus' or 'minus'")
    label = spec.initial_state[0] + ("+" if target_prep == "plus" else "-")
    spec = SweepSpec(spec.phi_grid, spec.n_grid, label, spec.measured_qubits)
    return _sweep(model, gate, spec, RotatedX(x_pulse), options,
                  {"experiment": "framespec-cr", "target_prep": target_prep})


def run_spectator_framespec(model: SpectatorModel, gate: Schedule, spec: SweepSpec, prep: str,
                            x_pulse: Pulse, options: PropagationOptions | None = None) -> SweepResult:
    """Frame spectroscopy of a driven-qubit gate, reporting driven and spectator qubits.

    The driven qubit starts in ``|+>`` or ``|->``, an eigenstate of its own X
    gates; its excitation is the population that has left that eigenstate
    as tracked through the frame steps.  The spectator reports ``P(1)``.
    """
    labels = {"plus0": ("+0", 1), "minus0": ("-0", -1)}
    if prep not in labels:
        raise ValueError("prep must be 'plus0' or 'minus0'")
    label, sign = labels[prep]
    spec = SweepSpec(spec.phi_grid, spec.n_grid, label, (0, 1))
    return _sweep(model, gate, spec, RotatedX(x_pulse), options,
                  {"experiment": "framespec-spectator", "prep": prep}, tracked={0: sign})


def extrapolate_peak(t_xs, peak_positions) -> analysis.SinFit:
    """Fit peak position vs interrogation duration; ``phi0`` is the ``t_X -> 0`` limit."""
    return analysis.fit_sin(t_xs, peak_positions)


# -- CPMG ---------------------------------------------------------------------

CPMG_GRANULARITY = 0.222e-9


@dataclass(frozen=True)
class CpmgSpec:
    """Delay grid (seconds) for ``n`` repetitions of (gate, delay)."""

    tau_grid: Sequence[float]
    n: int
    gate: str = "X_pi"
    granularity: float = CPMG_GRANULARITY

    def __post_init__(self):
        taus = _strictly_increasing(self.tau_grid, "tau_grid")
        if taus[0] < 0:
            raise ValueError("delays must be non-negative")
        if self.granularity < CPMG_GRANULARITY * (1 - 1e-9):
            raise ValueError(f"granularity below {CPMG_GRANULARITY} s")
        if taus.size > 1 and np.min(np.diff(taus)) < self.granularity * (1 - 1e-9):
            raise ValueError("delay increments finer than the granularity")
        if self.gate not in ("X_half", "X_pi"):
            raise ValueError("gate must be 'X_half' or 'X_pi'")
        if self.n < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "tau_grid", tuple(float(t) for t in taus))

    @classmethod
    def uniform(cls, tau_max: float, n: int, gate: str = "X_pi", step: float = CPMG_GRANULARITY):
        k = int(np.floor(tau_max / step + 1e-9))
        return cls(tuple(step * np.arange(k + 1)), n, gate, step)

    @property
    def theta_g(self) -> float:
        return np.pi if self.gate == "X_pi" else np.pi / 2


@dataclass
class CpmgResult:
    """Driven (0, left its initial ``|+>``) and spectator (1, ``P(1)``) excitation vs delay."""

    tau_grid: tuple[float, ...]
    populations: dict[int, np.ndarray]
    warnings: list[str] = field(default_factory=list)

    def peaks(self, qubit: int = 1, threshold: float = 5.0, rel_height: float = 0.0):
        """Peaks in ``tau`` (seconds), optionally keeping those above ``rel_height`` of the tallest."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pk = analysis.find_peaks_1d(self.tau_grid, self.populations[qubit], threshold)
        if pk and rel_height:
            top = pk[0].height
            pk = [p for p in pk if p.height >= rel_height * top]
        return sorted(pk, key=lambda p: p.position)


def run_cpmg(model: SpectatorModel, spec: CpmgSpec, gate_pulse: Pulse,
             options: PropagationOptions | None = None) -> CpmgResult:
    """Driven qubit in ``|+>``, then ``n`` x (gate, delay tau); populations vs tau."""
    notes = []
    width = 2 * np.pi / (abs(model.delta) * spec.n) if model.delta else np.inf
    if len(spec.tau_grid) > 1 and np.median(np.diff(spec.tau_grid)) > width:
        msg = "tau grid coarser than the expected peak width"
        warnings.warn(msg, RuntimeWarning)
        notes.append(msg)
    psi0 = ket("+0")
    pops = {0: np.zeros(len(spec.tau_grid)), 1: np.zeros(len(spec.tau_grid))}
    ch = gate_pulse.channel
    for j, tau in enumerate(spec.tau_grid):
        s = Schedule()
        for _ in range(spec.n):
            s = s.append(gate_pulse)
            if tau > 0:
                s = s.append(Delay(ch, tau))
        psi, _ = evolve(model, s, psi0, options)
        pops[0][j] = _tracked_excitation(psi, 0, 2, 0.0, 1)
        pops[1][j] = measure_populations(psi, [1])[1]
    return CpmgResult(spec.tau_grid, pops, notes)


def cpmg_peak_taus(delta: float, t_g: float, theta_g: float, tau_max: float, entangling: bool = True):
    """Delays where ``delta (tau + t_g) - theta_g`` (or ``delta (tau + t_g)``) is a multiple of 2 pi."""
    offset = theta_g if entangling else 0.0
    period = 2 * np.pi / abs(delta)
    base = (offset / delta) - t_g
    k0 = np.ceil(-base / period - 1e-12)
    taus = base + period * np.arange(k0, k0 + int(tau_max / period) + 2)
    return taus[(taus >= 0) & (taus <= tau_max)]


# -- Ramsey Stark shift -----------------------------------------------------------


def _reduced_qubit(rho, qubit, n):
    if n == 1:
        return rho
    r = rho.reshape(2, 2, 2, 2)
    return np.einsum("ijkj->ik", r) if qubit == 0 else np.einsum("jijk->ik", r)


def measure_stark_shift(model, gate: Schedule, qubit: int = 0, other_state: str | None = None,
                        delays: Sequence[float] | None = None, fringe_rate: float = 2 * np.pi * 20e6) -> float:
    """Z phase a gate imprints on ``qubit`` in its resonant frame, via a Ramsey fringe.

    The qubit starts on the equator (``|+>``, other qubit in ``other_state``),
    the gate acts, then an ideal Ramsey readout with an artificial fringe at
    ``fringe_rate`` maps the accumulated phase onto populations.  Returns
    ``theta`` with the gate acting as ``exp(+i theta Z / 2)``.
    """
    n = model.n_qubits
    if delays is None:
        delays = np.linspace(0, 3 * 2 * np.pi / fringe_rate, 61)
    delays = np.asarray(delays, dtype=float)
    if np.ptp(delays) * fringe_rate < 2 * 2 * np.pi:
        raise CalibrationError("Ramsey delays span fewer than two fringes")
    if n == 1:
        label = "+"
    else:
        other = other_state or "0"
        label = "+" + other if qubit == 0 else other + "+"
    u = propagate(model, gate, PropagationOptions(frame="resonant"))
    rho = u @ density(ket(label)) @ u.conj().T
    r = _reduced_qubit(rho, qubit, n)
    pops = []
    for tau in delays:
        v = rotation("X", np.pi / 2) @ rotation("Z", fringe_rate * tau)
        pops.append(np.real((v @ r @ v.conj().T)[1, 1]))
    pops = np.array(pops)
    # P1 = (1 - |r| sin(az + w tau)) / 2 after Rz then Rx(pi/2)
    design = np.column_stack([np.ones_like(delays), np.sin(fringe_rate * delays), np.cos(fringe_rate * delays)])
    coef, *_ = np.linalg.lstsq(design, pops, rcond=None)
    if np.hypot(coef[1], coef[2]) < 1e-6:
        raise CalibrationError("no Ramsey fringe contrast")
    azimuth = np.arctan2(-coef[2], -coef[1])
    return analysis.wrap(-azimuth)


def stark_phase(u: np.ndarray) -> float:
    """Z angle ``theta`` of a nearly diagonal 1Q unitary written as ``exp(+i theta Z/2)``."""
    return float(np.angle(u[0, 0] * np.conj(u[1, 1])))


# -- gate construction -------------------------------------------------------------


def _envelope_area(env) -> float:
    return quad(lambda t: float(np.real(env(t))), 0, env.duration, limit=200)[0]


def calibrated_amplitude(envelope, angle: float) -> float:
    """Peak rate giving rotation ``angle`` for a resonant pulse with this envelope."""
    return angle / _envelope_area(envelope)


def square_stark_gate(omega: float, t_g: float, channel: str = "d0") -> Schedule:
    return Schedule().append(Pulse(channel, Square(t_g), omega))


def optimize_square_stark(delta: float, t_g: float, target_angle: float | None = None):
    """Square-pulse amplitude best approximating a Z rotation (default quarter turn).

    Returns ``(omega, resonant_unitary, average_gate_error)``; the target
    sign follows the Stark shift, ``-sign(delta) * pi/2``.
    """
    if target_angle is None:
        target_angle = -np.sign(delta) * np.pi / 2
    target = rotation("Z", -target_angle)
    model = SingleQubitDriveModel(detuning=delta)

    def err(omega):
        u = propagate(model, square_stark_gate(omega, t_g), PropagationOptions(frame="resonant"))
        return gate_error(u, target)

    res = minimize_scalar(err, bounds=(0.0, abs(delta) / 2), method="bounded", options={"xatol": 1.0})
    omega = float(res.x)
    u = propagate(model, square_stark_gate(omega, t_g), PropagationOptions(frame="resonant"))
    return omega, u, float(res.fun)


def flat_top_stark_gate(delta: float, t_g: float, sigma: float, angle: float | None = None,
                        beta: float = 0.0, channel: str = "d0") -> tuple[Schedule, float]:
    """Flat-top Gaussian Stark gate whose resonant-frame Z phase equals ``angle``."""
    if angle is None:
        angle = -np.sign(delta) * np.pi / 2
    model = SingleQubitDriveModel(detuning=delta)
    env = FlatTopGaussian(sigma, t_g)
    env = drag_wrap(env, beta) if beta else env

    def phase_err(omega):
        s = Schedule().append(Pulse(channel, env, omega))
        return stark_phase(propagate(model, s, PropagationOptions(frame="resonant"))) - angle

    # bracket the first crossing on a grid; the phase grows with amplitude
    grid = abs(delta) * np.linspace(1e-3, 0.6, 61)
    vals = [phase_err(w) for w in grid]
    k = next((i for i in range(60) if np.sign(vals[i]) != np.sign(vals[i + 1])), None)
    if k is None:
        raise CalibrationError("no amplitude below 0.6 |delta| reaches the requested Stark angle")
    omega = brentq(phase_err, grid[k], grid[k + 1], xtol=1e-3)
    return Schedule().append(Pulse(channel, env, omega)), float(omega)


# -- DRAG --------------------------------------------------------------------------


@dataclass
class DragCalibration:
    beta: float
    betas: np.ndarray
    values: np.ndarray


def calibrate_drag(evaluate: Callable[[float], float], beta_grid: Sequence[float],
                   refine_points: int = 0) -> DragCalibration:
    """Minimize an amplified-error signal over the DRAG coefficient.

    ``evaluate(beta)`` returns the amplified excitation at the peak phase
    (see :func:`drag_signal`).  With ``refine_points`` the bracket around the
    grid minimum is resampled that finely before the final parabolic step;
    amplified signals have minima much narrower than a practical coarse grid.
    """
    if refine_points:
        coarse = calibrate_drag(evaluate, beta_grid)
        i = int(np.argmin(coarse.values))
        fine = np.linspace(coarse.betas[i - 1], coarse.betas[i + 1], max(5, refine_points))
        res = calibrate_drag(evaluate, fine)
        betas = np.concatenate([coarse.betas, fine])
        order = np.argsort(betas)
        values = np.concatenate([coarse.values, res.values])
        return DragCalibration(res.beta, betas[order], values[order])
    betas = _strictly_increasing(beta_grid, "beta_grid")
    values = np.array([float(evaluate(b)) for b in betas])
    if np.ptp(values) <= 1e-12 * max(1.0, np.max(np.abs(values))):
        return DragCalibration(float(betas[np.argmin(np.abs(betas))]), betas, values)
    i = int(np.argmin(values))
    if i in (0, len(betas) - 1):
        raise CalibrationError("DRAG sweep has no interior minimum")
    b0, b1, b2 = betas[i - 1: i + 2]
    y0, y1, y2 = values[i - 1: i + 2]
    denom = (b0 - b1) * (b0 - b2) * (b1 - b2)
    a = (b2 * (y1 - y0) + b1 * (y0 - y2) + b0 * (y2 - y1)) / denom
    b = (b2**2 * (y0 - y1) + b1**2 * (y2 - y0) + b0**2 * (y1 - y2)) / denom
    beta = -b / (2 * a) if a > 0 else b1
    return DragCalibration(float(np.clip(beta, b0, b2)), betas, values)


def drag_signal(model, gate_for_beta: Callable[[float], Schedule], phi: float, n: int,
                initial_state: str = "0", qubit: int = 0, interrogation: Pulse | None = None,
                options: PropagationOptions | None = None,
                aggregation: str = "mean_over_N") -> Callable[[float], float]:
    """``beta -> excited population`` of CPA at phase ``phi``.

    ``aggregation="at_n"`` reads the population after exactly ``n``
    repetitions; the default averages over ``1..n``.  The average has a
    single deep minimum, whereas the fixed-``n`` signal also dips wherever
    the DRAG-induced Stark shift walks the peak away from ``phi``.
    """
    if aggregation not in ("at_n", "mean_over_N"):
        raise ValueError("aggregation must be 'at_n' or 'mean_over_N'")
    ns_ = (n,) if aggregation == "at_n" else tuple(range(1, n + 1))

    def evaluate(beta):
        spec = SweepSpec((phi,), ns_, initial_state, (qubit,))
        rot = None if interrogation is None else RotatedX(interrogation)
        return float(_sweep(model, gate_for_beta(beta), spec, rot, options, {}).grids[qubit].mean())

    return evaluate


__all__.append("drag_signal")


# -- cross-resonance sectors -------------------------------------------------------


def sector_unitaries(model: CrossResonanceModel, gate: Schedule) -> dict[str, np.ndarray]:
    """Control-qubit blocks of a CR gate for the target in ``|+>`` and ``|->``."""
    u = propagate(model, gate).reshape(2, 2, 2, 2)
    out = {}
    for name, v in (("plus", ket("+")), ("minus", ket("-"))):
        block = np.einsum("iajb,a,b->ij", u, v.conj(), v)
        out[name] = block / np.sqrt(np.linalg.det(block))
    return out


def sector_peak(u: np.ndarray) -> float:
    """Frame step that makes a 1Q unitary equatorial: ``2 atan2(d, a)`` for ``aI - i d Z + ...``."""
    a = np.real(np.trace(u)) / 2
    d = np.real(1j * np.trace(np.diag([1, -1]) @ u)) / 2
    return analysis.wrap(2 * np.arctan2(d, a))


def calibrate_zx_half_pi(delta: float, omega: float, envelope, nu: float = 0.0,
                         channel: str = "u0") -> float:
    """``mu`` for which the dressed control phases of the two target sectors differ by pi.

    Starts from the bare construction ``mu * omega * area = pi/2``, which
    ignores the Stark dressing of the control.
    """
    area = _envelope_area(envelope)
    mu0 = np.pi / 2 / (omega * area)
    gate = Schedule().append(Pulse(channel, envelope, omega))

    def g(mu):
        s = sector_unitaries(CrossResonanceModel(delta, mu, nu), gate)
        return analysis.wrap(sector_peak(s["plus"]) - sector_peak(s["minus"]) - np.pi)

    return float(brentq(g, 0.5 * mu0, 1.5 * mu0, xtol=1e-12))


__all__ += ["sector_unitaries", "sector_peak", "calibrate_zx_half_pi"]
