"""Closed-form peak oracles, peak extraction, curve fits and coherence limits.

All phases are returned wrapped to ``(-pi, pi]``.  Oracles follow the sign
conventions of :mod:`offres.dynamics`: a frame change of ``phi`` advances
every later pulse phase by ``phi``, single-qubit detunings are
``w_drive - w_qubit`` and two-qubit ``delta`` is ``w_other - w_driven``
(which enters the driven qubit's effective detuning with opposite sign).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

__all__ = [
    "wrap",
    "p10_closed_form",
    "stark_peak_oracle",
    "cr_peak_oracle",
    "spectator_peak_oracle",
    "spectator_ix_peak",
    "stark_angle",
    "PeakFit",
    "DecayFit",
    "SinFit",
    "LinearFit",
    "extract_peaks",
    "find_peaks_1d",
    "aggregate",
    "fit_linear",
    "fit_decay",
    "fit_sin",
    "coherence_limit_1q",
    "coherence_limit_2q",
]


def wrap(phi):
    """Reduce angles to ``(-pi, pi]``."""
    w = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    return float(w) if np.ndim(w) == 0 else w


def _sector_sign(sector: str) -> int:
    if sector not in ("plus", "minus"):
        raise ValueError(f"sector must be 'plus' or 'minus', got {sector!r}")
    return 1 if sector == "plus" else -1


def p10_closed_form(omega, delta, t):
    """Excitation probability of a square off-resonant pulse from ``|0>``."""
    omega = np.asarray(omega, dtype=float)
    omega_r2 = omega**2 + np.asarray(delta, dtype=float) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(omega_r2 > 0, omega**2 / omega_r2 * np.sin(np.sqrt(omega_r2) * t / 2) ** 2, 0.0)
    return float(p) if p.ndim == 0 else p


def stark_peak_oracle(omega, delta, t_rep):
    """Frame-step at which repeated off-resonant gates excite the qubit.

    ``sign(delta) * sqrt(omega^2 + delta^2) * t_rep``; ``delta`` is the
    drive-minus-qubit detuning.
    """
    return wrap(np.sign(delta) * np.hypot(omega, delta) * t_rep)


def stark_angle(omega, delta, t):
    """Perturbative Z angle ``-omega^2 t / (2 delta)`` of an off-resonant drive."""
    return -(omega**2) * t / (2 * delta)


def cr_peak_oracle(omega, delta, mu, t_g, sector: str, t_x: float = 0.0):
    """Control-qubit peak for state-selective spectroscopy of a CR gate.

    ``delta = w_target - w_control``; ``sector`` is the target eigenstate
    ``plus``/``minus``.  The control sees an effective single-qubit detuning
    ``-(delta -/+ mu omega)``, and the rotated X on the target adds
    ``-delta * t_x`` of free precession per repetition.
    """
    s = _sector_sign(sector)
    d_eff = delta - s * mu * omega
    return wrap(-(np.sign(d_eff) * np.hypot(omega, d_eff) * t_g + delta * t_x))


def spectator_peak_oracle(omega, delta, t_rep, sector: str, t_g: float | None = None):
    """Correlated driven/spectator peak for spectator frame spectroscopy.

    ``delta = w_spectator - w_driven``.  For a calibrated X_{pi/2}
    (``omega * t_g = pi/2``) this is ``-delta * t_rep -/+ pi/2``; pass ``t_g``
    to use ``omega * t_g`` instead of the calibrated quarter turn.
    """
    s = _sector_sign(sector)
    area = np.pi / 2 if t_g is None else omega * t_g
    return wrap(-delta * t_rep - s * area)


def spectator_ix_peak(delta, t_rep):
    """Spectator-only peak from IX crosstalk: the spectator's own free precession."""
    return wrap(-delta * t_rep)


# -- fits -------------------------------------------------------------------


@dataclass(frozen=True)
class PeakFit:
    position: float
    height: float
    half_width: float
    uncertainty: float


@dataclass(frozen=True)
class DecayFit:
    A: float
    alpha: float
    B: float
    covariance: np.ndarray = field(repr=False)
    residual: float = 0.0
    power: int = 1

    @property
    def alpha_err(self) -> float:
        return float(np.sqrt(max(self.covariance[1, 1], 0.0)))

    def __call__(self, n):
        return self.A * self.alpha ** (self.power * np.asarray(n, dtype=float)) + self.B


@dataclass(frozen=True)
class SinFit:
    a: float
    phi0: float
    covariance: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    covariance: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter((self.slope, self.intercept, self.covariance))


def fit_linear(xs, ys) -> LinearFit:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ValueError("need at least 3 points")
    a = np.column_stack([xs, np.ones_like(xs)])
    gram = a.T @ a
    if np.linalg.cond(gram) > 1e14:
        raise ValueError("singular design matrix")
    coef, *_ = np.linalg.lstsq(a, ys, rcond=None)
    resid = ys - a @ coef
    s2 = float(resid @ resid) / (xs.size - 2)
    cov = s2 * np.linalg.inv(gram)
    return LinearFit(float(coef[0]), float(coef[1]), cov)


def fit_decay(lengths, values, power: int = 1, maxfev: int = 10000) -> DecayFit:
    """Fit ``A * alpha**(power * n) + B`` (``power=2`` for purity decays)."""
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    n = np.asarray(lengths, dtype=float)
    y = np.asarray(values, dtype=float)
    if n.size < 3:
        raise ValueError("need at least 3 points")
    order = np.argsort(n)
    n, y = n[order], y[order]
    b0 = y[-1]
    a0 = y[0] - b0
    dev = np.abs(y - b0)
    ok = dev > 1e-12 * max(1.0, np.max(np.abs(y)))
    alpha0 = 0.99
    if ok.sum() >= 2:
        slope = np.polyfit(power * n[ok], np.log(dev[ok]), 1)[0]
        alpha0 = float(np.clip(np.exp(slope), 1e-3, 1 - 1e-9))
    if abs(a0) < 1e-15:
        a0 = 1e-3

    def model(x, a, alpha, b):
        return a * alpha ** (power * x) + b

    try:
        popt, pcov = curve_fit(
            model, n, y, p0=[a0, alpha0, b0], bounds=([-np.inf, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
            maxfev=maxfev, xtol=1e-15, ftol=1e-15, gtol=1e-15,
        )
    except RuntimeError as exc:
        raise RuntimeError(f"decay fit did not converge: {exc}") from exc
    resid = float(np.sqrt(np.mean((model(n, *popt) - y) ** 2)))
    return DecayFit(float(popt[0]), float(popt[1]), float(popt[2]), pcov, resid, power)


def fit_sin(ts, phis) -> SinFit:
    """Fit wrapped phases to ``a t + phi0`` through ``sin``/``cos`` of both sides."""
    ts = np.asarray(ts, dtype=float)
    phis = np.asarray(phis, dtype=float)
    if ts.size < 3:
        raise ValueError("need at least 3 points")
    order = np.argsort(ts)
    ts, phis = ts[order], phis[order]
    seed = np.polyfit(ts, np.unwrap(phis), 1)

    def model(t, a, p0):
        t = t[: t.size // 2]
        return np.concatenate([np.sin(a * t + p0), np.cos(a * t + p0)])

    data = np.concatenate([np.sin(phis), np.cos(phis)])
    popt, pcov = curve_fit(model, np.concatenate([ts, ts]), data, p0=seed, maxfev=10000)
    return SinFit(float(popt[0]), wrap(popt[1]), pcov)


# -- peaks --------------------------------------------------------------------


def aggregate(grid: np.ndarray, n_grid, aggregation: str = "mean_over_N", n: int | None = None):
    """Collapse an ``(N, phi)`` population grid to a 1D profile over ``phi``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        return grid
    if aggregation == "mean_over_N":
        return grid.mean(axis=0)
    if aggregation == "fixed_N":
        n_grid = list(n_grid)
        if n is None:
            n = n_grid[-1]
        if n not in n_grid:
            raise ValueError(f"N={n} not in sweep grid")
        return grid[n_grid.index(n)]
    raise ValueError(f"unknown aggregation {aggregation!r}")


def _profile(result, qubit, aggregation, n):
    if isinstance(result, tuple):
        phis, prof = result
        return np.asarray(phis, dtype=float), np.asarray(prof, dtype=float)
    grid = result.populations if qubit is None else result.populations_for(qubit)
    return np.asarray(result.phi_grid, dtype=float), aggregate(grid, result.n_grid, aggregation, n)


def extract_peaks(result, aggregation: str = "mean_over_N", qubit: int | None = None,
                  n: int | None = None, threshold: float = 5.0) -> list[PeakFit]:
    """Local maxima of a sweep profile above ``threshold`` times its median.

    ``result`` is a :class:`offres.framespec.SweepResult` or a
    ``(phi_grid, profile)`` tuple.  Centers are refined by a three-point
    parabola; a grid spanning a full turn is treated as periodic.
    """
    phis, prof = _profile(result, qubit, aggregation, n)
    if phis.size < 3:
        return []
    step = float(np.median(np.diff(phis)))
    periodic = abs(phis[-1] - phis[0] + step - 2 * np.pi) < 0.5 * step
    peaks = find_peaks_1d(phis, prof, threshold, periodic)
    return [PeakFit(wrap(p.position), p.height, p.half_width, p.uncertainty) for p in peaks]


def find_peaks_1d(xs, ys, threshold: float = 5.0, periodic: bool = False) -> list[PeakFit]:
    """Peaks of a uniformly sampled profile, strongest first (positions unwrapped)."""
    xs = np.asarray(xs, dtype=float)
    prof = np.asarray(ys, dtype=float)
    m = xs.size
    if m < 3:
        return []
    step = float(np.median(np.diff(xs)))
    floor = max(threshold * float(np.median(prof)), 1e-9)
    peaks = []
    for i in range(m):
        if not periodic and i in (0, m - 1):
            continue
        left, right = prof[(i - 1) % m], prof[(i + 1) % m]
        y = prof[i]
        if not (y > left and y >= right and y > floor):
            continue
        denom = left - 2 * y + right
        shift = 0.5 * (left - right) / denom if denom < 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        height = float(np.clip(y - 0.25 * (left - right) * shift, y, 1.0))
        half = _half_width(prof, i, y, step, periodic)
        if half < step:
            warnings.warn("peak narrower than the grid step; positions may alias", RuntimeWarning)
        peaks.append(PeakFit(float(xs[i] + shift * step), height, max(half, 1e-12), step / 2))
    return sorted(peaks, key=lambda p: -p.height)


def _half_width(prof, i, y, step, periodic):
    m = prof.size
    sides = []
    for direction in (-1, 1):
        k = 1
        prev = y
        while k < m:
            j = i + direction * k
            if not periodic and not 0 <= j < m:
                break
            v = prof[j % m]
            if v <= y / 2:
                frac = (prev - y / 2) / (prev - v) if prev != v else 0.0
                sides.append((k - 1 + frac) * step)
                break
            prev = v
            k += 1
    return float(np.mean(sides)) if sides else float(m * step)


# -- coherence limits ----------------------------------------------------------


def coherence_limit_1q(t_g, t1, t2):
    """Average gate error of pure T1/T2 decay over ``t_g``."""
    return (3 - 2 * np.exp(-t_g / t2) - np.exp(-t_g / t1)) / 6


def _process_fidelity_1q(t_g, t1, t2):
    return (1 + np.exp(-t_g / t1) + 2 * np.exp(-t_g / t2)) / 4


def coherence_limit_2q(t_g, t1s, t2s):
    """Average gate error of independent T1/T2 decay on two qubits over ``t_g``."""
    t1s = np.broadcast_to(np.asarray(t1s, dtype=float), (2,))
    t2s = np.broadcast_to(np.asarray(t2s, dtype=float), (2,))
    fp = _process_fidelity_1q(t_g, t1s[0], t2s[0]) * _process_fidelity_1q(t_g, t1s[1], t2s[1])
    return 1 - (4 * fp + 1) / 5
