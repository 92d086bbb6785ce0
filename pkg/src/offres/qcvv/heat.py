"""Generalized Hamiltonian error amplifying tomography (HEAT) for a ZX(pi/2) gate.

A HEAT sequence prepares a product state, repeats ``N`` times the gate under
test followed by a pi "echo" on one or both qubits, applies post rotations
and measures ``<Z>`` of the control (``"C"``) or target (``"T"``).  For small
errors in the gate's effective Hamiltonian,

    U = exp(-i (pi/4 ZX + sum_P eps_P P / 2)),

``<Z>`` is linear in ``N`` (for ``N = 0 mod 4``) with a slope that is a
fixed linear combination of the ``eps_P``.  ``eps_P`` is therefore the
rotation angle about ``P`` per gate.

Rows 1-15 are the standard generalized table.  Rows 11-14 carry no
first-order signal for this gate (their Paulis and echoes all commute with
ZX, and a product state read out on one qubit cannot see the resulting
two-body rotation), so rows 16-19 are supplementary sequences of the same
shape that isolate ``YY``, ``XZ``, ``XY`` and ``YZ``.  Estimates come from a
least-squares solve against the exact linear response of every row, which
also absorbs the sign conventions of individual rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from ..analysis import fit_linear
from ..dynamics import measure_populations
from ..qcore import expm_hermitian, pauli, pauli_labels
from ..seeding import derive_seed
from .clifford import Native, native_unitary

__all__ = [
    "HeatRow",
    "HEAT_ROWS",
    "TABLE_ROWS",
    "SUPPLEMENTARY_ROWS",
    "HEAT_PAULIS",
    "HeatSpec",
    "HeatResult",
    "build_heat_sequence",
    "heat_gate_unitary",
    "response_matrix",
    "run_heat",
    "estimate_errors",
    "sector_error_magnitudes",
    "heat_blindness_demo",
    "BlindnessReport",
]

HEAT_PAULIS = tuple(p for p in pauli_labels(2) if p != "II")
GATE: Native = ("ZX90", (0, 1))
ECHO_SLOT = 2  # pulse slots per qubit in each echo, so every repetition has the same length


@dataclass(frozen=True)
class HeatRow:
    """One HEAT sequence: single-qubit ops per qubit as ``(control, target)``.

    Op names are ``I``, ``X``, ``Y``, ``Z`` (pi rotations) and
    ``X90, X-90, Y90, Y-90``.  ``paulis`` is the nominal combination the row
    amplifies and ``alpha`` its tabulated amplification factor.
    """

    index: int
    prep: tuple[str, str]
    echo: tuple[str, str]
    post: tuple[str, str]
    measure: str
    alpha: float
    paulis: Mapping[str, float]
    supplementary: bool = False

    @property
    def measured_qubit(self) -> int:
        return 0 if self.measure == "C" else 1


_A = np.pi**2 / 16

TABLE_ROWS = (
    HeatRow(1, ("I", "Y90"), ("X", "I"), ("X90", "Y-90"), "C", _A, {"XI": 0.5, "XX": 0.5}),
    HeatRow(2, ("I", "Y-90"), ("X", "I"), ("X90", "Y90"), "C", _A, {"XX": 0.5, "XI": -0.5}),
    HeatRow(3, ("I", "Y90"), ("I", "Z"), ("I", "I"), "T", _A, {"ZZ": 0.5, "IZ": 0.5}),
    HeatRow(4, ("X", "Y-90"), ("I", "Z"), ("X", "X-90"), "T", _A, {"ZZ": 0.5, "IZ": -0.5}),
    HeatRow(5, ("I", "Y90"), ("I", "Y"), ("I", "I"), "T", _A, {"ZY": 0.5, "IY": 0.5}),
    HeatRow(6, ("X", "Y90"), ("I", "Y"), ("X", "X90"), "T", _A, {"ZY": 0.5, "IY": -0.5}),
    HeatRow(7, ("I", "X90"), ("I", "X"), ("I", "I"), "T", 1.0, {"ZX": 0.5, "IX": 0.5}),
    HeatRow(8, ("X", "X90"), ("I", "X"), ("X", "I"), "T", 1.0, {"ZX": 0.5, "IX": -0.5}),
    HeatRow(9, ("I", "Y90"), ("Y", "I"), ("X-90", "Y-90"), "C", _A, {"YI": 0.5, "YX": 0.5}),
    HeatRow(10, ("I", "Y-90"), ("Y", "I"), ("X90", "Y90"), "C", _A, {"YI": 0.5, "YX": -0.5}),
    HeatRow(11, ("I", "Y90"), ("Y", "Y"), ("Y-90", "X-90"), "C", 0.5, {"YY": 0.5, "XZ": -0.5}),
    HeatRow(12, ("I", "Y-90"), ("X", "Z"), ("Y90", "X-90"), "T", 0.5, {"YY": 0.5, "XZ": 0.5}),
    HeatRow(13, ("I", "Y90"), ("X", "Y"), ("X90", "X-90"), "C", 0.5, {"XY": 0.5, "XZ": -0.5}),
    HeatRow(14, ("I", "Y-90"), ("Y", "Z"), ("X-90", "X-90"), "T", 0.5, {"XY": 0.5, "XZ": 0.5}),
    HeatRow(15, ("Y90", "I"), ("Z", "I"), ("X90", "I"), "C", 1.0, {"ZI": 1.0}),
)

SUPPLEMENTARY_ROWS = (
    HeatRow(16, ("I", "X90"), ("Z", "X"), ("Y-90", "I"), "C", 1.0, {"YY": 1.0}, True),
    HeatRow(17, ("I", "I"), ("X", "Z"), ("X90", "I"), "C", 1.0, {"XZ": 1.0}, True),
    HeatRow(18, ("I", "X90"), ("X", "Y"), ("X90", "I"), "C", 1.0, {"XY": 1.0}, True),
    HeatRow(19, ("I", "I"), ("Y", "Z"), ("Y-90", "I"), "C", 1.0, {"YZ": 1.0}, True),
)

HEAT_ROWS = TABLE_ROWS + SUPPLEMENTARY_ROWS
_ROWS = {r.index: r for r in HEAT_ROWS}


def _ops(op: str, qubit: int, pad: bool) -> list[Native]:
    q = (qubit,)
    if op == "I":
        seq: list[Native] = []
    elif op in ("X", "Y"):
        seq = [(op + "90", q), (op + "90", q)]
    elif op == "Z":
        seq = [("Z180", q)]
    elif op in ("X90", "X-90", "Y90", "Y-90"):
        seq = [(op, q)]
    else:
        raise ValueError(f"unknown HEAT op {op!r}")
    if pad:
        n_pulses = sum(g[0] != "Z180" for g in seq)
        seq += [("ID", q)] * (ECHO_SLOT - n_pulses)
    return seq


def build_heat_sequence(k: int, n: int) -> list[list[Native]]:
    """Blocks ``[prep, (gate, echo) x n, post]`` of HEAT sequence ``k``.

    Echo slots are padded with ``ID`` (idle of one pulse length) so that
    every repetition takes the same time whatever the echo.
    """
    if k not in _ROWS:
        raise ValueError(f"no HEAT sequence {k}")
    if n < 0:
        raise ValueError("number of repetitions must be non-negative")
    row = _ROWS[k]
    prep = _ops(row.prep[0], 0, False) + _ops(row.prep[1], 1, False)
    echo = _ops(row.echo[0], 0, True) + _ops(row.echo[1], 1, True)
    post = _ops(row.post[0], 0, False) + _ops(row.post[1], 1, False)
    return [prep] + [[GATE] + echo for _ in range(n)] + [post]


def heat_gate_unitary(errors: Mapping[str, float] | None = None) -> np.ndarray:
    """``exp(-i (pi/4 ZX + sum eps_P P / 2))`` for Pauli errors ``eps_P`` in radians."""
    h = np.pi / 4 * pauli("ZX")
    for label, eps in (errors or {}).items():
        h = h + 0.5 * eps * pauli(label)
    return expm_hermitian(h)


@dataclass(frozen=True)
class HeatSpec:
    """Repetition grid (multiples of 4, including 0), rows and sampling.

    With ``shots=None`` expectation values are exact; otherwise each point
    is sampled with ``shots`` binomial draws seeded from ``seed``.
    """

    n_reps: Sequence[int] = (0, 4, 8, 12, 16, 20)
    rows: Sequence[int] = tuple(r.index for r in HEAT_ROWS)
    shots: int | None = None
    seed: int = 0
    nonlinearity_tol: float = 0.05

    def __post_init__(self):
        ns_ = tuple(int(n) for n in self.n_reps)
        if len(ns_) < 3 or any(n < 0 or n % 4 for n in ns_) or list(ns_) != sorted(set(ns_)):
            raise ValueError("n_reps must hold at least 3 increasing multiples of 4")
        rows = tuple(int(k) for k in self.rows)
        if not rows or any(k not in _ROWS for k in rows):
            raise ValueError("unknown HEAT row")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")
        object.__setattr__(self, "n_reps", ns_)
        object.__setattr__(self, "rows", rows)


@dataclass
class HeatResult:
    """Per-row ``<Z>`` curves and slopes, and per-Pauli error estimates (radians per gate)."""

    n_reps: tuple[int, ...]
    rows: tuple[int, ...]
    expectations: np.ndarray
    slopes: np.ndarray
    slope_errors: np.ndarray
    errors: dict[str, float]
    error_sigmas: dict[str, float]
    unidentified: tuple[str, ...] = ()
    nonlinear_rows: tuple[int, ...] = ()
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "experiment": "heat",
            "n_reps": list(self.n_reps),
            "rows": list(self.rows),
            "expectations": self.expectations.tolist(),
            "slopes": self.slopes.tolist(),
            "slope_errors": self.slope_errors.tolist(),
            "errors_rad": {k: float(v) for k, v in self.errors.items()},
            "error_sigmas_rad": {k: float(v) for k, v in self.error_sigmas.items()},
            "unidentified": list(self.unidentified),
            "nonlinear_rows": list(self.nonlinear_rows),
            "warnings": list(self.warnings),
        }


class _UnitaryBackend:
    """Exact state-vector simulation with ideal single-qubit gates."""

    def __init__(self, gate: np.ndarray):
        self.gate = np.asarray(gate, dtype=complex)
        if self.gate.shape != (4, 4):
            raise ValueError("HEAT gate must be a 4x4 unitary")
        self._cache: dict = {}

    def _u(self, g: Native) -> np.ndarray:
        if g == GATE:
            return self.gate
        if g[0] == "ID":
            return np.eye(4)
        if g not in self._cache:
            self._cache[g] = native_unitary(g, 2)
        return self._cache[g]

    def expectation(self, blocks, qubit: int) -> float:
        psi = np.zeros(4, dtype=complex)
        psi[0] = 1.0
        for g in (g for b in blocks for g in b):
            psi = self._u(g) @ psi
        p = measure_populations(psi, [qubit])
        return float(p[0] - p[1])


class _PulseBackend:
    """Pulse-level simulation through a gate set holding ``ZX90`` and ``ID`` natives."""

    def __init__(self, gateset):
        self.gs = gateset
        rho0 = np.zeros((4, 4), dtype=complex)
        rho0[0, 0] = 1.0
        self.rho0 = rho0

    def expectation(self, blocks, qubit: int) -> float:
        rho = self.gs.run(blocks, self.rho0)
        p = measure_populations(rho, [qubit], confusion=self.gs.confusion)
        return float(p[0] - p[1])


def _backend(gate):
    if isinstance(gate, np.ndarray):
        return _UnitaryBackend(gate)
    if hasattr(gate, "run") and hasattr(gate, "schedule"):
        return _PulseBackend(gate)
    raise TypeError("gate must be a 4x4 unitary or a pulse gate set")


def _curves(backend, rows, n_reps) -> np.ndarray:
    out = np.zeros((len(rows), len(n_reps)))
    for i, k in enumerate(rows):
        q = _ROWS[k].measured_qubit
        for j, n in enumerate(n_reps):
            out[i, j] = backend.expectation(build_heat_sequence(k, n), q)
    return out


@lru_cache(maxsize=16)
def _response(rows: tuple[int, ...], n_reps: tuple[int, ...], step: float = 1e-5) -> np.ndarray:
    cols = []
    ns_ = np.asarray(n_reps, dtype=float)
    for label in HEAT_PAULIS:
        up = _curves(_UnitaryBackend(heat_gate_unitary({label: step})), rows, n_reps)
        dn = _curves(_UnitaryBackend(heat_gate_unitary({label: -step})), rows, n_reps)
        d = (up - dn) / (2 * step)
        cols.append(np.array([fit_linear(ns_, row).slope for row in d]))
    return np.array(cols).T


def response_matrix(rows: Sequence[int] | None = None,
                    n_reps: Sequence[int] = (0, 4, 8, 12, 16, 20)) -> np.ndarray:
    """Slope of each row per radian of each Pauli error, shape ``(rows, 15)``.

    Columns follow :data:`HEAT_PAULIS`.  Computed by differentiating exact
    simulations of the ideal gate, then fitting lines over ``n_reps``.
    """
    rows = tuple(rows) if rows is not None else tuple(r.index for r in HEAT_ROWS)
    return _response(rows, tuple(int(n) for n in n_reps)).copy()


def estimate_errors(slopes, rows: Sequence[int], n_reps: Sequence[int], slope_errors=None):
    """Least-squares Pauli errors from row slopes.

    Returns ``(errors, sigmas, unidentified)``; Paulis with no response in
    the chosen rows are reported as NaN and listed as unidentified.
    """
    a = response_matrix(rows, n_reps)
    slopes = np.asarray(slopes, dtype=float)
    seen = np.abs(a).max(axis=0) > 1e-6
    sub = a[:, seen]
    est = np.full(len(HEAT_PAULIS), np.nan)
    sig = np.full(len(HEAT_PAULIS), np.nan)
    if np.any(seen):
        pinv = np.linalg.pinv(sub)
        est[seen] = pinv @ slopes
        if slope_errors is not None:
            cov = pinv @ np.diag(np.asarray(slope_errors, dtype=float) ** 2) @ pinv.T
            sig[seen] = np.sqrt(np.diag(cov))
        else:
            sig[seen] = 0.0
    unidentified = tuple(p for p, s in zip(HEAT_PAULIS, seen) if not s)
    return dict(zip(HEAT_PAULIS, est)), dict(zip(HEAT_PAULIS, sig)), unidentified


def run_heat(spec: HeatSpec, gate) -> HeatResult:
    """Run the HEAT rows of ``spec`` on ``gate`` and estimate Pauli errors.

    ``gate`` is either a 4x4 unitary (ideal single-qubit operations) or a
    pulse gate set (:class:`offres.qcvv.rb.PulseGateSet`) that implements
    ``("ZX90", (0, 1))``, ``("ID", (q,))`` and the ``X/Y (+-90)`` pulses.
    """
    backend = _backend(gate)
    curves = _curves(backend, spec.rows, spec.n_reps)
    if spec.shots is not None:
        for i, k in enumerate(spec.rows):
            for j, n in enumerate(spec.n_reps):
                rng = np.random.default_rng(derive_seed(spec.seed, "heat", k, n))
                p1 = np.clip((1 - curves[i, j]) / 2, 0, 1)
                curves[i, j] = 1 - 2 * rng.binomial(spec.shots, p1) / spec.shots
    ns_ = np.asarray(spec.n_reps, dtype=float)
    slopes = np.zeros(len(spec.rows))
    serr = np.zeros(len(spec.rows))
    nonlinear = []
    for i, k in enumerate(spec.rows):
        fit = fit_linear(ns_, curves[i])
        slopes[i], serr[i] = fit.slope, np.sqrt(max(fit.covariance[0, 0], 0.0))
        resid = curves[i] - (fit.intercept + fit.slope * ns_)
        span = max(abs(fit.slope) * (ns_[-1] - ns_[0]), 0.1)
        if spec.shots is None and np.max(np.abs(resid)) > spec.nonlinearity_tol * span:
            nonlinear.append(k)
    warnings = []
    if nonlinear:
        warnings.append(f"rows {nonlinear} deviate from a line; errors may be too large for HEAT")
    errs, sigs, unid = estimate_errors(slopes, spec.rows, spec.n_reps,
                                       serr if spec.shots is not None else None)
    if unid:
        warnings.append(f"Paulis {list(unid)} have no response in the selected rows")
    return HeatResult(spec.n_reps, spec.rows, curves, slopes, serr, errs, sigs, unid,
                      tuple(nonlinear), warnings)


def sector_error_magnitudes(errors: Mapping[str, float]) -> dict[str, float]:
    """Per-gate control-flip rotation seen with the target in ``|+>`` / ``|->``.

    ``|(eps_XI +- eps_XX, eps_YI +- eps_YX)|``: the transverse control error
    of each target sector, the quantity state-selective frame spectroscopy
    amplifies.
    """
    out = {}
    for name, s in (("plus", 1), ("minus", -1)):
        out[name] = float(np.hypot(errors["XI"] + s * errors["XX"], errors["YI"] + s * errors["YX"]))
    return out


@dataclass
class BlindnessReport:
    """HEAT versus state-selective frame spectroscopy on one CR model.

    ``framespec_angle`` is the largest per-gate rotation implied by the
    sector peak heights, ``2 asin(sqrt(h_N)) / N``.  ``heat_angle`` is the
    largest HEAT sector magnitude.  ``blind`` holds when ``heat_angle`` is
    below ``bound_fraction * framespec_angle``.
    """

    delta: float
    t_rep: float
    frame_advance: float
    commensurate: bool
    heat: HeatResult
    heat_sectors: dict[str, float]
    heat_angle: float
    framespec_angles: dict[str, float]
    framespec_peaks: dict[str, float]
    framespec_angle: float
    bound_fraction: float = 0.1

    @property
    def ratio(self) -> float:
        return self.heat_angle / self.framespec_angle

    @property
    def blind(self) -> bool:
        return self.heat_angle < self.bound_fraction * self.framespec_angle

    def to_dict(self) -> dict:
        return {
            "experiment": "heat-blindness",
            "delta_mhz": self.delta / (2e6 * np.pi),
            "t_rep_ns": self.t_rep * 1e9,
            "frame_advance_rad": self.frame_advance,
            "commensurate": self.commensurate,
            "heat_errors_rad": {k: float(v) for k, v in self.heat.errors.items()},
            "heat_sector_angles_rad": self.heat_sectors,
            "heat_angle_rad": self.heat_angle,
            "framespec_angles_rad": self.framespec_angles,
            "framespec_peaks_rad": self.framespec_peaks,
            "framespec_angle_rad": self.framespec_angle,
            "bound_rad": self.bound_fraction * self.framespec_angle,
            "ratio": self.ratio,
            "blind": self.blind,
        }


def heat_blindness_demo(cr_model=None, omega: float | None = None, envelope=None,
                        commensurate: bool = False, n_framespec: int = 12,
                        n_phi: int = 128, heat_spec: HeatSpec | None = None,
                        delta: float | None = None) -> BlindnessReport:
    """Run HEAT and state-selective frame spectroscopy on a pulse-level CR gate.

    The ZX90 gate is a CR pulse (no DRAG) plus a virtual Z on the control
    that removes its ZI rotation; single-qubit gates are resonant Gaussian
    pulses, so the off-resonant XI/YI drive of the CR tone is stationary
    only when the control frame returns to itself each repetition.  That
    frame advances by ``delta * t_rep + alpha`` per repetition (detuning
    plus the virtual Z).  With ``commensurate=True`` the detuning is shifted
    slightly so this advance is a multiple of 2 pi and HEAT sees the error.

    Defaults follow the two-qubit benchmark: ``delta/2pi = -59 MHz``,
    ``Omega/2pi = 20 MHz``, a 213.33 ns flat-top with 14.22 ns edges and
    ``mu`` calibrated to a ZX(pi/2).  ``delta`` sets the detuning when no
    ``cr_model`` is given.
    """
    from ..dynamics import CrossResonanceModel, mhz
    from ..framespec import SweepSpec, calibrate_zx_half_pi, run_state_selective_framespec
    from ..pulse import Delay, Pulse, Schedule
    from .gatesets import X_SIGMA, calibrate_zx, cr_envelope, gaussian_1q_gates, x_pi_pulse
    from .rb import PulseGateSet

    envelope = envelope or cr_envelope()
    omega = mhz(20.0) if omega is None else omega
    if cr_model is not None:
        delta = cr_model.delta
    elif delta is None:
        delta = mhz(-59.0)
    pulse_len = 4 * X_SIGMA

    def build(d):
        if cr_model is not None and d == cr_model.delta:
            model = cr_model
        else:
            model = CrossResonanceModel(d, calibrate_zx_half_pi(d, omega, envelope))
        return model, calibrate_zx(model, omega, envelope)

    model, cal = build(delta)
    t_rep = cal.schedule.duration + 2 * ECHO_SLOT * pulse_len
    if commensurate:
        for _ in range(5):
            m = np.round((delta * t_rep + cal.alpha) / (2 * np.pi))
            delta = (2 * np.pi * m - cal.alpha) / t_rep
            model, cal = build(delta)
    advance = float(np.angle(np.exp(1j * (delta * t_rep + cal.alpha))))

    gates = {}
    gates.update(gaussian_1q_gates("d0", 0))
    gates.update(gaussian_1q_gates("d1", 1))
    gates[GATE] = cal.schedule
    for q in (0, 1):
        gates[("ID", (q,))] = Schedule().append(Delay(f"d{q}", pulse_len))
    gs = PulseGateSet(model, gates, {0: ("d0",), 1: ("d1", "u0")})
    heat = run_heat(heat_spec or HeatSpec(), gs)
    sectors = sector_error_magnitudes(heat.errors)

    cr_only = Schedule().append(Pulse("u0", envelope, cal.omega))
    spec = SweepSpec.full_turn(n_phi, tuple(range(1, n_framespec + 1)))
    angles, peaks = {}, {}
    for prep in ("plus", "minus"):
        res = run_state_selective_framespec(model, cr_only, spec, prep, x_pi_pulse("d1"))
        grid = res.populations_for(0)
        n = np.asarray(spec.n_grid, dtype=float)
        per_gate = 2 * np.arcsin(np.sqrt(np.clip(grid.max(axis=1), 0, 1))) / n
        angles[prep] = float(np.median(per_gate))
        peaks[prep] = float(spec.phi_grid[int(np.argmax(grid.mean(axis=0)))])
    return BlindnessReport(delta, t_rep, advance, commensurate, heat, sectors,
                           max(sectors.values()), angles, peaks, max(angles.values()))
