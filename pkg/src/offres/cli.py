"""Command-line front end.

``offres [run] EXPERIMENT [--config PATH] [--preset NAME] [--out DIR] [--seed INT]
[--threads INT] [--<param> VALUE ...] [--set KEY=VALUE ...]``

Parameters are resolved in order: schema defaults, preset, config file,
command-line overrides.  Keys carry their units (``detuning_mhz``,
``tg_ns``, ``t1_us``); frequencies are linear MHz and are converted to
angular rad/s exactly once, on the way into the library.

Each run writes CSV data (comma separated, header row) and ``summary.json``
into the output directory.  The summary embeds the normalized config and its
SHA-256 hash; it holds no timestamps, so re-running the embedded config
reproduces it byte for byte.

Exit codes: 0 success, 2 config/schema error, 3 numerical failure,
4 calibration failure.  Failures print an error JSON on stderr and write
``error.json`` when the output directory is usable.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, analysis
from .dynamics import (CrossResonanceModel, PropagationOptions, SingleQubitDriveModel, SpectatorModel,
                       evolve, mhz, measure_populations, ns, propagate, us)
from .pulse import (Barrier, Delay, DragWrapped, FlatTopGaussian, FrameChange, Gaussian, Pulse, Schedule,
                    Square, drag_wrap)
from .qcore import NoiseModel, density, gate_error, ket, kron, pauli_labels, rotation
from .seeding import derive_seed

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_CALIBRATION = 0, 2, 3, 4
THREADS_ENV = "OFFRES_THREADS"


def seed_derivation(master_seed: int, job_key) -> int:
    """Per-job seed for ``job_key`` (a tuple such as ``(experiment, length, sample)``)."""
    key = tuple(job_key) if isinstance(job_key, (tuple, list)) else (job_key,)
    return derive_seed(master_seed, *key)


class ConfigError(ValueError):
    """Schema violation; ``field`` is the dotted path of the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


# -- schema --------------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    kind: str  # float | int | bool | str | floats | ints | qubit_floats | paulis | schedule
    default: Any = None
    lo: float | None = None
    hi: float | None = None
    open_lo: bool = False
    choices: tuple | None = None
    nullable: bool = False


def _f(default, lo=None, hi=None, open_lo=False, nullable=False):
    return Param("float", default, lo, hi, open_lo, nullable=nullable or default is None)


def _i(default, lo=None, hi=None, nullable=False):
    return Param("int", default, lo, hi, nullable=nullable or default is None)


def _c(default, *choices):
    return Param("str", default, choices=choices, nullable=default is None)


def _fail(field, msg):
    raise ConfigError(field, msg)


def _num(field, v, p: Param, integer: bool):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(field, f"expected a number, got {v!r}")
    if not math.isfinite(v):
        _fail(field, "must be finite")
    if integer:
        if float(v) != int(v):
            _fail(field, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
    if p.lo is not None and (v < p.lo or (p.open_lo and v == p.lo)):
        _fail(field, f"must be {'>' if p.open_lo else '>='} {p.lo}, got {v!r}")
    if p.hi is not None and v > p.hi:
        _fail(field, f"must be <= {p.hi}, got {v!r}")
    return v


def _check(field: str, v, p: Param):
    if v is None:
        if p.nullable:
            return None
        _fail(field, "must not be null")
    k = p.kind
    if k in ("float", "int"):
        return _num(field, v, p, k == "int")
    if k == "bool":
        if not isinstance(v, bool):
            _fail(field, f"expected true/false, got {v!r}")
        return v
    if k == "str":
        if not isinstance(v, str) or (p.choices and v not in p.choices):
            _fail(field, f"expected one of {list(p.choices or ())}, got {v!r}")
        return v
    if k in ("floats", "ints"):
        if not isinstance(v, list) or not v:
            _fail(field, "expected a non-empty list")
        return [_num(f"{field}[{j}]", x, p, k == "ints") for j, x in enumerate(v)]
    if k == "qubit_floats":
        if isinstance(v, list):
            if len(v) not in (1, 2):
                _fail(field, "expected one value per qubit")
            return [_num(f"{field}[{j}]", x, p, False) for j, x in enumerate(v)]
        return _num(field, v, p, False)
    if k == "paulis":
        if not isinstance(v, dict):
            _fail(field, "expected an object mapping Pauli labels to radians")
        labels = set(pauli_labels(2)) - {"II"}
        out = {}
        for key in sorted(v):
            if key not in labels:
                _fail(f"{field}.{key}", "not a two-qubit Pauli label")
            out[key] = _num(f"{field}.{key}", v[key], Param("float"), False)
        return out
    if k == "schedule":
        try:
            schedule_from_dict(v)
        except (KeyError, TypeError, ValueError) as exc:
            _fail(field, f"invalid schedule: {exc}")
        return v
    raise AssertionError(k)


_NOISE = {
    "t1_us": Param("qubit_floats", None, 0.0, open_lo=True, nullable=True),
    "t2_us": Param("qubit_floats", None, 0.0, open_lo=True, nullable=True),
    "readout_error": _f(0.0, 0.0, 0.5),
}
_GRID = {"n_phi": _i(128, 8), "n_max": _i(150, 1)}
_STARK = {
    "detuning_mhz": _f(-50.0),
    "tg_ns": _f(96.0, 0.0, open_lo=True),
    "sigma_ns": _f(14.22, 0.0),
    "amp_mhz": _f(None, 0.0, open_lo=True),
    "beta_ns": _f(0.0),
}
_CR = {
    "detuning_mhz": _f(-59.0),
    "amp_mhz": _f(20.0, 0.0, open_lo=True),
    "tg_ns": _f(213.33, 0.0, open_lo=True),
    "sigma_ns": _f(14.22, 0.0, open_lo=True),
    "mu": _f(None),
    "nu": _f(0.0),
    "zeta_mhz": _f(0.0),
    "beta_ns": _f(0.0),
    "x_sigma_ns": _f(7.11, 0.0, open_lo=True),
}
_SPECTATOR = {
    "detuning_mhz": _f(-59.9),
    "amp_mhz": _f(None, 0.0, open_lo=True),
    "sigma_ns": _f(3.55, 0.0, open_lo=True),
    "mu": _f(0.02),
    "nu": _f(0.02),
    "x_sigma_ns": _f(16.0, 0.0, open_lo=True),
}
_RB = {
    "lengths": Param("ints", [0, 2, 5, 10, 20, 35, 50, 75, 100], 0),
    "samples": _i(10, 1),
    "shots": _i(None, 1),
    "cx_ns": _f(300.0, 0.0),
    "pulse_1q_ns": _f(0.0, 0.0),
    "coherent_x_rad": _f(0.0),
    **_NOISE,
}

# target/gateset-dependent defaults, filled where the schema default is null
_STARK_FILL = {"detuning_mhz": -50.0, "tg_ns": 96.0, "sigma_ns": 14.22}
_CR_FILL = {"detuning_mhz": -59.0, "tg_ns": 213.33, "sigma_ns": 14.22, "amp_mhz": 20.0}

SCHEMAS: dict[str, dict[str, Param]] = {
    "simulate": {
        "model": _c("stark", "stark", "cr", "spectator"),
        "detuning_mhz": _f(-50.0),
        "mu": _f(0.0), "nu": _f(0.0), "zeta_mhz": _f(0.0),
        "schedule": Param("schedule", None, nullable=True),
        "channel": _c(None, "d0", "d1", "u0", "q0"),
        "shape": _c("square", "square", "gaussian", "flat_top"),
        "amp_mhz": _f(10.0, 0.0),
        "tg_ns": _f(96.0, 0.0, open_lo=True),
        "sigma_ns": _f(14.22, 0.0, open_lo=True),
        "beta_ns": _f(0.0),
        "phase_rad": _f(0.0),
        "initial_state": Param("str", None, nullable=True),
        "frame": _c("resonant", "native", "resonant"),
        "n_samples": _i(101, 2),
        **_NOISE,
    },
    "cpa": {**_STARK, **_GRID},
    "framespec-cr": {**_CR, **_GRID, "n_phi": _i(256, 8), "n_max": _i(20, 1),
                     "control_state": _c("0", "0", "1")},
    "framespec-spectator": {**_SPECTATOR, **_GRID, "n_phi": _i(256, 8), "n_max": _i(20, 1)},
    "cpmg": {**{k: v for k, v in _SPECTATOR.items() if k != "x_sigma_ns"},
             "sigma_ns": _f(5.33, 0.0, open_lo=True),
             "gate": _c("X_pi", "X_pi", "X_half"),
             "n": _i(16, 1),
             "tau_max_ns": _f(40.0, 0.0, open_lo=True),
             "tau_step_ns": _f(0.222, 0.222)},
    "drag-cal": {
        "target": _c("stark", "stark", "cr"),
        "detuning_mhz": _f(None), "tg_ns": _f(None, 0.0, open_lo=True),
        "sigma_ns": _f(None, 0.0, open_lo=True), "amp_mhz": _f(None, 0.0, open_lo=True),
        "mu": _f(None), "nu": _f(0.0), "x_sigma_ns": _f(7.11, 0.0, open_lo=True),
        "n": _i(None, 1), "n_phi": _i(256, 8),
        "phi_rad": _f(None),
        "aggregation": _c("mean_over_N", "mean_over_N", "at_n"),
        "beta_min_ns": _f(None), "beta_max_ns": _f(None), "beta_points": _i(None, 3),
        "refine_points": _i(9, 0),
    },
    "ramsey-stark": dict(_STARK),
    "rb": {"n_qubits": _i(2, 1, 2), **_RB},
    "purity-rb": {"n_qubits": _i(2, 1, 2), **_RB},
    "interleaved-rb": {
        "gateset": _c("ideal", "ideal", "stark", "cr"),
        "n_qubits": _i(2, 1, 2),
        "gate": _c(None, "CX", "X90", "Y90", "X-90", "Y-90"),
        **_RB,
        "lengths": Param("ints", [1, 10, 25, 50, 100, 175, 250], 0),
        "detuning_mhz": _f(None), "tg_ns": _f(None, 0.0, open_lo=True),
        "sigma_ns": _f(None, 0.0, open_lo=True), "amp_mhz": _f(None, 0.0, open_lo=True),
        "beta_ns": _f(0.0), "x_sigma_ns": _f(7.11, 0.0, open_lo=True),
    },
    "heat": {
        "errors_rad": Param("paulis", {"XI": 0.01}),
        "n_reps": Param("ints", [0, 4, 8, 12, 16, 20], 0),
        "rows": Param("ints", None, 1, 19, nullable=True),
        "shots": _i(None, 1),
        "nonlinearity_tol": _f(0.05, 0.0, open_lo=True),
    },
    "coherence-limit": {
        "t1_us": Param("qubit_floats", None, 0.0, open_lo=True),
        "t2_us": Param("qubit_floats", None, 0.0, open_lo=True),
        "tg_ns": _f(None, 0.0),
        "n_qubits": _i(None, 1, 2),
    },
    "heat-blindness": {
        "detuning_mhz": _f(-59.0), "amp_mhz": _f(20.0, 0.0, open_lo=True),
        "tg_ns": _f(213.33, 0.0, open_lo=True), "sigma_ns": _f(14.22, 0.0, open_lo=True),
        "commensurate": Param("bool", False),
        "n_phi": _i(128, 8), "n_framespec": _i(12, 1),
    },
}
EXPERIMENTS = tuple(SCHEMAS)
PRESETS = ("table1_stark", "table2_cnot", "fig7_purity", "sec5_spectator")
_REQUIRED = {"coherence-limit": ("t1_us", "t2_us", "tg_ns")}


def load_preset(name: str) -> dict:
    """Parameter library of a shipped preset (all keys, unfiltered)."""
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {list(PRESETS)}")
    text = resources.files("offres").joinpath("presets", f"{name}.json").read_text()
    return dict(json.loads(text)["params"])


def _per_qubit(v, n):
    vals = v if isinstance(v, list) else [v]
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        return None
    return vals


def _cross_checks(kind: str, p: dict):
    """Constraints that involve more than one key."""
    nq = p.get("n_qubits")
    if kind == "coherence-limit":
        lens = {len(p[k]) for k in ("t1_us", "t2_us") if isinstance(p[k], list)}
        if nq is None:
            p["n_qubits"] = nq = max(lens | {1})
    if "t1_us" in p and (p["t1_us"] is None) != (p["t2_us"] is None):
        _fail("params.t2_us" if p["t2_us"] is None else "params.t1_us", "give both T1 and T2 or neither")
    if "t1_us" in p and p["t1_us"] is not None:
        n = nq or (1 if p.get("model") == "stark" or p.get("gateset") == "stark" else 2)
        t1, t2 = _per_qubit(p["t1_us"], n), _per_qubit(p["t2_us"], n)
        if t1 is None:
            _fail("params.t1_us", f"expected 1 or {n} values")
        if t2 is None:
            _fail("params.t2_us", f"expected 1 or {n} values")
        for a, b in zip(t1, t2):
            if b > 2 * a:
                _fail("params.t2_us", f"T2={b} exceeds 2*T1={2 * a}")
    if kind in ("cpa", "ramsey-stark") and p["sigma_ns"] > 0 and p["tg_ns"] < 4 * p["sigma_ns"]:
        _fail("params.tg_ns", "flat-top duration must be at least 4 sigma")
    if kind in ("cpa", "ramsey-stark") and p["sigma_ns"] == 0 and p["beta_ns"]:
        _fail("params.beta_ns", "DRAG needs a Gaussian-edged pulse (sigma_ns > 0)")
    if kind in ("framespec-cr", "heat-blindness") and p["tg_ns"] < 4 * p["sigma_ns"]:
        _fail("params.tg_ns", "flat-top duration must be at least 4 sigma")
    if kind == "simulate":
        nq = 1 if p["model"] == "stark" else 2
        st = p["initial_state"]
        if st is not None and (len(st) != nq or set(st) - set("01+-")):
            _fail("params.initial_state", f"expected {nq} characters from 0, 1, +, -")
        if p["shape"] == "flat_top" and p["tg_ns"] < 4 * p["sigma_ns"]:
            _fail("params.tg_ns", "flat-top duration must be at least 4 sigma")
        if p["shape"] == "square" and p["beta_ns"]:
            _fail("params.beta_ns", "DRAG needs a Gaussian or flat-top envelope")
    if kind in ("rb", "purity-rb", "interleaved-rb"):
        lengths = p["lengths"]
        if len(lengths) < 3 or any(b <= a for a, b in zip(lengths, lengths[1:])):
            _fail("params.lengths", "need at least 3 strictly increasing lengths")
    if kind == "interleaved-rb":
        gs = p["gateset"]
        if gs == "stark":
            p["n_qubits"] = 1
            for k, v in _STARK_FILL.items():
                p[k] = v if p[k] is None else p[k]
        elif gs == "cr":
            p["n_qubits"] = 2
            for k, v in _CR_FILL.items():
                p[k] = v if p[k] is None else p[k]
        else:
            if p["gate"] is None:
                p["gate"] = "CX" if p["n_qubits"] == 2 else "X90"
            if p["gate"] == "CX" and p["n_qubits"] != 2:
                _fail("params.gate", "CX needs n_qubits = 2")
        if gs != "ideal" and p["tg_ns"] < 4 * p["sigma_ns"]:
            _fail("params.tg_ns", "flat-top duration must be at least 4 sigma")
    if kind == "drag-cal":
        fill = dict(_STARK_FILL, n=50, beta_min_ns=-14.0, beta_max_ns=6.0, beta_points=21)
        if p["target"] == "cr":
            fill = dict(_CR_FILL, n=60, beta_min_ns=0.0, beta_max_ns=6.0, beta_points=13)
        for k, v in fill.items():
            p[k] = v if p[k] is None else p[k]
        if p["beta_max_ns"] <= p["beta_min_ns"]:
            _fail("params.beta_max_ns", "must exceed beta_min_ns")
        if p["tg_ns"] < 4 * p["sigma_ns"]:
            _fail("params.tg_ns", "flat-top duration must be at least 4 sigma")
    if kind == "heat":
        if any(n % 4 for n in p["n_reps"]) or len(set(p["n_reps"])) < 3:
            _fail("params.n_reps", "need at least 3 distinct multiples of 4")
    if "detuning_mhz" in p and p["detuning_mhz"] == 0 and kind != "simulate":
        _fail("params.detuning_mhz", "must be nonzero")


def normalize_config(experiment: str, params: dict | None = None, seed: int = 0,
                     preset: str | None = None) -> dict:
    """Validate and fill a run config; returns ``{"experiment", "seed", "params"}``.

    Preset keys that the experiment does not use are ignored; unknown keys in
    ``params`` are rejected.
    """
    if experiment not in SCHEMAS:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}; choose from {list(EXPERIMENTS)}")
    schema = SCHEMAS[experiment]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a non-negative integer, got {seed!r}")
    merged = {k: v.default for k, v in schema.items()}
    if preset is not None:
        merged.update({k: v for k, v in load_preset(preset).items() if k in schema})
    params = params or {}
    if not isinstance(params, dict):
        raise ConfigError("params", "expected an object")
    for k in params:
        if k not in schema:
            raise ConfigError(f"params.{k}", f"unknown parameter for {experiment}")
    merged.update(params)
    out = {k: _check(f"params.{k}", merged[k], schema[k]) for k in sorted(schema)}
    for k in _REQUIRED.get(experiment, ()):
        if out[k] is None:
            raise ConfigError(f"params.{k}", "required")
    _cross_checks(experiment, out)
    return {"experiment": experiment, "seed": seed, "params": out}


def config_hash(config: dict) -> str:
    return hashlib.sha256(_canonical(config).encode()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, arrays to lists, non-finite to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    return obj


# -- schedule serialization -------------------------------------------------------


def _envelope_to_dict(env) -> dict:
    beta = 0.0
    if isinstance(env, DragWrapped):
        beta, env = env.beta, env.base
    if isinstance(env, Square):
        d = {"shape": "square", "duration_ns": env.duration * 1e9}
    elif isinstance(env, Gaussian):
        d = {"shape": "gaussian", "sigma_ns": env.sigma * 1e9, "duration_ns": env.duration * 1e9}
    elif isinstance(env, FlatTopGaussian):
        d = {"shape": "flat_top", "sigma_ns": env.sigma * 1e9, "duration_ns": env.duration * 1e9}
    else:
        raise ValueError(f"cannot serialize envelope {env!r}")
    if beta:
        d["beta_ns"] = beta * 1e9
    return d


def _envelope_from_dict(d: dict):
    shape = d["shape"]
    if shape == "square":
        env = Square(ns(float(d["duration_ns"])))
    elif shape == "gaussian":
        dur = d.get("duration_ns")
        env = Gaussian(ns(float(d["sigma_ns"])), None if dur is None else ns(float(dur)))
    elif shape == "flat_top":
        env = FlatTopGaussian(ns(float(d["sigma_ns"])), ns(float(d["duration_ns"])))
    else:
        raise ValueError(f"unknown envelope shape {shape!r}")
    beta = float(d.get("beta_ns", 0.0))
    return drag_wrap(env, ns(beta)) if beta else env


def schedule_to_dict(schedule: Schedule) -> list[dict]:
    """Instruction list with start times (ns), channels and envelope parameters."""
    out = []
    for t0, ins in schedule.items:
        rec: dict[str, Any] = {"t_ns": t0 * 1e9}
        if isinstance(ins, Pulse):
            rec.update(type="pulse", channel=ins.channel, envelope=_envelope_to_dict(ins.envelope),
                       amp_mhz=ins.amp / (2e6 * np.pi), detuning_mhz=ins.detuning / (2e6 * np.pi),
                       phase_rad=ins.phase)
        elif isinstance(ins, FrameChange):
            rec.update(type="frame_change", channel=ins.channel, phase_rad=ins.delta_phase)
        elif isinstance(ins, Delay):
            rec.update(type="delay", channel=ins.channel, duration_ns=ins.duration * 1e9)
        elif isinstance(ins, Barrier):
            rec.update(type="barrier", channels=list(ins.channels))
        out.append(rec)
    return out


def schedule_from_dict(items: list[dict]) -> Schedule:
    if not isinstance(items, list):
        raise TypeError("schedule must be a list of instructions")
    placed = []
    for rec in items:
        t0 = ns(float(rec["t_ns"]))
        kind = rec["type"]
        if kind == "pulse":
            ins = Pulse(rec["channel"], _envelope_from_dict(rec["envelope"]), mhz(float(rec["amp_mhz"])),
                        mhz(float(rec.get("detuning_mhz", 0.0))), float(rec.get("phase_rad", 0.0)))
        elif kind == "frame_change":
            ins = FrameChange(rec["channel"], float(rec["phase_rad"]))
        elif kind == "delay":
            ins = Delay(rec["channel"], ns(float(rec["duration_ns"])))
        elif kind == "barrier":
            ins = Barrier(tuple(rec["channels"]))
        else:
            raise ValueError(f"unknown instruction type {kind!r}")
        placed.append((t0, ins))
    return Schedule(tuple(placed))


# -- experiment runners ------------------------------------------------------------


@dataclass
class Output:
    results: dict
    tables: dict[str, tuple[list[str], list[list]]]


def _noise(p, n) -> NoiseModel | None:
    if p.get("t1_us") is None:
        return None
    t1 = [us(v) for v in _per_qubit(p["t1_us"], n)]
    t2 = [us(v) for v in _per_qubit(p["t2_us"], n)]
    conf = None
    e = p.get("readout_error", 0.0)
    if e:
        conf = tuple(np.array([[1 - e, e], [e, 1 - e]]) for _ in range(n))
    return NoiseModel(tuple(t1), tuple(t2), conf)


def _peaks(peaks) -> list[dict]:
    return [{"position_rad": pk.position, "height": pk.height, "half_width_rad": pk.half_width,
             "uncertainty_rad": pk.uncertainty} for pk in peaks]


def _grid_table(res, qubits) -> tuple[list[str], list[list]]:
    header = ["phi_rad", "n_reps"] + [f"pop_{q}" for q in qubits]
    rows = []
    for i, n in enumerate(res.n_grid):
        for j, phi in enumerate(res.phi_grid):
            rows.append([phi, n] + [res.populations_for(q)[i, j] for q in qubits])
    return header, rows


def _stark_pulse(p, with_drag: bool = True):
    """Envelope and peak rate of the configured Stark gate (amplitude calibrated if null)."""
    from .framespec import flat_top_stark_gate, optimize_square_stark

    delta, t_g, sigma = mhz(p["detuning_mhz"]), ns(p["tg_ns"]), ns(p["sigma_ns"])
    if sigma == 0:
        env = Square(t_g)
        amp = mhz(p["amp_mhz"]) if p["amp_mhz"] is not None else optimize_square_stark(delta, t_g)[0]
    else:
        env = FlatTopGaussian(sigma, t_g)
        amp = mhz(p["amp_mhz"]) if p["amp_mhz"] is not None else flat_top_stark_gate(delta, t_g, sigma)[1]
    beta = p.get("beta_ns") or 0.0
    if with_drag and beta:
        env = drag_wrap(env, ns(beta))
    return env, amp


def run_simulate(p, ctx) -> Output:
    nq = 1 if p["model"] == "stark" else 2
    delta = mhz(p["detuning_mhz"])
    noise = _noise(p, nq)
    if p["model"] == "stark":
        model = SingleQubitDriveModel(detuning=delta, noise=noise)
    elif p["model"] == "cr":
        model = CrossResonanceModel(delta, p["mu"], p["nu"], mhz(p["zeta_mhz"]), noise=noise)
    else:
        model = SpectatorModel(delta, p["mu"], p["nu"], noise=noise)
    if p["schedule"] is not None:
        sched = schedule_from_dict(p["schedule"])
    else:
        t_g, sigma = ns(p["tg_ns"]), ns(p["sigma_ns"])
        env = {"square": lambda: Square(t_g), "gaussian": lambda: Gaussian(sigma, t_g),
               "flat_top": lambda: FlatTopGaussian(sigma, t_g)}[p["shape"]]()
        if p["beta_ns"]:
            env = drag_wrap(env, ns(p["beta_ns"]))
        channel = p["channel"] or ("u0" if p["model"] == "cr" else "d0")
        sched = Schedule().append(Pulse(channel, env, mhz(p["amp_mhz"]), phase=p["phase_rad"]))
    label = p["initial_state"] or "0" * nq
    mode = "unitary" if noise is None else "density"
    opts = PropagationOptions(mode=mode)
    psi0 = ket(label) if mode == "unitary" else density(ket(label))
    times = np.linspace(0.0, sched.duration, p["n_samples"])
    final, states = evolve(model, sched, psi0, opts, checkpoints=times)
    rows = []
    for t, s in zip(times, states):
        rows.append([t * 1e9] + [measure_populations(s, [q])[1] for q in range(nq)])
    results = {
        "duration_ns": sched.duration * 1e9,
        "final_populations": {f"pop_{q}": measure_populations(final, [q])[1] for q in range(nq)},
        "schedule": schedule_to_dict(sched),
    }
    if mode == "unitary":
        u = propagate(model, sched, PropagationOptions(frame=p["frame"]))
        results["unitary"] = {"frame": p["frame"], "re": u.real, "im": u.imag}
    return Output(results, {"simulate.csv": (["t_ns"] + [f"pop_{q}" for q in range(nq)], rows)})


def run_cpa_experiment(p, ctx) -> Output:
    from .framespec import SweepSpec, run_cpa

    delta = mhz(p["detuning_mhz"])
    env, amp = _stark_pulse(p)
    gate = Schedule().append(Pulse("d0", env, amp))
    spec = SweepSpec.full_turn(p["n_phi"], tuple(range(1, p["n_max"] + 1)))
    model = SingleQubitDriveModel(detuning=delta)
    res = run_cpa(model, gate, spec)
    grid = res.populations_for(0)
    j0 = int(np.argmin(np.abs(np.asarray(res.phi_grid))))
    i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
    peaks = res.peaks(0)
    results = {
        "amp_mhz": amp / (2e6 * np.pi),
        "t_rep_ns": gate.duration * 1e9,
        "peaks": _peaks(peaks),
        "peak_position_rad": peaks[0].position if peaks else None,
        "peak_height": peaks[0].height if peaks else None,
        "max_population": grid[i, j],
        "max_at": {"phi_rad": res.phi_grid[j], "n_reps": res.n_grid[i]},
        "phi0_max_population": grid[:, j0].max(),
        "phi0_bound": 2 * amp**2 / (amp**2 + delta**2),
        "single_gate_phi_rad": _equatorial_step(propagate(model, gate)),
        "oracle_square_phi_rad": analysis.stark_peak_oracle(amp, delta, gate.duration),
    }
    return Output(results, {"cpa.csv": _grid_table(res, [0])})


def _equatorial_step(u) -> float:
    """Frame step at which repetitions of the one-qubit unitary ``u`` excite coherently."""
    from .framespec import sector_peak

    return sector_peak(u / np.sqrt(np.linalg.det(u)))


def _cr_setup(p, beta_ns: float | None = None):
    from .framespec import calibrate_zx_half_pi
    from .qcvv.gatesets import cr_envelope, x_pi_pulse

    delta, omega = mhz(p["detuning_mhz"]), mhz(p["amp_mhz"])
    env0 = cr_envelope(ns(p["tg_ns"]), ns(p["sigma_ns"]))
    mu = p["mu"] if p["mu"] is not None else calibrate_zx_half_pi(delta, omega, env0, p["nu"])
    model = CrossResonanceModel(delta, mu, p["nu"], mhz(p.get("zeta_mhz", 0.0)))
    beta = p.get("beta_ns", 0.0) if beta_ns is None else beta_ns
    env = cr_envelope(ns(p["tg_ns"]), ns(p["sigma_ns"]), ns(beta))
    return model, omega, env, mu, x_pi_pulse("d1", ns(p["x_sigma_ns"]))


def run_framespec_cr(p, ctx) -> Output:
    from .framespec import SweepSpec, run_state_selective_framespec, sector_peak, sector_unitaries

    model, omega, env, mu, xp = _cr_setup(p)
    gate = Schedule().append(Pulse("u0", env, omega))
    spec = SweepSpec.full_turn(p["n_phi"], tuple(range(1, p["n_max"] + 1)), initial_state=p["control_state"])
    exact = sector_unitaries(model, gate)
    tables, sectors = {}, {}
    for sector in ("plus", "minus"):
        res = run_state_selective_framespec(model, gate, spec, sector, xp)
        pk = res.peaks(0)
        sectors[sector] = {
            "peaks": _peaks(pk),
            "peak_position_rad": pk[0].position if pk else None,
            "predicted_phi_rad": analysis.wrap(sector_peak(exact[sector]) - model.delta * xp.duration),
            "oracle_square_phi_rad": analysis.cr_peak_oracle(omega, model.delta, mu, gate.duration, sector,
                                                             xp.duration),
        }
        tables[f"framespec_cr_{sector}.csv"] = _grid_table(res, [0])
    sep = None
    if sectors["plus"]["peaks"] and sectors["minus"]["peaks"]:
        sep = abs(analysis.wrap(sectors["plus"]["peak_position_rad"] - sectors["minus"]["peak_position_rad"]))
    results = {"mu": mu, "zx_angle_rad": mu * omega * _area(env), "sectors": sectors,
               "separation_rad": sep, "grid_step_rad": 2 * np.pi / p["n_phi"],
               "t_rep_ns": (gate.duration + xp.duration) * 1e9}
    return Output(results, tables)


def _area(env) -> float:
    from scipy.integrate import quad

    return quad(lambda t: float(np.real(env(t))), 0, env.duration, limit=200)[0]


def _spectator_gate(p):
    from .framespec import calibrated_amplitude

    env = Gaussian(ns(p["sigma_ns"]))
    theta = np.pi if p.get("gate") == "X_pi" else np.pi / 2
    amp = mhz(p["amp_mhz"]) if p["amp_mhz"] is not None else calibrated_amplitude(env, theta)
    return Pulse("d0", env, amp), amp


def run_framespec_spectator(p, ctx) -> Output:
    from .framespec import SweepSpec, run_spectator_framespec
    from .qcvv.gatesets import x_pi_pulse

    model = SpectatorModel(mhz(p["detuning_mhz"]), p["mu"], p["nu"])
    pulse, amp = _spectator_gate(p)
    gate = Schedule().append(pulse)
    xp = x_pi_pulse("d0", ns(p["x_sigma_ns"]))
    t_rep = gate.duration + xp.duration
    spec = SweepSpec.full_turn(p["n_phi"], tuple(range(1, p["n_max"] + 1)))
    tables, preps = {}, {}
    for prep, sector in (("plus0", "plus"), ("minus0", "minus")):
        res = run_spectator_framespec(model, gate, spec, prep, xp)
        preps[prep] = {f"qubit_{q}": _peaks(res.peaks(q)) for q in (0, 1)}
        preps[prep]["oracle_phi_rad"] = analysis.spectator_peak_oracle(amp, model.delta, t_rep, sector,
                                                                       _area(pulse.envelope))
        tables[f"framespec_spectator_{prep}.csv"] = _grid_table(res, [0, 1])
    results = {"amp_mhz": amp / (2e6 * np.pi), "rotation_rad": amp * _area(pulse.envelope),
               "t_rep_ns": t_rep * 1e9, "preparations": preps,
               "oracle_ix_phi_rad": analysis.spectator_ix_peak(model.delta, t_rep)}
    return Output(results, tables)


def run_cpmg_experiment(p, ctx) -> Output:
    from .framespec import CpmgSpec, cpmg_peak_taus, run_cpmg

    model = SpectatorModel(mhz(p["detuning_mhz"]), p["mu"], p["nu"])
    pulse, amp = _spectator_gate(p)
    spec = CpmgSpec.uniform(ns(p["tau_max_ns"]), p["n"], p["gate"], ns(p["tau_step_ns"]))
    res = run_cpmg(model, spec, pulse)
    t_g = pulse.duration
    out = {}
    for q in (0, 1):
        pk = res.peaks(q, rel_height=0.2)
        pos = [x.position for x in pk]
        out[f"qubit_{q}"] = {
            "peaks_tau_ns": [x * 1e9 for x in pos],
            "mean_spacing_ns": float(np.mean(np.diff(pos))) * 1e9 if len(pos) > 1 else None,
            "phi_rad": [analysis.wrap(model.delta * (x + t_g)) for x in pos],
        }
    results = {
        "amp_mhz": amp / (2e6 * np.pi), "gate_ns": t_g * 1e9,
        "expected_spacing_ns": 2 * np.pi / abs(model.delta) * 1e9,
        "predicted_entangling_tau_ns": cpmg_peak_taus(model.delta, t_g, spec.theta_g, spec.tau_grid[-1]) * 1e9,
        "predicted_ix_tau_ns": cpmg_peak_taus(model.delta, t_g, spec.theta_g, spec.tau_grid[-1], False) * 1e9,
        "peaks": out, "warnings": res.warnings,
    }
    rows = [[t * 1e9, p["n"], res.populations[0][k], res.populations[1][k]]
            for k, t in enumerate(res.tau_grid)]
    return Output(results, {"cpmg.csv": (["tau_ns", "n_reps", "pop_0", "pop_1"], rows)})


def run_drag_cal(p, ctx) -> Output:
    from .framespec import SweepSpec, calibrate_drag, drag_signal, run_cpa, run_state_selective_framespec

    n = p["n"]
    betas = np.linspace(p["beta_min_ns"], p["beta_max_ns"], p["beta_points"])
    if p["target"] == "stark":
        model = SingleQubitDriveModel(detuning=mhz(p["detuning_mhz"]))
        env, amp = _stark_pulse(dict(p, beta_ns=0.0))

        def gate(b):
            return Schedule().append(Pulse("d0", drag_wrap(env, b) if b else env, amp))

        phi = p["phi_rad"]
        if phi is None:
            res = run_cpa(model, gate(0.0), SweepSpec.full_turn(p["n_phi"], tuple(range(1, n + 1))))
            phi = res.peaks(0)[0].position
        signals = {"stark": (drag_signal(model, gate, phi, n, aggregation=p["aggregation"]),
                             drag_signal(model, gate, phi, n, aggregation="at_n"))}
        phis = {"stark": phi}
        extra = {"amp_mhz": amp / (2e6 * np.pi)}
    else:
        model, omega, env, mu, xp = _cr_setup(dict(p, zeta_mhz=0.0), beta_ns=0.0)

        def gate(b):
            return Schedule().append(Pulse("u0", drag_wrap(env, b) if b else env, omega))

        signals, phis = {}, {}
        for sector, label in (("plus", "0+"), ("minus", "0-")):
            phi = p["phi_rad"]
            if phi is None:
                res = run_state_selective_framespec(
                    model, gate(0.0), SweepSpec.full_turn(p["n_phi"], tuple(range(1, n + 1))), sector, xp)
                phi = res.peaks(0)[0].position
            phis[sector] = phi
            signals[sector] = (drag_signal(model, gate, phi, n, label, 0, xp, aggregation=p["aggregation"]),
                               drag_signal(model, gate, phi, n, label, 0, xp, aggregation="at_n"))
        extra = {"mu": mu}

    def total(b):
        return sum(s[0](b) for s in signals.values())

    cal = calibrate_drag(total, ns(betas), p["refine_points"])
    per = {}
    for name, (sig, at_n) in signals.items():
        before, after = at_n(0.0), at_n(cal.beta)
        per[name] = {"phi_rad": phis[name], "signal_at_zero": sig(0.0), "signal_at_beta": sig(cal.beta),
                     "at_n_before": before, "at_n_after": after,
                     "at_n_reduction": before / after if after > 0 else None}
    results = {"beta_ns": cal.beta * 1e9, "n": n, "aggregation": p["aggregation"], "signals": per, **extra}
    rows = [[b * 1e9, v] for b, v in zip(cal.betas, cal.values)]
    return Output(results, {"drag_cal.csv": (["beta_ns", "signal"], rows)})


def run_ramsey_stark(p, ctx) -> Output:
    from .framespec import measure_stark_shift, stark_phase

    delta = mhz(p["detuning_mhz"])
    model = SingleQubitDriveModel(detuning=delta)
    env, amp = _stark_pulse(p)
    gate = Schedule().append(Pulse("d0", env, amp))
    u = propagate(model, gate, PropagationOptions(frame="resonant"))
    target = rotation("Z", np.sign(delta) * np.pi / 2)
    results = {
        "amp_mhz": amp / (2e6 * np.pi),
        "theta_ramsey_rad": measure_stark_shift(model, gate),
        "theta_unitary_rad": stark_phase(u),
        "theta_perturbative_rad": analysis.stark_angle(amp, delta, _area_sq(env)),
        "gate_error_vs_z90": gate_error(u, target),
    }
    return Output(results, {})


def _area_sq(env) -> float:
    """Time integral of ``|env|^2``: effective duration for the perturbative Stark angle."""
    from scipy.integrate import quad

    return quad(lambda t: float(abs(env(t)) ** 2), 0, env.duration, limit=200)[0]


def _rb_gateset(p, n):
    from .qcvv import IdealGateSet

    noise = _noise(p, n)
    durations = {"CX": ns(p["cx_ns"])}
    if p["pulse_1q_ns"]:
        durations.update({g: ns(p["pulse_1q_ns"]) for g in ("X90", "X-90", "Y90", "Y-90")})
    coherent = {}
    if p["coherent_x_rad"]:
        gate = p.get("gate") or ("CX" if n == 2 else "X90")
        err = rotation("X", p["coherent_x_rad"])
        coherent[gate] = kron(np.eye(2), err) if n == 2 else err
    return IdealGateSet(n, noise, durations, coherent), noise


def _rb_table(res, label=None):
    rows = []
    for i, m in enumerate(res.lengths):
        for s, v in enumerate(res.per_sample[i]):
            rows.append(([label] if label else []) + [int(m), s, v])
    return rows


def run_rb_experiment(p, ctx, purity=False) -> Output:
    from .qcvv import RBSpec, run_purity_rb, run_rb

    n = p["n_qubits"]
    gs, noise = _rb_gateset(p, n)
    spec = RBSpec(n, tuple(p["lengths"]), p["samples"], ctx["seed"], "purity" if purity else "standard",
                  noise=noise, durations=gs.durations, shots=p["shots"])
    res = (run_purity_rb if purity else run_rb)(spec, gs, threads=ctx["threads"])
    results = res.to_dict()
    results["coherence_limit"] = _coherence(p, n)
    name = "purity_rb.csv" if purity else "rb.csv"
    col = "purity" if purity else "survival"
    return Output(results, {name: (["length", "sample", col], _rb_table(res))})


def _coherence(p, n):
    if p.get("t1_us") is None:
        return None
    t1 = [us(v) for v in _per_qubit(p["t1_us"], n)]
    t2 = [us(v) for v in _per_qubit(p["t2_us"], n)]
    if n == 1:
        t_g = ns(p["pulse_1q_ns"])
        return {"epsilon_1q": analysis.coherence_limit_1q(t_g, t1[0], t2[0])} if t_g else None
    eps = analysis.coherence_limit_2q(ns(p["cx_ns"]), t1, t2)
    return {"epsilon_2q": eps, "epc_per_clifford": 1.5 * eps}


def run_interleaved_rb(p, ctx) -> Output:
    from .qcvv import RBSpec, run_rb
    from .qcvv.gatesets import calibrate_cx, cr_gateset, stark_gateset

    gs_kind = p["gateset"]
    n = p["n_qubits"]
    extra = {}
    if gs_kind == "ideal":
        gs, noise = _rb_gateset(p, n)
        gate = (p["gate"], (0, 1) if p["gate"] == "CX" else (0,))
    elif gs_kind == "stark":
        noise = _noise(p, 1)
        gs = stark_gateset(mhz(p["detuning_mhz"]), ns(p["tg_ns"]), ns(p["sigma_ns"]), ns(p["beta_ns"]),
                           noise, ns(p["x_sigma_ns"]))
        gate = ("ZS", (0,))
    else:
        noise = _noise(p, 2)
        model, omega, env, mu, _ = _cr_setup(dict(p, mu=None, nu=0.0, zeta_mhz=0.0))
        cal = calibrate_cx(model, omega, env)
        gs = cr_gateset(CrossResonanceModel(model.delta, mu, noise=noise), {"CX": cal}, ns(p["x_sigma_ns"]))
        gate = ("CX", (0, 1))
        extra = {"mu": mu, "cx_amp_mhz": cal.omega / (2e6 * np.pi), "cx_alpha_rad": cal.alpha,
                 "cx_rotary_mhz": cal.rotary_amp / (2e6 * np.pi), "cx_unitary_error": cal.error}
    spec = RBSpec(n, tuple(p["lengths"]), p["samples"], ctx["seed"], "interleaved", gate, noise,
                  shots=p["shots"])
    res = run_rb(spec, gs, threads=ctx["threads"])
    results = {**res.to_dict(), "interleaved_gate": list(gate[:1]) + [list(gate[1])], **extra}
    lo, hi = res.confidence_interval(z=1.0)
    results["epg_interval_1sigma"] = [lo, hi]
    rows = _rb_table(res.reference, "reference") + _rb_table(res, "interleaved")
    return Output(results, {"interleaved_rb.csv": (["sequence", "length", "sample", "survival"], rows)})


def run_heat_experiment(p, ctx) -> Output:
    from .qcvv import HEAT_ROWS, HeatSpec, heat_gate_unitary, run_heat

    rows = tuple(p["rows"]) if p["rows"] else tuple(r.index for r in HEAT_ROWS)
    spec = HeatSpec(tuple(p["n_reps"]), rows, p["shots"], ctx["seed"], p["nonlinearity_tol"])
    res = run_heat(spec, heat_gate_unitary(p["errors_rad"]))
    out = res.to_dict()
    out.pop("experiment", None)
    out["injected_rad"] = p["errors_rad"]
    table = [[k, n, res.expectations[i, j]] for i, k in enumerate(res.rows) for j, n in enumerate(res.n_reps)]
    return Output(out, {"heat.csv": (["row", "n_reps", "exp_z"], table)})


def run_coherence_limit(p, ctx) -> Output:
    n = p["n_qubits"]
    t_g = ns(p["tg_ns"])
    t1 = [us(v) for v in _per_qubit(p["t1_us"], n)]
    t2 = [us(v) for v in _per_qubit(p["t2_us"], n)]
    if n == 1:
        return Output({"n_qubits": 1, "epsilon": analysis.coherence_limit_1q(t_g, t1[0], t2[0])}, {})
    eps = analysis.coherence_limit_2q(t_g, t1, t2)
    return Output({"n_qubits": 2, "epsilon": eps, "epc_per_clifford": 1.5 * eps}, {})


def run_heat_blindness(p, ctx) -> Output:
    from .qcvv import heat_blindness_demo
    from .qcvv.gatesets import cr_envelope

    delta = mhz(p["detuning_mhz"])
    rep = heat_blindness_demo(omega=mhz(p["amp_mhz"]), envelope=cr_envelope(ns(p["tg_ns"]), ns(p["sigma_ns"])),
                              commensurate=p["commensurate"], n_framespec=p["n_framespec"],
                              n_phi=p["n_phi"], delta=delta)
    out = rep.to_dict()
    out.pop("experiment", None)
    out["heat_nonlinear_rows"] = list(rep.heat.nonlinear_rows)
    h = rep.heat
    table = [[k, n, h.expectations[i, j]] for i, k in enumerate(h.rows) for j, n in enumerate(h.n_reps)]
    return Output(out, {"heat.csv": (["row", "n_reps", "exp_z"], table)})


RUNNERS: dict[str, Callable[[dict, dict], Output]] = {
    "simulate": run_simulate,
    "cpa": run_cpa_experiment,
    "framespec-cr": run_framespec_cr,
    "framespec-spectator": run_framespec_spectator,
    "cpmg": run_cpmg_experiment,
    "drag-cal": run_drag_cal,
    "ramsey-stark": run_ramsey_stark,
    "rb": run_rb_experiment,
    "purity-rb": lambda p, ctx: run_rb_experiment(p, ctx, purity=True),
    "interleaved-rb": run_interleaved_rb,
    "heat": run_heat_experiment,
    "coherence-limit": run_coherence_limit,
    "heat-blindness": run_heat_blindness,
}


# -- driver ----------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_bundle(out_dir: Path, config: dict, output: Output) -> dict:
    """Write CSV tables and ``summary.json``; returns the summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in sorted(output.tables.items()):
        with open(out_dir / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    summary = {
        "status": "ok",
        "experiment": config["experiment"],
        "version": __version__,
        "seed": config["seed"],
        "config": config,
        "config_hash": config_hash(config),
        "files": sorted(output.tables),
        "results": output.results,
    }
    summary = _clean(summary)
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def execute(config: dict, out_dir: Path | str, threads: int = 1) -> dict:
    """Run a normalized config and write its bundle."""
    ctx = {"seed": config["seed"], "threads": threads}
    output = RUNNERS[config["experiment"]](dict(config["params"]), ctx)
    return write_bundle(Path(out_dir), config, output)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [_parse_value(t) for t in text.split(",")]
    return text


def _all_params() -> list[str]:
    return sorted({k for s in SCHEMAS.values() for k in s})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("argv", message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="offres", description="Off-resonant error simulations and benchmarks.")
    ap.add_argument("experiment", nargs="?", choices=EXPERIMENTS, help="experiment kind")
    ap.add_argument("--config", type=Path, help="JSON config file")
    ap.add_argument("--out", type=Path, help="output directory (default ./offres-<experiment>)")
    ap.add_argument("--seed", type=int, help="master seed")
    ap.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV}, then 1)")
    ap.add_argument("--preset", choices=PRESETS, help="parameter library")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any parameter (value parsed as JSON)")
    grp = ap.add_argument_group("parameter overrides")
    for key in _all_params():
        grp.add_argument("--" + key.replace("_", "-"), dest="ov_" + key, metavar="VALUE")
    return ap


def _error(code: int, kind: str, message: str, field: str | None, out_dir: Path | None) -> int:
    err = {"status": "error", "exit_code": code, "error": kind, "message": message}
    if field is not None:
        err["field"] = field
    text = json.dumps(err, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def _load_config(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    allowed = {"experiment", "seed", "preset", "params", "out"}
    for k in raw:
        if k not in allowed:
            raise ConfigError(k, "unknown top-level key")
    return raw


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["run"]:
        argv = argv[1:]
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        return _error(EXIT_SCHEMA, "schema", exc.message, exc.field, None)
    out_dir = args.out
    try:
        raw = _load_config(args.config) if args.config else {}
        experiment = args.experiment or raw.get("experiment")
        if experiment is None:
            raise ConfigError("experiment", "no experiment given on the command line or in the config")
        if args.experiment and raw.get("experiment") not in (None, args.experiment):
            raise ConfigError("experiment", f"config is for {raw['experiment']!r}, not {args.experiment!r}")
        if out_dir is None:
            out_dir = Path(raw["out"]) if raw.get("out") else Path(f"offres-{experiment}")
        params = dict(raw.get("params") or {}) if isinstance(raw.get("params", {}), dict) else raw["params"]
        schema = SCHEMAS.get(experiment, {})
        for key in _all_params():
            v = getattr(args, "ov_" + key)
            if v is not None:
                if key not in schema:
                    raise ConfigError(f"params.{key}", f"unknown parameter for {experiment}")
                params[key] = _parse_value(v)
        for item in args.set:
            if "=" not in item:
                raise ConfigError("set", f"expected KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            params[k.strip()] = _parse_value(v)
        seed = args.seed if args.seed is not None else raw.get("seed", 0)
        config = normalize_config(experiment, params, seed, args.preset or raw.get("preset"))
        threads = args.threads or int(os.environ.get(THREADS_ENV, "1") or 1)
        if threads < 1:
            raise ConfigError("threads", "must be positive")
    except ConfigError as exc:
        return _error(EXIT_SCHEMA, "schema", exc.message, exc.field, out_dir)
    except ValueError as exc:
        return _error(EXIT_SCHEMA, "schema", str(exc), "threads", out_dir)

    from .framespec import CalibrationError

    try:
        summary = execute(config, out_dir, threads)
    except CalibrationError as exc:
        return _error(EXIT_CALIBRATION, "calibration", str(exc), None, out_dir)
    except ConfigError as exc:
        return _error(EXIT_SCHEMA, "schema", exc.message, exc.field, out_dir)
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        return _error(EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}", None, out_dir)
    print(json.dumps({"status": "ok", "out": str(out_dir), "files": summary["files"] + ["summary.json"]}))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
