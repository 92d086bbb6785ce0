import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from offres.cli import (ConfigError, config_hash, main, normalize_config, schedule_from_dict,
                        schedule_to_dict)
from offres.dynamics import CrossResonanceModel, mhz, ns, propagate
from offres.pulse import Barrier, Delay, FlatTopGaussian, FrameChange, Gaussian, Pulse, Schedule, Square, drag_wrap


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_coherence_limit_example(tmp_path, capsys):
    code, out, _ = run(["coherence-limit", "--t1-us", 124, "--t2-us", 107, "--tg-ns", 96,
                        "--out", tmp_path], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["results"]["epsilon"] == pytest.approx(4.28e-4, abs=1e-5)
    assert json.loads(out)["status"] == "ok"


def test_two_qubit_coherence_limit_preset(tmp_path, capsys):
    code, _, _ = run(["coherence-limit", "--preset", "fig7_purity", "--tg-ns", 300, "--out", tmp_path], capsys)
    assert code == 0
    res = json.loads((tmp_path / "summary.json").read_text())["results"]
    assert res["epc_per_clifford"] == pytest.approx(1.35e-2, abs=2e-4)


def test_negative_t1_is_schema_error(tmp_path, capsys):
    code, _, err = run(["coherence-limit", "--t1-us", -5, "--t2-us", 10, "--tg-ns", 96,
                        "--out", tmp_path], capsys)
    assert code == 2
    msg = json.loads(err)
    assert msg["field"] == "params.t1_us" and msg["status"] == "error"
    assert json.loads((tmp_path / "error.json").read_text())["exit_code"] == 2


def test_t2_above_twice_t1_rejected(tmp_path, capsys):
    code, _, err = run(["coherence-limit", "--t1-us", 10, "--t2-us", 30, "--tg-ns", 96,
                        "--out", tmp_path], capsys)
    assert code == 2 and "t2" in json.loads(err)["field"]


def test_unknown_parameter_and_flag(tmp_path, capsys):
    assert run(["cpa", "--set", "bogus=1", "--out", tmp_path], capsys)[0] == 2
    code, _, err = run(["cpa", "--bogus", "1"], capsys)
    assert code == 2 and json.loads(err)["field"] == "argv"
    # a real parameter of another experiment is still unknown here
    assert run(["cpa", "--t1-us", "3", "--out", tmp_path], capsys)[0] == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "cpa", "colour": "red"}))
    code, _, err = run(["--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 2 and json.loads(err)["field"] == "colour"


def test_missing_required(capsys, tmp_path):
    code, _, err = run(["coherence-limit", "--t1-us", 10, "--out", tmp_path], capsys)
    assert code == 2


def test_calibration_failure_exit_code(tmp_path, capsys):
    code, _, err = run(["drag-cal", "--preset", "table1_stark", "--beta-min-ns", 0, "--beta-max-ns", 1,
                        "--beta-points", 5, "--n", 10, "--out", tmp_path], capsys)
    assert code == 4
    assert json.loads(err)["error"] == "calibration"


def test_normalize_config_layers():
    cfg = normalize_config("cpa", {"n_max": 40}, seed=3, preset="table1_stark")
    assert cfg["params"]["n_max"] == 40
    assert cfg["params"]["tg_ns"] == 96
    assert cfg["seed"] == 3
    assert config_hash(cfg) == config_hash(json.loads(json.dumps(cfg)))
    with pytest.raises(ConfigError):
        normalize_config("cpa", {"n_max": 0})
    with pytest.raises(ConfigError):
        normalize_config("cpa", {"n_max": 2.5})
    with pytest.raises(ConfigError):
        normalize_config("cpa", {"detuning_mhz": float("nan")})
    with pytest.raises(ConfigError):
        normalize_config("nope", {})


def test_rerun_from_embedded_config_is_identical(tmp_path, capsys):
    a = tmp_path / "a"
    args = ["rb", "--n-qubits", 1, "--lengths", "0,5,10,20", "--samples", 3, "--shots", 100,
            "--t1-us", 40, "--t2-us", 40, "--seed", 5]
    assert run(args + ["--out", a], capsys)[0] == 0
    first = json.loads((a / "summary.json").read_text())
    cfg = tmp_path / "again.json"
    cfg.write_text(json.dumps(first["config"]))
    b = tmp_path / "b"
    assert run(["--config", cfg, "--out", b], capsys)[0] == 0
    assert (a / "summary.json").read_text() == (b / "summary.json").read_text()
    assert (a / "rb.csv").read_text() == (b / "rb.csv").read_text()


def test_threads_do_not_change_results(tmp_path, capsys, monkeypatch):
    args = ["rb", "--n-qubits", 2, "--lengths", "0,2,5", "--samples", 3, "--shots", 50,
            "--t1-us", 40, "--t2-us", 40]
    assert run(args + ["--threads", 1, "--out", tmp_path / "s"], capsys)[0] == 0
    monkeypatch.setenv("OFFRES_THREADS", "4")
    assert run(args + ["--out", tmp_path / "p"], capsys)[0] == 0
    for name in ("summary.json", "rb.csv"):
        assert (tmp_path / "s" / name).read_text() == (tmp_path / "p" / name).read_text()


def test_cpa_config_file_bundle(tmp_path, capsys):
    cfg = tmp_path / "stark.json"
    cfg.write_text(json.dumps({"experiment": "cpa", "preset": "table1_stark", "seed": 0}))
    code, _, _ = run(["--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 0
    rows = read_csv(tmp_path / "o" / "cpa.csv")
    assert rows[0] == ["phi_rad", "n_reps", "pop_0"]
    assert len(rows) == 1 + 160 * 150
    res = json.loads((tmp_path / "o" / "summary.json").read_text())["results"]
    assert res["peak_position_rad"] == pytest.approx(res["single_gate_phi_rad"], abs=0.04)
    assert 0 < res["peak_height"] <= 1
    assert res["max_population"] > 0.9
    assert res["phi0_max_population"] < res["phi0_bound"]


def test_schedule_round_trip():
    s = Schedule().append(Pulse("d0", Gaussian(ns(7.11)), mhz(30), phase=0.3))
    s = s.append(FrameChange("d0", -0.7)).append(Delay("d0", ns(12)))
    s = s | Schedule().append(Pulse("u0", drag_wrap(FlatTopGaussian(ns(14.22), ns(213.33)), ns(2.5)),
                                    mhz(20), detuning=mhz(1)))
    s = s.append(Barrier(())).append(Pulse("d1", Square(ns(20)), mhz(5)))
    d = schedule_to_dict(s)
    back = schedule_from_dict(json.loads(json.dumps(d)))
    assert len(back.items) == len(s.items)
    assert back.duration == pytest.approx(s.duration)
    m = CrossResonanceModel(mhz(-59), 0.07)
    assert np.allclose(propagate(m, back), propagate(m, s), atol=1e-9)


def test_simulate_with_schedule(tmp_path, capsys):
    sched = [{"t_ns": 0, "type": "pulse", "channel": "d0",
              "envelope": {"shape": "square", "duration_ns": 50}, "amp_mhz": 10}]
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"experiment": "simulate",
                               "params": {"detuning_mhz": 0.0, "schedule": sched, "n_samples": 11}}))
    assert run(["--config", cfg, "--out", tmp_path / "o"], capsys)[0] == 0
    res = json.loads((tmp_path / "o" / "summary.json").read_text())["results"]
    assert res["final_populations"]["pop_0"] == pytest.approx(np.sin(mhz(10) * 50e-9 / 2) ** 2)
    assert len(read_csv(tmp_path / "o" / "simulate.csv")) == 12


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "offres", "coherence-limit", "--t1-us", "100",
                           "--t2-us", "100", "--tg-ns", "50", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "summary.json").exists()
