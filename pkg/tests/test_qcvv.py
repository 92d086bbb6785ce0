import numpy as np
import pytest

from offres.dynamics import mhz, ns, us
from offres.qcore import NoiseModel, gate_error, kron, rotation
from offres.qcvv.clifford import (CX, NATIVE_1Q, clifford_group, decompose_clifford, equal_up_to_phase,
                                  is_symplectic, sample_clifford, sequence_unitary, symplectic_matrix,
                                  tableau)
from offres.qcvv.gatesets import calibrate_cx, cr_envelope, stark_gateset
from offres.qcvv.heat import (HEAT_PAULIS, HEAT_ROWS, HeatSpec, build_heat_sequence, heat_gate_unitary,
                              response_matrix, run_heat)
from offres.qcvv.rb import IdealGateSet, RBSpec, clifford_sequence, depolarizing_gateset, run_purity_rb, run_rb
from offres.dynamics import CrossResonanceModel
from offres.framespec import calibrate_zx_half_pi
from offres.analysis import coherence_limit_1q


# -- Clifford group ------------------------------------------------------------


def test_group_sizes():
    assert len(clifford_group(1)) == 24
    assert len(clifford_group(2)) == 11520


@pytest.mark.parametrize("n", [1, 2])
def test_group_closure_and_inverse(n):
    g = clifford_group(n)
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = g.sample(rng), g.sample(rng)
        c = g.compose(a, b)
        assert equal_up_to_phase(c.unitary, b.unitary @ a.unitary)
        inv = g.inverse(a)
        assert equal_up_to_phase(inv.unitary @ a.unitary, np.eye(2**n))


def test_decomposition_matches_tableau():
    rng = np.random.default_rng(5)
    g = clifford_group(2)
    for _ in range(1000):
        c = g.sample(rng)
        u = sequence_unitary(decompose_clifford(c), 2)
        assert tableau(u) == c.tableau
        assert is_symplectic(symplectic_matrix(c.tableau))


def test_mean_cx_count():
    rng = np.random.default_rng(0)
    counts = [sample_clifford(2, rng).cx_count for _ in range(10000)]
    assert np.mean(counts) == pytest.approx(1.5, abs=0.02)


def test_native_gates_are_clifford():
    g = clifford_group(1)
    for u in NATIVE_1Q.values():
        g.index_of(u)
    assert equal_up_to_phase(CX @ CX, np.eye(4))


@pytest.mark.parametrize("n,m", [(1, 7), (2, 5)])
def test_rb_sequence_inverts_to_identity(n, m):
    rng = np.random.default_rng(2)
    blocks = clifford_sequence(n, m, rng)
    u = sequence_unitary([g for b in blocks for g in b], n)
    assert equal_up_to_phase(u, np.eye(2**n))


# -- RB -----------------------------------------------------------------------


def test_rb_spec_validation():
    with pytest.raises(ValueError):
        RBSpec(3, (0, 1, 2))
    with pytest.raises(ValueError):
        RBSpec(1, (0, 1))
    with pytest.raises(ValueError):
        RBSpec(1, (0, 5, 5))
    with pytest.raises(ValueError):
        RBSpec(1, (0, 1, 2), mode="interleaved")
    with pytest.raises(ValueError):
        RBSpec(1, (0, 1, 2), samples=0)
    with pytest.raises(ValueError):
        RBSpec(1, (0, 1, 2), noise=NoiseModel.uniform(2, us(40), us(40)))


def test_noiseless_rb_has_no_decay():
    res = run_rb(RBSpec(2, (0, 5, 10, 20), samples=3))
    assert np.allclose(res.values, 1.0)
    assert res.epc == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("n,p", [(1, 0.01), (2, 0.02)])
def test_depolarizing_rb_recovers_epc(n, p):
    d = 2**n
    res = run_rb(RBSpec(n, (0, 5, 10, 20, 40, 80), samples=4), depolarizing_gateset(n, p))
    expected = p * (d - 1) / d
    assert abs(res.epc - expected) < max(3 * res.epc_err, 1e-6)


def test_rb_thread_determinism():
    noise = NoiseModel.uniform(2, us(40), us(40))
    spec = RBSpec(2, (0, 2, 5, 10), samples=4, seed=9, noise=noise, shots=200)
    a = run_rb(spec, threads=1).to_dict()
    b = run_rb(spec, threads=3).to_dict()
    assert a == b


PULSE_NS = {g: 50e-9 for g in ("X90", "X-90", "Y90", "Y-90")}


def test_purity_rb_insensitive_to_coherent_error():
    # error on a gate the tomography pulses do not use
    noise = NoiseModel.uniform(1, us(20), us(20))
    spec = RBSpec(1, (0, 10, 20, 50, 100), samples=6, seed=1, noise=noise, durations=PULSE_NS)
    coherent = {"Y90": rotation("X", 0.1)}
    faulty = IdealGateSet(1, noise, spec.durations, coherent)
    base, bad = run_purity_rb(spec), run_purity_rb(spec, faulty)
    assert abs(bad.epc - base.epc) < 2 * np.hypot(bad.epc_err, base.epc_err)
    std_base, std_bad = run_rb(spec), run_rb(spec, faulty)
    assert std_bad.epc - std_base.epc > 3 * np.hypot(std_bad.epc_err, std_base.epc_err)


def test_interleaved_epg_matches_relaxation_limit():
    noise = NoiseModel.uniform(1, us(20), us(20))
    spec = RBSpec(1, (0, 10, 20, 50, 100), samples=4, mode="interleaved", interleaved=("X90", (0,)),
                  noise=noise, durations=PULSE_NS)
    res = run_rb(spec)
    assert res.reference is not None
    expected = coherence_limit_1q(50e-9, us(20), us(20))
    assert abs(res.epg - expected) < max(3 * res.epg_err, 0.2 * expected)


# -- gate sets ------------------------------------------------------------------


def test_stark_gateset_gate_is_z90():
    gs = stark_gateset(mhz(-50), ns(96), ns(14.22))
    assert ("ZS", (0,)) in gs.gates


def test_calibrated_cx_error_small():
    d, om = mhz(-59), mhz(20)
    env = cr_envelope()
    model = CrossResonanceModel(d, calibrate_zx_half_pi(d, om, env))
    cal = calibrate_cx(model, om, env)
    assert cal.error < 1e-3


# -- HEAT -----------------------------------------------------------------------


def test_heat_spec_validation():
    with pytest.raises(ValueError):
        HeatSpec(n_reps=(0, 4, 6))
    with pytest.raises(ValueError):
        HeatSpec(n_reps=(0, 4))
    with pytest.raises(ValueError):
        HeatSpec(rows=(99,))
    with pytest.raises(ValueError):
        HeatSpec(shots=0)
    with pytest.raises(ValueError):
        build_heat_sequence(99, 4)


def test_heat_ideal_gate_gives_zero():
    res = run_heat(HeatSpec(), heat_gate_unitary())
    assert all(abs(v) < 1e-9 for v in res.errors.values())


def test_heat_sequences_equal_length():
    for row in HEAT_ROWS:
        blocks = build_heat_sequence(row.index, 4)
        lengths = {len(b) for b in blocks[1:-1]}
        assert len(lengths) == 1


def test_response_matrix_full_rank():
    a = response_matrix()
    assert a.shape == (len(HEAT_ROWS), 15)
    assert np.linalg.matrix_rank(a, tol=1e-6) == 15


@pytest.mark.parametrize("label", HEAT_PAULIS)
def test_heat_recovers_single_pauli(label):
    res = run_heat(HeatSpec(), heat_gate_unitary({label: 0.01}))
    assert res.errors[label] == pytest.approx(0.01, rel=0.1)
    others = [abs(v) for k, v in res.errors.items() if k != label]
    assert max(others) < 2e-3


def test_heat_shot_noise_seeded():
    u = heat_gate_unitary({"IX": 0.01})
    a = run_heat(HeatSpec(shots=500, seed=4), u)
    b = run_heat(HeatSpec(shots=500, seed=4), u)
    assert a.errors == b.errors
    assert all(np.isfinite(v) for v in a.error_sigmas.values())


def test_unitary_helpers():
    assert gate_error(heat_gate_unitary(), (np.eye(4) - 1j * kron(np.diag([1, -1]), np.array([[0, 1], [1, 0]])))
                      / np.sqrt(2)) == pytest.approx(0.0, abs=1e-12)
