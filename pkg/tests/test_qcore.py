import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from offres.qcore import (X, Y, Z, KrausChannel, NoiseModel, amplitude_damping, average_gate_error, density,
                          depolarizing, expm_hermitian, gate_error, ket, kron, pauli, pauli_basis,
                          pauli_coefficients, pauli_expectations, pauli_labels, pauli_transfer_matrix,
                          purity, purity_from_pauli_expectations, rotation, thermal_relaxation)
from offres.analysis import coherence_limit_1q, coherence_limit_2q

angles = st.floats(-10, 10, allow_nan=False)


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def test_pauli_labels_and_products():
    assert pauli_labels(1) == ["I", "X", "Y", "Z"]
    assert len(pauli_labels(2)) == 16
    assert np.allclose(pauli("ZX"), np.kron(Z, X))
    assert np.allclose(X @ Y, 1j * Z)


def test_pauli_basis_orthogonal():
    b = pauli_basis(2)
    gram = np.einsum("iab,jba->ij", b, b)
    assert np.allclose(gram, 4 * np.eye(16))


@pytest.mark.parametrize("d", [2, 4])
def test_expm_hermitian_matches_scipy(d):
    rng = np.random.default_rng(d)
    for _ in range(5):
        h = random_hermitian(rng, d)
        t = rng.uniform(-3, 3)
        assert np.allclose(expm_hermitian(h, t), expm(-1j * h * t), atol=1e-12)


def test_expm_hermitian_stack_and_errors():
    rng = np.random.default_rng(0)
    hs = np.array([random_hermitian(rng, 2) for _ in range(3)])
    us = expm_hermitian(hs, 0.7)
    for h, u in zip(hs, us):
        assert np.allclose(u, expm(-0.7j * h))
    with pytest.raises(ValueError):
        expm_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        expm_hermitian(np.eye(8))


@given(angles)
def test_rotation_is_exponential(theta):
    for axis in ("X", "Y", "Z", "ZX"):
        assert np.allclose(rotation(axis, theta), expm(-0.5j * theta * pauli(axis)))


def test_kets():
    assert np.allclose(ket("1"), [0, 1])
    assert np.allclose(ket("+"), np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(ket("0-"), np.kron([1, 0], np.array([1, -1]) / np.sqrt(2)))


@settings(max_examples=30)
@given(st.integers(0, 2**31))
def test_purity_from_paulis_matches_trace(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform()
    rho = p * density(random_state(rng, 4)) + (1 - p) * density(random_state(rng, 4))
    assert np.isclose(purity_from_pauli_expectations(pauli_expectations(rho), 2), purity(rho))


def test_purity_limits():
    assert np.isclose(purity(np.eye(2) / 2), 0.5)
    assert np.isclose(purity(density(ket("+"))), 1.0)


def test_kraus_rejects_non_trace_preserving():
    with pytest.raises(ValueError):
        KrausChannel((0.5 * np.eye(2),))


def test_compose_order():
    # amplitude damping (full) then X flips |1> to |1>: 1 -> 0 -> 1
    ch = amplitude_damping(1.0).compose(KrausChannel.from_unitary(X))
    out = ch(density(ket("1")))
    assert np.isclose(out[1, 1], 1.0)


def test_thermal_relaxation_analytic():
    t, t1, t2 = 3e-6, 20e-6, 15e-6
    ch = thermal_relaxation(t, t1, t2)
    rho = ch(density(ket("+")))
    assert np.isclose(rho[1, 1], 0.5 * np.exp(-t / t1))
    assert np.isclose(abs(rho[0, 1]), 0.5 * np.exp(-t / t2))
    with pytest.raises(ValueError):
        thermal_relaxation(t, 10e-6, 25e-6)


def test_depolarizing_error():
    for n, p in ((1, 0.03), (2, 0.05)):
        d = 2**n
        r = average_gate_error(pauli_transfer_matrix(depolarizing(p, n)), n)
        assert np.isclose(r, p * (d - 1) / d)


@given(angles)
def test_gate_error_of_small_rotation(eps):
    assert np.isclose(gate_error(rotation("Z", eps), np.eye(2)), 2 / 3 * np.sin(eps / 2) ** 2)


def test_ptm_of_unitary_is_orthogonal():
    r = pauli_transfer_matrix(rotation("ZX", 0.3))
    assert np.allclose(r @ r.T, np.eye(16))


def test_coherence_limit_equals_relaxation_gate_error():
    t, t1, t2 = 96e-9, 124e-6, 107e-6
    assert np.isclose(gate_error(thermal_relaxation(t, t1, t2), np.eye(2)), coherence_limit_1q(t, t1, t2))
    ch = thermal_relaxation(300e-9, 40e-6, 40e-6).tensor(thermal_relaxation(300e-9, 40e-6, 40e-6))
    assert np.isclose(gate_error(ch, np.eye(4)), coherence_limit_2q(300e-9, 40e-6, 40e-6))


def test_pauli_coefficients_reconstruct():
    u = rotation("ZX", 0.4) @ kron(rotation("X", 0.1), np.eye(2))
    c = pauli_coefficients(u)
    assert np.allclose(sum(v * pauli(k) for k, v in c.items()), u)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel((10e-6,), (25e-6,))
    with pytest.raises(ValueError):
        NoiseModel((10e-6, 10e-6), (5e-6,))
    m = NoiseModel.uniform(2, 40e-6, 40e-6, 0.03)
    assert m.n_qubits == 2 and np.allclose(m.confusion[0], [[0.97, 0.03], [0.03, 0.97]])
