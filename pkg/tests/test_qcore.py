import numpy as np
import pytest
from conftest import PAULI_Z, random_density, random_hermitian

from hybridlcu import qcore
from hybridlcu.qcore import TOL


def test_eigh_identity():
    w, v = qcore.eigh(np.eye(2))
    assert np.allclose(w, [1.0, 1.0])
    assert np.allclose(v @ v.conj().T, np.eye(2))


def test_eigh_pauli_z():
    w, v = qcore.eigh(PAULI_Z)
    assert np.allclose(w, [-1.0, 1.0])
    # eigenvector of -1 is |1>, of +1 is |0> (up to phase)
    assert abs(abs(v[1, 0]) - 1.0) < 1e-12
    assert abs(abs(v[0, 1]) - 1.0) < 1e-12


def test_eigh_reconstruction_residual():
    rng = np.random.default_rng(7)
    h = random_hermitian(8, rng)
    w, v = qcore.eigh(h)
    assert np.linalg.norm((v * w) @ v.conj().T - h) <= 1e-9
    assert np.all(np.diff(w) >= 0)


def test_eigh_rejects_non_hermitian():
    with pytest.raises(ValueError, match="symmetry violation"):
        qcore.eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_expm_zero_time_is_identity():
    rng = np.random.default_rng(3)
    h = random_hermitian(4, rng)
    assert np.allclose(qcore.expm_i_hermitian(h, 0.0), np.eye(4), atol=1e-14)


def test_expm_pauli_z_pi():
    u = qcore.expm_i_hermitian(PAULI_Z, np.pi)
    assert np.allclose(u, -np.eye(2), atol=1e-12)


def test_expm_unitary_and_group_property():
    rng = np.random.default_rng(11)
    h = random_hermitian(6, rng)
    u = qcore.expm_i_hermitian(h, 0.7)
    assert np.linalg.norm(u.conj().T @ u - np.eye(6)) <= TOL.unitarity
    lhs = qcore.expm_i_hermitian(h, 0.3 + 0.4)
    rhs = qcore.expm_i_hermitian(h, 0.3) @ qcore.expm_i_hermitian(h, 0.4)
    assert np.linalg.norm(lhs - rhs) <= 1e-9


def test_kron_identities():
    assert np.allclose(qcore.kron(np.eye(2), np.eye(2)), np.eye(4))


def test_partial_trace_product_state():
    rng = np.random.default_rng(5)
    rho_a = random_density(2, rng)
    rho_b = random_density(3, rng)
    joint = np.kron(rho_a, rho_b)
    out = qcore.partial_trace(joint, [2, 3], axis=1)
    assert np.allclose(out, rho_a * np.trace(rho_b))


def test_partial_trace_preserves_trace_both_orders():
    rng = np.random.default_rng(9)
    rho = random_density(4, rng)

    # direct index-summation oracle on the reshaped tensor
    t = rho.reshape(2, 2, 2, 2)
    over_b = np.zeros((2, 2), dtype=complex)
    over_a = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            for s in range(2):
                over_b[i, j] += t[i, s, j, s]
                over_a[i, j] += t[s, i, s, j]
    assert np.allclose(qcore.partial_trace(rho, [2, 2], axis=1), over_b)
    assert np.allclose(qcore.partial_trace(rho, [2, 2], axis=0), over_a)
    for axis in (0, 1):
        assert abs(np.trace(qcore.partial_trace(rho, [2, 2], axis)).real - 1.0) <= 1e-12


def test_pure_state_norm_enforced():
    qcore.PureState([1.0, 0.0])
    with pytest.raises(ValueError):
        qcore.PureState([1.0, 1.0])
    unnorm = qcore.PureState([1.0, 1.0], normalized=False)
    assert unnorm.dimension == 2


def test_mixed_state_validation():
    qcore.MixedState(np.eye(2) / 2)
    with pytest.raises(ValueError):
        qcore.MixedState(np.eye(2))  # trace 2
    with pytest.raises(ValueError):
        qcore.MixedState(np.array([[1.5, 0.0], [0.0, -0.5]]))  # negative eigenvalue


def test_observable_caches_spectrum():
    obs = qcore.Observable(PAULI_Z)
    assert np.allclose(obs.eigenvalues, [-1.0, 1.0])
    assert obs.spectral_norm == 1.0
    with pytest.raises(ValueError):
        qcore.Observable(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_dimension_caps():
    with pytest.raises(ValueError, match="cap"):
        qcore.MixedState(np.eye(2**7 * 2) / (2**7 * 2))


def test_matrix_text_roundtrip():
    rng = np.random.default_rng(21)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    text = qcore.matrix_to_text(m)
    assert text.splitlines()[0] == "dim 3 3"
    back = qcore.matrix_from_text(text)
    assert np.array_equal(back, m)  # 17 significant digits round-trips doubles


def test_matrix_text_rejects_garbage():
    with pytest.raises(ValueError):
        qcore.matrix_from_text("not a matrix")
    with pytest.raises(ValueError):
        qcore.matrix_from_text("dim 2 2\n0 0\n")
