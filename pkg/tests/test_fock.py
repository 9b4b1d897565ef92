import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dampqfi.errors import (
    CorruptStateError,
    InvalidDimensionError,
    NotPSDError,
    PreconditionError,
    TruncationTooSmallError,
)
from dampqfi.fock import (
    DensityMatrix,
    StateVector,
    SystemConfig,
    annihilation_matrix,
    coherent_density,
    coherent_state,
    control_hamiltonian,
    hermitian_eigendecomposition,
    matrix_sqrt_psd,
    number_matrix,
    poisson_tail,
)

from conftest import random_density


def test_config_validation():
    with pytest.raises(InvalidDimensionError):
        SystemConfig(dim=1)
    with pytest.raises(PreconditionError):
        SystemConfig(gamma=0.0)
    with pytest.raises(PreconditionError):
        SystemConfig(u1=1.0)
    with pytest.raises(PreconditionError):
        SystemConfig(u2=-0.1)
    cfg = SystemConfig(alpha=2j, gamma=3.0, u1=0.5, u2=0.25)
    assert cfg.nbar == pytest.approx(4.0)
    assert (cfg.k1, cfg.k2) == (1.5, 0.75)
    assert cfg.replace(dim=7).dim == 7


def test_ladder_operators_commutator():
    dim = 12
    a = annihilation_matrix(dim)
    comm = a @ a.conj().T - a.conj().T @ a
    # [a, a+] = 1 except at the truncation edge
    assert np.allclose(np.diag(comm)[:-1], 1.0)
    assert np.diag(comm)[-1] == pytest.approx(-(dim - 1))
    assert np.allclose(a.conj().T @ a, number_matrix(dim))


def test_control_hamiltonian_diagonal():
    h = control_hamiltonian(SystemConfig(u1=0.1, u2=0.2, dim=4))
    assert np.allclose(np.diag(h), [0.0, 0.3, 1.0, 2.1])
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0


def test_poisson_tail_matches_direct_sum():
    mean, dim = 1.7, 6
    head = sum(math.exp(-mean) * mean**k / math.factorial(k) for k in range(dim))
    assert poisson_tail(mean, dim) == pytest.approx(1 - head, rel=1e-9)
    assert poisson_tail(0.0, 3) == 0.0


def test_coherent_state_amplitudes_and_eigenvector():
    alpha = 0.7 - 0.4j
    psi = coherent_state(alpha, 30)
    k = np.arange(30)
    expected = np.exp(-abs(alpha) ** 2 / 2) * alpha**k / np.array([math.sqrt(math.factorial(int(n))) for n in k])
    assert np.allclose(psi.amplitudes, expected, rtol=1e-13, atol=0)
    a_psi = annihilation_matrix(30) @ psi.amplitudes
    assert np.allclose(a_psi[:-1], alpha * psi.amplitudes[:-1], atol=1e-14)
    assert psi.normalized


def test_coherent_state_truncation_guard():
    with pytest.raises(TruncationTooSmallError):
        coherent_state(3.0, 8)
    psi = coherent_state(1.0, 5)
    assert psi.tail == pytest.approx(poisson_tail(1.0, 5))
    assert 1 - psi.norm2 == pytest.approx(psi.tail, rel=1e-9)


def test_density_matrix_invariants(rng):
    rho = random_density(rng, 5)
    DensityMatrix(rho)
    with pytest.raises(CorruptStateError):
        DensityMatrix(rho + np.triu(np.full((5, 5), 1e-6), 1))
    with pytest.raises(CorruptStateError):
        DensityMatrix(2 * rho)
    bad = np.diag([1.2, -0.2, 0, 0, 0]).astype(complex)
    with pytest.raises(CorruptStateError):
        DensityMatrix(bad)
    truncated = coherent_density(1.0, 5)
    assert truncated.trace < 1 - 1e-4
    assert truncated.normalized().trace == pytest.approx(1.0)


def test_density_matrix_is_read_only(rng):
    dm = DensityMatrix(random_density(rng, 3))
    with pytest.raises(ValueError):
        dm.matrix[0, 0] = 0.0


def test_eigendecomposition_reconstructs(rng):
    m = random_density(rng, 8)
    w, v = hermitian_eigendecomposition(m)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v.conj().T @ v, np.eye(8), atol=1e-12)
    assert np.allclose((v * w) @ v.conj().T, m, atol=1e-12)
    with pytest.raises(PreconditionError):
        hermitian_eigendecomposition(np.array([[0, 1], [0, 0]], dtype=complex))


def test_matrix_sqrt_psd(rng):
    m = random_density(rng, 6, rank=3)
    s = matrix_sqrt_psd(m)
    assert np.allclose(s @ s, m, atol=1e-10)
    # round-off negativity is clamped, real negativity is not
    assert np.allclose(matrix_sqrt_psd(np.diag([1.0, -1e-9])), np.diag([1.0, 0.0]))
    with pytest.raises(NotPSDError):
        matrix_sqrt_psd(np.diag([1.0, -1e-3]))


@settings(max_examples=40, deadline=None)
@given(re=st.floats(-1.5, 1.5), im=st.floats(-1.5, 1.5))
def test_coherent_state_mean_photon_number(re, im):
    alpha = complex(re, im)
    psi = coherent_state(alpha, 40)
    n = np.arange(40)
    assert float(np.abs(psi.amplitudes) ** 2 @ n) == pytest.approx(abs(alpha) ** 2, abs=1e-10)


def test_state_vector_normalize_and_flag():
    v = StateVector(np.array([3.0, 4.0]))
    assert v.normalize().norm2 == pytest.approx(1.0)
    with pytest.raises(CorruptStateError):
        StateVector(np.array([1.0, 1.0]), normalized=True)
