import numpy as np
import pytest

from qdchain.chain import ChainSpec, TridiagonalHamiltonian, build_hamiltonian, normalize_sign, spin_couplings, uniform_couplings
from qdchain.spectra import (
    EigensolverError,
    SpectralDecomposition,
    eigh_tridiagonal,
    spin_spectrum,
    uniform_spectrum,
    _tql,
)


def test_uniform_spectrum_small():
    assert np.allclose(uniform_spectrum(2, 1.0).eigenvalues, [-1, 1], atol=1e-15)
    assert np.allclose(uniform_spectrum(3, 1.0).eigenvalues, [-np.sqrt(2), 0, np.sqrt(2)], atol=1e-15)


@pytest.mark.parametrize("n", range(2, 16))
def test_uniform_spectrum_symmetric(n):
    lam = uniform_spectrum(n, 0.7).eigenvalues
    assert np.allclose(lam, -lam[::-1], atol=1e-14)


def test_spin_spectrum_levels():
    assert np.array_equal(spin_spectrum(2, 1.0).eigenvalues, [-1, 1])
    assert np.array_equal(spin_spectrum(9, 1.0).eigenvalues, np.arange(-8, 9, 2))
    assert np.allclose(np.diff(spin_spectrum(12, 0.3).eigenvalues), 0.6, rtol=0, atol=1e-15)


def test_eigh_two_by_two():
    d = eigh_tridiagonal(TridiagonalHamiltonian([0, 0], [1]))
    assert np.allclose(d.eigenvalues, [-1, 1])
    assert np.allclose(d.eigenvectors, np.array([[1, 1], [-1, 1]]) / np.sqrt(2))


@pytest.mark.parametrize("backend", ["ql", "lapack"])
@pytest.mark.parametrize("n", range(2, 16))
def test_numeric_matches_analytic(n, backend):
    for couplings, analytic in ((uniform_couplings, uniform_spectrum), (spin_couplings, spin_spectrum)):
        h = build_hamiltonian(ChainSpec(n), couplings(n, 1.0))
        num = eigh_tridiagonal(h, backend=backend)
        ref = analytic(n, 1.0)
        assert np.max(np.abs(num.eigenvalues - ref.eigenvalues)) <= 1e-10
        assert np.max(np.abs(num.eigenvectors - normalize_sign(ref.eigenvectors))) <= 1e-8


@pytest.mark.parametrize("seed", range(20))
def test_random_chain_properties(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    eps = rng.normal(size=n)
    h = TridiagonalHamiltonian(eps, rng.uniform(0, 2, n - 1))
    d = eigh_tridiagonal(h)
    assert np.all(np.diff(d.eigenvalues) >= 0)
    assert d.residuals(h).max() <= 1e-10
    assert d.orthonormality_error() <= 1e-10
    assert abs(d.eigenvalues.sum() - eps.sum()) <= 1e-10
    # LAPACK agrees
    ref = np.linalg.eigvalsh(h.to_dense())
    assert np.allclose(d.eigenvalues, ref, rtol=0, atol=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_bipartite_symmetry(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 30))
    lam = eigh_tridiagonal(TridiagonalHamiltonian(np.zeros(n), rng.uniform(0, 3, n - 1))).eigenvalues
    assert np.max(np.abs(lam + lam[::-1])) <= 1e-10


def test_degenerate_cluster_orthonormal():
    # disconnected chain: two identical blocks give doubly degenerate levels
    h = TridiagonalHamiltonian(np.zeros(6), [1.0, 1.0, 0.0, 1.0, 1.0])
    d = eigh_tridiagonal(h)
    assert d.orthonormality_error() <= 1e-12
    assert d.residuals(h).max() <= 1e-12
    z = eigh_tridiagonal(TridiagonalHamiltonian(np.zeros(5), np.zeros(4)))
    assert np.array_equal(z.eigenvectors, np.eye(5))


def test_deterministic():
    rng = np.random.default_rng(7)
    h = TridiagonalHamiltonian(rng.normal(size=25), rng.normal(size=24))
    a, b = eigh_tridiagonal(h), eigh_tridiagonal(h)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()


def test_iteration_cap(monkeypatch):
    import qdchain.spectra as spectra

    monkeypatch.setattr(spectra, "SWEEPS_PER_SITE", 0)
    with pytest.raises(EigensolverError):
        _tql(np.zeros(4), np.ones(3))


def test_tolerance_failure_is_loud():
    h = TridiagonalHamiltonian(np.zeros(3), [1.0, 1.0])
    with pytest.raises(EigensolverError):
        eigh_tridiagonal(h, tol=1e-30)
    with pytest.raises(ValueError):
        eigh_tridiagonal(h, tol=0)


def test_decomposition_validates():
    with pytest.raises(ValueError):
        SpectralDecomposition([1.0, 0.0], np.eye(2))
    with pytest.raises(ValueError):
        SpectralDecomposition([0.0, 1.0], np.eye(3))
