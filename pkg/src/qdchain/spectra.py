"""Spectra of the chain Hamiltonian.

Closed forms exist for two coupling profiles: uniform rates (sine eigenvectors,
cosine band) and spin-model rates (equally spaced levels). Anything else goes
through :func:`eigh_tridiagonal`, an implicit-shift QL iteration on the two
bands of the matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import (
    TridiagonalHamiltonian,
    ChainSpec,
    build_hamiltonian,
    normalize_sign,
    spin_couplings,
    _check_chain,
)

__all__ = [
    "EigensolverError",
    "SpectralDecomposition",
    "uniform_spectrum",
    "spin_spectrum",
    "eigh_tridiagonal",
]

DEFAULT_TOL = 1e-10
SWEEPS_PER_SITE = 30
_EPS = np.finfo(float).eps


class EigensolverError(RuntimeError):
    """The tridiagonal eigensolver failed to converge or to meet its tolerance."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and the matching orthonormal eigenvectors.

    ``eigenvectors[:, k]`` belongs to ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float)
        vecs = np.array(self.eigenvectors, dtype=float)
        n = lam.size
        if vecs.shape != (n, n):
            raise ValueError(f"eigenvectors must be {n}x{n}, got {vecs.shape}")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        lam.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vecs)

    @property
    def n(self):
        return self.eigenvalues.size

    def residuals(self, h):
        """Max-norm residual ``|H v_k - lam_k v_k|`` for every pair."""
        hv = np.column_stack([h.matvec(self.eigenvectors[:, k]) for k in range(self.n)])
        return np.max(np.abs(hv - self.eigenvectors * self.eigenvalues), axis=0)

    def orthonormality_error(self):
        v = self.eigenvectors
        return float(np.max(np.abs(v.T @ v - np.eye(self.n))))


def uniform_spectrum(n, t=1.0):
    """Closed-form spectrum of the chain with equal rates ``t``.

    Eigenvalues are ``2t cos(k pi / (n+1))``; eigenvector k has amplitude
    ``sqrt(2/(n+1)) sin(j k pi / (n+1))`` on site j.
    """
    _check_chain(n, t)
    n = int(n)
    k = np.arange(n, 0, -1)  # descending k gives ascending cos
    theta = k * np.pi / (n + 1)
    lam = 2.0 * t * np.cos(theta)
    j = np.arange(1, n + 1)[:, None]
    vecs = np.sqrt(2.0 / (n + 1)) * np.sin(j * theta[None, :])
    # cos is only monotone up to rounding near the band centre
    order = np.argsort(lam, kind="stable")
    return SpectralDecomposition(lam[order], vecs[:, order])


def spin_spectrum(n, t=1.0, tol=DEFAULT_TOL):
    """Spectrum of the spin-model chain: levels ``t (2k - n - 1)``, gap ``2t``.

    The eigenvectors come from the numerical solver and are checked against
    the exact levels through their residuals.
    """
    _check_chain(n, t)
    n = int(n)
    lam = t * (2.0 * np.arange(1, n + 1) - n - 1)
    h = build_hamiltonian(ChainSpec(n), spin_couplings(n, t))
    vecs = eigh_tridiagonal(h, tol=tol).eigenvectors
    decomp = SpectralDecomposition(lam, vecs)
    worst = decomp.residuals(h).max()
    if worst > tol * max(1.0, h.norm()):
        raise EigensolverError(f"spin-model eigenvectors miss the exact levels by {worst:.3e}")
    return decomp


def eigh_tridiagonal(h, tol=DEFAULT_TOL, backend="ql"):
    """Full eigendecomposition of a real symmetric tridiagonal matrix.

    Parameters
    ----------
    h : TridiagonalHamiltonian
    tol : float
        Bound on every pair residual and on the deviation of the Gram matrix
        from identity, relative to ``max(1, ||H||_inf)``.
    backend : {"ql", "lapack"}
        ``"ql"`` is the implicit-shift QL iteration implemented here;
        ``"lapack"`` defers to :func:`scipy.linalg.eigh_tridiagonal`. Both are
        post-processed identically.

    Returns
    -------
    SpectralDecomposition
        Eigenvalues ascending, eigenvectors sign-normalized (first
        non-negligible component positive).

    Raises
    ------
    EigensolverError
        On non-convergence within ``30 * n`` QL sweeps, or if the result
        misses ``tol``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if backend == "ql":
        lam, vecs = _tql(h.diagonal, h.offdiagonal)
    elif backend == "lapack":
        from scipy.linalg import eigh_tridiagonal as _lapack

        lam, vecs = _lapack(h.diagonal, h.offdiagonal)
    else:
        raise ValueError(f"unknown backend {backend!r}")

    order = np.argsort(lam, kind="stable")
    lam, vecs = lam[order], vecs[:, order]
    scale = max(1.0, h.norm())
    _reorthonormalize_clusters(lam, vecs, 1e-12 * scale)
    decomp = SpectralDecomposition(lam, normalize_sign(vecs))

    worst = decomp.residuals(h).max()
    if not worst <= tol * scale:
        raise EigensolverError(f"eigenpair residual {worst:.3e} exceeds tolerance")
    gram = decomp.orthonormality_error()
    if not gram <= tol * scale:
        raise EigensolverError(f"eigenvectors not orthonormal (Gram error {gram:.3e})")
    return decomp


def _tql(diagonal, offdiagonal):
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    Returns unsorted eigenvalues and the accumulated rotation matrix whose
    columns are the eigenvectors.
    """
    n = diagonal.size
    d = [float(x) for x in diagonal]
    e = [float(x) for x in offdiagonal] + [0.0]
    z = np.eye(n)
    budget = SWEEPS_PER_SITE * n
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd or abs(e[m]) < np.finfo(float).tiny:
                    break
                m += 1
            if m == l:
                break
            budget -= 1
            if budget < 0:
                raise EigensolverError(
                    f"QL iteration did not converge within {SWEEPS_PER_SITE * n} sweeps")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i].copy()
                z[:, i] = c * zi - s * z[:, i + 1]
                z[:, i + 1] = s * zi + c * z[:, i + 1]
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d), z


def _reorthonormalize_clusters(lam, vecs, gap):
    """Modified Gram-Schmidt inside every run of eigenvalues closer than ``gap``."""
    n = lam.size
    start = 0
    for stop in range(1, n + 1):
        if stop < n and lam[stop] - lam[stop - 1] < gap:
            continue
        if stop - start > 1:
            for k in range(start, stop):
                v = vecs[:, k]
                for q in range(start, k):
                    v -= (vecs[:, q] @ v) * vecs[:, q]
                v /= np.linalg.norm(v)
        start = stop
