"""Chain model: domain types, Hamiltonian assembly, coupling profiles and dark states.

Sites are labelled 1..N in docstrings and in every external format; arrays are
0-based internally. All energies and rates are in units of the coupling scale,
times in units of its inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateInputError",
    "ChainSpec",
    "CouplingVector",
    "TridiagonalHamiltonian",
    "StateVector",
    "build_hamiltonian",
    "uniform_couplings",
    "spin_couplings",
    "cpt_state",
    "cpt_state_two_family",
    "three_level_eigensystem",
    "normalize_sign",
]

NORM_TOL = 1e-12
SPIN_CHANNELS = ("up", "down")


class DegenerateInputError(ValueError):
    """Raised when a formula is undefined for the given couplings."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def normalize_sign(v, rel_tol=1e-8):
    """Flip ``v`` so that its first non-negligible component is positive.

    Components below ``rel_tol * max|v|`` count as zero. Works on a single
    vector or on the columns of a matrix.
    """
    v = np.array(v, copy=True)
    if v.ndim == 1:
        return v * _sign_of_first(v, rel_tol)
    for k in range(v.shape[1]):
        v[:, k] *= _sign_of_first(v[:, k], rel_tol)
    return v


def _sign_of_first(v, rel_tol):
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return 1.0
    idx = np.flatnonzero(np.abs(v) > rel_tol * scale)[0]
    return -1.0 if np.real(v[idx]) < 0 else 1.0


@dataclass(frozen=True)
class ChainSpec:
    """A chain of ``n_sites`` tunnel-coupled dots for one spin channel.

    ``site_energies`` default to zero, i.e. the frame rotating with the common
    dot energy. Nonzero values model static level disorder.
    """

    n_sites: int
    site_energies: np.ndarray = field(default=None)
    spin_channel: str = "up"

    def __post_init__(self):
        n = int(self.n_sites)
        if n < 2:
            raise ValueError(f"n_sites must be >= 2, got {self.n_sites}")
        object.__setattr__(self, "n_sites", n)
        eps = np.zeros(n) if self.site_energies is None else np.asarray(self.site_energies, float)
        if eps.shape != (n,):
            raise ValueError(f"site_energies must have length {n}, got shape {eps.shape}")
        if not np.all(np.isfinite(eps)):
            raise ValueError("site_energies must be finite")
        object.__setattr__(self, "site_energies", _frozen(eps))
        if self.spin_channel not in SPIN_CHANNELS:
            raise ValueError(f"spin_channel must be one of {SPIN_CHANNELS}, got {self.spin_channel!r}")

    def __eq__(self, other):
        if not isinstance(other, ChainSpec):
            return NotImplemented
        return (self.n_sites == other.n_sites and self.spin_channel == other.spin_channel
                and np.array_equal(self.site_energies, other.site_energies))

    __hash__ = None


@dataclass(frozen=True)
class CouplingVector:
    """Instantaneous tunneling rates t_1..t_{N-1} between neighbouring dots."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError(f"couplings must be a non-empty 1-d vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("couplings must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n_sites(self):
        return self.values.size + 1

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.array(self.values, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, CouplingVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


def as_couplings(couplings):
    if isinstance(couplings, CouplingVector):
        return couplings
    return CouplingVector(couplings)


@dataclass(frozen=True)
class TridiagonalHamiltonian:
    """Real symmetric tridiagonal matrix stored as its two bands."""

    diagonal: np.ndarray
    offdiagonal: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float)
        e = np.asarray(self.offdiagonal, dtype=float)
        if d.ndim != 1 or e.ndim != 1 or e.size != d.size - 1:
            raise ValueError(
                f"inconsistent bands: diagonal {d.shape}, offdiagonal {e.shape}")
        object.__setattr__(self, "diagonal", _frozen(d))
        object.__setattr__(self, "offdiagonal", _frozen(e))

    @property
    def n(self):
        return self.diagonal.size

    def to_dense(self):
        return (np.diag(self.diagonal) + np.diag(self.offdiagonal, 1)
                + np.diag(self.offdiagonal, -1))

    def matvec(self, v):
        v = np.asarray(v)
        out = self.diagonal * v
        out[:-1] += self.offdiagonal * v[1:]
        out[1:] += self.offdiagonal * v[:-1]
        return out

    def norm(self):
        """Infinity norm (max absolute row sum)."""
        a = np.abs(self.diagonal).copy()
        a[:-1] += np.abs(self.offdiagonal)
        a[1:] += np.abs(self.offdiagonal)
        return float(a.max())


@dataclass(frozen=True)
class StateVector:
    """Single-electron amplitudes A_1..A_N on the dots, unit norm."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size < 1:
            raise ValueError(f"amplitudes must be a non-empty 1-d vector, got shape {a.shape}")
        norm2 = float(np.vdot(a, a).real)
        if not abs(norm2 - 1.0) <= NORM_TOL:
            raise ValueError(f"state is not normalized: |A|^2 = {norm2!r}")
        object.__setattr__(self, "amplitudes", _frozen(a, complex))

    @classmethod
    def localized(cls, n, site=1):
        """Electron on ``site`` (1-based)."""
        if not 1 <= site <= n:
            raise ValueError(f"site must be in [1, {n}], got {site}")
        a = np.zeros(n, complex)
        a[site - 1] = 1.0
        return cls(a)

    @classmethod
    def normalized(cls, amplitudes):
        a = np.asarray(amplitudes, dtype=complex)
        return cls(a / np.linalg.norm(a))

    @property
    def n_sites(self):
        return self.amplitudes.size

    @property
    def populations(self):
        return np.abs(self.amplitudes) ** 2

    def __len__(self):
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return np.array(self.amplitudes, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return np.array_equal(self.amplitudes, other.amplitudes)

    __hash__ = None


def build_hamiltonian(spec, couplings):
    """Assemble the single-electron tridiagonal Hamiltonian of the chain."""
    couplings = as_couplings(couplings)
    if len(couplings) != spec.n_sites - 1:
        raise ValueError(
            f"expected {spec.n_sites - 1} couplings for {spec.n_sites} sites, got {len(couplings)}")
    return TridiagonalHamiltonian(spec.site_energies, couplings.values)


def _check_chain(n, t):
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    if not t > 0:
        raise ValueError(f"coupling scale must be positive, got {t}")


def uniform_couplings(n, t=1.0):
    """Equal rates ``t`` on all ``n - 1`` links."""
    _check_chain(n, t)
    return CouplingVector(np.full(int(n) - 1, float(t)))


def spin_couplings(n, t=1.0):
    """Rates ``t * sqrt((n - j) * j)`` for j = 1..n-1.

    This maps the chain onto a spin J = (n-1)/2 precessing in a field and gives
    an equally spaced spectrum with gap ``2t``.
    """
    _check_chain(n, t)
    j = np.arange(1, int(n))
    # integer product first keeps the profile exactly mirror-symmetric
    return CouplingVector(t * np.sqrt(((int(n) - j) * j).astype(float)))


def cpt_state(couplings, n=None):
    """Zero-energy (coherent population trapping) eigenstate for odd ``n``.

    Site 2m+1 carries ``(-1)^m t_1 t_3 ... t_{2m-1} * t_{2m+2} ... t_{N-1}``,
    even sites carry nothing. Valid for vanishing site energies. The returned
    state is normalized and sign-fixed (first nonzero amplitude positive).
    """
    couplings = as_couplings(couplings)
    if n is None:
        n = couplings.n_sites
    if n < 3 or n % 2 == 0:
        raise ValueError(f"dark state requires odd n >= 3, got {n}")
    if len(couplings) != n - 1:
        raise ValueError(f"expected {n - 1} couplings for {n} sites, got {len(couplings)}")
    t = np.abs(couplings.values)
    scale = t.max()
    if scale == 0.0:
        raise DegenerateInputError("all couplings vanish; dark state undefined")
    t = couplings.values / scale
    odd = t[0::2]   # t_1, t_3, ..., t_{N-2}
    even = t[1::2]  # t_2, t_4, ..., t_{N-1}
    J = (n - 1) // 2
    amps = np.zeros(n)
    for m in range(J + 1):
        amps[2 * m] = (-1) ** m * np.prod(odd[:m]) * np.prod(even[m:])
    norm = np.linalg.norm(amps)
    if norm == 0.0:
        raise DegenerateInputError("all alternating coupling products vanish; dark state undefined")
    return StateVector(normalize_sign(amps / norm, rel_tol=0.0))


def cpt_state_two_family(t_odd, t_even, n):
    """Dark state when odd links share ``t_odd`` and even links share ``t_even``.

    Site 2m+1 carries ``(-t_odd)^m * t_even^(J-m)`` with J = (n-1)/2.
    """
    if n < 3 or n % 2 == 0:
        raise ValueError(f"dark state requires odd n >= 3, got {n}")
    scale = max(abs(t_odd), abs(t_even))
    if scale == 0.0:
        raise DegenerateInputError("t_odd and t_even both vanish; dark state undefined")
    a, b = t_odd / scale, t_even / scale
    J = (n - 1) // 2
    amps = np.zeros(n)
    for m in range(J + 1):
        amps[2 * m] = (-a) ** m * b ** (J - m)
    return StateVector(normalize_sign(amps / np.linalg.norm(amps), rel_tol=0.0))


def three_level_eigensystem(t1, t2):
    """Closed-form eigensystem of the three-dot chain with couplings (t1, t2).

    Returns a :class:`~qdchain.spectra.SpectralDecomposition` with eigenvalues
    ``(-W, 0, W)``, ``W = sqrt(t1**2 + t2**2)``. The middle vector is the dark
    state ``(t2, 0, -t1) / W``; the bright vector of eigenvalue ``lam = +-W`` is
    ``(t1, lam, t2) / (sqrt(2) W)`` for positive off-diagonal couplings.
    """
    from .spectra import SpectralDecomposition

    w = math.hypot(t1, t2)
    if w == 0.0:
        raise DegenerateInputError("t1 and t2 both vanish")
    # rescale first: subnormal inputs make t / hypot(t1, t2) inexact
    m = max(abs(t1), abs(t2))
    r = math.hypot(t1 / m, t2 / m)
    a, b = t1 / m / r, t2 / m / r
    vecs = np.empty((3, 3))
    for k, sign in enumerate((-1.0, 0.0, 1.0)):
        if sign == 0.0:
            v = np.array([b, 0.0, -a])
        else:
            v = np.array([a, sign, b]) / math.sqrt(2.0)
        vecs[:, k] = normalize_sign(v, rel_tol=0.0)
    return SpectralDecomposition(np.array([-w, 0.0, w]), vecs)
