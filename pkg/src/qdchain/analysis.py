"""Transfer metrics, adiabaticity diagnostics, revivals and disorder sweeps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec, StateVector, build_hamiltonian
from .propagation import TimeGrid, evolve_schedule
from .protocols import ctap_protocol, sample_couplings
from .spectra import eigh_tridiagonal

__all__ = [
    "AdiabaticityTrace",
    "RobustnessReport",
    "transfer_fidelity",
    "adiabaticity_trace",
    "revival_max",
    "robustness_sweep",
    "calibrate_ctap_width",
    "sample_rng",
]


def transfer_fidelity(traj, site=None):
    """Population on the last site (or ``site``, 1-based) at the final node."""
    if traj.amplitudes.shape[0] == 0:
        raise ValueError("empty trajectory")
    j = traj.n_sites if site is None else site
    p = float(abs(traj.amplitudes[-1, j - 1]) ** 2)
    return min(p, 1.0)


def revival_max(traj, site=1, cutoff=0.5):
    """Largest population on ``site`` at nodes later than ``start + cutoff``.

    ``cutoff`` removes the trivial neighbourhood of the initial time where the
    starting site is still almost fully occupied.
    """
    if not 1 <= site <= traj.n_sites:
        raise ValueError(f"site must be in [1, {traj.n_sites}], got {site}")
    times = traj.times
    keep = times >= times[0] + cutoff
    if not np.any(keep):
        raise ValueError(f"no grid nodes beyond cutoff {cutoff}")
    return float(traj.populations[keep, site - 1].max())


@dataclass(frozen=True)
class AdiabaticityTrace:
    """Nonadiabatic couplings of the dark state along a schedule.

    Per node: ``dark_index`` (-1 where the dark state is ambiguous), the
    eigenvalues, ``couplings[i, k] = |<psi_k|d psi_0/d tau>|`` and ``gaps[i, k] =
    |lam_k - lam_0|`` (NaN in the dark column), and the worst ratio over k.
    ``overlaps[i]`` is the overlap of the aligned dark vectors at nodes i-1, i.
    """

    grid: TimeGrid
    dark_index: np.ndarray
    eigenvalues: np.ndarray
    couplings: np.ndarray
    gaps: np.ndarray
    ratio: np.ndarray
    overlaps: np.ndarray

    @property
    def ambiguous(self):
        return self.dark_index < 0

    @property
    def max_ratio(self):
        r = self.ratio[np.isfinite(self.ratio)]
        return float(r.max()) if r.size else float("nan")

    @property
    def peak_time(self):
        r = np.where(np.isfinite(self.ratio), self.ratio, -np.inf)
        return float(self.grid.times[np.argmax(r)])


def adiabaticity_trace(spec, schedule, grid, gap_tol=1e-9, backend="lapack"):
    """Compare dark-state rotation speed with its gaps to the other eigenstates.

    The dark state is the instantaneous eigenvector whose eigenvalue is
    nearest zero. Where another eigenvalue comes within ``gap_tol * max(1,
    ||H||)`` of it the node is flagged ambiguous and carries no ratio. The
    derivative is a central difference of sign-aligned dark vectors (one-sided
    next to ambiguous nodes and at the ends).
    """
    n = spec.n_sites
    if n % 2 == 0:
        raise ValueError(f"adiabaticity trace needs odd n (a dark state), got {n}")
    times = grid.times
    m = times.size
    lam, vecs = _node_spectra(spec, schedule, times, backend)
    offd = np.abs(schedule.sample_many(times))
    rowsum = np.abs(spec.site_energies) + np.pad(offd, ((0, 0), (0, 1))) + np.pad(offd, ((0, 0), (1, 0)))
    scale = np.maximum(1.0, rowsum.max(axis=1))
    dark = np.full(m, -1)
    for i in range(m):
        k0 = int(np.argmin(np.abs(lam[i])))
        others = np.delete(lam[i], k0)
        if np.min(np.abs(others - lam[i, k0])) > gap_tol * scale[i]:
            dark[i] = k0

    psi0 = np.full((m, n), np.nan)
    overlaps = np.full(m, np.nan)
    prev = None
    for i in range(m):
        if dark[i] < 0:
            prev = None
            continue
        v = vecs[i][:, dark[i]].copy()
        if prev is not None:
            ov = v @ psi0[prev]
            if ov < 0:
                v, ov = -v, -ov
            if prev == i - 1:
                overlaps[i] = ov
        psi0[i] = v
        prev = i

    defined = dark >= 0
    dpsi = np.full((m, n), np.nan)
    for i in range(m):
        if not defined[i]:
            continue
        lo = i - 1 if i > 0 and defined[i - 1] else i
        hi = i + 1 if i < m - 1 and defined[i + 1] else i
        if hi > lo:
            dpsi[i] = (psi0[hi] - psi0[lo]) / (times[hi] - times[lo])

    couplings = np.full((m, n), np.nan)
    gaps = np.full((m, n), np.nan)
    ratio = np.full(m, np.nan)
    for i in range(m):
        if not defined[i] or np.isnan(dpsi[i, 0]):
            continue
        c = np.abs(vecs[i].T @ dpsi[i])
        g = np.abs(lam[i] - lam[i, dark[i]])
        c[dark[i]] = np.nan
        g[dark[i]] = np.nan
        couplings[i], gaps[i] = c, g
        ratio[i] = np.nanmax(c / g)
    return AdiabaticityTrace(grid, dark, lam, couplings, gaps, ratio, overlaps)


def _node_spectra(spec, schedule, times, backend):
    n = spec.n_sites
    if backend == "lapack":
        # one batched call; signs are aligned by the caller
        offd = schedule.sample_many(times)
        h = np.zeros((times.size, n, n))
        idx = np.arange(n)
        h[:, idx, idx] = spec.site_energies
        h[:, idx[:-1], idx[1:]] = offd
        h[:, idx[1:], idx[:-1]] = offd
        return np.linalg.eigh(h)
    lam = np.empty((times.size, n))
    vecs = np.empty((times.size, n, n))
    for i, tau in enumerate(times):
        d = eigh_tridiagonal(build_hamiltonian(spec, sample_couplings(schedule, tau)),
                             backend=backend)
        lam[i], vecs[i] = d.eigenvalues, d.eigenvectors
    return lam, vecs


def sample_rng(seed, index):
    """Generator for sample ``index`` of a sweep seeded with ``seed``.

    Streams are derived from the pair (seed, index) through numpy's
    ``SeedSequence`` (PCG64), so any sample can be reproduced on its own and
    results do not depend on the order samples are run in.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass(frozen=True)
class RobustnessReport:
    n_samples: int
    sigma: float
    seed: int
    fidelities: np.ndarray

    @property
    def mean(self):
        return float(np.mean(self.fidelities))

    @property
    def min(self):
        return float(np.min(self.fidelities))

    @property
    def std(self):
        return float(np.std(self.fidelities))

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "sigma": self.sigma,
            "seed": self.seed,
            "mean": self.mean,
            "min": self.min,
            "std": self.std,
            "fidelities": [float(f) for f in self.fidelities],
        }


def robustness_sweep(spec, schedule, sigma, n_samples, seed, grid=None,
                     psi0=None, energy_sigma=0.0):
    """Final-site fidelity under frozen random rescaling of every pulse.

    Each sample multiplies every pulse amplitude by its own ``1 + delta``,
    ``delta ~ U[-sigma, sigma]``. With ``energy_sigma > 0`` the site energies
    also get an additive ``U[-energy_sigma, energy_sigma]`` offset. The disorder
    is held fixed during each run.
    """
    if sigma < 0 or energy_sigma < 0:
        raise ValueError("noise levels must be >= 0")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if grid is None:
        grid = TimeGrid(0.0, schedule.duration, 2000)
    if psi0 is None:
        psi0 = StateVector.localized(spec.n_sites)
    fids = np.empty(n_samples)
    for i in range(n_samples):
        rng = sample_rng(seed, i)
        factors = 1.0 + rng.uniform(-sigma, sigma, schedule.n_pulses)
        sample_spec = spec
        if energy_sigma > 0:
            eps = spec.site_energies + rng.uniform(-energy_sigma, energy_sigma, spec.n_sites)
            sample_spec = ChainSpec(spec.n_sites, eps, spec.spin_channel)
        traj = evolve_schedule(sample_spec, schedule.scaled(factors), psi0, grid)
        fids[i] = transfer_fidelity(traj)
    fids.setflags(write=False)
    return RobustnessReport(int(n_samples), float(sigma), int(seed), fids)


def calibrate_ctap_width(n, t_max, widths, band, n_steps=2000):
    """First width in ``widths`` whose default-geometry CTAP fidelity lies in ``band``.

    Returns ``(width, fidelity)``; raises ``LookupError`` if none does.
    """
    lo, hi = band
    spec = ChainSpec(n)
    psi0 = StateVector.localized(n)
    for w in widths:
        schedule = ctap_protocol(n, t_max, w)
        traj = evolve_schedule(spec, schedule, psi0, TimeGrid(0.0, schedule.duration, n_steps))
        f = transfer_fidelity(traj)
        if lo <= f <= hi:
            return float(w), f
    raise LookupError(f"no width in {list(widths)} lands in [{lo}, {hi}]")
