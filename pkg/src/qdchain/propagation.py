"""Time evolution of the single-electron amplitudes.

Static couplings are propagated exactly through the eigenbasis. Pulsed
couplings use the exponential midpoint rule: each step applies the exact
propagator of the Hamiltonian frozen at the step midpoint. Steps are split at
the schedule's discontinuities so piecewise-constant programs are integrated
without error beyond round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import StateVector, TridiagonalHamiltonian, _check_chain
from .spectra import eigh_tridiagonal

__all__ = [
    "TimeGrid",
    "Trajectory",
    "evolve_static",
    "evolve_static_many",
    "uniform_amplitudes",
    "binomial_amplitudes",
    "evolve_schedule",
]

UNITARITY_TOL = 1e-9
_CHUNK = 512


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps + 1`` nodes from ``start`` to ``end`` inclusive."""

    start: float
    end: float
    n_steps: int

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"grid end must exceed start, got [{self.start}, {self.end}]")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def spacing(self):
        return (self.end - self.start) / self.n_steps

    @property
    def times(self):
        return np.linspace(self.start, self.end, self.n_steps + 1)


@dataclass(frozen=True)
class Trajectory:
    """Amplitudes at every node of ``grid``; ``amplitudes[i, j]`` is A_{j+1}(tau_i)."""

    grid: TimeGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 2 or a.shape[0] != self.grid.n_steps + 1:
            raise ValueError(
                f"expected {self.grid.n_steps + 1} stored states, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def times(self):
        return self.grid.times

    @property
    def n_sites(self):
        return self.amplitudes.shape[1]

    @property
    def populations(self):
        return np.abs(self.amplitudes) ** 2

    @property
    def final_state(self):
        return self.amplitudes[-1]

    def norm_drift(self):
        """Largest deviation of the total population from 1 over all nodes."""
        return float(np.max(np.abs(self.populations.sum(axis=1) - 1.0)))


def _as_amplitudes(psi0, n=None):
    a = psi0.amplitudes if isinstance(psi0, StateVector) else np.asarray(psi0, dtype=complex)
    if n is not None and a.shape != (n,):
        raise ValueError(f"initial state has {a.size} amplitudes, chain has {n} sites")
    return a


def evolve_static(decomp, psi0, tau):
    """State at time ``tau`` under a constant Hamiltonian with spectrum ``decomp``.

    Negative ``tau`` evolves backward.
    """
    return StateVector(evolve_static_many(decomp, psi0, [tau])[0])


def evolve_static_many(decomp, psi0, taus):
    """Amplitudes at each of ``taus``, one row per time."""
    a0 = _as_amplitudes(psi0, decomp.n)
    v = decomp.eigenvectors
    coeff = v.T @ a0
    phases = np.exp(-1j * np.outer(np.asarray(taus, dtype=float), decomp.eigenvalues))
    return (phases * coeff) @ v.T


def uniform_amplitudes(n, t, tau):
    """Closed-form amplitudes for equal rates ``t``, electron starting on site 1."""
    _check_chain(n, t)
    n = int(n)
    k = np.arange(1, n + 1)
    theta = k * np.pi / (n + 1)
    j = np.arange(1, n + 1)[:, None]
    terms = np.exp(-2j * t * tau * np.cos(theta)) * np.sin(j * theta) * np.sin(theta)
    return StateVector(2.0 / (n + 1) * terms.sum(axis=1))


def binomial_amplitudes(n, t, tau):
    """Closed-form amplitudes for spin-model rates, electron starting on site 1.

    ``A_j = C(n-1, j-1)^(1/2) (-i sin t tau)^(j-1) (cos t tau)^(n-j)``.
    """
    _check_chain(n, t)
    n = int(n)
    s, c = math.sin(t * tau), math.cos(t * tau)
    amps = [math.sqrt(math.comb(n - 1, j - 1)) * (-1j * s) ** (j - 1) * c ** (n - j)
            for j in range(1, n + 1)]
    return StateVector(np.array(amps, dtype=complex))


def _substeps(schedule, times):
    """Split the grid at schedule discontinuities.

    Returns the refined edges and the index of every grid node among them.
    """
    span = times[-1] - times[0]
    bps = np.asarray(schedule.breakpoints(), dtype=float)
    bps = bps[(bps > times[0]) & (bps < times[-1])]
    if bps.size:
        pos = np.clip(np.searchsorted(times, bps), 1, times.size - 1)
        near = np.minimum(np.abs(bps - times[pos - 1]), np.abs(times[pos] - bps))
        bps = bps[near > 1e-12 * span]
    edges = np.union1d(times, bps)
    return edges, np.searchsorted(edges, times)


def _step_propagators(diag, couplings, dt, solver, tol):
    """Exact propagators exp(-i H dt) for a stack of frozen Hamiltonians."""
    m, n = couplings.shape[0], diag.size
    if solver == "lapack":
        h = np.zeros((m, n, n))
        idx = np.arange(n)
        h[:, idx, idx] = diag
        h[:, idx[:-1], idx[1:]] = couplings
        h[:, idx[1:], idx[:-1]] = couplings
        lam, v = np.linalg.eigh(h)
    elif solver == "ql":
        lam = np.empty((m, n))
        v = np.empty((m, n, n))
        prev = None
        for k in range(m):
            if prev is None or not np.array_equal(couplings[k], couplings[prev]):
                d = eigh_tridiagonal(TridiagonalHamiltonian(diag, couplings[k]), tol=tol)
                prev = k
            lam[k], v[k] = d.eigenvalues, d.eigenvectors
    else:
        raise ValueError(f"unknown solver {solver!r}")
    phase = np.exp(-1j * lam * dt[:, None])
    return np.einsum("mij,mj,mkj->mik", v, phase, v)


def evolve_schedule(spec, schedule, psi0, grid, solver="lapack", tol=1e-10):
    """Integrate the amplitude equations under a time-dependent coupling program.

    Parameters
    ----------
    spec : ChainSpec
    schedule : Schedule
        Must cover ``[grid.start, grid.end]`` and have ``spec.n_sites - 1`` links.
    psi0 : StateVector or array_like
    grid : TimeGrid
    solver : {"lapack", "ql"}
        Eigensolver for the frozen step Hamiltonians. ``"lapack"`` batches
        them through ``numpy.linalg.eigh``; ``"ql"`` runs
        :func:`~qdchain.spectra.eigh_tridiagonal` per step (slow, reference).

    Returns
    -------
    Trajectory
    """
    n = spec.n_sites
    a = _as_amplitudes(psi0, n).copy()
    if schedule.n_links != n - 1:
        raise ValueError(f"schedule has {schedule.n_links} links, chain needs {n - 1}")
    slack = 1e-12 * max(1.0, schedule.duration)
    if grid.start < -slack or grid.end > schedule.duration + slack:
        raise ValueError(
            f"grid [{grid.start}, {grid.end}] not covered by schedule [0, {schedule.duration}]")

    times = grid.times
    edges, node_idx = _substeps(schedule, times)
    dt = np.diff(edges)
    mids = np.clip(0.5 * (edges[:-1] + edges[1:]), 0.0, schedule.duration)

    out = np.empty((times.size, n), dtype=complex)
    out[0] = a
    node = 1
    diag = spec.site_energies
    for lo in range(0, dt.size, _CHUNK):
        hi = min(lo + _CHUNK, dt.size)
        props = _step_propagators(diag, schedule.sample_many(mids[lo:hi]), dt[lo:hi], solver, tol)
        for k in range(hi - lo):
            a = props[k] @ a
            if node < times.size and lo + k + 1 == node_idx[node]:
                out[node] = a
                node += 1
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite amplitudes during propagation")
    traj = Trajectory(grid, out)
    drift = traj.norm_drift()
    if drift > UNITARITY_TOL:
        raise FloatingPointError(f"norm drift {drift:.3e} exceeds {UNITARITY_TOL}")
    return traj
