"""Coupling programs for the transfer protocols.

A :class:`Schedule` holds, for every link of the chain, a list of pulses whose
values add up to the instantaneous tunneling rate on that link.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .chain import CouplingVector, as_couplings, spin_couplings, _check_chain

__all__ = [
    "Pulse",
    "Schedule",
    "sample_couplings",
    "collective_pi_protocol",
    "sequential_pi_protocol",
    "ctap_protocol",
    "ctap_geometry",
    "static_protocol",
]

SHAPES = ("rectangular", "gaussian")
GAUSSIAN_CUTOFF = 3.0  # truncation radius in pulse widths


@dataclass(frozen=True)
class Pulse:
    """One pulse on one link.

    A rectangular pulse is ``amplitude`` on ``[on, off)``. A gaussian pulse is
    ``amplitude * exp(-(tau - center)**2 / width**2)`` on ``[on, off]`` and
    exactly zero outside.
    """

    shape: str
    amplitude: float
    center: float
    width: float
    on: float
    off: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"pulse shape must be one of {SHAPES}, got {self.shape!r}")
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError(f"pulse amplitude must be finite and >= 0, got {self.amplitude}")
        if not self.width > 0:
            raise ValueError(f"pulse width must be positive, got {self.width}")
        if not self.off > self.on:
            raise ValueError(f"pulse support must have off > on, got [{self.on}, {self.off}]")

    @classmethod
    def rectangular(cls, amplitude, on, off):
        return cls("rectangular", float(amplitude), 0.5 * (on + off), off - on, float(on), float(off))

    @classmethod
    def gaussian(cls, amplitude, center, width, on=None, off=None):
        if on is None:
            on = center - GAUSSIAN_CUTOFF * width
        if off is None:
            off = center + GAUSSIAN_CUTOFF * width
        return cls("gaussian", float(amplitude), float(center), float(width), float(on), float(off))

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.shape == "rectangular":
            inside = (tau >= self.on) & (tau < self.off)
            return np.where(inside, self.amplitude, 0.0)
        inside = (tau >= self.on) & (tau <= self.off)
        x = (tau - self.center) / self.width
        return np.where(inside, self.amplitude * np.exp(-x * x), 0.0)

    def derivative(self, tau):
        """Time derivative inside the support (zero outside)."""
        tau = np.asarray(tau, dtype=float)
        if self.shape == "rectangular":
            return np.zeros_like(tau)
        x = (tau - self.center) / self.width
        return -2.0 * x / self.width * self(tau)


@dataclass(frozen=True)
class Schedule:
    """Pulse program for ``n_links`` links over ``[0, duration]``."""

    pulses: tuple
    duration: float

    def __post_init__(self):
        pulses = tuple(tuple(link) for link in self.pulses)
        if not pulses:
            raise ValueError("schedule needs at least one link")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        slack = 1e-12 * self.duration
        for j, link in enumerate(pulses, start=1):
            for p in link:
                if p.on < -slack or p.off > self.duration + slack:
                    raise ValueError(
                        f"pulse on link {j} spans [{p.on}, {p.off}], outside [0, {self.duration}]")
        object.__setattr__(self, "pulses", pulses)
        object.__setattr__(self, "duration", float(self.duration))

    @property
    def n_links(self):
        return len(self.pulses)

    @property
    def n_pulses(self):
        return sum(len(link) for link in self.pulses)

    def sample_many(self, taus):
        """Coupling values at each of ``taus``, shape ``(len(taus), n_links)``.

        The final instant is sampled as a left limit, so a pulse that ends
        exactly at ``duration`` is still on there.
        """
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        taus = np.where(taus >= self.duration, np.nextafter(self.duration, -np.inf), taus)
        out = np.zeros((taus.size, self.n_links))
        for j, link in enumerate(self.pulses):
            for p in link:
                out[:, j] += p(taus)
        return out

    def breakpoints(self):
        """Sorted times where some link may jump."""
        pts = {p.on for link in self.pulses for p in link}
        pts.update(p.off for link in self.pulses for p in link)
        return np.array(sorted(pts))

    def scaled(self, factors):
        """Copy with the k-th pulse (links in order) scaled by ``factors[k]``."""
        factors = np.asarray(factors, dtype=float)
        if factors.shape != (self.n_pulses,):
            raise ValueError(f"need {self.n_pulses} factors, got shape {factors.shape}")
        it = iter(factors)
        pulses = tuple(tuple(replace(p, amplitude=p.amplitude * float(next(it))) for p in link)
                       for link in self.pulses)
        return Schedule(pulses, self.duration)


def sample_couplings(schedule, tau):
    """Instantaneous couplings at ``tau`` in ``[0, duration]``."""
    slack = 1e-12 * schedule.duration
    if not -slack <= tau <= schedule.duration + slack:
        raise ValueError(f"tau={tau} outside schedule [0, {schedule.duration}]")
    return CouplingVector(schedule.sample_many([tau])[0])


def static_protocol(couplings, duration):
    """Couplings held constant over ``[0, duration]``."""
    couplings = as_couplings(couplings)
    return Schedule(tuple((Pulse.rectangular(t, 0.0, duration),) if t > 0 else ()
                          for t in couplings.values), duration)


def collective_pi_protocol(n, t=1.0):
    """Spin-model rates switched on together for ``pi / (2t)``."""
    _check_chain(n, t)
    return static_protocol(spin_couplings(n, t), math.pi / (2.0 * t))


def sequential_pi_protocol(couplings):
    """Link j alone carries ``t_j`` for ``pi / (2 t_j)``, links in order 1..N-1."""
    couplings = as_couplings(couplings)
    if np.any(couplings.values <= 0):
        raise ValueError("sequential pi pulses need all couplings > 0")
    links = []
    on = 0.0
    for t in couplings.values:
        off = on + math.pi / (2.0 * t)
        links.append((Pulse.rectangular(t, on, off),))
        on = off
    return Schedule(tuple(links), on)


def ctap_geometry(width, delay=None, total=None):
    """Fill in the default pulse delay (1.2 widths) and total time."""
    if delay is None:
        delay = 1.2 * width
    if total is None:
        total = 2.0 * delay + 2.0 * GAUSSIAN_CUTOFF * width
    return float(delay), float(total)


def ctap_protocol(n, t_max, width, delay=None, total=None):
    """Counterintuitive two-family gaussian program for adiabatic transfer.

    Even links (t_2, t_4, ...) peak at ``total/2 - delay/2``, odd links
    (t_1, t_3, ...) at ``total/2 + delay/2``; both families have amplitude
    ``t_max`` and width ``width``. Pulses are truncated at three widths and
    clipped to ``[0, total]``.
    """
    if int(n) != n or n < 3 or n % 2 == 0:
        raise ValueError(f"ctap needs odd n >= 3, got {n}")
    if not t_max > 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    delay, total = ctap_geometry(width, delay, total)
    if not delay > 0:
        raise ValueError(
            f"counterintuitive ordering violated: odd-family pulse must peak after the "
            f"even family (delay={delay})")
    if not delay < total:
        raise ValueError(f"delay must be smaller than total, got delay={delay}, total={total}")
    c_even = 0.5 * total - 0.5 * delay
    c_odd = 0.5 * total + 0.5 * delay

    def family_pulse(center):
        on = max(0.0, center - GAUSSIAN_CUTOFF * width)
        off = min(total, center + GAUSSIAN_CUTOFF * width)
        return Pulse.gaussian(t_max, center, width, on, off)

    even, odd = family_pulse(c_even), family_pulse(c_odd)
    # link j (1-based) is odd when j = 1, 3, ...
    return Schedule(tuple((odd if j % 2 else even,) for j in range(1, int(n))), total)
