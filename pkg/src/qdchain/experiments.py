"""Run configured experiments and write their CSV/JSON outputs."""
from __future__ import annotations

import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .analysis import adiabaticity_trace, robustness_sweep, transfer_fidelity
from .chain import ChainSpec, StateVector, spin_couplings, uniform_couplings
from .config import ExperimentConfig, parse_config
from .propagation import TimeGrid, evolve_schedule
from .protocols import (
    Schedule,
    collective_pi_protocol,
    ctap_protocol,
    sequential_pi_protocol,
    static_protocol,
)

__all__ = [
    "FIGURES",
    "ROBUST_CTAP",
    "OUT_ENV",
    "build_schedule",
    "simulate",
    "run_experiment",
    "run_sweep",
    "reproduce_figure",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

OUT_ENV = "QDCHAIN_OUT"
DIGITS = 12

# fig3a width from calibrate_ctap_width(9, 1.0, range(10, 21), (0.65, 0.75));
# fig3b doubles width, delay and total.
FIGURES = {
    "fig2a": {"protocol": "uniform_static", "n_sites": 9, "t": 1.0,
              "grid": {"duration": 50.0, "n_steps": 2000}},
    "fig2b": {"protocol": "spin_static", "n_sites": 9, "t": 1.0,
              "grid": {"duration": 3 * np.pi, "n_steps": 2000}},
    "fig3a": {"protocol": "ctap", "n_sites": 9, "t": 1.0,
              "ctap": {"t_max": 1.0, "width": 14.0, "delay": 16.8, "total": 117.6},
              "grid": {"n_steps": 2000}},
    "fig3b": {"protocol": "ctap", "n_sites": 9, "t": 1.0,
              "ctap": {"t_max": 1.0, "width": 28.0, "delay": 33.6, "total": 235.2},
              "grid": {"n_steps": 2000}},
}

# Strongly adiabatic CTAP used for the disorder comparison with the collective pulse.
ROBUST_CTAP = {"protocol": "ctap", "n_sites": 9, "t": 1.0,
               "ctap": {"t_max": 1.0, "width": 60.0},
               "grid": {"n_steps": 2000},
               "disorder": {"sigma": 0.05, "n_samples": 100, "seed": 0}}


def build_schedule(config):
    """Coupling program for ``config``, extended with zeros up to its duration."""
    n, t = config.n_sites, config.t
    if config.protocol == "uniform_static":
        return static_protocol(uniform_couplings(n, t), config.duration)
    if config.protocol == "spin_static":
        return static_protocol(spin_couplings(n, t), config.duration)
    if config.protocol == "collective_pi":
        schedule = collective_pi_protocol(n, t)
    elif config.protocol == "sequential_pi":
        schedule = sequential_pi_protocol(uniform_couplings(n, t))
    else:
        schedule = ctap_protocol(n, config.t_max, config.width, config.delay, config.total)
    if config.duration > schedule.duration:
        schedule = Schedule(schedule.pulses, config.duration)
    return schedule


def simulate(config):
    """Evolve the electron from site 1; returns ``(schedule, trajectory)``."""
    schedule = build_schedule(config)
    spec = ChainSpec(config.n_sites)
    grid = TimeGrid(0.0, config.duration, config.n_steps)
    traj = evolve_schedule(spec, schedule, StateVector.localized(config.n_sites), grid)
    return schedule, traj


def _fmt(x):
    return format(float(x), f".{DIGITS}g")


def write_trajectory_csv(path, traj):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau"] + [f"pop_{j}" for j in range(1, traj.n_sites + 1)])
        for tau, row in zip(traj.times, traj.populations):
            w.writerow([_fmt(tau)] + [_fmt(p) for p in row])


def write_couplings_csv(path, schedule, times):
    values = schedule.sample_many(times)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau"] + [f"t_{j}" for j in range(1, schedule.n_links + 1)])
        for tau, row in zip(times, values):
            w.writerow([_fmt(tau)] + [_fmt(v) for v in row])


def read_trajectory_csv(path):
    """Return ``(times, populations)`` from a trajectory CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


@contextmanager
def _staged(out_dir, names):
    """Yield temporary paths that replace ``names`` only if the block succeeds."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = {}
    try:
        for key, name in names.items():
            fd, p = tempfile.mkstemp(prefix=".partial-", dir=out_dir)
            os.close(fd)
            tmp[key] = p
        yield tmp
    except BaseException:
        for p in tmp.values():
            if os.path.exists(p):
                os.remove(p)
        raise
    for key, name in names.items():
        os.replace(tmp[key], out_dir / name)


def resolve_out_dir(config, override=None):
    if override is not None:
        return Path(override)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(config.out_dir)


def _summary(config, schedule, traj):
    summary = {
        "fidelity": transfer_fidelity(traj),
        "max_norm_drift": traj.norm_drift(),
        "config": config.to_dict(),
    }
    if config.protocol == "ctap":
        trace = adiabaticity_trace(ChainSpec(config.n_sites), schedule, traj.grid)
        summary["peak_adiabaticity_ratio"] = trace.max_ratio
        summary["peak_adiabaticity_time"] = trace.peak_time
    if config.sigma > 0:
        report = robustness_sweep(ChainSpec(config.n_sites), schedule, config.sigma,
                                  config.n_samples, config.seed, grid=traj.grid)
        summary["robustness"] = report.to_dict()
    return summary


def run_experiment(config, out_dir=None):
    """Simulate ``config`` and write trajectory CSV, couplings CSV and summary JSON.

    Returns the summary dict. Nothing is left behind if the run fails.
    """
    if isinstance(config, dict):
        config = parse_config(config)
    out = resolve_out_dir(config, out_dir)
    names = {"trajectory": config.trajectory, "couplings": config.couplings,
             "summary": config.summary}
    with _staged(out, names) as tmp:
        schedule, traj = simulate(config)
        summary = _summary(config, schedule, traj)
        write_trajectory_csv(tmp["trajectory"], traj)
        write_couplings_csv(tmp["couplings"], schedule, traj.times)
        _write_json(tmp["summary"], summary)
    return summary


def run_sweep(config, out_dir=None):
    """Disorder sweep for ``config``: per-sample fidelities (CSV) and statistics (JSON)."""
    if isinstance(config, dict):
        config = parse_config(config)
    out = resolve_out_dir(config, out_dir)
    schedule = build_schedule(config)
    grid = TimeGrid(0.0, config.duration, config.n_steps)
    names = {"sweep": config.sweep, "summary": config.summary}
    with _staged(out, names) as tmp:
        report = robustness_sweep(ChainSpec(config.n_sites), schedule, config.sigma,
                                  config.n_samples, config.seed, grid=grid)
        with open(tmp["sweep"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", "fidelity"])
            for i, f in enumerate(report.fidelities):
                w.writerow([i, _fmt(f)])
        summary = {"robustness": report.to_dict(), "config": config.to_dict()}
        _write_json(tmp["summary"], summary)
    return summary


def reproduce_figure(tag, out_dir):
    """Write ``<tag>_trajectory.csv``, ``<tag>_couplings.csv`` and ``<tag>_summary.json``."""
    if tag not in FIGURES:
        raise KeyError(f"unknown figure {tag!r}; choose from {', '.join(FIGURES)}")
    config = parse_config(FIGURES[tag]).replace(
        out_dir=str(out_dir), trajectory=f"{tag}_trajectory.csv",
        couplings=f"{tag}_couplings.csv", summary=f"{tag}_summary.json")
    return run_experiment(config, out_dir)
