"""Command line entry point: ``qdchain run|sweep|figure``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .experiments import FIGURES, OUT_ENV, reproduce_figure, run_experiment, run_sweep

log = logging.getLogger("qdchain")


def _parser():
    p = argparse.ArgumentParser(
        prog="qdchain",
        description="Single-electron transfer in a chain of tunnel-coupled quantum dots.",
        epilog=f"The output directory defaults to ${OUT_ENV} if set, else the config's output.dir.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--steps", type=int, help="override grid.n_steps")
        sp.add_argument("--seed", type=int, help="override disorder.seed")
        sp.add_argument("--out", help="output directory")

    run = sub.add_parser("run", help="simulate one configured experiment")
    run.add_argument("config")
    common(run)
    sweep = sub.add_parser("sweep", help="disorder sweep for a configured protocol")
    sweep.add_argument("config")
    common(sweep)
    fig = sub.add_parser("figure", help="emit the data behind one of the built-in figures")
    fig.add_argument("tag", choices=sorted(FIGURES))
    fig.add_argument("--out", default=".", help="output directory")
    return p


def _load(args):
    config = load_config(args.config)
    changes = {}
    if args.steps is not None:
        changes["n_steps"] = args.steps
    if args.seed is not None:
        changes["seed"] = args.seed
    return config.replace(**changes) if changes else config


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = _parser().parse_args(argv)
    try:
        if args.command == "figure":
            summary = reproduce_figure(args.tag, args.out)
        else:
            config = _load(args)
            if args.command == "run":
                summary = run_experiment(config, args.out)
            else:
                if config.sigma <= 0:
                    raise ConfigError(f"{args.config}: field 'disorder.sigma': sweep needs sigma > 0")
                summary = run_sweep(config, args.out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (OSError, ArithmeticError, RuntimeError) as exc:
        log.error("run failed: %s", exc)
        return 1
    if "fidelity" in summary:
        log.info("fidelity %.12g  norm drift %.3g", summary["fidelity"], summary["max_norm_drift"])
    if "robustness" in summary:
        r = summary["robustness"]
        log.info("robustness sigma=%g: mean %.6g  min %.6g  std %.3g",
                 r["sigma"], r["mean"], r["min"], r["std"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
