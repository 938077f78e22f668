"""Command-line front end.

Subcommands: simulate, analytic, fit, validate.
Exit codes: 0 success, 1 run/validation failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analytics, validate
from .ensemble import fit_decay, run_ensemble
from .results import ConfigError, load_experiment, read_results_csv, write_results_csv
from .spectral import build_model, project_initial

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _manifest_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(csv_path.suffix + ".manifest.json")


def cmd_simulate(args) -> int:
    config, run, doc = load_experiment(args.config, args.set)
    if args.output is not None:
        run = {**run, "output_path": args.output}
    t0 = time.monotonic()
    summary = run_ensemble(config, shards=args.shards or run["shards"])
    wall = time.monotonic() - t0
    out_path = Path(run["output_path"])
    write_results_csv(out_path, summary)
    manifest = {
        "version": __version__,
        "config": doc,
        "overrides": list(args.set),
        "seed": config.seed,
        "trials": summary.trials,
        "aborted": summary.aborted,
        "survivors_final": int(summary.count[-1]),
        "wall_time_s": round(wall, 3),
        "output_csv": str(out_path),
    }
    mpath = _manifest_path(out_path)
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out_path} and {mpath} ({summary.trials} trials, "
          f"{int(summary.count[-1])} survivors at k={summary.count.size - 1}, {wall:.1f}s)")
    return EXIT_OK


def cmd_analytic(args) -> int:
    config, _, _ = load_experiment(args.config, args.set)
    model = build_model(config.hamiltonian)
    c = project_initial(config.initial, model)
    prof = analytics.profile_from_amplitudes(model.eigenvalues, c)
    K = config.iterations
    ks = list(range(K + 1))
    try:
        g = analytics.fit_gaussian_spec(prof)
    except ValueError:
        g = None  # degenerate profile (e.g. a single eigenstate): no continuum fit
    report = {
        "model": {"n": config.hamiltonian.n, "devices": config.devices, "K": K,
                  "initial": config.initial.kind},
        "population_purity": prof.p2,
        "success": {
            "weak": [analytics.weak_success_rate(prof, k) for k in ks],
            "strong": [analytics.strong_success_rate(prof, k) for k in ks],
            "weak_floor": analytics.multi_weak_floor(prof, max(config.devices, 2)),
        },
        "limits": {
            "energy": analytics.energy_limit(prof),
            "spread": analytics.spread_limit(prof),
            "initial_energy": prof.moment(1, 1),
        },
        "finite_k": {
            "weak_energy": [analytics.weak_energy_approx(prof, k) for k in ks],
            "weak_spread": [analytics.spread_approx_weak(prof, k) for k in ks],
            "strong_energy": [analytics.strong_energy_approx(prof, k) for k in ks],
            "strong_spread": [analytics.spread_approx_strong(prof, k) for k in ks],
            "note": "strong_* entries are a conjectured approximation; weak_* are exact",
        },
        "gaussian": None if g is None else {
            "mu": g.mu, "xi2": g.xi2, "sigma2": g.sigma2,
            "normalization": analytics.gaussian_normalization(g),
            "c4": analytics.gaussian_c4(g),
            "energy": [analytics.gaussian_energy(g, k) for k in ks],
            "spread": [analytics.gaussian_spread(g, k) for k in ks],
            "spread_drop": analytics.gaussian_spread_drop(g),
            "bias": analytics.gaussian_bias(g),
            "max_bias_coefficient": analytics.MAX_GAUSSIAN_BIAS_COEFF,
        },
        "cost": {
            "weak": analytics.expected_cost(
                np.array([analytics.weak_success_rate(prof, k) for k in ks]),
                config.devices)["ctrl_evolutions"].tolist(),
            "strong": analytics.expected_cost(
                np.array([analytics.strong_success_rate(prof, k) for k in ks]),
                config.devices)["ctrl_evolutions"].tolist(),
            "bell_pairs_per_iteration": analytics.bell_pairs_per_iteration(config.devices),
        },
    }
    json.dump(report, _open_out(args.output), indent=2)
    return EXIT_OK


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w")


def cmd_fit(args) -> int:
    table = read_results_csv(args.csv)
    if args.column not in table:
        raise ConfigError(args.column, f"no such column (have {list(table)})")
    eta, resid = fit_decay(table[args.column], table["k"], args.k_min, args.k_max)
    json.dump({"column": args.column, "k_min": args.k_min, "k_max": args.k_max,
               "eta": eta, "rms_residual": resid}, sys.stdout, indent=2)
    print()
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.level == "fast":
        checks = validate.run_fast()
    else:
        checks = validate.run_full(validate.RunCache(scale=args.scale))
    for check in checks:
        print(check.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distfilter",
                                description="Distributed eigenstate-filtering simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo ensemble and write a results CSV")
    sim.add_argument("config", help="experiment file (JSON)")
    sim.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                     help="override a config field (repeatable)")
    sim.add_argument("--output", help="override run.output_path")
    sim.add_argument("--shards", type=int, help="override run.shards")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analytic", help="emit closed-form predictions for a config (JSON)")
    ana.add_argument("config")
    ana.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ana.add_argument("--output", help="output path (default stdout)")
    ana.set_defaults(func=cmd_analytic)

    fit = sub.add_parser("fit", help="exponential decay fit of a results-CSV column")
    fit.add_argument("csv")
    fit.add_argument("--column", default="mean_var")
    fit.add_argument("--k-min", type=int, default=4)
    fit.add_argument("--k-max", type=int, default=12)
    fit.set_defaults(func=cmd_fit)

    val = sub.add_parser("validate", help="run the built-in validation suite")
    val.add_argument("--level", choices=("fast", "full"), default="fast")
    val.add_argument("--scale", type=float, default=1.0,
                     help="trial-count multiplier for the full statistical checks")
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
