"""CSV results table and JSON experiment-config handling.

The CSV column contract is fixed so external tooling (including the figure
scripts) can consume results without touching simulator internals.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .engine import MAX_DEVICES, MAX_STATE_SIZE, PostselectionPolicy
from .ensemble import EnsembleSummary, ProtocolConfig
from .spectral import MAX_QUBITS, HamiltonianSpec, InitialStateSpec

CSV_HEADER = ["k", "survivors", "success_rate", "mean_var", "se_var", "mean_energy",
              "se_energy", "mean_h2", "spread_v", "ctrl_evos_mean", "bell_pairs_mean",
              "cost_per_state"]


class ConfigError(ValueError):
    """Experiment file violates the schema; carries a dotted field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def write_results_csv(path: str | Path, summary: EnsembleSummary) -> None:
    costs = summary.costs()
    mean_var, se_var = summary.mean_var, summary.se_var
    mean_e, se_e = summary.mean_energy, summary.se_energy
    mean_h2, spread = summary.mean_h2, summary.spread_v
    ctrl = costs["ctrl_evolutions"]
    bell = costs["bell_pairs"]
    per_state = costs["ctrl_evolutions_per_state"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for k in range(summary.count.size):
            if summary.count[k] == 0:
                w.writerow([k, 0, _fmt(0.0)] + [""] * 9)
                continue
            row = [k, int(summary.count[k]), _fmt(summary.success_rate[k]),
                   _fmt(mean_var[k]), _fmt(se_var[k]) if summary.count[k] > 1 else "",
                   _fmt(mean_e[k]), _fmt(se_e[k]) if summary.count[k] > 1 else "",
                   _fmt(mean_h2[k]), _fmt(spread[k]),
                   _fmt(ctrl[k]) if np.isfinite(ctrl[k]) else "",
                   _fmt(bell[k]) if np.isfinite(bell[k]) else "",
                   _fmt(per_state[k]) if np.isfinite(per_state[k]) else ""]
            w.writerow(row)


def read_results_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a results table back into arrays (blank statistics become NaN)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        rows = list(reader)
    out: dict[str, np.ndarray] = {}
    for i, name in enumerate(CSV_HEADER):
        if name in ("k", "survivors"):
            out[name] = np.array([int(r[i]) for r in rows])
        else:
            out[name] = np.array([float(r[i]) if r[i] != "" else np.nan for r in rows])
    return out


# -- Experiment file ----------------------------------------------------------

_DEFAULTS = {
    "hamiltonian": {"n": 4, "coupling": 1.0, "field_x": 1.0, "field_z": 1.0, "shift": 0.0},
    "initial": {"kind": "plus-product", "theta": 0.0, "index": 0},
    "protocol": {"s": 2, "K": 25, "policy": "weak", "phase_mode": "iid-uniform",
                 "window": None, "restart_mode": "survival", "max_restarts": 1_000_000},
    "run": {"trials": 10_000, "seed": 0, "output_path": "results.csv", "shards": 1},
}


def _check_keys(section: str, given: dict, allowed: dict) -> None:
    for key in given:
        if key not in allowed:
            raise ConfigError(f"{section}.{key}", f"unknown key (allowed: {sorted(allowed)})")


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def parse_experiment(doc: dict) -> tuple[ProtocolConfig, dict]:
    """Validate an experiment document and build a ProtocolConfig.

    Returns (config, run_section). Unknown keys anywhere are rejected; all
    defaults are those of ``_DEFAULTS``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("$", "experiment file must be a JSON object")
    _check_keys("$", doc, _DEFAULTS)
    merged = {}
    for section, defaults in _DEFAULTS.items():
        given = doc.get(section, {})
        _require(isinstance(given, dict), section, "must be an object")
        _check_keys(section, given, defaults)
        merged[section] = {**defaults, **given}

    ham = merged["hamiltonian"]
    _require(isinstance(ham["n"], int) and 1 <= ham["n"] <= MAX_QUBITS,
             "hamiltonian.n", f"must be an integer in [1, {MAX_QUBITS}]")
    proto = merged["protocol"]
    _require(isinstance(proto["s"], int) and 1 <= proto["s"] <= MAX_DEVICES,
             "protocol.s", f"must be an integer in [1, {MAX_DEVICES}]")
    _require((2 ** ham["n"]) ** proto["s"] <= MAX_STATE_SIZE,
             "protocol.s", f"joint state of {proto['s']} devices x {ham['n']} qubits exceeds the engine guard")
    _require(isinstance(proto["K"], int) and proto["K"] >= 0, "protocol.K", "must be a non-negative integer")
    _require(proto["policy"] in PostselectionPolicy.KINDS, "protocol.policy",
             f"must be one of {PostselectionPolicy.KINDS}")
    _require(proto["phase_mode"] in ("iid-uniform", "time-window"), "protocol.phase_mode",
             "must be 'iid-uniform' or 'time-window'")
    window = proto["window"]
    if window is not None:
        _require(isinstance(window, (list, tuple)) and len(window) == 2, "protocol.window",
                 "must be a pair [t_min, t_max]")
        _require(window[1] >= window[0] > 0, "protocol.window", "must satisfy t_max >= t_min > 0")
        window = (float(window[0]), float(window[1]))
    _require(proto["phase_mode"] != "time-window" or window is not None,
             "protocol.window", "required in time-window mode")
    _require(proto["restart_mode"] in ("restart", "survival"), "protocol.restart_mode",
             "must be 'restart' or 'survival'")
    init = merged["initial"]
    _require(init["kind"] in InitialStateSpec.KINDS, "initial.kind",
             f"must be one of {InitialStateSpec.KINDS}")
    run = merged["run"]
    _require(isinstance(run["trials"], int) and run["trials"] >= 1, "run.trials", "must be a positive integer")
    _require(isinstance(run["seed"], int), "run.seed", "must be an integer")
    _require(isinstance(run["shards"], int) and run["shards"] >= 1, "run.shards", "must be a positive integer")

    try:
        config = ProtocolConfig(
            hamiltonian=HamiltonianSpec(n=ham["n"], coupling=float(ham["coupling"]),
                                        field_x=float(ham["field_x"]), field_z=float(ham["field_z"]),
                                        shift=float(ham["shift"])),
            initial=InitialStateSpec(kind=init["kind"], theta=float(init["theta"]), index=int(init["index"])),
            devices=proto["s"], iterations=proto["K"], policy=PostselectionPolicy(proto["policy"]),
            phase_mode=proto["phase_mode"], window=window, trials=run["trials"], seed=run["seed"],
            restart_mode=proto["restart_mode"], max_restarts=proto["max_restarts"],
        )
    except ValueError as exc:
        raise ConfigError("$", str(exc)) from exc
    return config, run


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply dotted-path overrides like 'protocol.K=12' to a config document."""
    out = json.loads(json.dumps(doc))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must have the form section.key=value")
        dotted, raw = item.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2:
            raise ConfigError(dotted, "override path must be section.key")
        section, key = parts
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out.setdefault(section, {})[key] = value
    return out


def load_experiment(path: str | Path, overrides: list[str] | None = None):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
    doc = apply_overrides(doc, overrides or [])
    config, run = parse_experiment(doc)
    return config, run, doc
