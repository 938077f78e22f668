"""Render figures from filtering-protocol results tables.

A recipe (dict or JSON file) names a figure kind, an output path and a list
of CSV series; rendering is deterministic, so vector output is byte-stable.
The CSVs are consumed purely through their column contract -- this package
never imports the simulator.
"""

import csv
import json
import math
import warnings
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CSV_COLUMNS = (
    "k", "survivors", "success_rate", "mean_var", "se_var", "mean_energy",
    "se_energy", "mean_h2", "spread_v", "ctrl_evos_mean", "bell_pairs_mean",
    "cost_per_state",
)

KINDS = ("variance", "success", "energy", "spread", "cost")

# kind -> (default column, y label, logarithmic y axis)
_KIND_STYLE = {
    "variance": ("mean_var", "average variance", True),
    "success": ("success_rate", "cumulative success rate", False),
    "energy": ("mean_energy", "average energy", False),
    "spread": ("spread_v", "eigenvalue spread", False),
    "cost": ("ctrl_evos_mean", "expected controlled evolutions", False),
}

# column -> matching standard-error column, where one exists
_SE_COLUMN = {"mean_var": "se_var", "mean_energy": "se_energy"}


class RecipeError(ValueError):
    """Raised for malformed recipes or CSVs that break the column contract."""


def read_table(path):
    """Read a results CSV into a dict of float arrays keyed by column name.

    Rows with zero survivors carry blank statistics; those parse to NaN and
    are dropped later per series.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise RecipeError(f"{path}: empty CSV")
        if tuple(header) != CSV_COLUMNS:
            raise RecipeError(f"{path}: header {header} does not match the "
                              f"results-table contract")
        rows = [[float(cell) if cell.strip() else math.nan for cell in row]
                for row in reader if row]
    if not rows:
        raise RecipeError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}


def _load_recipe(recipe):
    if isinstance(recipe, (str, Path)):
        with open(recipe) as fh:
            try:
                recipe = json.load(fh)
            except json.JSONDecodeError as exc:
                raise RecipeError(f"recipe is not valid JSON: {exc}")
    if not isinstance(recipe, dict):
        raise RecipeError("recipe must be a JSON object")
    return recipe


def _check_recipe(recipe):
    kind = recipe.get("kind")
    if kind not in KINDS:
        raise RecipeError(f"kind must be one of {KINDS}, got {kind!r}")
    if "output" not in recipe:
        raise RecipeError("recipe needs an 'output' path")
    series = recipe.get("series")
    if not isinstance(series, list) or not series:
        raise RecipeError("recipe needs a non-empty 'series' list")
    band = recipe.get("band")
    if band not in (None, "se", "sd"):
        raise RecipeError(f"band must be 'se', 'sd' or omitted, got {band!r}")
    for entry in series:
        if not isinstance(entry, dict) or "csv" not in entry:
            raise RecipeError("each series entry needs at least a 'csv' path")
        column = entry.get("column")
        if column is not None and column not in CSV_COLUMNS:
            raise RecipeError(f"unknown column {column!r}; the contract has "
                              f"{CSV_COLUMNS}")
    for overlay in recipe.get("overlays", []):
        if not isinstance(overlay, dict) or "value" not in overlay:
            raise RecipeError("each overlay needs a 'value'")


def build_figure(recipe):
    """Build (but do not save) the matplotlib figure for a recipe dict."""
    _check_recipe(recipe)
    kind = recipe["kind"]
    default_column, ylabel, log_y = _KIND_STYLE[kind]
    band = recipe.get("band")

    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=100)
    for entry in recipe["series"]:
        table = read_table(entry["csv"])
        column = entry.get("column", default_column)
        k = table["k"]
        y = table[column]
        keep = np.isfinite(y)
        if log_y:
            positive = y > 0
            dropped = int(np.sum(keep & ~positive))
            if dropped:
                warnings.warn(f"{entry['csv']}: dropped {dropped} "
                              f"non-positive {column} point(s) from the "
                              f"logarithmic axis", stacklevel=2)
            keep &= positive
        label = entry.get("label", column)
        style = entry.get("style", "o-")
        line, = ax.plot(k[keep], y[keep], style, label=label, markersize=4)
        se_column = _SE_COLUMN.get(column)
        if band and se_column:
            err = table[se_column][keep]
            if band == "sd":
                err = err * np.sqrt(table["survivors"][keep])
            ax.fill_between(k[keep], y[keep] - err, y[keep] + err,
                            color=line.get_color(), alpha=0.2, linewidth=0)

    for overlay in recipe.get("overlays", []):
        ax.axhline(overlay["value"], color=overlay.get("color", "0.4"),
                   linestyle="--", linewidth=1.0,
                   label=overlay.get("label"))

    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("iteration k")
    ax.set_ylabel(recipe.get("ylabel", ylabel))
    if recipe.get("title"):
        ax.set_title(recipe["title"])
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render(recipe):
    """Render a recipe (dict or JSON path) to its output image; returns the
    output Path. Vector (SVG/PDF) rerenders are byte-stable."""
    recipe = _load_recipe(recipe)
    # Fixed hash salt keeps matplotlib's generated SVG ids stable.
    with plt.rc_context({"svg.hashsalt": "filterfigs", "svg.fonttype": "path"}):
        fig = build_figure(recipe)
        out = Path(recipe["output"])
        out.parent.mkdir(parents=True, exist_ok=True)
        try:
            fig.savefig(out, metadata=_stable_metadata(out.suffix))
        finally:
            plt.close(fig)
    return out


def _stable_metadata(suffix):
    # Strip the embedded creation date so identical recipes give identical
    # bytes; matplotlib honours a None date for SVG, PDF and PS backends.
    if suffix.lower() in (".svg", ".pdf", ".ps", ".eps"):
        return {"Date": None}
    return None
