import numpy as np
import pytest

from filterfigs import CSV_COLUMNS


def make_table(K=12, seedless_scale=1.0):
    """Deterministic synthetic results table (no RNG: tests and the golden
    file must agree forever)."""
    k = np.arange(K + 1, dtype=float)
    rows = []
    for kk in k:
        var = seedless_scale * 1.3 * np.exp(-0.25 * kk)
        rows.append({
            "k": kk,
            "survivors": 10000.0 * 0.8 ** kk,
            "success_rate": 0.8 ** kk,
            "mean_var": var,
            "se_var": 0.03 * var,
            "mean_energy": -0.9 + 0.5 * np.exp(-0.2 * kk),
            "se_energy": 0.01,
            "mean_h2": 1.1,
            "spread_v": 0.4 * np.exp(-0.3 * kk),
            "ctrl_evos_mean": 2.0 * (kk + 1.0),
            "bell_pairs_mean": 4.0 * (kk + 1.0),
            "cost_per_state": (kk + 1.0),
        })
    return rows


def write_table(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join("%.15g" % row[c] for c in CSV_COLUMNS) + "\n")
    return path


@pytest.fixture
def table_csv(tmp_path):
    return write_table(tmp_path / "table.csv", make_table())
