import numpy as np
import pytest

from distfilter.engine import PostselectionPolicy
from distfilter.ensemble import (
    EnsembleSummary,
    ProtocolConfig,
    fit_decay,
    merge_summaries,
    run_ensemble,
)
from distfilter.spectral import HamiltonianSpec, InitialStateSpec


def make_config(**kw):
    base = dict(hamiltonian=HamiltonianSpec(n=3), initial=InitialStateSpec(kind="plus-product"),
                devices=2, iterations=8, policy=PostselectionPolicy("weak"),
                trials=300, seed=77)
    base.update(kw)
    return ProtocolConfig(**base)


def test_run_is_deterministic():
    config = make_config()
    a = run_ensemble(config)
    b = run_ensemble(config)
    np.testing.assert_array_equal(a.count, b.count)
    np.testing.assert_array_equal(a.sum_var, b.sum_var)
    np.testing.assert_array_equal(a.sum_energy, b.sum_energy)


def test_shard_count_does_not_change_results():
    config = make_config()
    one = run_ensemble(config, shards=1)
    many = run_ensemble(config, shards=7)
    np.testing.assert_array_equal(one.count, many.count)
    # merging changes only the floating-point summation order
    np.testing.assert_allclose(one.sum_var, many.sum_var, rtol=1e-13)
    np.testing.assert_allclose(one.sumsq_energy, many.sumsq_energy, rtol=1e-13)
    assert one.trials == many.trials == config.trials


def test_merge_matches_monolithic_run():
    """Oracle: running two disjoint trial ranges separately and merging must
    equal the single run over the union."""
    from distfilter.ensemble import _run_shard
    from distfilter.spectral import build_model, project_initial

    config = make_config(trials=200)
    model = build_model(config.hamiltonian)
    init = project_initial(config.initial, model)
    whole = _run_shard(config, model, init, 0, 200)
    left = _run_shard(config, model, init, 0, 83)
    right = _run_shard(config, model, init, 83, 200)
    merged = merge_summaries(left, right)
    np.testing.assert_array_equal(whole.count, merged.count)
    np.testing.assert_allclose(whole.sum_var, merged.sum_var, rtol=1e-13)
    np.testing.assert_allclose(whole.sumsq_h2, merged.sumsq_h2, rtol=1e-13)
    assert merged.trials == 200


def test_merge_rejects_mismatched_configs():
    a = run_ensemble(make_config(trials=20))
    b = run_ensemble(make_config(trials=20, seed=78))
    with pytest.raises(ValueError, match="identical configs"):
        merge_summaries(a, b)


def test_seed_changes_results():
    a = run_ensemble(make_config(trials=200))
    b = run_ensemble(make_config(trials=200, seed=78))
    assert not np.array_equal(a.count, b.count) or not np.array_equal(a.sum_var, b.sum_var)


def test_summary_statistics_match_numpy():
    """Cross-check the accumulator-based mean/SE against per-trajectory numpy
    statistics for the k=0 column (all trials survive at k=0)."""
    from distfilter.engine import run_trajectory
    from distfilter.spectral import build_model, project_initial

    config = make_config(trials=50, iterations=3, policy=PostselectionPolicy("none"))
    model = build_model(config.hamiltonian)
    init = project_initial(config.initial, model)
    summary = run_ensemble(config, model=model)
    vals = []
    for i in range(config.trials):
        rng = np.random.default_rng([config.seed, i])
        rec = run_trajectory(config, model, rng, initial_amplitudes=init)
        vals.append(rec.variances[2])
    vals = np.array(vals)
    assert summary.count[2] == 50
    assert abs(summary.mean_var[2] - vals.mean()) < 1e-12
    assert abs(summary.se_var[2] - vals.std(ddof=1) / np.sqrt(50)) < 1e-12


def test_success_rate_monotone_nonincreasing():
    summary = run_ensemble(make_config(policy=PostselectionPolicy("strong"), trials=500))
    rates = summary.success_rate
    assert rates[0] == 1.0
    assert np.all(np.diff(rates) <= 1e-12)


def test_spread_consistency():
    summary = run_ensemble(make_config(trials=200))
    k = 3
    assert abs(summary.spread_v[k] - (summary.mean_h2[k] - summary.mean_energy[k] ** 2)) < 1e-12


def test_restart_mode_costs_are_reported():
    config = make_config(restart_mode="restart", iterations=4, trials=100,
                         policy=PostselectionPolicy("strong"))
    summary = run_ensemble(config)
    costs = summary.costs()
    ctrl = costs["ctrl_evolutions"]
    assert ctrl[0] == 0.0
    assert np.all(np.diff(ctrl) > 0)
    np.testing.assert_allclose(costs["bell_pairs"], ctrl / 2)


def test_fit_decay_recovers_synthetic_rate():
    k = np.arange(0, 20)
    series = 3.7 * np.exp(-0.3 * k)
    eta, resid = fit_decay(series, k, 4, 12)
    assert abs(eta - 0.3) < 1e-12
    assert resid < 1e-12


def test_fit_decay_rejects_nonpositive_and_short_windows():
    k = np.arange(10)
    with pytest.raises(ValueError, match="positive"):
        fit_decay(np.linspace(1, -1, 10), k, 2, 8)
    with pytest.raises(ValueError, match="fewer than two"):
        fit_decay(np.ones(10), k, 4, 4)


def test_empty_summary_merge_identity():
    config = make_config(trials=30)
    run = run_ensemble(config)
    empty = EnsembleSummary.empty(config)
    merged = merge_summaries(empty, run)
    np.testing.assert_array_equal(merged.count, run.count)
    assert merged.trials == run.trials
