"""Config plumbing, sweep drivers, data generation, file emission."""

import json

import numpy as np
import pytest

from privrelay import (
    DataSet,
    ExperimentConfig,
    OptimizerConfig,
    emit_results,
    generate_heavy_tailed_data,
    optimize,
    run_good_nodes_sweep,
    run_monte_carlo,
    run_trust_sweep,
    sigma_pr_sq,
    sigma_threshold,
    sigma_tv_sq,
    update_sigma,
    validate_model,
    validate_spec,
)
from privrelay.experiments import (
    GOOD_NODES_COLUMNS,
    TRUST_SWEEP_COLUMNS,
    build_model,
    build_privacy_spec,
    good_nodes_point,
    override_run_params,
    ring_neighbors,
    trust_epsilon_matrix,
)

FAST_OPT = OptimizerConfig(outer_rounds=2, relaxed_iters=8, finetune_iters=8)


def small_trust_config(**overrides):
    base = dict(
        kind="trust_sweep",
        n=4,
        server_probs=[0.3, 0.8, 0.4, 0.9],
        collab_prob=0.7,
        dim=4,
        trusted_counts=[0, 1, 2, 3],
        optimizer=FAST_OPT,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def small_good_nodes_config(**overrides):
    base = dict(
        kind="good_nodes_sweep",
        n=4,
        server_probs=[0.5] * 4,  # overridden per point by p_good/p_bad
        collab_prob=0.8,
        dim=3,
        trials=12,
        good_counts=[0, 2, 4],
        trusted_neighbors=2,
        optimizer=FAST_OPT,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ------------------------------------------------------------- ring helpers


def test_ring_neighbors_six_of_ten():
    assert ring_neighbors(0, 6, 10) == [1, 2, 3, 7, 8, 9]
    assert ring_neighbors(5, 6, 10) == [2, 3, 4, 6, 7, 8]


def test_ring_neighbors_odd_count_leans_up():
    assert ring_neighbors(0, 3, 10) == [1, 2, 9]
    assert ring_neighbors(0, 0, 10) == []


def test_ring_neighbors_symmetric_for_even_counts():
    # odd k leans one extra step up the ring, so only even k gives a
    # symmetric trust relation
    for k in (2, 4, 6):
        for i in range(10):
            for j in ring_neighbors(i, k, 10):
                assert i in ring_neighbors(j, k, 10)


def test_trust_epsilon_matrix_structure():
    eps = trust_epsilon_matrix(5, 2, 1000.0, 0.1)
    assert np.all(np.diag(eps) == 1000.0)
    for i in range(5):
        ring = set(ring_neighbors(i, 2, 5))
        for j in range(5):
            if i == j:
                continue
            assert eps[i, j] == (1000.0 if j in ring else 0.1)
    only_self = trust_epsilon_matrix(5, 0, 1000.0, 0.1)
    assert np.all(only_self[~np.eye(5, dtype=bool)] == 0.1)


# ------------------------------------------------------------------- config


def test_config_roundtrip_through_dict():
    cfg = small_trust_config()
    clone = ExperimentConfig.from_dict(cfg.to_dict())
    assert clone == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"kind": "custom", "networks": {}})
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict(
            {"kind": "custom", "network": {"n": 2, "server_probs": [0.5, 0.5], "pc": 1}}
        )


def test_config_requires_core_fields():
    with pytest.raises(ValueError, match="kind"):
        ExperimentConfig.from_dict({"network": {"n": 1, "server_probs": [0.5]}})
    with pytest.raises(ValueError, match="server_probs"):
        ExperimentConfig.from_dict({"kind": "custom", "network": {"n": 1}})


def test_config_validate_catches_bad_values():
    cfg = small_trust_config(trials=0, delta=2.0)
    problems = cfg.validate()
    assert any("trials" in s for s in problems)
    assert any("delta" in s for s in problems)
    assert small_trust_config().validate() == []


def test_trusted_neighbors_only_constrains_good_nodes_kind():
    # the default of 6 is meaningless for a 4-node trust sweep and must
    # not invalidate it; the good-nodes sweep does consume the field
    assert small_trust_config().trusted_neighbors == 6
    assert small_trust_config().validate() == []
    bad = small_good_nodes_config(trusted_neighbors=6)
    assert any("trusted_neighbors" in s for s in bad.validate())


def test_override_run_params():
    cfg = small_trust_config()
    same = override_run_params(cfg, None, None)
    assert same == cfg
    bumped = override_run_params(cfg, 7, 99)
    assert bumped.master_seed == 7 and bumped.trials == 99
    assert bumped.n == cfg.n


# -------------------------------------------------------------------- model


def test_build_model_erdos_renyi():
    model = build_model(small_trust_config())
    assert validate_model(model) == []
    off = ~np.eye(4, dtype=bool)
    assert np.all(model.peer_probs[off] == 0.7)


def test_good_nodes_point_topology():
    cfg = small_good_nodes_config()
    model, spec = good_nodes_point(cfg, 1)
    assert validate_model(model) == []
    assert validate_spec(spec, model) == []
    assert np.array_equal(model.server_probs, np.array([0.9, 0.2, 0.2, 0.2]))
    for i in range(4):
        ring = set(ring_neighbors(i, 2, 4))
        for j in range(4):
            if i == j:
                continue
            if j in ring:
                assert model.peer_probs[i, j] == 0.8
                assert spec.eps[i, j] == cfg.eps_high
            else:
                assert model.peer_probs[i, j] == 0.0


# --------------------------------------------------------------------- data


def test_heavy_tailed_norms_exact():
    rng = np.random.default_rng(80)
    data = generate_heavy_tailed_data(6, 50, 2.5, rng)
    norms = np.linalg.norm(data.x, axis=1)
    assert np.allclose(norms, 2.5, rtol=1e-12, atol=0.0)


def test_heavy_tailed_kurtosis():
    # cubing a standard normal lifts the kurtosis from 3 to 46.2
    rng = np.random.default_rng(81)
    z = rng.normal(size=100_000) ** 3
    kurt = float(np.mean(z**4) / np.mean(z**2) ** 2)
    assert kurt > 10.0


def test_heavy_tailed_deterministic():
    a = generate_heavy_tailed_data(3, 8, 1.0, np.random.default_rng(82))
    b = generate_heavy_tailed_data(3, 8, 1.0, np.random.default_rng(82))
    assert np.array_equal(a.x, b.x)


# ------------------------------------------------------------------- sweeps


def test_trust_sweep_rows_and_solutions():
    result = run_trust_sweep(small_trust_config())
    assert result.columns == TRUST_SWEEP_COLUMNS
    assert [r["k_trusted"] for r in result.rows] == [0, 1, 2, 3]
    assert result.errors == []
    for row in result.rows:
        assert row["feasible"] is True
        assert row["objective"] > 0.0 and row["sigma"] > 0.0
    assert set(result.solutions) == {0, 1, 2, 3}


def test_trust_sweep_constant_when_budgets_equal():
    # equal budgets make every k the same problem, bitwise
    cfg = small_trust_config(eps_high=5.0, eps_low=5.0)
    result = run_trust_sweep(cfg)
    objectives = {row["objective"] for row in result.rows}
    assert len(objectives) == 1


def test_trust_sweep_wrong_kind_rejected():
    with pytest.raises(ValueError, match="kind"):
        run_trust_sweep(small_good_nodes_config())


def test_good_nodes_sweep_rows():
    cfg = small_good_nodes_config()
    result = run_good_nodes_sweep(cfg)
    assert result.columns == GOOD_NODES_COLUMNS
    assert [r["num_good"] for r in result.rows] == [0, 2, 4]
    assert result.errors == []
    for row in result.rows:
        assert row["mse_pricer"] > 0.0
        assert row["mse_naive"] > 0.0
        assert row["trials"] == cfg.trials
        assert row["seed"] == cfg.master_seed


def test_good_nodes_sweep_deterministic():
    cfg = small_good_nodes_config()
    a = run_good_nodes_sweep(cfg)
    b = run_good_nodes_sweep(cfg)
    assert a.rows == b.rows


def test_good_nodes_sweep_seed_matters():
    cfg = small_good_nodes_config()
    a = run_good_nodes_sweep(cfg)
    b = run_good_nodes_sweep(override_run_params(cfg, 31337, None))
    assert a.rows != b.rows


# ----------------------------------------------------------------- emission


def test_emit_header_only_for_empty_table(tmp_path):
    csv_path = tmp_path / "empty.csv"
    json_path = tmp_path / "empty.json"
    emit_results([], TRUST_SWEEP_COLUMNS, {"kind": "trust_sweep"}, csv_path, json_path)
    assert csv_path.read_bytes() == b"k_trusted,objective,sigma,feasible\r\n"
    assert json.loads(json_path.read_text()) == {"kind": "trust_sweep"}


def test_emit_byte_identical_reruns(tmp_path):
    cfg = small_trust_config()
    result = run_trust_sweep(cfg)
    summary = {"kind": cfg.kind, "config": cfg.to_dict()}
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    emit_results(result.rows, result.columns, summary, first, tmp_path / "a.json")
    emit_results(result.rows, result.columns, summary, second, tmp_path / "b.json")
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_emitted_config_roundtrips(tmp_path):
    cfg = small_good_nodes_config()
    json_path = tmp_path / "summary.json"
    emit_results([], GOOD_NODES_COLUMNS, {"config": cfg.to_dict()}, tmp_path / "t.csv", json_path)
    loaded = json.loads(json_path.read_text())
    assert ExperimentConfig.from_dict(loaded["config"]) == cfg


def test_emit_cell_formats(tmp_path):
    rows = [
        {"k_trusted": 3, "objective": 0.1 + 0.2, "sigma": None, "feasible": False},
    ]
    csv_path = tmp_path / "fmt.csv"
    emit_results(rows, TRUST_SWEEP_COLUMNS, {}, csv_path, tmp_path / "fmt.json")
    lines = csv_path.read_text().splitlines()
    # shortest round-trip float, empty cell for None, lowercase booleans
    assert lines[1] == "3,0.30000000000000004,,false"


def test_trust_sweep_self_only_matches_diag_design():
    # with no trusted neighbors the off-diagonal budgets cap relay weights
    # near zero, so the optimized objective stays within a fraction of a
    # percent of the diag(1/p) initialization it starts from
    cfg = small_trust_config()
    model = build_model(cfg)
    spec = build_privacy_spec(cfg, trust_epsilon_matrix(cfg.n, 0, cfg.eps_high, cfg.eps_low))
    _, diag = optimize(model, spec, cfg.optimizer, dim=cfg.dim)
    a0 = np.diag(1.0 / model.server_probs)
    sigma0 = update_sigma(a0, spec, sigma_threshold(model, spec))
    obj0 = cfg.r_bound**2 * sigma_tv_sq(model, a0) + sigma_pr_sq(model, sigma0, cfg.dim)
    assert diag.objective_trace[0] == obj0
    assert diag.objective_trace[-1] <= obj0 + 1e-12
    assert diag.objective_trace[-1] >= 0.99 * obj0


def test_good_nodes_all_good_small_mse_and_tiny_gap():
    # at p_i = 0.99 everywhere both estimators are nearly exact and the
    # relayed one is at worst a standard error behind the naive average
    cfg = small_good_nodes_config(p_good=0.99, good_counts=[4], trials=40, master_seed=505)
    row = run_good_nodes_sweep(cfg).rows[0]
    assert row["mse_pricer"] < 0.01
    assert row["mse_naive"] < 0.01
    slack = row["mse_pricer_stderr"] + row["mse_naive_stderr"]
    assert row["mse_pricer"] <= row["mse_naive"] + slack


def test_doubling_trials_extends_stream_and_shrinks_stderr():
    cfg = small_good_nodes_config()
    model, spec = good_nodes_point(cfg, 2)
    solution, _ = optimize(model, spec, cfg.optimizer, dim=cfg.dim)
    rng = np.random.default_rng(7)
    raw = rng.standard_normal((cfg.n, cfg.dim))
    data = DataSet(x=raw / np.linalg.norm(raw, axis=1, keepdims=True))
    mc_half = run_monte_carlo(model, data, solution.weights, solution.sigma, 50, 606)
    mc_full = run_monte_carlo(model, data, solution.weights, solution.sigma, 100, 606)
    # per-trial seeding makes the first half of the longer run identical
    assert np.array_equal(mc_full.squared_errors[:50], mc_half.squared_errors)
    ratio = mc_full.mse_stderr / mc_half.mse_stderr
    assert 0.55 <= ratio <= 0.9
