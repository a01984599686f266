"""Topology validation and correlated link sampling."""

import numpy as np
import pytest

from conftest import random_model
from privrelay import NetworkModel, erdos_renyi_model, sample_links, validate_model


def two_node_model(p, p01, p10, e):
    return NetworkModel(
        server_probs=np.asarray(p, dtype=float),
        peer_probs=np.array([[1.0, p01], [p10, 1.0]]),
        reciprocity=np.array([[1.0, e], [e, 1.0]]),
    )


def test_perfect_connectivity_validates():
    model = two_node_model([1.0, 1.0], 1.0, 1.0, 1.0)
    assert validate_model(model) == []


def test_reciprocity_below_independence_flagged():
    # E = 0.1 < 0.5 * 0.5: negatively correlated pair, unsupported
    model = two_node_model([0.5, 0.5], 0.5, 0.5, 0.1)
    report = validate_model(model)
    assert len(report) == 1
    assert "E[0,1]" in report[0] and "0.25" in report[0]


def test_zero_server_prob_rejected():
    model = two_node_model([0.5, 0.0], 0.5, 0.5, 0.25)
    report = validate_model(model)
    assert any("p[1]" in line for line in report)


def test_unit_diagonals_required():
    model = NetworkModel(
        server_probs=np.array([0.5, 0.5]),
        peer_probs=np.array([[0.9, 0.5], [0.5, 1.0]]),
        reciprocity=np.array([[1.0, 0.25], [0.25, 1.0]]),
    )
    report = validate_model(model)
    assert any("P[0,0]" in line for line in report)


def test_asymmetric_reciprocity_flagged():
    model = NetworkModel(
        server_probs=np.array([0.5, 0.5]),
        peer_probs=np.array([[1.0, 0.5], [0.5, 1.0]]),
        reciprocity=np.array([[1.0, 0.3], [0.4, 1.0]]),
    )
    report = validate_model(model)
    assert any("!=" in line for line in report)


def test_frechet_upper_bound_flagged():
    # E cannot exceed min(p01, p10)
    model = two_node_model([0.5, 0.5], 0.5, 0.4, 0.45)
    report = validate_model(model)
    assert any("Frechet" in line for line in report)


def test_random_instances_validate(rng=None):
    rng = np.random.default_rng(7)
    for n in (1, 2, 3, 5):
        model = random_model(rng, n)
        assert validate_model(model) == []


def test_sample_links_perfect_pair_always_on():
    model = two_node_model([1.0, 1.0], 1.0, 1.0, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        real = sample_links(model, rng)
        assert real.peer_links[0, 1] == 1 and real.peer_links[1, 0] == 1


def test_sample_links_coupled_pair_always_agrees():
    # E at the Frechet top with equal marginals: P(1,0) = P(0,1) = 0
    model = two_node_model([1.0, 1.0], 0.5, 0.5, 0.5)
    rng = np.random.default_rng(1)
    for _ in range(1000):
        real = sample_links(model, rng)
        assert real.peer_links[0, 1] == real.peer_links[1, 0]


def test_sample_links_diagonal_always_one():
    rng = np.random.default_rng(2)
    model = random_model(rng, 4)
    for _ in range(20):
        real = sample_links(model, rng)
        assert np.all(np.diag(real.peer_links) == 1)
        assert set(np.unique(real.peer_links)) <= {0, 1}
        assert set(np.unique(real.ps_links)) <= {0, 1}


def test_sample_links_deterministic():
    model = random_model(np.random.default_rng(3), 3)
    a = sample_links(model, np.random.default_rng(123))
    b = sample_links(model, np.random.default_rng(123))
    assert np.array_equal(a.ps_links, b.ps_links)
    assert np.array_equal(a.peer_links, b.peer_links)


def test_sample_links_rejects_invalid_model():
    model = two_node_model([0.5, 0.0], 0.5, 0.5, 0.25)
    with pytest.raises(ValueError):
        sample_links(model, np.random.default_rng(0))


N_MOMENT_DRAWS = 100_000


@pytest.fixture(scope="module")
def moment_draws():
    """One shared 10^5-draw pass; all moment checks read from it."""
    model = random_model(np.random.default_rng(11), 3)
    rng = np.random.default_rng(2024)
    ps_sum = np.zeros(3)
    nn_sum = np.zeros((3, 3))
    prod_sum = np.zeros((3, 3))
    for _ in range(N_MOMENT_DRAWS):
        real = sample_links(model, rng)
        ps_sum += real.ps_links
        nn_sum += real.peer_links
        prod_sum += real.peer_links * real.peer_links.T
    n = float(N_MOMENT_DRAWS)
    return model, ps_sum / n, nn_sum / n, prod_sum / n


def test_ps_marginals(moment_draws):
    model, ps_mean, _, _ = moment_draws
    p = model.server_probs
    band = 4.0 * np.sqrt(p * (1.0 - p) / N_MOMENT_DRAWS)
    assert np.all(np.abs(ps_mean - p) <= band)


def test_peer_marginals(moment_draws):
    model, _, nn_mean, _ = moment_draws
    pp = model.peer_probs
    band = 4.0 * np.sqrt(pp * (1.0 - pp) / N_MOMENT_DRAWS) + 1e-12
    assert np.all(np.abs(nn_mean - pp) <= band)


def test_reciprocity_moment(moment_draws):
    model, _, _, prod_mean = moment_draws
    e = model.reciprocity
    band = 4.0 * np.sqrt(e * (1.0 - e) / N_MOMENT_DRAWS) + 1e-12
    assert np.all(np.abs(prod_mean - e) <= band)


def test_independent_pair_uncorrelated():
    # E = p01 * p10 exactly: empirical correlation of the pair ~ 0
    model = two_node_model([1.0, 1.0], 0.5, 0.5, 0.25)
    rng = np.random.default_rng(5)
    n_draws = 100_000
    fwd = np.empty(n_draws)
    rev = np.empty(n_draws)
    for t in range(n_draws):
        real = sample_links(model, rng)
        fwd[t] = real.peer_links[0, 1]
        rev[t] = real.peer_links[1, 0]
    corr = np.corrcoef(fwd, rev)[0, 1]
    assert abs(corr) < 0.02


def test_erdos_renyi_structure():
    p = np.full(10, 0.5)
    model = erdos_renyi_model(10, 0.8, p)
    assert np.all(np.diag(model.peer_probs) == 1.0)
    off = ~np.eye(10, dtype=bool)
    assert np.all(model.peer_probs[off] == 0.8)
    assert validate_model(model) == []


def test_erdos_renyi_no_collaboration():
    model = erdos_renyi_model(3, 0.0, np.array([0.5, 0.5, 0.5]))
    assert np.array_equal(model.peer_probs, np.eye(3))


def test_erdos_renyi_independence_default():
    model = erdos_renyi_model(2, 0.6, np.array([0.5, 0.5]))
    assert model.reciprocity[0, 1] == pytest.approx(0.36, rel=1e-15)


def test_erdos_renyi_rejects_bad_probs():
    with pytest.raises(ValueError):
        erdos_renyi_model(3, 1.5, np.array([0.5, 0.5, 0.5]))
    with pytest.raises(ValueError):
        erdos_renyi_model(3, 0.5, np.array([0.5, 0.0, 0.5]))
