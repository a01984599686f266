"""Shared instance generators for the test suite.

Every helper takes an explicit numpy Generator so tests stay deterministic;
no module-level randomness.
"""

import numpy as np

from privrelay import DataSet, NetworkModel, PrivacySpec


def random_model(rng: np.random.Generator, n: int, *, correlated: bool = True) -> NetworkModel:
    """Valid random topology: node probs in [0.2, 0.95], link probs in [0.1, 0.9].

    Reciprocity is drawn uniformly between independence and the upper
    Frechet bound when ``correlated``; pinned exactly at independence
    otherwise (which makes the relaxed and true variance coincide).
    """
    p = rng.uniform(0.2, 0.95, size=n)
    pp = rng.uniform(0.1, 0.9, size=(n, n))
    np.fill_diagonal(pp, 1.0)
    rec = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            indep = pp[i, j] * pp[j, i]
            hi = min(pp[i, j], pp[j, i])
            e = indep + rng.uniform() * (hi - indep) if correlated else indep
            rec[i, j] = rec[j, i] = e
    return NetworkModel(server_probs=p, peer_probs=pp, reciprocity=rec)


def uniform_spec(n: int, *, eps: float = 1000.0, delta: float = 1e-3, r_bound: float = 1.0) -> PrivacySpec:
    """Generous uniform budgets; caps never bind at these levels."""
    return PrivacySpec(
        r_bound=r_bound,
        eps=np.full((n, n), float(eps)),
        delta=np.full((n, n), float(delta)),
    )


def unbiased_weights(rng: np.random.Generator, model: NetworkModel) -> np.ndarray:
    """Random nonnegative weights normalized so every row's weighted sum is 1."""
    n = model.n
    p = model.server_probs
    pp = model.peer_probs
    a = rng.uniform(0.1, 1.0, size=(n, n))
    for i in range(n):
        mass = sum(p[j] * pp[i, j] * a[i, j] for j in range(n))
        a[i, :] /= mass
    return a


def collinear_data(rng: np.random.Generator, n: int, d: int, r_bound: float) -> DataSet:
    """All nodes hold the same vector of norm exactly r_bound.

    This is the worst case for the topology variance bound: the
    Cauchy-Schwarz step in its derivation is tight for collinear data.
    """
    v = rng.normal(size=d)
    v *= r_bound / np.linalg.norm(v)
    return DataSet(x=np.tile(v, (n, 1)))


def random_data(rng: np.random.Generator, n: int, d: int, r_bound: float) -> DataSet:
    """Independent vectors with norms at or below r_bound."""
    x = rng.normal(size=(n, d))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    scales = rng.uniform(0.1, 1.0, size=(n, 1)) * r_bound
    return DataSet(x=x / norms * scales)


def trust_regime_pair(rng: np.random.Generator) -> tuple[NetworkModel, PrivacySpec]:
    """Two-node instance in the sweep experiments' operating regime.

    Generous budgets on the diagonal and on a random subset of the two
    off-diagonal links, tight budgets elsewhere. In this regime the
    alternating scheme lands within a couple percent of the exhaustive
    grid minimum; uniformly tight budgets can stall it far above (see
    test_optimizer.py::test_tight_uniform_budgets_stall_above_grid).
    """
    p = rng.uniform(0.1, 0.95, size=2)
    pp = rng.uniform(0.3, 0.95, size=(2, 2))
    np.fill_diagonal(pp, 1.0)
    indep = pp[0, 1] * pp[1, 0]
    hi = min(pp[0, 1], pp[1, 0])
    e = indep + rng.uniform() * (hi - indep)
    model = NetworkModel(
        server_probs=p,
        peer_probs=pp,
        reciprocity=np.array([[1.0, e], [e, 1.0]]),
    )
    eps = np.full((2, 2), 0.1)
    np.fill_diagonal(eps, 1000.0)
    for i, j in ((0, 1), (1, 0)):
        if rng.uniform() < 0.5:
            eps[i, j] = 1000.0
    spec = PrivacySpec(r_bound=1.0, eps=eps, delta=np.full((2, 2), 1e-3))
    return model, spec
