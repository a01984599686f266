"""Two-stage relaying protocol and its Monte-Carlo harness.

Orientation convention used throughout the package: index order is
(sender, receiver). ``weights[i, j]`` is the weight receiver j applies to
sender i's vector, ``peer_links[i, j]`` is the state of the directed link
i -> j, and the noise block ``noise[i, j]`` rides on that same link.

Stage 1 (local aggregation): every node j forms

    local[j] = sum_i peer_links[i, j] * (weights[i, j] * x[i] + noise[i, j])

where each delivered message carries fresh N(0, sigma^2 I_d) noise, the
node's own retained share (i = j) included.

Stage 2 (global aggregation): the server averages whatever uplinks fired,

    estimate = (1/n) * sum_j ps_links[j] * local[j]

dividing by the fixed n rather than the number of successful uplinks; the
weights are what compensate for expected losses. The naive baseline skips
relaying entirely: (1/n) * sum_i ps_links[i] * x[i].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import fsum

import numpy as np

from .network import LinkRealization, NetworkModel, sample_links, validate_model

__all__ = [
    "DataSet",
    "TrialResult",
    "MonteCarloResult",
    "validate_data",
    "stage1_local_aggregate",
    "stage2_global_aggregate",
    "naive_estimate",
    "run_monte_carlo",
]


@dataclass(frozen=True)
class DataSet:
    """The n local vectors, one row per node."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"data must be a (n, d) array, got shape {x.shape}")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_vectors(cls, vectors) -> "DataSet":
        return cls(x=np.vstack([np.asarray(v, dtype=float) for v in vectors]))

    def mean(self) -> np.ndarray:
        return self.x.mean(axis=0)


def validate_data(data: DataSet, r_bound: float) -> list[str]:
    """Check every vector sits in the radius-``r_bound`` ball (1e-9 relative
    slack for vectors normalized in floating point)."""
    if not r_bound > 0.0:
        return [f"r_bound = {r_bound} must be > 0"]
    out = []
    norms = np.linalg.norm(data.x, axis=1)
    for i in range(data.n):
        if norms[i] > r_bound * (1.0 + 1e-9):
            out.append(f"||x[{i}]|| = {norms[i]} exceeds r_bound = {r_bound}")
    return out


def stage1_local_aggregate(
    data: DataSet,
    weights: np.ndarray,
    sigma: float,
    links: LinkRealization,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-node noisy weighted aggregates, shape (n, d).

    The full (n, n, d) noise block is drawn in one call regardless of which
    links fired, so the random stream layout depends only on (n, d); with
    sigma = 0 no randomness is consumed at all.
    """
    a = np.asarray(weights, dtype=float)
    n, d = data.n, data.d
    if a.shape != (n, n):
        raise ValueError(f"weights must have shape ({n}, {n}), got {a.shape}")
    if sigma < 0.0:
        raise ValueError(f"sigma = {sigma} must be >= 0")
    if sigma == 0.0:
        noise = np.zeros((n, n, d))
    else:
        noise = sigma * rng.standard_normal((n, n, d))
    # messages[i, j] = what receiver j gets from sender i (if the link fires)
    messages = a[:, :, None] * data.x[:, None, :] + noise
    mask = links.peer_links.astype(float)[:, :, None]
    return (mask * messages).sum(axis=0)


def stage2_global_aggregate(
    local_aggregates: np.ndarray, ps_links: np.ndarray, n: int
) -> np.ndarray:
    """Server-side average of the uplinks that fired, scaled by 1/n."""
    local = np.asarray(local_aggregates, dtype=float)
    if local.shape[0] != n:
        raise ValueError(f"expected {n} local aggregates, got {local.shape[0]}")
    mask = np.asarray(ps_links, dtype=float)[:, None]
    return (mask * local).sum(axis=0) / n


def naive_estimate(data: DataSet, ps_links: np.ndarray) -> np.ndarray:
    """No-relaying baseline: (1/n) * sum of the vectors whose uplink fired."""
    mask = np.asarray(ps_links, dtype=float)[:, None]
    return (mask * data.x).sum(axis=0) / data.n


@dataclass(frozen=True)
class TrialResult:
    """One Monte-Carlo round."""

    estimate: np.ndarray
    naive: np.ndarray
    squared_error: float
    squared_error_naive: float
    realization: LinkRealization


@dataclass
class MonteCarloResult:
    """Monte-Carlo summary of estimation error against the full mean.

    ``mse`` / ``mse_naive`` average the per-trial squared errors; the
    matching ``*_stderr`` fields are standard errors of those averages
    (sample std / sqrt(trials), 0.0 when trials < 2). ``mean_estimate``
    and ``estimate_stderr`` are componentwise, for bias checks.
    """

    trials: int
    mse: float
    mse_stderr: float
    mse_naive: float
    mse_naive_stderr: float
    mean_estimate: np.ndarray
    estimate_stderr: np.ndarray
    squared_errors: np.ndarray
    squared_errors_naive: np.ndarray
    trial_records: list[TrialResult] = field(default_factory=list)


def run_monte_carlo(
    model: NetworkModel,
    data: DataSet,
    weights: np.ndarray,
    sigma: float,
    trials: int,
    master_seed: int,
    *,
    r_bound: float | None = None,
    keep_trials: bool = False,
) -> MonteCarloResult:
    """Run ``trials`` independent protocol rounds and summarize the error.

    Trial t uses its own generator seeded with ``[master_seed, t]``, so any
    prefix of the trial sequence is reproducible independently of the total
    count, and the loop being serial carries no determinism caveats. Scalar
    reductions across trials use exact summation.
    """
    if trials < 1:
        raise ValueError(f"trials = {trials} must be >= 1")
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid network model: " + "; ".join(violations))
    if model.n != data.n:
        raise ValueError(f"model has {model.n} nodes but data has {data.n} rows")
    if r_bound is not None:
        violations = validate_data(data, r_bound)
        if violations:
            raise ValueError("invalid data: " + "; ".join(violations))

    n, d = data.n, data.d
    target = data.mean()
    sq = np.empty(trials)
    sq_naive = np.empty(trials)
    est_sum = np.zeros(d)
    est_sumsq = np.zeros(d)
    records: list[TrialResult] = []

    for t in range(trials):
        rng = np.random.default_rng([master_seed, t])
        links = sample_links(model, rng, check=False)
        local = stage1_local_aggregate(data, weights, sigma, links, rng)
        est = stage2_global_aggregate(local, links.ps_links, n)
        nave = naive_estimate(data, links.ps_links)
        err = est - target
        err_naive = nave - target
        sq[t] = float(err @ err)
        sq_naive[t] = float(err_naive @ err_naive)
        est_sum += est
        est_sumsq += est * est
        if keep_trials:
            records.append(
                TrialResult(
                    estimate=est,
                    naive=nave,
                    squared_error=sq[t],
                    squared_error_naive=sq_naive[t],
                    realization=links,
                )
            )

    mse = fsum(sq) / trials
    mse_naive = fsum(sq_naive) / trials
    if trials >= 2:
        mse_stderr = float(np.std(sq, ddof=1)) / trials**0.5
        mse_naive_stderr = float(np.std(sq_naive, ddof=1)) / trials**0.5
        mean_est = est_sum / trials
        var = np.maximum(est_sumsq - trials * mean_est**2, 0.0) / (trials - 1)
        est_stderr = np.sqrt(var / trials)
    else:
        mse_stderr = 0.0
        mse_naive_stderr = 0.0
        mean_est = est_sum / trials
        est_stderr = np.zeros(d)

    return MonteCarloResult(
        trials=trials,
        mse=mse,
        mse_stderr=mse_stderr,
        mse_naive=mse_naive,
        mse_naive_stderr=mse_naive_stderr,
        mean_estimate=mean_est,
        estimate_stderr=est_stderr,
        squared_errors=sq,
        squared_errors_naive=sq_naive,
        trial_records=records,
    )
