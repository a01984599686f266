"""Closed-form mean-squared-error accounting for the two-stage estimator.

The server's estimate decomposes into a topology-induced part (which nodes
and links happened to fire, and how the weights spread mass around) and a
privacy-noise part. For a weight matrix A (A[i, j] is the weight node j
applies when relaying to node i) the guarantees are:

* topology variance, worst case over data in the radius-R ball:
  ``R^2 * sigma_tv_sq`` upper-bounds the topology contribution; the bound is
  tight when all vectors are equal with norm R.
* privacy variance: ``sigma_pr_sq`` is the exact expected squared error
  contributed by the relaying noise (independence makes it exact, not a
  bound).

``sigma_tv_sq`` has three pieces: variance of each sender's total forwarded
mass across server uplinks, per-link Bernoulli variance, and a correction
coupling the two directions of each pair through the reciprocity matrix.
``sigma_tv_sq_bar`` replaces the cross-direction product alpha_li * alpha_il
by alpha_il^2, giving a convex upper bound suited to coordinate descent; the
gap is a positive semidefinite form in (alpha_il - alpha_li), so
bar >= plain always.

All accumulations use math.fsum: sums are exactly rounded, hence independent
of term order, which makes permutation equivariance and oracle comparisons
exact instead of approximate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum

import numpy as np

from .network import NetworkModel

__all__ = [
    "MseBreakdown",
    "unbiasedness_residual",
    "sigma_tv_sq",
    "sigma_tv_sq_bar",
    "sigma_pr_sq",
    "mse_upper_bound",
]


@dataclass(frozen=True)
class MseBreakdown:
    """Upper bound on E||estimate - mean||^2 split into its two sources.

    ``total = topology_bound + privacy_exact`` where
    ``topology_bound = r_bound^2 * sigma_tv_sq`` and ``privacy_exact``
    is the exact noise contribution.
    """

    topology_bound: float
    privacy_exact: float
    total: float


def unbiasedness_residual(model: NetworkModel, weights: np.ndarray) -> np.ndarray:
    """Per-row distance from the unbiasedness condition.

    The estimator is unbiased iff every row satisfies
    ``sum_j p_j * P[i, j] * A[i, j] = 1``; entry i of the result is the
    absolute deviation of that row sum from 1.
    """
    p = model.server_probs
    pp = model.peer_probs
    a = np.asarray(weights, dtype=float)
    n = model.n
    if a.shape != (n, n):
        raise ValueError(f"weights must have shape ({n}, {n}), got {a.shape}")
    return np.array(
        [
            abs(fsum(p[j] * pp[i, j] * a[i, j] for j in range(n)) - 1.0)
            for i in range(n)
        ]
    )


def sigma_tv_sq(model: NetworkModel, weights: np.ndarray) -> float:
    """Topology-variance coefficient of the estimator.

    Multiplied by R^2 this bounds the estimator's mean squared error in the
    noiseless case; the bound is attained when all data vectors are equal
    with norm R. Terms are accumulated in a fixed (i outer, j middle,
    l inner) order and summed exactly.
    """
    p = model.server_probs
    pp = model.peer_probs
    rec = model.reciprocity
    a = np.asarray(weights, dtype=float)
    n = model.n
    terms: list[float] = []
    for i in range(n):
        for j in range(n):
            for l in range(n):
                terms.append(
                    p[j] * (1.0 - p[j]) * pp[i, j] * pp[l, j] * a[i, j] * a[l, j]
                )
    for i in range(n):
        for j in range(n):
            terms.append(pp[i, j] * p[j] * (1.0 - pp[i, j]) * a[i, j] ** 2)
    for i in range(n):
        for l in range(n):
            terms.append(
                p[i] * p[l] * (rec[i, l] - pp[i, l] * pp[l, i]) * a[l, i] * a[i, l]
            )
    return fsum(terms) / n**2


def sigma_tv_sq_bar(model: NetworkModel, weights: np.ndarray) -> float:
    """Convex relaxation of :func:`sigma_tv_sq`.

    Identical except the pair-coupling sum uses alpha_il^2 in place of
    alpha_li * alpha_il, decoupling the rows. Always >= sigma_tv_sq, with
    equality when the reciprocity matrix is the independent one or the
    weights are symmetric.
    """
    p = model.server_probs
    pp = model.peer_probs
    rec = model.reciprocity
    a = np.asarray(weights, dtype=float)
    n = model.n
    terms: list[float] = []
    for i in range(n):
        for j in range(n):
            for l in range(n):
                terms.append(
                    p[j] * (1.0 - p[j]) * pp[i, j] * pp[l, j] * a[i, j] * a[l, j]
                )
    for i in range(n):
        for j in range(n):
            terms.append(pp[i, j] * p[j] * (1.0 - pp[i, j]) * a[i, j] ** 2)
    for i in range(n):
        for l in range(n):
            terms.append(
                p[i] * p[l] * (rec[i, l] - pp[i, l] * pp[l, i]) * a[i, l] ** 2
            )
    return fsum(terms) / n**2


def sigma_pr_sq(model: NetworkModel, sigma: float, d: int) -> float:
    """Exact expected squared error contributed by the relaying noise.

    Every delivered message carries an independent N(0, sigma^2 I_d) vector,
    so the noise lands in the estimate with second moment
    ``sigma^2 d / n^2 * sum_ij p_j P[i, j]``. Equality, not a bound.
    """
    if sigma < 0.0:
        raise ValueError(f"sigma = {sigma} must be >= 0")
    if d < 1:
        raise ValueError(f"d = {d} must be >= 1")
    p = model.server_probs
    pp = model.peer_probs
    n = model.n
    total = fsum(p[j] * pp[i, j] for i in range(n) for j in range(n))
    return sigma**2 * d * total / n**2


def mse_upper_bound(
    model: NetworkModel,
    weights: np.ndarray,
    sigma: float,
    d: int,
    r_bound: float,
) -> MseBreakdown:
    """Worst-case MSE guarantee for data in the radius-``r_bound`` ball."""
    if not r_bound > 0.0:
        raise ValueError(f"r_bound = {r_bound} must be > 0")
    topo = r_bound**2 * sigma_tv_sq(model, weights)
    priv = sigma_pr_sq(model, sigma, d)
    return MseBreakdown(topology_bound=topo, privacy_exact=priv, total=topo + priv)
