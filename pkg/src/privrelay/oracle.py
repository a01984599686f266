"""Brute-force references the analytical formulas are checked against.

Two independent routes to the same quantities:

* :func:`exact_mse` enumerates every connectivity outcome of a small
  network (2^n server-link patterns times at most 4^(n(n-1)/2) pair
  patterns, honoring the pairwise reciprocity law) and accumulates the
  exact topology-induced MSE for a concrete dataset, plus the exact
  closed-form noise contribution. No sampling, no appeal to the
  analytical variance decomposition.
* :func:`grid_search` minimizes the same objective the weight optimizer
  minimizes, for n = 2, by scanning the two free off-diagonal weights on
  a grid (the diagonal weights are pinned by unbiasedness) and picking
  the smallest budget-feasible noise level for each candidate from a grid
  of its own. The optimizer has to match or beat this.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import fsum

import numpy as np

from .network import NetworkModel, validate_model
from .privacy import PrivacySpec, validate_spec
from .protocol import DataSet

__all__ = ["ExactMoments", "exact_mse", "GridSearchResult", "grid_search"]

# 2^n * 4^(n(n-1)/2) outcomes: n = 4 is already 65536 and n = 5 would be
# 33 million; refuse anything bigger than 4 nodes.
_MAX_EXACT_NODES = 4


@dataclass(frozen=True)
class ExactMoments:
    """Exact error moments: total = topology part + noise part."""

    mse: float
    topology: float
    noise: float


def exact_mse(
    model: NetworkModel,
    data: DataSet,
    weights: np.ndarray,
    sigma: float,
    d: int | None = None,
) -> ExactMoments:
    """Exact E||estimate - mean||^2 by full enumeration of link outcomes.

    The estimate is linear in the data given the links: sender i's vector
    enters with coefficient c_i = sum_j ps[j] peer[i, j] weights[i, j] / n.
    Enumerating all outcomes with their joint probabilities and averaging
    ||sum_i (c_i - 1) x_i||^2 / n^2 gives the exact topology term; the
    noise term is exact in closed form because every message's noise is
    independent of everything else.
    """
    n = model.n
    if n > _MAX_EXACT_NODES:
        raise ValueError(
            f"exact enumeration supports at most {_MAX_EXACT_NODES} nodes, got {n}"
        )
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid network model: " + "; ".join(violations))
    if data.n != n:
        raise ValueError(f"data has {data.n} rows but model has {n} nodes")
    a = np.asarray(weights, dtype=float)
    if a.shape != (n, n):
        raise ValueError(f"weights must have shape ({n}, {n}), got {a.shape}")
    if sigma < 0.0:
        raise ValueError(f"sigma = {sigma} must be >= 0")
    d_eff = data.d if d is None else d

    p = model.server_probs
    pp = model.peer_probs
    rec = model.reciprocity
    gram = data.x @ data.x.T

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pair_outcomes: list[list[tuple[int, int, float]]] = []
    for i, j in pairs:
        e = rec[i, j]
        outcomes = [
            (1, 1, e),
            (1, 0, pp[i, j] - e),
            (0, 1, pp[j, i] - e),
            (0, 0, 1.0 - pp[i, j] - pp[j, i] + e),
        ]
        # Probabilities can dip a hair below zero in floating point when
        # the reciprocity sits exactly on a boundary; clamp and drop.
        pair_outcomes.append([(x, y, q) for x, y, q in outcomes if q > 0.0])

    a_list = a.tolist()
    gram_list = gram.tolist()
    p_list = p.tolist()
    terms: list[float] = []
    for ps_bits in itertools.product((0, 1), repeat=n):
        prob_ps = 1.0
        for i in range(n):
            prob_ps *= p_list[i] if ps_bits[i] else 1.0 - p_list[i]
        if prob_ps == 0.0:
            continue
        for combo in itertools.product(*pair_outcomes):
            prob = prob_ps
            for _, _, q in combo:
                prob *= q
            peer = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
            for (i, j), (fwd, bwd, _) in zip(pairs, combo):
                peer[i][j] = fwd
                peer[j][i] = bwd
            coeff = [
                sum(
                    ps_bits[j] * peer[i][j] * a_list[i][j] for j in range(n)
                )
                / n
                - 1.0 / n
                for i in range(n)
            ]
            err_sq = sum(
                coeff[i] * coeff[l] * gram_list[i][l]
                for i in range(n)
                for l in range(n)
            )
            terms.append(prob * err_sq)
    topology = fsum(terms)

    # Message (i, j) is delivered and forwarded with probability
    # P[i, j] * p[j]; its noise is independent of all links and all other
    # noises, so the cross terms vanish and the second moment is exact.
    total = fsum(p[j] * pp[i, j] for i in range(n) for j in range(n))
    noise = sigma**2 * d_eff * total / n**2

    return ExactMoments(mse=topology + noise, topology=topology, noise=noise)


@dataclass(frozen=True)
class GridSearchResult:
    """Best grid point of the two-node design problem."""

    weights: np.ndarray
    sigma: float
    objective: float
    n_feasible: int
    grid_points: int


def grid_search(
    model: NetworkModel,
    spec: PrivacySpec,
    *,
    grid_points: int = 200,
    dim: int = 1,
) -> GridSearchResult:
    """Exhaustive scan of the n = 2 design space.

    Unbiasedness pins the diagonal weights to the off-diagonal ones
    (A[0,0] = (1 - p_1 P[0,1] A[0,1]) / p_0 and symmetrically), so the
    search space is the rectangle of off-diagonal weights that keep the
    diagonals nonnegative, times a noise grid spanning from the threshold
    to the largest level any candidate needs. For each weight pair the
    scan keeps the smallest grid noise admitted by the caps (the objective
    is increasing in sigma, so that choice dominates scanning the noise
    axis point by point).
    """
    n = model.n
    if n != 2:
        raise ValueError(f"grid search is specific to n = 2, got n = {n}")
    if grid_points < 2:
        raise ValueError(f"grid_points = {grid_points} must be >= 2")
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid network model: " + "; ".join(violations))
    violations = validate_spec(spec, model)
    if violations:
        raise ValueError("invalid privacy spec: " + "; ".join(violations))

    p = model.server_probs
    pp = model.peer_probs
    rec = model.reciprocity
    r = spec.r_bound
    factors = np.sqrt(2.0 * np.log(1.25 / spec.delta))

    # Noise floor: worst row of the budget-weighted traffic mass.
    row_mass = [
        fsum(p[j] * pp[i, j] * spec.eps[i, j] / factors[i, j] for j in range(2))
        for i in range(2)
    ]
    if min(row_mass) <= 0.0:
        raise ValueError("a row has zero budgeted traffic; no feasible design")
    sigma_thr = 2.0 * r / min(row_mass)

    mass01 = p[1] * pp[0, 1]
    mass10 = p[0] * pp[1, 0]
    axis01 = (
        np.linspace(0.0, 1.0 / mass01, grid_points)
        if mass01 > 0.0
        else np.zeros(1)
    )
    axis10 = (
        np.linspace(0.0, 1.0 / mass10, grid_points)
        if mass10 > 0.0
        else np.zeros(1)
    )
    a01, a10 = np.meshgrid(axis01, axis10, indexing="ij")
    a00 = (1.0 - mass01 * a01) / p[0]
    a11 = (1.0 - mass10 * a10) / p[1]

    def need(alpha: np.ndarray, i: int, j: int) -> np.ndarray:
        # Smallest sigma whose (i, j) cap admits alpha; 0 for alpha = 0.
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = factors[i, j] * 2.0 * alpha * r / spec.eps[i, j]
        return np.where(alpha > 0.0, raw, 0.0)

    sigma_need = np.maximum.reduce(
        [need(a00, 0, 0), need(a01, 0, 1), need(a10, 1, 0), need(a11, 1, 1)]
    )
    sigma_need = np.maximum(sigma_need, sigma_thr)
    sigma_hi = float(np.max(sigma_need))
    # Geometric spacing: the caps scale linearly in sigma and the noise
    # range spans orders of magnitude when some budgets are generous, so a
    # linear axis would waste almost all its resolution far from the
    # threshold where the minima live.
    sigma_axis = np.geomspace(sigma_thr, sigma_hi, grid_points)
    # First grid level at or above what each candidate needs. The needs
    # were just included in the axis range, so every candidate lands on a
    # real grid index; clip guards the endpoint in floating point.
    idx = np.minimum(
        np.searchsorted(sigma_axis, sigma_need, side="left"), grid_points - 1
    )
    sigma_pick = sigma_axis[idx]

    # Topology variance, written out for n = 2.
    s1 = p[0] * (1.0 - p[0]) * (pp[0, 0] * a00 + pp[1, 0] * a10) ** 2 + p[1] * (
        1.0 - p[1]
    ) * (pp[0, 1] * a01 + pp[1, 1] * a11) ** 2
    s2 = (
        pp[0, 0] * p[0] * (1.0 - pp[0, 0]) * a00**2
        + pp[0, 1] * p[1] * (1.0 - pp[0, 1]) * a01**2
        + pp[1, 0] * p[0] * (1.0 - pp[1, 0]) * a10**2
        + pp[1, 1] * p[1] * (1.0 - pp[1, 1]) * a11**2
    )
    s3 = 2.0 * p[0] * p[1] * (rec[0, 1] - pp[0, 1] * pp[1, 0]) * a01 * a10
    tv = (s1 + s2 + s3) / 4.0

    traffic = fsum(p[j] * pp[i, j] for i in range(2) for j in range(2))
    piv = sigma_pick**2 * dim * traffic / 4.0
    obj = r**2 * tv + piv

    flat = int(np.argmin(obj))
    ii, jj = np.unravel_index(flat, obj.shape)
    best = np.array(
        [[a00[ii, jj], a01[ii, jj]], [a10[ii, jj], a11[ii, jj]]]
    )
    n_feasible = int(np.sum(grid_points - idx))
    return GridSearchResult(
        weights=best,
        sigma=float(sigma_pick[ii, jj]),
        objective=float(obj[ii, jj]),
        n_feasible=n_feasible,
        grid_points=obj.size * grid_points,
    )
