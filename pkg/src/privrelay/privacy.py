"""Local (eps, delta) privacy accounting for the Gaussian relaying mechanism.

Node j sends node i the message ``alpha_ij x_j + noise`` with isotropic
Gaussian noise of per-coordinate standard deviation sigma. Against the
honest-but-curious receiver this is the classic Gaussian mechanism: two
datasets differing in node j's vector (both inside the radius-R ball) shift
the message by at most the l2-sensitivity ``2 alpha_ij R``, so the leakage is

    eps_ij = sqrt(2 ln(1.25 / delta_ij)) * 2 alpha_ij R / sigma.

Because the link itself only exists with probability p_ij, the guarantee that
holds unconditionally is the pair ``(eps_ij, p_ij * delta_ij)``: with
probability 1 - p_ij nothing is sent at all.

Inverting the same formula at a fixed noise level turns a per-link budget
(eps_budget, delta_budget) into a hard cap on the usable weight,
``alpha_ij <= eps_budget * sigma / (2 R sqrt(2 ln(1.25 / delta_budget)))``,
which is what the weight optimizer enforces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .network import NetworkModel

__all__ = [
    "PrivacySpec",
    "DpGuarantee",
    "gauss_mechanism_factor",
    "l2_sensitivity",
    "achieved_epsilon",
    "weight_cap",
    "weight_cap_matrix",
    "sample_noise",
    "validate_spec",
]


def gauss_mechanism_factor(delta: float) -> float:
    """sqrt(2 ln(1.25/delta)): noise-to-sensitivity ratio per unit epsilon.

    Standard calibration of the Gaussian mechanism, valid for delta in
    (0, 1]. Raises for delta outside that range; delta = 1 is degenerate
    (factor sqrt(2 ln 1.25) ~ 0.668, guarantee nearly vacuous) and is left
    to the caller to warn about.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta = {delta} outside (0, 1]")
    return math.sqrt(2.0 * math.log(1.25 / delta))


def l2_sensitivity(alpha: float, r_bound: float) -> float:
    """Worst-case message shift when one node's vector changes inside the
    radius-``r_bound`` ball: ``2 * alpha * r_bound``."""
    if alpha < 0.0:
        raise ValueError(f"alpha = {alpha} must be nonnegative")
    if r_bound < 0.0:
        raise ValueError(f"r_bound = {r_bound} must be nonnegative")
    return 2.0 * alpha * r_bound


@dataclass(frozen=True)
class DpGuarantee:
    """An (epsilon, delta) pair achieved by one directed link."""

    epsilon: float
    delta: float


@dataclass(frozen=True)
class PrivacySpec:
    """Per-link privacy budgets.

    Attributes
    ----------
    r_bound : float
        Radius R of the ball every data vector lives in. Must be > 0.
    eps : (n, n) float array
        eps[i, j] is the epsilon budget node i grants for its own data on
        the directed link i -> j (sender-indexed, matching the weight
        matrix orientation: weights[i, j] is capped by eps[i, j]).
    delta : (n, n) float array
        Matching delta budgets, each in (0, 1].
    """

    r_bound: float
    eps: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eps", np.asarray(self.eps, dtype=float))
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=float))

    @property
    def n(self) -> int:
        return self.eps.shape[0]


def validate_spec(spec: PrivacySpec, model: NetworkModel | None = None) -> list[str]:
    """Return a list of violations; empty means usable.

    Budgets must be nonnegative with delta in (0, 1]; delta = 1 is accepted
    but triggers a warning (the guarantee is then nearly vacuous). When the
    network model is supplied, every link with positive traffic probability
    ``p_j * p_ij`` must carry a strictly positive epsilon budget, otherwise
    the noise threshold and the weight caps degenerate.
    """
    out: list[str] = []
    if not spec.r_bound > 0.0:
        out.append(f"r_bound = {spec.r_bound} must be > 0")
    n = spec.n
    if spec.eps.shape != (n, n):
        return out + [f"eps must be square, got shape {spec.eps.shape}"]
    if spec.delta.shape != (n, n):
        return out + [f"delta shape {spec.delta.shape} does not match eps ({n}, {n})"]
    for i in range(n):
        for j in range(n):
            if spec.eps[i, j] < 0.0:
                out.append(f"eps[{i},{j}] = {spec.eps[i, j]} must be >= 0")
            if not 0.0 < spec.delta[i, j] <= 1.0:
                out.append(f"delta[{i},{j}] = {spec.delta[i, j]} outside (0, 1]")
            elif spec.delta[i, j] == 1.0:
                warnings.warn(
                    f"delta[{i},{j}] = 1 makes the ({i},{j}) guarantee nearly vacuous",
                    stacklevel=2,
                )
    if model is not None:
        if model.n != n:
            out.append(f"model has {model.n} nodes but spec has {n}")
        else:
            p = model.server_probs
            pp = model.peer_probs
            for i in range(n):
                for j in range(n):
                    if p[j] * pp[i, j] > 0.0 and spec.eps[i, j] <= 0.0:
                        out.append(
                            f"eps[{i},{j}] = {spec.eps[i, j]} must be > 0 because "
                            f"link traffic probability p[{j}]*P[{i},{j}] = "
                            f"{p[j] * pp[i, j]} is positive"
                        )
    return out


def achieved_epsilon(
    alpha: float,
    r_bound: float,
    sigma: float,
    delta: float,
    p_link: float,
) -> DpGuarantee:
    """Leakage of one directed link at weight ``alpha`` and noise ``sigma``.

    Returns the unconditional guarantee ``(eps, p_link * delta)``. A link
    that never fires (``p_link = 0``) or carries nothing (``alpha = 0``)
    leaks nothing. A positive weight with zero noise has unbounded leakage
    and is refused.
    """
    if not 0.0 <= p_link <= 1.0:
        raise ValueError(f"p_link = {p_link} outside [0, 1]")
    if p_link == 0.0 or alpha == 0.0:
        return DpGuarantee(epsilon=0.0, delta=0.0)
    if sigma <= 0.0:
        raise ValueError(
            f"sigma = {sigma}: positive weight alpha = {alpha} needs positive noise"
        )
    eps = gauss_mechanism_factor(delta) * l2_sensitivity(alpha, r_bound) / sigma
    return DpGuarantee(epsilon=eps, delta=p_link * delta)


def weight_cap(
    eps_budget: float, delta_budget: float, sigma: float, r_bound: float
) -> float:
    """Largest weight whose leakage at noise ``sigma`` stays within budget.

    Inverse of :func:`achieved_epsilon` in alpha. Zero noise or a zero
    epsilon budget force the weight to 0.
    """
    if eps_budget < 0.0:
        raise ValueError(f"eps_budget = {eps_budget} must be >= 0")
    if sigma < 0.0:
        raise ValueError(f"sigma = {sigma} must be >= 0")
    if not r_bound > 0.0:
        raise ValueError(f"r_bound = {r_bound} must be > 0")
    if sigma == 0.0 or eps_budget == 0.0:
        return 0.0
    return eps_budget * sigma / (gauss_mechanism_factor(delta_budget) * 2.0 * r_bound)


def weight_cap_matrix(spec: PrivacySpec, sigma: float) -> np.ndarray:
    """Entrywise :func:`weight_cap` for a whole budget matrix."""
    if sigma < 0.0:
        raise ValueError(f"sigma = {sigma} must be >= 0")
    if not spec.r_bound > 0.0:
        raise ValueError(f"r_bound = {spec.r_bound} must be > 0")
    factors = np.sqrt(2.0 * np.log(1.25 / spec.delta))
    return spec.eps * sigma / (factors * 2.0 * spec.r_bound)


def sample_noise(sigma: float, d: int, rng: np.random.Generator) -> np.ndarray:
    """One isotropic Gaussian noise vector, exactly zero when sigma = 0.

    The sigma = 0 path consumes no randomness so that noiseless runs keep
    the same stream layout regardless of dimension.
    """
    if sigma < 0.0:
        raise ValueError(f"sigma = {sigma} must be >= 0")
    if d < 1:
        raise ValueError(f"d = {d} must be >= 1")
    if sigma == 0.0:
        return np.zeros(d)
    return sigma * rng.standard_normal(d)
