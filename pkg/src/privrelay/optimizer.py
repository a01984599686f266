"""Privacy-constrained minimization of the topology-variance bound.

The design problem: choose the weight matrix A and the common noise level
sigma to minimize ``r_bound^2 * sigma_tv_sq + sigma_pr_sq`` subject to

* unbiasedness: every row i satisfies sum_j p_j P[i,j] A[i,j] = 1,
* privacy caps: 0 <= A[i,j] <= weight_cap(eps[i,j], delta[i,j], sigma),
* a noise floor: sigma >= sigma_threshold, below which no cap-respecting
  weights can reach row sums of 1.

The solver alternates three blocks:

1. relaxed sweeps: row-wise exact minimization of the convex upper bound
   ``sigma_tv_sq_bar`` (rows decouple there, each row is a capped simplex-
   like quadratic program solved by dual bisection on the unbiasedness
   multiplier lambda),
2. fine-tune sweeps: the same row structure applied to the true
   ``sigma_tv_sq``, whose row restriction is still convex,
3. a closed-form noise update: the smallest sigma whose caps admit the
   current weights (never below the threshold).

Each row subproblem minimizes ``sum_j q_j a_j^2 + beta_j a_j`` over
``0 <= a_j <= cap_j`` with ``sum_j mass_j a_j = target``, where
``mass_j = p_j P[i,j]``. Normalizing by mass gives the per-entry solution
``a_j(lambda) = clip((lambda - b_j) / (2 c_j), 0, cap_j)`` and a scalar
monotone equation in lambda. After bracketing the root by bisection, the
active set is frozen and lambda is recovered in closed form, which brings
the row optimum to machine precision; that precision is what makes the
per-iteration descent of the relaxed objective hold to 1e-10 instead of
bisection-tolerance noise.

Row update iterations are counted individually: iteration l (1-based)
updates row (l - 1) mod n, so `sweeps = 50 n` means 50 full passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import fsum

import numpy as np

from .analysis import sigma_pr_sq, sigma_tv_sq, sigma_tv_sq_bar
from .network import NetworkModel, validate_model
from .privacy import (
    PrivacySpec,
    gauss_mechanism_factor,
    validate_spec,
    weight_cap_matrix,
)

__all__ = [
    "FeasibilityError",
    "OptimizerConfig",
    "WeightSolution",
    "OptimizeDiagnostics",
    "BisectionResult",
    "sigma_threshold",
    "update_sigma",
    "bisect_lambda",
    "relaxed_row_update",
    "finetune_row_update",
    "gauss_seidel_sweeps",
    "validate_solution",
    "optimize",
]


class FeasibilityError(ValueError):
    """No cap-respecting weights can satisfy unbiasedness.

    Carries the offending row and, when meaningful, the shortfall of the
    capped row sum below its target.
    """

    def __init__(self, message: str, *, row: int | None = None, deficit: float | None = None):
        super().__init__(message)
        self.row = row
        self.deficit = deficit


@dataclass(frozen=True)
class OptimizerConfig:
    """Iteration budget and tolerances for the alternating solver.

    ``relaxed_iters`` / ``finetune_iters`` count individual row updates
    and default to 50 * n when left as None.
    """

    outer_rounds: int = 10
    relaxed_iters: int | None = None
    finetune_iters: int | None = None
    bisection_tol: float = 1e-12
    row_sum_tol: float = 1e-9

    def validate(self) -> list[str]:
        out = []
        if self.outer_rounds < 1:
            out.append(f"outer_rounds = {self.outer_rounds} must be >= 1")
        for name in ("relaxed_iters", "finetune_iters"):
            v = getattr(self, name)
            if v is not None and v < 1:
                out.append(f"{name} = {v} must be >= 1 (or None for the default)")
        if not self.bisection_tol > 0.0:
            out.append(f"bisection_tol = {self.bisection_tol} must be > 0")
        if not self.row_sum_tol > 0.0:
            out.append(f"row_sum_tol = {self.row_sum_tol} must be > 0")
        return out


@dataclass(frozen=True)
class WeightSolution:
    """Feasible design point: weight matrix plus noise level."""

    weights: np.ndarray
    sigma: float


@dataclass
class OptimizeDiagnostics:
    """Per-outer-round progress of :func:`optimize`.

    ``objective_trace[k]`` is the true objective after k outer rounds
    (entry 0 is the initialization), ``sigma_trace`` matches, and
    ``bracket_doublings`` counts how often the published bisection
    bracket had to be enlarged.
    """

    sigma_threshold: float
    objective_trace: list[float] = field(default_factory=list)
    sigma_trace: list[float] = field(default_factory=list)
    bracket_doublings: int = 0


def sigma_threshold(model: NetworkModel, spec: PrivacySpec) -> float:
    """Smallest noise level at which the caps can reach row sums of 1.

    Row i's capped mass is sigma/(2R) * sum_j p_j P[i,j] eps[i,j]/s[i,j]
    with s the Gaussian-mechanism factor; setting the worst row to 1 gives
    ``2 R / min_i sum_j p_j P[i,j] eps[i,j] / s[i,j]``. A row whose
    budgeted traffic is all zero can never be unbiased at any sigma.
    """
    p = model.server_probs
    pp = model.peer_probs
    n = model.n
    masses = []
    for i in range(n):
        mass = fsum(
            p[j]
            * pp[i, j]
            * spec.eps[i, j]
            / gauss_mechanism_factor(spec.delta[i, j])
            for j in range(n)
        )
        if mass <= 0.0:
            raise FeasibilityError(
                f"row {i} has zero budgeted traffic: every j has "
                f"p[j]*P[{i},j]*eps[{i},j] = 0, so unbiasedness is unreachable",
                row=i,
            )
        masses.append(mass)
    return 2.0 * spec.r_bound / min(masses)


def update_sigma(
    weights: np.ndarray, spec: PrivacySpec, sigma_floor: float
) -> float:
    """Smallest noise level whose caps admit ``weights``, floored.

    For every positive weight the cap binds at
    ``sigma = s[i,j] * 2 * A[i,j] * R / eps[i,j]``; the update takes the max
    of those candidates and the floor (normally the threshold), so it can
    lower sigma after the weights shrink but never break a cap.
    """
    a = np.asarray(weights, dtype=float)
    n = spec.n
    if a.shape != (n, n):
        raise ValueError(f"weights must have shape ({n}, {n}), got {a.shape}")
    if sigma_floor < 0.0:
        raise ValueError(f"sigma_floor = {sigma_floor} must be >= 0")
    best = sigma_floor
    for i in range(n):
        for j in range(n):
            if a[i, j] == 0.0:
                continue
            if a[i, j] < 0.0:
                raise ValueError(f"weights[{i},{j}] = {a[i, j]} must be >= 0")
            if spec.eps[i, j] <= 0.0:
                raise FeasibilityError(
                    f"weights[{i},{j}] = {a[i, j]} > 0 but eps[{i},{j}] = "
                    f"{spec.eps[i, j]}: no noise level admits it",
                    row=i,
                )
            cand = (
                gauss_mechanism_factor(spec.delta[i, j])
                * 2.0
                * a[i, j]
                * spec.r_bound
                / spec.eps[i, j]
            )
            if cand > best:
                best = cand
    return float(best)


@dataclass(frozen=True)
class BisectionResult:
    """Solution of one row's capped quadratic program.

    ``lam`` is the unbiasedness multiplier, ``alphas`` the per-entry
    weights over the free entries, ``row_sum`` the achieved
    ``sum mass * alpha``. ``lam_max_published`` is the a-priori bracket
    end; ``doublings`` counts how often it had to be enlarged before it
    contained the root (possible when caps bind, e.g. near the noise
    threshold). ``polished`` reports whether the closed-form active-set
    refinement was accepted.
    """

    lam: float
    alphas: np.ndarray
    row_sum: float
    lam_max_published: float
    doublings: int
    polished: bool
    all_capped: bool


def bisect_lambda(
    masses: np.ndarray,
    caps: np.ndarray,
    coeff_b: np.ndarray,
    coeff_c: np.ndarray,
    target: float,
    *,
    bisection_tol: float = 1e-12,
    row_sum_tol: float = 1e-9,
) -> BisectionResult:
    """Solve ``sum_j mass_j * clip((lam - b_j)/(2 c_j), 0, cap_j) = target``.

    The left side is nondecreasing and piecewise linear in lam, so the root
    is bracketed and bisected; ``lam_max = max_j (2 c_j / mass_j + b_j)``
    is a valid end whenever some entry alone can reach the target uncapped,
    and is doubled geometrically otherwise. After bisection the clip
    statuses are frozen and lam is recovered exactly from the interior
    entries; the refinement is kept only if it reproduces the same statuses.

    Raises :class:`FeasibilityError` when even all-caps falls short of the
    target by more than ``row_sum_tol``.
    """
    m = np.asarray(masses, dtype=float)
    w = np.asarray(caps, dtype=float)
    b = np.asarray(coeff_b, dtype=float)
    c = np.asarray(coeff_c, dtype=float)
    if m.size == 0:
        raise FeasibilityError(
            f"empty free set cannot reach row-sum target {target}", deficit=target
        )
    if np.any(m <= 0.0):
        raise ValueError("masses must be positive on the free set")
    if np.any(c <= 0.0):
        raise ValueError("quadratic coefficients must be positive on the free set")

    def g(lam: float) -> float:
        return float(m @ np.clip((lam - b) / (2.0 * c), 0.0, w))

    cap_sum = fsum(mi * wi for mi, wi in zip(m, w))
    lam_max = float(np.max(2.0 * c / m + b))
    if cap_sum < target - row_sum_tol:
        raise FeasibilityError(
            f"capped row mass {cap_sum} cannot reach target {target}",
            deficit=target - cap_sum,
        )
    if cap_sum <= target:
        # Caps exactly exhaust (or fall within tolerance of) the target:
        # the unique solution is all-capped.
        lam = float(np.max(b + 2.0 * c * w))
        return BisectionResult(
            lam=lam,
            alphas=w.copy(),
            row_sum=cap_sum,
            lam_max_published=lam_max,
            doublings=0,
            polished=False,
            all_capped=True,
        )

    lo = 0.0
    hi = lam_max if lam_max > 0.0 else 1.0
    doublings = 0
    while g(hi) < target:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise FeasibilityError(
                f"bracket expansion failed to reach target {target} "
                f"(cap-limited row sum {g(hi)})",
                deficit=target - g(hi),
            )
    while hi - lo > bisection_tol:
        mid = 0.5 * (lo + hi)
        val = g(mid)
        if abs(val - target) < row_sum_tol:
            lo = hi = mid
            break
        if val < target:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)

    # Freeze the clip statuses and solve the interior linear equation for
    # lam exactly; bisection alone leaves O(lam * tol) slack in the row sum,
    # which is too coarse for strict per-iteration descent checks.
    raw = (lam - b) / (2.0 * c)
    interior = (raw > 0.0) & (raw < w)
    capped = raw >= w
    polished = False
    if np.any(interior):
        denom = fsum(mi / (2.0 * ci) for mi, ci in zip(m[interior], c[interior]))
        capped_mass = fsum(m[capped] * w[capped])
        numer = (target - capped_mass) + fsum(
            m[interior] * b[interior] / (2.0 * c[interior])
        )
        if denom > 0.0 and math.isfinite(numer):
            lam_star = numer / denom
            raw_star = (lam_star - b) / (2.0 * c)
            same = (
                np.array_equal((raw_star > 0.0) & (raw_star < w), interior)
                and np.array_equal(raw_star >= w, capped)
            )
            if same:
                lam = lam_star
                raw = raw_star
                polished = True
    alphas = np.clip(raw, 0.0, w)
    row_sum = fsum(mi * ai for mi, ai in zip(m, alphas))
    return BisectionResult(
        lam=lam,
        alphas=alphas,
        row_sum=row_sum,
        lam_max_published=lam_max,
        doublings=doublings,
        polished=polished,
        all_capped=False,
    )


def _row_coefficients(
    i: int, weights: np.ndarray, model: NetworkModel, mode: str
) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry (b, c) of row i's normalized quadratic subproblem.

    Valid wherever the row's traffic mass p_j P[i,j] is positive; other
    entries hold garbage and must be masked by the caller. The relaxed
    mode's c carries the pair-coupling term; the fine-tune mode moves that
    coupling into b using the opposite-direction weights, which is exactly
    the difference between the decoupled bound and the true variance.
    """
    p = model.server_probs
    pp = model.peer_probs
    rec = model.reciprocity
    a = weights
    col_sums = np.einsum("lj,lj->j", pp, a)
    other = col_sums - pp[i, :] * a[i, :]
    b = 2.0 * (1.0 - p) * other
    with np.errstate(divide="ignore", invalid="ignore"):
        coupling = rec[i, :] / pp[i, :] - pp[:, i]
    if mode == "relaxed":
        c = (1.0 - p * pp[i, :]) + p[i] * coupling
    elif mode == "finetune":
        b = b + 2.0 * p[i] * coupling * a[:, i]
        c = 1.0 - p * pp[i, :]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return b, c


def _update_row(
    i: int,
    weights: np.ndarray,
    model: NetworkModel,
    caps: np.ndarray,
    mode: str,
    *,
    bisection_tol: float,
    row_sum_tol: float,
) -> tuple[np.ndarray, int]:
    """Exact minimizer of row i's subproblem; returns (row, doublings)."""
    p = model.server_probs
    pp = model.peer_probs
    n = model.n
    row = np.zeros(n)
    if p[i] == 1.0:
        # A node the server always hears keeps its vector local: the
        # diagonal entry carries zero variance while any relayed mass
        # costs variance, so the identity row is optimal.
        row[i] = 1.0
        return row, 0

    masses = p * pp[i, :]
    perfect = masses == 1.0
    free = (masses > 0.0) & ~perfect
    doublings = 0
    try:
        if not np.any(perfect):
            b, c = _row_coefficients(i, weights, model, mode)
            res = bisect_lambda(
                masses[free],
                caps[i, free],
                b[free],
                c[free],
                1.0,
                bisection_tol=bisection_tol,
                row_sum_tol=row_sum_tol,
            )
            row[free] = res.alphas
            doublings = res.doublings
        else:
            # Entries with mass exactly 1 are deterministic relays: their
            # weight contributes no variance, so fill them greedily up to
            # their caps before involving the stochastic entries.
            cap_perfect = fsum(caps[i, k] for k in np.flatnonzero(perfect))
            if cap_perfect >= 1.0:
                row[perfect] = caps[i, perfect] / cap_perfect
            else:
                row[perfect] = caps[i, perfect]
                b, c = _row_coefficients(i, weights, model, mode)
                res = bisect_lambda(
                    masses[free],
                    caps[i, free],
                    b[free],
                    c[free],
                    1.0 - cap_perfect,
                    bisection_tol=bisection_tol,
                    row_sum_tol=row_sum_tol,
                )
                row[free] = res.alphas
                doublings = res.doublings
    except FeasibilityError as exc:
        raise FeasibilityError(
            f"row {i}: {exc}", row=i, deficit=exc.deficit
        ) from None
    return row, doublings


def relaxed_row_update(
    i: int,
    weights: np.ndarray,
    model: NetworkModel,
    caps: np.ndarray,
    *,
    bisection_tol: float = 1e-12,
    row_sum_tol: float = 1e-9,
) -> np.ndarray:
    """Row i's exact minimizer of the decoupled bound, other rows fixed."""
    row, _ = _update_row(
        i,
        np.asarray(weights, dtype=float),
        model,
        caps,
        "relaxed",
        bisection_tol=bisection_tol,
        row_sum_tol=row_sum_tol,
    )
    return row


def finetune_row_update(
    i: int,
    weights: np.ndarray,
    model: NetworkModel,
    caps: np.ndarray,
    *,
    bisection_tol: float = 1e-12,
    row_sum_tol: float = 1e-9,
) -> np.ndarray:
    """Row i's exact minimizer of the true variance, other rows fixed."""
    row, _ = _update_row(
        i,
        np.asarray(weights, dtype=float),
        model,
        caps,
        "finetune",
        bisection_tol=bisection_tol,
        row_sum_tol=row_sum_tol,
    )
    return row


def gauss_seidel_sweeps(
    weights: np.ndarray,
    model: NetworkModel,
    caps: np.ndarray,
    num_iters: int,
    mode: str,
    *,
    bisection_tol: float = 1e-12,
    row_sum_tol: float = 1e-9,
    objective_log: list[float] | None = None,
) -> tuple[np.ndarray, int]:
    """Run ``num_iters`` row updates cycling rows in order; returns the
    updated matrix and the total bracket doublings.

    Iteration l (1-based) updates row (l - 1) mod n on the current matrix,
    so updates within a pass see each other. When ``objective_log`` is
    given, the mode's own objective (decoupled bound for relaxed, true
    variance for fine-tune) is appended after every iteration; each row
    update is an exact minimization of that objective over its row, so the
    logged sequence is nonincreasing up to machine precision.
    """
    if num_iters < 0:
        raise ValueError(f"num_iters = {num_iters} must be >= 0")
    if mode not in ("relaxed", "finetune"):
        raise ValueError(f"unknown mode {mode!r}")
    a = np.asarray(weights, dtype=float).copy()
    n = model.n
    doublings = 0
    for it in range(1, num_iters + 1):
        i = (it - 1) % n
        row, dbl = _update_row(
            i,
            a,
            model,
            caps,
            mode,
            bisection_tol=bisection_tol,
            row_sum_tol=row_sum_tol,
        )
        a[i, :] = row
        doublings += dbl
        if objective_log is not None:
            if mode == "relaxed":
                objective_log.append(sigma_tv_sq_bar(model, a))
            else:
                objective_log.append(sigma_tv_sq(model, a))
    return a, doublings


def validate_solution(
    solution: WeightSolution, model: NetworkModel, spec: PrivacySpec
) -> list[str]:
    """Check the feasibility contract of a finished design point.

    Row sums within 1e-6 of 1, weights inside [0, cap + 1e-9], sigma at or
    above the threshold (1e-12 slack), and exact zeros where the traffic
    mass is zero.
    """
    out = []
    a = solution.weights
    n = model.n
    p = model.server_probs
    pp = model.peer_probs
    caps = weight_cap_matrix(spec, solution.sigma)
    thr = sigma_threshold(model, spec)
    if solution.sigma < thr - 1e-12:
        out.append(f"sigma = {solution.sigma} below threshold {thr}")
    for i in range(n):
        row_sum = fsum(p[j] * pp[i, j] * a[i, j] for j in range(n))
        if abs(row_sum - 1.0) > 1e-6:
            out.append(f"row {i} weighted sum {row_sum} deviates from 1")
        for j in range(n):
            if a[i, j] < 0.0:
                out.append(f"weights[{i},{j}] = {a[i, j]} negative")
            elif a[i, j] > caps[i, j] + 1e-9:
                out.append(
                    f"weights[{i},{j}] = {a[i, j]} exceeds cap {caps[i, j]}"
                )
            if p[j] * pp[i, j] == 0.0 and a[i, j] != 0.0:
                out.append(
                    f"weights[{i},{j}] = {a[i, j]} nonzero on a dead link"
                )
    return out


def optimize(
    model: NetworkModel,
    spec: PrivacySpec,
    config: OptimizerConfig | None = None,
    *,
    dim: int = 1,
) -> tuple[WeightSolution, OptimizeDiagnostics]:
    """Alternating minimization of the worst-case MSE bound.

    Starts from the cap-oblivious unbiased point A = diag(1/p_i) with the
    noise raised high enough to admit it (never below the threshold), then
    repeats: relaxed sweeps, fine-tune sweeps, noise update. The noise
    level is nonincreasing across outer rounds after initialization.

    ``dim`` only scales the reported privacy term in the objective trace;
    the minimizing weights and sigma do not depend on it.

    Returns the solution plus per-round diagnostics; raises
    :class:`FeasibilityError` when the budgets cannot support unbiasedness
    and ``RuntimeError`` if the finished solution fails its feasibility
    contract (which would indicate a solver defect, not bad input).
    """
    cfg = config if config is not None else OptimizerConfig()
    problems = cfg.validate()
    if problems:
        raise ValueError("invalid optimizer config: " + "; ".join(problems))
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid network model: " + "; ".join(violations))
    violations = validate_spec(spec, model)
    if violations:
        raise ValueError("invalid privacy spec: " + "; ".join(violations))

    n = model.n
    relaxed_iters = cfg.relaxed_iters if cfg.relaxed_iters is not None else 50 * n
    finetune_iters = cfg.finetune_iters if cfg.finetune_iters is not None else 50 * n

    thr = sigma_threshold(model, spec)
    a = np.diag(1.0 / model.server_probs)
    # Raising the initial noise to admit diag(1/p) keeps every later row
    # update (including the hard-coded identity rows of always-connected
    # nodes) inside its caps from the first sweep on.
    sigma = update_sigma(a, spec, thr)

    def objective(mat: np.ndarray, s: float) -> float:
        return spec.r_bound**2 * sigma_tv_sq(model, mat) + sigma_pr_sq(
            model, s, dim
        )

    diag = OptimizeDiagnostics(sigma_threshold=thr)
    diag.objective_trace.append(objective(a, sigma))
    diag.sigma_trace.append(sigma)

    for _ in range(cfg.outer_rounds):
        caps = weight_cap_matrix(spec, sigma)
        a, dbl1 = gauss_seidel_sweeps(
            a,
            model,
            caps,
            relaxed_iters,
            "relaxed",
            bisection_tol=cfg.bisection_tol,
            row_sum_tol=cfg.row_sum_tol,
        )
        a, dbl2 = gauss_seidel_sweeps(
            a,
            model,
            caps,
            finetune_iters,
            "finetune",
            bisection_tol=cfg.bisection_tol,
            row_sum_tol=cfg.row_sum_tol,
        )
        sigma = update_sigma(a, spec, thr)
        diag.bracket_doublings += dbl1 + dbl2
        diag.objective_trace.append(objective(a, sigma))
        diag.sigma_trace.append(sigma)

    solution = WeightSolution(weights=a, sigma=sigma)
    problems = validate_solution(solution, model, spec)
    if problems:
        raise RuntimeError(
            "optimizer produced an infeasible solution: " + "; ".join(problems)
        )
    return solution, diag
