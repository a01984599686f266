"""Experiment configurations, sweep runners, and result emission.

Two canonical studies ship with the package:

* trust sweep: on a shared network, grow the number k of ring neighbors
  each node grants its generous privacy budget and record how far the
  optimized worst-case MSE bound drops. Columns: k_trusted, objective,
  sigma, feasible.
* good-nodes sweep: vary how many nodes have a reliable server uplink in
  a ring topology of trusted links, optimize the design for each count,
  and compare Monte-Carlo MSE of the relayed estimator against the naive
  one. Columns: num_good, mse_pricer, mse_pricer_stderr, mse_naive,
  mse_naive_stderr, trials, seed.

Runners never abort a whole sweep on one infeasible point: the row is
emitted with empty values and the error is collected in the summary.
All emitted numbers are plain Python floats written with shortest
round-trip formatting, so reruns produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .network import NetworkModel, validate_model
from .optimizer import (
    FeasibilityError,
    OptimizerConfig,
    WeightSolution,
    optimize,
    validate_solution,
)
from .privacy import PrivacySpec
from .protocol import DataSet, run_monte_carlo

__all__ = [
    "ExperimentConfig",
    "SweepResult",
    "TRUST_SWEEP_COLUMNS",
    "GOOD_NODES_COLUMNS",
    "ring_neighbors",
    "trust_epsilon_matrix",
    "build_model",
    "build_privacy_spec",
    "generate_heavy_tailed_data",
    "run_trust_sweep",
    "run_good_nodes_sweep",
    "emit_results",
]

TRUST_SWEEP_COLUMNS = ["k_trusted", "objective", "sigma", "feasible"]
GOOD_NODES_COLUMNS = [
    "num_good",
    "mse_pricer",
    "mse_pricer_stderr",
    "mse_naive",
    "mse_naive_stderr",
    "trials",
    "seed",
]

_KINDS = ("trust_sweep", "good_nodes_sweep", "custom")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment description (see README for the JSON layout).

    ``collab_prob`` is the peer link probability: every off-diagonal link
    in the trust sweep and custom kinds, and the trusted-pair links in the
    good-nodes sweep (untrusted pairs get probability 0 there).
    ``reciprocity`` is either the policy string "independence" or an
    explicit matrix.
    """

    kind: str
    n: int
    server_probs: list[float]
    collab_prob: float = 0.8
    peer_probs: list[list[float]] | None = None
    reciprocity: str | list[list[float]] = "independence"
    eps_high: float = 1000.0
    eps_low: float = 0.1
    delta: float = 1e-3
    eps_matrix: list[list[float]] | None = None
    r_bound: float = 1.0
    dim: int = 32
    trials: int = 50
    master_seed: int = 20260816
    trusted_counts: list[int] | None = None
    good_counts: list[int] | None = None
    p_good: float = 0.9
    p_bad: float = 0.2
    trusted_neighbors: int = 6
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        known_top = {"kind", "trials", "master_seed", "network", "privacy", "data", "optimizer", "sweep"}
        unknown = set(raw) - known_top
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")

        def section(name: str, allowed: set[str]) -> dict:
            sec = raw.get(name) or {}
            if not isinstance(sec, dict):
                raise ValueError(f"config section {name!r} must be an object")
            bad = set(sec) - allowed
            if bad:
                raise ValueError(f"unknown keys in config section {name!r}: {sorted(bad)}")
            return sec

        net = section("network", {"n", "server_probs", "collab_prob", "peer_probs", "reciprocity"})
        priv = section("privacy", {"eps_high", "eps_low", "delta", "eps_matrix", "r_bound"})
        data = section("data", {"dim"})
        opt = section(
            "optimizer",
            {"outer_rounds", "relaxed_iters", "finetune_iters", "bisection_tol", "row_sum_tol"},
        )
        sweep = section(
            "sweep",
            {"trusted_counts", "good_counts", "p_good", "p_bad", "trusted_neighbors"},
        )
        if "kind" not in raw:
            raise ValueError("config is missing 'kind'")
        if "n" not in net or "server_probs" not in net:
            raise ValueError("config network section needs 'n' and 'server_probs'")

        kwargs: dict = {
            "kind": raw["kind"],
            "n": int(net["n"]),
            "server_probs": [float(v) for v in net["server_probs"]],
        }
        if "trials" in raw:
            kwargs["trials"] = int(raw["trials"])
        if "master_seed" in raw:
            kwargs["master_seed"] = int(raw["master_seed"])
        if "collab_prob" in net:
            kwargs["collab_prob"] = float(net["collab_prob"])
        if net.get("peer_probs") is not None:
            kwargs["peer_probs"] = [[float(v) for v in row] for row in net["peer_probs"]]
        if "reciprocity" in net:
            rec = net["reciprocity"]
            kwargs["reciprocity"] = (
                rec if isinstance(rec, str) else [[float(v) for v in row] for row in rec]
            )
        for key in ("eps_high", "eps_low", "delta", "r_bound"):
            if key in priv:
                kwargs[key] = float(priv[key])
        if priv.get("eps_matrix") is not None:
            kwargs["eps_matrix"] = [[float(v) for v in row] for row in priv["eps_matrix"]]
        if "dim" in data:
            kwargs["dim"] = int(data["dim"])
        if sweep.get("trusted_counts") is not None:
            kwargs["trusted_counts"] = [int(v) for v in sweep["trusted_counts"]]
        if sweep.get("good_counts") is not None:
            kwargs["good_counts"] = [int(v) for v in sweep["good_counts"]]
        for key in ("p_good", "p_bad"):
            if key in sweep:
                kwargs[key] = float(sweep[key])
        if "trusted_neighbors" in sweep:
            kwargs["trusted_neighbors"] = int(sweep["trusted_neighbors"])
        opt_kwargs = {k: opt[k] for k in opt}
        kwargs["optimizer"] = OptimizerConfig(**opt_kwargs)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "network": {
                "n": self.n,
                "server_probs": list(self.server_probs),
                "collab_prob": self.collab_prob,
                "peer_probs": self.peer_probs,
                "reciprocity": self.reciprocity,
            },
            "privacy": {
                "eps_high": self.eps_high,
                "eps_low": self.eps_low,
                "delta": self.delta,
                "eps_matrix": self.eps_matrix,
                "r_bound": self.r_bound,
            },
            "data": {"dim": self.dim},
            "optimizer": {
                "outer_rounds": self.optimizer.outer_rounds,
                "relaxed_iters": self.optimizer.relaxed_iters,
                "finetune_iters": self.optimizer.finetune_iters,
                "bisection_tol": self.optimizer.bisection_tol,
                "row_sum_tol": self.optimizer.row_sum_tol,
            },
            "sweep": {
                "trusted_counts": self.trusted_counts,
                "good_counts": self.good_counts,
                "p_good": self.p_good,
                "p_bad": self.p_bad,
                "trusted_neighbors": self.trusted_neighbors,
            },
        }

    def validate(self) -> list[str]:
        out = []
        if self.kind not in _KINDS:
            out.append(f"kind = {self.kind!r} must be one of {_KINDS}")
        if self.n < 1:
            out.append(f"n = {self.n} must be >= 1")
        if len(self.server_probs) != self.n:
            out.append(
                f"server_probs has {len(self.server_probs)} entries, expected {self.n}"
            )
        if not 0.0 <= self.collab_prob <= 1.0:
            out.append(f"collab_prob = {self.collab_prob} outside [0, 1]")
        for name, v in (("eps_high", self.eps_high), ("eps_low", self.eps_low)):
            if not v > 0.0:
                out.append(f"{name} = {v} must be > 0")
        if not 0.0 < self.delta <= 1.0:
            out.append(f"delta = {self.delta} outside (0, 1]")
        if not self.r_bound > 0.0:
            out.append(f"r_bound = {self.r_bound} must be > 0")
        if self.dim < 1:
            out.append(f"dim = {self.dim} must be >= 1")
        if self.trials < 1:
            out.append(f"trials = {self.trials} must be >= 1")
        if self.trusted_counts is not None:
            for k in self.trusted_counts:
                if not 0 <= k <= self.n - 1:
                    out.append(f"trusted count {k} outside [0, {self.n - 1}]")
        if self.good_counts is not None:
            for g in self.good_counts:
                if not 0 <= g <= self.n:
                    out.append(f"good count {g} outside [0, {self.n}]")
        # only the good-nodes sweep consumes this field; the default of 6
        # must not invalidate small custom or trust-sweep configs
        if self.kind == "good_nodes_sweep" and not (
            0 <= self.trusted_neighbors <= max(self.n - 1, 0)
        ):
            out.append(
                f"trusted_neighbors = {self.trusted_neighbors} outside [0, {self.n - 1}]"
            )
        for name, v in (("p_good", self.p_good), ("p_bad", self.p_bad)):
            if not 0.0 < v <= 1.0:
                out.append(f"{name} = {v} outside (0, 1]")
        out.extend(self.optimizer.validate())
        return out


@dataclass
class SweepResult:
    """Rows ready for emission plus anything a caller may want to inspect."""

    columns: list[str]
    rows: list[dict]
    errors: list[str]
    solutions: dict[int, WeightSolution] = field(default_factory=dict)


def ring_neighbors(i: int, k: int, n: int) -> list[int]:
    """The k nearest ring neighbors of node i: ceil(k/2) clockwise,
    floor(k/2) counterclockwise. Symmetric as a relation for even k."""
    if not 0 <= k <= n - 1:
        raise ValueError(f"k = {k} outside [0, {n - 1}]")
    up = (k + 1) // 2
    down = k // 2
    out = [(i + s) % n for s in range(1, up + 1)]
    out += [(i - s) % n for s in range(1, down + 1)]
    return sorted(out)


def trust_epsilon_matrix(
    n: int, k: int, eps_high: float, eps_low: float
) -> np.ndarray:
    """Budget matrix where every node grants ``eps_high`` to itself and to
    its k ring neighbors, ``eps_low`` to everyone else."""
    eps = np.full((n, n), float(eps_low))
    np.fill_diagonal(eps, float(eps_high))
    for i in range(n):
        for j in ring_neighbors(i, k, n):
            eps[i, j] = float(eps_high)
    return eps


def _reciprocity_matrix(cfg: ExperimentConfig, peer_probs: np.ndarray) -> np.ndarray:
    if isinstance(cfg.reciprocity, str):
        if cfg.reciprocity != "independence":
            raise ValueError(
                f"unknown reciprocity policy {cfg.reciprocity!r}; use "
                f"'independence' or an explicit matrix"
            )
        rec = peer_probs * peer_probs.T
        np.fill_diagonal(rec, 1.0)
        return rec
    rec = np.asarray(cfg.reciprocity, dtype=float)
    return rec


def build_model(cfg: ExperimentConfig) -> NetworkModel:
    """Network for the trust sweep and custom kinds (shared across points)."""
    p = np.asarray(cfg.server_probs, dtype=float)
    if cfg.peer_probs is not None:
        pp = np.asarray(cfg.peer_probs, dtype=float)
    else:
        pp = np.full((cfg.n, cfg.n), float(cfg.collab_prob))
        np.fill_diagonal(pp, 1.0)
    model = NetworkModel(
        server_probs=p, peer_probs=pp, reciprocity=_reciprocity_matrix(cfg, pp)
    )
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid network model: " + "; ".join(violations))
    return model


def build_privacy_spec(cfg: ExperimentConfig, eps: np.ndarray | None = None) -> PrivacySpec:
    """Privacy spec from an explicit budget matrix, the config's matrix, or
    a uniform ``eps_high`` fallback (custom kind without a matrix)."""
    if eps is None:
        if cfg.eps_matrix is not None:
            eps = np.asarray(cfg.eps_matrix, dtype=float)
        else:
            eps = np.full((cfg.n, cfg.n), float(cfg.eps_high))
    delta = np.full((cfg.n, cfg.n), float(cfg.delta))
    return PrivacySpec(r_bound=cfg.r_bound, eps=eps, delta=delta)


def generate_heavy_tailed_data(
    n: int, d: int, r_bound: float, rng: np.random.Generator
) -> DataSet:
    """Cube the coordinates of standard Gaussian vectors (sign-preserving,
    so the tails get heavy) and rescale every vector to norm ``r_bound``."""
    if d < 1:
        raise ValueError(f"d = {d} must be >= 1")
    if not r_bound > 0.0:
        raise ValueError(f"r_bound = {r_bound} must be > 0")
    z = rng.standard_normal((n, d))
    y = z**3
    norms = np.linalg.norm(y, axis=1)
    if np.any(norms == 0.0):
        raise RuntimeError("degenerate draw: a data vector has zero norm")
    return DataSet(x=y * (r_bound / norms)[:, None])


def _point_seeds(master_seed: int, point: int) -> tuple[int, int]:
    """Derive (data seed, trial seed) for one sweep point, stable in the
    master seed and the point label, independent of the sweep order."""
    state = np.random.SeedSequence([master_seed, point]).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def run_trust_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Optimize the design for each trusted-neighbor count on one network.

    The objective column is the optimized worst-case bound
    ``r_bound^2 * sigma_tv_sq + sigma_pr_sq`` at the config's data
    dimension. Infeasible points yield empty cells and an error entry.
    """
    if cfg.kind != "trust_sweep":
        raise ValueError(f"config kind {cfg.kind!r} is not 'trust_sweep'")
    problems = cfg.validate()
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    model = build_model(cfg)
    ks = cfg.trusted_counts if cfg.trusted_counts is not None else list(range(cfg.n))
    result = SweepResult(columns=list(TRUST_SWEEP_COLUMNS), rows=[], errors=[])
    for k in ks:
        eps = trust_epsilon_matrix(cfg.n, k, cfg.eps_high, cfg.eps_low)
        spec = build_privacy_spec(cfg, eps)
        try:
            solution, diag = optimize(model, spec, cfg.optimizer, dim=cfg.dim)
            leftover = validate_solution(solution, model, spec)
            if leftover:
                raise FeasibilityError(
                    "solution failed validation: " + "; ".join(leftover)
                )
            result.rows.append(
                {
                    "k_trusted": int(k),
                    "objective": float(diag.objective_trace[-1]),
                    "sigma": float(solution.sigma),
                    "feasible": True,
                }
            )
            result.solutions[int(k)] = solution
        except FeasibilityError as exc:
            result.rows.append(
                {"k_trusted": int(k), "objective": None, "sigma": None, "feasible": False}
            )
            result.errors.append(f"k_trusted={k}: {exc}")
    return result


def good_nodes_point(cfg: ExperimentConfig, num_good: int) -> tuple[NetworkModel, PrivacySpec]:
    """Model and budgets for one good-nodes count: ring of trusted pairs
    with link probability ``collab_prob`` and budget ``eps_high``; all
    other pairs are disconnected."""
    n = cfg.n
    p = np.array([cfg.p_good] * num_good + [cfg.p_bad] * (n - num_good))
    pp = np.zeros((n, n))
    np.fill_diagonal(pp, 1.0)
    eps = np.full((n, n), float(cfg.eps_low))
    np.fill_diagonal(eps, float(cfg.eps_high))
    for i in range(n):
        for j in ring_neighbors(i, cfg.trusted_neighbors, n):
            pp[i, j] = float(cfg.collab_prob)
            eps[i, j] = float(cfg.eps_high)
    rec = pp * pp.T
    np.fill_diagonal(rec, 1.0)
    model = NetworkModel(server_probs=p, peer_probs=pp, reciprocity=rec)
    spec = PrivacySpec(
        r_bound=cfg.r_bound, eps=eps, delta=np.full((n, n), float(cfg.delta))
    )
    return model, spec


def run_good_nodes_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Monte-Carlo comparison of the relayed and naive estimators as the
    number of well-connected nodes varies. Data is redrawn per point from
    a seed derived from (master_seed, num_good)."""
    if cfg.kind != "good_nodes_sweep":
        raise ValueError(f"config kind {cfg.kind!r} is not 'good_nodes_sweep'")
    problems = cfg.validate()
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    counts = cfg.good_counts if cfg.good_counts is not None else list(range(cfg.n + 1))
    result = SweepResult(columns=list(GOOD_NODES_COLUMNS), rows=[], errors=[])
    for g in counts:
        model, spec = good_nodes_point(cfg, g)
        data_seed, trial_seed = _point_seeds(cfg.master_seed, g)
        try:
            solution, _ = optimize(model, spec, cfg.optimizer, dim=cfg.dim)
            leftover = validate_solution(solution, model, spec)
            if leftover:
                raise FeasibilityError(
                    "solution failed validation: " + "; ".join(leftover)
                )
            data = generate_heavy_tailed_data(
                cfg.n, cfg.dim, cfg.r_bound, np.random.default_rng(data_seed)
            )
            mc = run_monte_carlo(
                model,
                data,
                solution.weights,
                solution.sigma,
                cfg.trials,
                trial_seed,
                r_bound=cfg.r_bound,
            )
            result.rows.append(
                {
                    "num_good": int(g),
                    "mse_pricer": float(mc.mse),
                    "mse_pricer_stderr": float(mc.mse_stderr),
                    "mse_naive": float(mc.mse_naive),
                    "mse_naive_stderr": float(mc.mse_naive_stderr),
                    "trials": int(cfg.trials),
                    "seed": int(cfg.master_seed),
                }
            )
            result.solutions[int(g)] = solution
        except FeasibilityError as exc:
            result.rows.append(
                {
                    "num_good": int(g),
                    "mse_pricer": None,
                    "mse_pricer_stderr": None,
                    "mse_naive": None,
                    "mse_naive_stderr": None,
                    "trials": int(cfg.trials),
                    "seed": int(cfg.master_seed),
                }
            )
            result.errors.append(f"num_good={g}: {exc}")
    return result


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_results(
    rows: list[dict],
    columns: list[str],
    summary: dict,
    csv_path,
    json_path,
) -> None:
    """Write the delimited table and the JSON summary.

    Floats go through shortest round-trip repr and the JSON is emitted
    with sorted keys, so identical inputs produce byte-identical files.
    """
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(col)) for col in columns])
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def override_run_params(
    cfg: ExperimentConfig, seed: int | None, trials: int | None
) -> ExperimentConfig:
    """Apply CLI-level overrides without touching anything else."""
    updates = {}
    if seed is not None:
        updates["master_seed"] = int(seed)
    if trials is not None:
        updates["trials"] = int(trials)
    return replace(cfg, **updates) if updates else cfg
