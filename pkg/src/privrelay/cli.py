"""Command-line entry point.

Four subcommands, all driven by a JSON config file:

* ``trust-sweep``: optimize the design per trusted-neighbor count, write
  trust_sweep.csv / trust_sweep_summary.json / trust_sweep.png.
* ``good-nodes-sweep``: optimize + Monte-Carlo per good-node count, write
  good_nodes_sweep.csv / good_nodes_sweep_summary.json /
  good_nodes_sweep.png.
* ``optimize``: solve one custom instance, write weight_solution.json and
  optimize.png.
* ``simulate``: Monte-Carlo one custom instance (reusing a saved solution
  or optimizing on the spot), write simulate.csv /
  simulate_summary.json / simulate.png.

Exit codes: 0 success, 1 a sweep point or solve failed, 2 bad usage or
config. Figures can be suppressed with --no-figures; the CSV/JSON outputs
are byte-deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import figures
from .experiments import (
    GOOD_NODES_COLUMNS,
    ExperimentConfig,
    build_model,
    build_privacy_spec,
    emit_results,
    generate_heavy_tailed_data,
    override_run_params,
    run_good_nodes_sweep,
    run_trust_sweep,
)
from .optimizer import FeasibilityError, WeightSolution, optimize, validate_solution
from .protocol import run_monte_carlo

SIMULATE_COLUMNS = [
    "mse_pricer",
    "mse_pricer_stderr",
    "mse_naive",
    "mse_naive_stderr",
    "trials",
    "seed",
]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privrelay",
        description="Privacy-preserving collaborative relaying: design and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument(
            "--trials", type=int, default=None, help="override Monte-Carlo trials"
        )
        p.add_argument(
            "--no-figures", action="store_true", help="skip PNG rendering"
        )

    common(sub.add_parser("trust-sweep", help="objective vs trusted neighbors"))
    common(sub.add_parser("good-nodes-sweep", help="MSE vs well-connected nodes"))
    common(sub.add_parser("optimize", help="solve one custom instance"))
    sim = sub.add_parser("simulate", help="Monte-Carlo one custom instance")
    common(sim)
    sim.add_argument(
        "--solution",
        default=None,
        help="weight_solution.json from a previous optimize run (else optimize now)",
    )
    return parser


def _load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        raw = json.load(fh)
    return ExperimentConfig.from_dict(raw)


def _run_trust_sweep(cfg: ExperimentConfig, out: Path, want_figures: bool) -> int:
    result = run_trust_sweep(cfg)
    summary = {
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "columns": result.columns,
        "rows": result.rows,
        "errors": result.errors,
    }
    emit_results(
        result.rows,
        result.columns,
        summary,
        out / "trust_sweep.csv",
        out / "trust_sweep_summary.json",
    )
    if want_figures:
        figures.render_trust_sweep(result.rows, out / "trust_sweep.png")
    for err in result.errors:
        print(f"warning: {err}", file=sys.stderr)
    return 1 if result.errors else 0


def _run_good_nodes_sweep(cfg: ExperimentConfig, out: Path, want_figures: bool) -> int:
    result = run_good_nodes_sweep(cfg)
    summary = {
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "columns": result.columns,
        "rows": result.rows,
        "errors": result.errors,
    }
    emit_results(
        result.rows,
        result.columns,
        summary,
        out / "good_nodes_sweep.csv",
        out / "good_nodes_sweep_summary.json",
    )
    if want_figures:
        figures.render_good_nodes_sweep(result.rows, out / "good_nodes_sweep.png")
    for err in result.errors:
        print(f"warning: {err}", file=sys.stderr)
    return 1 if result.errors else 0


def _require_custom(cfg: ExperimentConfig, command: str) -> None:
    if cfg.kind != "custom":
        raise ValueError(
            f"the {command} subcommand needs a kind='custom' config "
            f"(got {cfg.kind!r}); sweep configs describe families, not instances"
        )


def _solve_custom(cfg: ExperimentConfig):
    problems = cfg.validate()
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    model = build_model(cfg)
    spec = build_privacy_spec(cfg)
    solution, diag = optimize(model, spec, cfg.optimizer, dim=cfg.dim)
    leftover = validate_solution(solution, model, spec)
    if leftover:
        raise FeasibilityError("solution failed validation: " + "; ".join(leftover))
    return model, spec, solution, diag


def _run_optimize(cfg: ExperimentConfig, out: Path, want_figures: bool) -> int:
    _require_custom(cfg, "optimize")
    model, _, solution, diag = _solve_custom(cfg)
    payload = {
        "config": cfg.to_dict(),
        "weights": [[float(v) for v in row] for row in solution.weights],
        "sigma": float(solution.sigma),
        "sigma_threshold": float(diag.sigma_threshold),
        "objective_trace": [float(v) for v in diag.objective_trace],
        "sigma_trace": [float(v) for v in diag.sigma_trace],
        "bracket_doublings": int(diag.bracket_doublings),
    }
    with open(out / "weight_solution.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if want_figures:
        figures.render_optimize(payload, out / "optimize.png")
    print(
        f"optimized: objective {payload['objective_trace'][-1]:.6g}, "
        f"sigma {payload['sigma']:.6g} (threshold {payload['sigma_threshold']:.6g})"
    )
    return 0


def _run_simulate(
    cfg: ExperimentConfig, out: Path, want_figures: bool, solution_path: str | None
) -> int:
    _require_custom(cfg, "simulate")
    problems = cfg.validate()
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    model = build_model(cfg)
    if solution_path is not None:
        with open(solution_path) as fh:
            stored = json.load(fh)
        solution = WeightSolution(
            weights=np.asarray(stored["weights"], dtype=float),
            sigma=float(stored["sigma"]),
        )
        spec = build_privacy_spec(cfg)
        leftover = validate_solution(solution, model, spec)
        if leftover:
            raise FeasibilityError(
                "stored solution fails validation for this config: "
                + "; ".join(leftover)
            )
    else:
        _, _, solution, _ = _solve_custom(cfg)

    data_rng = np.random.default_rng([cfg.master_seed, 0])
    data = generate_heavy_tailed_data(cfg.n, cfg.dim, cfg.r_bound, data_rng)
    mc = run_monte_carlo(
        model,
        data,
        solution.weights,
        solution.sigma,
        cfg.trials,
        cfg.master_seed,
        r_bound=cfg.r_bound,
    )
    row = {
        "mse_pricer": float(mc.mse),
        "mse_pricer_stderr": float(mc.mse_stderr),
        "mse_naive": float(mc.mse_naive),
        "mse_naive_stderr": float(mc.mse_naive_stderr),
        "trials": int(cfg.trials),
        "seed": int(cfg.master_seed),
    }
    summary = {
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "columns": SIMULATE_COLUMNS,
        "rows": [row],
        "errors": [],
        "sigma": float(solution.sigma),
    }
    emit_results(
        [row],
        SIMULATE_COLUMNS,
        summary,
        out / "simulate.csv",
        out / "simulate_summary.json",
    )
    if want_figures:
        figures.render_simulate(row, out / "simulate.png")
    print(
        f"simulated {cfg.trials} trials: relayed MSE {row['mse_pricer']:.6g}, "
        f"naive MSE {row['mse_naive']:.6g}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        cfg = override_run_params(cfg, args.seed, args.trials)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: could not load config: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    want_figures = not args.no_figures

    try:
        if args.command == "trust-sweep":
            return _run_trust_sweep(cfg, out, want_figures)
        if args.command == "good-nodes-sweep":
            return _run_good_nodes_sweep(cfg, out, want_figures)
        if args.command == "optimize":
            return _run_optimize(cfg, out, want_figures)
        if args.command == "simulate":
            return _run_simulate(cfg, out, want_figures, args.solution)
    except FeasibilityError as exc:
        print(f"error: infeasible design problem: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
