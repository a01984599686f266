"""Matplotlib rendering of experiment reports.

Every renderer takes already-computed rows or payloads, writes one PNG,
and returns the path; nothing here recomputes results. The Agg backend is
forced so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_trust_sweep",
    "render_good_nodes_sweep",
    "render_optimize",
    "render_simulate",
]

_DPI = 150


def render_trust_sweep(rows: list[dict], path) -> str:
    feasible = [r for r in rows if r.get("feasible")]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if feasible:
        ks = [r["k_trusted"] for r in feasible]
        obj = [r["objective"] for r in feasible]
        ax.semilogy(ks, obj, marker="o")
    else:
        ax.text(0.5, 0.5, "no feasible points", ha="center", va="center")
    skipped = [r["k_trusted"] for r in rows if not r.get("feasible")]
    title = "Optimized MSE bound vs trusted neighbors"
    if skipped:
        title += f" (infeasible: {skipped})"
    ax.set_xlabel("trusted neighbors per node")
    ax.set_ylabel("worst-case MSE bound")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def render_good_nodes_sweep(rows: list[dict], path) -> str:
    done = [r for r in rows if r.get("mse_pricer") is not None]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if done:
        g = [r["num_good"] for r in done]
        ax.errorbar(
            g,
            [r["mse_pricer"] for r in done],
            yerr=[r["mse_pricer_stderr"] for r in done],
            marker="o",
            capsize=3,
            label="private relaying",
        )
        ax.errorbar(
            g,
            [r["mse_naive"] for r in done],
            yerr=[r["mse_naive_stderr"] for r in done],
            marker="s",
            capsize=3,
            label="naive (no relaying)",
        )
        ax.set_yscale("log")
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no completed points", ha="center", va="center")
    ax.set_xlabel("nodes with a reliable uplink")
    ax.set_ylabel("Monte-Carlo MSE")
    ax.set_title("Estimation error vs number of well-connected nodes")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def render_optimize(payload: dict, path) -> str:
    """Two panels: objective trace across outer rounds, final weights."""
    weights = np.asarray(payload["weights"], dtype=float)
    trace = payload["objective_trace"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.0, 4.0))
    ax1.semilogy(range(len(trace)), trace, marker="o")
    ax1.set_xlabel("outer round")
    ax1.set_ylabel("worst-case MSE bound")
    ax1.set_title(f"Objective trace (sigma = {payload['sigma']:.4g})")
    ax1.grid(True, which="both", alpha=0.3)
    im = ax2.imshow(weights, cmap="viridis")
    ax2.set_xlabel("receiver j")
    ax2.set_ylabel("sender i")
    ax2.set_title("Optimized weights")
    fig.colorbar(im, ax=ax2, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def render_simulate(row: dict, path) -> str:
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    labels = ["private relaying", "naive"]
    values = [row["mse_pricer"], row["mse_naive"]]
    errors = [row["mse_pricer_stderr"], row["mse_naive_stderr"]]
    ax.bar(labels, values, yerr=errors, capsize=5, color=["#3b7dd8", "#d87a3b"])
    ax.set_ylabel("Monte-Carlo MSE")
    ax.set_title(f"Estimation error ({row['trials']} trials)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)
