"""Privacy-preserving collaborative relaying for distributed mean estimation.

Nodes with unreliable server uplinks relay noisy weighted shares of their
vectors to neighbors before a single aggregation round; the package
provides the protocol simulator, the closed-form error accounting, the
privacy-constrained weight/noise optimizer, brute-force oracles that pin
the formulas down on small instances, and the experiment CLI.
"""

from .analysis import (
    MseBreakdown,
    mse_upper_bound,
    sigma_pr_sq,
    sigma_tv_sq,
    sigma_tv_sq_bar,
    unbiasedness_residual,
)
from .experiments import (
    ExperimentConfig,
    SweepResult,
    emit_results,
    generate_heavy_tailed_data,
    run_good_nodes_sweep,
    run_trust_sweep,
)
from .network import (
    LinkRealization,
    NetworkModel,
    erdos_renyi_model,
    sample_links,
    validate_model,
)
from .optimizer import (
    BisectionResult,
    FeasibilityError,
    OptimizeDiagnostics,
    OptimizerConfig,
    WeightSolution,
    bisect_lambda,
    finetune_row_update,
    gauss_seidel_sweeps,
    optimize,
    relaxed_row_update,
    sigma_threshold,
    update_sigma,
    validate_solution,
)
from .oracle import ExactMoments, GridSearchResult, exact_mse, grid_search
from .privacy import (
    DpGuarantee,
    PrivacySpec,
    achieved_epsilon,
    gauss_mechanism_factor,
    l2_sensitivity,
    sample_noise,
    validate_spec,
    weight_cap,
    weight_cap_matrix,
)
from .protocol import (
    DataSet,
    MonteCarloResult,
    TrialResult,
    naive_estimate,
    run_monte_carlo,
    stage1_local_aggregate,
    stage2_global_aggregate,
    validate_data,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # network
    "NetworkModel",
    "LinkRealization",
    "validate_model",
    "sample_links",
    "erdos_renyi_model",
    # privacy
    "PrivacySpec",
    "DpGuarantee",
    "achieved_epsilon",
    "weight_cap",
    "weight_cap_matrix",
    "sample_noise",
    "l2_sensitivity",
    "gauss_mechanism_factor",
    "validate_spec",
    # protocol
    "DataSet",
    "TrialResult",
    "MonteCarloResult",
    "validate_data",
    "stage1_local_aggregate",
    "stage2_global_aggregate",
    "naive_estimate",
    "run_monte_carlo",
    # analysis
    "MseBreakdown",
    "unbiasedness_residual",
    "sigma_tv_sq",
    "sigma_tv_sq_bar",
    "sigma_pr_sq",
    "mse_upper_bound",
    # optimizer
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
    # oracle
    "ExactMoments",
    "exact_mse",
    "GridSearchResult",
    "grid_search",
    # experiments
    "ExperimentConfig",
    "SweepResult",
    "run_trust_sweep",
    "run_good_nodes_sweep",
    "generate_heavy_tailed_data",
    "emit_results",
]
