"""Rollouts, contact-quality metrics and reports."""
from pressbench.evaluation.metrics import (
    CredibleInterval,
    beta_cdf,
    beta_credible_interval,
    beta_quantile,
    peak_fz,
    rank_by_distance,
    wasserstein1,
)
from pressbench.evaluation.report import (
    PLOTDATA_NAME,
    REPORT_NAME,
    EvalReport,
    ExpertReference,
    VariantSummary,
    load_report,
    make_report,
    plot_data,
)
from pressbench.evaluation.rollouts import (
    Controller,
    PolicyController,
    RandomController,
    RolloutResult,
    run_rollout,
    run_rollouts,
)

__all__ = [
    "PLOTDATA_NAME",
    "REPORT_NAME",
    "Controller",
    "CredibleInterval",
    "EvalReport",
    "ExpertReference",
    "PolicyController",
    "RandomController",
    "RolloutResult",
    "VariantSummary",
    "beta_cdf",
    "beta_credible_interval",
    "beta_quantile",
    "load_report",
    "make_report",
    "peak_fz",
    "plot_data",
    "rank_by_distance",
    "run_rollout",
    "run_rollouts",
    "wasserstein1",
]
