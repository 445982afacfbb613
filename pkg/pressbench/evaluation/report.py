"""Evaluation report: success intervals, peak-force distributions, W1 ranking."""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from pressbench.config import SCHEMA_VERSION, EvaluationConfig
from pressbench.errors import ConfigurationError
from pressbench.evaluation.metrics import CredibleInterval, beta_credible_interval, rank_by_distance, wasserstein1
from pressbench.evaluation.rollouts import RolloutResult

logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"
PLOTDATA_NAME = "plotdata.json"


class VariantSummary(BaseModel):
    name: str
    trials: int
    successes: int
    success_rate: float
    credible_interval: CredibleInterval
    seeds: List[int]
    peak_fz: List[float]
    peak_fz_median: Optional[float] = None
    w1_samples: List[float] = Field(default_factory=list)
    w1: Optional[float] = None


class ExpertReference(BaseModel):
    peak_fz: List[float]
    peak_fz_median: float
    w1_samples: List[float] = Field(default_factory=list)


class EvalReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    variants: List[VariantSummary]
    expert: ExpertReference
    ranking: List[str]
    metadata: Dict[str, Any] = Field(default_factory=dict)

    def variant(self, name: str) -> VariantSummary:
        return next(v for v in self.variants if v.name == name)


def _w1_samples(results: Sequence[RolloutResult], mode: str, substeps: int) -> List[float]:
    successes = [r for r in results if r.success]
    if mode == "trace":
        return [float(x) for r in successes for x in r.step_peaks(substeps)]
    return [float(r.peak_fz) for r in successes]


def summarize(
    name: str,
    results: Sequence[RolloutResult],
    expert_samples: Sequence[float],
    cfg: EvaluationConfig,
    substeps: int = 100,
) -> VariantSummary:
    """Success interval, peak forces and W1 to the expert for one controller."""
    trials = len(results)
    successes = sum(r.success for r in results)
    peaks = [float(r.peak_fz) for r in results if r.success]
    samples = _w1_samples(results, cfg.w1_mode, substeps)
    return VariantSummary(
        name=name,
        trials=trials,
        successes=successes,
        success_rate=successes / trials if trials else 0.0,
        credible_interval=beta_credible_interval(successes, trials, cfg.credible_level),
        seeds=[r.seed for r in results],
        peak_fz=peaks,
        peak_fz_median=float(np.median(peaks)) if peaks else None,
        w1_samples=samples if cfg.w1_mode == "trace" else [],
        w1=wasserstein1(samples, expert_samples) if samples else None,
    )


def histogram(samples: Sequence[float], edges: np.ndarray) -> List[int]:
    return np.histogram(np.asarray(samples, dtype=np.float64), bins=edges)[0].astype(int).tolist()


def plot_data(report: EvalReport, bin_width: float) -> dict:
    """Peak-F_z histograms of every variant and the expert on shared bins."""
    everything = list(report.expert.peak_fz) + [x for v in report.variants for x in v.peak_fz]
    top = max(everything) if everything else bin_width
    edges = np.arange(0.0, math.floor(top / bin_width) * bin_width + 2 * bin_width, bin_width)
    return {
        "schema_version": SCHEMA_VERSION,
        "quantity": "peak_fz",
        "unit": "N",
        "bin_width": bin_width,
        "bin_edges": edges.tolist(),
        "expert": histogram(report.expert.peak_fz, edges),
        "variants": {v.name: histogram(v.peak_fz, edges) for v in report.variants},
        "ranking": report.ranking,
    }


def make_report(
    variant_results: Dict[str, Sequence[RolloutResult]],
    expert_peaks: Sequence[float],
    cfg: Optional[EvaluationConfig] = None,
    metadata: Optional[Dict[str, Any]] = None,
    out_dir: Union[str, Path, None] = None,
    expert_trace_samples: Optional[Sequence[float]] = None,
    substeps: int = 100,
) -> EvalReport:
    """Compute all metrics and optionally write ``report.json`` and ``plotdata.json``.

    Args:
        variant_results: Rollout results per evaluated controller
        expert_peaks: Expert peak F_z per demonstration (N)
        cfg: W1 mode, credible level, histogram bin width
        metadata: Run metadata (seeds, config hash, assumed defaults, ...)
        out_dir: Directory for the report files; nothing is written when None
        expert_trace_samples: Expert per-step contact forces, for ``w1_mode == "trace"``
        substeps: Physics substeps per control step

    Returns:
        EvalReport with variants ranked by ascending W1
    """
    cfg = cfg or EvaluationConfig()
    if not variant_results:
        raise ConfigurationError("a report needs at least one evaluated variant")
    if len(expert_peaks) == 0:
        raise ConfigurationError("a report needs a nonempty expert reference")
    reference = list(expert_trace_samples) if cfg.w1_mode == "trace" else list(expert_peaks)
    if not reference:
        raise ConfigurationError(f"no expert samples for w1 mode {cfg.w1_mode}")

    variants = [summarize(name, results, reference, cfg, substeps) for name, results in variant_results.items()]
    ranking = rank_by_distance({v.name: v.w1 for v in variants})
    report = EvalReport(
        variants=variants,
        expert=ExpertReference(
            peak_fz=[float(x) for x in expert_peaks],
            peak_fz_median=float(np.median(expert_peaks)),
            w1_samples=[float(x) for x in reference] if cfg.w1_mode == "trace" else [],
        ),
        ranking=ranking,
        metadata={
            "w1_mode": cfg.w1_mode,
            "prior": "Beta(1, 1), equal-tailed interval",
            "credible_level": cfg.credible_level,
            "retract_margin": cfg.retract_margin,
            "max_duration": cfg.max_duration,
            **(metadata or {}),
        },
    )
    for v in variants:
        w1 = f"{v.w1:.3f} N" if v.w1 is not None else "n/a"
        logger.info(
            f"{v.name}: success {v.successes}/{v.trials} "
            f"[{v.credible_interval.lo:.2f}, {v.credible_interval.hi:.2f}], W1 {w1}"
        )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / REPORT_NAME).write_text(report.model_dump_json(indent=2) + "\n")
        (out / PLOTDATA_NAME).write_text(json.dumps(plot_data(report, cfg.histogram_bin), indent=2) + "\n")
        logger.info(f"Wrote {out / REPORT_NAME} and {out / PLOTDATA_NAME}")
    return report


def load_report(path: Union[str, Path]) -> EvalReport:
    return EvalReport.model_validate_json(Path(path).read_text())
