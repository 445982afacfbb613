"""Main orchestration module for PressBench."""
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from langgraph.graph import END, StateGraph
from typing_extensions import TypedDict

from pressbench.config import RunConfig, Variant, config_hash
from pressbench.data.store import EpisodeStore
from pressbench.learn.checkpoint import load_checkpoint
from pressbench.stages import (
    DETECTOR_FILE,
    ENCODER_FILE,
    METRICS_FILE,
    policy_file,
    run_collect,
    run_evaluate,
    run_train_detector,
    run_train_policy,
)

logger = logging.getLogger(__name__)

DATASET_DIR = "dataset"
DETECTOR_DIR = "detector"
POLICY_DIR = "policies"
REPORT_DIR = "report"


class PipelineState(TypedDict):
    """State of the pipeline graph."""

    config: RunConfig
    out_dir: str
    variants: List[str]
    resume: bool
    threads: Optional[int]
    policies: List[str]
    report: Optional[dict]
    skipped: List[str]


def with_variant(config: RunConfig, variant: Variant) -> RunConfig:
    return config.model_copy(update={"policy": config.policy.model_copy(update={"variant": Variant(variant)})})


def _stage(title: str) -> None:
    logger.info("\n" + "=" * 60)
    logger.info(title)
    logger.info("=" * 60)


def collect_node(state: PipelineState) -> PipelineState:
    """Collect demonstrations unless a matching dataset already exists."""
    _stage("PHASE 1: DEMONSTRATION COLLECTION")
    config = state["config"]
    store = EpisodeStore(Path(state["out_dir"]) / DATASET_DIR)
    if state["resume"] and store.manifest_path.exists():
        if store.read_manifest().config_hash == config_hash(config):
            logger.info(f"Reusing dataset in {store.root}")
            state["skipped"].append("collect")
            return state
    run_collect(config, store.root, threads=state["threads"])
    return state


def detector_node(state: PipelineState) -> PipelineState:
    """Pretrain the audio encoder and fine-tune the click detector."""
    _stage("PHASE 2: AUDIO PRETRAINING & CLICK DETECTOR")
    config = state["config"]
    out = Path(state["out_dir"]) / DETECTOR_DIR
    metrics = out / METRICS_FILE
    if state["resume"] and metrics.exists() and (out / DETECTOR_FILE).exists() and (out / ENCODER_FILE).exists():
        if json.loads(metrics.read_text()).get("config_hash") == config_hash(config):
            logger.info(f"Reusing detector in {out}")
            state["skipped"].append("train-detector")
            return state
    run_train_detector(config, Path(state["out_dir"]) / DATASET_DIR, out)
    return state


def policy_node(state: PipelineState) -> PipelineState:
    """Train one policy per requested variant."""
    _stage("PHASE 3: POLICY TRAINING")
    root = Path(state["out_dir"])
    out = root / POLICY_DIR
    paths = []
    for variant in state["variants"]:
        config = with_variant(state["config"], variant)
        path = out / policy_file(variant)
        if state["resume"] and path.exists():
            if load_checkpoint(path)[0].get("config_hash") == config_hash(config):
                logger.info(f"Reusing {path}")
                state["skipped"].append(f"train-policy:{variant}")
                paths.append(str(path))
                continue
        paths.append(str(run_train_policy(config, root / DATASET_DIR, out, detector=root / DETECTOR_DIR)))
    state["policies"] = paths
    return state


def evaluate_node(state: PipelineState) -> PipelineState:
    """Evaluate every trained policy against the collected expert demonstrations."""
    _stage("PHASE 4: EVALUATION")
    root = Path(state["out_dir"])
    report = run_evaluate(
        state["config"],
        state["policies"],
        root / REPORT_DIR,
        expert_dataset=root / DATASET_DIR,
        threads=state["threads"],
    )
    state["report"] = report.model_dump(mode="json")
    return state


def create_pipeline_graph():
    """Create the LangGraph workflow collect -> detector -> policies -> evaluate."""
    workflow = StateGraph(PipelineState)

    workflow.add_node("collect", collect_node)
    workflow.add_node("train_detector", detector_node)
    workflow.add_node("train_policies", policy_node)
    workflow.add_node("evaluate", evaluate_node)

    workflow.set_entry_point("collect")
    workflow.add_edge("collect", "train_detector")
    workflow.add_edge("train_detector", "train_policies")
    workflow.add_edge("train_policies", "evaluate")
    workflow.add_edge("evaluate", END)

    return workflow.compile()


def run_full_pipeline(
    config: RunConfig,
    out_dir: str,
    variants: Sequence[Variant] = tuple(Variant),
    resume: bool = False,
    threads: Optional[int] = None,
) -> dict:
    """Run the full experiment: collect, train the detector and all policies, evaluate.

    Args:
        config: Run configuration
        out_dir: Root directory; stages write to ``dataset/``, ``detector/``,
            ``policies/`` and ``report/`` below it
        variants: Policy variants to train and evaluate
        resume: Reuse stage outputs whose recorded config hash matches
        threads: Parallel collection and rollout workers

    Returns:
        Final pipeline state, with the report as a dict
    """
    logger.info("Starting full PressBench pipeline...")
    initial_state: PipelineState = {
        "config": config,
        "out_dir": str(out_dir),
        "variants": [Variant(v).value for v in variants],
        "resume": resume,
        "threads": threads,
        "policies": [],
        "report": None,
        "skipped": [],
    }
    try:
        result = create_pipeline_graph().invoke(initial_state)
    except Exception as e:
        logger.error(f"Pipeline error: {e}")
        raise

    _stage("PIPELINE COMPLETE")
    logger.info(f"Ranking by W1 to expert: {' < '.join(result['report']['ranking'])}")
    if result["skipped"]:
        logger.info(f"Reused stages: {', '.join(result['skipped'])}")
    return result
