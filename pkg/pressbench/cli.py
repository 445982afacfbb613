#!/usr/bin/env python3
"""Command-line interface for PressBench."""
import argparse
import logging
import sys
from typing import Optional, Sequence

from pressbench.config import RunConfig, Variant, config_hash, get_runtime_settings, load_run_config
from pressbench.errors import PressBenchError, PrivilegedLeakError, TrainingDivergedError
from pressbench.orchestrator import run_full_pipeline
from pressbench.selftest import run_selftest
from pressbench.stages import run_collect, run_evaluate, run_train_detector, run_train_policy

logger = logging.getLogger(__name__)

VARIANT_CHOICES = [v.value for v in Variant]
DETECTOR_VARIANTS = {Variant.FUSION_LOGITS.value, Variant.FUSION_EMBED.value, Variant.SOFT_SENSOR.value}


def configure_logging() -> None:
    logging.basicConfig(
        level=get_runtime_settings().log_level.upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )


def print_header(command: str, config: RunConfig, seed: int, stream=None) -> None:
    """Every command starts with its config hash and seed."""
    stream = stream or sys.stdout
    print("=" * 60, file=stream)
    print(f"PressBench {command}", file=stream)
    print(f"config hash: {config_hash(config)}", file=stream)
    print(f"seed: {seed}", file=stream)
    print("=" * 60, file=stream)


def cmd_default_config(args):
    """Print the default configuration as JSON."""
    config = load_run_config(args.config)
    print_header("default-config", config, config.seed, stream=sys.stderr)
    print(config.model_dump_json(indent=2))


def cmd_collect(args):
    """Collect expert demonstrations."""
    config = load_run_config(args.config, seed=args.seed, collection__episodes=args.episodes)
    print_header("collect", config, config.seed)
    manifest = run_collect(config, args.out)

    print("\n" + "=" * 60)
    print("COLLECTION RESULTS")
    print("=" * 60)
    print(f"✅ {manifest.stats.succeeded} episodes written to {args.out}")
    print(f"   Attempted seeds: {manifest.stats.attempted}")
    print(f"   Excluded seeds: {manifest.stats.excluded_seeds or 'none'}")
    if manifest.stats.expert_peak_fz_median is not None:
        print(f"   Expert peak F_z median: {manifest.stats.expert_peak_fz_median:.3f} N")


def cmd_train_detector(args):
    """Pretrain the audio encoder and fine-tune the click detector."""
    config = load_run_config(
        args.config,
        seed=args.seed,
        detector__finetune_epochs=args.epochs,
        detector__finetune_lr=args.lr,
        detector__pretrain_epochs=args.pretrain_epochs,
    )
    print_header("train-detector", config, config.seed)
    metrics = run_train_detector(config, args.dataset, args.out)

    print("\n" + "=" * 60)
    print("DETECTOR METRICS")
    print("=" * 60)
    print(f"   F1: {metrics.f1:.4f}")
    print(f"   False-negative rate: {metrics.false_negative_rate:.4f}")
    print(f"   TP/FP/TN/FN: {metrics.tp}/{metrics.fp}/{metrics.tn}/{metrics.fn}")
    print(f"\n✅ Detector written to {args.out}")


def cmd_train_policy(args):
    """Train one diffusion policy variant."""
    config = load_run_config(args.config, seed=args.seed, policy__variant=args.variant, policy__steps=args.steps)
    variant = config.policy.variant
    print_header(f"train-policy ({variant.value})", config, config.seed)
    path = run_train_policy(config, args.dataset, args.out, detector=args.detector, encoder=args.encoder)
    print(f"\n✅ {variant.display_name} policy written to {path}")


def cmd_evaluate(args):
    """Evaluate policies and write the report."""
    config = load_run_config(
        args.config,
        evaluation__rollouts=args.rollouts,
        evaluation__base_seed=args.base_seed,
        evaluation__w1_mode=args.w1_mode,
    )
    print_header("evaluate", config, config.evaluation.base_seed)
    report = run_evaluate(config, args.policy, args.out, expert_dataset=args.expert_dataset)

    print("\n" + "=" * 60)
    print("EVALUATION RESULTS (ranked by W1 to expert)")
    print("=" * 60)
    for name in report.ranking:
        v = report.variant(name)
        ci = v.credible_interval
        w1 = f"{v.w1:.3f} N" if v.w1 is not None else "n/a"
        median = f"{v.peak_fz_median:.2f} N" if v.peak_fz_median is not None else "n/a"
        print(f"\n{name}")
        print(f"   Success: {v.successes}/{v.trials}  95% CI [{ci.lo:.3f}, {ci.hi:.3f}]")
        print(f"   Peak F_z median: {median}")
        print(f"   W1 to expert: {w1}")
    print(f"\nExpert peak F_z median: {report.expert.peak_fz_median:.2f} N")
    print(f"\n✨ Report written to {args.out}")


def cmd_selftest(args):
    """Run the oracle suite."""
    config = load_run_config(args.config)
    print_header("selftest", config, config.seed)
    code = run_selftest(gradient_instances=args.gradient_instances, seed=config.seed)
    if code:
        sys.exit(code)


def cmd_pipeline(args):
    """Run collect, train-detector, train-policy and evaluate end to end."""
    config = load_run_config(args.config, seed=args.seed, collection__episodes=args.episodes)
    print_header("pipeline", config, config.seed)
    variants = args.variant or VARIANT_CHOICES
    result = run_full_pipeline(config, args.out, variants=variants, resume=args.resume)
    print(f"\n✨ Pipeline complete. Ranking: {' < '.join(result['report']['ranking'])}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='pressbench',
        description='PressBench - Audio-guided button pressing testbed',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Write the default configuration
  python -m pressbench default-config > config.json

  # Collect demonstrations
  python -m pressbench collect --episodes 200 --out runs/data

  # Train the click detector
  python -m pressbench train-detector --dataset runs/data --out runs/detector

  # Train a policy variant
  python -m pressbench train-policy --dataset runs/data --variant fusion-embed --detector runs/detector --out runs/policies

  # Evaluate against the expert
  python -m pressbench evaluate --policy runs/policies/policy_fusion-embed.pbc --expert-dataset runs/data --out runs/report
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    def add_common(sub: argparse.ArgumentParser, seed: bool = True) -> None:
        sub.add_argument('--config', help='JSON configuration file (flags override its values)')
        if seed:
            sub.add_argument('--seed', type=int, help='Run seed')

    default_parser = subparsers.add_parser('default-config', help='Print the default configuration as JSON')
    add_common(default_parser, seed=False)
    default_parser.set_defaults(func=cmd_default_config)

    collect_parser = subparsers.add_parser('collect', help='Collect scripted expert demonstrations')
    add_common(collect_parser)
    collect_parser.add_argument('--episodes', type=int, help='Successful episodes to keep (default: 200)')
    collect_parser.add_argument('--out', required=True, help='Dataset directory')
    collect_parser.set_defaults(func=cmd_collect)

    detector_parser = subparsers.add_parser('train-detector', help='Pretrain the audio encoder and fine-tune the click detector')
    add_common(detector_parser)
    detector_parser.add_argument('--dataset', required=True, help='Collected dataset directory')
    detector_parser.add_argument('--pretrain-epochs', type=int, help='Audio pretraining epochs')
    detector_parser.add_argument('--epochs', type=int, help='Fine-tuning epochs (default: 10)')
    detector_parser.add_argument('--lr', type=float, help='Fine-tuning learning rate (default: 1e-5)')
    detector_parser.add_argument('--out', required=True, help='Output directory')
    detector_parser.set_defaults(func=cmd_train_detector)

    policy_parser = subparsers.add_parser('train-policy', help='Train one diffusion policy variant')
    add_common(policy_parser)
    policy_parser.add_argument('--dataset', required=True, help='Collected dataset directory')
    policy_parser.add_argument('--variant', required=True, choices=VARIANT_CHOICES, help='Audio integration strategy')
    policy_parser.add_argument('--detector', help='Click detector checkpoint or train-detector output directory')
    policy_parser.add_argument('--encoder', help='Pretrained audio encoder checkpoint (generic variant)')
    policy_parser.add_argument('--steps', type=int, help='Training steps')
    policy_parser.add_argument('--out', required=True, help='Output directory')
    policy_parser.set_defaults(func=cmd_train_policy)

    evaluate_parser = subparsers.add_parser('evaluate', help='Roll out policies and write the report')
    add_common(evaluate_parser, seed=False)
    evaluate_parser.add_argument('--policy', action='append', required=True, help='Policy checkpoint (repeatable)')
    evaluate_parser.add_argument('--rollouts', type=int, help='Rollouts per policy (default: 40)')
    evaluate_parser.add_argument('--base-seed', type=int, help='Seed of rollout 0')
    evaluate_parser.add_argument('--expert-dataset', help='Expert demonstrations for the reference distribution')
    evaluate_parser.add_argument('--w1-mode', choices=['peak', 'trace'], help='W1 over per-rollout peaks or contact traces')
    evaluate_parser.add_argument('--out', required=True, help='Report directory')
    evaluate_parser.set_defaults(func=cmd_evaluate)

    selftest_parser = subparsers.add_parser('selftest', help='Run the oracle suite')
    add_common(selftest_parser, seed=False)
    selftest_parser.add_argument('--gradient-instances', type=int, default=100, help='Random instances per layer type')
    selftest_parser.set_defaults(func=cmd_selftest)

    pipeline_parser = subparsers.add_parser('pipeline', help='Run every stage end to end')
    add_common(pipeline_parser)
    pipeline_parser.add_argument('--episodes', type=int, help='Successful episodes to collect')
    pipeline_parser.add_argument('--variant', action='append', choices=VARIANT_CHOICES, help='Variant to train (repeatable; default: all)')
    pipeline_parser.add_argument('--resume', action='store_true', help='Reuse stage outputs with a matching config hash')
    pipeline_parser.add_argument('--out', required=True, help='Run directory')
    pipeline_parser.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: Optional[Sequence[str]] = None):
    """Main CLI entry point."""
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(2)

    if args.command == 'train-policy' and args.variant in DETECTOR_VARIANTS and not args.detector:
        parser.error(f"--variant {args.variant} requires --detector")

    try:
        args.func(args)
    except PrivilegedLeakError as e:
        logger.error(f"Privileged leakage: {e}")
        print(f"\n❌ Privileged leakage: {e}", file=sys.stderr)
        sys.exit(1)
    except TrainingDivergedError as e:
        logger.error(f"Training diverged: {e}")
        sys.exit(1)
    except PressBenchError as e:
        logger.error(f"Error: {e}")
        sys.exit(1)
    except Exception as e:
        logger.error(f"Error: {e}", exc_info=True)
        sys.exit(1)


if __name__ == '__main__':
    main()
