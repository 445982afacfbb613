"""In-package oracle suite behind ``python -m pressbench selftest``.

Each check prints ✅/❌ lines and returns True on success; ``run_selftest``
prints a summary and returns the process exit code.
"""
import logging
import math
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
from scipy.integrate import quad
from scipy.special import beta as beta_function

from pressbench.config import CollectionConfig, MelConfig, SimConfig
from pressbench.data.expert import expert_episode, replay_episode
from pressbench.dsp.spectrogram import log_mel
from pressbench.evaluation.metrics import beta_credible_interval, wasserstein1
from pressbench.learn.gradcheck import finite_difference_check
from pressbench.learn.layers import make_layer
from pressbench.sim import to_uint8

logger = logging.getLogger(__name__)

# (layer, inputs) pairs checked alongside the built-in vocabulary
LayerCase = Tuple[nn.Module, Sequence[torch.Tensor]]


def _away_from_kink(x: torch.Tensor, margin: float = 1e-2) -> torch.Tensor:
    return torch.where(x.abs() < margin, x + 2 * margin * torch.sign(x + 1e-12), x)


def layer_cases(generator: torch.Generator) -> List[Tuple[str, LayerCase]]:
    """One random instance of every layer type, with inputs."""

    def randn(*shape: int) -> torch.Tensor:
        return torch.randn(*shape, generator=generator, dtype=torch.float64)

    dim = 8
    return [
        ("affine", (make_layer({"type": "affine", "in": 5, "out": 4}), [randn(3, 5)])),
        ("conv2d", (make_layer({"type": "conv2d", "in": 2, "out": 3, "kernel": 3}), [randn(2, 2, 5, 5)])),
        (
            "conv2d_patch",
            (make_layer({"type": "conv2d", "in": 2, "out": 3, "kernel": 2, "stride": 2}), [randn(2, 2, 4, 4)]),
        ),
        ("relu", (make_layer({"type": "relu"}), [_away_from_kink(randn(4, 6))])),
        ("gelu", (make_layer({"type": "gelu"}), [randn(4, 6)])),
        ("layernorm", (make_layer({"type": "layernorm", "dim": dim}), [randn(3, dim)])),
        ("attention", (make_layer({"type": "attention", "dim": dim, "heads": 2}), [randn(2, 4, dim)])),
        ("flatten", (make_layer({"type": "flatten"}), [randn(2, 3, 4)])),
        ("concat", (make_layer({"type": "concat"}), [randn(3, 2), randn(3, 4)])),
        ("tokens", (make_layer({"type": "tokens"}), [randn(2, 3, 2, 2)])),
        ("pos_embed", (make_layer({"type": "pos_embed", "tokens": 4, "dim": dim}), [randn(2, 4, dim)])),
        ("meanpool", (make_layer({"type": "meanpool"}), [randn(2, 4, dim)])),
    ]


def check_gradients(
    instances: int = 100,
    extra_layers: Optional[Sequence[LayerCase]] = None,
    tolerance: float = 1e-3,
    seed: int = 0,
) -> bool:
    """Finite-difference check of every layer type over random instances."""
    print("Checking layer gradients...")
    generator = torch.Generator().manual_seed(seed)
    worst = {}
    for i in range(instances):
        for name, (layer, inputs) in layer_cases(generator):
            result = finite_difference_check(layer, inputs, tolerance=tolerance, max_entries=12, seed=seed + i)
            worst[name] = max(worst.get(name, 0.0), result.max_relative_error)
    for j, (layer, inputs) in enumerate(extra_layers or []):
        result = finite_difference_check(layer, inputs, tolerance=tolerance, seed=seed + j)
        worst[f"{result.layer}[{j}]"] = result.max_relative_error

    passed = True
    for name, error in worst.items():
        ok = error <= tolerance
        passed = passed and ok
        print(f"  {'✅' if ok else '❌'} {name}: max relative error {error:.1e}")
    return passed


def check_wasserstein(pairs: int = 1000, seed: int = 0) -> bool:
    """W1 against the sorted-matching oracle on random equal-size samples."""
    print("\nChecking W1 distance...")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        n = int(rng.integers(1, 9))
        a, b = rng.normal(0.0, 3.0, n), rng.normal(1.0, 2.0, n)
        oracle = float(np.mean(np.abs(np.sort(a) - np.sort(b))))
        worst = max(worst, abs(wasserstein1(a, b) - oracle))
    worked = abs(wasserstein1([1, 2, 3], [2, 4, 9]) - 3.0) < 1e-12
    ok = worst <= 1e-9 and worked
    print(f"  {'✅' if ok else '❌'} {pairs} random pairs, max deviation {worst:.1e}")
    return ok


def _beta_cdf_by_quadrature(x: float, a: float, b: float) -> float:
    value, _ = quad(lambda u: u ** (a - 1) * (1 - u) ** (b - 1), 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=200)
    return value / beta_function(a, b)


def check_credible_intervals(max_trials: int = 40, level: float = 0.95) -> bool:
    """Beta credible intervals against quadrature of the posterior density."""
    print("\nChecking Beta credible intervals...")
    worst = 0.0
    tail = (1.0 - level) / 2.0
    for trials in range(max_trials + 1):
        for successes in range(trials + 1):
            ci = beta_credible_interval(successes, trials, level)
            lo = _beta_cdf_by_quadrature(ci.lo, ci.alpha, ci.beta)
            hi = _beta_cdf_by_quadrature(ci.hi, ci.alpha, ci.beta)
            worst = max(worst, abs(lo - tail), abs(hi - (1.0 - tail)))
    analytic = beta_credible_interval(1, 1)
    analytic_ok = abs(analytic.lo - math.sqrt(0.025)) < 1e-5 and abs(analytic.hi - math.sqrt(0.975)) < 1e-5
    ok = worst <= 1e-6 and analytic_ok
    print(f"  {'✅' if ok else '❌'} all (s, n) with n <= {max_trials}, max CDF deviation {worst:.1e}")
    print(f"  {'✅' if analytic_ok else '❌'} Beta(2, 1): ({analytic.lo:.5f}, {analytic.hi:.5f})")
    return ok


def check_spectrogram(mel: Optional[MelConfig] = None) -> bool:
    """3 s of audio gives a 298 x 128 log-Mel image; silence maps to log(floor)."""
    print("\nChecking spectrogram front end...")
    mel = mel or MelConfig()
    start = time.perf_counter()
    silence = log_mel(np.zeros(mel.window_samples), mel).values
    tone = log_mel(np.sin(2 * np.pi * 1000.0 * np.arange(mel.window_samples) / mel.sample_rate), mel).values
    elapsed = time.perf_counter() - start
    shape_ok = silence.shape == (298, 128) and tone.shape == (298, 128)
    silence_ok = bool(np.all(silence == np.float32(np.log(mel.log_floor))))
    ok = shape_ok and silence_ok and elapsed < 1.0
    print(f"  {'✅' if shape_ok else '❌'} shape {silence.shape}")
    print(f"  {'✅' if silence_ok else '❌'} silence is exactly log(floor)")
    print(f"  {'✅' if elapsed < 1.0 else '❌'} two windows in {elapsed:.3f} s")
    return ok


def check_determinism(seed: int = 0) -> bool:
    """Same seed, same episode; replaying the recorded actions reproduces it bit for bit."""
    print("\nChecking determinism...")
    sim, collection = SimConfig(), CollectionConfig()
    first = expert_episode(sim, seed, collection)
    second = expert_episode(sim, seed, collection)
    same = all(np.array_equal(a, b) for a, b in zip(first.arrays().values(), second.arrays().values()))
    replayed = replay_episode(first, sim)
    n = first.chunk_length
    replay_ok = len(replayed) == len(first) and all(
        np.array_equal(np.asarray(out.eef_position, np.float32), first.eef_position[i])
        and np.array_equal(np.asarray(out.audio_chunk, np.float32), first.audio[i * n : (i + 1) * n])
        and np.array_equal(to_uint8(out.image), first.image[i])
        for i, out in enumerate(replayed)
    )
    print(f"  {'✅' if same else '❌'} seed {seed} collected twice gives identical episodes")
    print(f"  {'✅' if replay_ok else '❌'} replay of {len(first)} steps is bit-exact")
    return same and replay_ok


def run_selftest(
    extra_layers: Optional[Sequence[LayerCase]] = None,
    gradient_instances: int = 100,
    seed: int = 0,
) -> int:
    """Run all oracle checks.

    Args:
        extra_layers: Additional (layer, inputs) cases for the gradient check
        gradient_instances: Random instances per layer type
        seed: Seed of every randomized check

    Returns:
        0 when every check passed, 1 otherwise
    """
    print("=" * 60)
    print("PressBench Self-Test")
    print("=" * 60)

    checks: List[Tuple[str, Callable[[], bool]]] = [
        ("Layer Gradients", lambda: check_gradients(gradient_instances, extra_layers, seed=seed)),
        ("W1 Oracle", lambda: check_wasserstein(seed=seed)),
        ("Beta Credible Intervals", check_credible_intervals),
        ("Spectrogram Shape", check_spectrogram),
        ("Determinism", lambda: check_determinism(seed)),
    ]
    results = []
    for name, check in checks:
        try:
            results.append((name, check()))
        except Exception as e:
            logger.error(f"Self-test check {name} raised: {e}")
            print(f"  ❌ {name}: {e}")
            results.append((name, False))

    print("\n" + "=" * 60)
    print("Test Summary")
    print("=" * 60)
    for name, passed in results:
        print(f"{'✅ PASS' if passed else '❌ FAIL'}: {name}")

    if all(passed for _, passed in results):
        print("\n🎉 All checks passed!")
        return 0
    print("\n⚠️  Some checks failed. See the lines marked ❌ above.")
    return 1
