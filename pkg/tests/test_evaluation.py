"""Tests for metrics, rollouts and the evaluation report."""
import json
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import beta as beta_dist

from pressbench.config import CollectionConfig, EvaluationConfig, MelConfig, PolicyTrainingConfig, Variant
from pressbench.data import ScriptedExpert, compute_norm_stats
from pressbench.dsp import SpecStats
from pressbench.errors import ConfigurationError, DomainError, PrivilegedLeakError
from pressbench.evaluation import (
    PLOTDATA_NAME,
    REPORT_NAME,
    PolicyController,
    RandomController,
    RolloutResult,
    beta_credible_interval,
    load_report,
    make_report,
    peak_fz,
    rank_by_distance,
    run_rollout,
    run_rollouts,
    wasserstein1,
)
from pressbench.percept import AudioEncoder, ClickDetector
from pressbench.policy import DiffusionPolicy
from tests.conftest import make_episode


def _result(seed, success, peak=None, steps=2, substeps=100):
    trace = np.zeros((steps * substeps, 3), np.float32)
    if peak is not None:
        trace[substeps // 2, 2] = peak
        trace[substeps + 3, 2] = peak / 2
    return RolloutResult(
        seed=seed,
        success=success,
        pressed=success,
        peak_fz=peak if success else None,
        force_trace=trace,
        duration=steps * 0.1,
        start_height=0.1,
        final_height=0.1,
    )


class _Peeker:
    """Reads the button state while claiming not to."""

    uses_privileged_channel = False
    name = "peeker"

    def __init__(self, swallow=False):
        self.swallow = swallow

    def reset(self, seed, output):
        pass

    def act(self, output):
        try:
            _ = output.button_state
        except PrivilegedLeakError:
            if not self.swallow:
                raise
        return np.zeros(3, np.float32)


def test_peak_fz():
    assert peak_fz([[0, 0, 1.0], [0, 0, -3.0], [5.0, 0, 2.0]]) == 3.0
    assert peak_fz([0.5, -0.7]) == pytest.approx(0.7)
    with pytest.raises(DomainError):
        peak_fz([])


def test_wasserstein1():
    assert wasserstein1([1, 2, 3], [2, 4, 9]) == pytest.approx(3.0)
    assert wasserstein1([0.0], [0.0, 2.0]) == pytest.approx(1.0)
    assert wasserstein1([1.0, 5.0], [5.0, 1.0]) == 0.0
    with pytest.raises(DomainError):
        wasserstein1([], [1.0])


def test_credible_interval_uniform_prior():
    ci = beta_credible_interval(0, 0)
    assert ci.posterior == "Beta(1, 1)"
    assert ci.lo == pytest.approx(0.025, abs=1e-6)
    assert ci.hi == pytest.approx(0.975, abs=1e-6)
    one = beta_credible_interval(1, 1)
    assert one.lo == pytest.approx(math.sqrt(0.025), abs=1e-6)
    assert one.hi == pytest.approx(math.sqrt(0.975), abs=1e-6)


def test_credible_interval_narrows_with_trials():
    few, many = beta_credible_interval(5, 10), beta_credible_interval(50, 100)
    assert many.hi - many.lo < few.hi - few.lo
    assert few.lo < 0.5 < few.hi


def test_credible_interval_domain():
    with pytest.raises(DomainError):
        beta_credible_interval(3, 2)
    with pytest.raises(DomainError):
        beta_credible_interval(1, 2, level=1.0)


def test_rank_by_distance():
    assert rank_by_distance({"a": 2.0, "b": None, "c": 1.0}) == ["c", "a", "b"]


def test_wasserstein1_scales_and_obeys_triangle_inequality():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a, b, c = (rng.normal(3.0, 1.0, rng.integers(1, 9)) for _ in range(3))
        ab = wasserstein1(a, b)
        assert ab >= 0.0
        assert ab == pytest.approx(wasserstein1(b, a), abs=1e-12)
        assert wasserstein1(2.5 * a, 2.5 * b) == pytest.approx(2.5 * ab, rel=1e-9, abs=1e-12)
        assert ab <= wasserstein1(a, c) + wasserstein1(c, b) + 1e-12


def test_credible_interval_matches_quadrature():
    ci = beta_credible_interval(22, 40)
    assert ci.posterior == "Beta(23, 19)"
    lower_mass, _ = quad(lambda x: beta_dist.pdf(x, 23, 19), 0.0, ci.lo, epsabs=1e-12)
    upper_mass, _ = quad(lambda x: beta_dist.pdf(x, 23, 19), 0.0, ci.hi, epsabs=1e-12)
    assert lower_mass == pytest.approx(0.025, abs=1e-6)
    assert upper_mass == pytest.approx(0.975, abs=1e-6)
    assert upper_mass - lower_mass == pytest.approx(0.95, abs=1e-6)


def test_expert_rollouts_succeed(sim_config):
    results = run_rollouts(lambda: ScriptedExpert(sim_config, CollectionConfig()), 3, 0, sim_config, threads=1)
    assert [r.seed for r in results] == [0, 1, 2]
    assert all(r.success for r in results)
    assert all(r.peak_fz > 2.5 for r in results)


def test_random_controller_never_succeeds(sim_config):
    cfg = EvaluationConfig(max_duration=2.0)
    results = run_rollouts(lambda: RandomController(sim_config), 3, 10, sim_config, cfg, threads=2)
    assert not any(r.success for r in results)
    assert all(r.peak_fz is None for r in results)
    assert all(r.force_trace.shape == (20 * 100, 3) for r in results)
    assert all(r.duration == pytest.approx(2.0) for r in results)


def test_rollouts_do_not_depend_on_threads(sim_config):
    cfg = EvaluationConfig(max_duration=1.0)
    one = run_rollouts(lambda: RandomController(sim_config), 4, 0, sim_config, cfg, threads=1)
    four = run_rollouts(lambda: RandomController(sim_config), 4, 0, sim_config, cfg, threads=4)
    for a, b in zip(one, four):
        assert a.final_height == b.final_height


@pytest.mark.parametrize("swallow", [False, True])
def test_privileged_read_aborts_rollout(sim_config, swallow):
    with pytest.raises(PrivilegedLeakError):
        run_rollout(_Peeker(swallow), 0, sim_config, EvaluationConfig(max_duration=1.0))


@pytest.mark.slow
def test_policy_controller_rollout(sim_config):
    episodes = [make_episode(steps=8, seed=s) for s in range(2)]
    norm = compute_norm_stats(episodes, MelConfig())
    detector = ClickDetector(AudioEncoder(2))
    policy = DiffusionPolicy(
        Variant.SOFT_SENSOR,
        norm,
        detector,
        SpecStats(mean=-10.0, std=5.0),
        cfg=PolicyTrainingConfig(diffusion_steps=5, hidden_dim=32),
    )
    result = run_rollout(PolicyController(policy, sim_config), 0, sim_config, EvaluationConfig(max_duration=1.0))
    assert result.force_trace.shape == (10 * 100, 3)
    assert not result.success


def test_report_ranks_by_w1(tmp_path):
    expert = [3.0, 3.1, 2.9]
    results = {
        "close": [_result(0, True, 3.0), _result(1, True, 3.2)],
        "far": [_result(0, True, 6.0), _result(1, False)],
        "never": [_result(0, False), _result(1, False)],
    }
    report = make_report(results, expert, metadata={"seeds": [0, 1]}, out_dir=tmp_path)
    assert report.ranking == ["close", "far", "never"]
    assert report.variant("never").w1 is None
    assert report.variant("far").successes == 1
    assert report.variant("far").credible_interval.alpha == 2.0
    assert report.expert.peak_fz_median == pytest.approx(3.0)
    assert report.metadata["w1_mode"] == "peak"
    assert report.metadata["seeds"] == [0, 1]

    assert load_report(tmp_path / REPORT_NAME) == report
    plot = json.loads((tmp_path / PLOTDATA_NAME).read_text())
    assert plot["bin_width"] == 0.5
    assert sum(plot["expert"]) == 3
    assert sum(plot["variants"]["close"]) == 2
    assert plot["bin_edges"][-1] > 6.0


def test_report_ranking_of_reference_distances():
    expert = [3.0]
    distances = {"SoftSensor": 5.0, "GenericEmbed": 4.6, "FusionEmbed": 2.5, "FusionLogits": 2.8}
    results = {name: [_result(0, True, 3.0 + w)] for name, w in distances.items()}
    report = make_report(results, expert)
    assert report.ranking == ["FusionEmbed", "FusionLogits", "GenericEmbed", "SoftSensor"]
    for name, w in distances.items():
        assert report.variant(name).w1 == pytest.approx(w)

    results["Expert"] = [_result(0, True, 3.0)]
    report = make_report(results, expert)
    assert report.ranking[0] == "Expert"
    assert report.variant("Expert").w1 == 0.0


def test_trace_mode_report():
    cfg = EvaluationConfig(w1_mode="trace")
    results = {"v": [_result(0, True, 4.0)]}
    report = make_report(results, [4.0], cfg, expert_trace_samples=[4.0, 2.0])
    assert report.variant("v").w1_samples == [4.0, 2.0]
    assert report.variant("v").w1 == pytest.approx(0.0)
    with pytest.raises(ConfigurationError):
        make_report(results, [4.0], cfg, expert_trace_samples=[])


def test_report_needs_inputs():
    with pytest.raises(ConfigurationError):
        make_report({}, [3.0])
    with pytest.raises(ConfigurationError):
        make_report({"v": [_result(0, False)]}, [])
