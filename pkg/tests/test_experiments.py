from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from async_mimo.channel import LinkConfig
from async_mimo.delay import DelayDist, Uniform, point_dist, standard_mixture
from async_mimo.errors import ConfigurationError
from async_mimo.experiments import (ExperimentPlan, mrc_saturation_sir, optimize_sampling_origin,
                                    power_scaling_sweep, run_monte_carlo, seeded_pathloss, thread_count)
from async_mimo.pulse import PulseSpec
from async_mimo.rates import closed_form_rate
from async_mimo.receivers import ReceiverKind


@pytest.mark.parametrize("kind", ["mrc_perfect", "mrczf_perfect"])
def test_single_user_synchronous_rate_matches_ergodic_oracle(kind):
    """One synchronous user: SINR = rho beta ||h||^2 with ||h||^2 ~ Gamma(M, 1)."""
    M, rho, beta = 8, 2.0, 0.7
    cfg = LinkConfig(K=1, M=M, N=16, rho_d=rho, beta=(beta,), e=0.0, e_t=(0.0,), delays=point_dist(0.0))
    rep = run_monte_carlo(ExperimentPlan(cfg, 20_000, (kind,), threads=1))[ReceiverKind.parse(kind)]
    ref, _ = integrate.quad(lambda x: np.log2(1 + rho * beta * x) * stats.gamma.pdf(x, M), 0, np.inf)
    assert abs(rep.empirical[0] - ref) <= 3 * rep.stderr[0]


@pytest.fixture(scope="module")
def small_config():
    return LinkConfig(K=3, M=16, N=16, rho_d=10.0, beta=(1.0, 0.6, 0.3), seed=11)


def test_monte_carlo_is_deterministic_across_threads(small_config):
    a = run_monte_carlo(ExperimentPlan(small_config, 300, threads=1))
    b = run_monte_carlo(ExperimentPlan(small_config, 300, threads=4))
    c = run_monte_carlo(ExperimentPlan(small_config, 300, threads=2))
    for k in a:
        assert np.array_equal(a[k].empirical, b[k].empirical)
        assert np.array_equal(a[k].empirical, c[k].empirical)
        assert np.array_equal(a[k].moment_rate, b[k].moment_rate)
        assert np.array_equal(a[k].theory, closed_form_rate(k, small_config).rates)


def test_different_seeds_differ(small_config):
    a = run_monte_carlo(ExperimentPlan(small_config, 50, ("mrc_perfect",), threads=1))
    b = run_monte_carlo(ExperimentPlan(replace(small_config, seed=12), 50, ("mrc_perfect",), threads=1))
    k = ReceiverKind.MRC_PERFECT
    assert not np.array_equal(a[k].empirical, b[k].empirical)


def test_standard_error_scales_as_inverse_root_trials(small_config):
    kinds = ("mrc_imperfect",)
    k = ReceiverKind.MRC_IMPERFECT
    se1 = run_monte_carlo(ExperimentPlan(small_config, 1000, kinds, threads=1))[k].stderr
    se4 = run_monte_carlo(ExperimentPlan(small_config, 4000, kinds, threads=1))[k].stderr
    assert np.all(np.abs(se1 / se4 - 2.0) < 0.3)


def test_moment_rate_tracks_closed_form(small_config):
    reports = run_monte_carlo(ExperimentPlan(small_config, 4000, threads=1))
    for k, rep in reports.items():
        assert np.allclose(rep.moment_rate, rep.theory, rtol=0.05), k
        assert rep.sum_rel_err == pytest.approx(abs(rep.sum_empirical - rep.sum_theory) / rep.sum_theory)


def test_plan_validation(small_config):
    with pytest.raises(ConfigurationError):
        ExperimentPlan(small_config, trials=0)
    with pytest.raises(ConfigurationError):
        ExperimentPlan(small_config, kinds=())
    with pytest.raises(ConfigurationError):
        ExperimentPlan(small_config, M_list=(128, 64))
    assert ExperimentPlan(small_config, kinds=("mrc-perfect",)).kinds == (ReceiverKind.MRC_PERFECT,)


def test_thread_count(monkeypatch):
    assert thread_count(3) == 3
    monkeypatch.setenv("ASYNC_MIMO_THREADS", "2")
    assert thread_count() == 2
    monkeypatch.setenv("ASYNC_MIMO_THREADS", "many")
    with pytest.raises(ConfigurationError):
        thread_count()


def test_seeded_pathloss_is_reproducible():
    assert seeded_pathloss(5, 0) == seeded_pathloss(5, 0)
    assert seeded_pathloss(5, 0) != seeded_pathloss(5, 1)


@pytest.fixture(scope="module")
def origins():
    return {K: optimize_sampling_origin("mrc_perfect", K) for K in (2, 4, 8, 16)}


def test_optimal_origin_moves_towards_half(origins):
    e = [origins[K].e_star for K in (2, 4, 8, 16)]
    assert all(a < b for a, b in zip(e, e[1:]))
    assert abs(e[-1] - 0.5) <= 0.05
    # purely uniform delays are symmetric about the midpoint
    uni = optimize_sampling_origin("mrc_perfect", 4, dist=DelayDist(((1.0, Uniform()),)))
    assert uni.e_star == pytest.approx(0.5, abs=1e-4)


def test_optimum_beats_the_grid_and_endpoints(origins):
    for s in origins.values():
        assert s.value >= np.max(s.curve) - 1e-12
        assert s.value >= mrc_saturation_sir(PulseSpec(), standard_mixture(s.K), 0.0)
        assert s.value >= mrc_saturation_sir(PulseSpec(), standard_mixture(s.K), 1.0)


def test_optimizer_rejects_zero_forcing_and_bad_grid():
    with pytest.raises(ConfigurationError):
        optimize_sampling_origin("mrczf_perfect", 4)
    with pytest.raises(ConfigurationError):
        optimize_sampling_origin("mrc_perfect", 4, grid_step=0.1)


def test_power_scaling_sweep():
    cfg = LinkConfig(K=3, N=16, beta=seeded_pathloss(3, 0))
    curve = power_scaling_sweep("mrc_perfect", 10.0, [64, 256, 1024, 4096], config=cfg)
    assert curve.rates.shape == (4, 3)
    assert np.all(np.diff(curve.sum_rates) > 0)
    assert np.all(curve.rates[-1] < curve.asymptote + 1e-9)
    zero = power_scaling_sweep("mrc_perfect", 0.0, [64, 128], config=cfg)
    assert np.array_equal(zero.rates, np.zeros((2, 3)))
    with pytest.raises(ConfigurationError):
        power_scaling_sweep("mrc_perfect", 10.0, [128, 64], config=cfg)
    with pytest.raises(ConfigurationError):
        power_scaling_sweep("mrc_perfect", 10.0, [64], scaling="power_over_M2", config=cfg)
