import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from async_mimo.channel import LinkConfig
from async_mimo.delay import point_dist
from async_mimo.errors import ConfigurationError, InternalError
from async_mimo.pulse import PulseSpec
from async_mimo.rates import (ALL_KINDS, SecondOrderStats, analyze, approx_error_bound, asymptotic_limit,
                              closed_form_rate, lemma_terms, rate_from_stats, second_order_stats, sync_rate,
                              theorem_rate, with_power)
from async_mimo.receivers import ReceiverKind

BETA = (0.874, 0.0419, 0.156, 1.012, 0.0958)


def _config(pulse, pilot, M=128):
    K = 5 if pulse == "rect" else 3
    return LinkConfig(K=K, M=M, N=64, rho_d=10.0, beta=BETA[:K], pilot_kind=pilot, pulse=PulseSpec(pulse))


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
@pytest.mark.parametrize("pulse,pilot", list(itertools.product(["rect", "rrc"], ["hadamard", "zc"])))
def test_engine_agrees_with_simplified_forms(pulse, pilot, kind):
    cfg = _config(pulse, pilot)
    an = analyze(cfg, (kind,))
    got = closed_form_rate(kind, cfg, an).rates
    ref = theorem_rate(kind.theorem, cfg, an).rates
    assert np.allclose(got, ref, rtol=1e-9, atol=0.0)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_synchronous_limit_recovers_classical_rates(kind):
    cfg = LinkConfig(K=4, M=100, N=32, rho_d=3.0, beta=(1.0, 0.5, 0.2, 0.05), e=0.0, e_t=(0.0, 0.2, 0.4, 0.6),
                     delays=point_dist(0.0))
    rep = closed_form_rate(kind, cfg)
    assert np.allclose(rep.rates, sync_rate(kind, cfg), rtol=1e-10)


def test_rates_grow_with_antennas():
    for kind in ALL_KINDS:
        sums = [closed_form_rate(kind, _config("rect", "hadamard", M)).sum_rate for M in (64, 256, 1024)]
        assert sums[0] < sums[1] < sums[2], kind


def test_report_components_are_consistent():
    rep = closed_form_rate("mrc_imperfect", _config("rect", "zc"))
    assert np.allclose(rep.rates, rep.kappa * np.log2(1 + rep.sinr))
    assert np.all(rep.isi >= 0) and np.all(rep.iui >= 0) and np.all(rep.noise > 0)
    assert rep.sum_rate == pytest.approx(rep.rates.sum())


def test_error_bound_shrinks_with_M():
    stats = second_order_stats("mrc_perfect", _config("rect", "hadamard"), analyze(_config("rect", "hadamard")))
    bounds = [approx_error_bound(stats, M=M) for M in (16, 64, 256, 1024)]
    assert all(b1 > b2 > 0 for b1, b2 in zip(bounds, bounds[1:]))
    assert approx_error_bound(stats, c=2.0) > approx_error_bound(stats)
    assert closed_form_rate("mrc_perfect", _config("rect", "hadamard"), bound=True).bound == pytest.approx(
        approx_error_bound(stats))


def test_inconsistent_stats_raise():
    z = np.zeros((1, 1, 3))
    X1 = z.copy()
    X1[0, 0, 1] = 1.0
    bad = SecondOrderStats(kind=ReceiverKind.MRC_PERFECT, M=4, rho_d=1.0, kappa=1.0, a=1, X1=X1, X2=z,
                           noise=np.array([1.0]))
    with pytest.raises(InternalError):
        rate_from_stats(bad)
    with pytest.raises(InternalError):
        rate_from_stats(SecondOrderStats(**{**bad.__dict__, "X2": X1, "noise": np.array([0.0])}))


def test_missing_tables_are_reported():
    cfg = _config("rect", "hadamard")
    an = analyze(cfg, ["mrc_perfect"])
    for kind in ("mrczf_perfect", "mrczf_imperfect"):
        with pytest.raises(ConfigurationError):
            second_order_stats(kind, cfg, an)


def test_power_scaled_limits_are_approached():
    cfg = _config("rect", "hadamard")
    an = analyze(cfg)
    E_d = 10.0
    for kind, scaling in [("mrc_perfect", "power_over_M"), ("mrczf_perfect", "power_over_M"),
                          ("mrc_imperfect", "power_over_sqrtM")]:
        lim = asymptotic_limit(kind, cfg, an, scaling=scaling, E_d=E_d)
        M = 10**7 if scaling == "power_over_M" else 10**11  # the estimation error decays as 1/sqrt(M)
        rho = E_d / M if scaling == "power_over_M" else E_d / np.sqrt(M)
        big = with_power(cfg, rho, M)
        assert np.allclose(closed_form_rate(kind, big, an).rates, lim, rtol=2e-3), kind
    assert np.all(np.isinf(asymptotic_limit("mrczf_perfect", cfg, an)))
    with pytest.raises(ConfigurationError):
        asymptotic_limit("mrc_perfect", cfg, an, scaling="power_over_sqrtM")


def test_saturation_limit_of_plain_mrc():
    cfg = _config("rect", "hadamard")
    an = analyze(cfg, ["mrc_perfect"])
    lim = asymptotic_limit("mrc_perfect", cfg, an)
    big = with_power(cfg, 1e6, 10**9)
    assert np.allclose(closed_form_rate("mrc_perfect", big, an).rates, lim, rtol=1e-3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20), n=st.integers(2, 400), scale=st.floats(0.01, 100.0))
def test_lemma_holds_on_empirical_distributions(seed, n, scale):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, n))
    x = scale * np.exp(z[0])
    y = np.exp(0.6 * z[0] + 0.8 * z[1])
    gap, bound = lemma_terms(x, y)
    assert 0.0 <= gap <= bound + 1e-12


def test_lemma_rejects_bad_samples():
    with pytest.raises(ConfigurationError):
        lemma_terms(np.array([1.0, -1.0]), np.array([1.0, 1.0]))
