"""Moment tables against adaptive quadrature of the defining expectations."""

import numpy as np
import pytest

from async_mimo.channel import LinkConfig
from async_mimo.delay import expect
from async_mimo.discretize import build_G, g_lags
from async_mimo.moments import base_moments, leakage_at, oversampled_gamma, zf_perfect_moments
from async_mimo.pulse import PulseSpec, pulse_moment
from async_mimo.receivers import build_Z

CONFIGS = {
    "rect-hadamard": LinkConfig(K=3, N=9, e=0.4, e_s=0.7),
    "rect-zc": LinkConfig(K=3, N=9, e=0.6, pilot_kind="zc"),
    "rrc-hadamard": LinkConfig(K=2, N=20, e=0.35, pulse=PulseSpec("rrc")),
}


def cexpect(cfg, fn):
    breaks = sorted({float(np.mod(o, 1.0)) for o in (cfg.e, cfg.e_s, *cfg.e_t)})
    if cfg.pulse.family == "rrc":
        breaks = None  # dense knots: leave it to the adaptive rule
    re = expect(cfg.delays, lambda t: np.real(fn(t)), breaks or ())
    im = expect(cfg.delays, lambda t: np.imag(fn(t)), breaks or ())
    return re + 1j * im


def lam(cfg, t):
    return leakage_at(cfg, np.array([t]))[0]  # [l, k]


@pytest.mark.parametrize("name", CONFIGS)
def test_lag_moments(name):
    cfg = CONFIGS[name]
    t = base_moments(cfg)
    for idx, i in enumerate(t.lags):
        assert t.Eg[idx] == pytest.approx(pulse_moment(cfg.pulse, cfg.delays, cfg.e, i, 1), abs=1e-10)
        assert t.Eg2[idx] == pytest.approx(pulse_moment(cfg.pulse, cfg.delays, cfg.e, i, 2), abs=1e-10)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("name", CONFIGS)
def test_leakage_moments(name):
    cfg = CONFIGS[name]
    t = base_moments(cfg)
    tol = 1e-8 if cfg.pulse.family == "rect" else 2e-6
    K = cfg.K
    for l in range(K):
        for k in range(K):
            ref = cexpect(cfg, lambda s: abs(lam(cfg, s)[l, k]) ** 2)
            assert t.lam2[l, k] == pytest.approx(ref.real, abs=tol)
            for idx in (0, t.reach, len(t.lags) - 1):
                def g1(s, l=l, k=k, idx=idx):
                    return np.conj(lam(cfg, s)[l, k]) * g_lags(cfg.pulse, cfg.e, s)[idx]

                def g2(s, l=l, k=k, idx=idx):
                    return abs(lam(cfg, s)[l, k]) ** 2 * g_lags(cfg.pulse, cfg.e, s)[idx] ** 2

                assert t.gamma1[l, k, idx] == pytest.approx(cexpect(cfg, g1), abs=tol)
                assert t.gamma2[l, k, idx] == pytest.approx(cexpect(cfg, g2).real, abs=tol)


def test_leakage_is_identity_without_delay():
    cfg = LinkConfig(K=3, N=9, e=0.0)
    assert np.allclose(lam(cfg, 0.0), np.eye(3))


def test_oversampled_gamma_matches_quadrature():
    cfg = CONFIGS["rect-zc"]
    gt = oversampled_gamma(cfg)
    assert gt.shape == (3, 3, 3, 3)
    for l, k, tt, idx in [(0, 0, 0, 1), (1, 2, 1, 0), (2, 1, 2, 2), (0, 2, 1, 1)]:
        ref = cexpect(cfg, lambda s: np.conj(lam(cfg, s)[l, k]) * g_lags(cfg.pulse, cfg.e_t[tt], s)[idx])
        assert gt[l, k, tt, idx] == pytest.approx(ref, abs=1e-8)


def test_zf_rows_match_quadrature():
    cfg = CONFIGS["rect-hadamard"]
    t = base_moments(cfg)
    Z = build_Z(t, cfg.N).Z
    zt = zf_perfect_moments(cfg, t, Z)
    a = cfg.symbol
    row = lambda s: (Z @ build_G(cfg.pulse, cfg.e, s, cfg.N))[a]  # noqa: E731
    for n in range(cfg.N):
        ref = cexpect(cfg, lambda s: row(s)[n] ** 2).real
        assert zt.xi2[n] == pytest.approx(ref, abs=1e-10)
    # the mean of Z G is the identity row
    assert np.allclose(zt.zf_mean, np.eye(cfg.N)[a], atol=1e-12)
    assert zt.eps == pytest.approx(float(Z[a] @ Z[a]))
