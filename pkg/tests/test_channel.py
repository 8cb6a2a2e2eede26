import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from async_mimo.channel import (LinkConfig, default_pilot_length, gen_fading, gen_pathloss, make_pilots,
                                shift_corr, zadoff_chu)
from async_mimo.delay import make_rng
from async_mimo.errors import ConfigurationError
from async_mimo.pulse import PulseSpec


@pytest.mark.parametrize("kind,K", [("hadamard", 1), ("hadamard", 3), ("hadamard", 8), ("zadoff-chu", 2),
                                    ("zadoff-chu", 5), ("zadoff-chu", 11)])
def test_pilots_are_orthonormal(kind, K):
    p = make_pilots(kind, K, default_pilot_length(kind, K))
    assert np.allclose(p.Phi @ p.Phi.conj().T, np.eye(K), atol=1e-12)


def test_default_lengths():
    assert [default_pilot_length("hadamard", K) for K in (1, 2, 3, 5, 8, 9)] == [1, 2, 4, 8, 8, 16]
    assert [default_pilot_length("zadoff-chu", K) for K in (1, 2, 3, 4, 6, 12)] == [1, 3, 3, 5, 7, 13]


def test_zadoff_chu_has_ideal_periodic_autocorrelation():
    z = zadoff_chu(13)
    corr = np.array([np.vdot(z, np.roll(z, s)) for s in range(13)])
    assert abs(corr[0]) == pytest.approx(13)
    assert np.allclose(corr[1:], 0, atol=1e-10)


def test_shift_corr_matches_explicit_sum():
    rng = make_rng(1)
    Phi = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
    for i in range(-7, 8):
        ref = np.zeros((3, 3), complex)
        for j in range(3):
            for l in range(3):
                ref[j, l] = sum(Phi[j, n - i] * np.conj(Phi[l, n]) for n in range(6) if 0 <= n - i < 6)
        assert np.allclose(shift_corr(Phi, i), ref)


@settings(max_examples=30, deadline=None)
@given(kind=st.sampled_from(["hadamard", "zadoff-chu"]), K=st.integers(1, 9), i=st.integers(0, 9),
       cyclic=st.booleans())
def test_shift_corr_reverses_under_conjugate_transpose(kind, K, i, cyclic):
    Phi = make_pilots(kind, K, default_pilot_length(kind, K)).Phi
    assert np.allclose(shift_corr(Phi, -i, cyclic), shift_corr(Phi, i, cyclic).conj().T, atol=1e-12)


def test_upsilon_stack_shape_and_centre():
    p = make_pilots("hadamard", 3, 4)
    ups = p.upsilon(2)
    assert ups.shape == (5, 3, 3)
    assert np.allclose(ups[2], np.eye(3))


@pytest.mark.parametrize("kwargs", [
    dict(K=0), dict(M=0), dict(pilot_kind="gold"), dict(rho_d=-1.0), dict(e=1.5), dict(K=2, beta=(1.0,)),
    dict(K=2, beta=(1.0, 0.0)), dict(K=2, e_t=(0.1, 1.0)), dict(K=3, N_p=3), dict(K=3, pilot_kind="zc", N_p=4),
    dict(N=2), dict(N=8, pulse=PulseSpec("rrc")), dict(N=8, symbol=0), dict(K=3, N=3, N_p=4),
])
def test_invalid_configurations_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        LinkConfig(**kwargs)


def test_defaults_are_resolved():
    cfg = LinkConfig(K=3, N=20, pilot_kind="zc")
    assert cfg.beta == (1.0, 1.0, 1.0)
    assert cfg.e_t == pytest.approx((0.25, 0.5, 0.75))
    assert cfg.e_s == cfg.e and cfg.N_p == 3 and cfg.symbol == 10
    assert cfg.pilot_kind == "zadoff-chu" and cfg.cyclic_pilots
    assert cfg.kappa == pytest.approx(17 / 20)
    assert cfg.rho_p == pytest.approx(3 * cfg.rho_d)


def test_zc_spacing_must_fit():
    with pytest.raises(ConfigurationError):
        make_pilots("zadoff-chu", 3, 5, spacing=3)


def test_fading_statistics():
    h = gen_fading(4, 50_000, make_rng(2))
    assert h.shape == (50_000, 4)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
    assert abs(np.mean(h**2)) < 0.01  # circular symmetry


def test_pathloss_statistics():
    rng = make_rng(3)
    beta = gen_pathloss(200_000, rng, v=1.8, sigma_db=8.0)
    assert np.all(beta > 0)
    # log-domain mean: E[10 log10 z] = 0, E[log10 (r/r_h)] from the uniform radius
    r = np.linspace(100, 1000, 200_001)
    mean_log_r = np.trapezoid(np.log10(r / 100), r) / 900
    assert np.mean(np.log10(beta)) == pytest.approx(-1.8 * mean_log_r, abs=0.01)
    with pytest.raises(ConfigurationError):
        gen_pathloss(2, rng, r_h=10, R=5)
