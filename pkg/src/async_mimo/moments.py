"""Delay-averaged moment tables feeding the closed-form rate engine.

Every random quantity here is a polynomial in the lag profile
g(e + T + i - tau), which is piecewise linear in tau between the points where
the argument crosses a knot of g.  Splitting the delay integrals at those
crossings and using 3-point Gauss-Legendre per piece therefore integrates all
moments up to fourth order exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import LinkConfig
from .delay import DelayDist, quadrature_rule
from .discretize import g_lags, noise_cov_oversampled
from .pulse import PulseSpec


def tau_breaks(spec: PulseSpec, origins) -> np.ndarray:
    """Delays at which some lag profile g(o + T + i - tau) crosses a knot of g."""
    knots = spec.conv.knots
    pts = np.concatenate([np.mod(o - knots, 1.0) for o in np.atleast_1d(origins)])
    return np.unique(np.round(pts, 12))


def delay_nodes(spec: PulseSpec, dist: DelayDist, origins) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights over ``dist``, exact for the lag profiles at ``origins``."""
    return quadrature_rule(dist, tau_breaks(spec, origins), order=3)


def leakage_at(config: LinkConfig, tau: np.ndarray) -> np.ndarray:
    """lambda[..., l, k] = sum_i g(e_s + T + i - tau_k) Upsilon^i(k, l) at the given delays."""
    L = config.lag_reach
    ups = config.pilots.upsilon(L, cyclic=config.cyclic_pilots)  # [i, j, l]
    gs = g_lags(config.pulse, config.e_s, tau)
    return np.einsum("...i,ikl->...lk", gs, ups)


def row_band(row: np.ndarray, N: int, L: int, offset: int = 0) -> np.ndarray:
    """B[n, L + j] = row[offset + n + j] for 0 <= n + j < N, else 0.

    Turns a detector row into a map from lag profiles to output columns:
    sum_r row[r] g_{r - n} = (B @ g)[n].
    """
    B = np.zeros((N, 2 * L + 1), dtype=row.dtype)
    for j in range(-L, L + 1):
        lo, hi = max(0, -j), min(N, N - j)
        B[lo:hi, L + j] = row[offset + lo + j : offset + hi + j]
    return B


@dataclass(frozen=True)
class MomentTable:
    """Delay-averaged statistics of the sampled pulse and the pilot leakage.

    Lag-indexed arrays run over ``lags = -L..L``.  Row tables of the zero-forcing
    receivers run over output columns n = 0..N-1 for the detected symbol ``a``.

    gamma1[l, k, i]    E[conj(lambda_lk) g_i]           (same delay draw)
    gamma2[l, k, i]    E[|lambda_lk|^2 g_i^2]
    lam2[l, k]         E[|lambda_lk|^2]
    gamma1_t[l,k,t,i]  E[conj(lambda_lk) g_i at origin e_t]
    xi2[n]             E[(Z G)(a, n)^2];  eps = (Z Z^H)(a, a)
    ghat1[l, k, n]     E[conj(lambda_lk) Ghat_l(a, n)]
    ghat2[l, k, n]     E[|lambda_lk|^2 |Ghat_l(a, n)|^2]
    u[l, n]            E[|Ghat_l(a, n)|^2];  v[l] = (W_ll Sigma W_ll^H)(a, a)
    """

    lags: np.ndarray
    a: int
    N: int
    Eg: np.ndarray
    Eg2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    lam2: np.ndarray
    zf_mean: np.ndarray | None = None
    xi2: np.ndarray | None = None
    eps: float | None = None
    gamma1_t: np.ndarray | None = None
    ghat1: np.ndarray | None = None
    ghat2: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None

    @property
    def reach(self) -> int:
        return (len(self.lags) - 1) // 2

    def lag(self, i: int) -> int:
        """Array position of lag i."""
        return self.reach + i


def base_moments(config: LinkConfig) -> MomentTable:
    """Plain-MRC tables: E[g_i^n], leakage moments and gamma tables."""
    spec, L = config.pulse, config.lag_reach
    tau, w = delay_nodes(spec, config.delays, (config.e, config.e_s))
    ge = g_lags(spec, config.e, tau)  # (P, 2L+1)
    lam = leakage_at(config, tau)  # (P, K, K)
    lam_abs2 = np.abs(lam) ** 2
    gamma1 = np.einsum("p,plk,pi->lki", w, lam.conj(), ge)
    gamma2 = np.einsum("p,plk,pi->lki", w, lam_abs2, ge**2)
    if not np.iscomplexobj(config.pilots.Phi):
        gamma1 = gamma1.real
    return MomentTable(
        lags=np.arange(-L, L + 1),
        a=config.symbol,
        N=config.N,
        Eg=w @ ge,
        Eg2=w @ ge**2,
        gamma1=gamma1,
        gamma2=gamma2,
        lam2=np.einsum("p,plk->lk", w, lam_abs2),
    )


def zf_perfect_moments(config: LinkConfig, table: MomentTable, Z: np.ndarray) -> MomentTable:
    """Row tables of Z G for the detected symbol: mean row, xi'' row and eps."""
    spec, L, N, a = config.pulse, config.lag_reach, config.N, config.symbol
    B = row_band(Z[a], N, L)
    tau, w = delay_nodes(spec, config.delays, (config.e,))
    rows = g_lags(spec, config.e, tau) @ B.T  # (P, N): (Z G(tau))(a, n)
    return replace(
        table,
        zf_mean=B @ table.Eg,
        xi2=w @ rows**2,
        eps=float(np.vdot(Z[a], Z[a]).real),
    )


def oversampled_gamma(config: LinkConfig) -> np.ndarray:
    """gamma1_t[l, k, t, i] = E[conj(lambda_lk) g(e_t + T + i - tau)]."""
    spec = config.pulse
    tau, w = delay_nodes(spec, config.delays, (config.e_s, *config.e_t))
    lam = leakage_at(config, tau)
    gt = np.stack([g_lags(spec, et, tau) for et in config.e_t], axis=1)  # (P, T, 2L+1)
    out = np.einsum("p,plk,pti->lkti", w, lam.conj(), gt)
    return out if np.iscomplexobj(out) and np.iscomplexobj(config.pilots.Phi) else out.real


def zf_imperfect_moments(config: LinkConfig, table: MomentTable, rows: dict) -> MomentTable:
    """Row tables for the oversampled detector.

    ``rows[l]`` is ``(w_row, origins)``: row a of W_ll over the stacked samples
    of the given origin indices.
    """
    spec, L, N, K = config.pulse, config.lag_reach, config.N, config.K
    tau, w = delay_nodes(spec, config.delays, (config.e_s, *config.e_t))
    lam = leakage_at(config, tau)
    lam_abs2 = np.abs(lam) ** 2
    dtype = complex if np.iscomplexobj(config.pilots.Phi) else float
    ghat1 = np.zeros((K, K, N), dtype)
    ghat2 = np.zeros((K, K, N))
    u = np.zeros((K, N))
    v = np.zeros(K)
    for l in range(K):
        w_row, origins = rows[l]
        ghat = 0
        for pos, t in enumerate(origins):
            B = row_band(w_row, N, L, offset=pos * N)
            ghat = ghat + g_lags(spec, config.e_t[t], tau) @ B.T  # (P, N)
        g_abs2 = np.abs(ghat) ** 2
        ghat1[l] = np.einsum("p,pk,pn->kn", w, lam[:, l, :].conj(), ghat)
        ghat2[l] = np.einsum("p,pk,pn->kn", w, lam_abs2[:, l, :], g_abs2)
        u[l] = w @ g_abs2
        cov = noise_cov_oversampled(spec, [config.e_t[t] for t in origins], N)
        v[l] = float(np.vdot(w_row, cov @ w_row).real)
    return replace(table, gamma1_t=oversampled_gamma(config), ghat1=ghat1, ghat2=ghat2, u=u, v=v)
