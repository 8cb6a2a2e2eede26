"""Closed-form achievable rates of the four receivers.

Each receiver's effective coefficient for symbol a is an average over M
antennas, T_lk(a, n) = (1/M) sum_m X_m, of i.i.d. per-antenna terms.  Its
second moment is therefore E|X|^2 / M + (1 - 1/M) |E X|^2, and the rate follows
from the worst-case-noise bound

    R_l = kappa log2(1 + rho |E T_ll(a,a)|^2 /
                     (rho sum_{k,n} E|T_lk(a,n)|^2 - rho |E T_ll(a,a)|^2 + sigma^2)).

``second_order_stats`` produces the per-antenna moments from a MomentTable and
``rate_from_stats`` evaluates the bound.  ``theorem_rate`` evaluates the
simplified closed forms independently, as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import LinkConfig
from .errors import ConfigurationError, InternalError
from .moments import MomentTable, base_moments, oversampled_gamma, zf_imperfect_moments, zf_perfect_moments
from .receivers import ReceiverKind, build_all_gamma, build_Z

ALL_KINDS = tuple(ReceiverKind)


@dataclass(frozen=True)
class Analysis:
    """Moment tables together with the zero-forcing matrices they were built from."""

    config: LinkConfig
    table: MomentTable
    Z: object = None
    gamma: object = None


def analyze(config: LinkConfig, kinds=ALL_KINDS) -> Analysis:
    """Compute every table the requested receivers need."""
    kinds = {ReceiverKind.parse(k) for k in kinds}
    table = base_moments(config)
    Z = gamma = None
    if ReceiverKind.MRCZF_PERFECT in kinds:
        Z = build_Z(table, config.N)
        table = zf_perfect_moments(config, table, Z.Z)
    if ReceiverKind.MRCZF_IMPERFECT in kinds:
        gamma = build_all_gamma(oversampled_gamma(config), config.N)
        rows = {l: gamma.row(l, config.symbol) for l in range(config.K)}
        table = zf_imperfect_moments(config, table, rows)
    return Analysis(config=config, table=table, Z=Z, gamma=gamma)


@dataclass(frozen=True)
class SecondOrderStats:
    """Per-antenna moments of the effective coefficients for detected symbol a.

    ``X1[l, k, n]`` is E[X] and ``X2[l, k, n]`` is E|X|^2 for the per-antenna
    term of T_lk(a, n); ``noise[l]`` is the effective noise variance.
    """

    kind: ReceiverKind
    M: int
    rho_d: float
    kappa: float
    a: int
    X1: np.ndarray
    X2: np.ndarray
    noise: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.X1

    @property
    def second(self) -> np.ndarray:
        return self.X2 / self.M + (1.0 - 1.0 / self.M) * np.abs(self.X1) ** 2


@dataclass(frozen=True)
class RateReport:
    kind: ReceiverKind
    rates: np.ndarray
    signal: np.ndarray
    isi: np.ndarray
    iui: np.ndarray
    noise: np.ndarray
    kappa: float
    bound: float | None = None

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def sinr(self) -> np.ndarray:
        return self.signal / (self.isi + self.iui + self.noise)


def _lag_rows(values: np.ndarray, a: int, N: int) -> np.ndarray:
    """Place lag-indexed values (..., 2L+1) at columns n = a - i of an (..., N) row."""
    L = (values.shape[-1] - 1) // 2
    out = np.zeros(values.shape[:-1] + (N,), dtype=values.dtype)
    for idx, i in enumerate(range(-L, L + 1)):
        out[..., a - i] = values[..., idx]
    return out


def _leak_power(beta: np.ndarray, lam2: np.ndarray) -> np.ndarray:
    """S[l, k] = sum_{j != k} beta_j lam2[l, j]."""
    total = lam2 @ beta
    return total[:, None] - lam2 * beta[None, :]


def second_order_stats(kind, config: LinkConfig, moments) -> SecondOrderStats:
    """Per-antenna coefficient moments and effective noise for one receiver."""
    kind = ReceiverKind.parse(kind)
    t = moments.table if isinstance(moments, Analysis) else moments
    K, N, a, M = config.K, config.N, config.symbol, config.M
    beta = np.asarray(config.beta)
    rho, rho_p = config.rho_d, config.rho_p
    eye = np.eye(K)
    bb = np.outer(beta, beta)

    if kind is ReceiverKind.MRC_PERFECT:
        X1 = _lag_rows(np.einsum("l,lk,i->lki", beta, eye, t.Eg), a, N)
        X2 = _lag_rows(((1 + eye) * bb)[..., None] * t.Eg2, a, N)
        noise = beta / M
    elif kind is ReceiverKind.MRC_IMPERFECT:
        X1 = _lag_rows(beta[None, :, None] * t.gamma1, a, N)
        leak = _leak_power(beta, t.lam2)
        X2 = _lag_rows(2 * (beta**2)[None, :, None] * t.gamma2
                       + (leak * beta[None, :])[..., None] * t.Eg2, a, N)
        noise = (t.lam2 @ beta + 1 / rho_p) / M + rho / (rho_p * M) * beta.sum() * t.Eg2.sum()
    elif kind is ReceiverKind.MRCZF_PERFECT:
        if t.xi2 is None:
            raise ConfigurationError("moment table lacks the zero-forcing rows")
        X1 = np.einsum("l,lk,n->lkn", beta, eye, t.zf_mean)
        X2 = ((1 + eye) * bb)[..., None] * t.xi2
        noise = beta * t.eps / M
    else:
        if t.ghat2 is None:
            raise ConfigurationError("moment table lacks the oversampled zero-forcing rows")
        X1 = beta[None, :, None] * t.ghat1
        leak = _leak_power(beta, t.lam2)
        X2 = 2 * (beta**2)[None, :, None] * t.ghat2 + (leak * beta[None, :])[..., None] * t.u[:, None, :]
        noise = (t.lam2 @ beta + 1 / rho_p) * t.v / M + rho / (rho_p * M) * beta.sum() * t.u.sum(axis=1)
    kappa = 1.0 if kind.perfect_csi else config.kappa
    return SecondOrderStats(kind=kind, M=M, rho_d=rho, kappa=kappa, a=a, X1=X1, X2=X2,
                            noise=np.asarray(noise, dtype=float))


def rate_from_stats(stats: SecondOrderStats, bound: bool = False) -> RateReport:
    """Evaluate the worst-case-noise rate bound for every user."""
    K = stats.X1.shape[0]
    a, rho = stats.a, stats.rho_d
    second = stats.second
    idx = np.arange(K)
    signal = rho * np.abs(stats.X1[idx, idx, a]) ** 2
    own = rho * second[idx, idx].sum(axis=-1) - signal
    iui = rho * second.sum(axis=(1, 2)) - rho * second[idx, idx].sum(axis=-1)
    if np.any(own < -1e-9 * signal) or np.any(stats.noise <= 0):
        raise InternalError("negative interference or noise: the second-order statistics are inconsistent")
    isi = np.clip(own, 0.0, None)
    den = isi + iui + stats.noise
    rates = stats.kappa * np.log2(1.0 + signal / den)
    b = approx_error_bound(stats) if bound else None
    return RateReport(kind=stats.kind, rates=rates, signal=signal, isi=isi, iui=iui,
                      noise=stats.noise.copy(), kappa=stats.kappa, bound=b)


def closed_form_rate(kind, config: LinkConfig, moments=None, bound: bool = False) -> RateReport:
    moments = analyze(config, (kind,)) if moments is None else moments
    return rate_from_stats(second_order_stats(kind, config, moments), bound=bound)


def theorem_rate(theorem: int, config: LinkConfig, moments) -> RateReport:
    """Evaluate the simplified closed forms (numbered by receiver: 1 MRC, 2 MRC with
    estimated channels, 3 MRC-ZF, 4 MRC-ZF with estimated channels)."""
    t = moments.table if isinstance(moments, Analysis) else moments
    K, M = config.K, config.M
    rho, rho_p = config.rho_d, config.rho_p
    beta = np.asarray(config.beta)
    sig = np.zeros(K)
    isi = np.zeros(K)
    iui = np.zeros(K)
    noise = np.zeros(K)
    L = t.reach
    not0 = np.ones(2 * L + 1)
    not0[L] = 0.0
    for l in range(K):
        bl = beta[l]
        others = beta.sum() - bl
        if theorem == 1:
            sig[l] = rho * bl * M * t.Eg[L] ** 2
            iui[l] = rho * t.Eg2.sum() * others
            isi[l] = rho * bl * np.sum(2 * t.Eg2 + (M * not0 - 1) * t.Eg**2)
            noise[l] = 1.0
        elif theorem == 2:
            g1 = np.abs(t.gamma1[l]) ** 2  # [k, i]
            g2 = t.gamma2[l]
            leak_l = lambda k: sum(beta[j] * t.lam2[l, j] for j in range(K) if j != k)  # noqa: E731
            sig[l] = rho * bl**2 * M * g1[l, L]
            isi[l] = rho * bl**2 * np.sum(2 * g2[l] + (M * not0 - 1) * g1[l]) \
                + rho * bl * leak_l(l) * t.Eg2.sum()
            iui[l] = sum(rho * beta[k] ** 2 * np.sum(2 * g2[k] + (M - 1) * g1[k])
                         + rho * beta[k] * leak_l(k) * t.Eg2.sum() for k in range(K) if k != l)
            noise[l] = rho / rho_p * beta.sum() * t.Eg2.sum() + t.lam2[l] @ beta + 1 / rho_p
        elif theorem == 3:
            xs = t.xi2.sum()
            sig[l] = rho * bl * M
            iui[l] = rho * xs * others
            isi[l] = rho * bl * (2 * xs - 1)
            noise[l] = t.eps
        elif theorem == 4:
            gh = t.ghat2[l].sum(axis=-1)  # [k]
            us = t.u[l].sum()
            leak_l = lambda k: sum(beta[j] * t.lam2[l, j] for j in range(K) if j != k)  # noqa: E731
            sig[l] = rho * bl**2 * M
            isi[l] = rho * bl**2 * (2 * gh[l] - 1) + rho * bl * leak_l(l) * us
            iui[l] = sum(rho * beta[k] ** 2 * 2 * gh[k] + rho * beta[k] * leak_l(k) * us
                         for k in range(K) if k != l)
            noise[l] = rho / rho_p * us * beta.sum() + (t.lam2[l] @ beta + 1 / rho_p) * t.v[l]
        else:
            raise ConfigurationError(f"unknown theorem {theorem}")
    kappa = 1.0 if theorem in (1, 3) else config.kappa
    rates = kappa * np.log2(1.0 + sig / (isi + iui + noise))
    kind = list(ReceiverKind)[theorem - 1]
    # the simplified forms are normalised by M / beta_l; report them in that scale
    return RateReport(kind=kind, rates=rates, signal=sig, isi=isi, iui=iui, noise=noise, kappa=kappa)


SCALINGS = ("fixed_power", "power_over_M", "power_over_sqrtM")
LIMITS = ("M_to_inf", "M_and_power_to_inf")


def asymptotic_limit(kind, config: LinkConfig, moments, scaling: str = "fixed_power",
                     limit: str = "M_to_inf", E_d: float | None = None, form: str = "derived") -> np.ndarray:
    """Large-array limits of the per-user rate.

    ``fixed_power`` keeps rho_d from the config; the two scaled laws use
    rho_d = E_d / M or E_d / sqrt(M).  With ``M_and_power_to_inf`` the power
    grows as well and the result is the interference-limited saturation
    value.  Zero-forcing receivers are unbounded in the fixed-power and
    saturation limits and return ``inf``.  For the oversampled receiver under
    1/sqrt(M) scaling, ``form="stated"`` returns kappa log2(1 + E_d beta_l / v_l)
    instead of the value the rate expression actually tends to.
    """
    kind = ReceiverKind.parse(kind)
    if scaling not in SCALINGS or limit not in LIMITS:
        raise ConfigurationError(f"unsupported scaling {scaling!r} or limit {limit!r}")
    t = moments.table if isinstance(moments, Analysis) else moments
    beta = np.asarray(config.beta)
    K, L = config.K, t.reach
    if E_d is None:
        E_d = config.rho_d
    saturate = limit == "M_and_power_to_inf" or scaling == "fixed_power"

    if kind is ReceiverKind.MRC_PERFECT:
        if scaling == "power_over_sqrtM":
            raise ConfigurationError("1/sqrt(M) scaling is analysed for estimated channels only")
        s = t.Eg[L] ** 2
        isi = np.sum(t.Eg**2) - s
        if saturate:
            return np.full(K, np.log2(1 + s / isi) if isi > 0 else np.inf)
        return np.log2(1 + E_d * beta * s / (E_d * beta * isi + 1))

    if kind is ReceiverKind.MRC_IMPERFECT:
        if scaling == "power_over_M":
            raise ConfigurationError("1/M scaling is analysed for perfect channel knowledge only")
        g1 = np.abs(t.gamma1) ** 2  # [l, k, i]
        out = np.empty(K)
        for l in range(K):
            s = beta[l] ** 2 * g1[l, l, L]
            interf = beta[l] ** 2 * (g1[l, l].sum() - g1[l, l, L]) + sum(
                beta[k] ** 2 * g1[l, k].sum() for k in range(K) if k != l)
            if saturate:
                out[l] = np.log2(1 + s / interf) if interf > 0 else np.inf
            else:
                c = config.N_p * E_d**2
                out[l] = np.log2(1 + c * s / (c * interf + 1))
        return config.kappa * out

    if saturate:
        return np.full(K, np.inf)
    if kind is ReceiverKind.MRCZF_PERFECT:
        if scaling != "power_over_M":
            raise ConfigurationError("MRC-ZF with perfect channels is analysed under 1/M scaling")
        return np.log2(1 + E_d * beta / t.eps)
    if scaling != "power_over_sqrtM":
        raise ConfigurationError("MRC-ZF with estimated channels is analysed under 1/sqrt(M) scaling")
    if form == "stated":
        return config.kappa * np.log2(1 + E_d * beta / t.v)
    return config.kappa * np.log2(1 + config.N_p * E_d**2 * beta**2 / t.v)


def sync_rate(kind, config: LinkConfig) -> np.ndarray:
    """Classical rates for perfectly synchronised reception (Nyquist sampling, no delays)."""
    kind = ReceiverKind.parse(kind)
    beta = np.asarray(config.beta)
    rho, M = config.rho_d, config.M
    if kind.perfect_csi:
        return np.log2(1 + rho * M * beta / (rho * beta.sum() + 1))
    rho_p = config.rho_p
    return config.kappa * np.log2(1 + rho_p * rho * M * beta**2 / ((rho_p * beta + 1) * (rho * beta.sum() + 1)))


def approx_error_bound(stats: SecondOrderStats, M: int | None = None, c: float = 1.0) -> float:
    """Bound 2 log2(1 + c sigma^2 / (M mu^2)) on the gap between the averaged and approximate rates.

    mu is the smallest squared mean of the users' own coefficients and sigma^2
    the largest 4 mu_lk^2 var_lk over all per-antenna terms.
    """
    M = stats.M if M is None else M
    K = stats.X1.shape[0]
    idx = np.arange(K)
    mu = float(np.min(np.abs(stats.X1[idx, idx, stats.a]) ** 2))
    if mu <= 0:
        raise ConfigurationError("the bound is undefined when a user's mean coefficient vanishes")
    var = np.clip(stats.X2 - np.abs(stats.X1) ** 2, 0.0, None)
    sigma2 = float(np.max(4 * np.abs(stats.X1) ** 2 * var))
    return 2 * np.log2(1 + c * sigma2 / (M * mu**2))


def with_power(config: LinkConfig, rho_d: float, M: int | None = None) -> LinkConfig:
    """Copy of ``config`` with a new data power (and optionally antenna count)."""
    return replace(config, rho_d=rho_d, M=config.M if M is None else M)


def lemma_terms(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Both sides of the Jensen-type gap bound for positive samples x, y.

    Returns ``(gap, bound)`` with gap = |E log2(1 + X/Y) - log2(1 + E X / E Y)| and
    bound = log2(E[X+Y] E[1/(X+Y)] E[Y] E[1/Y]), expectations taken over the
    empirical distribution of the samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or np.any(x <= 0) or np.any(y <= 0):
        raise ConfigurationError("lemma_terms needs equally shaped positive samples")
    s = x + y
    gap = abs(np.mean(np.log2(1 + x / y)) - np.log2(1 + x.mean() / y.mean()))
    bound = np.log2(s.mean() * np.mean(1 / s) * y.mean() * np.mean(1 / y))
    return float(gap), float(bound)
