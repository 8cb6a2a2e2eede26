"""Monte Carlo validation, sampling-origin optimization and power-scaling sweeps."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import LinkConfig, gen_fading, gen_pathloss
from .delay import DelayDist, make_rng, quadrature_rule, sample_delays, standard_mixture
from .discretize import g_lags, synthesize_pilot_block
from .errors import ConfigurationError
from .moments import row_band, tau_breaks
from .pulse import PulseSpec
from .rates import ALL_KINDS, Analysis, analyze, asymptotic_limit, closed_form_rate, with_power
from .receivers import ReceiverKind, estimate_channels

THREADS_ENV = "ASYNC_MIMO_THREADS"
_BATCH_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run: a link, a trial count, the receivers and an optional sweep axis.

    ``M_list`` sweeps the antenna count, ``E_d_list`` the power budget of a
    power-scaling sweep and ``e_grid`` the sampling origin.
    """

    config: LinkConfig
    trials: int = 1000
    kinds: tuple = ALL_KINDS
    M_list: tuple = ()
    E_d_list: tuple = ()
    e_grid: tuple = ()
    threads: int | None = None

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigurationError(f"trials must be a positive integer, got {self.trials}")
        object.__setattr__(self, "kinds", tuple(ReceiverKind.parse(k) for k in self.kinds))
        if not self.kinds:
            raise ConfigurationError("at least one receiver kind is required")
        for name in ("M_list", "E_d_list", "e_grid"):
            grid = tuple(getattr(self, name))
            if grid and list(grid) != sorted(grid):
                raise ConfigurationError(f"{name} must be sorted")
            object.__setattr__(self, name, grid)


@dataclass(frozen=True)
class MonteCarloReport:
    """Empirical per-user rates with standard errors next to the closed form."""

    kind: ReceiverKind
    empirical: np.ndarray
    stderr: np.ndarray
    theory: np.ndarray
    trials: int
    moment_rate: np.ndarray | None = None

    @property
    def rel_err(self) -> np.ndarray:
        return np.abs(self.empirical - self.theory) / np.abs(self.theory)

    @property
    def sum_empirical(self) -> float:
        return math.fsum(self.empirical)

    @property
    def sum_theory(self) -> float:
        return math.fsum(self.theory)

    @property
    def sum_stderr(self) -> float:
        # trials are shared across users, so this is an upper bound
        return float(np.sum(self.stderr))

    @property
    def sum_rel_err(self) -> float:
        return abs(self.sum_empirical - self.sum_theory) / abs(self.sum_theory)


def seeded_pathloss(K: int, seed: int = 0) -> tuple:
    """Large-scale gains drawn from the root stream of ``seed`` (trials use child streams)."""
    return tuple(float(b) for b in gen_pathloss(K, make_rng(seed)))


def thread_count(requested: int | None = None) -> int:
    """Worker count: the explicit request, else the environment cap, else the CPU count."""
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError as exc:
                raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        else:
            requested = os.cpu_count() or 1
    return max(1, int(requested))


class _Simulator:
    """Per-realization effective coefficients of every receiver for one link."""

    def __init__(self, config: LinkConfig, analysis: Analysis, kinds):
        self.cfg = config
        self.an = analysis
        self.kinds = kinds
        self.beta_sqrt = np.sqrt(np.asarray(config.beta))
        self.Phi = config.pilots.Phi
        L, N, a = config.lag_reach, config.N, config.symbol
        self.L = L
        if ReceiverKind.MRCZF_PERFECT in kinds:
            Z = analysis.Z.Z
            self.zf_band = row_band(Z[a], N, L)
            self.eps = float(np.vdot(Z[a], Z[a]).real)
        if ReceiverKind.MRCZF_IMPERFECT in kinds:
            self.os_bands = {}
            for l, g in analysis.gamma.gamma.items():
                w_row, origins = analysis.gamma.row(l, a)
                self.os_bands[l] = [(t, row_band(w_row, N, L, offset=pos * N)) for pos, t in enumerate(origins)]
            self.v = analysis.table.v
            self.os_origins = sorted({t for bands in self.os_bands.values() for t, _ in bands})

    def draw(self, trial: int):
        cfg = self.cfg
        rng = make_rng(cfg.seed, trial)
        tau = sample_delays(cfg.delays, (cfg.M, cfg.K), rng)
        H = gen_fading(cfg.K, cfg.M, rng)
        shape = (cfg.M, cfg.N_p)
        pilot_noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)
        return tau, H, pilot_noise

    def _lagged(self, C, tau, e):
        return C[..., None] * g_lags(self.cfg.pulse, e, tau)

    @staticmethod
    def _coeffs(weights, A):
        """t[b, l, k, i] = (1/M) sum_m conj(w_lm) A[b, m, k, i] with A = c_km g(e + T + i - tau_km)."""
        B, M, K, J = A.shape
        out = np.swapaxes(weights.conj(), 1, 2) @ A.reshape(B, M, K * J)
        return out.reshape(B, K, K, J) / M

    def realize(self, trials: range) -> dict:
        """Effective coefficients of the detected symbol for each receiver.

        Returns ``{kind: (coef, pos, noise)}`` where ``coef[b, l, k, x]`` runs over
        lags (plain MRC) or output columns (zero forcing), ``pos`` is the
        position of the user's own coefficient on that axis and ``noise[b, l]``
        the conditional noise variance.
        """
        cfg = self.cfg
        draws = [self.draw(t) for t in trials]
        tau = np.stack([d[0] for d in draws])
        C = np.stack([d[1] for d in draws]) * self.beta_sqrt
        M, L, a = cfg.M, self.L, cfg.symbol
        out = {}
        perfect = any(k.perfect_csi for k in self.kinds)
        imperfect = any(not k.perfect_csi for k in self.kinds)
        if imperfect:
            Yp = synthesize_pilot_block(cfg.pulse, cfg.e_s, cfg.rho_p, C, tau, self.Phi, cfg.cyclic_pilots)
            Yp = Yp + np.stack([d[2] for d in draws])
            C_hat = estimate_channels(Yp, self.Phi, cfg.rho_p)
            scale_hat = np.sum(np.abs(C_hat) ** 2, axis=1) / M**2  # (B, K)
        if perfect or ReceiverKind.MRC_IMPERFECT in self.kinds:
            A = self._lagged(C, tau, cfg.e)
        if perfect:
            scale = np.sum(np.abs(C) ** 2, axis=1) / M**2
            t = self._coeffs(C, A)
            if ReceiverKind.MRC_PERFECT in self.kinds:
                out[ReceiverKind.MRC_PERFECT] = (t, L, scale)
            if ReceiverKind.MRCZF_PERFECT in self.kinds:
                out[ReceiverKind.MRCZF_PERFECT] = (t @ self.zf_band.T, a, self.eps * scale)
        if ReceiverKind.MRC_IMPERFECT in self.kinds:
            out[ReceiverKind.MRC_IMPERFECT] = (self._coeffs(C_hat, A), L, scale_hat)
        if ReceiverKind.MRCZF_IMPERFECT in self.kinds:
            per_origin = {t: self._coeffs(C_hat, self._lagged(C, tau, cfg.e_t[t])) for t in self.os_origins}
            rows = np.stack([sum(per_origin[t][:, l] @ band.T for t, band in self.os_bands[l])
                             for l in range(cfg.K)], axis=1)  # (B, K, K, N)
            out[ReceiverKind.MRCZF_IMPERFECT] = (rows, a, self.v * scale_hat)
        return out


def _genie_rates(coef, pos, noise, rho, kappa):
    """kappa log2(1 + SINR) per trial and user with the realized coefficients known."""
    K = coef.shape[1]
    idx = np.arange(K)
    p2 = np.abs(coef) ** 2
    sig = p2[:, idx, idx, pos]
    total = p2.sum(axis=(2, 3))
    return kappa * np.log2(1 + rho * sig / (rho * (total - sig) + noise))


def _batch_size(config: LinkConfig, kinds) -> int:
    per_trial = config.M * config.K * (2 * config.lag_reach + 1) * (1 + config.K)
    return max(1, _BATCH_ELEMENTS // per_trial)


def run_monte_carlo(plan: ExperimentPlan, analysis: Analysis | None = None) -> dict:
    """Average the per-realization rate log2(1 + SINR) over independent trials.

    Each trial draws delays, fading and pilot noise from its own substream
    (seed, trial index) and the receiver's effective coefficients for the
    detected symbol are formed exactly, with the data-noise variance they
    imply.  Per-trial results land in fixed slots and are reduced with
    compensated summation, so the outcome does not depend on the thread
    count.  Returns ``{kind: MonteCarloReport}``.

    The report also carries ``moment_rate``: the worst-case-noise rate
    evaluated from the empirical first and second moments of the simulated
    coefficients, i.e. a sampled version of what the closed forms compute.
    """
    cfg = plan.config
    kinds = plan.kinds
    analysis = analyze(cfg, kinds) if analysis is None else analysis
    sim = _Simulator(cfg, analysis, kinds)
    n = int(plan.trials)
    kappa = {k: 1.0 if k.perfect_csi else cfg.kappa for k in kinds}
    values = {k: np.empty((n, cfg.K)) for k in kinds}
    size = _batch_size(cfg, kinds)
    chunks = [range(s, min(n, s + size)) for s in range(0, n, size)]
    sums = [None] * len(chunks)
    pos = {}

    def work(job):
        j, chunk = job
        res = sim.realize(chunk)
        part = {}
        for k, (coef, p, noise) in res.items():
            values[k][chunk.start : chunk.stop] = _genie_rates(coef, p, noise, cfg.rho_d, kappa[k])
            part[k] = (coef.sum(axis=0), (np.abs(coef) ** 2).sum(axis=0), noise.sum(axis=0))
            pos[k] = p
        sums[j] = part

    jobs = list(enumerate(chunks))
    workers = min(thread_count(plan.threads), len(chunks))
    if workers == 1:
        for job in jobs:
            work(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, jobs))

    reports = {}
    idx = np.arange(cfg.K)
    for k in kinds:
        v = values[k]
        mean = np.array([math.fsum(col) / n for col in v.T])
        if n > 1:
            var = np.array([math.fsum((col - m) ** 2) / (n - 1) for col, m in zip(v.T, mean)])
            stderr = np.sqrt(var / n)
        else:
            stderr = np.full(cfg.K, np.nan)
        # chunk sums are combined in chunk order, independent of the thread count
        m1 = sum(part[k][0] for part in sums) / n
        m2 = sum(part[k][1] for part in sums) / n
        mn = sum(part[k][2] for part in sums) / n
        sig = cfg.rho_d * np.abs(m1[idx, idx, pos[k]]) ** 2
        den = cfg.rho_d * m2.sum(axis=(1, 2)) - sig + mn
        moment_rate = kappa[k] * np.log2(1 + sig / den)
        theory = closed_form_rate(k, cfg, analysis).rates
        reports[k] = MonteCarloReport(kind=k, empirical=mean, stderr=stderr, theory=theory, trials=n,
                                      moment_rate=moment_rate)
    return reports


# ---------------------------------------------------------------- sampling origin


@dataclass(frozen=True)
class OriginSearch:
    """Result of a sampling-origin search: the argmax and the objective on the grid."""

    kind: ReceiverKind
    K: int
    e_star: float
    value: float
    grid: np.ndarray
    curve: np.ndarray


def mrc_saturation_sir(spec: PulseSpec, dist: DelayDist, e: float) -> float:
    """E[g_0]^2 / sum_{i != 0} E[g_i]^2: the large-array SIR of MRC with known channels."""
    tau, w = quadrature_rule(dist, tau_breaks(spec, (e,)), order=3)
    Eg = w @ g_lags(spec, e, tau)
    L = spec.lag_reach
    s = Eg[L] ** 2
    interf = float(np.sum(Eg**2) - s)
    return s / interf if interf > 0 else np.inf


def estimated_saturation_sum(K: int, spec: PulseSpec, dist: DelayDist, e: float,
                             pilot_kind: str = "hadamard") -> float:
    """Sum over users of log2(1 + SIR_l) in the large-array limit of MRC with estimated channels.

    All users have unit path loss and pilots are sampled at the data origin.
    """
    L = spec.lag_reach
    cfg = LinkConfig(K=K, M=1, N=max(2 * L + 1, 2 * L + K + 1, 64), e=e, pilot_kind=pilot_kind,
                     pulse=spec, delays=dist)
    # kappa and N_p do not change the argmax; report the plain SIR sum
    rates = asymptotic_limit(ReceiverKind.MRC_IMPERFECT, cfg, analyze(cfg, (ReceiverKind.MRC_IMPERFECT,)))
    return float(np.sum(rates) / cfg.kappa)


def optimize_sampling_origin(kind, K: int, spec: PulseSpec | None = None, dist: DelayDist | None = None,
                             grid_step: float = 0.005, pilot_kind: str = "hadamard") -> OriginSearch:
    """Maximize the receiver's saturation SIR over the sampling origin e in [0, 1].

    A grid search locates the best cell, then a bounded scalar search refines
    it within one grid step on either side.  ``dist`` defaults to the standard
    K-user mixture.
    """
    kind = ReceiverKind.parse(kind)
    if not 0 < grid_step <= 0.01:
        raise ConfigurationError("grid_step must lie in (0, 0.01]")
    spec = PulseSpec() if spec is None else spec
    dist = standard_mixture(K) if dist is None else dist
    if kind is ReceiverKind.MRC_PERFECT:
        def objective(e):
            return mrc_saturation_sir(spec, dist, e)
    elif kind is ReceiverKind.MRC_IMPERFECT:
        def objective(e):
            return estimated_saturation_sum(K, spec, dist, e, pilot_kind)
    else:
        raise ConfigurationError("the sampling origin is optimized for the plain MRC receivers only")

    grid = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
    curve = np.array([objective(e) for e in grid])
    finite = np.where(np.isfinite(curve), curve, np.inf)
    if np.isinf(finite).any():
        j = int(np.argmax(np.isinf(finite)))
        return OriginSearch(kind, K, float(grid[j]), float(np.inf), grid, curve)
    j = int(np.argmax(curve))
    best_e, best = float(grid[j]), float(curve[j])
    lo, hi = max(0.0, best_e - grid_step), min(1.0, best_e + grid_step)
    res = minimize_scalar(lambda e: -objective(e), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-6})
    if res.success and -res.fun > best:
        best_e, best = float(res.x), float(-res.fun)
    return OriginSearch(kind, K, best_e, best, grid, curve)


# ---------------------------------------------------------------- power scaling


SCALE_EXPONENT = {"power_over_M": 1.0, "power_over_sqrtM": 0.5}


@dataclass(frozen=True)
class ScalingCurve:
    """Closed-form (and optionally simulated) rates along an antenna sweep."""

    kind: ReceiverKind
    scaling: str
    E_d: float
    M: np.ndarray
    rates: np.ndarray  # (len(M), K)
    asymptote: np.ndarray  # (K,)
    empirical: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def sum_rates(self) -> np.ndarray:
        return self.rates.sum(axis=1)


def power_scaling_sweep(kind, E_d: float, M_list, scaling: str = "power_over_M",
                        config: LinkConfig | None = None, trials: int = 0) -> ScalingCurve:
    """Rates with rho_d = E_d / M (or E_d / sqrt(M)) along ``M_list``.

    The moment tables do not depend on M or the power, so they are computed
    once.  The large-array limit from the rate engine is returned for overlay;
    with ``trials`` > 0 each point is also simulated.
    """
    kind = ReceiverKind.parse(kind)
    if scaling not in SCALE_EXPONENT:
        raise ConfigurationError(f"unknown scaling {scaling!r}")
    M_list = [int(m) for m in M_list]
    if not M_list or M_list != sorted(M_list):
        raise ConfigurationError("M_list must be nonempty and sorted")
    if E_d < 0:
        raise ConfigurationError("E_d must be nonnegative")
    config = LinkConfig() if config is None else config
    K = config.K
    if E_d == 0:
        zeros = np.zeros((len(M_list), K))
        return ScalingCurve(kind, scaling, 0.0, np.array(M_list), zeros, np.zeros(K),
                            zeros.copy() if trials else None)
    analysis = analyze(with_power(config, E_d), (kind,))
    rates = np.empty((len(M_list), K))
    emp = np.empty((len(M_list), K)) if trials else None
    for r, M in enumerate(M_list):
        cfg = with_power(config, E_d / M ** SCALE_EXPONENT[scaling], M)
        rates[r] = closed_form_rate(kind, cfg, analysis).rates
        if trials:
            emp[r] = run_monte_carlo(ExperimentPlan(cfg, trials, (kind,)), analysis)[kind].empirical
    asym = asymptotic_limit(kind, replace(config, rho_d=E_d), analysis, scaling=scaling, E_d=E_d)
    return ScalingCurve(kind, scaling, float(E_d), np.array(M_list), rates, np.asarray(asym), emp)
