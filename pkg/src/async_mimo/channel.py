"""Link configuration, fading and path-loss draws, pilot matrices and their shift correlations."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import hadamard

from .delay import DelayDist, standard_mixture
from .errors import ConfigurationError
from .pulse import PulseSpec

PILOT_KINDS = ("hadamard", "zadoff-chu")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, int(n**0.5) + 1))


def default_pilot_length(kind: str, K: int) -> int:
    """Shortest admissible pilot length for K users."""
    if kind == "hadamard":
        return 1 << max(0, (K - 1).bit_length())
    if K == 1:
        return 1
    n = max(3, K)
    while not _is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class LinkConfig:
    """Everything that defines one uplink scenario.

    Unset optional fields are resolved on construction: ``beta`` to all ones,
    ``e_t`` to t/(K+1) for t = 1..K, ``e_s`` to ``e``, ``N_p`` to the shortest
    admissible pilot length, ``delays`` to the standard mixture for K users and
    ``symbol`` (the detected symbol index) to the frame midpoint.
    """

    K: int = 5
    M: int = 64
    N: int = 64
    rho_d: float = 100.0
    beta: tuple | None = None
    e: float = 0.5
    e_t: tuple | None = None
    e_s: float | None = None
    pilot_kind: str = "hadamard"
    N_p: int | None = None
    zc_cyclic_guard: bool = True
    zc_spacing: int | None = None
    pulse: PulseSpec = field(default_factory=PulseSpec)
    delays: DelayDist | None = None
    symbol: int | None = None
    seed: int = 0

    def __post_init__(self):
        put = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        K = self.K
        if int(K) != K or K < 1:
            raise ConfigurationError(f"K must be a positive integer, got {K}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigurationError(f"M must be a positive integer, got {self.M}")
        kind = str(self.pilot_kind).lower().replace("_", "-")
        if kind in ("zc", "zadoffchu"):
            kind = "zadoff-chu"
        if kind not in PILOT_KINDS:
            raise ConfigurationError(f"unknown pilot kind {self.pilot_kind!r}")
        put("pilot_kind", kind)
        if self.rho_d < 0:
            raise ConfigurationError("rho_d must be nonnegative")
        if not 0.0 <= self.e <= 1.0:
            raise ConfigurationError(f"e must lie in [0, 1], got {self.e}")
        beta = (1.0,) * K if self.beta is None else tuple(float(b) for b in np.ravel(self.beta))
        if len(beta) != K or min(beta) <= 0:
            raise ConfigurationError("beta needs K strictly positive entries")
        put("beta", beta)
        e_t = tuple(t / (K + 1) for t in range(1, K + 1)) if self.e_t is None else tuple(map(float, self.e_t))
        if len(e_t) != K or any(not 0.0 <= x < 1.0 for x in e_t):
            raise ConfigurationError("e_t needs K origins in [0, 1)")
        put("e_t", e_t)
        put("e_s", self.e if self.e_s is None else float(self.e_s))
        if not 0.0 <= self.e_s <= 1.0:
            raise ConfigurationError(f"e_s must lie in [0, 1], got {self.e_s}")
        N_p = default_pilot_length(kind, K) if self.N_p is None else int(self.N_p)
        put("N_p", N_p)
        validate_pilot_length(kind, K, N_p)
        if self.delays is None:
            put("delays", standard_mixture(K))
        L = self.pulse.lag_reach
        if self.N < 2 * L + 1:
            raise ConfigurationError(f"N={self.N} is too short for a pulse reaching {L} symbols")
        if N_p > self.N:
            raise ConfigurationError("pilot length exceeds the frame length")
        a = self.N // 2 if self.symbol is None else int(self.symbol)
        if not L <= a < self.N - L:
            raise ConfigurationError(f"symbol index {a} is within {L} symbols of the frame edge")
        put("symbol", a)

    @property
    def rho_p(self) -> float:
        return self.N_p * self.rho_d

    @property
    def kappa(self) -> float:
        """Fraction of the frame left for data after the pilot block."""
        return (self.N - self.N_p) / self.N

    @property
    def lag_reach(self) -> int:
        return self.pulse.lag_reach

    @cached_property
    def pilots(self) -> "PilotSet":
        return make_pilots(self.pilot_kind, self.K, self.N_p, spacing=self.zc_spacing)

    @property
    def cyclic_pilots(self) -> bool:
        return self.pilot_kind == "zadoff-chu" and self.zc_cyclic_guard


def validate_pilot_length(kind: str, K: int, N_p: int) -> None:
    if N_p < K:
        raise ConfigurationError(f"pilot length {N_p} is shorter than the number of users {K}")
    if kind == "hadamard" and N_p & (N_p - 1):
        raise ConfigurationError(f"hadamard pilots need a power-of-two length, got {N_p}")
    if kind == "zadoff-chu" and N_p > 1 and not (_is_prime(N_p) and N_p > 2):
        raise ConfigurationError(f"zadoff-chu pilots need an odd prime length, got {N_p}")


def gen_pathloss(K: int, rng: np.random.Generator, v: float = 1.8, sigma_db: float = 8.0,
                 r_h: float = 100.0, R: float = 1000.0) -> np.ndarray:
    """Large-scale gains z_k / (r_k / r_h)^v with r_k ~ U[r_h, R] and log-normal z_k."""
    if not 0 < r_h < R or v <= 0:
        raise ConfigurationError("need 0 < r_h < R and v > 0")
    r = rng.uniform(r_h, R, size=K)
    z = 10.0 ** (sigma_db * rng.standard_normal(K) / 10.0)
    return z / (r / r_h) ** v


def gen_fading(K: int, M: int, rng: np.random.Generator, size: tuple = ()) -> np.ndarray:
    """Unit-variance circularly-symmetric Gaussian fading, shape ``size + (M, K)``."""
    shape = tuple(size) + (M, K)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def zadoff_chu(length: int, root: int = 1) -> np.ndarray:
    n = np.arange(length)
    return np.exp(-1j * np.pi * root * n * (n + 1) / length)


@dataclass(frozen=True)
class PilotSet:
    """Pilot matrix with one unit-norm row per user."""

    Phi: np.ndarray
    kind: str

    @property
    def K(self) -> int:
        return self.Phi.shape[0]

    @property
    def length(self) -> int:
        return self.Phi.shape[1]

    def upsilon(self, reach: int, cyclic: bool = False) -> np.ndarray:
        """Stack of shift correlations for lags -reach..reach, shape (2*reach+1, K, K)."""
        return np.stack([shift_corr(self.Phi, i, cyclic) for i in range(-reach, reach + 1)])


def make_pilots(kind: str, K: int, N_p: int, spacing: int | None = None) -> PilotSet:
    """Orthonormal pilot rows.

    Hadamard pilots are the first K rows of the N_p-point Sylvester matrix.
    Zadoff-Chu pilots are cyclic shifts of a root-1 sequence; user k is shifted
    by k*spacing, with spacing defaulting to N_p // K so the users are spread
    as far apart as the length allows.
    """
    validate_pilot_length(kind, K, N_p)
    if kind == "hadamard":
        Phi = hadamard(N_p).astype(float)[:K] / np.sqrt(N_p)
    else:
        step = max(1, N_p // K) if spacing is None else int(spacing)
        if step * (K - 1) >= N_p or step < 1:
            raise ConfigurationError(f"shift spacing {step} does not fit {K} users into length {N_p}")
        base = zadoff_chu(N_p) / np.sqrt(N_p)
        Phi = np.stack([np.roll(base, -k * step) for k in range(K)])
    return PilotSet(Phi=Phi, kind=kind)


def shift_corr(Phi: np.ndarray, i: int, cyclic: bool = False) -> np.ndarray:
    """Shift correlation Upsilon^i = Phi^i Phi^H.

    Entry (j, l) is sum_n p_j(n - i) conj(p_l(n)): row j delayed by i symbols,
    with zeros shifted in (or wrapped around when ``cyclic``).
    """
    Phi = np.asarray(Phi)
    N_p = Phi.shape[1]
    if cyclic:
        shifted = np.roll(Phi, i, axis=1)
    else:
        shifted = np.zeros_like(Phi)
        if abs(i) < N_p:
            if i >= 0:
                shifted[:, i:] = Phi[:, : N_p - i]
            else:
                shifted[:, : N_p + i] = Phi[:, -i:]
    return shifted @ Phi.conj().T
