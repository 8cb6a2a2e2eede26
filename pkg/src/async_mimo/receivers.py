"""Channel estimation, MRC combining and the zero-forcing correctors of the MRC-ZF receivers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .channel import PilotSet
from .discretize import g_lags, lag_toeplitz
from .errors import ConfigurationError, SingularityError
from .pulse import PulseSpec

MAX_CONDITION = 1e8
# Gamma_l inherits the poor conditioning of symbol-rate samples of a nearly
# band-limited pulse; only flag it once double precision is really at risk.
GAMMA_MAX_CONDITION = 1e12


class ReceiverKind(str, enum.Enum):
    MRC_PERFECT = "mrc_perfect"
    MRC_IMPERFECT = "mrc_imperfect"
    MRCZF_PERFECT = "mrczf_perfect"
    MRCZF_IMPERFECT = "mrczf_imperfect"

    @classmethod
    def parse(cls, name) -> "ReceiverKind":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value.replace("_", "") == key:
                return kind
        raise ConfigurationError(f"unknown receiver kind {name!r}")

    @property
    def perfect_csi(self) -> bool:
        return self in (ReceiverKind.MRC_PERFECT, ReceiverKind.MRCZF_PERFECT)

    @property
    def zero_forcing(self) -> bool:
        return self in (ReceiverKind.MRCZF_PERFECT, ReceiverKind.MRCZF_IMPERFECT)

    @property
    def theorem(self) -> int:
        return list(ReceiverKind).index(self) + 1


def estimate_channels(rx_pilot: np.ndarray, Phi: np.ndarray, rho_p: float) -> np.ndarray:
    """Least-squares despreading C~ = Y_p Phi^H / sqrt(rho_p); Y_p is (..., M, N_p)."""
    if rx_pilot.shape[-1] != Phi.shape[1]:
        raise ConfigurationError("pilot block length does not match the pilot matrix")
    return rx_pilot @ Phi.conj().T / np.sqrt(rho_p)


def leakage_coeffs(pilots: PilotSet, spec: PulseSpec, e_s: float, tau: np.ndarray,
                   cyclic: bool = False) -> np.ndarray:
    """lambda[l, j, m] = sum_i g(e_s + T + i - tau_jm) Upsilon^i(j, l) for an M x K delay matrix."""
    ups = pilots.upsilon(spec.lag_reach, cyclic)  # [i, j, l]
    return np.einsum("mji,ijl->ljm", g_lags(spec, e_s, tau), ups)


def mrc_combine(samples: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """(1/M) sum_m conj(w_m) y_m for samples of shape (M, ...) and weights of shape (M,)."""
    samples = np.asarray(samples)
    weights = np.asarray(weights)
    if samples.shape[0] != weights.shape[0]:
        raise ConfigurationError("one combining weight per antenna is required")
    return np.tensordot(weights.conj(), samples, axes=(0, 0)) / weights.shape[0]


@dataclass(frozen=True)
class GammaInverse:
    """Oversampled zero-forcing solution for one user.

    ``Gamma`` is the full KN x KN mean matrix (origin blocks by user blocks).
    Users whose blocks are linear combinations of other users' blocks are
    cancelled together with them, so only a basis ``active`` of user blocks
    and ``len(active)`` evenly spread origins are kept.  ``W`` inverts the reduced
    square matrix and ``W_ll`` is its row block for the user itself.
    """

    l: int
    Gamma: np.ndarray
    active: tuple
    origins: tuple
    W: np.ndarray
    W_ll: np.ndarray
    condition: float


@dataclass(frozen=True)
class ZfMatrices:
    Z: np.ndarray | None = None
    condition: float | None = None
    gamma: dict = field(default_factory=dict)

    def row(self, l: int, a: int) -> tuple[np.ndarray, tuple]:
        g = self.gamma[l]
        return g.W_ll[a], g.origins


def mean_matrix(Eg: np.ndarray, N: int) -> np.ndarray:
    """Toeplitz matrix of E[g_{p-q}]."""
    return lag_toeplitz(np.asarray(Eg), N)


def build_Z(moments, N: int) -> ZfMatrices:
    """Inverse of the banded Toeplitz mean matrix, with its 1-norm condition number.

    ``moments`` is a MomentTable or the lag vector E[g_i] itself.
    """
    Eg = np.asarray(getattr(moments, "Eg", moments), dtype=float)
    L = (len(Eg) - 1) // 2
    A = mean_matrix(Eg, N)
    # diagonal-ordered band storage: row u + i - j holds A[i, j]
    ab = np.zeros((2 * L + 1, N))
    for d in range(-L, L + 1):
        ab[L - d, max(0, d) : N + min(0, d)] = np.diagonal(A, d)
    try:
        Z = solve_banded((L, L), ab, np.eye(N))
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"mean ISI matrix is singular: {exc}", condition=np.inf) from exc
    cond = float(np.abs(A).sum(axis=0).max() * np.abs(Z).sum(axis=0).max())
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularityError(f"mean ISI matrix is ill-conditioned (condition {cond:.3g})", condition=cond)
    return ZfMatrices(Z=Z, condition=cond)


def assemble_gamma(gamma1_t: np.ndarray, l: int, N: int) -> np.ndarray:
    """Gamma_l with block (t, k) the Toeplitz matrix of gamma1_t[l, k, t, :]."""
    _, K, T, _ = gamma1_t.shape
    return np.block([[lag_toeplitz(gamma1_t[l, k, t], N) for k in range(K)] for t in range(T)])


RANK_TOL = 1e-4


def active_users(gamma1_t: np.ndarray, l: int, tol: float = RANK_TOL) -> tuple:
    """A maximal set of users with linearly independent mean blocks in Gamma_l.

    Block (t, k) is linear in the lag profile gamma1_t[l, k], so a user whose
    profile is a combination of already chosen ones (in particular a zero
    profile, i.e. no leakage at all) is cancelled along with them.  User l is
    always kept first.  ``tol`` is relative to the largest singular value;
    profiles that are only nearly dependent would make Gamma_l numerically
    singular, and their small residual is left to the rate expressions.
    """
    K = gamma1_t.shape[1]
    vecs = gamma1_t[l].reshape(K, -1)
    chosen: list[int] = []
    for k in [l] + [k for k in range(K) if k != l]:
        s = np.linalg.svd(vecs[chosen + [k]], compute_uv=False)
        if s[-1] > tol * s[0]:
            chosen.append(k)
    return tuple(sorted(chosen))


def spread_origins(T: int, count: int) -> tuple:
    """``count`` origin indices out of ``T``, spread as evenly as possible."""
    return tuple(int(i) for i in np.unique(np.round(np.linspace(0, T - 1, count)).astype(int)))


def build_Gamma_W(gamma1_t: np.ndarray, K: int, N: int, l: int) -> GammaInverse:
    """Assemble Gamma_l and invert it on a basis of independent user blocks."""
    if gamma1_t.shape[0] != K or gamma1_t.shape[2] != K:
        raise ConfigurationError("oversampled tables need K users and K sampling origins")
    Gamma = assemble_gamma(gamma1_t, l, N)
    rows = gamma1_t[l].transpose(1, 0, 2).reshape(K, -1)  # one profile block per origin
    scale = max(float(np.abs(rows).max()), np.finfo(float).tiny)
    for t1 in range(K):
        for t2 in range(t1 + 1, K):
            if np.allclose(rows[t1], rows[t2], rtol=0.0, atol=1e-12 * scale):
                raise SingularityError(
                    f"Gamma_{l} has identical block rows for sampling origins {t1} and {t2}; "
                    "the origins must be distinct",
                    condition=np.inf,
                )
    active = active_users(gamma1_t, l)
    origins = spread_origins(K, len(active))
    sub = np.block([[lag_toeplitz(gamma1_t[l, k, t], N) for k in active] for t in origins])
    try:
        cond = float(np.linalg.cond(sub))
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > GAMMA_MAX_CONDITION:
        raise SingularityError(
            f"oversampled mean matrix for user {l} is ill-conditioned (condition {cond:.3g}); "
            "check that the sampling origins are distinct",
            condition=cond,
        )
    W = np.linalg.inv(sub)
    pos = active.index(l)
    return GammaInverse(l=l, Gamma=Gamma, active=active, origins=origins, W=W,
                        W_ll=W[pos * N : (pos + 1) * N], condition=cond)


def build_all_gamma(gamma1_t: np.ndarray, N: int) -> ZfMatrices:
    K = gamma1_t.shape[0]
    return ZfMatrices(gamma={l: build_Gamma_W(gamma1_t, K, N, l) for l in range(K)})


def mrczf_detect(kind, combined: np.ndarray, zf: ZfMatrices, l: int = 0) -> np.ndarray:
    """Apply the zero-forcing corrector to MRC output.

    Perfect CSI: Z @ y for a length-N frame.  Imperfect CSI: W_ll @ y_os where
    y_os stacks the MRC outputs of every sampling origin (shape (T, N)); only
    the origins retained for user l are used.
    """
    kind = ReceiverKind.parse(kind)
    if kind is ReceiverKind.MRCZF_PERFECT:
        if zf.Z is None or combined.shape[-1] != zf.Z.shape[0]:
            raise ConfigurationError("Z does not match the frame length")
        return combined @ zf.Z.T
    if kind is ReceiverKind.MRCZF_IMPERFECT:
        if l not in zf.gamma:
            raise ConfigurationError(f"no oversampled corrector for user {l}")
        g = zf.gamma[l]
        N = g.W_ll.shape[0]
        if combined.shape[-1] != N or combined.shape[-2] < len(g.origins):
            raise ConfigurationError("stacked MRC output does not match the corrector")
        stacked = combined[..., list(g.origins), :].reshape(combined.shape[:-2] + (-1,))
        return stacked @ g.W_ll.T
    raise ConfigurationError(f"{kind.value} has no zero-forcing stage")
