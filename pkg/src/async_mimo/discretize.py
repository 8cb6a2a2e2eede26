"""Sampled system construction: G matrices, received frames, pilot blocks and noise models."""

from __future__ import annotations

import numpy as np
from scipy.linalg import toeplitz

from .errors import ConfigurationError, InternalError
from .pulse import PulseSpec


def lag_reach(spec: PulseSpec) -> int:
    return spec.lag_reach


def g_lags(spec: PulseSpec, e: float, tau, reach: int | None = None) -> np.ndarray:
    """g(e + T + i - tau) for i = -reach..reach; trailing axis indexes the lag."""
    L = spec.lag_reach if reach is None else reach
    i = np.arange(-L, L + 1)
    tau = np.asarray(tau, dtype=float)
    return spec.conv.at_lags(e + spec.support - tau, i)


def lag_toeplitz(values: np.ndarray, N: int) -> np.ndarray:
    """N x N matrix with entry (p, q) = values[L + p - q], zero where |p - q| > L."""
    values = np.asarray(values)
    L = (len(values) - 1) // 2
    col = np.zeros(N, dtype=values.dtype)
    row = np.zeros(N, dtype=values.dtype)
    k = min(L, N - 1)
    col[: k + 1] = values[L : L + k + 1]
    row[: k + 1] = values[L - k : L + 1][::-1]
    return toeplitz(col, row)


def build_G(spec: PulseSpec, e: float, tau: float, N: int) -> np.ndarray:
    """G(p, q) = g(e + T + (p - q) - tau)."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError(f"delay {tau} lies outside [0, 1]")
    return lag_toeplitz(g_lags(spec, e, tau), N)


def apply_lags(coeffs: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Banded Toeplitz product y(p) = sum_i coeffs[..., i] * b(p - i) with zeros outside the frame.

    ``coeffs`` has trailing lag axis of length 2L+1, ``frames`` a trailing
    symbol axis of length N; leading axes broadcast.
    """
    L = (coeffs.shape[-1] - 1) // 2
    N = frames.shape[-1]
    padded = np.concatenate(
        [np.zeros(frames.shape[:-1] + (L,), frames.dtype), frames, np.zeros(frames.shape[:-1] + (L,), frames.dtype)],
        axis=-1,
    )
    out = 0
    for idx, i in enumerate(range(-L, L + 1)):
        out = out + coeffs[..., idx, None] * padded[..., L - i : L - i + N]
    return out


def synthesize_rx(spec: PulseSpec, e: float, rho_d: float, beta, H: np.ndarray, tau: np.ndarray,
                  b: np.ndarray, noise: np.ndarray | None = None) -> np.ndarray:
    """Received samples y_m = sqrt(rho_d) sum_k sqrt(beta_k) h_km G_km b_k + n_m.

    ``H`` and ``tau`` are M x K, ``b`` is K x N; returns M x N.
    """
    H = np.asarray(H)
    M, K = H.shape
    b = np.asarray(b)
    if tau.shape != (M, K) or b.shape[0] != K:
        raise ConfigurationError("inconsistent dimensions between H, tau and b")
    coeffs = (np.sqrt(np.asarray(beta, dtype=float)) * H)[..., None] * g_lags(spec, e, tau)
    y = np.sqrt(rho_d) * apply_lags(coeffs, b[None, :, :]).sum(axis=1)
    if noise is not None:
        y = y + noise
    return y


def synthesize_pilot_block(spec: PulseSpec, e_s: float, rho_p: float, C: np.ndarray, tau: np.ndarray,
                           Phi: np.ndarray, cyclic: bool = False) -> np.ndarray:
    """Noise-free pilot samples sqrt(rho_p) sum_i C^i Phi^i, shape (..., M, N_p).

    The pilot block is transmitted in isolation (zero symbols around it); with
    ``cyclic`` it is cyclically extended so every delayed copy wraps around.
    ``C`` holds the channel gains sqrt(beta_k) h_km with shape (..., M, K).
    """
    N_p = Phi.shape[1]
    gl = g_lags(spec, e_s, tau)  # (..., M, K, 2L+1)
    L = (gl.shape[-1] - 1) // 2
    shifted = []
    for i in range(-L, L + 1):
        if cyclic:
            s = np.roll(Phi, i, axis=1)
        else:
            s = np.zeros_like(Phi)
            if abs(i) < N_p:
                if i >= 0:
                    s[:, i:] = Phi[:, : N_p - i]
                else:
                    s[:, : N_p + i] = Phi[:, -i:]
        shifted.append(s)
    shifted = np.stack(shifted)  # (2L+1, K, N_p)
    return np.sqrt(rho_p) * np.einsum("...mk,...mki,ikn->...mn", C, gl, shifted)


def noise_cov_oversampled(spec: PulseSpec, origins, N: int) -> np.ndarray:
    """Covariance of noise samples stacked over sampling origins.

    Block (t1, t2) has entries g(T + (p - q) + e_t1 - e_t2).  A single origin
    gives the identity: Nyquist-sampled matched-filter noise is white.
    """
    origins = np.atleast_1d(np.asarray(origins, dtype=float))
    if len(origins) == 1:
        return np.eye(N)
    d = np.arange(N)[:, None] - np.arange(N)[None, :]
    blocks = [[spec.conv(spec.support + d + (o1 - o2)) for o2 in origins] for o1 in origins]
    cov = np.block(blocks)
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise InternalError("oversampled noise covariance is not symmetric")
    if np.linalg.eigvalsh(cov).min() < -1e-6 * max(1.0, np.abs(cov).max()):
        raise InternalError("oversampled noise covariance is not positive semidefinite")
    return cov


def noise_factor(cov: np.ndarray) -> np.ndarray:
    """A square-root factor F with F F^T = cov, tolerating semidefiniteness."""
    w, V = np.linalg.eigh(cov)
    if w.min() < -1e-6 * max(1.0, w.max()):
        raise InternalError("covariance has a significantly negative eigenvalue")
    return V * np.sqrt(np.clip(w, 0.0, None))


def sample_correlated_noise(cov: np.ndarray, rng: np.random.Generator, size: tuple = ()) -> np.ndarray:
    """Zero-mean circular complex Gaussian draws with covariance ``cov``, shape ``size + (n,)``."""
    F = noise_factor(cov)
    n = cov.shape[0]
    shape = tuple(size) + (n,)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)
    return w @ F.T
