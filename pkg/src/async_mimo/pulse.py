"""Pulse shapes, the matched-filter response g = p * p, and delay-averaged moments of g.

All times are in units of the symbol period (T_s = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .delay import DelayDist, PointMass, Uniform
from .errors import ConfigurationError

_FAMILY_ALIASES = {
    "rect": "rect",
    "rectangular": "rect",
    "rrc": "rrc",
    "truncated-root-raised-cosine": "rrc",
    "root-raised-cosine": "rrc",
}


def _rrc_kernel(t: np.ndarray, beta: float) -> np.ndarray:
    """Untruncated root-raised-cosine with unit symbol period, centred at 0."""
    t = np.asarray(t, dtype=float)
    if beta == 0.0:
        return np.sinc(t)
    out = np.empty_like(t)
    at_zero = np.abs(t) < 1e-12
    at_sing = np.abs(np.abs(t) - 1.0 / (4.0 * beta)) < 1e-9
    reg = ~(at_zero | at_sing)
    tr = t[reg]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    den = np.pi * tr * (1 - (4 * beta * tr) ** 2)
    out[reg] = num / den
    out[at_zero] = 1 - beta + 4 * beta / np.pi
    out[at_sing] = (beta / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )
    return out


class PiecewiseLinear:
    """A continuous piecewise-linear function that vanishes outside its knot range.

    Integrals of integer powers are exact: on each segment the integrand is a
    polynomial, integrated in closed form and accumulated at the knots.
    """

    def __init__(self, knots: np.ndarray, values: np.ndarray):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self._cum: dict[int, np.ndarray] = {}
        steps = np.diff(self.knots)
        self._step = float(steps[0]) if len(steps) > 2 and np.allclose(steps, steps[0], rtol=1e-9, atol=0) else None

    def __call__(self, t):
        return np.interp(t, self.knots, self.values, left=0.0, right=0.0)

    def at_lags(self, t, lags: np.ndarray) -> np.ndarray:
        """f(t + lag) for integer ``lags`` on a trailing axis.

        On a uniform grid whose step divides 1 every lag shares the same
        interpolation weight, so the search is done once per point.
        """
        t = np.asarray(t, dtype=float)
        lags = np.asarray(lags)
        per_unit = None if self._step is None else 1.0 / self._step
        if per_unit is None or abs(per_unit - round(per_unit)) > 1e-9:
            return self(t[..., None] + lags)
        per_unit = int(round(per_unit))
        n = len(self.knots) - 1
        u = (t - self.knots[0]) / self._step
        base = np.floor(u)
        frac = (u - base)[..., None]
        idx = base.astype(np.intp)[..., None] + per_unit * lags
        padded = np.concatenate((self.values, [0.0]))
        lo = np.where((idx >= 0) & (idx <= n), idx, n + 1)
        hi = np.where((idx + 1 >= 0) & (idx + 1 <= n), idx + 1, n + 1)
        return padded[lo] + frac * (padded[hi] - padded[lo])

    @staticmethod
    def _segment_integral(width, y0, y1, power):
        # exact integral of a linear segment raised to `power`
        acc = np.zeros_like(np.asarray(y0 * y1, dtype=float))
        for k in range(power + 1):
            acc = acc + y0**k * y1 ** (power - k)
        return width * acc / (power + 1)

    def _cumulative(self, power: int) -> np.ndarray:
        if power not in self._cum:
            seg = self._segment_integral(np.diff(self.knots), self.values[:-1], self.values[1:], power)
            self._cum[power] = np.concatenate(([0.0], np.cumsum(seg)))
        return self._cum[power]

    def antiderivative(self, s, power: int = 1) -> np.ndarray:
        """Return the integral of f**power from the first knot up to s."""
        s = np.clip(np.asarray(s, dtype=float), self.knots[0], self.knots[-1])
        cum = self._cumulative(power)
        idx = np.clip(np.searchsorted(self.knots, s, side="right") - 1, 0, len(self.knots) - 2)
        x0 = self.knots[idx]
        y0 = self.values[idx]
        ys = self(s)
        return cum[idx] + self._segment_integral(s - x0, y0, ys, power)


@dataclass(frozen=True)
class PulseSpec:
    """Pulse-shaping filter description.

    ``family`` is ``"rect"`` or ``"rrc"`` (truncated root-raised cosine).  The
    RRC is truncated to ``sidelobes`` adjacent lobes on each side, giving a
    support of ``2 * (sidelobes + 1)`` symbols, and renormalised to unit energy.
    ``grid_step`` is the resolution of the numeric self-convolution.
    """

    family: str = "rect"
    rolloff: float = 0.5
    sidelobes: int = 3
    grid_step: float = 1e-3

    def __post_init__(self):
        fam = _FAMILY_ALIASES.get(str(self.family).lower())
        if fam is None:
            raise ConfigurationError(f"unknown pulse family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam == "rrc":
            if not 0.0 <= self.rolloff <= 1.0:
                raise ConfigurationError(f"rolloff must lie in [0, 1], got {self.rolloff}")
            if int(self.sidelobes) != self.sidelobes or self.sidelobes < 1:
                raise ConfigurationError(f"sidelobes must be a positive integer, got {self.sidelobes}")
            if not 0.0 < self.grid_step <= 0.01:
                raise ConfigurationError("grid_step must lie in (0, 0.01]")

    @property
    def support(self) -> float:
        """Pulse duration T in symbol periods."""
        return 1.0 if self.family == "rect" else 2.0 * (self.sidelobes + 1)

    @property
    def lag_reach(self) -> int:
        """Largest |i| for which g(e + T + i - tau) can be nonzero."""
        return int(round(self.support))

    @cached_property
    def _rrc_scale(self) -> float:
        half = self.support / 2
        sing = 1.0 / (4.0 * self.rolloff) if self.rolloff > 0 else None
        pts = [0.0] + ([sing, -sing] if sing is not None and sing < half else [])
        energy, _ = integrate.quad(
            lambda t: _rrc_kernel(np.array([t]), self.rolloff)[0] ** 2,
            -half, half, points=pts, limit=500, epsabs=1e-13, epsrel=1e-13,
        )
        return 1.0 / np.sqrt(energy)

    def pulse(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.support)
        if self.family == "rect":
            return np.where(inside, 1.0, 0.0)
        vals = self._rrc_scale * _rrc_kernel(t - self.support / 2, self.rolloff)
        return np.where(inside, vals, 0.0)

    @cached_property
    def conv(self) -> PiecewiseLinear:
        """The convolved pulse g on [0, 2T], normalised so that g(T) = 1."""
        if self.family == "rect":
            return PiecewiseLinear(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.0]))
        T = self.support
        n = int(round(T / self.grid_step))
        h = T / n
        p = self.pulse(np.linspace(0.0, T, n + 1))
        full = np.convolve(p, p)
        # trapezoid correction: halve the two end terms of each overlap range
        k = np.arange(2 * n + 1)
        lo = np.maximum(0, k - n)
        hi = np.minimum(n, k)
        full = full - 0.5 * (p[lo] * p[k - lo] + p[hi] * p[k - hi])
        vals = h * full
        vals /= vals[n]
        return PiecewiseLinear(np.linspace(0.0, 2 * T, 2 * n + 1), vals)


def eval_pulse(spec: PulseSpec, t) -> np.ndarray:
    """Evaluate p(t); zero outside [0, T]."""
    return spec.pulse(t)


def eval_conv(spec: PulseSpec, t) -> np.ndarray:
    """Evaluate g(t) = (p * p)(t); zero outside [0, 2T]."""
    return spec.conv(t)


def pulse_moment(spec: PulseSpec, dist: DelayDist, e: float, lag: int, power: int) -> float:
    """E[g_lag^power] = E_tau[g(e + T + lag - tau)^power].

    Exact for both families, since g is piecewise linear (the rect triangle
    exactly; the RRC through its cached convolution grid).
    """
    if power < 1 or int(power) != power:
        raise ConfigurationError(f"power must be a positive integer, got {power}")
    dist.validate()
    g = spec.conv
    c = e + spec.support + lag
    total = 0.0
    for w, comp in dist.components:
        if isinstance(comp, PointMass):
            total += w * float(g(c - comp.tau)) ** power
        else:
            width = comp.b - comp.a
            integral = g.antiderivative(c - comp.a, power) - g.antiderivative(c - comp.b, power)
            total += w * float(integral) / width
    return total


def rect_mixture_moments(K: int, e: float) -> dict[tuple[int, int], float]:
    """Closed-form E[g_i] and E[g_i^2] for the rect pulse under the standard mixture.

    Keys are ``(lag, power)`` for lags -1, 0, 1.
    """
    a = 1.0 / K
    b = (K - 1.0) / K
    return {
        (0, 1): a * (1 - e) + b * (0.5 + e - e * e),
        (-1, 1): a * e + b * e * e / 2,
        (1, 1): b * (1 - e) ** 2 / 2,
        (0, 2): a * (1 - e) ** 2 + b * (1.0 / 3 + e - e * e),
        (-1, 2): a * e * e + b * e**3 / 3,
        (1, 2): b * (1 - e) ** 3 / 3,
    }
