"""Symbol-level delay distributions: construction, sampling and expectations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigurationError


@dataclass(frozen=True)
class PointMass:
    tau: float = 0.0


@dataclass(frozen=True)
class Uniform:
    a: float = 0.0
    b: float = 1.0


@dataclass(frozen=True)
class DelayDist:
    """Mixture of point masses and uniform components on [0, 1].

    ``components`` is a tuple of ``(weight, PointMass | Uniform)`` pairs.
    """

    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple((float(w), c) for w, c in self.components))
        self.validate()

    def validate(self) -> None:
        if not self.components:
            raise ConfigurationError("delay distribution has no components")
        total = 0.0
        for w, comp in self.components:
            if w < 0:
                raise ConfigurationError(f"negative mixture weight {w}")
            if isinstance(comp, PointMass):
                if not 0.0 <= comp.tau <= 1.0:
                    raise ConfigurationError(f"point mass at {comp.tau} lies outside [0, 1]")
            elif isinstance(comp, Uniform):
                if not 0.0 <= comp.a < comp.b <= 1.0:
                    raise ConfigurationError(f"uniform component [{comp.a}, {comp.b}] is not inside [0, 1]")
            else:
                raise ConfigurationError(f"unknown delay component {comp!r}")
            total += w
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"mixture weights sum to {total}, not 1")

    @property
    def mean(self) -> float:
        return sum(
            w * (c.tau if isinstance(c, PointMass) else 0.5 * (c.a + c.b)) for w, c in self.components
        )

    def breakpoints(self) -> list[float]:
        """Component boundaries, useful for splitting integrals."""
        pts = {0.0, 1.0}
        for _, c in self.components:
            if isinstance(c, PointMass):
                pts.add(c.tau)
            else:
                pts.update((c.a, c.b))
        return sorted(pts)


def standard_mixture(K: int) -> DelayDist:
    """Point mass at 0 with weight 1/K plus U(0, 1) with weight (K-1)/K.

    One of the K users is the timing reference, the rest are uniformly delayed.
    """
    if int(K) != K or K < 1:
        raise ConfigurationError(f"K must be a positive integer, got {K}")
    if K == 1:
        return DelayDist(((1.0, PointMass(0.0)),))
    return DelayDist(((1.0 / K, PointMass(0.0)), ((K - 1.0) / K, Uniform(0.0, 1.0))))


def point_dist(tau: float = 0.0) -> DelayDist:
    return DelayDist(((1.0, PointMass(tau)),))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator for the substream identified by ``stream``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


def sample_delays(dist: DelayDist, count, rng: np.random.Generator) -> np.ndarray:
    """Draw i.i.d. delays; ``count`` may be an int or a shape tuple."""
    shape = (count,) if np.isscalar(count) else tuple(count)
    weights = np.array([w for w, _ in dist.components])
    which = rng.choice(len(weights), size=shape, p=weights / weights.sum())
    u = rng.random(shape)
    out = np.empty(shape)
    for i, (_, c) in enumerate(dist.components):
        sel = which == i
        out[sel] = c.tau if isinstance(c, PointMass) else c.a + (c.b - c.a) * u[sel]
    return out


def expect(dist: DelayDist, fn: Callable[[float], float], breaks: Sequence[float] = ()) -> float:
    """E[fn(tau)] with adaptive quadrature on each uniform component.

    ``breaks`` lists known kinks of ``fn``; the integration range is split there.
    """
    total = 0.0
    for w, c in dist.components:
        if w == 0.0:
            continue
        if isinstance(c, PointMass):
            total += w * float(fn(c.tau))
            continue
        pts = [p for p in breaks if c.a < p < c.b]
        val, _ = integrate.quad(
            lambda t: float(fn(t)), c.a, c.b, points=pts or None, limit=400, epsabs=1e-10, epsrel=1e-9
        )
        total += w * val / (c.b - c.a)
    return total


def quadrature_rule(dist: DelayDist, breaks: Sequence[float] = (), order: int = 8, pieces: int = 1):
    """Nodes and weights integrating against ``dist``.

    Each uniform component is split at ``breaks`` and then into ``pieces`` equal
    parts, with Gauss-Legendre of the given order on every part.  Point masses
    contribute a single node.  Polynomials of degree < 2*order between breaks are
    integrated exactly.
    """
    x, wq = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for w, c in dist.components:
        if w == 0.0:
            continue
        if isinstance(c, PointMass):
            nodes.append(np.array([c.tau]))
            weights.append(np.array([w]))
            continue
        edges = sorted({c.a, c.b, *(p for p in breaks if c.a < p < c.b)})
        fine = np.concatenate(
            [np.linspace(lo, hi, pieces + 1)[:-1] for lo, hi in zip(edges[:-1], edges[1:])] + [[c.b]]
        )
        for lo, hi in zip(fine[:-1], fine[1:]):
            half = 0.5 * (hi - lo)
            nodes.append(lo + half * (x + 1))
            weights.append(w * half * wq / (c.b - c.a))
    return np.concatenate(nodes), np.concatenate(weights)
