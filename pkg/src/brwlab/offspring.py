"""Offspring laws, the unimodular root law and gamma-thinning."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rng import AliasTable


@dataclass(frozen=True)
class OffspringDistribution:
    """Finite-support offspring law ``probs[k] = P(k children)``."""

    probs: tuple
    _alias: AliasTable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        # trailing zeros carry no information
        nz = np.nonzero(p)[0]
        if p.ndim != 1 or len(nz) == 0:
            raise ValueError("offspring law has empty support")
        if np.any(p < 0):
            raise ValueError("offspring probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"offspring probabilities sum to {p.sum():.15g}, not 1")
        p = p[: nz[-1] + 1]
        object.__setattr__(self, "probs", tuple(float(v) for v in p))
        object.__setattr__(self, "_alias", AliasTable(p))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs)

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    @property
    def max_offspring(self) -> int:
        return len(self.probs) - 1

    @property
    def supercritical(self) -> bool:
        return self.mean > 1.0

    @property
    def alias(self) -> AliasTable:
        return self._alias

    def pgf(self, s):
        """Generating function ``F(s) = sum_k mu_k s^k``."""
        return np.polynomial.polynomial.polyval(s, self.probs)

    def extinction_probability(self, tol: float = 1e-13) -> float:
        return thinned_extinction(self, 1.0, tol)


def validate(probs: Sequence[float], require_mu1: bool = True) -> OffspringDistribution:
    """Check an offspring vector against the standing assumptions.

    ``mu_1 > 0`` is required unless ``require_mu1`` is False (the invasive
    process does not need it).
    """
    mu = OffspringDistribution(tuple(probs))
    if require_mu1 and (len(mu.probs) < 2 or mu.probs[1] <= 0):
        raise ValueError("offspring law needs mu_1 > 0")
    return mu


@dataclass(frozen=True)
class UGWRootLaw:
    """Root-degree law of the unimodular Galton-Watson tree.

    ``probs[j]`` is ``P(root degree = j)``; degree ``k + 1`` has weight
    proportional to ``mu_k / (k + 1)``.
    """

    probs: tuple

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs)

    @property
    def support(self) -> list:
        return [j for j, p in enumerate(self.probs) if p > 0]

    @property
    def mean_degree(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))


def ugw_root_law(mu: OffspringDistribution) -> UGWRootLaw:
    k = np.arange(len(mu.probs))
    w = mu.array / (k + 1)
    probs = np.concatenate(([0.0], w / w.sum()))
    return UGWRootLaw(tuple(float(v) for v in probs))


@dataclass(frozen=True)
class GammaTruncation:
    gamma: float
    base: OffspringDistribution
    result: OffspringDistribution
    m_gamma: float


def branching_excess(mu: OffspringDistribution) -> float:
    """``sum_{k>=2} (k-1) mu_k``: slope of the thinned mean in gamma."""
    p = mu.array
    k = np.arange(len(p))
    return float(np.dot(np.clip(k - 1, 0, None), p))


def gamma_truncate(mu: OffspringDistribution, gamma: float) -> GammaTruncation:
    """Move a fraction ``1 - gamma`` of the branching mass to single offspring."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    p = mu.array.copy()
    if gamma == 1.0:
        return GammaTruncation(gamma, mu, mu, mu.mean)
    if len(p) < 2:
        p = np.append(p, 0.0)
    moved = (1.0 - gamma) * p[2:].sum()
    p[2:] *= gamma
    p[1] += moved
    m_gamma = (1.0 - p[0]) + gamma * branching_excess(mu)
    return GammaTruncation(gamma, mu, OffspringDistribution(tuple(p)), m_gamma)


@dataclass(frozen=True)
class GammaCritical:
    """Solution of ``m_gamma = 1``.

    ``value`` is None when no gamma makes the thinned law critical: either
    there is no branching mass, or ``mu_0 = 0`` so every gamma > 0 stays
    supercritical.  ``valid`` says whether ``value`` lies in ``(0, 1]``.
    """

    value: Optional[float]
    valid: bool
    note: str


def gamma_critical(mu: OffspringDistribution) -> GammaCritical:
    slope = branching_excess(mu)
    mu0 = mu.probs[0]
    if slope == 0:
        return GammaCritical(None, False, "no branching mass: m_gamma = 1 - mu_0 for all gamma")
    if mu0 == 0:
        return GammaCritical(None, False, "mu_0 = 0: m_gamma > 1 for every gamma > 0")
    g = mu0 / slope
    if g > 1:
        return GammaCritical(g, False, f"no subcritical window: base mean {mu.mean:.6g} <= 1")
    return GammaCritical(g, True, "")


def sample_offspring(mu: OffspringDistribution, rng: np.random.Generator, size=None):
    return mu.alias.draw(rng, size)


def thinned_extinction(mu: OffspringDistribution, p: float, tol: float = 1e-13, max_iter: int = 1_000_000) -> float:
    """Smallest fixed point in [0, 1] of ``s -> F(1 - p + p s)``.

    This is the probability that the open cluster below an open vertex is
    finite when every vertex stays open independently with probability p.
    Iterating from 0 increases monotonically to the smallest fixed point;
    a Newton step from the current iterate is taken whenever it stays below
    the fixed point, which keeps the sequence monotone and avoids the slow
    tail near criticality.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("retention probability must lie in [0, 1]")
    coef = np.asarray(mu.probs)
    dcoef = coef[1:] * np.arange(1, len(coef))

    def g(s):
        return float(np.polynomial.polynomial.polyval(1.0 - p + p * s, coef))

    def dg(s):
        return p * float(np.polynomial.polynomial.polyval(1.0 - p + p * s, dcoef))

    if p == 1.0 and len(coef) == 2 and coef[1] == 1.0:
        return 0.0  # s -> s: every point is fixed
    if p * mu.mean <= 1.0:
        return 1.0
    s = 0.0
    for _ in range(max_iter):
        nxt = g(s)
        slope = dg(nxt)
        if slope < 1.0:
            # Newton from the picard iterate: g convex, so this never overshoots
            newton = nxt + (g(nxt) - nxt) / (1.0 - slope)
            if newton < 1.0 and g(newton) >= newton - 1e-16:
                nxt = max(nxt, newton)
        if abs(nxt - s) < tol:
            return nxt
        s = nxt
    raise RuntimeError("fixed-point iteration did not converge")


def depth_survival(mu: OffspringDistribution, p: float, depth: int) -> float:
    """``P(open cluster of an open vertex reaches ``depth`` generations below)``.

    ``h_0 = 0`` and ``h_L = F(1 - p + p h_{L-1})`` give the failure
    probabilities; the result is ``1 - h_depth``.
    """
    h = 0.0
    coef = np.asarray(mu.probs)
    for _ in range(depth):
        h = float(np.polynomial.polynomial.polyval(1.0 - p + p * h, coef))
    return 1.0 - h
