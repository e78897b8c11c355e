"""Return probabilities, spectral radius and Green-function partial sums."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .groups import C2_PRODUCT, FREE, LATTICE, GroupElement, GroupSpec, StepDistribution, sphere_size, word_distance

# lattice boxes larger than this many cells are refused
MAX_LATTICE_CELLS = 5_000_000


class UnsupportedWalkError(ValueError):
    """Exact computation is not available for this (group, step law) pair."""


@dataclass
class ReturnSeries:
    """Exact n-step law of the distance ``d(e, S_n)`` for n = 0..n_max.

    ``class_mass[n, r]`` is ``P(d(e, S_n) = r)``.  For radial walks on
    tree-like groups every element of the sphere of radius r carries the same
    probability, ``site_prob(n, r) = class_mass[n, r] / |sphere(r)|``.
    """

    spec: GroupSpec
    step: StepDistribution
    n_max: int
    class_mass: np.ndarray
    sphere: np.ndarray
    diag: np.ndarray
    _lattice_laws: Optional[list] = None

    def site_prob(self, n: int, r: int) -> float:
        if self.spec.kind == LATTICE:
            raise UnsupportedWalkError("lattice laws are not constant on spheres; use transition()")
        if r > n:
            return 0.0
        return float(self.class_mass[n, r] / self.sphere[r])

    def transition(self, n: int, x: GroupElement, y: GroupElement) -> float:
        """``p^(n)(x, y)``."""
        if n > self.n_max:
            raise ValueError(f"n={n} beyond computed range {self.n_max}")
        if self.spec.kind != LATTICE:
            return self.site_prob(n, word_distance(x, y))
        diff = tuple(b - a for a, b in zip(x.value, y.value))
        if not any(diff):
            return float(self.diag[n])
        if self._lattice_laws is None:
            raise UnsupportedWalkError("off-diagonal lattice values were not retained (dim > 1)")
        law = self._lattice_laws[n]
        if any(abs(c) > n for c in diff):
            return 0.0
        return float(law[tuple(c + n for c in diff)])

    def weighted_row_sums(self) -> np.ndarray:
        return self.class_mass.sum(axis=1)


def _radial_series(spec: GroupSpec, step: StepDistribution, n_max: int) -> ReturnSeries:
    lazy = step.laziness
    per_gen = step.probs[0]
    back = per_gen
    fwd = per_gen * (spec.n_gens - 1)
    mass = np.zeros((n_max + 1, n_max + 1))
    mass[0, 0] = 1.0
    for n in range(1, n_max + 1):
        prev = mass[n - 1]
        cur = mass[n]
        cur[:] = lazy * prev
        # from the identity every generator moves away
        cur[1] += (1.0 - lazy) * prev[0]
        cur[2:] += fwd * prev[1:-1]
        cur[:-1] += back * prev[1:]
    sphere = np.array([float(sphere_size(spec, r)) for r in range(n_max + 1)])
    return ReturnSeries(spec, step, n_max, mass, sphere, mass[:, 0].copy())


def _lattice_series(spec: GroupSpec, step: StepDistribution, n_max: int) -> ReturnSeries:
    d = spec.rank
    if (2 * n_max + 1) ** d > MAX_LATTICE_CELLS:
        raise UnsupportedWalkError(f"box of radius {n_max} in Z^{d} exceeds {MAX_LATTICE_CELLS} cells")
    probs = step.probs
    keep = d == 1
    law = np.ones((1,) * d)
    mass = np.zeros((n_max + 1, n_max + 1))
    diag = np.zeros(n_max + 1)
    mass[0, 0] = diag[0] = 1.0
    laws = [law] if keep else None
    for n in range(1, n_max + 1):
        law = np.pad(law, 1)
        new = probs[-1] * law
        for axis in range(d):
            # +e_i moves mass up along the axis, -e_i down
            new += probs[2 * axis] * np.roll(law, 1, axis=axis)
            new += probs[2 * axis + 1] * np.roll(law, -1, axis=axis)
        law = new
        grids = np.indices(law.shape) - n
        dist = np.abs(grids).sum(axis=0)
        mass[n] = np.bincount(dist.ravel(), weights=law.ravel(), minlength=n_max + 1)[: n_max + 1]
        diag[n] = law[(n,) * d]
        if keep:
            laws.append(law)
    sphere = np.array([float(sphere_size(spec, r)) for r in range(n_max + 1)])
    return ReturnSeries(spec, step, n_max, mass, sphere, diag, laws)


def return_probability_series(spec: GroupSpec, step: StepDistribution, n_max: int) -> ReturnSeries:
    """Exact distance-class laws of the walk started at the identity.

    Radial walks on tree-like groups use the birth-death chain of the
    distance; lattices use exact convolution on a growing box.
    """
    if step.spec != spec:
        raise ValueError("step law belongs to a different group")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if spec.kind == LATTICE:
        return _lattice_series(spec, step, n_max)
    if not step.is_radial:
        raise UnsupportedWalkError("distance-class DP needs equal weights on all generators")
    return _radial_series(spec, step, n_max)


def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: len(a)]


def return_probabilities(spec: GroupSpec, step: StepDistribution, n_max: int) -> np.ndarray:
    """``p^(n)(e, e)`` for n = 0..n_max for any symmetric nearest-neighbour law.

    Tree-like groups go through first-passage generating functions: ``F_s``
    (first visit to the neighbour s) solves
    ``F_s = z (q(s) + q(e) F_s + sum_{t != s} q(t) F_{t^-1} F_s)``, and
    ``G = 1 / (1 - z (q(e) + sum_t q(t) F_{t^-1}))``.  Each fixed-point sweep
    fixes one more coefficient, so n_max + 1 sweeps are exact.
    """
    if spec.kind == LATTICE:
        return _lattice_series(spec, step, n_max).diag
    probs = step.probs
    lazy = probs[-1]
    inv = spec.inverse_table
    n_gens = spec.n_gens
    size = n_max + 1
    first = [np.zeros(size) for _ in range(n_gens)]
    for _ in range(size):
        total = sum(probs[t] * first[inv[t]] for t in range(n_gens))
        updated = []
        for s in range(n_gens):
            inner = np.zeros(size)
            inner[0] = probs[s]
            inner += lazy * first[s]
            inner += _series_mul(total - probs[s] * first[inv[s]], first[s])
            shifted = np.zeros(size)
            shifted[1:] = inner[:-1]
            updated.append(shifted)
        first = updated
    excursion = sum(probs[t] * first[inv[t]] for t in range(n_gens))
    excursion[0] += lazy
    loop = np.zeros(size)
    loop[1:] = excursion[:-1]
    green = np.zeros(size)
    green[0] = 1.0
    for n in range(1, size):
        green[n] = np.dot(loop[1 : n + 1], green[n - 1 :: -1])
    return green


def _tree_closed_form(spec: GroupSpec, step: StepDistribution) -> float:
    lazy = step.laziness
    move = step.probs[:-1] / (1.0 - lazy)
    if spec.kind == FREE:
        # one weight per generator pair a_i, a_i^-1
        pair = move[0::2]
        coef = [2.0 * p for p in pair]
        slope = spec.rank - 1
    else:
        coef = list(move)
        slope = spec.rank - 2
    if step.is_radial:
        k = spec.rank
        base = math.sqrt(2 * k - 1) / k if spec.kind == FREE else 2 * math.sqrt(k - 1) / k
    else:
        # min_t sum_i sqrt(t^2 + c_i^2) - slope * t, a convex function of t
        def fn(t):
            return sum(math.sqrt(t * t + c * c) for c in coef) - slope * t

        res = minimize_scalar(fn, bounds=(0.0, 10.0), method="bounded", options={"xatol": 1e-14})
        base = min(res.fun, fn(0.0))
    return lazy + (1.0 - lazy) * base


@dataclass
class SpectralEstimate:
    """Spectral radius with provenance.

    ``lower`` is a certified lower bound (``p^(2n)(e,e)^(1/2n) <= rho``);
    ``band`` is the heuristic extrapolation error, 0 for closed forms.
    """

    value: float
    method: str
    lower: float
    band: float
    converged: bool


def _aitken(seq: np.ndarray) -> np.ndarray:
    d1 = seq[1:-1] - seq[:-2]
    d2 = seq[2:] - 2 * seq[1:-1] + seq[:-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = seq[2:] - (seq[2:] - seq[1:-1]) ** 2 / d2
    return np.where(np.abs(d2) > 1e-300, acc, seq[2:])


def spectral_radius_numeric(spec: GroupSpec, step: StepDistribution, n_max: int = 200, tol: float = 5e-3) -> SpectralEstimate:
    """Extrapolate ``lim p^(2n)(e,e)^(1/2n)`` from exact return probabilities.

    The root sequence carries a ``log(n)/n`` correction that Aitken's
    delta-squared cannot remove, so the acceleration is applied to the ratio
    roots ``sqrt(p^(2n+2) / p^(2n))`` (correction ``O(1/n)``).  ``lower`` is
    the best raw root, a certified lower bound; ``band`` is the spread of the
    last accelerated terms together with their distance to the raw ratio.
    """
    diag = return_probabilities(spec, step, 2 * n_max)
    n = np.arange(1, n_max + 1)
    roots = diag[2 * n] ** (1.0 / (2 * n))
    ratios = np.sqrt(diag[2 * n[1:]] / diag[2 * n[:-1]])
    acc = _aitken(ratios)
    value = float(min(acc[-1], 1.0))
    tail = acc[-5:]
    band = float(max(tail.max() - tail.min(), abs(value - ratios[-1])))
    return SpectralEstimate(value, "aitken-ratio", float(roots.max()), band, band < tol)


def spectral_radius(spec: GroupSpec, step: StepDistribution) -> SpectralEstimate:
    """Spectral radius of the walk with law ``step``.

    Closed forms: 1 on lattices; Kesten's value on free groups and free
    products of Z/2 for equal weights, the Akemann-Ostrand minimisation
    otherwise, combined with laziness by spectral mapping.
    """
    if step.spec != spec:
        raise ValueError("step law belongs to a different group")
    if spec.kind == LATTICE:
        return SpectralEstimate(1.0, "amenable", 1.0, 0.0, True)
    value = _tree_closed_form(spec, step)
    method = "kesten" if step.is_radial else "akemann-ostrand"
    return SpectralEstimate(value, method, value, 0.0, True)


@dataclass
class GreenSum:
    partial: float
    tail_bound: float
    geometric_bound: float
    distance: int
    divergent: bool

    @property
    def upper(self) -> float:
        return self.partial + self.tail_bound


def green_partial_sum(
    spec: GroupSpec,
    step: StepDistribution,
    x: GroupElement,
    y: GroupElement,
    m: float,
    n_max: int,
    series: Optional[ReturnSeries] = None,
    rho: Optional[float] = None,
) -> GreenSum:
    """``sum_{n <= n_max} p^(n)(x,y) m^n`` with a geometric tail bound.

    The tail uses ``p^(n) <= rho^n``: ``sum_{n > n_max} (m rho)^n``.  When
    ``m rho >= 1`` the tail is infinite and ``divergent`` is set.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if series is None or series.n_max < n_max:
        series = return_probability_series(spec, step, max(n_max, 1))
    if rho is None:
        rho = spectral_radius(spec, step).value
    dist = word_distance(x, y)
    partial = 0.0
    for n in range(dist, n_max + 1):
        partial += series.transition(n, x, y) * m**n
    mr = m * rho
    if mr >= 1:
        return GreenSum(partial, math.inf, math.inf, dist, True)
    tail = mr ** (n_max + 1) / (1 - mr)
    return GreenSum(partial, tail, mr**dist / (1 - mr), dist, False)
