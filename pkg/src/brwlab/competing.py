"""Competing branching random walks: an invasive process kills noninvasive
particles that share its site in the same generation.

Pair mode co-simulates one invasive BRW started at ``x != o`` and the
auxiliary noninvasive BRW started at ``o``; the noninvasive survivors are the
open cluster of the root.  Adapted mode replaces the single invasive process
by independent invasive copies seeded at every site of a window ``B(o, R)``
that the (gamma-thinned) noninvasive process visits at least N times; a site
is deadly when any copy ever visits it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as keyed
from .arena import make_codec
from .engine import Caps, FamilyTree, as_root_keys, grow
from .groups import GroupElement, GroupSpec, StepDistribution, compose, inverse, word_length
from .offspring import OffspringDistribution, gamma_critical, gamma_truncate
from .spectral import spectral_radius
from .stats import Proportion, wilson

PAIR = "pair"
ADAPTED = "adapted"


@dataclass(frozen=True)
class Species:
    mu: OffspringDistribution
    step: StepDistribution


@dataclass(frozen=True)
class AdaptedMode:
    N: int
    gamma: float
    window: int
    max_seeds: int = 100_000


@dataclass(frozen=True)
class CompetingConfig:
    spec: GroupSpec
    invasive: Species
    noninvasive: Species
    horizon: int
    start: Optional[GroupElement] = None
    mode: object = PAIR
    caps: Caps = Caps()

    def __post_init__(self):
        for sp in (self.invasive, self.noninvasive):
            if sp.step.spec != self.spec:
                raise ValueError("step law belongs to a different group")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.mode == PAIR:
            if self.start is None or word_length(self.start) == 0:
                raise ValueError("pair mode needs an invasive start x != o")
        elif isinstance(self.mode, AdaptedMode):
            m = self.mode
            if m.N < 1 or m.window < 0:
                raise ValueError("adapted mode needs N >= 1 and window >= 0")
            if not 0 < m.gamma <= 1:
                raise ValueError("gamma must lie in (0, 1]")
            gc = gamma_critical(self.noninvasive.mu)
            if gc.valid and m.gamma <= gc.value:
                raise ValueError(f"gamma={m.gamma} is not above gamma_c={gc.value:.6g}")
        else:
            raise ValueError(f"unknown competing mode {self.mode!r}")


def _codec_for(cfg: CompetingConfig):
    reach = 2 * cfg.horizon + (word_length(cfg.start) if cfg.start is not None else 0)
    if isinstance(cfg.mode, AdaptedMode):
        reach += cfg.mode.window
    return make_codec(cfg.spec, reach)


def _occupied(gen_a, rep_a, pos_a, gen_b, rep_b, pos_b) -> np.ndarray:
    """Mask over the b-nodes: is (generation, replica, site) occupied by some a-node?

    Pass ``gen_a = gen_b = None`` to ignore generations.
    """
    if len(pos_a) == 0 or len(pos_b) == 0:
        return np.zeros(len(pos_b), dtype=bool)
    pos = np.concatenate([pos_a, pos_b])
    _, site = np.unique(pos, return_inverse=True)
    site = site.ravel().astype(np.int64)
    n_sites = int(site.max()) + 1
    n_rep = int(max(rep_a.max(), rep_b.max())) + 1
    cell = np.concatenate([rep_a, rep_b]).astype(np.int64) * n_sites + site
    if gen_a is not None:
        cell = np.concatenate([gen_a, gen_b]).astype(np.int64) * (n_rep * n_sites) + cell
    return np.isin(cell[len(pos_a) :], cell[: len(pos_a)])


@dataclass
class CoexistenceResult:
    """Per-replica survival flags at each evaluated horizon.

    ``invasive_alive[i, r]`` refers to ``horizons[i]`` and replica r.
    """

    horizons: tuple
    invasive_alive: np.ndarray
    noninvasive_alive: np.ndarray
    capped: np.ndarray

    @property
    def joint(self) -> np.ndarray:
        return self.invasive_alive & self.noninvasive_alive

    def frequencies(self, i: int = -1) -> dict:
        n = self.invasive_alive.shape[1]
        return {
            "horizon": self.horizons[i],
            "invasive": wilson(int(self.invasive_alive[i].sum()), n),
            "noninvasive": wilson(int(self.noninvasive_alive[i].sum()), n),
            "joint": wilson(int(self.joint[i].sum()), n),
        }


def _alive_at(tree: FamilyTree, mask: Optional[np.ndarray], g: int) -> np.ndarray:
    sl = tree.gen_slice(g)
    rep = tree.replica[sl] if mask is None else tree.replica[sl][mask[sl]]
    return np.bincount(rep, minlength=tree.n_replicas) > 0


def run_competing(cfg: CompetingConfig, rng, horizons: Optional[Sequence[int]] = None):
    """Pair-mode co-simulation.

    Returns ``(invasive_tree, noninvasive_tree, result)``; the noninvasive
    tree carries the dagger marks.  ``horizons`` (each <= cfg.horizon) are
    the times at which survival is read off; marks up to generation T do not
    depend on later generations, so one run serves all of them.
    """
    if cfg.mode != PAIR:
        raise ValueError("run_competing needs pair mode; use run_adapted")
    keys = as_root_keys(rng)
    horizons = tuple(horizons) if horizons else (cfg.horizon,)
    if max(horizons) > cfg.horizon:
        raise ValueError("evaluation horizon beyond the simulated horizon")
    codec = _codec_for(cfg)
    inv = grow(
        cfg.spec, cfg.invasive.step, cfg.invasive.mu, cfg.horizon, keyed.tagged(keys, keyed.INVASIVE),
        start=cfg.start, caps=cfg.caps, codec=codec,
    )
    non = grow(cfg.spec, cfg.noninvasive.step, cfg.noninvasive.mu, cfg.horizon, keys, caps=cfg.caps, codec=codec)
    non.dead = _occupied(inv.generation, inv.replica, inv.position, non.generation, non.replica, non.position)
    cluster = non.root_cluster()
    inv_alive = np.stack([_alive_at(inv, None, t) for t in horizons])
    non_alive = np.stack([_alive_at(non, cluster, t) for t in horizons])
    return inv, non, CoexistenceResult(horizons, inv_alive, non_alive, inv.capped | non.capped)


def kill_rule_violations(inv: FamilyTree, non: FamilyTree, generations: Optional[Sequence[int]] = None) -> int:
    """Count noninvasive nodes whose dagger mark disagrees with a direct check
    of same-generation occupancy, over the given generations (default: all)."""
    if generations is None:
        generations = range(non.last_generation + 1)
    bad = 0
    for g in generations:
        a, b = inv.gen_slice(g), non.gen_slice(g)
        occupied = set(zip(inv.replica[a].tolist(), inv.position[a].tolist()))
        expect = np.array(
            [(r, x) in occupied for r, x in zip(non.replica[b].tolist(), non.position[b].tolist())], dtype=bool
        )
        bad += int((expect != non.dead[b]).sum())
    return bad


@dataclass
class AdaptedResult:
    """Per-replica outcome of an adapted run."""

    N: int
    gamma: float
    window: int
    horizon: int
    seeded: np.ndarray
    root_dead: np.ndarray
    noninvasive_alive: np.ndarray
    seed_capped: np.ndarray
    capped: np.ndarray
    invasive_alive: np.ndarray
    seed_sites: list = field(default_factory=list)


def run_adapted(cfg: CompetingConfig, rng):
    """Adapted construction with gamma-thinning and multiplicity-N seeding.

    A site x in ``B(o, window)`` is seeded once, at the first generation its
    cumulative visit count by the noninvasive process reaches N.  Each copy
    runs for ``cfg.horizon`` generations from its own start.  Returns
    ``(noninvasive_tree, invasive_copies_tree_or_None, AdaptedResult)``.
    ``seed_sites[r]`` lists ``(site, seeding generation)`` for replica r.
    """
    mode = cfg.mode
    if not isinstance(mode, AdaptedMode):
        raise ValueError("run_adapted needs an AdaptedMode")
    keys = as_root_keys(rng)
    codec = _codec_for(cfg)
    non = grow(
        cfg.spec, cfg.noninvasive.step, cfg.noninvasive.mu, cfg.horizon, keys,
        caps=cfg.caps, codec=codec, gamma=mode.gamma,
    )
    n_rep = non.n_replicas
    gen = non.generation
    # cumulative multiplicity per (replica, site), in generation order
    order = np.lexsort((gen, non.position, non.replica))
    r, p, g = non.replica[order], non.position[order], gen[order]
    new_cell = np.ones(len(order), dtype=bool)
    new_cell[1:] = (r[1:] != r[:-1]) | (p[1:] != p[:-1])
    start_idx = np.maximum.accumulate(np.where(new_cell, np.arange(len(order)), 0))
    running = np.arange(len(order)) - start_idx + 1
    hit = (running == mode.N) & (codec.norm(p) <= mode.window)
    seed_rep, seed_pos, seed_gen = r[hit], p[hit], g[hit]

    seeded = np.bincount(seed_rep, minlength=n_rep)
    seed_capped = seeded > mode.max_seeds
    if seed_capped.any():
        keep = np.ones(len(seed_rep), dtype=bool)
        for rep_i in np.nonzero(seed_capped)[0]:
            idx = np.nonzero(seed_rep == rep_i)[0]
            keep[idx[mode.max_seeds :]] = False
        seed_rep, seed_pos, seed_gen = seed_rep[keep], seed_pos[keep], seed_gen[keep]
        seeded = np.bincount(seed_rep, minlength=n_rep)

    copies = None
    if len(seed_rep):
        copy_keys = keyed.child_keys(keyed.tagged(keys[seed_rep], keyed.INVASIVE), codec.canonical(seed_pos))
        copies = grow(
            cfg.spec, cfg.invasive.step, cfg.invasive.mu, cfg.horizon, copy_keys,
            start=seed_pos, caps=cfg.caps, codec=codec,
        )
        owner = seed_rep[copies.replica]
        non.dead = _occupied(None, owner, copies.position, None, non.replica, non.position)
    cluster = non.root_cluster()
    roots = non.gen_slice(0)
    capped = non.capped.copy()
    inv_alive = np.zeros(n_rep, dtype=bool)
    if copies is not None:
        capped |= np.bincount(seed_rep[copies.capped], minlength=n_rep) > 0
        inv_alive = np.bincount(seed_rep[copies.alive_at_horizon()], minlength=n_rep) > 0
    sites = [[] for _ in range(n_rep)]
    for rep_i, pos_i, gen_i in zip(seed_rep, seed_pos, seed_gen):
        sites[rep_i].append((codec.decode(pos_i), int(gen_i)))
    result = AdaptedResult(
        N=mode.N,
        gamma=mode.gamma,
        window=mode.window,
        horizon=cfg.horizon,
        seeded=seeded,
        root_dead=non.dead[roots].copy(),
        noninvasive_alive=_alive_at(non, cluster, cfg.horizon),
        seed_capped=seed_capped,
        capped=capped,
        invasive_alive=inv_alive,
        seed_sites=sites,
    )
    return non, copies, result


@dataclass
class DaggerMarginal:
    marginal: Proportion
    invasive_m_rho: float
    m_gamma: float
    seeded_mean: float


def estimate_dagger_marginal(runs: Sequence[AdaptedResult], cfg: CompetingConfig, min_replicas: int = 100) -> DaggerMarginal:
    """Frequency of a dead root over adapted replicas, with the driver quantities."""
    dead = np.concatenate([r.root_dead for r in runs]) if runs else np.zeros(0, dtype=bool)
    if len(dead) == 0:
        raise ValueError("no replicas")
    if len(dead) < min_replicas:
        raise ValueError(f"need at least {min_replicas} replicas, got {len(dead)}")
    seeded = np.concatenate([r.seeded for r in runs])
    rho_i = spectral_radius(cfg.spec, cfg.invasive.step).value
    m_gamma = gamma_truncate(cfg.noninvasive.mu, cfg.mode.gamma).m_gamma
    return DaggerMarginal(wilson(int(dead.sum()), len(dead)), cfg.invasive.mu.mean * rho_i, m_gamma, float(seeded.mean()))


def first_step_kill_probability(
    spec: GroupSpec,
    noninvasive_step: StepDistribution,
    invasive: Species,
    start: GroupElement,
) -> float:
    """Exact probability that a generation-1 noninvasive particle (from o) is
    killed by the generation-1 children of an invasive particle at ``start``.

    With K invasive children, ``P(killed | at z) = 1 - F_K(1 - q_i(start^-1 z))``.
    For a single invasive child this is the convolution ``sum_z q_n(z) q_i(start^-1 z)``.
    """
    letters = list(range(spec.n_gens)) + [spec.identity_label]
    start_inv = inverse(start)
    total = 0.0
    for l in letters:
        z = spec.identity() if l == spec.identity_label else spec.generator(l)
        w = compose(start_inv, z)
        if word_length(w) > 1:
            continue
        if word_length(w) == 0:
            qi = invasive.step(spec.identity_label)
        else:
            match = [t for t in range(spec.n_gens) if spec.generator(t) == w]
            qi = invasive.step(match[0])
        total += noninvasive_step(l) * (1.0 - float(invasive.mu.pgf(1.0 - qi)))
    return total
