"""Truncated branching random walks: at most N particles per site and generation.

Selection among the particles ``W`` of one (generation, site) cell is a
uniformly random permutation realised by i.i.d. node priorities: the N
particles with the smallest priorities survive.  One priority per node
couples every N at once.

Modes
-----
``paper_exact``
    The auxiliary BRW is run unchanged; non-selected nodes are marked dead
    and survival means the open cluster of the root reaches the horizon.
    Dead lineages keep breeding and keep occupying cells.
``operational``
    Non-selected particles have no offspring; cells only count live lineages.
``site_resource``
    After the run every node whose site received more than N visits in total
    (over all generations) is marked dead.  Marks depend on the horizon:
    longer runs accumulate more visits, hence more marks and smaller
    clusters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as keyed
from .engine import Caps, FamilyTree, Generation, as_root_keys, grow
from .groups import GroupElement, GroupSpec, StepDistribution
from .offspring import OffspringDistribution
from .stats import Proportion, wilson

PAPER_EXACT = "paper_exact"
OPERATIONAL = "operational"
SITE_RESOURCE = "site_resource"
MODES = (PAPER_EXACT, OPERATIONAL, SITE_RESOURCE)


def _ranks(gen: np.ndarray, rep: np.ndarray, pos: np.ndarray, prio: np.ndarray) -> np.ndarray:
    """Rank of each node by priority inside its (generation, replica, site) cell."""
    order = np.lexsort((prio, pos, rep, gen))
    g, r, p = gen[order], rep[order], pos[order]
    new_cell = np.ones(len(order), dtype=bool)
    new_cell[1:] = (g[1:] != g[:-1]) | (r[1:] != r[:-1]) | (p[1:] != p[:-1])
    starts = np.maximum.accumulate(np.where(new_cell, np.arange(len(order)), 0))
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(len(order)) - starts
    return ranks


def cell_ranks(tree: FamilyTree) -> np.ndarray:
    prio = keyed.uniforms(tree.key, keyed.PRIORITY)
    return _ranks(tree.generation, tree.replica, tree.position, prio)


def site_visits(tree: FamilyTree) -> np.ndarray:
    """Total visits (all generations) to each node's site within its replica."""
    order = np.lexsort((tree.position, tree.replica))
    r, p = tree.replica[order], tree.position[order]
    new_cell = np.ones(len(order), dtype=bool)
    new_cell[1:] = (r[1:] != r[:-1]) | (p[1:] != p[:-1])
    cell = np.cumsum(new_cell) - 1
    counts = np.bincount(cell)
    out = np.empty(len(order), dtype=np.int64)
    out[order] = counts[cell]
    return out


@dataclass
class TruncationResult:
    """Per-replica outcome of a truncated run (arrays indexed by replica)."""

    N: int
    mode: str
    horizon: int
    root_keys: np.ndarray
    cluster_size: np.ndarray
    alive: np.ndarray
    alive_per_generation: np.ndarray
    capped: np.ndarray


def _result(tree: FamilyTree, N: int, mode: str) -> TruncationResult:
    cluster = tree.root_cluster()
    per_gen = np.zeros((tree.n_replicas, tree.horizon + 1), dtype=np.int64)
    for g in range(tree.last_generation + 1):
        sl = tree.gen_slice(g)
        per_gen[:, g] = np.bincount(tree.replica[sl][cluster[sl]], minlength=tree.n_replicas)
    return TruncationResult(
        N=N,
        mode=mode,
        horizon=tree.horizon,
        root_keys=tree.root_keys,
        cluster_size=tree.per_replica_count(cluster),
        alive=per_gen[:, tree.horizon] > 0,
        alive_per_generation=per_gen,
        capped=tree.capped.copy(),
    )


def _operational_filter(N: int):
    def allowed(gen: Generation) -> np.ndarray:
        prio = keyed.uniforms(gen.key, keyed.PRIORITY)
        zeros = np.zeros(len(gen.key), dtype=np.int64)
        return _ranks(zeros, gen.replica, gen.position, prio) < N

    return allowed


def run_truncated(
    spec: GroupSpec,
    step: StepDistribution,
    mu: OffspringDistribution,
    N: int,
    mode: str,
    horizon: int,
    rng,
    caps: Caps = Caps(),
    start: Optional[GroupElement] = None,
):
    """Run BRW_N; returns the marked family tree and its :class:`TruncationResult`."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown truncation mode {mode!r}")
    keys = as_root_keys(rng)
    if mode == OPERATIONAL:
        tree = grow(spec, step, mu, horizon, keys, start=start, caps=caps, breed_filter=_operational_filter(N))
        tree.dead = cell_ranks(tree) >= N
    else:
        tree = grow(spec, step, mu, horizon, keys, start=start, caps=caps)
        if mode == PAPER_EXACT:
            tree.dead = cell_ranks(tree) >= N
        else:
            tree.dead = site_visits(tree) > N
    return tree, _result(tree, N, mode)


@dataclass
class DominanceReport:
    """Containment of the ``paper_exact`` root cluster in the operational live set."""

    contained: bool
    strict: bool
    per_generation: list = field(default_factory=list)


def dominance_check(paper_tree: FamilyTree, operational_tree: FamilyTree) -> DominanceReport:
    """Check, generation by generation, that every ``paper_exact`` root-cluster node
    is alive in the coupled operational run.

    Nodes are matched by key, so both runs must come from the same root keys.
    """
    if not np.array_equal(paper_tree.root_keys, operational_tree.root_keys):
        raise ValueError("runs are not coupled: root keys differ")
    if paper_tree.horizon != operational_tree.horizon:
        raise ValueError("runs are not coupled: horizons differ")
    paper_in = paper_tree.root_cluster()
    op_alive = ~operational_tree.dead
    rows = []
    contained, strict = True, False
    for g in range(paper_tree.horizon + 1):
        a = paper_tree.key[paper_tree.gen_slice(g)][paper_in[paper_tree.gen_slice(g)]]
        b = operational_tree.key[operational_tree.gen_slice(g)][op_alive[operational_tree.gen_slice(g)]]
        inside = np.isin(a, b)
        ok = bool(inside.all())
        contained &= ok
        strict |= len(b) > int(inside.sum())
        rows.append({"generation": g, "paper_cluster": int(len(a)), "operational_alive": int(len(b)), "contained": ok})
    return DominanceReport(contained, strict, rows)


@dataclass
class SweepTally:
    """Additive replica counts for one sweep chunk."""

    N_values: tuple
    replicas: int = 0
    alive: np.ndarray = None
    cluster_total: np.ndarray = None
    plain_alive: int = 0
    violations: int = 0
    capped: int = 0

    def __post_init__(self):
        k = len(self.N_values)
        if self.alive is None:
            self.alive = np.zeros(k, dtype=np.int64)
        if self.cluster_total is None:
            self.cluster_total = np.zeros(k, dtype=np.int64)

    def __add__(self, other: "SweepTally") -> "SweepTally":
        return SweepTally(
            self.N_values,
            self.replicas + other.replicas,
            self.alive + other.alive,
            self.cluster_total + other.cluster_total,
            self.plain_alive + other.plain_alive,
            self.violations + other.violations,
            self.capped + other.capped,
        )


def sweep_chunk(
    spec: GroupSpec,
    step: StepDistribution,
    mu: OffspringDistribution,
    N_values: Sequence[int],
    mode: str,
    horizon: int,
    keys: np.ndarray,
    caps: Caps = Caps(),
    start: Optional[GroupElement] = None,
) -> SweepTally:
    """Coupled evaluation of all N on the replicas rooted at ``keys``.

    ``violations`` counts nodes in the survivor set at a smaller N that are
    missing at the next larger N (always 0 for paper_exact and
    site_resource, where containment holds pathwise).
    """
    N_values = tuple(sorted(int(n) for n in N_values))
    tally = SweepTally(N_values, replicas=len(keys))
    if mode == OPERATIONAL:
        prev = None
        for i, N in enumerate(N_values):
            tree, res = run_truncated(spec, step, mu, N, mode, horizon, keys, caps, start)
            tally.alive[i] = int(res.alive.sum())
            tally.cluster_total[i] = int(res.cluster_size.sum())
            live = tree.key[tree.root_cluster()]
            if prev is not None:
                tally.violations += int((~np.isin(prev, live)).sum())
            prev = live
            tally.capped = max(tally.capped, int(res.capped.sum()))
        plain = grow(spec, step, mu, horizon, keys, start=start, caps=caps)
        tally.plain_alive = int(plain.alive_at_horizon().sum())
        return tally
    if mode not in MODES:
        raise ValueError(f"unknown truncation mode {mode!r}")
    tree = grow(spec, step, mu, horizon, keys, start=start, caps=caps)
    tally.plain_alive = int(tree.alive_at_horizon().sum())
    tally.capped = int(tree.capped.sum())
    score = cell_ranks(tree) if mode == PAPER_EXACT else site_visits(tree)
    # paper_exact: dead iff rank >= N; site_resource: dead iff visits > N
    threshold_shift = 0 if mode == PAPER_EXACT else 1
    prev = None
    for i, N in enumerate(N_values):
        tree.dead = score >= N + threshold_shift
        cluster = tree.root_cluster()
        tally.alive[i] = int(tree.alive_at_horizon(cluster).sum())
        tally.cluster_total[i] = int(cluster.sum())
        if prev is not None:
            tally.violations += int((prev & ~cluster).sum())
        prev = cluster
    return tally


@dataclass
class SweepRow:
    N: int
    alive: Proportion
    mean_cluster_size: float


@dataclass
class SweepResult:
    mode: str
    horizon: int
    rows: list
    plain: Proportion
    violations: int
    capped: int
    epsilon: float
    n_c_hat: Optional[int]
    n_c_bracket: tuple

    @property
    def monotone(self) -> bool:
        est = [r.alive.successes for r in self.rows]
        return all(a <= b for a, b in zip(est, est[1:]))


def summarize_sweep(tally: SweepTally, mode: str, horizon: int, epsilon: float = 0.01) -> SweepResult:
    """Wilson intervals per N and the estimated critical N.

    ``n_c_hat`` is the smallest N whose lower bound exceeds ``epsilon``.  The
    bracket ``(lo, n_c_hat)`` has ``lo`` the largest smaller N whose upper
    bound is below ``epsilon`` (None if no such N).
    """
    rows = []
    for i, N in enumerate(tally.N_values):
        rows.append(SweepRow(N, wilson(tally.alive[i], tally.replicas), tally.cluster_total[i] / tally.replicas))
    n_hat = next((r.N for r in rows if r.alive.low > epsilon), None)
    lo = None
    for r in rows:
        if n_hat is not None and r.N >= n_hat:
            break
        if r.alive.high < epsilon:
            lo = r.N
    return SweepResult(
        mode, horizon, rows, wilson(tally.plain_alive, tally.replicas), tally.violations, tally.capped, epsilon, n_hat, (lo, n_hat)
    )


def survival_sweep(
    spec: GroupSpec,
    step: StepDistribution,
    mu: OffspringDistribution,
    N_values: Sequence[int],
    horizon: int,
    replicas: int,
    rng,
    mode: str = PAPER_EXACT,
    caps: Caps = Caps(),
    epsilon: float = 0.01,
    chunk: int = 5000,
    start: Optional[GroupElement] = None,
) -> SweepResult:
    """Estimate ``P(root cluster alive at horizon)`` for every N with common random numbers.

    ``rng`` is a master seed (int); replica i uses the root key derived from
    ``(seed, "truncated", i)``.
    """
    seed = int(rng.integers(2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    tally = SweepTally(tuple(sorted(N_values)))
    for lo in range(0, replicas, chunk):
        keys = keyed.root_keys(seed, "truncated", range(lo, min(lo + chunk, replicas)))
        tally = tally + sweep_chunk(spec, step, mu, N_values, mode, horizon, keys, caps, start)
    return summarize_sweep(tally, mode, horizon, epsilon)
