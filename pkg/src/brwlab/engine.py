"""Generation-synchronous branching random walks stored as flat arenas.

A :class:`FamilyTree` holds one or more independent family trees (one per
replica root) in append-only column arrays ordered by generation.  Node
randomness is keyed (see :mod:`brwlab.rng`), so a replica's tree does not
depend on which other replicas share the batch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import rng as keyed
from .arena import make_codec
from .groups import GroupElement, GroupSpec, StepDistribution, word_length
from .offspring import OffspringDistribution
from .rng import AliasTable

log = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 2_000_000


@dataclass(frozen=True)
class Caps:
    """Resource limits.  ``max_nodes`` applies per replica."""

    max_nodes: int = DEFAULT_MAX_NODES


class Generation(NamedTuple):
    index: int
    start: int
    position: np.ndarray
    replica: np.ndarray
    key: np.ndarray
    parent: np.ndarray


@dataclass
class FamilyTree:
    """Column store of labelled family trees.

    ``parent`` holds global node indices (-1 for roots), ``label`` the step
    letter taken from the parent, ``position`` codec ids, ``dead`` the
    dagger mark.  Generation ``g`` occupies ``gen_offsets[g]:gen_offsets[g+1]``.
    """

    spec: GroupSpec
    codec: object
    parent: np.ndarray
    label: np.ndarray
    position: np.ndarray
    replica: np.ndarray
    key: np.ndarray
    gen_offsets: np.ndarray
    horizon: int
    root_keys: np.ndarray
    capped: np.ndarray
    dead: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dead is None:
            self.dead = np.zeros(len(self.parent), dtype=bool)

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def n_replicas(self) -> int:
        return len(self.root_keys)

    @property
    def last_generation(self) -> int:
        return len(self.gen_offsets) - 2

    @property
    def generation(self) -> np.ndarray:
        sizes = np.diff(self.gen_offsets)
        return np.repeat(np.arange(len(sizes)), sizes)

    def gen_slice(self, g: int) -> slice:
        if g > self.last_generation:
            return slice(self.n_nodes, self.n_nodes)
        return slice(int(self.gen_offsets[g]), int(self.gen_offsets[g + 1]))

    def generation_sizes(self) -> np.ndarray:
        """``sizes[r, g]``: nodes of replica r in generation g (0 past extinction)."""
        out = np.zeros((self.n_replicas, self.horizon + 1), dtype=np.int64)
        for g in range(self.last_generation + 1):
            out[:, g] = np.bincount(self.replica[self.gen_slice(g)], minlength=self.n_replicas)
        return out

    def distances(self, nodes=None) -> np.ndarray:
        pos = self.position if nodes is None else self.position[nodes]
        return self.codec.norm(pos)

    def element(self, node: int) -> GroupElement:
        return self.codec.decode(int(self.position[node]))

    def root_cluster(self) -> np.ndarray:
        """Mask of nodes joined to their root by a path of open (undead) nodes."""
        inside = ~self.dead
        for g in range(1, self.last_generation + 1):
            sl = self.gen_slice(g)
            inside[sl] &= inside[self.parent[sl]]
        return inside

    def alive_at_horizon(self, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """Per replica: does ``mask`` (default: all nodes) reach the horizon generation?"""
        if self.last_generation < self.horizon:
            return np.zeros(self.n_replicas, dtype=bool)
        sl = self.gen_slice(self.horizon)
        rep = self.replica[sl]
        if mask is not None:
            rep = rep[mask[sl]]
        return np.bincount(rep, minlength=self.n_replicas) > 0

    def per_replica_count(self, mask: np.ndarray) -> np.ndarray:
        return np.bincount(self.replica[mask], minlength=self.n_replicas)

    def ancestors(self, node: int) -> list:
        path = [int(node)]
        while self.parent[path[-1]] >= 0:
            path.append(int(self.parent[path[-1]]))
        return path[::-1]


def _resolve_start(codec, spec: GroupSpec, start, n_rep: int) -> np.ndarray:
    if start is None:
        pid = codec.origin
    elif isinstance(start, GroupElement):
        if start.spec != spec:
            raise ValueError("start point belongs to a different group")
        pid = codec.encode(start)
    else:
        ids = np.asarray(start, dtype=np.int64)
        if ids.ndim == 1:
            if len(ids) != n_rep:
                raise ValueError("need one start id per root key")
            return ids.copy()
        pid = int(ids)
    return np.full(n_rep, pid, dtype=np.int64)


def grow(
    spec: GroupSpec,
    step: StepDistribution,
    mu: OffspringDistribution,
    horizon: int,
    root_keys: np.ndarray,
    start=None,
    caps: Caps = Caps(),
    codec=None,
    gamma: float = 1.0,
    breed_filter: Optional[Callable[[Generation], np.ndarray]] = None,
) -> FamilyTree:
    """Grow one family tree per root key up to generation ``horizon``.

    ``start`` is a group element, a codec id, an array of codec ids (one per
    root), or None for the identity.
    ``gamma < 1`` thins branching: a node that drew ``k >= 2`` children keeps
    them only if its thinning coin is below ``gamma``, otherwise it has one
    child.  ``breed_filter`` may veto reproduction of the nodes of a
    generation (returns a boolean mask; False means no offspring).

    Replicas that would exceed ``caps.max_nodes`` stop reproducing and are
    flagged in ``tree.capped``.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if step.spec != spec:
        raise ValueError("step law belongs to a different group")
    if codec is None:
        reach = horizon + (word_length(start) if isinstance(start, GroupElement) else 0)
        codec = make_codec(spec, reach)
    root_keys = np.asarray(root_keys, dtype=np.uint64)
    n_rep = len(root_keys)
    step_alias = AliasTable(step.probs)

    keys = root_keys.copy()
    pos = _resolve_start(codec, spec, start, n_rep)
    rep = np.arange(n_rep, dtype=np.int64)
    par = np.full(n_rep, -1, dtype=np.int64)
    lab = np.full(n_rep, spec.identity_label, dtype=np.int64)
    counts = np.ones(n_rep, dtype=np.int64)
    capped = np.zeros(n_rep, dtype=bool)

    cols = {"parent": [par], "label": [lab], "position": [pos], "replica": [rep], "key": [keys]}
    offsets = [0, n_rep]
    for g in range(horizon):
        n = len(keys)
        kids = mu.alias.sample(keyed.uniforms(keys, keyed.OFFSPRING))
        if gamma < 1.0:
            coin = keyed.uniforms(keys, keyed.THIN)
            kids = np.where((kids >= 2) & (coin >= gamma), 1, kids)
        kids[capped[rep]] = 0
        if breed_filter is not None:
            allowed = breed_filter(Generation(g, offsets[-2], pos, rep, keys, par))
            kids = np.where(allowed, kids, 0)
        new_per_rep = np.bincount(rep, weights=kids, minlength=n_rep).astype(np.int64)
        over = counts + new_per_rep > caps.max_nodes
        if over.any():
            capped |= over
            kids[over[rep]] = 0
            new_per_rep[over] = 0
            log.warning("node cap %d hit by %d replica(s) at generation %d", caps.max_nodes, int(over.sum()), g + 1)
        counts += new_per_rep
        total = int(kids.sum())
        if total == 0:
            break
        local = np.repeat(np.arange(n, dtype=np.int64), kids)
        first = np.cumsum(kids) - kids
        slot = np.arange(total, dtype=np.int64) - np.repeat(first, kids)
        keys = keyed.child_keys(keys[local], slot)
        lab = step_alias.sample(keyed.uniforms(keys, keyed.STEP)).astype(np.int64)
        pos = codec.step(pos[local], lab)
        rep = rep[local]
        par = offsets[-2] + local
        for name, arr in (("parent", par), ("label", lab), ("position", pos), ("replica", rep), ("key", keys)):
            cols[name].append(arr)
        offsets.append(offsets[-1] + total)

    return FamilyTree(
        spec=spec,
        codec=codec,
        parent=np.concatenate(cols["parent"]),
        label=np.concatenate(cols["label"]),
        position=np.concatenate(cols["position"]),
        replica=np.concatenate(cols["replica"]),
        key=np.concatenate(cols["key"]),
        gen_offsets=np.asarray(offsets, dtype=np.int64),
        horizon=horizon,
        root_keys=root_keys,
        capped=capped,
    )


def as_root_keys(rng) -> np.ndarray:
    """Root keys from an int key, an array of keys, or a numpy Generator (one key drawn)."""
    if isinstance(rng, np.random.Generator):
        return rng.integers(0, 2**64, size=1, dtype=np.uint64)
    return np.atleast_1d(np.asarray(rng, dtype=np.uint64))


def run_brw(
    spec: GroupSpec,
    step: StepDistribution,
    mu: OffspringDistribution,
    start: Optional[GroupElement],
    horizon: int,
    rng,
    caps: Caps = Caps(),
) -> FamilyTree:
    """Branching random walk run(s) to ``horizon``.

    ``rng`` is a root key, an array of root keys (one tree each) or a
    ``numpy.random.Generator`` from which a single root key is drawn.
    """
    return grow(spec, step, mu, horizon, as_root_keys(rng), start=start, caps=caps)


class Regime(NamedTuple):
    label: str
    critical: bool
    product: float


def classify_survival_regime(m: float, rho: float) -> Regime:
    """Strong (local) survival iff ``m * rho > 1``."""
    if m <= 0 or not 0 < rho <= 1:
        raise ValueError("need m > 0 and rho in (0, 1]")
    prod = m * rho
    if np.isclose(prod, 1.0, rtol=0, atol=1e-12):
        return Regime("weak-or-extinct", True, prod)
    return Regime("strong" if prod > 1 else "weak-or-extinct", False, prod)


def visits(tree: FamilyTree, target: Optional[GroupElement] = None, radius: Optional[int] = None) -> np.ndarray:
    """Per-replica number of nodes at ``target`` or inside the ball ``B(o, radius)``."""
    if (target is None) == (radius is None):
        raise ValueError("give exactly one of target or radius")
    if target is not None:
        pid = tree.codec.encode(target)
        mask = tree.position == pid
    else:
        mask = tree.distances() <= radius
    return tree.per_replica_count(mask)


def site_histogram(tree: FamilyTree, replica: int = 0) -> dict:
    """Visit counts per base-graph site for one replica."""
    pos = tree.position[tree.replica == replica]
    ids, cnt = np.unique(pos, return_counts=True)
    return {tree.codec.decode(i): int(c) for i, c in zip(ids, cnt)}


@dataclass
class LastExit:
    """``R_n`` per replica: one past the last generation with a node in ``B(o, n)``.

    ``censored`` marks replicas whose horizon generation still meets the
    ball; ``front_alive`` marks replicas that had not died out by the horizon
    (later returns into the ball cannot be excluded either).
    """

    value: np.ndarray
    censored: np.ndarray
    front_alive: np.ndarray


def last_exit(tree: FamilyTree, n: int) -> LastExit:
    gen = tree.generation
    inside = tree.distances() <= n
    value = np.zeros(tree.n_replicas, dtype=np.int64)
    np.maximum.at(value, tree.replica[inside], gen[inside] + 1)
    front = tree.alive_at_horizon()
    censored = np.zeros(tree.n_replicas, dtype=bool)
    if tree.last_generation == tree.horizon:
        sl = tree.gen_slice(tree.horizon)
        rep = tree.replica[sl][inside[sl]]
        censored = np.bincount(rep, minlength=tree.n_replicas) > 0
    return LastExit(value, censored, front)


def generation_records(tree: FamilyTree, ball_radius: int = 0) -> list:
    """One summary dict per generation (sizes and ball occupancy), summed over replicas."""
    records = []
    dist = tree.distances()
    for g in range(tree.last_generation + 1):
        sl = tree.gen_slice(g)
        rep = tree.replica[sl]
        records.append(
            {
                "generation": g,
                "size": int(sl.stop - sl.start),
                "alive_replicas": int(len(np.unique(rep))),
                "ball_radius": ball_radius,
                "ball_occupancy": int(np.count_nonzero(dist[sl] <= ball_radius)),
                "dead": int(np.count_nonzero(tree.dead[sl])),
            }
        )
    return records
