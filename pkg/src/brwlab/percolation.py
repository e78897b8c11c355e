"""Site percolation on rooted trees: marked trees, unimodular Galton-Watson
sampling, mass-transport checks, the psi mass redistribution on regular-tree
windows, anchored isoperimetry and the Bernoulli thinning oracle.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .offspring import OffspringDistribution, depth_survival, thinned_extinction, ugw_root_law
from .stats import Proportion, wilson


@dataclass
class MarkedTree:
    """Finite rooted tree stored in breadth-first order.

    Vertex 0 is the root and the children of ``v`` are the contiguous block
    ``first_child[v] : first_child[v] + n_children[v]``.  ``open`` is the
    mark (True for an open vertex, False for a dagger).  ``censored`` flags
    vertices whose offspring were not sampled (the truncation layer).
    ``label[v]`` is the mark of the edge from the parent to ``v`` (-1 at the
    root), if edge labels were drawn.
    """

    parent: np.ndarray
    depth: np.ndarray
    first_child: np.ndarray
    n_children: np.ndarray
    open: np.ndarray
    censored: np.ndarray
    label: Optional[np.ndarray] = None
    empty: bool = False

    @property
    def size(self) -> int:
        return 0 if self.empty else len(self.parent)

    @property
    def degree(self) -> np.ndarray:
        return self.n_children + (self.parent >= 0)

    @property
    def max_degree(self) -> int:
        return int(self.degree.max()) if self.size else 0

    def children(self, v: int) -> range:
        a = int(self.first_child[v])
        return range(a, a + int(self.n_children[v]))

    def neighbors(self, v: int) -> list:
        out = list(self.children(v))
        if self.parent[v] >= 0:
            out.append(int(self.parent[v]))
        return out

    @property
    def level_sizes(self) -> np.ndarray:
        return np.bincount(self.depth) if self.size else np.zeros(0, dtype=np.int64)


def _empty_tree() -> MarkedTree:
    z = np.zeros(0, dtype=np.int64)
    return MarkedTree(z, z, z, z, np.zeros(0, dtype=bool), np.zeros(0, dtype=bool), None, empty=True)


def tree_from_offspring(counts_by_level: Sequence[np.ndarray], censor_last: bool = True) -> MarkedTree:
    """Assemble a breadth-first tree from per-level offspring counts.

    ``counts_by_level[L][i]`` is the number of children of the i-th vertex of
    level L.  Vertices of the level after the last one are leaves, censored
    when ``censor_last``.
    """
    parent = [np.array([-1], dtype=np.int64)]
    depth = [np.zeros(1, dtype=np.int64)]
    n_children = []
    offset, level_start = 1, 0
    for L, counts in enumerate(counts_by_level):
        counts = np.asarray(counts, dtype=np.int64)
        if len(counts) != len(parent[-1]):
            raise ValueError(f"level {L}: {len(counts)} counts for {len(parent[-1])} vertices")
        n_children.append(counts)
        parent.append(np.repeat(np.arange(level_start, level_start + len(counts)), counts))
        depth.append(np.full(int(counts.sum()), L + 1, dtype=np.int64))
        level_start = offset
        offset += int(counts.sum())
    n_last = len(parent[-1])
    n_children.append(np.zeros(n_last, dtype=np.int64))
    n_children = np.concatenate(n_children)
    first_child = 1 + np.cumsum(n_children) - n_children
    censored = np.zeros(len(n_children), dtype=bool)
    if censor_last:
        censored[len(n_children) - n_last :] = True
    return MarkedTree(
        parent=np.concatenate(parent),
        depth=np.concatenate(depth),
        first_child=first_child,
        n_children=n_children,
        open=np.ones(len(n_children), dtype=bool),
        censored=censored,
    )


def regular_tree(d: int, depth: int) -> MarkedTree:
    """Ball of radius ``depth`` around the root of the d-regular tree."""
    counts = []
    width = 1
    for L in range(depth):
        k = d if L == 0 else d - 1
        counts.append(np.full(width, k, dtype=np.int64))
        width *= k
    return tree_from_offspring(counts)


def _sample_levels(root_degree, mu: OffspringDistribution, depth: int, rng: np.random.Generator) -> list:
    if depth == 0:
        return []
    counts = [np.array([root_degree], dtype=np.int64)]
    for _ in range(1, depth):
        counts.append(mu.alias.draw(rng, int(counts[-1].sum())).astype(np.int64))
    return counts


def sample_ugw(mu: OffspringDistribution, depth: int, rng: np.random.Generator) -> MarkedTree:
    """Unimodular Galton-Watson tree cut at ``depth``.

    The root has ``k + 1`` children with probability proportional to
    ``mu_k / (k + 1)``; every other vertex has ``k`` children with
    probability ``mu_k``.  The layer at ``depth`` is censored.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    law = ugw_root_law(mu)
    root_deg = int(rng.choice(len(law.probs), p=law.array))
    return tree_from_offspring(_sample_levels(root_deg, mu, depth, rng))


def sample_gw(mu: OffspringDistribution, depth: int, rng: np.random.Generator) -> MarkedTree:
    """Plain Galton-Watson tree (root breeds like everyone else)."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    root = int(mu.alias.draw(rng, 1)[0])
    return tree_from_offspring(_sample_levels(root, mu, depth, rng))


def sample_ugw_labeled(mu: OffspringDistribution, q, depth: int, rng: np.random.Generator) -> MarkedTree:
    """UGW tree with i.i.d. edge labels drawn from the probability vector ``q``.

    ``q`` may be a sequence of probabilities or any object with a ``probs``
    attribute (such as a step distribution).
    """
    probs = np.asarray(getattr(q, "probs", q), dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
        raise ValueError("edge-label law must be a probability vector")
    tree = sample_ugw(mu, depth, rng)
    label = rng.choice(len(probs), size=tree.size, p=probs).astype(np.int64)
    label[0] = -1
    tree.label = label
    return tree


def bernoulli_site_percolation(tree: MarkedTree, p: float, rng: np.random.Generator) -> MarkedTree:
    """Copy of ``tree`` with every vertex open independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    out = MarkedTree(**{k: getattr(tree, k) for k in tree.__dataclass_fields__})
    out.open = rng.random(tree.size) < p
    return out


def _subtree(tree: MarkedTree, keep: np.ndarray) -> MarkedTree:
    """Restrict to a parent-closed vertex set, preserving breadth-first order."""
    idx = np.nonzero(keep)[0]
    new_id = np.full(tree.size, -1, dtype=np.int64)
    new_id[idx] = np.arange(len(idx))
    parent = np.where(tree.parent[idx] >= 0, new_id[np.maximum(tree.parent[idx], 0)], -1)
    n_children = np.bincount(parent[1:], minlength=len(idx)).astype(np.int64)
    first_child = 1 + np.cumsum(n_children) - n_children
    return MarkedTree(
        parent=parent,
        depth=tree.depth[idx].copy(),
        first_child=first_child,
        n_children=n_children,
        open=tree.open[idx].copy(),
        censored=tree.censored[idx].copy(),
        label=None if tree.label is None else tree.label[idx].copy(),
    )


def cluster_mask_bfs(tree: MarkedTree) -> np.ndarray:
    """Open cluster of the root, found level by level."""
    inside = np.zeros(tree.size, dtype=bool)
    if tree.size == 0 or not tree.open[0]:
        return inside
    inside[0] = True
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for c in tree.children(v):
            if tree.open[c]:
                inside[c] = True
                queue.append(c)
    return inside


def cluster_mask_dfs(tree: MarkedTree) -> np.ndarray:
    """Same cluster via a vectorised parent sweep (depth-first equivalent)."""
    inside = tree.open.copy()
    order = np.argsort(tree.depth, kind="stable")
    for v in order[1:]:
        inside[v] &= inside[tree.parent[v]]
    return inside


def induced_root_cluster(tree: MarkedTree) -> MarkedTree:
    """Connected open component of the root, marks and labels preserved.

    A closed root gives an empty tree with ``empty=True``.
    """
    if tree.size == 0 or not tree.open[0]:
        return _empty_tree()
    return _subtree(tree, cluster_mask_bfs(tree))


# Mass transport -------------------------------------------------------------


@dataclass(frozen=True)
class DegreePattern:
    """Test function ``f(G, u, x) = 1{d(u, x) = distance, deg u in A, deg x in B}``.

    Empty ``u_degrees``/``x_degrees`` mean no constraint.  With
    ``open_path`` the pair must also be joined by open vertices (the path
    includes both endpoints), which makes it a function of the percolated
    tree.  The radius of dependence is ``distance + 1``.
    """

    name: str
    distance: int = 1
    u_degrees: tuple = ()
    x_degrees: tuple = ()
    open_path: bool = False

    @property
    def radius(self) -> int:
        return self.distance + 1

    def _deg_ok(self, deg, allowed):
        return np.ones(len(deg), dtype=bool) if not allowed else np.isin(deg, allowed)

    def weights(self, deg_u, deg_x, path_open) -> np.ndarray:
        w = self._deg_ok(deg_u, self.u_degrees) & self._deg_ok(deg_x, self.x_degrees)
        if self.open_path:
            w &= path_open
        return w.astype(float)


MTP_FAMILY = (
    DegreePattern("adjacent", 1),
    DegreePattern("neighbor-degree-3", 1, x_degrees=(3,)),
    DegreePattern("degree-2-to-3", 1, u_degrees=(2,), x_degrees=(3,)),
    DegreePattern("distance-2", 2),
    DegreePattern("distance-2-degree-3-to-2", 2, u_degrees=(3,), x_degrees=(2,)),
    DegreePattern("open-neighbor-degree-3", 1, x_degrees=(3,), open_path=True),
    DegreePattern("open-distance-2-from-degree-2", 2, u_degrees=(2,), open_path=True),
)


@dataclass
class SideEstimate:
    mean: float
    se: float

    @property
    def ci(self) -> tuple:
        return (self.mean - 1.96 * self.se, self.mean + 1.96 * self.se)


@dataclass
class MTPResult:
    pattern: DegreePattern
    samples: int
    lhs: SideEstimate
    rhs: SideEstimate

    @property
    def pooled_se(self) -> float:
        return float(np.hypot(self.lhs.se, self.rhs.se))

    @property
    def z(self) -> float:
        """Difference LHS - RHS in units of the pooled standard error."""
        if self.pooled_se == 0:
            return 0.0 if self.lhs.mean == self.rhs.mean else float("inf")
        return (self.lhs.mean - self.rhs.mean) / self.pooled_se


def _skeleton(mu: OffspringDistribution, n: int, rng: np.random.Generator, rooted: str, p: Optional[float]):
    """Depth-three skeletons of n independent trees, as pair arrays.

    Returns, for distance 1 and 2 from the root, the sample index, the root
    degree, the degree of the far vertex and whether the connecting path is
    open.
    """
    if rooted == "ugw":
        law = ugw_root_law(mu)
        root_deg = rng.choice(len(law.probs), size=n, p=law.array).astype(np.int64)
        root_kids = root_deg
    elif rooted == "gw":
        root_kids = mu.alias.draw(rng, n).astype(np.int64)
        root_deg = root_kids
    else:
        raise ValueError(f"unknown root rule {rooted!r}")
    owner1 = np.repeat(np.arange(n), root_kids)
    kids1 = mu.alias.draw(rng, len(owner1)).astype(np.int64)
    deg1 = kids1 + 1
    owner2 = np.repeat(np.arange(len(owner1)), kids1)
    deg2 = mu.alias.draw(rng, len(owner2)).astype(np.int64) + 1
    if p is None:
        open0 = np.ones(n, dtype=bool)
        open1 = np.ones(len(owner1), dtype=bool)
        open2 = np.ones(len(owner2), dtype=bool)
    else:
        open0, open1, open2 = (rng.random(k) < p for k in (n, len(owner1), len(owner2)))
    path1 = open0[owner1] & open1
    return {
        1: (owner1, root_deg[owner1], deg1, path1),
        2: (owner1[owner2], root_deg[owner1[owner2]], deg2, path1[owner2] & open2),
    }


def mtp_sums(
    mu: OffspringDistribution,
    pattern: DegreePattern,
    samples: int,
    rng: np.random.Generator,
    rooted: str = "ugw",
    p: Optional[float] = None,
) -> np.ndarray:
    """Integer tallies ``(n, sum L, sum L^2, sum R, sum R^2)`` of the per-sample
    sums ``L = sum_x f(G,o,x)`` and ``R = sum_x f(G,x,o)``."""
    if pattern.distance not in (1, 2):
        raise ValueError("shipped test functions use distance 1 or 2")
    owner, deg_o, deg_x, path = _skeleton(mu, samples, rng, rooted, p)[pattern.distance]
    lhs = np.bincount(owner, weights=pattern.weights(deg_o, deg_x, path), minlength=samples).astype(np.int64)
    rhs = np.bincount(owner, weights=pattern.weights(deg_x, deg_o, path), minlength=samples).astype(np.int64)
    return np.array([samples, lhs.sum(), (lhs * lhs).sum(), rhs.sum(), (rhs * rhs).sum()], dtype=np.int64)


def mtp_from_sums(pattern: DegreePattern, sums: np.ndarray) -> MTPResult:
    n = int(sums[0])
    if n < 2:
        raise ValueError("need at least two samples")

    def side(s1, s2):
        mean = s1 / n
        var = max((s2 - n * mean * mean) / (n - 1), 0.0)
        return SideEstimate(float(mean), float(np.sqrt(var / n)))

    return MTPResult(pattern, n, side(int(sums[1]), int(sums[2])), side(int(sums[3]), int(sums[4])))


def mtp_check(
    mu: OffspringDistribution,
    pattern: DegreePattern,
    samples: int,
    rng: np.random.Generator,
    depth: int = 3,
    rooted: str = "ugw",
    p: Optional[float] = None,
) -> MTPResult:
    """Monte Carlo estimates of ``E sum_x f(G,o,x)`` and ``E sum_x f(G,x,o)``.

    Trees are sampled to ``depth`` (three levels suffice for every shipped
    pattern).  ``rooted="gw"`` samples the root like any other vertex, which
    is not unimodular and serves as a negative control.  ``p`` applies
    i.i.d. site percolation before evaluating ``f``.
    """
    if pattern.radius > depth:
        raise ValueError(f"test function radius {pattern.radius} exceeds sampled depth {depth}")
    if samples < 2:
        raise ValueError("need at least two samples")
    return mtp_from_sums(pattern, mtp_sums(mu, pattern, samples, rng, rooted, p))


def mtp_exact(mu: OffspringDistribution, pattern: DegreePattern, rooted: str = "ugw", p: Optional[float] = None) -> tuple:
    """Exact values of both sides for a degree pattern.

    The far vertex's degree is independent of the root degree, and the
    number of vertices at distance 2 given ``k`` root children has mean
    ``k * m``.
    """
    probs = np.asarray(mu.probs)
    if rooted == "ugw":
        root = ugw_root_law(mu).array
    elif rooted == "gw":
        root = probs
    else:
        raise ValueError(f"unknown root rule {rooted!r}")
    far = {k + 1: float(w) for k, w in enumerate(probs) if w > 0}
    path = (1.0 if p is None else p) ** (pattern.distance + 1) if pattern.open_path else 1.0

    def ok(d, allowed):
        return not allowed or d in allowed

    lhs = rhs = 0.0
    for d0, w0 in enumerate(root):
        if w0 == 0:
            continue
        count = d0 if pattern.distance == 1 else d0 * mu.mean
        for dx, wx in far.items():
            base = float(w0) * count * wx * path
            lhs += base * ok(d0, pattern.u_degrees) * ok(dx, pattern.x_degrees)
            rhs += base * ok(dx, pattern.u_degrees) * ok(d0, pattern.x_degrees)
    return lhs, rhs


# psi mass redistribution ------------------------------------------------------


@dataclass
class PsiConfig:
    """Window of the d-regular tree with a site configuration.

    ``open[v]`` is True for open vertices.  Clusters touching the outer layer
    of the window are classified spanning (treated as infinite) when
    ``spanning_rule`` is set; without it such clusters are finite with an
    unknown boundary and the window is not closed.
    """

    d: int
    depth: int
    open: np.ndarray
    K: Fraction
    spanning_rule: bool = True
    tree: MarkedTree = field(init=False)

    def __post_init__(self):
        self.tree = regular_tree(self.d, self.depth)
        self.open = np.asarray(self.open, dtype=bool)
        if len(self.open) != self.tree.size:
            raise ValueError(f"configuration has {len(self.open)} sites, window has {self.tree.size}")
        self.K = Fraction(self.K)
        if self.K <= 0:
            raise ValueError("K must be positive")
        self.tree.open = self.open

    def clusters(self) -> np.ndarray:
        """Open-cluster label per vertex (-1 for closed)."""
        t = self.tree
        lab = np.full(t.size, -1, dtype=np.int64)
        nxt = 0
        for v in range(t.size):
            if not self.open[v]:
                continue
            par = t.parent[v]
            if par >= 0 and self.open[par]:
                lab[v] = lab[par]
            else:
                lab[v] = nxt
                nxt += 1
        return lab

    def touches_boundary(self, lab: np.ndarray) -> np.ndarray:
        n = int(lab.max()) + 1 if len(lab) and lab.max() >= 0 else 0
        outer = (self.tree.depth == self.depth) & (lab >= 0)
        return np.bincount(lab[outer], minlength=n) > 0

    @property
    def closed(self) -> bool:
        if self.spanning_rule:
            return True
        lab = self.clusters()
        return not self.touches_boundary(lab).any()


@dataclass
class PsiResult:
    psi: list
    flow: dict
    cluster: np.ndarray
    spanning: np.ndarray

    def net_inflow(self, v: int) -> Fraction:
        return sum((f for (a, b), f in self.flow.items() if b == v), Fraction(0))


def psi_masses(cfg: PsiConfig) -> PsiResult:
    """Mass redistribution on a closed window, in exact rational arithmetic.

    Open vertices in spanning clusters or in finite clusters with
    ``|C| / |dC| >= K`` keep mass 1.  Every vertex of a finite cluster with a
    smaller ratio sends ``1 / |dC|`` to each closed vertex of the outer
    boundary ``dC`` and keeps nothing.  Closed vertices hold one plus what
    they receive.  ``flow[(v, w)]`` is the net flow from v to w and is stored
    for both orders with opposite signs.
    """
    if not cfg.closed:
        raise ValueError("window is not closed: a finite cluster reaches the window edge")
    t = cfg.tree
    lab = cfg.clusters()
    n_clusters = int(lab.max()) + 1 if (lab >= 0).any() else 0
    spanning = cfg.touches_boundary(lab) if cfg.spanning_rule else np.zeros(n_clusters, dtype=bool)
    members = [[] for _ in range(n_clusters)]
    boundary = [[] for _ in range(n_clusters)]
    for v in range(t.size):
        if lab[v] >= 0:
            members[lab[v]].append(v)
        else:
            # in a tree a closed vertex meets each neighbouring cluster once
            for w in t.neighbors(v):
                if lab[w] >= 0:
                    boundary[lab[w]].append(v)

    psi = [Fraction(1) for _ in range(t.size)]
    flow = {}
    for c in range(n_clusters):
        if spanning[c]:
            continue
        size, bsize = len(members[c]), len(boundary[c])
        ratio = Fraction(size, bsize)
        if ratio >= cfg.K:
            continue
        share = Fraction(1, bsize)
        for u in members[c]:
            psi[u] = Fraction(0)
            for w in boundary[c]:
                flow[(u, w)] = flow.get((u, w), Fraction(0)) + share
                flow[(w, u)] = flow.get((w, u), Fraction(0)) - share
        for w in boundary[c]:
            psi[w] += ratio
    return PsiResult(psi, flow, lab, spanning)


def random_psi_config(d: int, depth: int, p_open: float, K, rng: np.random.Generator) -> PsiConfig:
    n = regular_tree(d, depth).size
    return PsiConfig(d, depth, rng.random(n) < p_open, Fraction(K))


# anchored isoperimetry ----------------------------------------------------------


@dataclass
class IsoResult:
    """Upper bound on the anchored isoperimetric constant with its witness."""

    ratio: float
    witness: tuple
    exact_up_to: int
    heuristic: bool
    ball_ratios: dict


_DP_BUDGET = 50_000_000


def _boundary_size(tree: MarkedTree, S) -> int:
    deg = tree.degree
    return int(sum(int(deg[v]) for v in S) - 2 * (len(S) - 1))


def _min_degree_subtrees(tree: MarkedTree, allowed: np.ndarray, smax: int):
    """For every vertex v: minimal degree sum of a connected set of size s
    whose top vertex is v, for s <= smax, with the chosen sets."""
    deg = tree.degree
    best = [None] * tree.size
    for v in range(tree.size - 1, -1, -1):
        if not allowed[v]:
            continue
        cost = {1: (int(deg[v]), (v,))}
        for c in tree.children(v):
            if best[c] is None:
                continue
            merged = dict(cost)
            for s1, (w1, set1) in cost.items():
                for s2, (w2, set2) in best[c].items():
                    s = s1 + s2
                    if s > smax:
                        continue
                    if s not in merged or w1 + w2 < merged[s][0]:
                        merged[s] = (w1 + w2, set1 + set2)
            cost = merged
        best[v] = cost
    return best[0] if allowed[0] else {}


def anchored_iso(tree: MarkedTree, max_subset: int) -> IsoResult:
    """Smallest ``|dS| / |S|`` over connected root sets with ``|S| <= max_subset``.

    In a tree ``|dS| = sum_{v in S} deg(v) - 2(|S| - 1)``, so the search is a
    tree knapsack over degree sums, exact for every size.  Censored vertices
    (unknown degree) may lie on the boundary but not in S.  Balls around the
    root give further bounds.  The value is an upper bound on the anchored
    constant of the infinite tree, never the infimum itself.  When the exact
    search exceeds its budget a greedy growth is used and flagged.
    """
    if tree.size == 0:
        raise ValueError("empty tree")
    if max_subset < 1:
        raise ValueError("max_subset must be >= 1")
    allowed = ~tree.censored
    deg = tree.degree
    n_ok = int(allowed.sum())
    smax = min(max_subset, n_ok)
    best_ratio, witness = float("inf"), ()
    heuristic = tree.size * smax * smax > _DP_BUDGET
    if not heuristic and smax >= 1:
        table = _min_degree_subtrees(tree, allowed, smax)
        for s, (w, S) in table.items():
            r = (w - 2 * (s - 1)) / s
            if r < best_ratio - 1e-15:
                best_ratio, witness = r, tuple(sorted(S))
    elif smax >= 1:
        S = [0]
        frontier = {c for c in tree.children(0) if allowed[c]}
        w = int(deg[0])
        best_ratio, witness = (w) / 1, (0,)
        while frontier and len(S) < smax:
            v = min(frontier, key=lambda u: (deg[u], u))
            frontier.remove(v)
            S.append(v)
            w += int(deg[v])
            frontier.update(c for c in tree.children(v) if allowed[c])
            r = (w - 2 * (len(S) - 1)) / len(S)
            if r < best_ratio:
                best_ratio, witness = r, tuple(sorted(S))
    balls = {}
    for r in range(int(tree.depth.max()) + 1):
        ball = np.nonzero(tree.depth <= r)[0]
        if not allowed[ball].all():
            break
        balls[r] = _boundary_size(tree, ball) / len(ball)
        if balls[r] < best_ratio:
            best_ratio, witness = balls[r], tuple(int(v) for v in ball)
    return IsoResult(float(best_ratio), witness, 0 if heuristic else smax, heuristic, balls)


def regular_ball_ratio(d: int, r: int) -> float:
    """``|dB_r| / |B_r|`` in the d-regular tree."""
    size = 1 + d * ((d - 1) ** r - 1) // (d - 2) if d > 2 else 1 + 2 * r
    return d * (d - 1) ** r / size


# thinning oracle -------------------------------------------------------------


@dataclass(frozen=True)
class ThinningOracle:
    """Extinction of the open cluster below an open vertex under i.i.d. thinning."""

    mu: OffspringDistribution
    p: float
    q_star: float

    @property
    def survival_given_open(self) -> float:
        return 1.0 - self.q_star

    @property
    def survival(self) -> float:
        return self.p * (1.0 - self.q_star)

    def depth_survival(self, depth: int, given_open: bool = True) -> float:
        s = depth_survival(self.mu, self.p, depth)
        return s if given_open else self.p * s


def thinning_oracle(mu: OffspringDistribution, p: float) -> ThinningOracle:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return ThinningOracle(mu, float(p), thinned_extinction(mu, p, tol=1e-15))


def cluster_depth_survival(
    mu: OffspringDistribution,
    p: float,
    depth,
    replicas: int,
    rng: np.random.Generator,
    given_open: bool = True,
) -> np.ndarray:
    """Monte Carlo indicator per replica: the root cluster of a p-thinned GW
    tree reaches ``depth``.

    ``depth`` may be a sequence, in which case one run is read off at every
    depth and the result has one row per depth.  Only the level counts of the
    open cluster are simulated: the open vertices of a level draw their family
    sizes jointly (a multinomial over ``mu``) and each child is open with
    probability p, which is exact in law.
    """
    depths = np.atleast_1d(np.asarray(depth, dtype=np.int64))
    out = np.zeros((len(depths), replicas), dtype=bool)
    open_now = np.ones(replicas, dtype=np.int64)
    if not given_open:
        open_now = (rng.random(replicas) < p).astype(np.int64)
    probs = np.asarray(mu.probs)
    ks = np.arange(len(probs))
    for L in range(int(depths.max()) + 1):
        out[depths == L] = open_now > 0
        if L == depths.max():
            break
        # total offspring of n vertices: multinomial counts per family size
        kids = rng.multinomial(open_now, probs) @ ks
        open_now = rng.binomial(kids, p)
    return out if np.ndim(depth) else out[0]


@dataclass
class SurvivalRow:
    p: float
    depth: int
    estimate: Proportion
    oracle_value: float


def survival_curve(
    mu: OffspringDistribution,
    p_values: Sequence[float],
    depths: Sequence[int],
    replicas: int,
    rng: np.random.Generator,
    given_open: bool = True,
) -> list:
    """Marginal-vs-survival table: Monte Carlo against the depth functional."""
    rows = []
    for p in p_values:
        oracle = thinning_oracle(mu, p)
        alive = cluster_depth_survival(mu, p, list(depths), replicas, rng, given_open)
        for L, hit in zip(depths, alive):
            rows.append(SurvivalRow(float(p), int(L), wilson(int(hit.sum()), replicas), oracle.depth_survival(L, given_open)))
    return rows
