from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from brwlab.offspring import OffspringDistribution, ugw_root_law
from brwlab.percolation import (
    MTP_FAMILY,
    DegreePattern,
    PsiConfig,
    anchored_iso,
    bernoulli_site_percolation,
    cluster_depth_survival,
    cluster_mask_bfs,
    cluster_mask_dfs,
    induced_root_cluster,
    mtp_check,
    mtp_exact,
    psi_masses,
    random_psi_config,
    regular_ball_ratio,
    regular_tree,
    sample_gw,
    sample_ugw,
    sample_ugw_labeled,
    survival_curve,
    thinning_oracle,
    tree_from_offspring,
)

BINARY = OffspringDistribution((0.0, 0.0, 1.0))
MIXED = OffspringDistribution((0.0, 0.5, 0.5))
SUB = OffspringDistribution((0.2, 0.3, 0.5))


class TestClusters:
    def test_all_open_is_whole_tree(self):
        t = regular_tree(3, 3)
        assert cluster_mask_bfs(t).all()
        c = induced_root_cluster(t)
        assert c.size == t.size and np.array_equal(c.parent, t.parent)

    def test_closed_root_gives_empty_tree(self):
        t = regular_tree(3, 2)
        t.open[0] = False
        assert not cluster_mask_bfs(t).any()
        c = induced_root_cluster(t)
        assert c.empty and c.size == 0

    def test_closed_children_isolate_root(self):
        t = regular_tree(3, 2)
        t.open[1:4] = False
        mask = cluster_mask_bfs(t)
        assert mask.sum() == 1

    @settings(max_examples=40)
    @given(st.integers(0, 10**6), st.floats(0.0, 1.0))
    def test_bfs_dfs_agree_and_idempotent(self, seed, p):
        rng = np.random.default_rng(seed)
        t = bernoulli_site_percolation(sample_ugw(MIXED, 6, rng), p, rng)
        a, b = cluster_mask_bfs(t), cluster_mask_dfs(t)
        assert np.array_equal(a, b)
        c = induced_root_cluster(t)
        assert c.size == a.sum()
        if c.size:
            assert c.open.all()
            again = induced_root_cluster(c)
            assert np.array_equal(again.parent, c.parent)
            assert np.array_equal(again.depth, c.depth)


class TestSampling:
    def test_binary_ugw_is_three_regular(self):
        t = sample_ugw(BINARY, 3, np.random.default_rng(0))
        assert t.level_sizes.tolist() == [1, 3, 6, 12]
        assert t.censored.sum() == 12
        assert np.all(t.degree[~t.censored] == 3)

    def test_tree_shape_checks(self):
        with pytest.raises(ValueError):
            tree_from_offspring([np.array([2]), np.array([1])])
        t = tree_from_offspring([np.array([2]), np.array([1, 0])], censor_last=False)
        assert t.parent.tolist() == [-1, 0, 0, 1]
        assert list(t.children(1)) == [3]
        assert sorted(t.neighbors(1)) == [0, 3]

    def test_root_degree_law(self):
        rng = np.random.default_rng(1)
        n = 6000
        deg = np.array([sample_ugw(SUB, 1, rng).n_children[0] for _ in range(n)])
        law = ugw_root_law(SUB).array
        support = np.nonzero(law)[0]
        obs = np.array([(deg == k).sum() for k in support])
        assert obs.sum() == n
        assert stats.chisquare(obs, n * law[support]).pvalue > 1e-3

    def test_gw_root_breeds_like_others(self):
        rng = np.random.default_rng(2)
        deg = np.array([sample_gw(SUB, 1, rng).n_children[0] for _ in range(4000)])
        obs = np.bincount(deg, minlength=3)
        assert stats.chisquare(obs, 4000 * np.asarray(SUB.probs)).pvalue > 1e-3

    def test_edge_labels(self):
        rng = np.random.default_rng(3)
        q = np.array([0.1, 0.2, 0.3, 0.4])
        labels = []
        for _ in range(300):
            t = sample_ugw_labeled(BINARY, q, 4, rng)
            assert t.label[0] == -1
            labels.append(t.label[1:])
        labels = np.concatenate(labels)
        obs = np.bincount(labels, minlength=4)
        assert stats.chisquare(obs, len(labels) * q).pvalue > 1e-3
        with pytest.raises(ValueError):
            sample_ugw_labeled(BINARY, [0.5, 0.6], 2, rng)


class TestMassTransport:
    def test_exact_sides_balance_on_ugw(self):
        for pat in MTP_FAMILY:
            lhs, rhs = mtp_exact(MIXED, pat, "ugw", p=0.7)
            assert lhs == pytest.approx(rhs, rel=1e-12), pat.name

    @pytest.mark.parametrize("pattern", MTP_FAMILY, ids=lambda p: p.name)
    def test_monte_carlo_matches_exact(self, pattern):
        res = mtp_check(MIXED, pattern, 40_000, np.random.default_rng(5), p=0.7)
        lhs, rhs = mtp_exact(MIXED, pattern, "ugw", p=0.7)
        assert abs(res.z) < 4.5
        assert abs(res.lhs.mean - lhs) < 4.5 * res.lhs.se + 1e-12
        assert abs(res.rhs.mean - rhs) < 4.5 * res.rhs.se + 1e-12

    def test_degree_three_neighbors_on_binary_mixture(self):
        pat = DegreePattern("n3", 1, x_degrees=(3,))
        assert mtp_exact(MIXED, pat) == pytest.approx((1.2, 1.2))

    def test_gw_root_is_a_negative_control(self):
        pat = DegreePattern("2to3", 1, u_degrees=(2,), x_degrees=(3,))
        res = mtp_check(OffspringDistribution((0.0, 0.0, 0.5, 0.5)), pat, 20_000, np.random.default_rng(6), rooted="gw")
        assert abs(res.z) > 10

    def test_radius_guard(self):
        with pytest.raises(ValueError, match="radius"):
            mtp_check(MIXED, DegreePattern("d2", 2), 100, np.random.default_rng(0), depth=2)


class TestPsi:
    def test_single_open_vertex(self):
        t = regular_tree(3, 2)
        cfg = PsiConfig(3, 2, np.arange(t.size) == 0, Fraction(2))
        res = psi_masses(cfg)
        assert res.psi[0] == 0
        for w in (1, 2, 3):
            assert res.flow[(0, w)] == Fraction(1, 3)
            assert res.psi[w] == Fraction(4, 3)
        assert sum(res.psi) == t.size

    def test_all_open_keeps_unit_mass(self):
        t = regular_tree(3, 3)
        res = psi_masses(PsiConfig(3, 3, np.ones(t.size, dtype=bool), 5))
        assert all(x == 1 for x in res.psi) and not res.flow
        assert res.spanning.all()

    def test_large_ratio_clusters_keep_mass(self):
        t = regular_tree(3, 2)
        res = psi_masses(PsiConfig(3, 2, np.arange(t.size) == 0, Fraction(1, 4)))
        assert all(x == 1 for x in res.psi)

    def test_unclosed_window_rejected(self):
        t = regular_tree(3, 2)
        cfg = PsiConfig(3, 2, np.ones(t.size, dtype=bool), 2, spanning_rule=False)
        with pytest.raises(ValueError, match="not closed"):
            psi_masses(cfg)
        with pytest.raises(ValueError):
            PsiConfig(3, 2, np.ones(3, dtype=bool), 2)
        with pytest.raises(ValueError):
            PsiConfig(3, 2, np.ones(t.size, dtype=bool), 0)

    @settings(max_examples=60)
    @given(st.integers(0, 10**6), st.floats(0.05, 0.95), st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(3)]))
    def test_conservation(self, seed, p, K):
        cfg = random_psi_config(3, 4, p, K, np.random.default_rng(seed))
        res = psi_masses(cfg)
        assert sum(res.psi) == cfg.tree.size
        assert all(x >= 0 for x in res.psi)
        for (a, b), f in res.flow.items():
            assert res.flow[(b, a)] == -f
        for v in range(cfg.tree.size):
            if not cfg.open[v]:
                assert res.psi[v] == 1 + res.net_inflow(v)


class TestIsoperimetry:
    def test_root_only(self):
        t = regular_tree(3, 1)
        res = anchored_iso(t, 1)
        assert res.ratio == 3.0 and res.witness == (0,)

    @pytest.mark.parametrize("r", [1, 2, 3, 4])
    def test_ball_ratio_formula(self, r):
        t = regular_tree(3, r + 1)
        res = anchored_iso(t, 1)
        assert res.ball_ratios[r] == pytest.approx(regular_ball_ratio(3, r))
        assert regular_ball_ratio(3, r) == pytest.approx(3 * 2**r / (1 + 3 * (2**r - 1)))

    def test_regular_tree_subtrees(self):
        # every connected s-set of the 3-regular tree has s + 2 boundary vertices
        t = regular_tree(3, 4)
        res = anchored_iso(t, 12)
        assert not res.heuristic and res.exact_up_to == 12
        assert res.ratio == pytest.approx(min(14 / 12, min(res.ball_ratios.values())))

    def test_path_ratio_vanishes(self):
        t = tree_from_offspring([np.array([1])] * 30)
        res = anchored_iso(t, 30)
        assert res.ratio == pytest.approx(1 / 30)

    def test_brute_force_small(self):
        rng = np.random.default_rng(11)
        t = sample_ugw(SUB, 4, rng)
        if t.size < 3:
            t = regular_tree(3, 2)
        res = anchored_iso(t, 6)
        best = brute_iso(t, 6)
        assert res.ratio == pytest.approx(min([best, *res.ball_ratios.values()]))


def brute_iso(t, smax):
    best = float("inf")
    allowed = ~t.censored
    sets = {frozenset([0])} if allowed[0] else set()
    for _ in range(smax):
        for S in sets:
            out = {w for v in S for w in t.neighbors(v) if w not in S}
            best = min(best, len(out) / len(S))
        sets = {S | {w} for S in sets for v in S for w in t.neighbors(v) if w not in S and allowed[w] and len(S) < smax}
    return best


class TestThinning:
    def test_known_values(self):
        assert thinning_oracle(BINARY, 1.0).q_star == 0.0
        assert thinning_oracle(BINARY, 0.0).q_star == 1.0
        assert thinning_oracle(BINARY, 0.9).q_star == pytest.approx(1 / 81, abs=1e-12)
        assert thinning_oracle(BINARY, 0.5).q_star == pytest.approx(1.0, abs=1e-6)
        o = thinning_oracle(BINARY, 0.75)
        assert o.survival == pytest.approx(0.75 * o.survival_given_open)
        with pytest.raises(ValueError):
            thinning_oracle(BINARY, 1.5)

    def test_depth_survival_decreases_to_limit(self):
        o = thinning_oracle(BINARY, 0.8)
        vals = [o.depth_survival(L) for L in range(0, 40)]
        assert vals[0] == 1.0
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(o.survival_given_open, abs=1e-6)

    def test_monte_carlo_matches_depth_functional(self):
        rng = np.random.default_rng(8)
        n = 20_000
        hit = cluster_depth_survival(BINARY, 0.7, [2, 6, 10], n, rng)
        o = thinning_oracle(BINARY, 0.7)
        for L, row in zip([2, 6, 10], hit):
            s = o.depth_survival(L)
            assert abs(row.mean() - s) < 4.5 * np.sqrt(s * (1 - s) / n)
        single = cluster_depth_survival(BINARY, 0.7, 3, 10, rng)
        assert single.shape == (10,)

    def test_survival_curve_rows(self):
        rows = survival_curve(BINARY, [0.6, 0.9], [1, 4], 5000, np.random.default_rng(9), given_open=False)
        assert len(rows) == 4
        for r in rows:
            assert r.estimate.low - 0.01 <= r.oracle_value <= r.estimate.high + 0.01
