import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brwlab import rng as keyed
from brwlab.competing import (
    PAIR,
    AdaptedMode,
    CompetingConfig,
    Species,
    estimate_dagger_marginal,
    first_step_kill_probability,
    kill_rule_violations,
    run_adapted,
    run_competing,
)
from brwlab.engine import grow
from brwlab.groups import GroupSpec, StepDistribution
from brwlab.offspring import OffspringDistribution

F2 = GroupSpec.free_group(2)
Q = StepDistribution.lazy_uniform(F2, 0.2)
INV = Species(OffspringDistribution((0.2, 0.55, 0.25)), Q)
NON = Species(OffspringDistribution((0.2, 0.3, 0.5)), Q)
STERILE = Species(OffspringDistribution((1.0,)), Q)


def keys(n, seed=4):
    return keyed.root_keys(seed, "competing-test", range(n))


def pair(start="a", horizon=8, inv=INV, non=NON):
    return CompetingConfig(F2, inv, non, horizon, start=F2.element(start), mode=PAIR)


def adapted(N, gamma, window=3, horizon=8, inv=INV, non=NON):
    return CompetingConfig(F2, inv, non, horizon, mode=AdaptedMode(N, gamma, window))


def test_config_validation():
    with pytest.raises(ValueError):
        CompetingConfig(F2, INV, NON, 5, start=F2.identity(), mode=PAIR)
    with pytest.raises(ValueError):
        CompetingConfig(F2, INV, NON, 5, start=None, mode=PAIR)
    with pytest.raises(ValueError):
        adapted(0, 1.0)
    with pytest.raises(ValueError, match="gamma_c"):
        adapted(2, 0.05)
    with pytest.raises(ValueError):
        CompetingConfig(F2, INV, NON, 5, mode="both")


def test_extinct_invasive_leaves_no_marks():
    inv, non, res = run_competing(pair(inv=STERILE), keys(200))
    # the invasive root sits at x != o in generation 0, so nothing is ever killed
    assert not non.dead.any()
    plain = grow(F2, NON.step, NON.mu, 8, keys(200))
    assert np.array_equal(res.noninvasive_alive[-1], plain.alive_at_horizon())


@pytest.mark.parametrize("seed", range(4))
def test_kill_rule_matches_direct_check(seed):
    inv, non, _ = run_competing(pair(horizon=10), keys(150, seed=seed))
    assert kill_rule_violations(inv, non) == 0
    assert non.dead.any()


def test_meeting_lineage_is_marked():
    inv, non, _ = run_competing(pair(horizon=10), keys(150))
    hits = np.nonzero(non.dead)[0]
    v = hits[0]
    g, r, x = non.generation[v], non.replica[v], non.position[v]
    sl = inv.gen_slice(int(g))
    assert np.any((inv.replica[sl] == r) & (inv.position[sl] == x))


def test_invasive_is_unaffected_by_noninvasive():
    a, _, _ = run_competing(pair(non=NON), keys(100))
    b, _, _ = run_competing(pair(non=STERILE), keys(100))
    for f in ("key", "position", "parent", "generation", "replica"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_root_cluster_excludes_dagger_subtrees():
    _, non, res = run_competing(pair(horizon=10), keys(150))
    c = non.root_cluster()
    assert not (c & non.dead).any()
    kids = np.nonzero(non.parent >= 0)[0]
    assert not c[kids[~c[non.parent[kids]]]].any()
    assert np.all(res.joint <= res.invasive_alive)
    assert np.all(res.joint <= res.noninvasive_alive)


def test_horizons_share_one_run():
    _, _, res = run_competing(pair(horizon=10), keys(300), horizons=[4, 7, 10])
    assert res.invasive_alive.shape == (3, 300)
    assert np.all(res.invasive_alive[1:] <= res.invasive_alive[:-1])
    with pytest.raises(ValueError):
        run_competing(pair(horizon=10), keys(3), horizons=[11])


def test_first_step_kill_matches_simulation():
    one = Species(OffspringDistribution((0.0, 1.0)), Q)
    cfg = pair(horizon=1, non=one)
    n = 200_000
    _, non, _ = run_competing(cfg, keys(n, seed=12))
    est = non.dead[non.gen_slice(1)].mean()
    exact = first_step_kill_probability(F2, Q, INV, F2.element("a"))
    assert 0 < exact < 1
    assert abs(est - exact) < 4 * np.sqrt(exact * (1 - exact) / n)


class TestAdapted:
    def test_threshold_above_all_visits_gives_no_seeds(self):
        non, copies, res = run_adapted(adapted(10**6, 1.0), keys(50))
        assert copies is None
        assert res.seeded.sum() == 0 and not non.dead.any()
        assert not res.root_dead.any()

    def test_gamma_one_is_unthinned(self):
        non, _, _ = run_adapted(adapted(10**6, 1.0), keys(50))
        plain = grow(F2, NON.step, NON.mu, 8, keys(50))
        assert np.array_equal(non.key, plain.key)

    def test_seed_sites_reach_threshold_in_window(self):
        non, copies, res = run_adapted(adapted(2, 1.0, window=2), keys(40))
        for rep, sites in enumerate(res.seed_sites):
            seen = set()
            for x, g in sites:
                assert len(x) <= 2
                assert x not in seen
                seen.add(x)
                sl = non.replica == rep
                mask = sl & (non.position == non_codec_pos(non, rep, x))
                gens = np.sort(non.generation[mask])
                assert gens[1] == g
        assert res.seeded.sum() == copies.n_replicas

    def test_dagger_means_some_copy_visits(self):
        non, copies, res = run_adapted(adapted(1, 1.0, window=2), keys(40))
        owner_sites = set()
        seed_rep = np.repeat(np.arange(40), res.seeded)
        for r, x in zip(seed_rep[copies.replica], copies.position):
            owner_sites.add((int(r), int(x)))
        expect = np.array([(int(r), int(x)) in owner_sites for r, x in zip(non.replica, non.position)])
        assert np.array_equal(expect, non.dead)
        # with N=1 the root site is seeded at time 0 and the copy sits there
        assert res.root_dead.all()

    def test_trends(self):
        k = keys(400, seed=8)
        frac = {}
        for N in (1, 4, 16):
            for gamma in (0.5, 1.0):
                _, _, res = run_adapted(adapted(N, gamma, window=3, horizon=10), k)
                frac[N, gamma] = res.seeded.mean()
        assert frac[1, 1.0] >= frac[4, 1.0] >= frac[16, 1.0]
        assert frac[4, 0.5] <= frac[4, 1.0]

    def test_dagger_marginal_needs_enough_replicas(self):
        cfg = adapted(4, 1.0)
        _, _, res = run_adapted(cfg, keys(50))
        with pytest.raises(ValueError, match="at least 100"):
            estimate_dagger_marginal([res], cfg)
        _, _, res2 = run_adapted(cfg, keys(60, seed=5))
        dm = estimate_dagger_marginal([res, res2], cfg)
        assert 0 <= dm.marginal.estimate <= 1
        assert dm.m_gamma == pytest.approx(NON.mu.mean)


def non_codec_pos(tree, rep, word):
    for x in np.unique(tree.position[tree.replica == rep]):
        if tree.codec.decode(x) == word:
            return x
    raise AssertionError("site never visited")


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from(["a", "B", "ab", "bbA"]))
def test_kill_rule_property(seed, start):
    inv, non, res = run_competing(pair(start=start, horizon=6), keys(20, seed=seed))
    assert kill_rule_violations(inv, non) == 0
    assert np.all(res.joint <= res.noninvasive_alive)
