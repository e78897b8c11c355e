import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwlab import rng as keyed
from brwlab.arena import LatticeCodec, WordArena, make_codec
from brwlab.groups import GroupSpec, compose

F2 = GroupSpec.free_group(2)
C3 = GroupSpec.free_product_c2(3)
Z3 = GroupSpec.integer_lattice(3)


def test_uniforms_in_unit_interval_and_roughly_uniform():
    keys = keyed.child_keys(np.full(200_000, 12345, dtype=np.uint64), np.arange(200_000))
    u = keyed.uniforms(keys, keyed.STEP)
    assert u.min() >= 0 and u.max() < 1
    hist = np.bincount((u * 10).astype(int), minlength=10)
    assert np.all(np.abs(hist - 20_000) < 4 * np.sqrt(20_000 * 0.9))


def test_streams_are_distinct():
    keys = keyed.root_keys(1, "cell", range(1000))
    a, b = keyed.uniforms(keys, keyed.OFFSPRING), keyed.uniforms(keys, keyed.STEP)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1
    assert not np.array_equal(keyed.tagged(keys, keyed.INVASIVE), keys)


def test_root_keys_depend_on_index_only():
    all_keys = keyed.root_keys(9, "x", range(10))
    part = keyed.root_keys(9, "x", [3, 7])
    assert np.array_equal(all_keys[[3, 7]], part)
    assert not np.array_equal(keyed.root_keys(9, "y", range(10)), all_keys)
    assert not np.array_equal(keyed.root_keys(10, "x", range(10)), all_keys)
    assert len(np.unique(all_keys)) == 10


def test_alias_table(rng):
    probs = np.array([0.1, 0.0, 0.6, 0.3])
    t = keyed.AliasTable(probs)
    counts = np.bincount(t.draw(rng, 400_000), minlength=4)
    assert counts[1] == 0
    assert np.all(np.abs(counts / 400_000 - probs) < 0.005)


@pytest.mark.parametrize("spec", [F2, C3])
@given(data=st.data())
def test_arena_steps_match_group_multiplication(spec, data):
    arena = WordArena(spec, capacity=4)
    labels = data.draw(st.lists(st.integers(0, spec.n_gens), min_size=1, max_size=40))
    pid = np.zeros(1, dtype=np.int64)
    x = spec.identity()
    for l in labels:
        pid = arena.step(pid, np.array([l]))
        if l != spec.identity_label:
            x = compose(x, spec.generator(l))
        assert arena.decode(int(pid[0])) == x
        assert arena.norm(pid)[0] == len(x.value)
    assert arena.encode(x) == int(pid[0])


def test_arena_canonical_keys_are_arena_independent():
    a, b = WordArena(F2), WordArena(F2)
    b.encode(F2.element("bbbAA"))
    w = F2.element("abAAB")
    assert a.canonical([a.encode(w)])[0] == b.canonical([b.encode(w)])[0]


def test_lattice_codec_roundtrip():
    c = make_codec(Z3, 100)
    assert isinstance(c, LatticeCodec)
    x = Z3.element((5, -7, 99))
    pid = c.encode(x)
    assert c.decode(pid) == x
    assert c.norm(np.array([pid]))[0] == 111
    moved = c.step(np.array([pid]), np.array([1]))
    assert c.decode(int(moved[0])) == Z3.element((4, -7, 99))
    with pytest.raises(ValueError):
        make_codec(Z3, 1 << 22)
