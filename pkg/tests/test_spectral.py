import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwlab.groups import GroupSpec, StepDistribution, word_distance
from brwlab.spectral import (
    UnsupportedWalkError,
    green_partial_sum,
    return_probabilities,
    return_probability_series,
    spectral_radius,
    spectral_radius_numeric,
)
from oracles import walk_law

F2 = GroupSpec.free_group(2)
F3 = GroupSpec.free_group(3)
C3 = GroupSpec.free_product_c2(3)
C4 = GroupSpec.free_product_c2(4)
Z1 = GroupSpec.integer_lattice(1)
Z2 = GroupSpec.integer_lattice(2)

# Frozen from the Kesten value sqrt(3)/2 mixed with laziness 0.2.
RHO_F2_LAZY = 0.8928203230275509


def lazy(spec, a=0.2):
    return StepDistribution.lazy_uniform(spec, a)


def test_closed_form_values():
    assert spectral_radius(F2, lazy(F2)).value == pytest.approx(0.2 + 0.8 * math.sqrt(3) / 2, abs=1e-15)
    assert spectral_radius(F2, lazy(F2)).value == pytest.approx(RHO_F2_LAZY, abs=1e-15)
    assert spectral_radius(F3, lazy(F3, 0.5)).value == pytest.approx(0.5 + 0.5 * math.sqrt(5) / 3)
    assert spectral_radius(C3, lazy(C3, 0.1)).value == pytest.approx(0.1 + 0.9 * 2 * math.sqrt(2) / 3)
    assert spectral_radius(Z1, StepDistribution.lazy_uniform(Z1, 0.2)).value == 1.0
    assert spectral_radius(F2, lazy(F2)).method == "kesten"


def test_first_two_return_probabilities():
    s = return_probability_series(F2, lazy(F2), 5)
    assert s.diag[0] == 1.0
    assert s.diag[1] == pytest.approx(0.2)
    assert s.diag[2] == pytest.approx(0.2**2 + 0.8**2 / 4)
    assert s.diag[2] == pytest.approx(0.2)


@pytest.mark.parametrize("spec,a", [(F2, 0.2), (F3, 0.3), (C3, 0.25), (C4, 0.1)])
def test_series_matches_enumeration(spec, a):
    q = lazy(spec, a)
    n_max = 6
    s = return_probability_series(spec, q, n_max)
    for n in range(n_max + 1):
        law = walk_law(spec, q, spec.identity(), n)
        for x, p in law.items():
            assert s.transition(n, spec.identity(), x) == pytest.approx(p, abs=1e-14)


def test_lattice_series_matches_enumeration():
    q = StepDistribution.from_mapping(Z2, {"+e1": 0.3, "-e1": 0.3, "+e2": 0.1, "-e2": 0.1, "e": 0.2})
    s = return_probability_series(Z2, q, 6)
    for n in range(7):
        law = walk_law(Z2, q, Z2.identity(), n)
        assert s.diag[n] == pytest.approx(law.get(Z2.identity(), 0.0), abs=1e-14)
    z1 = StepDistribution.lazy_uniform(Z1, 0.2)
    s1 = return_probability_series(Z1, z1, 5)
    law = walk_law(Z1, z1, Z1.identity(), 5)
    for x, p in law.items():
        assert s1.transition(5, Z1.identity(), x) == pytest.approx(p, abs=1e-14)


@pytest.mark.parametrize("spec", [F2, C3, Z1, Z2])
def test_rows_are_stochastic(spec):
    s = return_probability_series(spec, lazy(spec, 0.3) if spec.is_tree_like else StepDistribution.lazy_uniform(spec, 0.3), 60)
    assert np.allclose(s.weighted_row_sums(), 1.0, atol=1e-10)


def test_nonradial_tree_walk_unsupported_by_series():
    q = StepDistribution.from_mapping(C3, {"s1": 0.5, "s2": 0.2, "s3": 0.1, "e": 0.2})
    with pytest.raises(UnsupportedWalkError):
        return_probability_series(C3, q, 10)


def test_first_passage_route_agrees_with_series():
    for spec in (F2, C3):
        q = lazy(spec, 0.2)
        a = return_probabilities(spec, q, 120)
        b = return_probability_series(spec, q, 120).diag
        assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize(
    "spec,weights",
    [
        (F2, {"a": 0.3, "A": 0.3, "b": 0.05, "B": 0.05, "e": 0.3}),
        (C3, {"s1": 0.5, "s2": 0.2, "s3": 0.1, "e": 0.2}),
    ],
)
def test_nonradial_closed_form_against_numeric(spec, weights):
    q = StepDistribution.from_mapping(spec, weights)
    assert spectral_radius(spec, q).method == "akemann-ostrand"
    small = walk_law(spec, q, spec.identity(), 6)[spec.identity()]
    assert return_probabilities(spec, q, 6)[6] == pytest.approx(small, rel=1e-12)
    rho = spectral_radius(spec, q).value
    num = spectral_radius_numeric(spec, q, 400)
    assert num.lower <= rho + 1e-12
    assert abs(num.value - rho) < 2e-3


def test_kesten_bound_through_400():
    for spec in (F2, C3):
        q = lazy(spec, 0.2)
        rho = spectral_radius(spec, q).value
        diag = return_probability_series(spec, q, 400).diag
        n = np.arange(401)
        assert np.all(diag <= rho**n * (1 + 1e-12))


def test_amenable_series_tends_to_one():
    s = return_probability_series(Z1, StepDistribution.lazy_uniform(Z1, 0.2), 400)
    assert s.diag[400] ** (1 / 400) > 0.98
    est = spectral_radius_numeric(Z1, StepDistribution.lazy_uniform(Z1, 0.2), 200)
    assert est.value == pytest.approx(1.0, abs=5e-3)


def test_numeric_extrapolation_f2():
    est = spectral_radius_numeric(F2, lazy(F2), 200)
    assert abs(est.value - RHO_F2_LAZY) < 0.005
    assert est.lower < RHO_F2_LAZY


@given(n=st.integers(0, 50), x=st.text("abAB", max_size=8), y=st.text("abAB", max_size=8))
def test_kernel_symmetry(n, x, y):
    s = _F2_SERIES
    gx, gy = F2.element(x), F2.element(y)
    assert s.transition(n, gx, gy) == s.transition(n, gy, gx)


_F2_SERIES = return_probability_series(F2, lazy(F2), 60)


class TestGreen:
    def test_example_distance_two(self):
        q = lazy(F2)
        g = green_partial_sum(F2, q, F2.identity(), F2.element("ab"), 1.05, 200)
        mr = 1.05 * RHO_F2_LAZY
        assert g.geometric_bound == pytest.approx(mr**2 / (1 - mr))
        assert g.geometric_bound == pytest.approx(14.05, abs=0.01)
        assert g.upper <= g.geometric_bound

    def test_small_m_limit(self):
        g = green_partial_sum(F2, lazy(F2), F2.identity(), F2.identity(), 1e-9, 10)
        assert g.partial == pytest.approx(1.0, abs=1e-8)

    def test_short_horizon_is_tail_only(self):
        x, y = F2.identity(), F2.element("abab")
        g = green_partial_sum(F2, lazy(F2), x, y, 1.05, 3)
        assert g.partial == 0.0
        assert g.tail_bound > 0

    def test_divergent_flag(self):
        g = green_partial_sum(F2, lazy(F2), F2.identity(), F2.identity(), 1.2, 50)
        assert g.divergent and math.isinf(g.upper)

    def test_partial_sum_against_enumeration(self):
        q = lazy(F2)
        y = F2.element("a")
        ref = sum(walk_law(F2, q, F2.identity(), n).get(y, 0.0) * 1.05**n for n in range(8))
        assert green_partial_sum(F2, q, F2.identity(), y, 1.05, 7).partial == pytest.approx(ref, rel=1e-12)
