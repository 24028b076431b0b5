import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochlb.dist import (
    DiscreteDist,
    capped_l_function,
    effective_size,
    expectation,
    l_function,
    raw_moment,
    scale,
    truncate_split,
)
from stochlb.errors import DistributionError

# frozen with mpmath at 30 digits, independently of this package
NU_BERNOULLI_EPS1_P2 = 0.458145365937077532591763605884
BETA4_BERNOULLI_HALF = 0.660964047443681173935159714745


def dists(max_support=5, vmax=50.0):
    return st.lists(
        st.tuples(st.floats(0, vmax, allow_nan=False), st.floats(0.01, 1.0)), min_size=1, max_size=max_support
    ).map(lambda pairs: DiscreteDist.from_arrays([v for v, _ in pairs], np.array([q for _, q in pairs]) / sum(q for _, q in pairs)))


class TestConstruction:
    def test_merges_and_sorts(self):
        d = DiscreteDist.from_pairs([[2, 0.25], [1, 0.5], [2, 0.25]])
        assert d.values.tolist() == [1.0, 2.0]
        assert d.probs.tolist() == [0.5, 0.5]

    def test_merge_tolerance(self):
        d = DiscreteDist.from_pairs([[1.0, 0.5], [1.0 + 5e-13, 0.5]])
        assert d.support_size == 1

    @pytest.mark.parametrize(
        "pairs",
        [[], [[-1, 1.0]], [[1, 0.5]], [[math.inf, 1.0]], [[1, 1.5], [2, -0.5]]],
    )
    def test_rejects_invalid(self, pairs):
        with pytest.raises(DistributionError):
            DiscreteDist.from_pairs(pairs)

    def test_arrays_are_read_only(self):
        d = DiscreteDist.point(1.0)
        with pytest.raises(ValueError):
            d.values[0] = 2.0

    def test_zero_probability_atoms_dropped(self):
        d = DiscreteDist.from_pairs([[0, 0.0], [3, 1.0]])
        assert d.pairs() == [[3.0, 1.0]]

    def test_equality_and_hash(self):
        a = DiscreteDist.from_pairs([[1, 0.5], [2, 0.5]])
        b = DiscreteDist.from_pairs([[2, 0.5], [1, 0.5]])
        assert a == b and hash(a) == hash(b)


class TestExpectation:
    def test_point_mass(self):
        assert expectation(DiscreteDist.point(3)) == 3

    def test_symmetric(self):
        assert expectation(DiscreteDist.from_pairs([[0, 0.5], [2, 0.5]])) == 1

    def test_three_atoms(self):
        d = DiscreteDist.from_pairs([[1, 0.25], [2, 0.25], [4, 0.5]])
        assert expectation(d) == pytest.approx(2.75, rel=1e-15)


class TestRawMoment:
    def test_point(self):
        assert raw_moment(DiscreteDist.point(2), 3) == pytest.approx(8.0)

    @pytest.mark.parametrize("p", [1, 1.5, 2, 7])
    def test_bernoulli(self, p):
        assert raw_moment(DiscreteDist.bernoulli(0.5), p) == pytest.approx(0.5)

    def test_two_atoms(self):
        assert raw_moment(DiscreteDist.from_pairs([[1, 0.5], [3, 0.5]]), 2) == pytest.approx(5.0)

    def test_overflow(self):
        with pytest.raises(OverflowError):
            raw_moment(DiscreteDist.point(1e200), 3)


class TestLFunction:
    def test_zero(self, backend):
        assert l_function(DiscreteDist.point(0), 0.3, 4) == 0.0

    @pytest.mark.parametrize("c,p", [(1.0, 1.0), (3.5, 2.0), (0.1, 7.0)])
    def test_point_at_eps(self, backend, c, p):
        assert l_function(DiscreteDist.point(c), c, p) == pytest.approx(math.log(2), rel=1e-13)

    def test_bernoulli(self, backend):
        d = DiscreteDist.bernoulli(0.5)
        assert l_function(d, 1.0, 2) == pytest.approx(NU_BERNOULLI_EPS1_P2, rel=1e-14)
        assert capped_l_function(d, 1.0, 2) == pytest.approx(NU_BERNOULLI_EPS1_P2, rel=1e-14)

    def test_cap_active(self, backend):
        assert capped_l_function(DiscreteDist.point(100), 1.0, 2) == 1.0

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_bad_eps(self, eps):
        with pytest.raises(DistributionError):
            l_function(DiscreteDist.point(1), eps, 2)

    def test_large_p_is_stable(self, backend):
        d = DiscreteDist.from_pairs([[0, 0.5], [1e6, 0.5]])
        val = l_function(d, 1e-3, 50)
        assert math.isfinite(val) and val > 0

    @settings(max_examples=60, deadline=None)
    @given(dists(), st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.0]))
    def test_decreasing_in_eps(self, d, p):
        if d.is_zero:
            return
        vals = [l_function(d, eps, p) for eps in np.geomspace(1e-3, 1e4, 30)]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 0.05 * max(1.0, d.max_value)

    @settings(max_examples=60, deadline=None)
    @given(dists(), st.floats(0.01, 100), st.floats(0.01, 100), st.sampled_from([1.0, 2.0, 5.0]))
    def test_scale_commutation(self, d, c, eps, p):
        # nu_eps(cX) = nu_{eps/c}(X)
        assert l_function(scale(d, c), eps, p) == pytest.approx(l_function(d, eps / c, p), rel=1e-9, abs=1e-12)


class TestEffectiveSize:
    def test_point_mass_any_ell(self, backend):
        for ell in [1, 2, 10, 1000]:
            assert effective_size(DiscreteDist.point(2.5), ell) == pytest.approx(2.5, rel=1e-12)

    def test_ell_one_is_mean(self):
        d = DiscreteDist.from_pairs([[0, 0.3], [5, 0.7]])
        assert effective_size(d, 1) == expectation(d)
        assert effective_size(d, 1 + 1e-10) == expectation(d)

    def test_bernoulli(self, backend):
        assert effective_size(DiscreteDist.bernoulli(0.5), 4) == pytest.approx(BETA4_BERNOULLI_HALF, rel=1e-14)

    def test_rejects_small_ell(self):
        with pytest.raises(DistributionError):
            effective_size(DiscreteDist.point(1), 0.5)

    def test_zero_is_exactly_zero(self, backend):
        # probabilities summing to 1 + ulp must not leave a positive residue
        d = DiscreteDist.from_arrays(np.zeros(1), np.array([1.0]))
        for ell in [2, 7, 1000]:
            assert effective_size(d, ell) == 0.0

    def test_between_mean_and_max(self, rng):
        for _ in range(50):
            d = DiscreteDist.from_arrays(rng.uniform(0, 3, 3), rng.dirichlet(np.ones(3)))
            b = effective_size(d, float(rng.uniform(1.5, 1e6)))
            assert expectation(d) <= b <= d.values.max()

    @settings(max_examples=60, deadline=None)
    @given(dists(vmax=5.0))
    def test_monotone_and_above_mean(self, d):
        vals = [effective_size(d, ell) for ell in [1, 1.5, 2, 4, 16, 100, 1000]]
        assert vals[0] == pytest.approx(expectation(d))
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    @settings(max_examples=40, deadline=None)
    @given(dists(vmax=1.0), st.integers(1, 500))
    def test_bounded_by_max_when_truncated(self, d, ell):
        assert effective_size(d, ell) <= 1.0 + 1e-12


class TestTruncation:
    def test_no_exceptional(self):
        low, high = truncate_split(DiscreteDist.point(5), 10)
        assert low == DiscreteDist.point(5) and high.is_zero

    def test_all_exceptional(self):
        low, high = truncate_split(DiscreteDist.point(5), 2)
        assert low.is_zero and high == DiscreteDist.point(5)

    def test_split(self):
        low, high = truncate_split(DiscreteDist.from_pairs([[1, 0.5], [8, 0.5]]), 4)
        assert low.pairs() == [[0.0, 0.5], [1.0, 0.5]]
        assert high.pairs() == [[0.0, 0.5], [8.0, 0.5]]

    @settings(max_examples=60, deadline=None)
    @given(dists(), st.floats(0.05, 60))
    def test_moment_recomposition(self, d, theta):
        low, high = truncate_split(d, theta)
        for p in (1, 1.5, 2, 3, 7):
            whole = raw_moment(d, p)
            assert raw_moment(low, p) + raw_moment(high, p) == pytest.approx(whole, rel=1e-10, abs=1e-300)


class TestScale:
    def test_identity(self):
        d = DiscreteDist.from_pairs([[1, 0.5], [2, 0.5]])
        assert scale(d, 1) is d

    def test_to_unit(self):
        assert scale(DiscreteDist.point(44), 1 / 44) == DiscreteDist.point(1.0)
