import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnncert.net import ShapeError
from bnncert.spec import (InputBox, OutputSpec, argmax_spec, contains,
                          excludes, linf_ball)


class TestLinfBall:
    def test_zero_eps_degenerate(self):
        T = linf_ball(np.array([0.5]), 0.0)
        assert T.lower == pytest.approx([0.5]) and T.upper == pytest.approx([0.5])

    def test_basic_widening(self):
        T = linf_ball(np.array([0.5]), 0.1, clip=(0, 1))
        assert T.lower == pytest.approx([0.4]) and T.upper == pytest.approx([0.6])

    def test_clipping(self):
        T = linf_ball(np.array([0.05]), 0.1, clip=(0, 1))
        assert T.lower == pytest.approx([0.0]) and T.upper == pytest.approx([0.15])

    def test_negative_eps_rejected(self):
        with pytest.raises(ValueError):
            linf_ball(np.array([0.0]), -0.1)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_eps(self, e1, e2):
        lo, hi = sorted([e1, e2])
        x = np.array([0.3, -0.7])
        small, big = linf_ball(x, lo), linf_ball(x, hi)
        assert np.all(big.lower <= small.lower)
        assert np.all(big.upper >= small.upper)


class TestArgmaxSpec:
    def test_two_class_first(self):
        S = argmax_spec(0, 2)
        assert np.array_equal(S.C, [[1.0, -1.0]])
        assert np.array_equal(S.d, [0.0])

    def test_two_class_second(self):
        S = argmax_spec(1, 2)
        assert np.array_equal(S.C, [[-1.0, 1.0]])

    def test_three_class(self):
        S = argmax_spec(0, 3)
        assert np.array_equal(S.C, [[1, -1, 0], [1, 0, -1]])
        assert np.array_equal(S.d, [0.0, 0.0])

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            argmax_spec(0, 1)
        with pytest.raises(ValueError):
            argmax_spec(2, 2)


S01 = argmax_spec(0, 2)  # y0 - y1 >= 0


class TestContainsExcludes:
    def test_contains_clear_margin(self):
        assert contains(S01, [2, 0], [3, 1])

    def test_contains_overlap_fails(self):
        assert not contains(S01, [0, 0], [1, 1])

    def test_contains_point(self):
        y = np.array([1.0, 0.5])
        assert contains(S01, y, y)

    def test_excludes_clear(self):
        assert excludes(S01, [0, 2], [1, 3])

    def test_excludes_overlap_fails(self):
        assert not excludes(S01, [0, 0], [1, 1])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            contains(S01, [0, 0, 0], [1, 1, 1])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_never_both(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        S = OutputSpec(C=rng.normal(size=(3, n)), d=rng.normal(size=3))
        lo = rng.normal(size=n)
        hi = lo + rng.uniform(0, 2, size=n)
        assert not (contains(S, lo, hi) and excludes(S, lo, hi))

    def test_contains_fuzz(self, rng):
        hits = 0
        while hits < 5:
            n = int(rng.integers(2, 5))
            S = OutputSpec(C=rng.normal(size=(2, n)), d=rng.uniform(0, 3, 2))
            lo = rng.normal(0, 0.3, n)
            hi = lo + rng.uniform(0, 0.5, n)
            if not contains(S, lo, hi):
                continue
            hits += 1
            ys = rng.uniform(lo, hi, size=(10_000, n))
            assert np.all(S.satisfied(ys))

    def test_excludes_fuzz(self, rng):
        hits = 0
        while hits < 5:
            n = int(rng.integers(2, 5))
            S = OutputSpec(C=rng.normal(size=(2, n)), d=rng.uniform(-3, 0, 2))
            lo = rng.normal(0, 0.3, n)
            hi = lo + rng.uniform(0, 0.5, n)
            if not excludes(S, lo, hi):
                continue
            hits += 1
            ys = rng.uniform(lo, hi, size=(10_000, n))
            assert not np.any(S.satisfied(ys))


def test_input_box_validation():
    with pytest.raises(ValueError):
        InputBox(lower=np.array([1.0]), upper=np.array([0.0]))
    with pytest.raises(ValueError):
        InputBox(lower=np.array([np.inf]), upper=np.array([np.inf]))
