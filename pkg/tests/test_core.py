import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathsens.core import (CHUNK, ChainTrajectory, ConfigError, DimensionError, FimAccumulator, JumpTrajectory,
                           NoDataError, ParameterVector, Perturbation, RerAccumulator, RngStream, WeightedMean,
                           accumulate, axis_directions)


def test_parameter_vector_basics():
    p = ParameterVector([3.0, 1.0], ("a", "b"))
    assert p.k == 2
    assert p.as_dict() == {"a": 3.0, "b": 1.0}
    np.testing.assert_array_equal(np.asarray(p), [3.0, 1.0])
    q = p.perturbed(np.array([0.5, -0.5]))
    np.testing.assert_array_equal(q.values, [3.5, 0.5])


@pytest.mark.parametrize("values,names", [([1.0, 2.0], ("a",)), ([], None), ([1.0, float("nan")], None)])
def test_parameter_vector_rejects_bad_shapes(values, names):
    with pytest.raises(ValueError):
        ParameterVector(values, names)


def test_require_positive():
    with pytest.raises(ValueError):
        ParameterVector([1.0, -1.0]).require_positive()
    ParameterVector([1.0, -1.0]).require_positive([0])


def test_axis_directions_labels_and_signs():
    p = ParameterVector([3.0, 1.0, 2.0], ("x", "y", "z"))
    dirs = axis_directions(p, 0.05)
    assert len(dirs) == 6
    assert dirs[0].label == "+0.05*x"
    np.testing.assert_array_equal(dirs[1].vector, [-0.05, 0, 0])
    assert len(axis_directions(p, 0.05, both_signs=False)) == 3


def test_perturbation_null():
    assert Perturbation(np.zeros(3)).is_null()
    assert not Perturbation.axis(3, 1, 0.1).is_null()


def test_rng_streams_reproducible_and_independent():
    a = RngStream(7, 0).generator().random(5)
    b = RngStream(7, 0).generator().random(5)
    c = RngStream(7, 1).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_jump_trajectory_times():
    tr = JumpTrajectory(np.array([[1.0], [2.0], [1.0]]), np.array([0.5, 0.25, 1.0]), np.array([0, 1, 0]), 2.0)
    assert tr.n_jumps == 3
    assert tr.total_time == pytest.approx(1.75)
    np.testing.assert_allclose(tr.times(), [2.5, 2.75, 3.75])


def test_chain_trajectory():
    tr = ChainTrajectory(np.zeros((11, 2)))
    assert tr.n_steps == 10


def test_weighted_mean_matches_numpy(rng):
    x = rng.normal(size=1000)
    w = rng.random(1000)
    acc = WeightedMean((), 8)
    acc.add_many(x, w)
    assert acc.estimate() == pytest.approx(np.average(x, weights=w), rel=1e-12)
    assert acc.count == 1000
    assert acc.total_weight == pytest.approx(w.sum())


def test_weighted_mean_empty_raises():
    with pytest.raises(NoDataError):
        WeightedMean(()).estimate()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=300), st.integers(1, 299))
def test_weighted_mean_split_invariance(xs, cut):
    """Feeding samples in two pieces, or merging two accumulators, gives the same mean."""
    xs = np.array(xs)
    cut = min(cut, xs.size - 1)
    ws = np.linspace(0.5, 1.5, xs.size)
    one = WeightedMean(())
    one.add_many(xs, ws)
    two = WeightedMean(())
    two.add_many(xs[:cut], ws[:cut])
    two.add_many(xs[cut:], ws[cut:])
    a, b = WeightedMean(()), WeightedMean(())
    a.add_many(xs[:cut], ws[:cut])
    b.add_many(xs[cut:], ws[cut:])
    merged = a.merge(b)
    scale = max(1.0, float(np.max(np.abs(xs))))
    assert abs(one.estimate() - two.estimate()) <= 1e-12 * scale
    assert abs(one.estimate() - merged.estimate()) <= 1e-12 * scale
    assert merged.count == xs.size


def test_batch_means_standard_error_of_iid(rng):
    acc = WeightedMean((), 32)
    n = 64 * CHUNK // 16
    acc.add_many(rng.normal(size=n))
    se = acc.std_error()
    assert 0.6 / math.sqrt(n) < se < 1.5 / math.sqrt(n)


def test_fim_accumulator_is_symmetric(rng):
    acc = FimAccumulator(3)
    for _ in range(10):
        g = rng.normal(size=3)
        accumulate(acc, np.outer(g, g + 0.1), 1.0)
    F = acc.estimate()
    np.testing.assert_array_equal(F, F.T)


def test_rer_accumulator_scalar():
    acc = RerAccumulator()
    accumulate(acc, 2.0, 1.0)
    accumulate(acc, 4.0, 3.0)
    assert acc.estimate() == pytest.approx(3.5)
