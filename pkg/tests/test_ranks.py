import numpy as np
import pytest

from lrst.errors import EmptyInputError, NonFiniteValueError
from lrst.tools.rank_sum.model.ranks import build_rank_tables, estimate_effects, midranks, theta_oracle
from lrst.utils.dataset import TrialDataset
from oracles import random_dataset


def test_midranks_average_ties():
    np.testing.assert_array_equal(midranks([3, 1, 3, 2]), [3.5, 1, 3.5, 2])
    np.testing.assert_array_equal(midranks([5, 5, 5, 5]), [2.5, 2.5, 2.5, 2.5])
    np.testing.assert_array_equal(midranks([7.0]), [1.0])


def test_midranks_along_axis():
    values = np.array([[3.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
    np.testing.assert_array_equal(midranks(values, axis=0), [[3, 2.5], [1, 2.5], [2, 1]])


def test_midranks_rejects_bad_input():
    with pytest.raises(EmptyInputError):
        midranks([])
    with pytest.raises(NonFiniteValueError):
        midranks([1.0, np.nan])


def test_rank_tables_separated(separated):
    ranks = build_rank_tables(separated)
    np.testing.assert_array_equal(ranks.pooled_midranks_x.ravel(), [1, 2])
    np.testing.assert_array_equal(ranks.pooled_midranks_y.ravel(), [3, 4])
    np.testing.assert_array_equal(ranks.placement_x_in_y.ravel(), [1, 1])
    np.testing.assert_array_equal(ranks.placement_y_in_x.ravel(), [3, 3])


def test_effects_separated(separated):
    effects = estimate_effects(build_rank_tables(separated), separated)
    assert effects.theta_tk[0, 0] == pytest.approx(1.0)
    assert effects.theta_bar == pytest.approx(1.0)
    assert effects.rank_diff[0] == pytest.approx(2.0)


def test_effects_all_tied(all_tied):
    effects = estimate_effects(build_rank_tables(all_tied), all_tied)
    assert effects.theta_bar == 0.0
    np.testing.assert_array_equal(build_rank_tables(all_tied).placement_x_in_y.ravel(), [2, 2])


def test_pooled_midranks_sum(rng):
    data = random_dataset(rng, ties=True, n_x=6, n_y=9)
    ranks = build_rank_tables(data)
    total = ranks.pooled_midranks_x.sum(axis=0) + ranks.pooled_midranks_y.sum(axis=0)
    np.testing.assert_allclose(total, 15 * 16 / 2)


def test_matches_pairwise_oracle(rng):
    for i in range(1000):
        data = random_dataset(rng, ties=i % 2 == 1)
        effects = estimate_effects(build_rank_tables(data), data)
        oracle = theta_oracle(data)
        np.testing.assert_allclose(effects.theta_tk, oracle.theta_tk, rtol=0, atol=1e-12)
        np.testing.assert_allclose(effects.rank_diff, oracle.rank_diff, rtol=0, atol=1e-12)


def test_antisymmetric_under_arm_swap(rng):
    for _ in range(50):
        data = random_dataset(rng, ties=True)
        forward = estimate_effects(build_rank_tables(data), data)
        swapped = data.swap_arms()
        backward = estimate_effects(build_rank_tables(swapped), swapped)
        np.testing.assert_allclose(backward.theta_tk, -forward.theta_tk, atol=1e-12)


def test_invariant_to_monotone_transform(rng):
    data = random_dataset(rng, n_x=8, n_y=11, n_visits=3, n_outcomes=2)
    transformed = data.with_values(np.exp(data.arm_x_values) * 3 - 1, np.exp(data.arm_y_values) * 3 - 1)
    before = estimate_effects(build_rank_tables(data), data)
    after = estimate_effects(build_rank_tables(transformed), transformed)
    np.testing.assert_array_equal(before.theta_tk, after.theta_tk)


def test_theta_bounded(rng):
    for _ in range(200):
        data = random_dataset(rng, ties=True)
        theta = estimate_effects(build_rank_tables(data), data).theta_tk
        assert (np.abs(theta) <= 1 + 1e-12).all()


def test_theta_reaches_bound_only_when_separated():
    x = np.array([0.0, 1.0, 2.0]).reshape(3, 1, 1)
    separated = TrialDataset(x, x + 10, ["1"], ["a"])
    overlapping = TrialDataset(x, x + 2, ["1"], ["a"])
    assert estimate_effects(build_rank_tables(separated), separated).theta_tk[0, 0] == pytest.approx(1.0)
    theta = estimate_effects(build_rank_tables(overlapping), overlapping).theta_tk[0, 0]
    assert abs(theta) < 1
