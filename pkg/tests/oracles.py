"""
Brute-force reference computations used to check the rank-based shortcuts.
"""

import numpy as np
from scipy.stats import rankdata

from lrst.tools.rank_sum.model.ranks import theta_oracle
from lrst.utils.dataset import TrialDataset


def random_dataset(rng, ties=False, n_x=None, n_y=None, n_visits=None, n_outcomes=None, labels=True):
    n_x = n_x or int(rng.integers(2, 16))
    n_y = n_y or int(rng.integers(2, 16))
    n_visits = n_visits or int(rng.integers(1, 7))
    n_outcomes = n_outcomes or int(rng.integers(1, 5))
    shape = (n_visits, n_outcomes)
    if ties:
        x = rng.integers(0, 4, size=(n_x, *shape)).astype(float)
        y = rng.integers(0, 4, size=(n_y, *shape)).astype(float)
    else:
        x = rng.normal(size=(n_x, *shape))
        y = rng.normal(0.3, 1.0, size=(n_y, *shape))
    return TrialDataset(
        arm_x_values=x,
        arm_y_values=y,
        visit_labels=[str(13 * (t + 1)) for t in range(n_visits)],
        outcome_labels=[f"outcome{k}" for k in range(n_outcomes)],
    )


def _placement_fractions(values, others):
    """mean over the other arm of I(other < value) + I(other == value) / 2, shape like ``values``."""
    a = values[:, None]
    b = others[None, :]
    return ((b < a) + 0.5 * (b == a)).mean(axis=1)


def c_hat_oracle(data: TrialDataset) -> np.ndarray:
    """Moment estimator c-hat evaluated from indicator sums, shaped (T, T, K, K)."""
    theta = theta_oracle(data).theta_tk
    centered = _placement_fractions(data.arm_x_values, data.arm_y_values) - (1 - theta) / 2
    return np.einsum("iab,icd->acbd", centered, centered) / data.n_x


def d_hat_oracle(data: TrialDataset) -> np.ndarray:
    theta = theta_oracle(data).theta_tk
    centered = _placement_fractions(data.arm_y_values, data.arm_x_values) - (1 + theta) / 2
    return np.einsum("jab,jcd->acbd", centered, centered) / data.n_y


def c_hat_element(data: TrialDataset, t1, k1, t2, k2) -> float:
    """Single element of c-hat with explicit loops."""
    x, y = data.arm_x_values, data.arm_y_values
    theta = theta_oracle(data).theta_tk
    total = 0.0
    for i in range(data.n_x):
        first = sum((y[j, t1, k1] < x[i, t1, k1]) + 0.5 * (y[j, t1, k1] == x[i, t1, k1]) for j in range(data.n_y))
        second = sum((y[j, t2, k2] < x[i, t2, k2]) + 0.5 * (y[j, t2, k2] == x[i, t2, k2]) for j in range(data.n_y))
        total += (first / data.n_y - (1 - theta[t1, k1]) / 2) * (second / data.n_y - (1 - theta[t2, k2]) / 2)
    return total / data.n_x


def grand_mean_z(data: TrialDataset) -> float:
    """Equal-weight statistic from grand mean ranks and oracle covariance blocks."""
    n_visits, n_outcomes = data.n_visits, data.n_outcomes
    rank_sum_x = rank_sum_y = 0.0
    for t in range(n_visits):
        for k in range(n_outcomes):
            ranks = rankdata(np.concatenate([data.arm_x_values[:, t, k], data.arm_y_values[:, t, k]]))
            rank_sum_x += ranks[: data.n_x].sum()
            rank_sum_y += ranks[data.n_x :].sum()
    cells = n_visits * n_outcomes
    difference = rank_sum_y / (data.n_y * cells) - rank_sum_x / (data.n_x * cells)

    lam = data.n_x / data.n_y
    sigma = ((1 + 1 / lam) * c_hat_oracle(data) + (1 + lam) * d_hat_oracle(data)).sum(axis=(2, 3)) / n_outcomes**2
    variance = data.n_total * sigma.sum() / n_visits**2
    return difference / np.sqrt(variance)
