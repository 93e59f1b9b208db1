import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from lrst.errors import EmptyInputError, NonFiniteValueError
from lrst.utils.dataset import TrialDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RankTables:
    """
    Midranks per (visit, outcome) slice.

    ``pooled_midranks_*`` rank each arm's values within the pooled sample; ``placement_x_in_y`` holds the
    midrank of each control value among the treatment values plus itself, ``placement_y_in_x`` the
    converse. All four arrays are shaped like the arm they belong to.
    """

    pooled_midranks_x: np.ndarray
    pooled_midranks_y: np.ndarray
    placement_x_in_y: np.ndarray
    placement_y_in_x: np.ndarray

    @property
    def n_x(self) -> int:
        return self.pooled_midranks_x.shape[0]

    @property
    def n_y(self) -> int:
        return self.pooled_midranks_y.shape[0]


@dataclass(frozen=True, eq=False)
class EffectEstimates:
    theta_tk: np.ndarray  # (T, K)
    theta_t: np.ndarray  # (T,)
    theta_bar: float
    rank_diff: np.ndarray  # (T,), mean rank of treatment minus control per visit


def midranks(values, axis: int = 0) -> np.ndarray:
    """
    Ranks with ties replaced by the average of the positions they occupy, e.g. ``(3, 1, 3, 2)`` ranks as
    ``(3.5, 1, 3.5, 2)``. Multi-dimensional input is ranked independently along ``axis``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInputError("cannot rank an empty sample")
    if not np.isfinite(values).all():
        raise NonFiniteValueError("cannot rank non-finite values")
    if values.ndim == 0:
        values = values.reshape(1)
    return rankdata(values, method="average", axis=axis)


def build_rank_tables(data: TrialDataset) -> RankTables:
    pooled = midranks(data.pooled(), axis=0)
    pooled_x, pooled_y = pooled[: data.n_x], pooled[data.n_x :]
    # pooled rank minus within-arm rank counts the other arm's values below (ties halved)
    placement_x_in_y = pooled_x - midranks(data.arm_x_values, axis=0) + 1
    placement_y_in_x = pooled_y - midranks(data.arm_y_values, axis=0) + 1
    return RankTables(
        pooled_midranks_x=pooled_x,
        pooled_midranks_y=pooled_y,
        placement_x_in_y=placement_x_in_y,
        placement_y_in_x=placement_y_in_x,
    )


def _effects_from_theta(theta_tk: np.ndarray, n_total: int) -> EffectEstimates:
    theta_t = theta_tk.mean(axis=1)
    return EffectEstimates(
        theta_tk=theta_tk,
        theta_t=theta_t,
        theta_bar=float(theta_t.mean()),
        rank_diff=n_total / 2 * theta_t,
    )


def estimate_effects(ranks: RankTables, data: TrialDataset) -> EffectEstimates:
    """Relative treatment effects from mean pooled ranks: theta_tk = (2/N)(mean rank y - mean rank x)."""
    mean_diff = ranks.pooled_midranks_y.mean(axis=0) - ranks.pooled_midranks_x.mean(axis=0)
    effects = _effects_from_theta(2.0 / data.n_total * mean_diff, data.n_total)
    logger.debug(f"theta_t={np.round(effects.theta_t, 4).tolist()}, theta_bar={effects.theta_bar:.4f}")
    return effects


def theta_oracle(data: TrialDataset) -> EffectEstimates:
    """
    Brute-force theta over all n_x * n_y cross-arm pairs, averaging I(x < y) - I(x > y). Memory grows
    with n_x * n_y * T * K, so this is meant for small samples.
    """
    x = data.arm_x_values[:, None, :, :]
    y = data.arm_y_values[None, :, :, :]
    theta_tk = np.sign(y - x).mean(axis=(0, 1))
    return _effects_from_theta(theta_tk, data.n_total)
