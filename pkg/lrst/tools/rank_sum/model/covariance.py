"""
Plug-in covariance of the per-visit rank-difference vector.

The population covariances of the placement functions are never evaluated directly; the moment estimators
built from placement ranks stand in for them.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from lrst.tools.rank_sum.model.ranks import (
    EffectEstimates,
    RankTables,
    build_rank_tables,
    estimate_effects,
)
from lrst.utils.dataset import TrialDataset

logger = logging.getLogger(__name__)

COMPONENTS = ("variance", "intra_source", "inter_source", "cross")


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """
    ``sigma`` is the T x T estimate; ``c_blocks[t1, t2]`` and ``d_blocks[t1, t2]`` are the K x K blocks
    it was assembled from. ``components`` splits ``sigma`` into same-visit/same-outcome terms
    (``variance``), same outcome across visits (``intra_source``), different outcomes at one visit
    (``inter_source``) and different outcomes across visits (``cross``); they sum to ``sigma``.
    """

    sigma: np.ndarray
    c_blocks: np.ndarray
    d_blocks: np.ndarray
    lam: float
    components: Dict[str, np.ndarray] = field(default_factory=dict)

    def contributions(self, weights) -> Dict[str, float]:
        w = np.asarray(weights, dtype=float)
        return {name: float(w @ part @ w) for name, part in self.components.items()}


def placement_matrices(ranks: RankTables, effects: EffectEstimates, t: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Centered placements at visit ``t``: ``P`` is ``(n_x, K)`` and ``Q`` is ``(n_y, K)``. Each column of
    either matrix sums to zero.
    """
    n_x, n_y = ranks.n_x, ranks.n_y
    theta = effects.theta_tk[t]
    p = ranks.placement_x_in_y[:, t, :] - 1 - n_y * (1 - theta) / 2
    q = ranks.placement_y_in_x[:, t, :] - 1 - n_x * (1 + theta) / 2
    return p, q


def c_hat_block(p_t1: np.ndarray, p_t2: np.ndarray, n_x: int, n_y: int) -> np.ndarray:
    return p_t1.T @ p_t2 / (n_x * n_y**2)


def d_hat_block(q_t1: np.ndarray, q_t2: np.ndarray, n_x: int, n_y: int) -> np.ndarray:
    return q_t1.T @ q_t2 / (n_x**2 * n_y)


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2


def assemble_sigma(c_blocks: np.ndarray, d_blocks: np.ndarray, lam: float) -> CovarianceEstimate:
    """
    Combine ``(T, T, K, K)`` block grids into the T x T covariance:
    ``sigma[t1, t2] = ((1 + 1/lam) * sum(C[t1, t2]) + (1 + lam) * sum(D[t1, t2])) / K**2``.

    The result is symmetrized but not projected onto the positive semidefinite cone.
    """
    n_visits, n_outcomes = c_blocks.shape[0], c_blocks.shape[-1]
    per_pair = ((1 + 1 / lam) * c_blocks + (1 + lam) * d_blocks) / n_outcomes**2

    same_outcome = per_pair[..., np.eye(n_outcomes, dtype=bool)].sum(axis=-1)
    other_outcome = per_pair.sum(axis=(2, 3)) - same_outcome
    same_visit = np.eye(n_visits, dtype=bool)
    components = {
        "variance": _symmetrize(np.where(same_visit, same_outcome, 0.0)),
        "intra_source": _symmetrize(np.where(same_visit, 0.0, same_outcome)),
        "inter_source": _symmetrize(np.where(same_visit, other_outcome, 0.0)),
        "cross": _symmetrize(np.where(same_visit, 0.0, other_outcome)),
    }
    return CovarianceEstimate(
        sigma=_symmetrize(per_pair.sum(axis=(2, 3))),
        c_blocks=c_blocks,
        d_blocks=d_blocks,
        lam=lam,
        components=components,
    )


def estimate_covariance(
    data: TrialDataset,
    ranks: Optional[RankTables] = None,
    effects: Optional[EffectEstimates] = None,
) -> CovarianceEstimate:
    ranks = ranks if ranks is not None else build_rank_tables(data)
    effects = effects if effects is not None else estimate_effects(ranks, data)
    n_x, n_y, n_visits, n_outcomes = data.n_x, data.n_y, data.n_visits, data.n_outcomes

    p_all, q_all = zip(*(placement_matrices(ranks, effects, t) for t in range(n_visits)))
    # all (t1, t2) blocks in one product: (T*K) x (T*K) reshaped to (T, T, K, K)
    p_all = np.concatenate(p_all, axis=1)
    q_all = np.concatenate(q_all, axis=1)
    shape = (n_visits, n_outcomes, n_visits, n_outcomes)
    c_blocks = c_hat_block(p_all, p_all, n_x, n_y).reshape(shape).transpose(0, 2, 1, 3)
    d_blocks = d_hat_block(q_all, q_all, n_x, n_y).reshape(shape).transpose(0, 2, 1, 3)

    covariance = assemble_sigma(c_blocks, d_blocks, data.ratio)
    logger.debug(f"sigma diagonal={np.round(np.diag(covariance.sigma), 5).tolist()}")
    return covariance
