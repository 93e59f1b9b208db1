import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from tqdm import tqdm

from lrst.errors import NonPositiveVarianceError
from lrst.tools.rank_sum.model.covariance import CovarianceEstimate, estimate_covariance
from lrst.tools.rank_sum.model.ranks import EffectEstimates, build_rank_tables, estimate_effects, midranks
from lrst.tools.rank_sum.utils import WeightVector, two_sided_p, upper_tail_p
from lrst.utils.dataset import TrialDataset

logger = logging.getLogger(__name__)

# variances at or below this (relative to N) are treated as zero
VARIANCE_FLOOR = 1e-12
MIN_PERMUTATIONS = 100
# array elements (subjects x visits x outcomes x permutations) per vectorized batch
PERMUTATION_BATCH_ELEMENTS = 2_000_000


@dataclass(frozen=True, eq=False)
class TestResult:
    __test__ = False  # not a pytest class

    z: float
    p_value: float
    numerator: float
    variance: float
    theta_bar: float
    weights_used: np.ndarray
    effects: EffectEstimates
    covariance: CovarianceEstimate
    n_x: int
    n_y: int
    visit_labels: Tuple[str, ...] = ()
    outcome_labels: Tuple[str, ...] = ()

    @property
    def two_sided_p(self) -> float:
        return two_sided_p(self.p_value)

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.variance)

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha

    def to_dict(self, alpha: Optional[float] = None, two_sided: bool = False) -> Dict[str, Any]:
        record = {
            "z": self.z,
            "p_value": self.p_value,
            "numerator": self.numerator,
            "variance": self.variance,
            "standard_error": self.standard_error,
            "theta_bar": self.theta_bar,
            "theta_t": self.effects.theta_t.tolist(),
            "theta_tk": self.effects.theta_tk.tolist(),
            "rank_diff": self.effects.rank_diff.tolist(),
            "sigma": self.covariance.sigma.tolist(),
            "weights": self.weights_used.tolist(),
            "n_x": self.n_x,
            "n_y": self.n_y,
            "T": len(self.weights_used),
            "K": self.effects.theta_tk.shape[1],
            "visits": list(self.visit_labels),
            "outcomes": list(self.outcome_labels),
            "sigma_diagnostics": {
                "lambda": self.covariance.lam,
                "components": {name: part.tolist() for name, part in self.covariance.components.items()},
                "weighted_contributions": self.covariance.contributions(self.weights_used),
            },
        }
        if two_sided:
            # extension: the test itself is one-sided
            record["p_value_two_sided"] = self.two_sided_p
        if alpha is not None:
            record["alpha"] = alpha
            record["reject"] = self.reject(alpha)
        return record


def lrst(data: TrialDataset, weights: Optional[WeightVector] = None) -> TestResult:
    """
    Longitudinal rank-sum test of H0: theta_bar = 0 against H1: theta_bar > 0.

    The statistic is ``z = w'R / sqrt(N w' Sigma w)`` where ``R`` holds the per-visit differences of
    mean pooled ranks (treatment minus control, averaged over outcomes). With equal weights this is the
    difference of grand mean ranks divided by its estimated standard error.

    Args:
        data: Oriented complete-case trial.
        weights: Per-visit weights; equal weights when omitted.

    Returns:
        TestResult with the upper-tail p-value.

    Raises:
        NonPositiveVarianceError: If the estimated variance is not positive (e.g. fully tied data).
    """
    weights = WeightVector.parse(weights, data.n_visits)
    ranks = build_rank_tables(data)
    effects = estimate_effects(ranks, data)
    covariance = estimate_covariance(data, ranks, effects)

    w = weights.normalized()
    numerator = float(w @ effects.rank_diff)
    variance = float(data.n_total * (w @ covariance.sigma @ w))
    if not variance > VARIANCE_FLOOR * data.n_total:
        raise NonPositiveVarianceError(
            f"estimated variance {variance:.3g} of the weighted rank difference is not positive; "
            "the asymptotic test is undefined for this data"
        )
    z = numerator / math.sqrt(variance)
    return TestResult(
        z=z,
        p_value=upper_tail_p(z),
        numerator=numerator,
        variance=variance,
        theta_bar=effects.theta_bar,
        weights_used=w,
        effects=effects,
        covariance=covariance,
        n_x=data.n_x,
        n_y=data.n_y,
        visit_labels=data.visit_labels,
        outcome_labels=data.outcome_labels,
    )


def lrst_last_visit(data: TrialDataset) -> TestResult:
    """Rank-sum test on the final visit only (all weight on visit T)."""
    return lrst(data, WeightVector.last_visit(data.n_visits))


@dataclass(frozen=True, eq=False)
class PermutationNull:
    z_values: np.ndarray
    n_degenerate: int
    n_perm: int
    seed: int

    def p_value(self, observed_z: float) -> float:
        """One-sided permutation p-value, counting the observed arrangement."""
        exceed = int((self.z_values >= observed_z).sum())
        return (exceed + 1) / (self.z_values.size + 1)


def permuted_z(data: TrialDataset, orders: np.ndarray, weights: Optional[WeightVector] = None) -> np.ndarray:
    """
    z for each row of ``orders``, a ``(B, N)`` array of subject permutations whose first ``n_x`` entries form
    the control arm. Equal to ``lrst`` on each relabelled dataset; entries with vanishing variance are NaN.

    Pooled midranks do not change under relabelling, so only the within-arm ranks are recomputed, and
    ``w' Sigma w`` comes straight from the weighted placement sums of each subject.
    """
    w = WeightVector.parse(weights, data.n_visits).normalized()
    orders = np.atleast_2d(orders)
    n_x, n_y, n_total = data.n_x, data.n_y, data.n_total
    pooled = data.pooled()
    values, ranks = pooled[orders], midranks(pooled, axis=0)[orders]

    ranks_x, ranks_y = ranks[:, :n_x], ranks[:, n_x:]
    theta = 2.0 / n_total * (ranks_y.mean(axis=1) - ranks_x.mean(axis=1))
    placement_x = ranks_x - midranks(values[:, :n_x], axis=1) + 1
    placement_y = ranks_y - midranks(values[:, n_x:], axis=1) + 1
    p = placement_x - 1 - n_y * (1 - theta[:, None]) / 2
    q = placement_y - 1 - n_x * (1 + theta[:, None]) / 2

    p_w = np.einsum("bitk,t->bi", p, w)
    q_w = np.einsum("bitk,t->bi", q, w)
    lam = data.ratio
    quadratic = (
        (1 + 1 / lam) * (p_w**2).sum(axis=1) / (n_x * n_y**2) + (1 + lam) * (q_w**2).sum(axis=1) / (n_x**2 * n_y)
    ) / data.n_outcomes**2
    variance = n_total * quadratic
    numerator = (n_total / 2 * theta.mean(axis=-1)) @ w

    z = np.full(len(orders), np.nan)
    usable = variance > VARIANCE_FLOOR * n_total
    z[usable] = numerator[usable] / np.sqrt(variance[usable])
    return z


def permutation_null(
    data: TrialDataset,
    weights: Optional[WeightVector] = None,
    n_perm: int = 1000,
    seed: int = 0,
    threads: int = 1,
    progress: bool = False,
) -> PermutationNull:
    """
    Recompute z under random re-assignment of whole subjects (full T x K profiles) to the two arms.

    Permutation ``i`` is drawn from ``SeedSequence([seed, i])`` and permutations are evaluated in fixed
    batches, so the output does not depend on ``threads``. Permutations whose variance estimate vanishes
    are skipped and counted.
    """
    if n_perm < MIN_PERMUTATIONS:
        raise ValueError(f"n_perm must be at least {MIN_PERMUTATIONS}, got {n_perm}")
    weights = WeightVector.parse(weights, data.n_visits)
    batch_size = max(1, PERMUTATION_BATCH_ELEMENTS // data.pooled().size)

    def evaluate(start: int) -> np.ndarray:
        indices = range(start, min(start + batch_size, n_perm))
        orders = np.stack(
            [np.random.default_rng(np.random.SeedSequence([seed, i])).permutation(data.n_total) for i in indices]
        )
        return permuted_z(data, orders, weights)

    starts = range(0, n_perm, batch_size)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        batches = tqdm(executor.map(evaluate, starts), total=len(starts), desc="Permutations", disable=not progress)
        z_values = np.concatenate(list(batches))

    degenerate = np.isnan(z_values)
    if degenerate.all():
        raise NonPositiveVarianceError(f"all {n_perm} permutations have zero estimated variance")
    if degenerate.any():
        logger.warning(f"Skipped {int(degenerate.sum())} of {n_perm} degenerate permutations")
    return PermutationNull(
        z_values=z_values[~degenerate],
        n_degenerate=int(degenerate.sum()),
        n_perm=n_perm,
        seed=seed,
    )
