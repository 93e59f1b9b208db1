"""
Synthetic two-arm multivariate longitudinal trials.

Changes from baseline are drawn as correlated normal vectors: a subject random effect plus an AR(1) residual,
both scaled by the placebo sd. The treatment arm receives the accrued mean shift on the oriented scale.
"""

import logging

import numpy as np

from lrst.errors import DegenerateDesignError, InvalidModelError
from lrst.tools.trial_simulator.model.placebo import EffectSpec, OrdinalThresholds, PlaceboModel
from lrst.tools.trial_simulator.utils import replicate_rng
from lrst.utils.dataset import TrialDataset

logger = logging.getLogger(__name__)


def draw_trial(
    model: PlaceboModel, effect: EffectSpec, n_x: int, n_y: int, rng: np.random.Generator
) -> TrialDataset:
    if n_x < 2 or n_y < 2:
        raise DegenerateDesignError(f"each arm needs at least 2 subjects, got n_x={n_x} and n_y={n_y}")
    n_visits, n_outcomes = model.shape
    shift = effect.shift(n_visits, n_outcomes)

    normals = rng.standard_normal((n_x + n_y, n_visits * n_outcomes))
    values = (normals @ model.cholesky.T).reshape(n_x + n_y, n_visits, n_outcomes)
    # correlation applies on the oriented scale, where all outcomes worsen together
    values = values + model.oriented_mean()
    values[n_x:] += shift
    return TrialDataset(
        arm_x_values=values[:n_x],
        arm_y_values=values[n_x:],
        visit_labels=model.visit_labels,
        outcome_labels=model.outcome_labels,
    )


def simulate_trial(model: PlaceboModel, effect: EffectSpec, n_x: int, n_y: int, seed: int) -> TrialDataset:
    """Draw one oriented trial; identical ``seed`` gives identical data."""
    return draw_trial(model, effect, n_x, n_y, replicate_rng(seed))


def discretize(data: TrialDataset, thresholds: OrdinalThresholds) -> TrialDataset:
    """
    Map every value to its ordinal category 0..4. A value equal to a cut point falls in the upper category.
    """
    if thresholds.cuts.shape[:2] != (data.n_visits, data.n_outcomes):
        raise InvalidModelError(
            f"thresholds cover a {thresholds.cuts.shape[:2]} grid, data has {(data.n_visits, data.n_outcomes)}"
        )

    def categories(values):
        return (values[..., None] >= thresholds.cuts).sum(axis=-1).astype(float)

    return data.with_values(categories(data.arm_x_values), categories(data.arm_y_values))
