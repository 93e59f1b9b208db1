import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from lrst.errors import InvalidModelError, NonPositiveVarianceError
from lrst.tools.rank_sum.infer import lrst
from lrst.tools.rank_sum.utils import upper_tail_p
from lrst.tools.trial_simulator.model.placebo import EffectSpec, OrdinalThresholds, PlaceboModel
from lrst.tools.trial_simulator.simulate import discretize, draw_trial
from lrst.tools.trial_simulator.utils import replicate_rng

logger = logging.getLogger(__name__)

VARIANTS = ("continuous", "ordinal")
CONTROL_FRACTION = 0.4
MIN_RECOMMENDED_REPS = 100
COLUMNS = [
    "n_total",
    "n_x",
    "n_y",
    "rho_outcome",
    "multiplier",
    "variant",
    "alpha",
    "rejections",
    "n_valid",
    "n_degenerate",
    "rate",
]


@dataclass(frozen=True)
class ArmSizes:
    n_x: int
    n_y: int

    @property
    def n_total(self) -> int:
        return self.n_x + self.n_y


def allocate(n_total: int, control_fraction: float = CONTROL_FRACTION) -> ArmSizes:
    """floor(fraction * N) control subjects, the remainder treated; 0.4 gives the 2:3 ratio."""
    n_x = math.floor(Fraction(str(control_fraction)) * n_total)
    return ArmSizes(n_x=n_x, n_y=n_total - n_x)


def _check_grid(n_reps: int, alphas: Sequence[float], variants: Sequence[str]):
    if n_reps < 1:
        raise InvalidModelError(f"n_reps must be positive, got {n_reps}")
    if n_reps < MIN_RECOMMENDED_REPS:
        logger.warning(f"Only {n_reps} replicates per cell; rates will be too noisy for inference")
    for alpha in alphas:
        if not 0 < alpha <= 1:
            raise InvalidModelError(f"alpha must lie in (0, 1], got {alpha}")
    unknown = set(variants) - set(VARIANTS)
    if unknown or not variants:
        raise InvalidModelError(f"variants must be a non-empty subset of {VARIANTS}, got {list(variants)}")


def _run_designs(
    designs: Sequence[ArmSizes],
    models: Sequence[PlaceboModel],
    effects: Sequence[EffectSpec],
    alphas: Sequence[float],
    variants: Sequence[str],
    n_reps: int,
    seed: int,
    threads: int,
    progress: bool,
) -> pd.DataFrame:
    _check_grid(n_reps, alphas, variants)
    # thresholds depend on the placebo marginals only, not on rho_outcome
    thresholds = OrdinalThresholds.from_model(models[0])

    def replicate(design_index: int, sizes: ArmSizes, rep: int) -> np.ndarray:
        z = np.full((len(models), len(effects), len(variants)), np.nan)
        for i, model in enumerate(models):
            for j, effect in enumerate(effects):
                # one stream per (design, replicate), shared by every rho/multiplier cell and both variants
                data = draw_trial(model, effect, sizes.n_x, sizes.n_y, replicate_rng(seed, design_index, rep))
                for v, variant in enumerate(variants):
                    trial = discretize(data, thresholds) if variant == "ordinal" else data
                    try:
                        z[i, j, v] = lrst(trial).z
                    except NonPositiveVarianceError:
                        pass
        return z

    rows = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        for design_index, sizes in enumerate(designs):
            results = executor.map(lambda rep: replicate(design_index, sizes, rep), range(n_reps))
            z = np.stack(list(tqdm(results, total=n_reps, desc=f"N={sizes.n_total}", disable=not progress)))
            p = np.vectorize(upper_tail_p, otypes=[float])(z)
            valid = ~np.isnan(z)

            for i, model in enumerate(models):
                for j, effect in enumerate(effects):
                    for v, variant in enumerate(variants):
                        cell_valid = valid[:, i, j, v]
                        n_valid = int(cell_valid.sum())
                        if n_valid < n_reps:
                            logger.warning(
                                f"N={sizes.n_total}, rho_outcome={model.rho_outcome}, "
                                f"multiplier={effect.multiplier}, {variant}: "
                                f"{n_reps - n_valid} degenerate replicate(s) excluded"
                            )
                        for alpha in alphas:
                            rejections = int((p[cell_valid, i, j, v] <= alpha).sum())
                            rows.append(
                                {
                                    "n_total": sizes.n_total,
                                    "n_x": sizes.n_x,
                                    "n_y": sizes.n_y,
                                    "rho_outcome": model.rho_outcome,
                                    "multiplier": effect.multiplier,
                                    "variant": variant,
                                    "alpha": alpha,
                                    "rejections": rejections,
                                    "n_valid": n_valid,
                                    "n_degenerate": n_reps - n_valid,
                                    "rate": rejections / n_valid if n_valid else float("nan"),
                                }
                            )
    return pd.DataFrame(rows, columns=COLUMNS)


def _designs(
    n_values: Optional[Sequence[int]], arm_sizes: Optional[Sequence[ArmSizes]], control_fraction: float
) -> List[ArmSizes]:
    if arm_sizes:
        return [ArmSizes(int(s.n_x), int(s.n_y)) for s in arm_sizes]
    if not n_values:
        raise InvalidModelError("either n_values or arm_sizes must be given")
    return [allocate(int(n), control_fraction) for n in n_values]


def run_type1_experiment(
    model: PlaceboModel,
    n_values: Optional[Sequence[int]] = None,
    alpha_values: Sequence[float] = (0.05, 0.1),
    n_reps: int = 1000,
    seed: int = 0,
    variants: Sequence[str] = VARIANTS,
    control_fraction: float = CONTROL_FRACTION,
    arm_sizes: Optional[Sequence[ArmSizes]] = None,
    threads: int = 1,
    progress: bool = False,
) -> pd.DataFrame:
    """
    Empirical rejection rates of the equal-weight test on null trials (no treatment effect).

    Args:
        model: Placebo model used for both arms.
        n_values: Total sample sizes, split by ``allocate``.
        alpha_values: Nominal one-sided levels; a replicate rejects when ``p <= alpha``.
        n_reps: Trials simulated per sample size.
        seed: Master seed; replicate ``r`` of design ``d`` uses stream ``(seed, d, r)``.
        variants: ``continuous`` and/or ``ordinal`` (same draws discretized to categories 0..4).
        arm_sizes: Explicit designs overriding ``n_values``.
        threads: Worker threads; results do not depend on it.

    Returns:
        Long table with one row per (N, variant, alpha).
    """
    n_outcomes = model.shape[1]
    return _run_designs(
        designs=_designs(n_values, arm_sizes, control_fraction),
        models=[model],
        effects=[EffectSpec.null(n_outcomes)],
        alphas=list(alpha_values),
        variants=list(variants),
        n_reps=n_reps,
        seed=seed,
        threads=threads,
        progress=progress,
    )


def run_power_experiment(
    model: PlaceboModel,
    effect: EffectSpec,
    n_values: Optional[Sequence[int]] = None,
    multipliers: Optional[Sequence[float]] = None,
    rho_values: Optional[Sequence[float]] = None,
    n_reps: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
    variants: Sequence[str] = VARIANTS,
    control_fraction: float = CONTROL_FRACTION,
    arm_sizes: Optional[Sequence[ArmSizes]] = None,
    threads: int = 1,
    progress: bool = False,
    alpha_values: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """
    Empirical power over a grid of designs, effect multipliers and between-outcome correlations.
    ``alpha_values``, when given, replaces ``alpha``; every level is read off the same replicates.

    Varying N at a fixed effect and ``rho_outcome = 0.5`` reproduces the sample-size scenario; fixing
    ``arm_sizes=[ArmSizes(311, 448)]`` and varying ``multipliers`` and ``rho_values`` the effect-size
    scenario. Within a design, every multiplier and correlation reuses the same replicate streams.
    """
    multipliers = list(multipliers) if multipliers is not None else [effect.multiplier]
    rho_values = list(rho_values) if rho_values is not None else [model.rho_outcome]
    return _run_designs(
        designs=_designs(n_values, arm_sizes, control_fraction),
        models=[model.with_rho_outcome(rho) for rho in rho_values],
        effects=[effect.with_multiplier(m) for m in multipliers],
        alphas=list(alpha_values) if alpha_values is not None else [alpha],
        variants=list(variants),
        n_reps=n_reps,
        seed=seed,
        threads=threads,
        progress=progress,
    )
