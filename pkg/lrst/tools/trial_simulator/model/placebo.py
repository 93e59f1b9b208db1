import logging
from dataclasses import dataclass, field, replace
from typing import Sequence, Tuple, Union

import numpy as np

from lrst.errors import InvalidModelError, NonPDCovarianceError

logger = logging.getLogger(__name__)

# Bapineuzumab 302 placebo arm: mean change from baseline (sd) per visit week
BAPI302_VISITS = ("13", "26", "39", "52", "65", "78")
BAPI302_OUTCOMES = ("ADAS-cog11", "DAD")
BAPI302_MU = (
    (0.739, -0.706),
    (1.322, -4.065),
    (3.166, -5.705),
    (4.607, -8.249),
    (5.899, -12.104),
    (7.457, -13.941),
)
BAPI302_SD = (
    (4.799, 10.561),
    (5.386, 13.057),
    (6.510, 14.960),
    (7.444, 15.662),
    (8.084, 16.940),
    (9.139, 18.080),
)
# ADAS-cog11 rises with impairment, DAD falls with it
BAPI302_DIRECTION = (-1, 1)
BAPI302_DELTA = (2.21, 5.38)
# subject random effect and AR(1) residual sd, in units of the placebo sd; calibrated against the
# published power of the equal-weight test at N = 300, 900 and 1500
BAPI302_RANDOM_EFFECT_SD = 1.0
BAPI302_RESIDUAL_SD = 0.8

ACCRUAL_PRESETS = ("linear", "constant")
# ordinal category cut points in placebo standard deviations around the placebo mean
ORDINAL_CUTS = (-3.0, -1.0, 1.0, 3.0)


def _readonly(values, shape=None) -> np.ndarray:
    array = np.array(values, dtype=float)
    if shape is not None and array.shape != shape:
        raise InvalidModelError(f"expected shape {shape}, got {array.shape}")
    array.setflags(write=False)
    return array


def ar1_correlation(n_visits: int, rho: float) -> np.ndarray:
    lags = np.abs(np.subtract.outer(np.arange(n_visits), np.arange(n_visits)))
    return rho**lags


def exchangeable_correlation(n_outcomes: int, rho: float) -> np.ndarray:
    return np.full((n_outcomes, n_outcomes), rho) + (1 - rho) * np.eye(n_outcomes)


@dataclass(frozen=True, eq=False)
class PlaceboModel:
    """
    Control-arm generative model on the raw measurement scale.

    ``mu`` and ``sd`` are ``(T, K)`` placebo means and standard deviations of the change from baseline.
    A subject's value is ``mu + sd * (random_effect_sd * b + residual_sd * e)``: ``b`` is a subject-level
    random effect per outcome, constant over visits, and ``e`` an AR(1) residual with lag-1 correlation
    ``rho_time``. Both terms correlate ``rho_outcome`` between distinct outcomes, so the joint correlation
    stays separable with time part ``random_effect_sd**2 + residual_sd**2 * rho_time**|t1 - t2|``
    (normalized). The marginal sd is ``sd * sqrt(random_effect_sd**2 + residual_sd**2)``; the defaults
    ``(0, 1)`` give a pure AR(1) model with marginals ``sd``. ``direction`` orients generated values so
    larger is favorable.
    """

    mu: np.ndarray
    sd: np.ndarray
    rho_time: float = 0.6
    rho_outcome: float = 0.5
    visit_labels: Tuple[str, ...] = BAPI302_VISITS
    outcome_labels: Tuple[str, ...] = BAPI302_OUTCOMES
    direction: Tuple[int, ...] = BAPI302_DIRECTION
    random_effect_sd: float = 0.0
    residual_sd: float = 1.0
    cholesky: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu = _readonly(self.mu)
        if mu.ndim != 2:
            raise InvalidModelError(f"mu must be a (visits, outcomes) matrix, got shape {mu.shape}")
        sd = _readonly(self.sd, mu.shape)
        n_visits, n_outcomes = mu.shape
        if not (np.isfinite(mu).all() and np.isfinite(sd).all()):
            raise InvalidModelError("mu and sd must be finite")
        if (sd <= 0).any():
            raise InvalidModelError("every standard deviation must be positive")
        if not 0 <= self.rho_time < 1:
            raise InvalidModelError(f"rho_time must lie in [0, 1), got {self.rho_time}")
        if not -1 <= self.rho_outcome <= 1:
            raise InvalidModelError(f"rho_outcome must lie in [-1, 1], got {self.rho_outcome}")
        if not (np.isfinite(self.random_effect_sd) and self.random_effect_sd >= 0):
            raise InvalidModelError(f"random_effect_sd must be nonnegative, got {self.random_effect_sd}")
        if not (np.isfinite(self.residual_sd) and self.residual_sd > 0):
            raise InvalidModelError(f"residual_sd must be positive, got {self.residual_sd}")
        if len(self.visit_labels) != n_visits or len(self.outcome_labels) != n_outcomes:
            raise InvalidModelError("visit/outcome labels do not match the shape of mu")
        if len(self.direction) != n_outcomes or any(s not in (1, -1) for s in self.direction):
            raise InvalidModelError("direction needs one +1/-1 sign per outcome")

        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sd", sd)
        object.__setattr__(self, "random_effect_sd", float(self.random_effect_sd))
        object.__setattr__(self, "residual_sd", float(self.residual_sd))
        object.__setattr__(self, "visit_labels", tuple(str(v) for v in self.visit_labels))
        object.__setattr__(self, "outcome_labels", tuple(str(k) for k in self.outcome_labels))
        object.__setattr__(self, "direction", tuple(int(s) for s in self.direction))
        try:
            cholesky = np.linalg.cholesky(self.covariance())
        except np.linalg.LinAlgError:
            raise NonPDCovarianceError(
                f"covariance with rho_time={self.rho_time}, rho_outcome={self.rho_outcome} "
                f"over {n_outcomes} outcomes is not positive definite"
            )
        cholesky.setflags(write=False)
        object.__setattr__(self, "cholesky", cholesky)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mu.shape

    @property
    def variance_inflation(self) -> float:
        """Marginal variance over ``sd**2``."""
        return self.random_effect_sd**2 + self.residual_sd**2

    def oriented_mean(self) -> np.ndarray:
        return self.mu * np.array(self.direction, dtype=float)

    def marginal_sd(self) -> np.ndarray:
        return self.sd * np.sqrt(self.variance_inflation)

    def time_covariance(self) -> np.ndarray:
        """T x T covariance of one outcome on the sd-standardized scale."""
        n_visits = self.shape[0]
        return self.random_effect_sd**2 + self.residual_sd**2 * ar1_correlation(n_visits, self.rho_time)

    def correlation(self) -> np.ndarray:
        """(T*K) x (T*K) correlation, visit-major."""
        n_outcomes = self.shape[1]
        return np.kron(
            self.time_covariance() / self.variance_inflation,
            exchangeable_correlation(n_outcomes, self.rho_outcome),
        )

    def covariance(self) -> np.ndarray:
        scale = self.marginal_sd().reshape(-1)
        return self.correlation() * np.outer(scale, scale)

    def with_rho_outcome(self, rho_outcome: float) -> "PlaceboModel":
        return replace(self, rho_outcome=rho_outcome)


def bapi302_placebo_model(
    rho_time: float = 0.6,
    rho_outcome: float = 0.5,
    random_effect_sd: float = BAPI302_RANDOM_EFFECT_SD,
    residual_sd: float = BAPI302_RESIDUAL_SD,
) -> PlaceboModel:
    return PlaceboModel(
        mu=BAPI302_MU,
        sd=BAPI302_SD,
        rho_time=rho_time,
        rho_outcome=rho_outcome,
        visit_labels=BAPI302_VISITS,
        outcome_labels=BAPI302_OUTCOMES,
        direction=BAPI302_DIRECTION,
        random_effect_sd=random_effect_sd,
        residual_sd=residual_sd,
    )


@dataclass(frozen=True, eq=False)
class EffectSpec:
    """
    Treatment advantage in the favorable direction. The full ``multiplier * delta`` is reached at the last
    visit; ``accrual`` gives the fraction realized at each visit (``linear``: t/T, ``constant``: 1, or an
    explicit nondecreasing list ending at 1).
    """

    delta: np.ndarray
    accrual: Union[str, Sequence[float]] = "linear"
    multiplier: float = 1.0

    def __post_init__(self):
        delta = _readonly(self.delta)
        if delta.ndim != 1 or not np.isfinite(delta).all():
            raise InvalidModelError("delta must be a finite vector with one entry per outcome")
        object.__setattr__(self, "delta", delta)
        if not (np.isfinite(self.multiplier) and self.multiplier >= 0):
            raise InvalidModelError(f"multiplier must be a nonnegative number, got {self.multiplier}")
        if isinstance(self.accrual, str):
            if self.accrual not in ACCRUAL_PRESETS:
                raise InvalidModelError(f"accrual must be one of {ACCRUAL_PRESETS} or a list, got '{self.accrual}'")
        else:
            fractions = _readonly(self.accrual)
            if fractions.ndim != 1 or fractions.size == 0:
                raise InvalidModelError("explicit accrual must list one fraction per visit")
            if (np.diff(fractions) < 0).any() or fractions[0] < 0 or fractions[-1] != 1:
                raise InvalidModelError("accrual fractions must be nonnegative, nondecreasing and end at 1")
            object.__setattr__(self, "accrual", tuple(fractions.tolist()))

    @classmethod
    def null(cls, n_outcomes: int) -> "EffectSpec":
        return cls(delta=np.zeros(n_outcomes), multiplier=0.0)

    @property
    def is_null(self) -> bool:
        return self.multiplier == 0 or not self.delta.any()

    def accrual_fractions(self, n_visits: int) -> np.ndarray:
        if self.accrual == "linear":
            return np.arange(1, n_visits + 1) / n_visits
        if self.accrual == "constant":
            return np.ones(n_visits)
        if len(self.accrual) != n_visits:
            raise InvalidModelError(f"accrual lists {len(self.accrual)} fractions for {n_visits} visits")
        return np.array(self.accrual)

    def shift(self, n_visits: int, n_outcomes: int) -> np.ndarray:
        """(T, K) mean shift of the treatment arm on the oriented scale."""
        if self.delta.size != n_outcomes:
            raise InvalidModelError(f"delta has {self.delta.size} entries for {n_outcomes} outcomes")
        return np.outer(self.accrual_fractions(n_visits), self.multiplier * self.delta)

    def with_multiplier(self, multiplier: float) -> "EffectSpec":
        return replace(self, multiplier=multiplier)


@dataclass(frozen=True, eq=False)
class OrdinalThresholds:
    """(T, K, 4) strictly increasing cut points mapping values to categories 0..4."""

    cuts: np.ndarray

    def __post_init__(self):
        cuts = _readonly(self.cuts)
        if cuts.ndim != 3 or cuts.shape[-1] != len(ORDINAL_CUTS):
            raise InvalidModelError(f"cuts must have shape (T, K, {len(ORDINAL_CUTS)}), got {cuts.shape}")
        if not (np.diff(cuts, axis=-1) > 0).all():
            raise InvalidModelError("ordinal cut points must be strictly increasing")
        object.__setattr__(self, "cuts", cuts)

    @classmethod
    def from_model(cls, model: PlaceboModel) -> "OrdinalThresholds":
        """
        Cuts at mu - 3sd, mu - sd, mu + sd, mu + 3sd of the placebo model, on the oriented scale. ``sd`` is the
        placebo sd, not the marginal sd of the generated values.
        """
        mean = model.oriented_mean()
        return cls(mean[..., None] + model.sd[..., None] * np.array(ORDINAL_CUTS))
