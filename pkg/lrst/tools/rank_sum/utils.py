import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import erfc

from lrst.errors import InvalidWeightsError

logger = logging.getLogger(__name__)

WEIGHT_PRESETS = ("equal", "last-visit")


def upper_tail_p(z: float) -> float:
    """One-sided upper-tail standard normal probability, 1 - Phi(z), via erfc so large z keeps precision."""
    return float(0.5 * erfc(z / math.sqrt(2.0)))


def two_sided_p(p: float) -> float:
    return 2.0 * min(p, 1.0 - p)


@dataclass(frozen=True, eq=False)
class WeightVector:
    """
    Nonnegative per-visit weights with at least one positive entry. The statistic does not depend on their
    scale; ``normalized()`` rescales to unit sum for reporting.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.array(self.values, dtype=float))
        if values.ndim != 1 or values.size == 0:
            raise InvalidWeightsError("weights must be a non-empty vector with one entry per visit")
        if not np.isfinite(values).all():
            raise InvalidWeightsError("weights must be finite")
        if (values < 0).any():
            raise InvalidWeightsError(f"weights must be nonnegative, got {values.tolist()}")
        if not (values > 0).any():
            raise InvalidWeightsError("at least one weight must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def normalized(self) -> np.ndarray:
        return self.values / self.values.sum()

    @classmethod
    def equal(cls, n_visits: int) -> "WeightVector":
        return cls(np.ones(n_visits))

    @classmethod
    def last_visit(cls, n_visits: int) -> "WeightVector":
        values = np.zeros(n_visits)
        values[-1] = 1.0
        return cls(values)

    @classmethod
    def parse(cls, spec: Union[str, Sequence[float], "WeightVector", None], n_visits: int) -> "WeightVector":
        """Build weights from ``"equal"``, ``"last-visit"``, ``"w1,...,wT"`` or a sequence."""
        if spec is None or (isinstance(spec, str) and spec.strip() == "equal"):
            return cls.equal(n_visits)
        if isinstance(spec, WeightVector):
            weights = spec
        elif isinstance(spec, str) and spec.strip() == "last-visit":
            return cls.last_visit(n_visits)
        elif isinstance(spec, str):
            try:
                values = [float(w) for w in spec.split(",") if w.strip()]
            except ValueError:
                raise InvalidWeightsError(
                    f"weights '{spec}' must be one of {WEIGHT_PRESETS} or a comma-separated list of numbers"
                )
            weights = cls(values)
        else:
            weights = cls(spec)
        if len(weights) != n_visits:
            raise InvalidWeightsError(f"got {len(weights)} weights for {n_visits} visits")
        return weights
