import logging
import os
from typing import Optional, Sequence, Union

from lrst.tools.rank_sum.infer import PermutationNull, TestResult, lrst, permutation_null
from lrst.tools.rank_sum.utils import WeightVector
from lrst.utils.dataset import ColumnSchema, DirectionMap, TrialDataset, parse_long_csv

logger = logging.getLogger(__name__)


class LongitudinalRankSumTest:
    def __init__(
        self,
        weights: Union[str, Sequence[float], WeightVector, None] = "equal",
        schema: Optional[ColumnSchema] = None,
        direction: Optional[DirectionMap] = None,
        baseline: Optional[str] = None,
        drop_incomplete: bool = False,
    ):
        """
        Initialize the test pipeline with its weighting and CSV ingestion settings.
        """
        self.weights = weights
        self.schema = schema or ColumnSchema()
        self.direction = direction or DirectionMap()
        self.baseline = baseline
        self.drop_incomplete = drop_incomplete

    def load(self, path: str) -> TrialDataset:
        """
        Load a long-format CSV with the pipeline's schema, direction and baseline settings.
        """
        return parse_long_csv(
            path,
            schema=self.schema,
            direction=self.direction,
            baseline=self.baseline,
            drop_incomplete=self.drop_incomplete,
        )

    def _dataset(self, data: Union[str, TrialDataset]) -> TrialDataset:
        if isinstance(data, str):
            if not os.path.exists(data):
                raise FileNotFoundError(f"Input file not found: {data}")
            return self.load(data)
        return data

    def __call__(self, data: Union[str, TrialDataset]) -> TestResult:
        """
        Run the test on a dataset or a CSV path.

        Examples:
            >>> test = LongitudinalRankSumTest(weights="last-visit")
            >>> result = test("trial.csv")
            >>> result.z, result.p_value
        """
        data = self._dataset(data)
        weights = WeightVector.parse(self.weights, data.n_visits)
        result = lrst(data, weights)
        logger.info(f"Z={result.z:.4f}, one-sided p={result.p_value:.4g}, theta_bar={result.theta_bar:.4f}")
        return result

    def permutation(
        self, data: Union[str, TrialDataset], n_perm: int = 1000, seed: int = 0, threads: int = 1
    ) -> PermutationNull:
        data = self._dataset(data)
        weights = WeightVector.parse(self.weights, data.n_visits)
        return permutation_null(data, weights, n_perm=n_perm, seed=seed, threads=threads, progress=True)
