"""
Utility functions for working with two-arm longitudinal trial data.

Includes the in-memory ``TrialDataset`` representation, long-format CSV ingestion and serialization,
change-from-baseline computation and outcome direction orientation.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from lrst.errors import (
    ConfigError,
    DegenerateDesignError,
    DuplicateCellError,
    MissingBaselineError,
    MissingCellError,
    NonFiniteValueError,
    SchemaError,
    UnknownArmLabelError,
)

logger = logging.getLogger(__name__)

# how many offending items an error message lists before truncating
MAX_REPORTED = 10
# value tokens read as a missing cell rather than a bad number
MISSING_VALUE_TOKENS = ("", "NA", "N/A", "NaN", "nan", "NULL", "null", "#N/A")


def _preview(items) -> str:
    items = [str(x) for x in items]
    if len(items) > MAX_REPORTED:
        return ", ".join(items[:MAX_REPORTED]) + f", ... ({len(items)} total)"
    return ", ".join(items)


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """
    Complete-case two-arm panel of change-from-baseline values, oriented so that larger is favorable.

    ``arm_x_values`` holds the control arm with shape ``(n_x, T, K)`` and ``arm_y_values`` the treatment
    arm with shape ``(n_y, T, K)``. Arrays are copied and made read-only at construction.
    """

    arm_x_values: np.ndarray
    arm_y_values: np.ndarray
    visit_labels: Tuple[str, ...]
    outcome_labels: Tuple[str, ...]
    subject_ids_x: Optional[Tuple[str, ...]] = None
    subject_ids_y: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        x = _frozen(self.arm_x_values)
        y = _frozen(self.arm_y_values)
        if x.ndim != 3 or y.ndim != 3:
            raise SchemaError(
                f"arm arrays must be 3-dimensional (subject, visit, outcome), got {x.ndim} and {y.ndim}"
            )
        if x.shape[1:] != y.shape[1:]:
            raise SchemaError(f"arms disagree on (visits, outcomes): {x.shape[1:]} vs {y.shape[1:]}")
        visits = tuple(str(v) for v in self.visit_labels)
        outcomes = tuple(str(k) for k in self.outcome_labels)
        if len(visits) != x.shape[1] or len(outcomes) != x.shape[2]:
            raise SchemaError(
                f"{len(visits)} visit labels and {len(outcomes)} outcome labels do not match "
                f"array shape {x.shape[1:]}"
            )
        if len(visits) < 1 or len(outcomes) < 1:
            raise DegenerateDesignError("a trial needs at least one visit and one outcome")
        if len(set(visits)) != len(visits) or len(set(outcomes)) != len(outcomes):
            raise SchemaError("visit and outcome labels must be unique")
        if x.shape[0] < 2 or y.shape[0] < 2:
            raise DegenerateDesignError(
                f"each arm needs at least 2 subjects, got n_x={x.shape[0]} and n_y={y.shape[0]}"
            )
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise NonFiniteValueError("trial values must all be finite")
        for name, ids, n in (("subject_ids_x", self.subject_ids_x, x.shape[0]),
                             ("subject_ids_y", self.subject_ids_y, y.shape[0])):
            if ids is not None:
                ids = tuple(str(s) for s in ids)
                if len(ids) != n:
                    raise SchemaError(f"{name} has {len(ids)} entries for {n} subjects")
                object.__setattr__(self, name, ids)

        object.__setattr__(self, "arm_x_values", x)
        object.__setattr__(self, "arm_y_values", y)
        object.__setattr__(self, "visit_labels", visits)
        object.__setattr__(self, "outcome_labels", outcomes)

    @property
    def n_x(self) -> int:
        return self.arm_x_values.shape[0]

    @property
    def n_y(self) -> int:
        return self.arm_y_values.shape[0]

    @property
    def n_total(self) -> int:
        return self.n_x + self.n_y

    @property
    def ratio(self) -> float:
        """lambda = n_x / n_y."""
        return self.n_x / self.n_y

    @property
    def n_visits(self) -> int:
        return self.arm_x_values.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.arm_x_values.shape[2]

    def pooled(self) -> np.ndarray:
        """Stack both arms as ``(N, T, K)``, control subjects first."""
        return np.concatenate([self.arm_x_values, self.arm_y_values], axis=0)

    def swap_arms(self) -> "TrialDataset":
        return TrialDataset(
            arm_x_values=self.arm_y_values,
            arm_y_values=self.arm_x_values,
            visit_labels=self.visit_labels,
            outcome_labels=self.outcome_labels,
            subject_ids_x=self.subject_ids_y,
            subject_ids_y=self.subject_ids_x,
        )

    def truncate_visits(self, indices: Sequence[int]) -> "TrialDataset":
        indices = list(indices)
        return TrialDataset(
            arm_x_values=self.arm_x_values[:, indices, :],
            arm_y_values=self.arm_y_values[:, indices, :],
            visit_labels=[self.visit_labels[i] for i in indices],
            outcome_labels=self.outcome_labels,
            subject_ids_x=self.subject_ids_x,
            subject_ids_y=self.subject_ids_y,
        )

    def with_values(self, arm_x_values, arm_y_values) -> "TrialDataset":
        """Same design and labels, new values."""
        return TrialDataset(
            arm_x_values=arm_x_values,
            arm_y_values=arm_y_values,
            visit_labels=self.visit_labels,
            outcome_labels=self.outcome_labels,
            subject_ids_x=self.subject_ids_x,
            subject_ids_y=self.subject_ids_y,
        )


@dataclass(frozen=True)
class DirectionMap:
    """
    Per-outcome sign; +1 means larger raw values are clinically favorable. Outcomes that are not listed
    default to +1.
    """

    signs: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for outcome, sign in self.signs.items():
            if sign not in (1, -1):
                raise ConfigError(f"direction for outcome '{outcome}' must be +1 or -1, got {sign}")

    @classmethod
    def parse(cls, text: Optional[str]) -> "DirectionMap":
        """Parse ``"ADAS-cog11=-1,DAD=+1"``."""
        if not text:
            return cls()
        signs = {}
        for item in text.split(","):
            if not item.strip():
                continue
            if "=" not in item:
                raise ConfigError(f"direction entry '{item}' is not of the form outcome=+1|-1")
            outcome, sign = item.rsplit("=", 1)
            try:
                signs[outcome.strip()] = int(sign.strip())
            except ValueError:
                raise ConfigError(f"direction entry '{item}' has a non-integer sign")
        return cls(signs)

    def resolve(self, outcome_labels: Sequence[str]) -> np.ndarray:
        unknown = set(self.signs) - set(outcome_labels)
        if unknown:
            raise SchemaError(
                f"direction given for unknown outcome(s): {_preview(sorted(unknown))}; "
                f"outcomes in data: {_preview(outcome_labels)}"
            )
        return np.array([self.signs.get(k, 1) for k in outcome_labels], dtype=float)


@dataclass(frozen=True)
class ColumnSchema:
    subject: str = "subject"
    arm: str = "arm"
    visit: str = "visit"
    outcome: str = "outcome"
    value: str = "value"
    control_label: str = "control"
    treatment_label: str = "treatment"

    @classmethod
    def parse(cls, text: Optional[str], **overrides) -> "ColumnSchema":
        """Parse ``"subject=ID,arm=GROUP"``; unlisted columns keep their default names."""
        columns = {}
        if text:
            known = {"subject", "arm", "visit", "outcome", "value"}
            for item in text.split(","):
                if not item.strip():
                    continue
                if "=" not in item:
                    raise ConfigError(f"schema entry '{item}' is not of the form role=column")
                role, column = (s.strip() for s in item.split("=", 1))
                if role not in known:
                    raise ConfigError(f"unknown schema role '{role}', expected one of {sorted(known)}")
                columns[role] = column
        columns.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**columns)

    @property
    def columns(self) -> List[str]:
        return [self.subject, self.arm, self.visit, self.outcome, self.value]


def _sort_labels(labels) -> List[str]:
    numeric = pd.to_numeric(pd.Series(labels), errors="coerce")
    if numeric.notna().all():
        order = np.argsort(numeric.to_numpy(), kind="stable")
        return [labels[i] for i in order]
    return sorted(labels)


def changes_from_baseline(
    raw_x,
    raw_y,
    visit_labels: Sequence,
    outcome_labels: Sequence,
    direction: Optional[DirectionMap] = None,
    subject_ids_x: Optional[Sequence] = None,
    subject_ids_y: Optional[Sequence] = None,
) -> TrialDataset:
    """
    Convert raw scores over visits ``0..T`` (visit 0 is baseline) into oriented changes from baseline.

    Args:
        raw_x: Control-arm raw scores with shape ``(n_x, T + 1, K)``.
        raw_y: Treatment-arm raw scores with shape ``(n_y, T + 1, K)``.
        visit_labels: ``T + 1`` labels, baseline first.
        outcome_labels: ``K`` outcome names.
        direction: Sign per outcome, applied after differencing.

    Returns:
        TrialDataset over the ``T`` post-baseline visits.
    """
    raw_x = np.asarray(raw_x, dtype=float)
    raw_y = np.asarray(raw_y, dtype=float)
    if raw_x.ndim != 3 or raw_y.ndim != 3:
        raise SchemaError("raw score arrays must be 3-dimensional (subject, visit, outcome)")
    if raw_x.shape[1] < 2 or len(visit_labels) < 2:
        raise MissingBaselineError("raw scores need a baseline visit plus at least one post-baseline visit")
    for arm, raw in (("control", raw_x), ("treatment", raw_y)):
        missing = np.flatnonzero(~np.isfinite(raw[:, 0, :]).all(axis=1))
        if missing.size:
            raise MissingBaselineError(f"{arm} subjects at rows {_preview(missing)} lack a finite baseline")

    signs = (direction or DirectionMap()).resolve([str(k) for k in outcome_labels])
    changes_x = (raw_x[:, 1:, :] - raw_x[:, :1, :]) * signs
    changes_y = (raw_y[:, 1:, :] - raw_y[:, :1, :]) * signs
    return TrialDataset(
        arm_x_values=changes_x,
        arm_y_values=changes_y,
        visit_labels=list(visit_labels)[1:],
        outcome_labels=outcome_labels,
        subject_ids_x=subject_ids_x,
        subject_ids_y=subject_ids_y,
    )


def parse_long_csv(
    path: str,
    schema: Optional[ColumnSchema] = None,
    direction: Optional[DirectionMap] = None,
    baseline: Optional[str] = None,
    drop_incomplete: bool = False,
) -> TrialDataset:
    """
    Read a long-format CSV (one row per subject, visit and outcome) into an oriented TrialDataset.

    Args:
        path: CSV file with a header row.
        schema: Column names and arm labels; defaults to ``subject,arm,visit,outcome,value`` with arms
            ``control``/``treatment``.
        direction: Sign per outcome; values are multiplied by it exactly once.
        baseline: If given, the file holds raw scores and this visit label is the baseline; changes from
            baseline are computed and the baseline visit is removed.
        drop_incomplete: Drop subjects with missing cells (logged) instead of raising MissingCellError. Blank
            and NA values count as missing cells.

    Returns:
        TrialDataset with visits sorted ascending.
    """
    schema = schema or ColumnSchema()
    direction = direction or DirectionMap()
    if not os.path.exists(path):
        raise FileNotFoundError(f"Input file not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: file is empty; expected a header row with columns {list(schema.columns)}")
    except pd.errors.ParserError as e:
        raise SchemaError(f"{path}: malformed CSV: {str(e).strip()}")
    except UnicodeDecodeError as e:
        raise SchemaError(f"{path}: not a UTF-8 text file ({e.reason} at byte {e.start})")
    frame.columns = [c.strip() for c in frame.columns]
    missing_columns = [c for c in schema.columns if c not in frame.columns]
    if missing_columns:
        raise SchemaError(
            f"{path}: missing column(s) {missing_columns}; available columns: {list(frame.columns)}"
        )
    frame = frame[schema.columns].apply(lambda column: column.str.strip())
    # header is line 1
    line_numbers = frame.index.to_numpy() + 2

    arm_codes = {schema.control_label: "x", schema.treatment_label: "y"}
    unknown = ~frame[schema.arm].isin(list(arm_codes))
    if unknown.any():
        labels = sorted(frame.loc[unknown, schema.arm].unique())
        raise UnknownArmLabelError(
            f"unknown arm label(s) {labels} at line(s) {_preview(line_numbers[unknown.to_numpy()])}; "
            f"expected '{schema.control_label}' or '{schema.treatment_label}'"
        )

    raw_values = frame[schema.value]
    blank = (raw_values.isna() | raw_values.isin(MISSING_VALUE_TOKENS)).to_numpy()
    values = pd.to_numeric(raw_values.mask(blank), errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values) & ~blank
    if bad.any():
        raise NonFiniteValueError(f"non-finite or non-numeric value(s) at line(s) {_preview(line_numbers[bad])}")
    if blank.any():
        logger.info(
            f"{int(blank.sum())} blank or NA value(s) at line(s) {_preview(line_numbers[blank])} count as missing cells"
        )
    frame = frame.assign(**{schema.value: values})

    arms_per_subject = frame.groupby(schema.subject, sort=False)[schema.arm].nunique()
    switched = arms_per_subject.index[arms_per_subject > 1]
    if len(switched):
        raise UnknownArmLabelError(f"subject(s) assigned to both arms: {_preview(switched)}")

    keys = [schema.subject, schema.visit, schema.outcome]
    duplicated = frame.duplicated(keys, keep=False).to_numpy()
    if duplicated.any():
        raise DuplicateCellError(
            f"duplicate (subject, visit, outcome) cell(s) at line(s) {_preview(line_numbers[duplicated])}"
        )

    subjects = list(pd.unique(frame[schema.subject]))
    visits = _sort_labels(list(pd.unique(frame[schema.visit])))
    outcomes = list(pd.unique(frame[schema.outcome]))
    if baseline is not None:
        baseline = str(baseline)
        if baseline not in visits:
            raise MissingBaselineError(f"baseline visit '{baseline}' does not occur in {path}")
        visits = [baseline] + [v for v in visits if v != baseline]

    grid = pd.MultiIndex.from_product([subjects, visits, outcomes], names=keys)
    cube = (
        frame.set_index(keys)[schema.value]
        .reindex(grid)
        .to_numpy(dtype=float)
        .reshape(len(subjects), len(visits), len(outcomes))
    )
    arm_of = frame.groupby(schema.subject, sort=False)[schema.arm].first().map(arm_codes)
    arms = arm_of.reindex(subjects).to_numpy()
    subjects = np.array(subjects, dtype=object)

    incomplete = ~np.isfinite(cube).all(axis=(1, 2))
    if incomplete.any():
        offenders = subjects[incomplete]
        if not drop_incomplete:
            if baseline is not None and (~np.isfinite(cube[:, 0, :])).any():
                no_base = subjects[~np.isfinite(cube[:, 0, :]).all(axis=1)]
                raise MissingBaselineError(f"subject(s) without baseline visit '{baseline}': {_preview(no_base)}")
            raise MissingCellError(
                f"{len(offenders)} subject(s) lack at least one visit x outcome cell: {_preview(offenders)}",
                subjects=offenders,
            )
        logger.warning(f"Dropping {len(offenders)} incomplete subject(s) (listwise deletion)")
        cube, arms, subjects = cube[~incomplete], arms[~incomplete], subjects[~incomplete]

    in_x, in_y = arms == "x", arms == "y"
    if in_x.sum() < 2 or in_y.sum() < 2:
        raise DegenerateDesignError(
            f"each arm needs at least 2 complete subjects, got n_x={int(in_x.sum())} and n_y={int(in_y.sum())}"
        )

    if baseline is not None:
        data = changes_from_baseline(
            cube[in_x], cube[in_y], visits, outcomes, direction,
            subject_ids_x=subjects[in_x], subject_ids_y=subjects[in_y],
        )
    else:
        signs = direction.resolve(outcomes)
        data = TrialDataset(
            arm_x_values=cube[in_x] * signs,
            arm_y_values=cube[in_y] * signs,
            visit_labels=visits,
            outcome_labels=outcomes,
            subject_ids_x=subjects[in_x],
            subject_ids_y=subjects[in_y],
        )
    logger.info(
        f"Loaded {path}: n_x={data.n_x}, n_y={data.n_y}, T={data.n_visits} visits, K={data.n_outcomes} outcomes"
    )
    return data


def write_long_csv(data: TrialDataset, path: str, schema: Optional[ColumnSchema] = None) -> str:
    """Write the (already oriented) dataset as long-format CSV; re-parsing with +1 directions is lossless."""
    schema = schema or ColumnSchema()
    ids_x = data.subject_ids_x or tuple(f"x{i + 1:04d}" for i in range(data.n_x))
    ids_y = data.subject_ids_y or tuple(f"y{j + 1:04d}" for j in range(data.n_y))

    records: Dict[str, list] = {c: [] for c in schema.columns}
    for ids, label, values in ((ids_x, schema.control_label, data.arm_x_values),
                               (ids_y, schema.treatment_label, data.arm_y_values)):
        n, n_visits, n_outcomes = values.shape
        records[schema.subject].extend(np.repeat(ids, n_visits * n_outcomes))
        records[schema.arm].extend([label] * values.size)
        records[schema.visit].extend(np.tile(np.repeat(data.visit_labels, n_outcomes), n))
        records[schema.outcome].extend(np.tile(data.outcome_labels, n * n_visits))
        records[schema.value].extend(values.reshape(-1))

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    pd.DataFrame(records).to_csv(path, index=False, float_format="%.17g")
    return path
