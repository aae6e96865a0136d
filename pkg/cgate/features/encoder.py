"""
Schema-driven encoding of feature bags into dense vectors.

Categoricals are target encoded with additive smoothing towards the global prior.
Training matrices use out-of-fold statistics so a row never sees its own label;
the stored deployment encoding uses all training rows. Scalars are mapped to [0, 1]
through a piecewise-linear empirical CDF with 64 quantile levels.
"""

from collections import defaultdict
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr, model_validator
from sklearn.model_selection import KFold

from ..events.types import FeatureBag
from ..exceptions import LeakageError, SchemaMismatchError
from ..logging import logger
from .schema import FeatureEntry, FeatureSchema, View

QUANTILE_LEVELS = 64
DEFAULT_FOLDS = 5
DEFAULT_SMOOTHING = 10.0
IMPUTED_VALUE = 0.5
MISSING = float("nan")


class ScalarGrid(BaseModel):
    """Strictly increasing cut points and the CDF level assigned to each."""

    model_config = ConfigDict(frozen=True)

    cuts: list[float]
    levels: list[float]

    _xp: np.ndarray = PrivateAttr()
    _fp: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check_grid(self) -> "ScalarGrid":
        if len(self.cuts) != len(self.levels):
            raise ValueError("cuts and levels differ in length")
        if any(b <= a for a, b in zip(self.cuts, self.cuts[1:], strict=False)):
            raise ValueError("quantile cuts must be strictly increasing")
        return self

    def model_post_init(self, __context) -> None:
        self._xp = np.asarray(self.cuts, dtype=np.float64)
        self._fp = np.asarray(self.levels, dtype=np.float64)

    def map(self, value: float) -> float:
        """CDF level of ``value``; NaN when the grid saw no values."""
        if not self.cuts:
            return MISSING
        return float(np.interp(value, self._xp, self._fp))

    def map_many(self, values: np.ndarray) -> np.ndarray:
        if not self.cuts:
            return np.full(values.shape, MISSING)
        return np.interp(values, self._xp, self._fp)

    @classmethod
    def fit(cls, values: np.ndarray) -> "ScalarGrid":
        if values.size == 0:
            return cls(cuts=[], levels=[])
        levels = np.linspace(0.0, 1.0, QUANTILE_LEVELS)
        raw = np.quantile(values, levels)
        cuts, inverse = np.unique(raw, return_inverse=True)
        # tied quantiles collapse onto one cut carrying their mean level
        merged = np.bincount(inverse, weights=levels) / np.bincount(inverse)
        return cls(cuts=cuts.tolist(), levels=merged.tolist())


class EncoderState(BaseModel):
    """Fitted encoding state; embedded in every model artifact."""

    model_config = ConfigDict(frozen=True)

    feature_schema: FeatureSchema
    schema_hash: str
    split: str = "train"
    folds: int = DEFAULT_FOLDS
    seed: int = 0
    smoothing: float = DEFAULT_SMOOTHING
    prior: float
    categorical: dict[str, dict[str, float]]
    quantiles: dict[str, ScalarGrid]

    @model_validator(mode="after")
    def _check_hash(self) -> "EncoderState":
        if self.feature_schema.schema_hash() != self.schema_hash:
            raise ValueError("schema_hash does not match the embedded schema")
        return self

    def view_size(self, view: View) -> int:
        return len(self.feature_schema.view_entries(view))

    def check_schema(self, schema_hash: str | None) -> None:
        if schema_hash is not None and schema_hash != self.schema_hash:
            raise SchemaMismatchError(f"encoder was fitted on schema {self.schema_hash}, data uses {schema_hash}")

    def encode_category(self, name: str, value: str) -> float:
        return self.categorical.get(name, {}).get(value, self.prior)


def _smoothed(positives: float, count: float, prior: float, smoothing: float) -> float:
    return (positives + prior * smoothing) / (count + smoothing)


def _category_stats(values: Sequence[str | None], labels: np.ndarray, rows) -> tuple[dict, dict]:
    positives: dict[str, float] = defaultdict(float)
    counts: dict[str, int] = defaultdict(int)
    for i in rows:
        value = values[i]
        if value is None:
            continue
        counts[value] += 1
        positives[value] += float(labels[i])
    return positives, counts


def fit_encoder(
    bags: Sequence[FeatureBag],
    labels: Sequence[int] | np.ndarray,
    schema: FeatureSchema,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    smoothing: float = DEFAULT_SMOOTHING,
    split: str = "train",
) -> EncoderState:
    """Fit target encodings and quantile grids for every schema entry.

    Raises:
        LeakageError: if the rows come from a test-tagged split.
        ValueError: if there are fewer rows than folds or fewer than two folds.
    """
    if split == "test":
        raise LeakageError("refusing to fit the encoder on a test-tagged split")
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if len(bags) < folds:
        raise ValueError(f"need at least one record per fold: {len(bags)} records for {folds} folds")
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (len(bags),):
        raise ValueError(f"{len(bags)} records but {y.size} labels")

    prior = float(y.mean())
    categorical: dict[str, dict[str, float]] = {}
    quantiles: dict[str, ScalarGrid] = {}
    every_row = range(len(bags))
    for entry in schema.entries:
        if entry.kind == "categorical":
            values = [bag.categoricals.get(entry.name) for bag in bags]
            positives, counts = _category_stats(values, y, every_row)
            categorical[entry.name] = {
                c: _smoothed(positives[c], counts[c], prior, smoothing) for c in sorted(counts)
            }
        elif entry.kind == "scalar":
            observed = [bag.scalars.get(entry.name) for bag in bags]
            column = np.array([v for v in observed if v is not None], dtype=np.float64)
            quantiles[entry.name] = ScalarGrid.fit(column[~np.isnan(column)])

    logger.debug(f"Fitted encoder on {len(bags)} records: {len(categorical)} categoricals, {len(quantiles)} scalars")
    return EncoderState(
        feature_schema=schema,
        schema_hash=schema.schema_hash(),
        split=split,
        folds=folds,
        seed=seed,
        smoothing=smoothing,
        prior=prior,
        categorical=categorical,
        quantiles=quantiles,
    )


def _encode_one(entry: FeatureEntry, bag: FeatureBag, state: EncoderState, missing: float) -> float:
    if entry.kind == "scalar":
        value = bag.scalars.get(entry.name)
        if value is None or value != value:
            return missing
        mapped = state.quantiles[entry.name].map(value)
        return missing if mapped != mapped else mapped
    if entry.kind == "categorical":
        category = bag.categoricals.get(entry.name)
        if category is None:
            return missing
        return state.encode_category(entry.name, category)
    flag = bag.flags.get(entry.name)
    if flag is None:
        return missing
    return 1.0 if flag else 0.0


def transform(
    bag: FeatureBag,
    state: EncoderState,
    view: View = "trigger",
    impute: bool = False,
    schema_hash: str | None = None,
) -> np.ndarray:
    """Encode one bag in schema order for the given view.

    Missing values become NaN for the boosting path, or 0.5 when ``impute`` is set.
    Only entries of the view are read from the bag.
    """
    state.check_schema(schema_hash)
    missing = IMPUTED_VALUE if impute else MISSING
    entries = state.feature_schema.view_entries(view)
    return np.array([_encode_one(entry, bag, state, missing) for entry in entries], dtype=np.float64)


def transform_many(
    bags: Sequence[FeatureBag],
    state: EncoderState,
    view: View = "trigger",
    impute: bool = False,
    schema_hash: str | None = None,
) -> np.ndarray:
    """Column-wise equivalent of stacking ``transform`` over ``bags``."""
    state.check_schema(schema_hash)
    missing = IMPUTED_VALUE if impute else MISSING
    entries = state.feature_schema.view_entries(view)
    matrix = np.empty((len(bags), len(entries)), dtype=np.float64)
    for col, entry in enumerate(entries):
        name = entry.name
        if entry.kind == "scalar":
            raw = np.array(
                [np.nan if (v := bag.scalars.get(name)) is None else v for bag in bags], dtype=np.float64
            )
            absent = np.isnan(raw)
            mapped = state.quantiles[name].map_many(np.where(absent, 0.0, raw))
            matrix[:, col] = np.where(absent | np.isnan(mapped), missing, mapped)
        elif entry.kind == "categorical":
            table = state.categorical.get(name, {})
            matrix[:, col] = [
                missing if (c := bag.categoricals.get(name)) is None else table.get(c, state.prior) for bag in bags
            ]
        else:
            matrix[:, col] = [
                missing if (f := bag.flags.get(name)) is None else (1.0 if f else 0.0) for bag in bags
            ]
    return matrix


def fold_assignment(n: int, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """(fit rows, held-out rows) per fold; deterministic in ``seed``."""
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed % 2**32)
    return list(splitter.split(np.zeros((n, 1))))


def transform_training(
    bags: Sequence[FeatureBag],
    labels: Sequence[int] | np.ndarray,
    state: EncoderState,
    view: View = "trigger",
    impute: bool = False,
) -> np.ndarray:
    """Training matrix for the rows the encoder was fitted on.

    Categorical columns use statistics from the other folds only; every other column
    is identical to ``transform_many``.
    """
    y = np.asarray(labels, dtype=np.float64)
    matrix = transform_many(bags, state, view, impute)
    folds = fold_assignment(len(bags), state.folds, state.seed)
    for col, entry in enumerate(state.feature_schema.view_entries(view)):
        if entry.kind != "categorical":
            continue
        values = [bag.categoricals.get(entry.name) for bag in bags]
        for fit_rows, held_rows in folds:
            positives, counts = _category_stats(values, y, fit_rows)
            for i in held_rows:
                value = values[i]
                if value is not None:
                    matrix[i, col] = _smoothed(positives[value], counts[value], state.prior, state.smoothing)
    return matrix
