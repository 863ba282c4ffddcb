"""Dataset ingestion: CSV loading, categorical removal, min-max scaling, splits.

The schema sidecar (JSON) names the label column, columns to drop as
categorical, and an optional label transform, e.g. binarizing a quality score
at a threshold:

    {"name": "wine", "label_column": "quality",
     "label_transform": {"kind": "binarize_ge", "threshold": 7},
     "categorical_columns": ["color"], "csv_path": "wine.csv"}

Scaler statistics always come from the training split only; test rows may
fall slightly outside [0, 1] and are not clipped.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class LoadSummary:
    n_rows_read: int = 0
    n_rows_kept: int = 0
    n_dropped_missing: int = 0
    rejected_rows: list[tuple[int, str]] = field(default_factory=list)


@dataclass
class Dataset:
    """An immutable numeric table: features, integer labels, column names."""

    name: str
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, idx) -> "Dataset":
        return Dataset(
            name=self.name,
            features=self.features[idx],
            labels=self.labels[idx],
            feature_names=self.feature_names,
        )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


class MinMaxScaler:
    """Per-feature (x - min) / (max - min) scaler, fit on the training split."""

    def __init__(self):
        self.mins: np.ndarray | None = None
        self.maxs: np.ndarray | None = None

    def fit(self, rows) -> "MinMaxScaler":
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("scaler needs a non-empty 2-D matrix")
        self.mins = rows.min(axis=0)
        self.maxs = rows.max(axis=0)
        degenerate = np.nonzero(self.maxs - self.mins == 0)[0]
        if degenerate.size:
            self.mins = self.maxs = None
            raise ValueError(f"degenerate feature at column {int(degenerate[0])}: min equals max")
        return self

    def _check_fitted(self):
        if self.mins is None:
            raise RuntimeError("scaler used before fit")

    def transform(self, rows) -> np.ndarray:
        self._check_fitted()
        rows = np.asarray(rows, dtype=float)
        return (rows - self.mins) / (self.maxs - self.mins)

    def inverse_transform(self, rows) -> np.ndarray:
        self._check_fitted()
        rows = np.asarray(rows, dtype=float)
        return self.mins + rows * (self.maxs - self.mins)

    def to_json(self) -> dict:
        self._check_fitted()
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "MinMaxScaler":
        scaler = cls()
        scaler.mins = np.asarray(doc["mins"], dtype=float)
        scaler.maxs = np.asarray(doc["maxs"], dtype=float)
        return scaler

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "MinMaxScaler":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def fit_scaler(train_rows) -> MinMaxScaler:
    return MinMaxScaler().fit(train_rows)


def _transform_label(raw: float, transform: dict | None) -> int:
    if transform is None:
        label = int(raw)
        if label != raw:
            raise ValueError(f"label {raw!r} is not an integer class")
        return label
    kind = transform.get("kind")
    if kind == "binarize_ge":
        return int(raw >= float(transform["threshold"]))
    raise ValueError(f"unknown label transform {kind!r}")


def load_csv(
    path,
    label_column: str,
    categorical_columns=(),
    label_transform: dict | None = None,
    name: str | None = None,
) -> tuple[Dataset, LoadSummary]:
    """Load a headered CSV into a numeric Dataset.

    Declared categorical columns are dropped. Rows with missing cells are
    dropped (counted); rows with non-numeric text in a retained column are
    rejected with their row number. A retained column that is constant over
    the kept rows is an error, as is a missing label column or an empty file.
    """
    path = Path(path)
    summary = LoadSummary()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not found")
        drop = set(categorical_columns)
        unknown = drop - set(header)
        if unknown:
            raise ValueError(f"{path}: categorical columns not in header: {sorted(unknown)}")
        label_idx = header.index(label_column)
        feature_idx = [
            i for i, h in enumerate(header) if h != label_column and h not in drop
        ]
        feature_names = tuple(header[i] for i in feature_idx)
        rows: list[list[float]] = []
        labels: list[int] = []
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            summary.n_rows_read += 1
            if len(row) != len(header):
                summary.rejected_rows.append((row_number, "wrong number of fields"))
                continue
            cells = [row[i].strip() for i in feature_idx + [label_idx]]
            if any(c == "" for c in cells):
                summary.n_dropped_missing += 1
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                summary.rejected_rows.append((row_number, "unparseable numeric value"))
                continue
            try:
                labels.append(_transform_label(values[-1], label_transform))
            except ValueError as exc:
                summary.rejected_rows.append((row_number, str(exc)))
                continue
            rows.append(values[:-1])
    if not rows:
        raise ValueError(f"{path}: no usable data rows")
    features = np.asarray(rows, dtype=float)
    label_arr = np.asarray(labels, dtype=int)
    if label_arr.min() < 0:
        raise ValueError(f"{path}: negative class labels")
    constant = np.nonzero(features.max(axis=0) - features.min(axis=0) == 0)[0]
    if constant.size:
        raise ValueError(f"{path}: degenerate feature {feature_names[int(constant[0])]!r} (constant)")
    summary.n_rows_kept = features.shape[0]
    if summary.rejected_rows:
        logger.warning(
            "%s: rejected %d row(s): %s", path, len(summary.rejected_rows),
            ", ".join(f"line {n} ({why})" for n, why in summary.rejected_rows[:10]),
        )
    dataset = Dataset(
        name=name or path.stem,
        features=features,
        labels=label_arr,
        feature_names=feature_names,
    )
    return dataset, summary


def load_schema(path) -> dict:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        schema = json.load(fh)
    for key in ("name", "label_column", "csv_path"):
        if key not in schema:
            raise ValueError(f"{path}: schema missing {key!r}")
    schema.setdefault("categorical_columns", [])
    schema.setdefault("label_transform", None)
    return schema


def load_dataset(schema_path) -> tuple[Dataset, LoadSummary]:
    """Load a dataset as described by its schema sidecar."""
    schema_path = Path(schema_path)
    schema = load_schema(schema_path)
    csv_path = Path(schema["csv_path"])
    if not csv_path.is_absolute():
        csv_path = schema_path.parent / csv_path
    return load_csv(
        csv_path,
        label_column=schema["label_column"],
        categorical_columns=schema["categorical_columns"],
        label_transform=schema["label_transform"],
        name=schema["name"],
    )


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Deterministic train/test split: floor(fraction*N) rows train, rest test."""
    n = dataset.n_rows
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    order = (
        np.random.Generator(np.random.PCG64(spec.seed)).permutation(n)
        if spec.shuffle
        else np.arange(n)
    )
    n_train = int(np.floor(spec.train_fraction * n))
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:])
