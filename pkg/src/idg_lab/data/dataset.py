"""Embedding datasets: rows of (domain, label, split, features) and their CSV form."""

import logging
import re
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from idg_lab.utils.arrays import FloatArray, IntArray
from idg_lab.utils.error_handler import DatasetFormatError, MissingArtifactError
from idg_lab.utils.output import write_table

logger = logging.getLogger("idg_lab.data")

ID_COLUMNS = ["domain", "label", "split"]
FEATURE_PATTERN = re.compile(r"^f(\d+)$")
PARSER_LINE = re.compile(r"line (\d+)")


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"


class EmbeddingDataset(BaseModel):
    """Feature matrix with per-row domain id, label id and split tag."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    features: FloatArray
    domains: IntArray
    labels: IntArray
    splits: list[Split]

    @model_validator(mode="after")
    def _check_rows(self) -> "EmbeddingDataset":
        if self.features.ndim != 2:
            raise ValueError(f"features must be a matrix, got shape {self.features.shape}")
        n = self.features.shape[0]
        if self.domains.shape != (n,) or self.labels.shape != (n,) or len(self.splits) != n:
            raise ValueError("domains, labels, splits and features disagree on the row count")
        if n and (self.domains.min() < 0 or self.labels.min() < 0):
            raise ValueError("domain and label ids must be nonnegative")
        return self

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def width(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_domains(self) -> int:
        return int(self.domains.max()) + 1 if len(self) else 0

    @property
    def n_labels(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0

    def split_mask(self, split: Split) -> np.ndarray:
        return np.array([s is split for s in self.splits], dtype=bool)

    def mask(self, domains: list[int] | None = None, split: Split | None = None) -> np.ndarray:
        keep = np.ones(len(self), dtype=bool)
        if domains is not None:
            keep &= np.isin(self.domains, domains)
        if split is not None:
            keep &= self.split_mask(split)
        return keep

    def take(self, rows: np.ndarray) -> "EmbeddingDataset":
        """Rows selected by a boolean mask or an index array."""
        index = np.flatnonzero(rows) if rows.dtype == bool else np.asarray(rows, dtype=np.int64)
        return EmbeddingDataset(
            features=self.features[index],
            domains=self.domains[index],
            labels=self.labels[index],
            splits=[self.splits[i] for i in index],
        )

    def subset(self, domains: list[int] | None = None, split: Split | None = None) -> "EmbeddingDataset":
        """Rows in ``domains`` (all if None) with tag ``split`` (any if None); ids are kept."""
        return self.take(self.mask(domains, split))

    def with_features(self, features: np.ndarray) -> "EmbeddingDataset":
        return EmbeddingDataset(
            features=features, domains=self.domains, labels=self.labels, splits=self.splits
        )

    def counts(self) -> pd.DataFrame:
        """Row count per (domain, label, split)."""
        frame = pd.DataFrame(
            {"domain": self.domains, "label": self.labels, "split": [s.value for s in self.splits]}
        )
        return frame.groupby(ID_COLUMNS).size().reset_index(name="count")

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=[f"f{i}" for i in range(self.width)])
        frame.insert(0, "split", [s.value for s in self.splits])
        frame.insert(0, "label", self.labels)
        frame.insert(0, "domain", self.domains)
        return frame

    def write_csv(self, path: Path) -> Path:
        return write_table(path, self.to_frame())


def _check_header(columns: list[str]) -> None:
    if columns[:3] != ID_COLUMNS:
        raise DatasetFormatError(
            f"header must start with {','.join(ID_COLUMNS)}, got {','.join(columns[:3])}", line=1
        )
    features = columns[3:]
    if not features:
        raise DatasetFormatError("header has no feature columns", line=1)
    for i, name in enumerate(features):
        match = FEATURE_PATTERN.match(name)
        if match is None or int(match.group(1)) != i:
            raise DatasetFormatError(f"feature column {i} should be named f{i}, got {name!r}", line=1)


def _parse_ids(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | (values != values.round()) | (values < 0)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DatasetFormatError(
            f"{column} must be a nonnegative integer, got {frame[column].iloc[row]!r}", line=row + 2
        )
    return values.to_numpy(dtype=np.int64)


def _check_dense(ids: np.ndarray, what: str) -> None:
    present = np.unique(ids)
    if not np.array_equal(present, np.arange(present.size)):
        raise DatasetFormatError(f"{what} ids must be dense from 0, found {present.tolist()}")


def ingest_csv(path: Path) -> EmbeddingDataset:
    """Read and validate an embedding CSV (``domain,label,split,f0..fk``).

    Raises:
        MissingArtifactError: If the file does not exist
        DatasetFormatError: On an empty file, bad header, ragged row,
            non-numeric value, negative id or unknown split tag
    """
    if not path.exists():
        raise MissingArtifactError(f"Dataset not found: {path}")
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_values=[],
            skip_blank_lines=False,
            engine="python",
        )
    except pd.errors.EmptyDataError as e:
        raise DatasetFormatError("file is empty") from e
    except pd.errors.ParserError as e:
        match = PARSER_LINE.search(str(e))
        raise DatasetFormatError(
            f"ragged row: {e}", line=int(match.group(1)) if match else None
        ) from e

    _check_header(list(frame.columns))
    if frame.empty:
        raise DatasetFormatError("file has a header but no rows")
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        raise DatasetFormatError("ragged row: too few fields", line=int(np.flatnonzero(short)[0]) + 2)

    domains = _parse_ids(frame, "domain")
    labels = _parse_ids(frame, "label")
    tags = frame["split"].str.strip()
    unknown = ~tags.isin([s.value for s in Split])
    if unknown.any():
        row = int(np.flatnonzero(unknown.to_numpy())[0])
        raise DatasetFormatError(f"unknown split tag {tags.iloc[row]!r}", line=row + 2)

    feature_frame = frame.iloc[:, 3:].apply(pd.to_numeric, errors="coerce")
    bad = feature_frame.isna().any(axis=1).to_numpy()
    if bad.any():
        raise DatasetFormatError("non-numeric feature value", line=int(np.flatnonzero(bad)[0]) + 2)

    _check_dense(domains, "domain")
    _check_dense(labels, "label")
    dataset = EmbeddingDataset(
        features=feature_frame.to_numpy(dtype=np.float64),
        domains=domains,
        labels=labels,
        splits=[Split(t) for t in tags],
    )
    logger.info(f"Ingested {len(dataset)} rows of width {dataset.width} from {path}")
    return dataset
