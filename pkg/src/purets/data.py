"""Series loading, chronological splits, normalization and window sampling."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, ParseError
from .tensor import DTYPE, RandomSource

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class CsvSchema:
    """Layout of a comma-separated series file.

    The first row is always a header.  ``has_date`` means the first column is a
    timestamp that is kept as text and excluded from the values.
    ``value_columns`` selects columns by header name (default: all remaining).
    """

    has_date: bool = True
    value_columns: tuple[str, ...] | None = None
    n_features: int | None = None


@dataclass(frozen=True)
class SplitPolicy:
    """How a series is cut into train/val/test.

    ``kind="ratio"`` divides the rows proportionally to ``parts``.
    ``kind="months"`` uses whole months of ``rows_per_month`` rows each (a month
    is 30 days), leaving any rows past the last month unused.
    """

    kind: str
    parts: tuple[int, int, int]
    rows_per_month: int | None = None

    def bounds(self, n_rows: int) -> tuple[int, int, int]:
        a, b, c = self.parts
        if self.kind == "ratio":
            total = a + b + c
            return n_rows * a // total, n_rows * (a + b) // total, n_rows
        if self.kind == "months":
            m = self.rows_per_month
            return a * m, (a + b) * m, min(n_rows, (a + b + c) * m)
        raise ValueError(f"unknown split policy kind {self.kind!r}")

    def __str__(self):
        parts = "/".join(map(str, self.parts))
        return parts if self.kind == "ratio" else f"{parts}@{self.rows_per_month}"


def months_policy(train, val, test, granularity_minutes: int) -> SplitPolicy:
    rows_per_month = 30 * 24 * 60 // granularity_minutes
    return SplitPolicy("months", (train, val, test), rows_per_month)


NAMED_POLICIES = {
    "ett-hourly": months_policy(12, 4, 4, 60),
    "ett-15min": months_policy(12, 4, 4, 15),
    "weather": months_policy(28, 10, 10, 60),
    "7/1/2": SplitPolicy("ratio", (7, 1, 2)),
    "6/2/2": SplitPolicy("ratio", (6, 2, 2)),
}


def parse_policy(text: str | SplitPolicy) -> SplitPolicy:
    """Accepts a named policy, ``"a/b/c"`` (ratio) or ``"a/b/c@rows_per_month"``."""
    if isinstance(text, SplitPolicy):
        return text
    if text in NAMED_POLICIES:
        return NAMED_POLICIES[text]
    spec, _, rpm = text.partition("@")
    try:
        parts = tuple(int(p) for p in spec.split("/"))
        if len(parts) != 3 or min(parts) < 0 or parts[0] == 0:
            raise ValueError
        if rpm:
            return SplitPolicy("months", parts, int(rpm))
        return SplitPolicy("ratio", parts)
    except ValueError:
        raise ValueError(f"cannot parse split policy {text!r}") from None


@dataclass
class SeriesDataset:
    name: str
    values: np.ndarray  # raw (time, n_features)
    timestamps: list[str] | None = None
    columns: list[str] | None = None
    channel_means: np.ndarray | None = None
    channel_stds: np.ndarray | None = None
    split_bounds: tuple[int, int] | None = None
    test_end: int | None = None
    normalized: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def is_split(self) -> bool:
        return self.split_bounds is not None

    def split_range(self, split: str) -> tuple[int, int]:
        if not self.is_split:
            raise DataError(f"dataset {self.name!r} has not been split")
        train_end, val_end = self.split_bounds
        ranges = {"train": (0, train_end), "val": (train_end, val_end), "test": (val_end, self.test_end)}
        if split not in ranges:
            raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
        return ranges[split]

    def split(self, split: str, normalized: bool = True) -> np.ndarray:
        lo, hi = self.split_range(split)
        src = self.normalized if normalized else self.values
        return src[lo:hi]

    def normalize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=DTYPE) - self.channel_means) / self.channel_stds

    def denormalize(self, z) -> np.ndarray:
        return np.asarray(z, dtype=DTYPE) * self.channel_stds + self.channel_means


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r} at row {row}, column {col}") from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite cell {cell!r} at row {row}, column {col}")
    return v


def load_csv(path, schema: CsvSchema = CsvSchema(), name: str | None = None) -> SeriesDataset:
    """Read a header-first CSV into an unnormalized :class:`SeriesDataset`.

    Row numbers in error messages are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        first = 1 if schema.has_date else 0
        if schema.value_columns is None:
            cols = list(range(first, len(header)))
        else:
            missing = [c for c in schema.value_columns if c not in header]
            if missing:
                raise ParseError(f"{path}: columns not in header: {missing}")
            cols = [header.index(c) for c in schema.value_columns]
        if not cols:
            raise ParseError(f"{path}: no value columns")

        rows, stamps = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}: row {lineno} has {len(rec)} fields, header has {len(header)}")
            rows.append([_parse_float(rec[c], lineno, c + 1) for c in cols])
            if schema.has_date:
                stamps.append(rec[0])
    if not rows:
        raise ParseError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=DTYPE)
    if schema.n_features is not None and values.shape[1] != schema.n_features:
        raise ParseError(f"{path}: expected {schema.n_features} features, found {values.shape[1]}")
    return SeriesDataset(
        name=name or path.stem,
        values=values,
        timestamps=stamps if schema.has_date else None,
        columns=[header[c] for c in cols],
    )


def split_and_normalize(ds: SeriesDataset, policy, min_rows: int = 1) -> SeriesDataset:
    """Attach split bounds and z-score every channel with train-split statistics.

    Zero-variance channels get sigma = 1 (so they normalize to zeros) and a
    warning is logged.  Each split must have at least ``min_rows`` rows.
    """
    policy = parse_policy(policy)
    train_end, val_end, test_end = policy.bounds(ds.n_steps)
    for split, (lo, hi) in zip(SPLITS, [(0, train_end), (train_end, val_end), (val_end, test_end)]):
        if hi - lo < min_rows or hi > ds.n_steps:
            raise DataError(
                f"{ds.name}: {split} split [{lo}, {hi}) under policy {policy} is too small "
                f"(need {min_rows} rows, series has {ds.n_steps})"
            )
    train = ds.values[:train_end]
    means = train.mean(axis=0)
    stds = train.std(axis=0)
    flat = stds == 0
    if flat.any():
        log.warning("%s: zero-variance channels %s; using std=1", ds.name, np.flatnonzero(flat).tolist())
        stds = np.where(flat, 1.0, stds)
    return replace(
        ds,
        channel_means=means,
        channel_stds=stds,
        split_bounds=(train_end, val_end),
        test_end=test_end,
        normalized=(ds.values - means) / stds,
    )


@dataclass
class WindowBatch:
    inputs: np.ndarray  # (B, T, N)
    targets: np.ndarray  # (B, T', N)

    def __len__(self):
        return self.inputs.shape[0]


@dataclass
class Windows:
    """All (input, target) windows of one split, materialized lazily.

    ``offset`` is the index of the split's first row in the full series, so
    ``offset + starts[i]`` is the global index of window ``i``'s first row.
    """

    source: np.ndarray
    window: int
    horizon: int
    starts: np.ndarray
    offset: int = 0
    _view: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # (n_positions, N, T + T') view over the split, no copy
        self._view = sliding_window_view(self.source, self.window + self.horizon, axis=0)

    def __len__(self):
        return len(self.starts)

    def take(self, idx) -> WindowBatch:
        block = self._view[self.starts[np.asarray(idx)]].transpose(0, 2, 1)
        return WindowBatch(
            np.ascontiguousarray(block[:, : self.window]),
            np.ascontiguousarray(block[:, self.window :]),
        )

    def all(self) -> WindowBatch:
        return self.take(np.arange(len(self)))

    def iter_batches(self, batch_size: int, rng: RandomSource | None = None) -> Iterator[WindowBatch]:
        """Mini-batches in order, or shuffled by ``rng`` when given."""
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for i in range(0, len(order), batch_size):
            yield self.take(order[i : i + batch_size])

    def __iter__(self) -> Iterator[WindowBatch]:
        return self.iter_batches(1)


def make_windows(ds: SeriesDataset, split: str, window: int, horizon: int, stride: int = 1,
                 normalized: bool = True) -> Windows:
    """Every window fully inside ``split``: inputs ``[s, s+T)``, targets ``[s+T, s+T+T')``."""
    if window < 1 or horizon < 1 or stride < 1:
        raise ValueError("window, horizon and stride must be >= 1")
    rows = ds.split(split, normalized=normalized)
    n = rows.shape[0]
    if window + horizon > n:
        raise DataError(
            f"{ds.name}: {split} split has {n} rows, fewer than window + horizon = {window + horizon}"
        )
    starts = np.arange(0, n - window - horizon + 1, stride)
    return Windows(rows, window, horizon, starts, offset=ds.split_range(split)[0])


@dataclass(frozen=True)
class SineSpec:
    n_points: int = 4000
    step: float = 2 * math.pi / 64
    amplitude: float = 1.0
    phase: float = 0.0
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def generate_sine(spec: SineSpec) -> SeriesDataset:
    """Single-channel ``amplitude * sin(phase + i * step)`` plus optional Gaussian noise."""
    i = np.arange(spec.n_points, dtype=DTYPE)
    x = spec.amplitude * np.sin(spec.phase + i * spec.step)
    if spec.noise_std > 0:
        x = x + RandomSource(spec.seed).normal(0.0, spec.noise_std, size=spec.n_points)
    return SeriesDataset(name="sine", values=x[:, None], columns=["sin"])


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    path: str
    schema: CsvSchema
    policy: str
    granularity: str


_BUILTIN = {
    # name: (n_features, policy, granularity)
    "ETTh1": (7, "ett-hourly", "1h"),
    "ETTh2": (7, "ett-hourly", "1h"),
    "ETTm1": (7, "ett-15min", "15min"),
    "Weather": (None, "weather", "1h"),
    "Electricity": (321, "7/1/2", "1h"),
    "Exchange-Rate": (8, "6/2/2", "1d"),
    "Solar-Energy": (137, "6/2/2", "10min"),
    "Traffic": (862, "6/2/2", "1h"),
}


def load_registry(registry_file=None, data_dir=None) -> dict[str, DatasetEntry]:
    """Dataset name -> entry.

    Built-in entries point at ``<data_dir>/<name>.csv`` (``data_dir`` defaults
    to ``$PURETS_DATA_DIR`` or ``./data``).  A JSON registry file may add or
    override entries::

        {"mydata": {"path": "x.csv", "policy": "6/2/2", "granularity": "1h",
                    "has_date": true, "n_features": 3}}
    """
    data_dir = Path(data_dir or os.environ.get("PURETS_DATA_DIR", "data"))
    reg = {
        name: DatasetEntry(name, str(data_dir / f"{name}.csv"), CsvSchema(True, None, nf), pol, gran)
        for name, (nf, pol, gran) in _BUILTIN.items()
    }
    if registry_file is not None:
        registry_file = Path(registry_file)
        raw = json.loads(registry_file.read_text())
        for name, e in raw.items():
            path = Path(e["path"])
            if not path.is_absolute():
                path = registry_file.parent / path
            cols = e.get("value_columns")
            schema = CsvSchema(e.get("has_date", True), tuple(cols) if cols else None, e.get("n_features"))
            reg[name] = DatasetEntry(name, str(path), schema, e.get("policy", "7/1/2"), e.get("granularity", ""))
    return reg


def load_dataset(entry: DatasetEntry) -> SeriesDataset:
    """Load and split/normalize a registry entry."""
    return split_and_normalize(load_csv(entry.path, entry.schema, entry.name), entry.policy)
