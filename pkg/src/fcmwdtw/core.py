"""Domain types: series, windows and validated hyperparameters."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DataFormatError,
    InputTooShortError,
    InvalidCError,
    InvalidMError,
    InvalidParamError,
    InvalidQError,
    InvalidWindowError,
    ShapeError,
)

LABEL_COLUMN = "label"


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MultivariateSeries:
    """A length-n sequence of w-dimensional observations.

    ``values`` has one row per time step and one column per dimension.
    ``labels`` (optional) marks anomalous observations with 1.
    """

    values: np.ndarray
    dim_names: Optional[tuple] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"series must be a non-empty n x w matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataFormatError(
                f"non-finite value at row {bad[0]}, column {bad[1]}; missing data is not imputed"
            )
        object.__setattr__(self, "values", _frozen(values))

        if self.dim_names is not None:
            names = tuple(str(s) for s in self.dim_names)
            if len(names) != values.shape[1]:
                raise ShapeError(f"{len(names)} dim_names for {values.shape[1]} dimensions")
            object.__setattr__(self, "dim_names", names)

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (values.shape[0],):
                raise ShapeError(f"labels must have length {values.shape[0]}, got shape {labels.shape}")
            if not np.all(np.isin(labels, (0, 1))):
                raise DataFormatError("labels must be 0 or 1")
            object.__setattr__(self, "labels", _frozen(labels, dtype=np.int8))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]

    def with_values(self, values) -> "MultivariateSeries":
        return MultivariateSeries(values, dim_names=self.dim_names, labels=self.labels)


@dataclass(frozen=True)
class Window:
    values: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ShapeError(f"window must be an a x w matrix, got shape {values.shape}")
        if values.shape[0] < 2:
            raise InvalidWindowError("window length must be at least 2")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WindowSet:
    """Windows sliced from one series, stored as a single (k, a, w) array.

    Window ``k`` starts at observation ``k * stride``.
    """

    values: np.ndarray
    window_length: int
    stride: int
    source_length: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise ShapeError(f"window stack must be (k, a, w), got shape {values.shape}")
        if values.shape[1] != self.window_length:
            raise ShapeError("window_length does not match the stacked windows")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_windows(cls, windows: Sequence, stride: int = 1, source_length: Optional[int] = None):
        """Stack free-standing windows (arrays or :class:`Window`) into a set."""
        arrays = [np.asarray(getattr(x, "values", x), dtype=float) for x in windows]
        arrays = [a[:, None] if a.ndim == 1 else a for a in arrays]
        if not arrays:
            raise InputTooShortError("no windows given")
        shapes = {a.shape for a in arrays}
        if len(shapes) != 1:
            raise ShapeError(f"windows must share one shape, got {sorted(shapes)}")
        length = arrays[0].shape[0]
        if length < 2:
            raise InvalidWindowError("window length must be at least 2")
        if source_length is None:
            source_length = (len(arrays) - 1) * stride + length
        return cls(np.stack(arrays), length, stride, source_length)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, k: int) -> Window:
        return Window(self.values[k], start_index=self.start(k))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def windows(self) -> tuple:
        return tuple(self)

    @property
    def w(self) -> int:
        return self.values.shape[2]

    def start(self, k: int) -> int:
        return int(k) * self.stride

    @property
    def starts(self) -> np.ndarray:
        return np.arange(len(self)) * self.stride

    def coverage(self) -> np.ndarray:
        """Number of windows covering each source observation."""
        cov = np.zeros(self.source_length, dtype=np.int64)
        for s in self.starts:
            cov[s:s + self.window_length] += 1
        return cov


def make_windows(series, length: int, stride: int = 1) -> WindowSet:
    """Slice ``series`` into windows of ``length`` steps every ``stride`` steps.

    Returns ``floor((n - length) / stride) + 1`` windows.
    """
    values = series.values if isinstance(series, MultivariateSeries) else np.asarray(series, float)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    if length < 2:
        raise InvalidWindowError(f"window length must be at least 2, got {length}")
    if stride < 1:
        raise InvalidWindowError(f"stride must be positive, got {stride}")
    if length > n:
        raise InputTooShortError(f"series of length {n} is shorter than window length {length}")
    count = (n - length) // stride + 1
    view = np.lib.stride_tricks.sliding_window_view(values, length, axis=0)
    # sliding_window_view puts the window axis last: (n - length + 1, w, length)
    stack = np.ascontiguousarray(view[: (count - 1) * stride + 1 : stride].transpose(0, 2, 1))
    return WindowSet(stack, length, stride, n)


@dataclass(frozen=True)
class HyperParams:
    """Clustering hyperparameters.

    ``center_length`` is the length ``b`` of cluster centers; ``None`` means
    "same as the window length".
    """

    c: int = 10
    m: float = 1.7
    q: float = 3.0
    epsilon: float = 1e-4
    max_iters: int = 100
    center_length: Optional[int] = None

    def resolved_center_length(self, window_length: int) -> int:
        return window_length if self.center_length is None else int(self.center_length)


def validate_params(p: HyperParams) -> HyperParams:
    """Return ``p`` unchanged if every hyperparameter is admissible."""
    if int(p.c) != p.c or p.c < 2:
        raise InvalidCError(f"cluster count c must be an integer >= 2, got {p.c}")
    if not math.isfinite(p.m) or p.m <= 1 or p.m > 2:
        raise InvalidMError(
            f"fuzzy coefficient m must lie in (1, 2], got {p.m}; "
            "m -> 1 degenerates to hard clustering"
        )
    if not math.isfinite(p.q) or 0 <= p.q <= 1:
        raise InvalidQError(
            f"weight exponent q must lie in (-inf, 0) or (1, inf), got {p.q}: "
            "q=0 collapses to plain Euclidean distance, 0<q<1 up-weights noisy "
            "dimensions, q=1 collapses onto a single dimension"
        )
    if not p.epsilon > 0:
        raise InvalidParamError(f"epsilon must be > 0, got {p.epsilon}")
    if int(p.max_iters) != p.max_iters or p.max_iters < 1:
        raise InvalidParamError(f"max_iters must be a positive integer, got {p.max_iters}")
    if p.center_length is not None and p.center_length < 2:
        raise InvalidParamError(f"center_length must be >= 2, got {p.center_length}")
    return p


@dataclass(frozen=True)
class Normalization:
    """Per-dimension min-max scaling to [0, 1].

    Constant dimensions are shifted to zero but not scaled.
    """

    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, values) -> "Normalization":
        values = np.asarray(values, float)
        return cls(_frozen(values.min(axis=0)), _frozen(values.max(axis=0)))

    @property
    def scale(self) -> np.ndarray:
        span = np.asarray(self.maxs) - np.asarray(self.mins)
        return np.where(span > 0, span, 1.0)

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, float)
        if values.shape[-1] != len(self.mins):
            raise ShapeError(f"expected w={len(self.mins)} dimensions, got w={values.shape[-1]}")
        return (values - np.asarray(self.mins)) / self.scale

    def to_dict(self) -> dict:
        return {"mins": [float(v) for v in self.mins], "maxs": [float(v) for v in self.maxs]}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(_frozen(d["mins"]), _frozen(d["maxs"]))


def read_series_csv(path) -> MultivariateSeries:
    """Read a series CSV: header row, one column per dimension, optional final ``label``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(cell.strip() for cell in r)]
    if not body:
        raise InputTooShortError(f"{path}: no data rows")
    has_label = header[-1] == LABEL_COLUMN
    if has_label and len(header) < 2:
        raise DataFormatError(f"{path}: no dimension columns besides '{LABEL_COLUMN}'")
    try:
        table = np.array([[float(cell) for cell in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    if table.shape[1] != len(header):
        raise DataFormatError(f"{path}: rows have {table.shape[1]} fields, header has {len(header)}")
    if has_label:
        return MultivariateSeries(table[:, :-1], dim_names=header[:-1], labels=table[:, -1].astype(int))
    return MultivariateSeries(table, dim_names=header)


def write_series_csv(series: MultivariateSeries, path) -> None:
    names = series.dim_names or tuple(f"x{d}" for d in range(series.w))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(list(names) + ([LABEL_COLUMN] if series.labels is not None else []))
        for i, row in enumerate(series.values):
            cells = [repr(float(v)) for v in row]
            if series.labels is not None:
                cells.append(str(int(series.labels[i])))
            out.writerow(cells)
