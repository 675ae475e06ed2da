"""Reconstruction-based anomaly scoring on top of a fitted model.

A window is encoded as memberships over the cluster centers, rebuilt from
the centers along its warping paths, and scored by the weighted DTW distance
between the window and that reconstruction. Window scores are spread back
onto the observations each window covers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numba as nb
import numpy as np

from .core import MultivariateSeries, Window, WindowSet, make_windows
from .errors import DataFormatError, FcmWdtwError, ShapeError
from .fcm import FcmModel, memberships_from_distances
from .wdtw import WarpingPath, align_batch, paired_distances

AGGREGATIONS = ("mean", "max")


@dataclass(frozen=True)
class ScoreSeries:
    """Per-observation scores; ``NaN`` where no window covers the observation."""

    scores: np.ndarray
    window_scores: np.ndarray
    coverage: np.ndarray
    labels: Optional[np.ndarray] = None

    @property
    def absent(self) -> np.ndarray:
        return self.coverage == 0


@dataclass(frozen=True)
class Encoding:
    memberships: np.ndarray
    paths: tuple
    distances: np.ndarray


def _window_array(model: FcmModel, x) -> np.ndarray:
    arr = np.asarray(getattr(x, "values", x), dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != model.w:
        raise ShapeError(f"model expects w={model.w} dimensions, got window of shape {arr.shape}")
    return arr


def _stack(model: FcmModel, windows) -> np.ndarray:
    arr = np.asarray(windows.values if isinstance(windows, WindowSet) else windows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != model.w:
        raise ShapeError(f"model expects w={model.w} dimensions, got window stack of shape {arr.shape}")
    return np.ascontiguousarray(arr)


@nb.njit(parallel=True, cache=True)
def _reconstruct_all(centers, um, paths, lens, a):
    c, w = centers.shape[0], centers.shape[2]
    n = um.shape[1]
    out = np.zeros((n, a, w))
    for j in nb.prange(n):
        den = np.zeros(a)
        for i in range(c):
            u = um[i, j]
            for p in range(lens[i, j]):
                r = paths[i, j, p, 0]
                s = paths[i, j, p, 1]
                den[s] += u
                for d in range(w):
                    out[j, s, d] += u * centers[i, r, d]
        for s in range(a):
            for d in range(w):
                out[j, s, d] /= den[s]
    return out


def encode(model: FcmModel, x) -> Encoding:
    """Memberships, paths and distances of one window against every center."""
    arr = _window_array(model, x)
    dist, paths, lens, _ = align_batch(model.centers, arr[None], model.weights, model.band)
    u = memberships_from_distances(dist, model.params.m)[:, 0]
    return Encoding(
        memberships=u,
        paths=tuple(WarpingPath.from_indices(paths[i, 0, : lens[i, 0]]) for i in range(model.c)),
        distances=dist[:, 0],
    )


def reconstruct_batch(model: FcmModel, windows) -> np.ndarray:
    """Reconstruct a ``(k, a, w)`` stack of windows from the model's centers."""
    X = _stack(model, windows)
    dist, paths, lens, _ = align_batch(model.centers, X, model.weights, model.band)
    um = memberships_from_distances(dist, model.params.m) ** model.params.m
    return _reconstruct_all(model.centers, um, paths, lens, X.shape[1])


def reconstruct(model: FcmModel, x) -> Window:
    arr = _window_array(model, x)
    start = getattr(x, "start_index", 0)
    return Window(reconstruct_batch(model, arr[None])[0], start_index=start)


def score_windows(model: FcmModel, windows) -> np.ndarray:
    """Anomaly score of every window in a ``(k, a, w)`` stack."""
    X = _stack(model, windows)
    rec = reconstruct_batch(model, X)
    return paired_distances(X, rec, model.weights, model.band)


def score_window(model: FcmModel, x) -> float:
    arr = _window_array(model, x)
    return float(score_windows(model, arr[None])[0])


def spread_scores(window_scores, window_length: int, stride: int, n: int, aggregation: str = "mean"):
    """Map window scores onto observations; returns ``(scores, coverage)``."""
    if aggregation not in AGGREGATIONS:
        raise FcmWdtwError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    window_scores = np.asarray(window_scores, dtype=float)
    coverage = np.zeros(n, dtype=np.int64)
    acc = np.zeros(n) if aggregation == "mean" else np.full(n, -np.inf)
    for k, s in enumerate(window_scores):
        lo = k * stride
        hi = lo + window_length
        coverage[lo:hi] += 1
        if aggregation == "mean":
            acc[lo:hi] += s
        else:
            np.maximum(acc[lo:hi], s, out=acc[lo:hi])
    scores = np.full(n, np.nan)
    covered = coverage > 0
    if aggregation == "mean":
        scores[covered] = acc[covered] / coverage[covered]
    else:
        scores[covered] = acc[covered]
    return scores, coverage


def score_series(model: FcmModel, series: MultivariateSeries, window_length: Optional[int] = None,
                 stride: int = 1, aggregation: str = "mean") -> ScoreSeries:
    """Score every observation of a raw series.

    The model's stored normalization (if any) is applied first; values
    outside the training range are kept as they are.
    """
    if series.w != model.w:
        raise ShapeError(f"model expects w={model.w} dimensions, series has w={series.w}")
    if aggregation not in AGGREGATIONS:
        raise FcmWdtwError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    window_length = window_length or model.window_length
    values = series.values
    if model.normalization is not None:
        values = model.normalization.apply(values)
    ws = make_windows(values, window_length, stride)
    window_scores = score_windows(model, ws)
    scores, coverage = spread_scores(window_scores, window_length, stride, series.n, aggregation)
    return ScoreSeries(scores, window_scores, coverage, series.labels)


def write_scores_csv(result: ScoreSeries, dest) -> None:
    """Write ``index, score, coverage[, label]`` to a path or text stream.

    Scores of uncovered observations are left empty.
    """
    if hasattr(dest, "write"):
        _write_scores(result, dest)
        return
    with Path(dest).open("w", newline="", encoding="utf-8") as fh:
        _write_scores(result, fh)


def _write_scores(result: ScoreSeries, fh) -> None:
    out = csv.writer(fh, lineterminator="\n")
    header = ["index", "score", "coverage"] + (["label"] if result.labels is not None else [])
    out.writerow(header)
    for i, (s, cov) in enumerate(zip(result.scores, result.coverage)):
        row = [i, "" if cov == 0 else repr(float(s)), int(cov)]
        if result.labels is not None:
            row.append(int(result.labels[i]))
        out.writerow(row)


def read_scores_csv(path):
    """Read a score CSV back; returns ``(scores, coverage, labels or None)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0][:3]] != ["index", "score", "coverage"]:
        raise DataFormatError(f"{path}: expected header 'index,score,coverage[,label]'")
    header = [h.strip() for h in rows[0]]
    has_label = "label" in header
    body = [r for r in rows[1:] if r]
    try:
        scores = np.array([float(r[1]) if r[1].strip() else np.nan for r in body])
        coverage = np.array([int(r[2]) for r in body], dtype=np.int64)
        labels = np.array([int(r[header.index("label")]) for r in body]) if has_label else None
    except (ValueError, IndexError) as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return scores, coverage, labels
