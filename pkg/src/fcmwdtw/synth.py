"""Synthetic multivariate sine series with labelled injected anomalies."""

from __future__ import annotations

import numpy as np

from .core import MultivariateSeries
from .errors import FcmWdtwError

ANOMALY_KINDS = ("flip", "amplitude", "shift")


def _place(rng, n, count, lo, hi, margin):
    """Non-overlapping ``(start, length)`` segments, at least ``margin`` apart."""
    for _ in range(1000):
        lengths = rng.integers(lo, hi + 1, size=count)
        slack = n - 2 * margin - lengths.sum() - margin * (count - 1)
        if slack < 0:
            break
        cuts = np.sort(rng.integers(0, slack + 1, size=count))
        starts = margin + cuts + np.r_[0, np.cumsum(lengths[:-1] + margin)]
        return list(zip(starts.tolist(), lengths.tolist()))
    raise FcmWdtwError(f"cannot place {count} anomalies of length {lo}-{hi} in {n} steps")


def make_synthetic(n: int = 2000, w: int = 2, n_anomalies: int = 5, kinds=("flip",),
                   period: float = 40.0, noise: float = 0.05, anomaly_length=(24, 48),
                   seed: int = 0) -> MultivariateSeries:
    """Phase-shifted sines of different amplitude per dimension, plus anomalies.

    ``flip`` swaps the first two dimensions over the segment, reversing their
    amplitude relationship. ``amplitude`` scales one dimension by 2.5.
    ``shift`` delays one dimension by half a period.
    """
    if w < 2 and "flip" in kinds:
        raise FcmWdtwError("a relationship flip needs at least two dimensions")
    for kind in kinds:
        if kind not in ANOMALY_KINDS:
            raise FcmWdtwError(f"unknown anomaly kind {kind!r}; choose from {ANOMALY_KINDS}")
    rng = np.random.default_rng(seed)
    t = np.arange(n, dtype=float)
    amp = 1.0 + 0.6 * np.arange(w)
    phase = np.pi / 3 * np.arange(w)
    base = amp * np.sin(2 * np.pi * t[:, None] / period + phase)
    values = base + noise * rng.standard_normal((n, w))
    labels = np.zeros(n, dtype=int)

    lo, hi = anomaly_length
    for k, (start, length) in enumerate(_place(rng, n, n_anomalies, lo, hi, margin=hi)):
        seg = slice(start, start + length)
        kind = kinds[k % len(kinds)]
        if kind == "flip":
            values[seg, [0, 1]] = values[seg, [1, 0]]
        elif kind == "amplitude":
            d = rng.integers(w)
            values[seg, d] = 2.5 * base[seg, d] + noise * rng.standard_normal(length)
        else:
            d = rng.integers(w)
            shifted = amp[d] * np.sin(2 * np.pi * t[seg] / period + phase[d] + np.pi)
            values[seg, d] = shifted + noise * rng.standard_normal(length)
        labels[seg] = 1
    names = tuple(f"x{d}" for d in range(w))
    return MultivariateSeries(values, dim_names=names, labels=labels)
