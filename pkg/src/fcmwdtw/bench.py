"""Timing of the fit loop against window length and sample count."""

from __future__ import annotations

import gc

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import HyperParams
from .fcm import fit


@dataclass(frozen=True)
class BenchRow:
    window_length: int
    n: int
    seconds_per_iteration: float
    iterations: int


def synthetic_windows(n: int, a: int, w: int, seed: int = 0) -> np.ndarray:
    """``n`` noisy sine windows of length ``a`` with random phase per window."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2 * np.pi, a)
    phase = rng.uniform(0, 2 * np.pi, size=(n, 1, w))
    freq = 1.0 + np.arange(w)
    return np.sin(freq * t[None, :, None] + phase) + 0.1 * rng.standard_normal((n, a, w))


def time_fit(n: int, a: int, w: int = 2, c: int = 4, iters: int = 5, repeats: int = 3,
             seed: int = 0) -> BenchRow:
    """Median wall time of one fit iteration (initialisation excluded); best of ``repeats``."""
    X = synthetic_windows(n, a, w, seed)
    params = HyperParams(c=c, m=1.7, q=3.0, epsilon=1e-300, max_iters=iters)
    best = np.inf
    ran = 0
    for _ in range(repeats):
        # as timeit does: keep collector pauses out of the measurement
        enabled = gc.isenabled()
        gc.disable()
        try:
            model = fit(X, params, init="random", seed=seed)
        finally:
            if enabled:
                gc.enable()
        best = min(best, float(np.median(model.iteration_seconds)))
        ran = model.iterations_run
    return BenchRow(a, n, best, ran)


def loglog_slope(rows: Sequence[BenchRow]) -> Optional[float]:
    if len(rows) < 2:
        return None
    x = np.log([r.window_length for r in rows])
    y = np.log([r.seconds_per_iteration for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def run_bench(sizes: Sequence[int], n: int = 200, w: int = 2, c: int = 4, iters: int = 5,
              repeats: int = 3, seed: int = 0):
    """Time the fit loop at each window length; returns ``(rows, slope or None)``."""
    # warm-up so JIT compilation is not timed
    fit(synthetic_windows(c + 1, 4, w, seed), HyperParams(c=c, max_iters=1), init="random")
    rows = [time_fit(n, a, w, c, iters, repeats, seed) for a in sizes]
    return rows, loglog_slope(rows)
