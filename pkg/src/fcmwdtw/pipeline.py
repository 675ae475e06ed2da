"""Series-level helpers composing windowing, fitting, scoring and evaluation."""

from __future__ import annotations

from typing import Optional

from .core import HyperParams, MultivariateSeries, Normalization, make_windows
from .detector import ScoreSeries, score_series
from .fcm import FcmModel, fit
from .metrics import EvalResult, evaluate

DEFAULT_WINDOW = 16


def fit_series(series: MultivariateSeries, params: HyperParams, window_length: int = DEFAULT_WINDOW,
               stride: int = 1, normalize: bool = True, init="dpc", seed: int = 0,
               band: Optional[int] = None, callback=None) -> FcmModel:
    """Normalize (optionally), window and fit; the scaler is stored on the model."""
    norm = Normalization.fit(series.values) if normalize else None
    values = norm.apply(series.values) if norm else series.values
    windows = make_windows(values, window_length, stride)
    return fit(windows, params, init=init, seed=seed, band=band, normalization=norm, callback=callback)


def run_once(series: MultivariateSeries, params: HyperParams, window_length: int = DEFAULT_WINDOW,
             stride: int = 1, normalize: bool = True, aggregation: str = "mean", init="dpc",
             seed: int = 0, band: Optional[int] = None):
    """Fit, score and (when labels exist) evaluate one configuration.

    Returns ``(model, scores, eval_result_or_None)``.
    """
    model = fit_series(series, params, window_length, stride, normalize, init, seed, band)
    result = score_series(model, series, window_length, stride, aggregation)
    ev: Optional[EvalResult] = None
    if series.labels is not None:
        keep = ~result.absent
        ev = evaluate(result.scores[keep], series.labels[keep])
    return model, result, ev
