"""Fuzzy C-means over multivariate time series with a learned weighted DTW
distance, and a reconstruction-based anomaly detector built on it."""

__version__ = "0.1.0"

import os  # noqa: E402

import numba  # noqa: E402

# the bundled TBB is too old for numba; pick OpenMP unless the user chose a layer
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"

from .core import (  # noqa: E402
    HyperParams,
    MultivariateSeries,
    Normalization,
    Window,
    WindowSet,
    make_windows,
    read_series_csv,
    validate_params,
    write_series_csv,
)
from .detector import ScoreSeries, encode, reconstruct, score_series, score_window  # noqa: E402
from .fcm import FcmModel, FitState, fit, load_model, save_model  # noqa: E402
from .metrics import EvalResult, evaluate, pr_auc, roc_auc  # noqa: E402
from .pipeline import fit_series  # noqa: E402
from .wdtw import DimensionWeights, WarpingPath, wdtw_distance  # noqa: E402
