"""Fuzzy C-means clustering under a learned weighted DTW distance.

The objective ``J = sum_ij u_ij**m * wDTW(v_i, x_j)`` is minimised by block
coordinate descent over four blocks, each solved exactly with the other
three held fixed:

1. warping paths between every center and sample (dynamic programming),
2. memberships ``U`` (closed form, per sample),
3. dimension weights ``lambda`` (closed form, from per-dimension deviations),
4. centers ``V`` (membership-weighted mean of aligned sample points).

Because each block update is an exact minimiser, the loss never increases.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Union

import numba as nb
import numpy as np

from . import __version__
from .core import HyperParams, Normalization, WindowSet, validate_params
from .errors import DataFormatError, FcmWdtwError, InsufficientDataError, ShapeError
from .wdtw import DimensionWeights, WarpingPath, align_batch, pairwise_distances, path_deviation

DEVIATION_FLOOR = 1e-12
DEAD_CLUSTER_TOL = 1e-12
DPC_MAX_SAMPLES = 512
DPC_PERCENTILE = 2.0
MODEL_FORMAT = "fcmwdtw-model"


@dataclass(frozen=True)
class FcmModel:
    """A fitted latent space: centers, dimension weights and memberships.

    ``memberships`` is ``None`` for models loaded from disk.
    """

    centers: np.ndarray
    weights: DimensionWeights
    memberships: Optional[np.ndarray]
    params: HyperParams
    final_loss: float
    iterations_run: int
    window_length: int
    loss_history: tuple = ()
    normalization: Optional[Normalization] = None
    band: Optional[int] = None
    iteration_seconds: tuple = field(default=(), compare=False)

    @property
    def c(self) -> int:
        return self.centers.shape[0]

    @property
    def center_length(self) -> int:
        return self.centers.shape[1]

    @property
    def w(self) -> int:
        return self.centers.shape[2]


@dataclass
class FitState:
    """Everything the alternating optimiser carries between block updates.

    ``paths[i, j, :lengths[i, j]]`` holds the 0-based alignment between
    center ``i`` and sample ``j``. ``deviations[i, j, d]`` is the squared
    difference on dimension ``d`` summed along that path, and
    ``distances[i, j]`` the path cost under the current weights and centers.
    """

    centers: np.ndarray
    weights: DimensionWeights
    memberships: np.ndarray
    params: HyperParams
    paths: np.ndarray
    lengths: np.ndarray
    distances: np.ndarray
    deviations: np.ndarray
    loss_history: list = field(default_factory=list)
    band: Optional[int] = None

    def path(self, i: int, j: int) -> WarpingPath:
        return WarpingPath.from_indices(self.paths[i, j, : self.lengths[i, j]])


# ---------------------------------------------------------------------------
# closed-form block solutions

def memberships_from_distances(distances, m: float) -> np.ndarray:
    """Membership matrix minimising ``sum_i u_i**m d_i`` for every column.

    Columns with zero distances to some clusters share their membership
    equally among those clusters.
    """
    d = np.asarray(distances, dtype=float)
    U = np.empty_like(d)
    zero = d <= 0.0
    singular = zero.any(axis=0)
    regular = ~singular
    if regular.any():
        # u_i proportional to d_i ** (-1 / (m - 1)), normalised in log space
        z = -np.log(d[:, regular]) / (m - 1.0)
        z -= z.max(axis=0)
        e = np.exp(z)
        U[:, regular] = e / e.sum(axis=0)
    if singular.any():
        hits = zero[:, singular].astype(float)
        U[:, singular] = hits / hits.sum(axis=0)
    return U


def weights_from_deviation(deviation, q: float) -> np.ndarray:
    """Dimension weights minimising ``sum_d lambda_d**q A_d`` on the simplex."""
    A = np.maximum(np.asarray(deviation, dtype=float), DEVIATION_FLOOR)
    z = -np.log(A) / (q - 1.0)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


@nb.njit(parallel=True, cache=True)
def _center_sums(samples, um, paths, lens, b):
    c, n, w = um.shape[0], samples.shape[0], samples.shape[2]
    num = np.zeros((c, b, w))
    den = np.zeros((c, b))
    for i in nb.prange(c):
        for j in range(n):
            u = um[i, j]
            for p in range(lens[i, j]):
                r = paths[i, j, p, 0]
                s = paths[i, j, p, 1]
                den[i, r] += u
                for d in range(w):
                    num[i, r, d] += u * samples[j, s, d]
    return num, den


def intra_cluster_deviation(state: FitState) -> np.ndarray:
    """Per-dimension membership-weighted squared deviation along stored paths."""
    um = state.memberships ** state.params.m
    return np.einsum("ij,ijd->d", um, state.deviations)


# ---------------------------------------------------------------------------
# block updates

def _stack(data) -> np.ndarray:
    return np.ascontiguousarray(data.values if isinstance(data, WindowSet) else data, dtype=float)


def objective(state: FitState) -> float:
    return float(np.sum(state.memberships ** state.params.m * state.distances))


def update_paths(state: FitState, data) -> FitState:
    _, paths, lens, dev = align_batch(state.centers, _stack(data), state.weights, state.band)
    return replace(state, paths=paths, lengths=lens, deviations=dev,
                   distances=dev @ state.weights.effective())


def update_memberships(state: FitState) -> FitState:
    return replace(state, memberships=memberships_from_distances(state.distances, state.params.m))


def update_weights(state: FitState, data=None) -> FitState:
    """New dimension weights; ``data`` is unused because deviations are cached."""
    lam = weights_from_deviation(intra_cluster_deviation(state), state.params.q)
    weights = DimensionWeights(lam, state.params.q)
    return replace(state, weights=weights, distances=state.deviations @ weights.effective())


def update_centers(state: FitState, data) -> FitState:
    samples = _stack(data)
    um = state.memberships ** state.params.m
    b = state.centers.shape[1]
    num, den = _center_sums(samples, um, state.paths, state.lengths, b)
    centers = state.centers.copy()
    alive = state.memberships.max(axis=1) >= DEAD_CLUSTER_TOL
    centers[alive] = num[alive] / den[alive][:, :, None]
    if not alive.all():
        centers = _revive(centers, alive, state.distances, samples)
    dev = path_deviation(centers, samples, state.paths, state.lengths)
    return replace(state, centers=centers, deviations=dev, distances=dev @ state.weights.effective())


def _revive(centers, alive, distances, samples):
    """Move dead centers onto the samples farthest from every live center."""
    if alive.any():
        score = distances[alive].min(axis=0)
    else:
        score = np.zeros(samples.shape[0])
    order = np.argsort(-score, kind="stable")
    b = centers.shape[1]
    for i, j in zip(np.flatnonzero(~alive), order):
        centers[i] = _resample(samples[j], b)
    return centers


def _resample(x: np.ndarray, length: int) -> np.ndarray:
    if x.shape[0] == length:
        return x.copy()
    src = np.linspace(0.0, 1.0, x.shape[0])
    dst = np.linspace(0.0, 1.0, length)
    return np.stack([np.interp(dst, src, x[:, d]) for d in range(x.shape[1])], axis=1)


# ---------------------------------------------------------------------------
# initialisation

def init_dpc(data, c: int, seed: int = 0, q: float = 2.0, band=None,
             center_length: Optional[int] = None):
    """Pick initial centers by density peak clustering.

    Distances are weighted DTW under uniform weights. Local density uses a
    Gaussian kernel with the cutoff at the 2nd percentile of pairwise
    distances; separation is the distance to the nearest denser point. The
    ``c`` windows with the largest density x separation become the centers.
    At most 512 windows (a seeded uniform subsample) take part.

    Returns ``(centers, weights, chosen_indices)``.
    """
    samples = _stack(data)
    n, w = samples.shape[0], samples.shape[2]
    if n < c:
        raise InsufficientDataError(f"{n} windows cannot seed {c} clusters")
    pool = np.arange(n)
    if n > DPC_MAX_SAMPLES:
        rng = np.random.default_rng(seed)
        pool = np.sort(rng.choice(n, DPC_MAX_SAMPLES, replace=False))
    weights = DimensionWeights.uniform(w, q)
    chosen = pool[dpc_select(pairwise_distances(samples[pool], weights, band), c)]
    b = center_length or samples.shape[1]
    centers = np.stack([_resample(samples[j], b) for j in chosen])
    return centers, weights, chosen


def dpc_select(dist: np.ndarray, c: int) -> np.ndarray:
    """Indices of the ``c`` points ranked highest by density times separation."""
    n = dist.shape[0]
    if c >= n:
        return np.arange(n)
    off = dist[np.triu_indices(n, k=1)]
    cutoff = np.percentile(off, DPC_PERCENTILE)
    if cutoff <= 0:
        positive = off[off > 0]
        cutoff = positive.min() if positive.size else 1.0
    kernel = np.exp(-((dist / cutoff) ** 2))
    rho = kernel.sum(axis=1) - np.diag(kernel)
    order = np.argsort(-rho, kind="stable")
    delta = np.empty(n)
    delta[order[0]] = dist[order[0]].max()
    for k in range(1, n):
        delta[order[k]] = dist[order[k], order[:k]].min()
    gamma = rho * delta
    return np.argsort(-gamma, kind="stable")[:c]


def init_random(data, c: int, seed: int = 0, q: float = 2.0, center_length: Optional[int] = None):
    """``c`` distinct windows drawn uniformly with ``seed``, and uniform weights."""
    samples = _stack(data)
    n, w = samples.shape[0], samples.shape[2]
    if n < c:
        raise InsufficientDataError(f"{n} windows cannot seed {c} clusters")
    chosen = np.random.default_rng(seed).choice(n, c, replace=False)
    b = center_length or samples.shape[1]
    centers = np.stack([_resample(samples[j], b) for j in chosen])
    return centers, DimensionWeights.uniform(w, q), chosen


# ---------------------------------------------------------------------------
# driver

InitStrategy = Union[str, np.ndarray]


def initial_state(data, params: HyperParams, centers, weights: DimensionWeights, band=None,
                  solve_paths: bool = True) -> FitState:
    """State with the given centers and weights and uniform memberships.

    With ``solve_paths=False`` the path block is left empty for the caller's
    first :func:`update_paths`.
    """
    samples = _stack(data)
    c, n, w = centers.shape[0], samples.shape[0], samples.shape[2]
    state = FitState(
        centers=np.array(centers, dtype=float),
        weights=DimensionWeights(weights.lambdas, params.q),
        memberships=np.full((c, n), 1.0 / c),
        params=params,
        paths=np.zeros((c, n, 0, 2), dtype=np.int32),
        lengths=np.zeros((c, n), dtype=np.int32),
        distances=np.zeros((c, n)),
        deviations=np.zeros((c, n, w)),
        band=band,
    )
    return update_paths(state, samples) if solve_paths else state


def fit(data, params: HyperParams, init: InitStrategy = "dpc", seed: int = 0, band=None,
        normalization: Optional[Normalization] = None,
        callback: Optional[Callable[[FitState, int], None]] = None) -> FcmModel:
    """Fit FCM-wDTW to a window set.

    ``init`` is ``"dpc"``, ``"random"`` or an explicit ``(c, b, w)`` array of
    starting centers. Iteration stops when the loss drops below
    ``params.epsilon``, when its relative improvement does, or after
    ``params.max_iters`` iterations. ``callback(state, iteration)`` runs after
    every iteration.
    """
    params = validate_params(params)
    samples = _stack(data)
    if samples.ndim != 3 or samples.shape[0] == 0:
        raise ShapeError("need a non-empty (k, a, w) stack of windows")
    n, a, w = samples.shape
    if n < params.c:
        raise InsufficientDataError(f"{n} windows are fewer than c={params.c} clusters")
    b = params.resolved_center_length(a)

    if isinstance(init, str):
        if init == "dpc":
            centers, weights, _ = init_dpc(samples, params.c, seed, params.q, band, b)
        elif init == "random":
            centers, weights, _ = init_random(samples, params.c, seed, params.q, b)
        else:
            raise FcmWdtwError(f"unknown init strategy {init!r}; use 'dpc' or 'random'")
    else:
        centers = np.asarray(init, dtype=float)
        if centers.shape != (params.c, b, w):
            raise ShapeError(f"initial centers must have shape {(params.c, b, w)}, got {centers.shape}")
        weights = DimensionWeights.uniform(w, params.q)

    state = initial_state(samples, params, centers, weights, band, solve_paths=False)
    timings = []
    iteration = 0
    for iteration in range(1, params.max_iters + 1):
        tic = time.perf_counter()
        state = update_paths(state, samples)
        state = update_memberships(state)
        state = update_weights(state, samples)
        state = update_centers(state, samples)
        loss = objective(state)
        timings.append(time.perf_counter() - tic)
        prev = state.loss_history[-1] if state.loss_history else None
        state.loss_history.append(loss)
        if callback is not None:
            callback(state, iteration)
        if loss < params.epsilon:
            break
        if prev is not None and (prev - loss) / max(prev, 1e-30) < params.epsilon:
            break

    return FcmModel(
        centers=state.centers,
        weights=state.weights,
        memberships=state.memberships,
        params=params,
        final_loss=state.loss_history[-1],
        iterations_run=iteration,
        window_length=a,
        loss_history=tuple(state.loss_history),
        normalization=normalization,
        band=band,
        iteration_seconds=tuple(timings),
    )


# ---------------------------------------------------------------------------
# serialisation

def model_to_dict(model: FcmModel) -> dict:
    p = model.params
    return {
        "format": MODEL_FORMAT,
        "version": __version__,
        "c": model.c,
        "m": p.m,
        "q": p.q,
        "a": model.window_length,
        "b": model.center_length,
        "w": model.w,
        "epsilon": p.epsilon,
        "max_iters": p.max_iters,
        "band": model.band,
        "final_loss": model.final_loss,
        "iterations_run": model.iterations_run,
        "loss_history": [float(v) for v in model.loss_history],
        "lambdas": [float(v) for v in model.weights.lambdas],
        "centers": model.centers.tolist(),
        "normalization": model.normalization.to_dict() if model.normalization else None,
    }


def model_from_dict(doc: dict) -> FcmModel:
    if doc.get("format") != MODEL_FORMAT:
        raise DataFormatError(f"not a model file (format={doc.get('format')!r})")
    try:
        centers = np.array(doc["centers"], dtype=float)
        if centers.shape != (doc["c"], doc["b"], doc["w"]):
            raise DataFormatError(f"centers have shape {centers.shape}, header says {(doc['c'], doc['b'], doc['w'])}")
        params = validate_params(HyperParams(
            c=doc["c"], m=doc["m"], q=doc["q"], epsilon=doc["epsilon"],
            max_iters=doc["max_iters"], center_length=doc["b"],
        ))
        norm = doc.get("normalization")
        return FcmModel(
            centers=centers,
            weights=DimensionWeights(doc["lambdas"], doc["q"]),
            memberships=None,
            params=params,
            final_loss=doc["final_loss"],
            iterations_run=doc["iterations_run"],
            window_length=doc["a"],
            loss_history=tuple(doc.get("loss_history", ())),
            normalization=Normalization.from_dict(norm) if norm else None,
            band=doc.get("band"),
        )
    except KeyError as exc:
        raise DataFormatError(f"model file is missing field {exc}") from None


def save_model(model: FcmModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> FcmModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return model_from_dict(doc)
