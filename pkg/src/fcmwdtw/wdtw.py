"""Weighted dynamic time warping.

The pointwise cost between two observation vectors is a weighted squared
Euclidean distance, ``sum_d lambda_d**q * (x_d - y_d)**2``, and the warping
distance is the sum of those costs along the cheapest monotone path through
the cost matrix. No square root is taken anywhere.

The numba kernels at the bottom of this module do the heavy lifting for the
optimizer and the detector; they work on 0-based ``(row, col)`` index arrays.
The public :class:`WarpingPath` reports 1-based pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import FcmWdtwError, ShapeError

LAMBDA_FLOOR = 1e-12
SUM_TOL = 1e-9


@dataclass(frozen=True)
class DimensionWeights:
    """Per-dimension weights on the simplex plus the exponent ``q``."""

    lambdas: np.ndarray
    q: float

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float, copy=True).reshape(-1)
        if lam.size < 1:
            raise ShapeError("need at least one dimension weight")
        if np.any(lam < 0) or np.any(lam > 1) or not np.all(np.isfinite(lam)):
            raise FcmWdtwError(f"dimension weights must lie in [0, 1], got {lam}")
        if abs(lam.sum() - 1.0) > SUM_TOL:
            raise FcmWdtwError(f"dimension weights must sum to 1, got {lam.sum()!r}")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "q", float(self.q))

    @classmethod
    def uniform(cls, w: int, q: float) -> "DimensionWeights":
        return cls(np.full(w, 1.0 / w), q)

    @property
    def w(self) -> int:
        return self.lambdas.size

    def effective(self) -> np.ndarray:
        """The multipliers ``lambda_d**q``, with lambda floored so q < 0 stays finite."""
        return np.maximum(self.lambdas, LAMBDA_FLOOR) ** self.q


@dataclass(frozen=True)
class WarpingPath:
    """Monotone alignment between two samples as 1-based ``(i, j)`` pairs."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        if not pairs or pairs[0] != (1, 1):
            raise FcmWdtwError("a warping path must start at (1, 1)")
        for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise FcmWdtwError(f"illegal warping step {(i0, j0)} -> {(i1, j1)}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_indices(cls, idx) -> "WarpingPath":
        """Build from a 0-based ``(l, 2)`` index array."""
        idx = np.asarray(idx)
        return cls(tuple((int(i) + 1, int(j) + 1) for i, j in idx))

    def indices(self) -> np.ndarray:
        """0-based ``(l, 2)`` index array."""
        return np.asarray(self.pairs, dtype=np.int64) - 1

    @property
    def shape(self) -> tuple:
        return self.pairs[-1]

    def __len__(self) -> int:
        return len(self.pairs)


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(getattr(x, "values", x), dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"expected a (length, w) matrix, got shape {arr.shape}")
    return arr


def _check_dims(w_x: int, w_y: int, weights: DimensionWeights) -> None:
    if not (w_x == w_y == weights.w):
        raise ShapeError(f"dimension mismatch: x has w={w_x}, y has w={w_y}, weights have w={weights.w}")


def weighted_euclidean(x, y, weights: DimensionWeights) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    _check_dims(x.size, y.size, weights)
    return float(np.sum(weights.effective() * (x - y) ** 2))


def cost_matrix(X, Y, weights: DimensionWeights) -> np.ndarray:
    """Pointwise cost matrix; entry ``(i, j)`` is the weighted cost of ``x_i`` vs ``y_j``."""
    X, Y = _as_matrix(X), _as_matrix(Y)
    _check_dims(X.shape[1], Y.shape[1], weights)
    return _cost(X, Y, weights.effective())


def _band_arg(band, m: int, n: int) -> int:
    if band is None:
        return -1
    if band < 0:
        raise FcmWdtwError(f"band must be >= 0, got {band}")
    # a band narrower than the length difference admits no path
    return max(int(band), abs(m - n))


def accumulated_cost(pcm, band=None) -> np.ndarray:
    """Cumulative DP table; cells outside the band are ``inf``."""
    pcm = np.asarray(pcm, dtype=float)
    if pcm.ndim != 2 or pcm.size == 0:
        raise ShapeError(f"cost matrix must be a non-empty 2-D array, got shape {pcm.shape}")
    return _accumulate(pcm, _band_arg(band, *pcm.shape))


def solve_owp(pcm, band=None):
    """Optimal warping path through ``pcm`` and its total cost.

    Ties are broken towards the diagonal step, then the column step ``(0, 1)``,
    then the row step ``(1, 0)``.
    """
    D = accumulated_cost(pcm, band)
    buf = np.empty((sum(D.shape) - 1, 2), dtype=np.int32)
    length = _backtrack(D, buf)
    return WarpingPath.from_indices(buf[:length]), float(D[-1, -1])


def wdtw_distance(X, Y, weights: DimensionWeights, band=None):
    """Weighted DTW distance and the path achieving it."""
    path, cost = solve_owp(cost_matrix(X, Y, weights), band)
    return cost, path


# ---------------------------------------------------------------------------
# batch kernels

@nb.njit(cache=True)
def _cost_into(X, Y, weff, C):
    m, n, w = X.shape[0], Y.shape[0], X.shape[1]
    for i in range(m):
        for j in range(n):
            s = 0.0
            for d in range(w):
                diff = X[i, d] - Y[j, d]
                s += weff[d] * diff * diff
            C[i, j] = s


@nb.njit(cache=True)
def _accumulate_into(C, band, D):
    m, n = C.shape
    if band < 0:
        band = max(m, n)
    D[0, 0] = C[0, 0]
    for j in range(1, n):
        D[0, j] = D[0, j - 1] + C[0, j] if j <= band else np.inf
    for i in range(1, m):
        lo = max(1, i - band)
        hi = min(n, i + band + 1)
        for j in range(n):
            D[i, j] = np.inf
        if lo == 1:
            D[i, 0] = D[i - 1, 0] + C[i, 0] if i <= band else np.inf
        left = D[i, lo - 1]
        # min over (diag, up) does not depend on the running left value
        for j in range(lo, hi):
            best = min(D[i - 1, j - 1], D[i - 1, j])
            left = C[i, j] + min(best, left)
            D[i, j] = left


@nb.njit(cache=True)
def _cost(X, Y, weff):
    C = np.empty((X.shape[0], Y.shape[0]))
    _cost_into(X, Y, weff, C)
    return C


@nb.njit(cache=True)
def _accumulate(C, band):
    D = np.empty(C.shape)
    _accumulate_into(C, band, D)
    return D


@nb.njit(cache=True)
def _backtrack(D, out):
    """Write the optimal path into ``out`` (front-aligned); return its length."""
    i, j = D.shape[0] - 1, D.shape[1] - 1
    k = out.shape[0] - 1
    out[k, 0] = i
    out[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = D[i - 1, j - 1]
            left = D[i, j - 1]
            up = D[i - 1, j]
            if diag <= left and diag <= up:
                i -= 1
                j -= 1
            elif left <= up:
                j -= 1
            else:
                i -= 1
        k -= 1
        out[k, 0] = i
        out[k, 1] = j
    length = out.shape[0] - k
    if k > 0:
        for p in range(length):
            out[p, 0] = out[k + p, 0]
            out[p, 1] = out[k + p, 1]
    return length


# pairs are dealt out to this many chunks so scratch tables are reused
_CHUNKS = 64


@nb.njit(parallel=True, cache=True)
def _align_all(centers, samples, weff, band):
    c, b = centers.shape[0], centers.shape[1]
    n, a, w = samples.shape[0], samples.shape[1], samples.shape[2]
    dist = np.empty((c, n))
    paths = np.zeros((c, n, a + b - 1, 2), dtype=np.int32)
    lens = np.empty((c, n), dtype=np.int32)
    dev = np.zeros((c, n, w))
    total = c * n
    chunks = min(total, _CHUNKS)
    scratch = np.empty((chunks, 2, b, a))
    for t in nb.prange(chunks):
        C = scratch[t, 0]
        D = scratch[t, 1]
        for k in range(t, total, chunks):
            i = k // n
            j = k % n
            _cost_into(centers[i], samples[j], weff, C)
            _accumulate_into(C, band, D)
            dist[i, j] = D[b - 1, a - 1]
            length = _backtrack(D, paths[i, j])
            lens[i, j] = length
            for p in range(length):
                r = paths[i, j, p, 0]
                s = paths[i, j, p, 1]
                for d in range(w):
                    diff = centers[i, r, d] - samples[j, s, d]
                    dev[i, j, d] += diff * diff
    return dist, paths, lens, dev


@nb.njit(parallel=True, cache=True)
def _paired_distances(X, Y, weff, band):
    n = X.shape[0]
    out = np.empty(n)
    for j in nb.prange(n):
        D = _accumulate(_cost(X[j], Y[j], weff), band)
        out[j] = D[D.shape[0] - 1, D.shape[1] - 1]
    return out


@nb.njit(parallel=True, cache=True)
def _pairwise(samples, weff, band):
    n = samples.shape[0]
    out = np.zeros((n, n))
    for i in nb.prange(n):
        for j in range(i + 1, n):
            D = _accumulate(_cost(samples[i], samples[j], weff), band)
            out[i, j] = D[D.shape[0] - 1, D.shape[1] - 1]
    for i in range(n):
        for j in range(i + 1, n):
            out[j, i] = out[i, j]
    return out


@nb.njit(parallel=True, cache=True)
def _path_deviation(centers, samples, paths, lens):
    c, n, w = centers.shape[0], samples.shape[0], samples.shape[2]
    dev = np.zeros((c, n, w))
    for k in nb.prange(c * n):
        i = k // n
        j = k % n
        for p in range(lens[i, j]):
            r = paths[i, j, p, 0]
            s = paths[i, j, p, 1]
            for d in range(w):
                diff = centers[i, r, d] - samples[j, s, d]
                dev[i, j, d] += diff * diff
    return dev


def align_batch(centers, samples, weights: DimensionWeights, band=None):
    """Align every center against every sample.

    Returns ``(distances, paths, lengths, deviations)``: ``distances`` has
    shape ``(c, n)``; ``paths`` is a ``(c, n, a + b - 1, 2)`` array of 0-based
    ``(center_index, sample_index)`` pairs whose first ``lengths[i, j]`` rows
    are valid; ``deviations[i, j, d]`` is the unweighted squared difference on
    dimension ``d`` summed along path ``(i, j)``.
    """
    centers = np.ascontiguousarray(centers, dtype=float)
    samples = np.ascontiguousarray(samples, dtype=float)
    _check_dims(centers.shape[2], samples.shape[2], weights)
    return _align_all(centers, samples, weights.effective(), _band_arg(band, centers.shape[1], samples.shape[1]))


def path_deviation(centers, samples, paths, lengths) -> np.ndarray:
    """Per-dimension squared differences summed along stored paths, ``(c, n, w)``."""
    return _path_deviation(np.ascontiguousarray(centers, dtype=float),
                           np.ascontiguousarray(samples, dtype=float), paths, lengths)


def path_costs(centers, samples, weights: DimensionWeights, paths, lengths) -> np.ndarray:
    """Re-evaluate stored paths under (possibly new) centers and weights."""
    return path_deviation(centers, samples, paths, lengths) @ weights.effective()


def paired_distances(X, Y, weights: DimensionWeights, band=None) -> np.ndarray:
    """Distance between ``X[k]`` and ``Y[k]`` for each ``k``."""
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    _check_dims(X.shape[2], Y.shape[2], weights)
    return _paired_distances(X, Y, weights.effective(), _band_arg(band, X.shape[1], Y.shape[1]))


def pairwise_distances(samples, weights: DimensionWeights, band=None) -> np.ndarray:
    """Symmetric matrix of distances between all samples."""
    samples = np.ascontiguousarray(samples, dtype=float)
    _check_dims(samples.shape[2], samples.shape[2], weights)
    return _pairwise(samples, weights.effective(), _band_arg(band, samples.shape[1], samples.shape[1]))
