"""Balanced partitioning of the delay state and paired empirical measures."""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform-weight point cloud; weights 1/n are implicit."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or len(samples) < 1:
            raise ValueError("samples must be a nonempty (n, d) matrix")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


@dataclass(frozen=True)
class MeasurePair:
    """Matched full-state and delay-space measures from one partition cell.

    Sample j of either side comes from the same time index, so the two
    clouds have equal size and stay in correspondence.
    """

    full: EmpiricalMeasure
    delayed: EmpiricalMeasure
    cell_id: int

    def __post_init__(self):
        if self.full.n != self.delayed.n:
            raise ValueError("full and delayed measures must have the same sample count")


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:  # all remaining points coincide with a chosen center
            centers[j] = points[rng.integers(n)]
            continue
        centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _greedy_assign_loop(order, labels, remaining, n, k):
    assigned = 0
    for f in range(order.shape[0]):
        flat = order[f]
        i = flat // k
        c = flat - i * k
        if labels[i] < 0 and remaining[c] > 0:
            labels[i] = c
            remaining[c] -= 1
            assigned += 1
            if assigned == n:
                break
    return labels


_greedy_assign_numba = _accel.jit(_greedy_assign_loop)


def _balanced_assignment(dists: np.ndarray, capacities: np.ndarray) -> np.ndarray:
    """Assign points to centers greedily by ascending distance under capacities.

    Ties break toward the lower point index, then the lower center index
    (stable sort over the row-major flattened distance matrix).
    """
    n, k = dists.shape
    order = np.argsort(dists, axis=None, kind="stable")
    labels = np.full(n, -1, dtype=np.int64)
    remaining = capacities.copy()
    impl = _accel.pick(_greedy_assign_numba, _greedy_assign_loop)
    return impl(order, labels, remaining, n, k)


def constrained_kmeans(points, k: int, seed: int = 0, max_iters: int = 100,
                       full_output: bool = False):
    """Balanced Lloyd iterations: k-means++ seeding, capacity-limited greedy
    assignment, centroid updates.

    Cell sizes are exactly ceil(N/k) for the first N mod k cells and
    floor(N/k) for the rest. Stops when labels repeat, when the
    within-cluster SSE stops decreasing, or at ``max_iters``. With
    ``full_output`` the per-iteration SSE history is returned as well.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be an (N, d) matrix")
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    rng = np.random.default_rng(seed)
    capacities = np.full(k, n // k, dtype=np.int64)
    capacities[: n % k] += 1

    centers = _kmeans_pp_init(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    sse_history = []
    prev_sse = np.inf
    p_sq = (points ** 2).sum(axis=1)
    for _ in range(max_iters):
        dists = p_sq[:, None] + (centers ** 2).sum(axis=1)[None, :] - 2.0 * (points @ centers.T)
        new_labels = _balanced_assignment(dists, capacities)
        new_centers = np.empty_like(centers)
        for c in range(k):
            new_centers[c] = points[new_labels == c].mean(axis=0)
        sse = float(((points - new_centers[new_labels]) ** 2).sum())
        if sse > prev_sse:  # greedy assignment is not guaranteed monotone; keep the better state
            break
        centers = new_centers
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        sse_history.append(sse)
        if converged or sse == prev_sse:
            break
        prev_sse = sse
    if full_output:
        return labels, centers, np.asarray(sse_history)
    return labels, centers


def build_measure_pairs(full_states, delay_states, labels) -> list[MeasurePair]:
    """Group matched rows by cell label, preserving time order within cells."""
    full_states = np.asarray(full_states, dtype=np.float64)
    delay_states = np.asarray(delay_states, dtype=np.float64)
    labels = np.asarray(labels)
    if len(full_states) != len(delay_states) or len(labels) != len(full_states):
        raise ValueError("full_states, delay_states and labels must have matching lengths")
    if len(labels) and (labels.min() < 0):
        raise ValueError("labels must be nonnegative cell indices")
    pairs = []
    for cell in range(int(labels.max()) + 1 if len(labels) else 0):
        mask = labels == cell
        if not mask.any():
            warnings.warn(f"cell {cell} is empty and was dropped")
            continue
        pairs.append(MeasurePair(
            full=EmpiricalMeasure(full_states[mask]),
            delayed=EmpiricalMeasure(delay_states[mask]),
            cell_id=cell,
        ))
    return pairs


def pushforward_empirical(measure: EmpiricalMeasure, map_fn) -> EmpiricalMeasure:
    """Apply a map to every sample; weights stay uniform.

    ``map_fn`` takes the whole (n, d) sample matrix and returns (n, e).
    """
    out = np.asarray(map_fn(measure.samples), dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    if len(out) != measure.n:
        raise ValueError("map changed the number of samples")
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        raise FloatingPointError(f"map produced non-finite output at sample {int(np.argmax(bad))}")
    return EmpiricalMeasure(out)
