"""Delay-coordinate states and data-driven selection of their parameters.

A scalar (or multichannel) series is mapped to rows of lagged copies;
the lag count ``m`` and the lag stride ``tau_steps`` are chosen from the
series itself with average mutual information (first minimum) and the
nearest-neighbor expansion statistics E1/E2.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel

BACKWARD = "backward"
FORWARD = "forward"


@dataclass(frozen=True)
class DelayConfig:
    """Delay-map parameters: lag stride in samples, lag count, direction."""

    tau_steps: int
    m: int
    direction: str = BACKWARD

    def __post_init__(self):
        if self.tau_steps < 1:
            raise ValueError("tau_steps must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.direction not in (BACKWARD, FORWARD):
            raise ValueError(f"direction must be '{BACKWARD}' or '{FORWARD}'")

    @property
    def window(self) -> int:
        return (self.m - 1) * self.tau_steps


def tau_steps_from_time(tau: float, dt: float) -> int:
    """Convert a continuous delay (in time units) to integer sample steps."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(round(tau / dt))
    return max(steps, 1)


@dataclass(frozen=True)
class DelayState:
    """Rows of concatenated lagged observations, aligned to source times.

    Row ``j`` was built around source time index ``j + index_offset``; with
    backward lags the remaining blocks look into the past, with forward
    lags into the future.
    """

    values: np.ndarray
    index_offset: int
    n_channels: int = 1

    def __len__(self) -> int:
        return len(self.values)

    @property
    def source_indices(self) -> np.ndarray:
        return self.index_offset + np.arange(len(self.values))


def _embed(series: np.ndarray, cfg: DelayConfig) -> DelayState:
    n, c = series.shape
    need = cfg.window + 1
    if n < need:
        raise ValueError(
            f"series too short for delay embedding: need at least {need} samples "
            f"(m={cfg.m}, tau_steps={cfg.tau_steps}), got {n}"
        )
    n_valid = n - cfg.window
    offset = cfg.window if cfg.direction == BACKWARD else 0
    sign = -1 if cfg.direction == BACKWARD else 1
    anchors = offset + np.arange(n_valid)
    lags = sign * cfg.tau_steps * np.arange(cfg.m)
    rows = series[anchors[:, None] + lags[None, :]]  # (n_valid, m, c)
    return DelayState(rows.reshape(n_valid, cfg.m * c), offset, n_channels=c)


def delay_embed(series, cfg: DelayConfig) -> DelayState:
    """Embed a scalar series; row j is (s[t], s[t -/+ tau], ...)."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise ValueError("delay_embed expects a 1-D series")
    return _embed(series[:, None], cfg)


def vector_delay_embed(series, cfg: DelayConfig) -> DelayState:
    """Embed a multichannel series; rows concatenate whole-channel blocks.

    Row layout is (x(t), x(t-tau), ..., x(t-(m-1)tau)) with each block the
    full channel vector at that time (sign per direction).
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    if series.ndim != 2:
        raise ValueError("vector_delay_embed expects an (n, channels) matrix")
    return _embed(series, cfg)


# ---------------------------------------------------------------------------
# average mutual information


def _ami_numpy(series, max_lag, n_bins):
    n = series.shape[0]
    smin = series.min()
    width = series.max() - smin
    scale = n_bins / width
    bins = np.minimum((np.maximum(series - smin, 0.0) * scale).astype(np.int64), n_bins - 1)
    out = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        a = bins[: n - lag]
        b = bins[lag:]
        joint = np.bincount(a * n_bins + b, minlength=n_bins * n_bins).astype(np.float64)
        joint /= joint.sum()
        joint = joint.reshape(n_bins, n_bins)
        px = joint.sum(axis=1)
        py = joint.sum(axis=0)
        nz = joint > 0
        denom = px[:, None] * py[None, :]
        out[lag - 1] = np.sum(joint[nz] * np.log(joint[nz] / denom[nz]))
    return out


def _ami_loop(series, max_lag, n_bins):
    n = series.shape[0]
    smin = series.min()
    width = series.max() - smin
    scale = n_bins / width
    bins = np.empty(n, dtype=np.int64)
    for i in range(n):
        v = (series[i] - smin) * scale
        if v < 0.0:
            v = 0.0
        b = int(v)
        if b > n_bins - 1:
            b = n_bins - 1
        bins[i] = b
    out = np.empty(max_lag)
    joint = np.empty((n_bins, n_bins))
    for lag in range(1, max_lag + 1):
        joint[:, :] = 0.0
        pairs = n - lag
        for t in range(pairs):
            joint[bins[t], bins[t + lag]] += 1.0
        total = float(pairs)
        mi = 0.0
        for i in range(n_bins):
            px = 0.0
            for j in range(n_bins):
                px += joint[i, j]
            for j in range(n_bins):
                if joint[i, j] > 0.0:
                    py = 0.0
                    for k in range(n_bins):
                        py += joint[k, j]
                    p = joint[i, j] / total
                    mi += p * np.log(p * total * total / (px * py))
        out[lag - 1] = mi
    return out


_ami_numba = _accel.jit(_ami_loop)


def average_mutual_information(series, max_lag: int, n_bins: int = 32) -> np.ndarray:
    """AMI over lags 1..max_lag from an equal-width 2-D histogram (natural log)."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise ValueError("expected a 1-D series")
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    if len(series) <= max_lag + 1:
        raise ValueError("series length must exceed max_lag + 1")
    if series.max() == series.min():
        raise ValueError("degenerate series: zero range, AMI undefined")
    impl = _accel.pick(_ami_numba, _ami_numpy)
    return impl(series, int(max_lag), int(n_bins))


def select_tau(ami_curve) -> tuple[int, bool]:
    """First local minimum of the AMI curve, as a lag in sample steps.

    Returns (lag, fallback); fallback is True when no interior minimum
    exists and the argmin was used instead.
    """
    curve = np.asarray(ami_curve, dtype=np.float64)
    if len(curve) < 3:
        raise ValueError("AMI curve must have at least 3 entries")
    for i in range(1, len(curve) - 1):
        if curve[i] < curve[i - 1] and curve[i] <= curve[i + 1]:
            return i + 1, False
    warnings.warn("AMI curve has no interior local minimum; falling back to argmin")
    return int(np.argmin(curve)) + 1, True


# ---------------------------------------------------------------------------
# minimum embedding dimension via neighbor-expansion statistics
#
# For each trial dimension d: a(i,d) = ||y_{d+1}(i) - y_{d+1}(nn(i))||_inf /
# ||y_d(i) - y_d(nn(i))||_inf with nn(i) the max-norm nearest neighbor of
# y_d(i), i restricted to points embeddable at d+1. E(d) = mean_i a(i,d) and
# E1(d) = E(d+1)/E(d); E*(d) = mean_i |s(i+d*tau) - s(nn(i)+d*tau)| and
# E2(d) = E*(d+1)/E*(d).


def _cao_e_stats_numpy(series, tau, d, anchors):
    # forward embeddings y_d and y_{d+1} share the anchor index set
    n_pts = anchors.shape[0]
    yd = series[anchors[:, None] + tau * np.arange(d)[None, :]]
    yd1 = series[anchors[:, None] + tau * np.arange(d + 1)[None, :]]
    ratios = np.empty(n_pts)
    deltas = np.empty(n_pts)
    valid = np.zeros(n_pts, dtype=bool)
    chunk = max(1, int(2e7) // max(n_pts * d, 1))
    for start in range(0, n_pts, chunk):
        stop = min(start + chunk, n_pts)
        dist = np.abs(yd[start:stop, None, :] - yd[None, :, :]).max(axis=2)
        for r in range(start, stop):
            dist[r - start, r] = np.inf
        nn = dist.argmin(axis=1)  # first minimum: lowest index wins ties
        dmin = dist[np.arange(stop - start), nn]
        ok = dmin > 0.0
        num = np.abs(yd1[start:stop] - yd1[nn]).max(axis=1)
        ratios[start:stop] = np.where(ok, num / np.where(ok, dmin, 1.0), 0.0)
        deltas[start:stop] = np.abs(series[anchors[start:stop] + d * tau] - series[anchors[nn] + d * tau])
        valid[start:stop] = ok
    n_ok = int(valid.sum())
    return float(ratios[valid].sum()), float(deltas[valid].sum()), n_ok


def _cao_e_stats_loop(series, tau, d, anchors):
    n_pts = anchors.shape[0]
    ratios_sum = 0.0
    deltas_sum = 0.0
    n_ok = 0
    for i in range(n_pts):
        ai = anchors[i]
        best = np.inf
        nn = -1
        for j in range(n_pts):
            if j == i:
                continue
            aj = anchors[j]
            dist = 0.0
            for k in range(d):
                v = abs(series[ai + k * tau] - series[aj + k * tau])
                if v > dist:
                    dist = v
            if dist < best:  # strict: lowest index wins ties
                best = dist
                nn = j
        if best <= 0.0 or nn < 0:
            continue
        an = anchors[nn]
        num = 0.0
        for k in range(d + 1):
            v = abs(series[ai + k * tau] - series[an + k * tau])
            if v > num:
                num = v
        ratios_sum += num / best
        deltas_sum += abs(series[ai + d * tau] - series[an + d * tau])
        n_ok += 1
    return ratios_sum, deltas_sum, n_ok


_cao_e_stats_numba = _accel.jit(_cao_e_stats_loop)


def _cao_e_stats(series, tau, d, anchors):
    impl = _accel.pick(_cao_e_stats_numba, _cao_e_stats_numpy)
    rs, ds, n_ok = impl(series, tau, d, anchors)
    if n_ok == 0:
        raise ValueError("all points skipped: duplicate delay vectors everywhere")
    return rs / n_ok, ds / n_ok


def cao_curves(series, tau_steps: int, max_dim: int, subsample: int = 2000):
    """E1 and E2 statistics for trial dimensions 1..max_dim.

    Neighbor search is exact brute force over the anchor points; when more
    anchors are available than ``subsample``, an even stride of them is used.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise ValueError("expected a 1-D series")
    if tau_steps < 1 or max_dim < 1:
        raise ValueError("tau_steps and max_dim must be at least 1")
    # E1(max_dim) needs E(max_dim + 1), which compares y_{max_dim+2} pairs
    need = (max_dim + 1) * tau_steps + 2
    if len(series) < need:
        raise ValueError(f"series too short: need at least {need} samples")
    n_pts = len(series) - (max_dim + 1) * tau_steps
    if n_pts > subsample:
        anchors = np.unique(np.linspace(0, n_pts - 1, subsample).astype(np.int64))
    else:
        anchors = np.arange(n_pts, dtype=np.int64)
    e = np.empty(max_dim + 1)
    estar = np.empty(max_dim + 1)
    for d in range(1, max_dim + 2):
        e[d - 1], estar[d - 1] = _cao_e_stats(series, tau_steps, d, anchors)
    e1 = e[1:] / e[:-1]
    e2 = estar[1:] / estar[:-1]
    return e1, e2


def select_dim(e1, threshold: float = 0.95) -> tuple[int, bool]:
    """Smallest d whose E1 stays at or above threshold from d onward.

    Returns (m, fallback); fallback marks the argmax escape hatch used
    when no sustained crossing exists.
    """
    e1 = np.asarray(e1, dtype=np.float64)
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    above = e1 >= threshold
    for d in range(len(e1)):
        if above[d:].all():
            return d + 1, False
    warnings.warn("E1 never crosses the threshold in a sustained way; using argmax")
    return int(np.argmax(e1)) + 1, True
