"""Kernel discrepancies between empirical measures, and pointwise MSE.

The squared maximum mean discrepancy is the biased V-statistic (diagonal
terms included), which is smooth and nonnegative for the two kernels used
here: the negative-distance kernel k(x,y) = -||x-y|| (energy distance) and
the Gaussian kernel k(x,y) = exp(-||x-y||^2 / 2 sigma^2).
"""

from dataclasses import dataclass

import numpy as np

from . import _accel

ENERGY = "energy"
GAUSSIAN = "gaussian"
_KERNEL_CODES = {ENERGY: 0, GAUSSIAN: 1}

_CLAMP = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    sigma: float | None = None

    def __post_init__(self):
        kind = self.kind.strip().lower()
        object.__setattr__(self, "kind", kind)
        if kind not in _KERNEL_CODES:
            raise ValueError(f"kernel kind must be '{ENERGY}' or '{GAUSSIAN}', got {self.kind!r}")
        if kind == GAUSSIAN:
            if self.sigma is None or not np.isfinite(self.sigma) or self.sigma <= 0:
                raise ValueError("gaussian kernel needs finite sigma > 0")

    @staticmethod
    def energy() -> "KernelSpec":
        return KernelSpec(ENERGY)

    @staticmethod
    def gaussian(sigma: float) -> "KernelSpec":
        return KernelSpec(GAUSSIAN, float(sigma))


def _as_samples(measure) -> np.ndarray:
    samples = getattr(measure, "samples", measure)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2 or len(samples) == 0:
        raise ValueError("measure must contain at least one sample")
    return samples


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate the kernel on a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    sq = float(((x - y) ** 2).sum())
    if spec.kind == ENERGY:
        return -np.sqrt(sq)
    return float(np.exp(-sq / (2.0 * spec.sigma ** 2)))


# ---------------------------------------------------------------------------
# kernel matrices and sums
#
# The cross-term sum is evaluated as the half-sum of a row-major and a
# column-major pass so that mmd_squared(mu, nu) == mmd_squared(nu, mu)
# bit-for-bit.


def _kernel_matrix_numpy(code, sigma, xs, ys):
    sq = ((xs[:, None, :] - ys[None, :, :]) ** 2).sum(axis=2)
    if code == 0:
        return -np.sqrt(sq)
    return np.exp(-sq / (2.0 * sigma * sigma))


def _mmd2_numpy(code, sigma, xs, ys):
    a, b = len(xs), len(ys)
    gxx = _kernel_matrix_numpy(code, sigma, xs, xs)
    gyy = _kernel_matrix_numpy(code, sigma, ys, ys)
    gxy = _kernel_matrix_numpy(code, sigma, xs, ys)
    cross = 0.5 * (gxy.sum() + gxy.T.sum())
    return gxx.sum() / (a * a) + gyy.sum() / (b * b) - 2.0 * cross / (a * b)


def _mmd2_loop(code, sigma, xs, ys):
    a, b = xs.shape[0], ys.shape[0]
    d = xs.shape[1]
    gxy = np.empty((a, b))
    sxx = 0.0
    for i in range(a):
        for j in range(a):
            sq = 0.0
            for l in range(d):
                v = xs[i, l] - xs[j, l]
                sq += v * v
            sxx += -np.sqrt(sq) if code == 0 else np.exp(-sq / (2.0 * sigma * sigma))
    syy = 0.0
    for i in range(b):
        for j in range(b):
            sq = 0.0
            for l in range(d):
                v = ys[i, l] - ys[j, l]
                sq += v * v
            syy += -np.sqrt(sq) if code == 0 else np.exp(-sq / (2.0 * sigma * sigma))
    for i in range(a):
        for j in range(b):
            sq = 0.0
            for l in range(d):
                v = xs[i, l] - ys[j, l]
                sq += v * v
            gxy[i, j] = -np.sqrt(sq) if code == 0 else np.exp(-sq / (2.0 * sigma * sigma))
    acc_row = 0.0
    for i in range(a):
        for j in range(b):
            acc_row += gxy[i, j]
    acc_col = 0.0
    for j in range(b):
        for i in range(a):
            acc_col += gxy[i, j]
    cross = 0.5 * (acc_row + acc_col)
    return sxx / (a * a) + syy / (b * b) - 2.0 * cross / (a * b)


_mmd2_numba = _accel.jit(_mmd2_loop)


def _grad_numpy(code, sigma, xs, ys):
    a, b = len(xs), len(ys)
    dyy = ys[:, None, :] - ys[None, :, :]
    dyx = ys[:, None, :] - xs[None, :, :]
    nyy = np.sqrt((dyy ** 2).sum(axis=2))
    nyx = np.sqrt((dyx ** 2).sum(axis=2))
    if code == 0:
        # grad_u of -||u-v|| is -(u-v)/||u-v||, subgradient 0 at u = v
        safe_yy = np.where(nyy == 0.0, 1.0, nyy)
        safe_yx = np.where(nyx == 0.0, 1.0, nyx)
        gyy = np.where(nyy[:, :, None] > 0.0, -dyy / safe_yy[:, :, None], 0.0)
        gyx = np.where(nyx[:, :, None] > 0.0, -dyx / safe_yx[:, :, None], 0.0)
    else:
        s2 = sigma * sigma
        kyy = np.exp(-(nyy ** 2) / (2.0 * s2))
        kyx = np.exp(-(nyx ** 2) / (2.0 * s2))
        gyy = -kyy[:, :, None] * dyy / s2
        gyx = -kyx[:, :, None] * dyx / s2
    return (2.0 / (b * b)) * gyy.sum(axis=1) - (2.0 / (a * b)) * gyx.sum(axis=1)


def _grad_loop(code, sigma, xs, ys):
    a, b = xs.shape[0], ys.shape[0]
    d = xs.shape[1]
    out = np.zeros((b, d))
    s2 = sigma * sigma
    for l in range(b):
        for j in range(b):
            sq = 0.0
            for q in range(d):
                v = ys[l, q] - ys[j, q]
                sq += v * v
            if sq > 0.0:
                if code == 0:
                    w = -1.0 / np.sqrt(sq)
                else:
                    w = -np.exp(-sq / (2.0 * s2)) / s2
                coef = 2.0 / (b * b) * w
                for q in range(d):
                    out[l, q] += coef * (ys[l, q] - ys[j, q])
        for i in range(a):
            sq = 0.0
            for q in range(d):
                v = ys[l, q] - xs[i, q]
                sq += v * v
            if sq > 0.0:
                if code == 0:
                    w = -1.0 / np.sqrt(sq)
                else:
                    w = -np.exp(-sq / (2.0 * s2)) / s2
                coef = -2.0 / (a * b) * w
                for q in range(d):
                    out[l, q] += coef * (ys[l, q] - xs[i, q])
    return out


_grad_numba = _accel.jit(_grad_loop)


def _mmd2_raw(spec: KernelSpec, xs: np.ndarray, ys: np.ndarray) -> float:
    code = _KERNEL_CODES[spec.kind]
    sigma = spec.sigma if spec.sigma is not None else 1.0
    impl = _accel.pick(_mmd2_numba, _mmd2_numpy)
    value = float(impl(code, sigma, xs, ys))
    if -_CLAMP < value < 0.0:
        return 0.0
    return value


def _mmd_grad_raw(spec: KernelSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    code = _KERNEL_CODES[spec.kind]
    sigma = spec.sigma if spec.sigma is not None else 1.0
    impl = _accel.pick(_grad_numba, _grad_numpy)
    return impl(code, sigma, xs, ys)


def mmd_squared(spec: KernelSpec, mu, nu) -> float:
    """Squared MMD between two empirical measures (biased V-statistic).

    Values within 1e-10 below zero are clamped to exactly zero.
    """
    xs = _as_samples(mu)
    ys = _as_samples(nu)
    if xs.shape[1] != ys.shape[1]:
        raise ValueError(f"ambient dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
    return _mmd2_raw(spec, xs, ys)


def mmd_grad_second(spec: KernelSpec, mu, nu) -> np.ndarray:
    """Gradient of mmd_squared with respect to each sample of ``nu``.

    The energy kernel uses subgradient 0 at coincident pairs.
    """
    xs = _as_samples(mu)
    ys = _as_samples(nu)
    if xs.shape[1] != ys.shape[1]:
        raise ValueError(f"ambient dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
    return _mmd_grad_raw(spec, xs, ys)


def mse(pred, target) -> float:
    """Mean over rows of the squared Euclidean row difference."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.ndim == 1:
        pred = pred[:, None]
        target = target[:, None]
    return float(((pred - target) ** 2).sum(axis=1).mean())
