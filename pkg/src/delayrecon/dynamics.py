"""Benchmark ODE systems, fixed-step RK4 integration, observation noise."""

from dataclasses import dataclass, field

import numpy as np

from . import _accel

LORENZ63 = "lorenz63"
ROSSLER = "rossler"
LOTKA_VOLTERRA4 = "lotka_volterra4"

_KIND_CODES = {LORENZ63: 0, ROSSLER: 1, LOTKA_VOLTERRA4: 2}
_STATE_DIMS = {LORENZ63: 3, ROSSLER: 3, LOTKA_VOLTERRA4: 4}

DIVERGENCE_BOUND = 1e8

# Standard chaotic parameter choices.
DEFAULT_LORENZ_A = (10.0, 28.0, 8.0 / 3.0)
DEFAULT_ROSSLER_B = (0.1, 0.1, 14.0)
DEFAULT_LV_R = (1.0, 0.72, 1.53, 1.27)
DEFAULT_LV_ALPHA = (
    (1.0, 1.09, 1.52, 0.0),
    (0.0, 1.0, 0.44, 1.36),
    (2.33, 0.0, 1.0, 0.47),
    (1.21, 0.51, 0.35, 1.0),
)


@dataclass(frozen=True)
class OdeSystem:
    """One of the three benchmark systems, with its parameter vector.

    ``params`` is flat: Lorenz (a1,a2,a3); Rossler (b1,b2,b3);
    Lotka-Volterra growth r (4 entries) followed by the interaction
    matrix alpha in row-major order (16 entries).
    """

    kind: str
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown system kind {self.kind!r}")
        object.__setattr__(self, "params", np.asarray(self.params, dtype=np.float64))

    @property
    def dim(self) -> int:
        return _STATE_DIMS[self.kind]


def lorenz63(a=DEFAULT_LORENZ_A) -> OdeSystem:
    return OdeSystem(LORENZ63, np.asarray(a, dtype=np.float64))


def rossler(b=DEFAULT_ROSSLER_B) -> OdeSystem:
    return OdeSystem(ROSSLER, np.asarray(b, dtype=np.float64))


def lotka_volterra4(r=DEFAULT_LV_R, alpha=DEFAULT_LV_ALPHA) -> OdeSystem:
    r = np.asarray(r, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if r.shape != (4,) or alpha.shape != (4, 4):
        raise ValueError("lotka_volterra4 expects r of shape (4,) and alpha of shape (4, 4)")
    return OdeSystem(LOTKA_VOLTERRA4, np.concatenate([r, alpha.ravel()]))


def system_from_name(name: str) -> OdeSystem:
    """Build a benchmark system with its default chaotic parameters."""
    name = name.strip().lower()
    aliases = {"lorenz": LORENZ63, "lorenz63": LORENZ63, "rossler": ROSSLER,
               "lv4": LOTKA_VOLTERRA4, "lotka_volterra4": LOTKA_VOLTERRA4,
               "lotka-volterra": LOTKA_VOLTERRA4}
    if name not in aliases:
        raise ValueError(f"unknown system {name!r}; expected one of {sorted(set(aliases))}")
    kind = aliases[name]
    if kind == LORENZ63:
        return lorenz63()
    if kind == ROSSLER:
        return rossler()
    return lotka_volterra4()


@dataclass(frozen=True)
class Trajectory:
    """States of one simulated orbit on a uniform time grid (rows = time)."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2 or times.ndim != 1 or len(times) != len(states):
            raise ValueError("times must be 1-D and match the state row count")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def __len__(self) -> int:
        return len(self.states)


# ---------------------------------------------------------------------------
# vector fields


def _vf_numpy(code: int, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    if code == 0:  # Lorenz-63
        out[0] = params[0] * (x[1] - x[0])
        out[1] = x[0] * (params[1] - x[2]) - x[1]
        out[2] = x[0] * x[1] - params[2] * x[2]
    elif code == 1:  # Rossler
        out[0] = -x[1] - x[2]
        out[1] = x[0] + params[0] * x[1]
        out[2] = params[1] + x[2] * (x[0] - params[2])
    else:  # 4-species competitive Lotka-Volterra
        for i in range(4):
            s = 0.0
            for j in range(4):
                s += params[4 + 4 * i + j] * x[j]
            out[i] = params[i] * x[i] * (1.0 - s)
    return out


_vf_numba = _accel.jit(_vf_numpy)


def vector_field(system: OdeSystem, x) -> np.ndarray:
    """Evaluate dx/dt for the system at state ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (system.dim,):
        raise ValueError(f"state must have shape ({system.dim},), got {x.shape}")
    return _vf_numpy(_KIND_CODES[system.kind], system.params, x)


def _rhs_of(system):
    """Normalize an OdeSystem or a plain callable f(x) -> dx/dt."""
    if isinstance(system, OdeSystem):
        code = _KIND_CODES[system.kind]
        params = system.params
        return lambda x: _vf_numpy(code, params, x)
    if callable(system):
        return lambda x: np.asarray(system(x), dtype=np.float64)
    raise TypeError("system must be an OdeSystem or a callable f(x)")


def rk4_step(system, x, dt: float) -> np.ndarray:
    """One classical 4-stage Runge-Kutta step of size ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = _rhs_of(system)
    x = np.asarray(x, dtype=np.float64)
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite state after RK4 step")
    return out


def _simulate_loop_numpy(code, params, x0, dt, n_transient, n_keep):
    x = x0.copy()
    states = np.empty((n_keep, x0.shape[0]))
    diverged_at = -1
    k2in = np.empty_like(x)
    for step in range(n_transient + n_keep):
        if step >= n_transient:
            states[step - n_transient] = x
        k1 = _vf_numpy(code, params, x)
        for i in range(x.shape[0]):
            k2in[i] = x[i] + 0.5 * dt * k1[i]
        k2 = _vf_numpy(code, params, k2in)
        for i in range(x.shape[0]):
            k2in[i] = x[i] + 0.5 * dt * k2[i]
        k3 = _vf_numpy(code, params, k2in)
        for i in range(x.shape[0]):
            k2in[i] = x[i] + dt * k3[i]
        k4 = _vf_numpy(code, params, k2in)
        ok = True
        for i in range(x.shape[0]):
            x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not (abs(x[i]) <= DIVERGENCE_BOUND):  # catches NaN as well
                ok = False
        if not ok:
            diverged_at = step
            break
    return states, diverged_at


def _simulate_loop_for_numba(code, params, x0, dt, n_transient, n_keep):
    x = x0.copy()
    states = np.empty((n_keep, x0.shape[0]))
    diverged_at = -1
    k2in = np.empty_like(x)
    for step in range(n_transient + n_keep):
        if step >= n_transient:
            states[step - n_transient] = x
        k1 = _vf_numba(code, params, x)
        for i in range(x.shape[0]):
            k2in[i] = x[i] + 0.5 * dt * k1[i]
        k2 = _vf_numba(code, params, k2in)
        for i in range(x.shape[0]):
            k2in[i] = x[i] + 0.5 * dt * k2[i]
        k3 = _vf_numba(code, params, k2in)
        for i in range(x.shape[0]):
            k2in[i] = x[i] + dt * k3[i]
        k4 = _vf_numba(code, params, k2in)
        ok = True
        for i in range(x.shape[0]):
            x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not (abs(x[i]) <= DIVERGENCE_BOUND):
                ok = False
        if not ok:
            diverged_at = step
            break
    return states, diverged_at


_simulate_loop_numba = _accel.jit(_simulate_loop_for_numba) if _accel.NUMBA_AVAILABLE else None


def simulate(system: OdeSystem, x0, dt: float, n_transient: int, n_keep: int) -> Trajectory:
    """Integrate with RK4, discard the first ``n_transient`` steps, keep the rest.

    Row 0 of the result is the state after the transient (equal to ``x0``
    when ``n_transient`` is 0). Raises on divergence, naming the offending
    step index counted from the start of integration.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_keep < 1:
        raise ValueError("n_keep must be at least 1")
    if n_transient < 0:
        raise ValueError("n_transient must be nonnegative")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (system.dim,):
        raise ValueError(f"x0 must have shape ({system.dim},), got {x0.shape}")
    loop = _accel.pick(_simulate_loop_numba, _simulate_loop_numpy)
    code = _KIND_CODES[system.kind]
    states, diverged_at = loop(code, system.params, x0, float(dt), int(n_transient), int(n_keep))
    if diverged_at >= 0:
        raise FloatingPointError(
            f"simulation diverged (|component| > {DIVERGENCE_BOUND:g}) at step {diverged_at}"
        )
    times = (n_transient + np.arange(n_keep, dtype=np.float64)) * dt
    return Trajectory(times, states)


# ---------------------------------------------------------------------------
# counter-based Gaussian observation noise
#
# Each entry's noise value is a pure function of (seed, absolute row, col),
# so noising a row slice with the matching row_offset reproduces the same
# values as slicing a noised trajectory.

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix_numpy(z):
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        z = (z + _GAMMA) & _MASK
        z = ((z ^ (z >> np.uint64(30))) * _M1) & _MASK
        z = ((z ^ (z >> np.uint64(27))) * _M2) & _MASK
        return z ^ (z >> np.uint64(31))


def _noise_matrix_numpy(seed, row_offset, n_rows, sigmas):
    d = sigmas.shape[0]
    rows = (np.uint64(row_offset) + np.arange(n_rows, dtype=np.uint64))[:, None]
    cols = np.arange(d, dtype=np.uint64)[None, :]
    h = _mix_numpy(np.uint64(seed))
    h = _mix_numpy(h ^ rows)
    h = _mix_numpy(h ^ cols)
    u1 = 1.0 - (_mix_numpy(h ^ np.uint64(1)) >> np.uint64(11)).astype(np.float64) * _INV53
    u2 = (_mix_numpy(h ^ np.uint64(2)) >> np.uint64(11)).astype(np.float64) * _INV53
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return z * sigmas[None, :]


def _noise_matrix_loop(seed, row_offset, n_rows, sigmas):
    d = sigmas.shape[0]
    out = np.empty((n_rows, d))
    mask = np.uint64(0xFFFFFFFFFFFFFFFF)
    gamma = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)

    def mix(z):
        z = (z + gamma) & mask
        z = ((z ^ (z >> np.uint64(30))) * m1) & mask
        z = ((z ^ (z >> np.uint64(27))) * m2) & mask
        return z ^ (z >> np.uint64(31))

    hs = mix(np.uint64(seed))
    for r in range(n_rows):
        hr = mix(hs ^ (np.uint64(row_offset) + np.uint64(r)))
        for c in range(d):
            hc = mix(hr ^ np.uint64(c))
            u1 = 1.0 - np.float64(mix(hc ^ np.uint64(1)) >> np.uint64(11)) * _INV53
            u2 = np.float64(mix(hc ^ np.uint64(2)) >> np.uint64(11)) * _INV53
            out[r, c] = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2) * sigmas[c]
    return out


_noise_matrix_numba = _accel.jit(_noise_matrix_loop)


def gaussian_noise_matrix(seed: int, row_offset: int, n_rows: int, variances) -> np.ndarray:
    """Counter-based N(0, sigma_j^2) noise, reproducible per (seed, row, col)."""
    variances = np.asarray(variances, dtype=np.float64)
    if np.any(variances < 0):
        raise ValueError("variances must be nonnegative")
    sigmas = np.sqrt(variances)
    impl = _accel.pick(_noise_matrix_numba, _noise_matrix_numpy)
    return impl(np.uint64(seed), int(row_offset), int(n_rows), sigmas)


def add_gaussian_noise(traj: Trajectory, variances, seed: int, row_offset: int = 0) -> Trajectory:
    """Add independent per-dimension Gaussian noise to every state entry.

    ``row_offset`` shifts the per-row counter so that noising a slice of a
    trajectory can reproduce the corresponding rows of the noised whole.
    """
    variances = np.asarray(variances, dtype=np.float64)
    if variances.shape != (traj.states.shape[1],):
        raise ValueError(
            f"variances must have shape ({traj.states.shape[1]},), got {variances.shape}"
        )
    noise = gaussian_noise_matrix(seed, row_offset, len(traj), variances)
    return Trajectory(traj.times, traj.states + noise)
