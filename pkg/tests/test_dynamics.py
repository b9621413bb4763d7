import math

import numpy as np
import pytest

from delayrecon import dynamics
from delayrecon.dynamics import (add_gaussian_noise, gaussian_noise_matrix,
                                 lorenz63, lotka_volterra4, rk4_step, rossler,
                                 simulate, vector_field)


def test_vector_field_lorenz_origin_fixed_point():
    assert np.array_equal(vector_field(lorenz63(), np.zeros(3)), np.zeros(3))


def test_vector_field_lv_extinction_fixed_point():
    assert np.array_equal(vector_field(lotka_volterra4(), np.zeros(4)), np.zeros(4))


def test_vector_field_lorenz_hand_evaluated():
    # a=(10,28,8/3) at (1,1,1): (10*(1-1), 1*(28-1)-1, 1*1-8/3)
    out = vector_field(lorenz63(), np.ones(3))
    assert np.allclose(out, [0.0, 26.0, -5.0 / 3.0], atol=1e-14)


def test_vector_field_rossler_hand_evaluated():
    # b=(0.1,0.1,14) at (1,2,3): (-2-3, 1+0.2, 0.1+3*(1-14))
    out = vector_field(rossler(), np.array([1.0, 2.0, 3.0]))
    assert np.allclose(out, [-5.0, 1.2, 0.1 + 3.0 * (1.0 - 14.0)], atol=1e-14)


def test_vector_field_dimension_mismatch():
    with pytest.raises(ValueError):
        vector_field(lorenz63(), np.zeros(4))


def test_rk4_linear_decay_matches_taylor_oracle():
    # one RK4 step on xdot = -x equals the degree-4 Taylor truncation of e^(-dt)
    dt = 0.1
    z = -dt
    expected = sum(z ** k / math.factorial(k) for k in range(5))
    out = rk4_step(lambda x: -x, np.array([1.0]), dt)
    assert abs(out[0] - expected) < 1e-15
    assert abs(out[0] - 0.90483750) < 5e-9


def test_rk4_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        rk4_step(lorenz63(), np.zeros(3), 0.0)


def test_rk4_preserves_lorenz_fixed_point():
    out = rk4_step(lorenz63(), np.zeros(3), 0.01)
    assert np.array_equal(out, np.zeros(3))


def test_rk4_fourth_order_convergence():
    # halving dt shrinks the terminal error about 16x against a dt/8 reference
    system = lorenz63()
    x0 = simulate(system, (1.0, 1.0, 1.0), 0.001, 20_000, 1).states[0]  # on attractor

    def terminal(dt):
        n = round(1.0 / dt)
        return simulate(system, x0, dt, 0, n + 1).states[-1]

    ref = terminal(0.01 / 8)
    err1 = np.linalg.norm(terminal(0.01) - ref)
    err2 = np.linalg.norm(terminal(0.005) - ref)
    assert 12.0 < err1 / err2 < 20.0


def test_simulate_first_row_is_x0_without_transient():
    traj = simulate(lorenz63(), (1.0, 1.0, 1.0), 0.01, 0, 3)
    assert len(traj) == 3
    assert np.array_equal(traj.states[0], [1.0, 1.0, 1.0])


def test_simulate_deterministic():
    a = simulate(lorenz63(), (1.0, 1.0, 1.0), 0.01, 100, 500)
    b = simulate(lorenz63(), (1.0, 1.0, 1.0), 0.01, 100, 500)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.times, b.times)


def test_simulate_long_run_stays_in_attractor_box():
    traj = simulate(lorenz63(), (1.0, 1.0, 1.0), 0.01, 10_000, 100_000)
    x, y, z = traj.states.T
    assert np.abs(x).max() <= 25.0
    assert np.abs(y).max() <= 35.0
    assert z.min() >= 0.0 and z.max() <= 55.0


def test_simulate_divergence_names_step():
    # r x (1 - sum(alpha x)) with alpha = -I blows up in finite time
    unstable = lotka_volterra4(r=(5.0, 5.0, 5.0, 5.0), alpha=-np.eye(4))
    with pytest.raises(FloatingPointError, match=r"step \d+"):
        simulate(unstable, (1.0, 1.0, 1.0, 1.0), 0.05, 0, 10_000)


def test_simulate_rejects_bad_counts():
    with pytest.raises(ValueError):
        simulate(lorenz63(), (1.0, 1.0, 1.0), 0.01, 0, 0)
    with pytest.raises(ValueError):
        simulate(lorenz63(), (1.0, 1.0, 1.0), -0.01, 0, 5)


def _toy_traj(n=50, d=3):
    rng = np.random.default_rng(5)
    return dynamics.Trajectory(np.arange(n) * 0.1, rng.normal(size=(n, d)))


def test_noise_zero_variance_is_identity():
    traj = _toy_traj()
    out = add_gaussian_noise(traj, np.zeros(3), seed=1)
    assert np.array_equal(out.states, traj.states)


def test_noise_same_seed_reproducible():
    traj = _toy_traj()
    a = add_gaussian_noise(traj, [0.5, 0.1, 0.9], seed=7)
    b = add_gaussian_noise(traj, [0.5, 0.1, 0.9], seed=7)
    assert np.array_equal(a.states, b.states)
    c = add_gaussian_noise(traj, [0.5, 0.1, 0.9], seed=8)
    assert not np.array_equal(a.states, c.states)


def test_noise_rejects_negative_variance():
    with pytest.raises(ValueError):
        add_gaussian_noise(_toy_traj(), [-0.1, 0.1, 0.1], seed=0)


def test_noise_variance_law_of_large_numbers():
    # 10^6 draws at variance 0.1: empirical variance within 2%
    noise = gaussian_noise_matrix(seed=3, row_offset=0, n_rows=333_334,
                                  variances=[0.1, 0.1, 0.1])
    var = noise.ravel().var()
    assert abs(var - 0.1) < 0.002
    assert abs(noise.mean()) < 0.002


def test_noise_commutes_with_row_slicing():
    traj = _toy_traj(n=200)
    whole = add_gaussian_noise(traj, [0.3, 0.2, 0.1], seed=11)
    part = dynamics.Trajectory(traj.times[60:150], traj.states[60:150])
    sliced = add_gaussian_noise(part, [0.3, 0.2, 0.1], seed=11, row_offset=60)
    assert np.array_equal(whole.states[60:150], sliced.states)
