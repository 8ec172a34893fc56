import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from saddleflow import oracle
from saddleflow.disturbances import DisturbanceSignal
from saddleflow.dynamics import (
    IntegratorConfig,
    compute_K1,
    integrate,
    k_parameters,
    lyapunov_value,
    nominal_flow,
    projected_velocity,
    saddle_velocity_interval,
    step,
)
from saddleflow.errors import InvalidInput, NegativePrimal, NonFinite
from saddleflow.experiments import random_lp
from saddleflow.lp_model import PerturbationVector, PrimalDualState, StandardFormLP, kkt_residual, perturbed_program

ORIGIN = PrimalDualState([0.0, 0.0], [0.0])


def test_nominal_flow_examples(lp1, lp1_star):
    assert_allclose(nominal_flow(lp1, lp1_star), [0.0, -1.0])
    assert_allclose(nominal_flow(lp1, ORIGIN), [0.0, -1.0])


def test_projected_velocity_examples(lp1, lp1_star):
    xdot, zdot = projected_velocity(lp1, lp1_star)
    assert_array_equal(xdot, [0.0, 0.0])
    assert_array_equal(zdot, [0.0])
    xdot, zdot = projected_velocity(lp1, ORIGIN)
    assert_array_equal(xdot, [0.0, 0.0])
    assert_array_equal(zdot, [-1.0])


def test_projected_velocity_adds_disturbance(lp1):
    xdot, zdot = projected_velocity(lp1, ORIGIN, PerturbationVector([0.5, 0.5], [0.25]))
    assert_allclose(xdot, [0.5, 0.0])
    assert_allclose(zdot, [-0.75])


def test_projected_velocity_rejects_negative_state(lp1):
    with pytest.raises(NegativePrimal):
        projected_velocity(lp1, PrimalDualState([-0.1, 0.0], [0.0]))


def test_interval_example(lp1):
    lo, hi = saddle_velocity_interval(lp1, 2.0, ORIGIN)
    assert (lo[1], hi[1]) == (-1.0, 1.0)
    assert lo[2] == hi[2] == -1.0


def test_interval_negative_and_positive_components(lp1):
    lo, hi = saddle_velocity_interval(lp1, 3.0, PrimalDualState([-1.0, 2.0], [0.0]))
    f = nominal_flow(lp1, PrimalDualState([-1.0, 2.0], [0.0]))
    assert lo[0] == hi[0] == f[0] + 3.0
    assert lo[1] == hi[1] == f[1]


def test_k1_closed_form(lp1, lp1_star):
    assert compute_K1(lp1, lp1_star, 0.5) == pytest.approx(1.0 + math.sqrt(3.0))


def test_k1_bounds_flow_on_ball(lp1, lp1_star):
    rng = np.random.default_rng(3)
    K1 = compute_K1(lp1, lp1_star, 0.5)
    for _ in range(500):
        d = rng.standard_normal(3)
        d *= rng.uniform(0, 1) / np.linalg.norm(d)
        s = PrimalDualState(lp1_star.x + d[:2], lp1_star.z + d[2:])
        assert np.abs(nominal_flow(lp1, s)).max() <= K1 + 1e-12


def test_lyapunov_value(lp1_star):
    assert lyapunov_value(ORIGIN, lp1_star) == 1.0


def test_step_example(lp1):
    s = step(lp1, ORIGIN, 0.01)
    assert_array_equal(s.x, [0.0, 0.0])
    assert_allclose(s.z, [-0.01])


def test_step_clamps_at_zero(lp1):
    s = step(lp1, PrimalDualState([0.001, 0.001], [5.0]), 0.01)
    assert (s.x >= 0).all()
    assert s.x[1] == 0.0


def test_config_validation():
    with pytest.raises(InvalidInput):
        IntegratorConfig(dt=0.0)
    with pytest.raises(InvalidInput):
        IntegratorConfig(dt=0.5)
    with pytest.raises(InvalidInput):
        IntegratorConfig(record_every=0)
    assert IntegratorConfig(dt=0.01, t_max=1.0).n_steps == 100


def test_integrate_lp1(lp1):
    traj = integrate(lp1, ORIGIN, IntegratorConfig(dt=0.01, t_max=100))
    assert traj.residuals[-1] <= 1e-3
    assert_allclose(traj.xs[-1], [1.0, 0.0], atol=1e-2)
    assert_allclose(traj.zs[-1], [-1.0], atol=1e-2)
    assert traj.time_to_tol == pytest.approx(traj.times[-1])


def test_start_at_solution_is_constant(lp1, lp1_star):
    traj = integrate(lp1, lp1_star, IntegratorConfig(dt=0.01, t_max=5, stop_tol=0.0), star=lp1_star)
    assert_array_equal(traj.xs, np.tile(lp1_star.x, (len(traj), 1)))
    assert_array_equal(traj.zs, np.tile(lp1_star.z, (len(traj), 1)))
    assert (traj.lyapunov == 0).all()


def test_stop_at_start(lp1, lp1_star):
    traj = integrate(lp1, lp1_star, IntegratorConfig())
    assert traj.steps == 0
    assert traj.time_to_tol == 0.0
    assert len(traj) == 1


def test_record_every_keeps_last_step(lp1):
    traj = integrate(lp1, ORIGIN, IntegratorConfig(dt=0.01, t_max=1.05, stop_tol=0.0, record_every=10))
    assert traj.steps == 105
    assert_allclose(traj.times[-2:], [1.0, 1.05])


def test_constant_disturbance_reaches_perturbed_solution(lp1):
    w = PerturbationVector([0.1, -0.1], [0.2])
    pert = perturbed_program(lp1, w)
    traj = integrate(lp1, ORIGIN, IntegratorConfig(dt=0.01, t_max=200), DisturbanceSignal.constant(w), target=pert)
    assert kkt_residual(pert, traj.terminal) <= 1e-3
    assert_allclose(traj.w_x[0], w.w_x)


def test_nonfinite_raises():
    lp = StandardFormLP(np.array([[30.0, 30.0]]), [1.0], [1.0, 1.0])
    with pytest.raises(NonFinite), np.errstate(over="ignore", invalid="ignore"):
        integrate(lp, PrimalDualState([1e307, 0.0], [0.0]), IntegratorConfig(dt=0.1, t_max=1))


def test_deterministic(lp1):
    cfg = IntegratorConfig(dt=0.01, t_max=20)
    dist = DisturbanceSignal.seeded_noise(2, 1, amplitude=0.1, dt=0.01, seed=5)
    a, b = integrate(lp1, ORIGIN, cfg, dist), integrate(lp1, ORIGIN, cfg, dist)
    assert_array_equal(a.xs, b.xs)
    assert_array_equal(a.zs, b.zs)


def test_csv_layout(tmp_path, lp1, lp1_star):
    traj = integrate(lp1, ORIGIN, IntegratorConfig(dt=0.01, t_max=0.05, stop_tol=0.0), star=lp1_star)
    path = tmp_path / "t.csv"
    traj.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x_1,x_2,z_1,V,kkt"
    assert len(lines) == len(traj) + 1
    assert float(lines[2].split(",")[3]) == traj.zs[1, 0]


def test_pointwise_limit(lp1):
    cfg = IntegratorConfig(dt=0.01, t_max=150, stop_tol=0.0, record_every=1000)
    a = integrate(lp1, PrimalDualState([0.3, 0.9], [2.0]), cfg)
    b = integrate(lp1, PrimalDualState([0.3, 0.9], [2.0]), IntegratorConfig(dt=0.01, t_max=250, stop_tol=0.0, record_every=1000))
    assert np.linalg.norm(a.xs[-1] - b.xs[-1]) + np.linalg.norm(a.zs[-1] - b.zs[-1]) <= 1e-6


def test_k_parameters(lp1, lp1_star):
    sol = oracle.solve_primal_dual(lp1)
    kp = k_parameters(lp1, sol, ORIGIN)
    assert kp.K1 == pytest.approx(compute_K1(lp1, lp1_star, 1.0))
    assert kp.K_star == pytest.approx(1.0)
    assert kp.K == max(kp.K1, kp.K_star)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_equilibria_match_optima(seed):
    rng = np.random.default_rng(seed)
    lp = random_lp(rng)
    sol = oracle.solve_primal_dual(lp)
    xdot, zdot = projected_velocity(lp, PrimalDualState(sol.x_star, sol.z_star))
    assert np.abs(np.concatenate([xdot, zdot])).max() <= 1e-9
    for _ in range(10):
        x = np.where(rng.uniform(size=lp.n) < 0.3, 0.0, rng.uniform(0, 2, lp.n))
        s = PrimalDualState(x, rng.uniform(-2, 2, lp.m))
        if kkt_residual(lp, s) > 1e-6:
            xdot, zdot = projected_velocity(lp, s)
            assert np.abs(np.concatenate([xdot, zdot])).max() > 0
