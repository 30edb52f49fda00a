import math

import numpy as np
import pytest

from otterlink.client import SyncedSample
from otterlink.guidance import PolylinePath, figure_eight
from otterlink.nmpc import (ControlSolution, NmpcConfig, cost_gradient,
                            cost_of_inputs, predict, shift_warm_start,
                            solve_nmpc, state_from_synced, state_vector)
from otterlink.vessel import (EnvDisturbance, VesselParams, VesselState,
                              step_dynamics)

P = VesselParams()
EAST_LINE = PolylinePath([(0.0, -500.0), (0.0, 500.0)])


def fd_gradient(y0, inputs, path, config, eps=1e-6, prev=(0.0, 0.0)):
    """Central finite differences of the rollout cost."""
    grad = np.zeros_like(inputs)
    for k in range(inputs.shape[0]):
        for j in range(2):
            up = inputs.copy()
            dn = inputs.copy()
            up[k, j] += eps
            dn[k, j] -= eps
            grad[k, j] = (cost_of_inputs(y0, up, path, config, P, prev)
                          - cost_of_inputs(y0, dn, path, config, P, prev)
                          ) / (2.0 * eps)
    return grad


def random_instance(rng, config):
    state = VesselState(north=rng.uniform(-5, 5), east=rng.uniform(-5, 5),
                        psi=rng.uniform(0, 2 * math.pi),
                        u=rng.uniform(-0.5, 2.0), v=rng.uniform(-0.3, 0.3),
                        r=rng.uniform(-0.4, 0.4))
    # keep |x +/- z| away from the thrust saturation kink, where the
    # objective is not differentiable
    x = rng.uniform(-0.45, 0.45, size=(config.steps_N, 1))
    z = rng.uniform(-0.45, 0.45, size=(config.steps_N, 1))
    return state, np.hstack([x, z])


class TestPredict:
    def test_matches_simulator_stepping_exactly(self):
        # the controller's internal model must be the simulator's model
        config = NmpcConfig(horizon_T=1.0, steps_N=20)  # dt = 0.05
        rng = np.random.default_rng(5)
        state = VesselState(psi=1.0, u=1.2, v=0.05, r=0.1)
        inputs = rng.uniform(-0.8, 0.8, size=(20, 2))
        rolled = predict(state_vector(state), inputs, config, P)
        sim = state
        for k, (x, z) in enumerate(inputs):
            fp = P.F_max * max(-1.0, min(1.0, x + z))
            fs = P.F_max * max(-1.0, min(1.0, x - z))
            sim = step_dynamics(sim, (fp, fs), EnvDisturbance(), P, config.dt)
            assert rolled[k + 1] == pytest.approx(
                [sim.north, sim.east, sim.psi, sim.u, sim.v, sim.r],
                abs=1e-9)

    def test_nonfinite_rollout_raises(self):
        config = NmpcConfig()
        y0 = np.array([0, 0, 0, np.nan, 0, 0])
        with pytest.raises(FloatingPointError):
            predict(y0, np.zeros((config.steps_N, 2)), config, P)


class TestCost:
    def test_pure_speed_penalty_closed_form(self):
        # at rest on the path, aligned with it, zero inputs: only the
        # speed term survives and u stays 0 -> cost = N w_speed ref^2
        config = NmpcConfig(steps_N=4, horizon_T=0.8, w_u=0.0, w_du=0.0,
                            ref_speed=1.0)
        state = VesselState(psi=math.pi / 2)  # facing east, on EAST_LINE
        c = cost_of_inputs(state_vector(state), np.zeros((4, 2)),
                           EAST_LINE, config, P, (0.0, 0.0))
        assert c == pytest.approx(4 * config.w_speed * 1.0, rel=1e-12)

    def test_input_terms_closed_form(self):
        config = NmpcConfig(steps_N=3, horizon_T=0.6, w_ct=0.0, w_head=0.0,
                            w_speed=0.0, w_u=0.1, w_du=0.5)
        inputs = np.array([[0.2, 0.0], [0.2, 0.1], [0.4, 0.1]])
        prev = (0.1, 0.0)
        expected = (0.1 * np.sum(inputs ** 2)
                    + 0.5 * ((0.2 - 0.1) ** 2
                             + 0.1 ** 2
                             + 0.2 ** 2))
        state = VesselState(psi=math.pi / 2)
        c = cost_of_inputs(state_vector(state), inputs, EAST_LINE, config,
                           P, prev)
        assert c == pytest.approx(expected, rel=1e-12)

    def test_cross_track_term_grows_off_path(self):
        config = NmpcConfig(w_speed=0.0, w_u=0.0, w_du=0.0, w_head=0.0)
        on = VesselState(psi=math.pi / 2)
        off = VesselState(north=5.0, psi=math.pi / 2)
        zeros = np.zeros((config.steps_N, 2))
        c_on = cost_of_inputs(state_vector(on), zeros, EAST_LINE, config,
                              P, (0, 0))
        c_off = cost_of_inputs(state_vector(off), zeros, EAST_LINE, config,
                               P, (0, 0))
        assert c_on < 1e-9 < c_off


class TestGradient:
    def test_matches_finite_differences(self):
        config = NmpcConfig()
        rng = np.random.default_rng(17)
        for _ in range(5):
            state, inputs = random_instance(rng, config)
            y0 = state_vector(state)
            prev = (float(inputs[0, 0]), float(inputs[0, 1]))
            c, grad = cost_gradient(y0, inputs, EAST_LINE, config, P, prev)
            fd = fd_gradient(y0, inputs, EAST_LINE, config, prev=prev)
            scale = max(1.0, float(np.max(np.abs(fd))))
            assert np.max(np.abs(grad - fd)) / scale < 1e-6
            assert c == pytest.approx(
                cost_of_inputs(y0, inputs, EAST_LINE, config, P, prev))

    def test_matches_fd_on_figure_eight(self):
        config = NmpcConfig()
        path = figure_eight(20.0)
        rng = np.random.default_rng(23)
        state, inputs = random_instance(rng, config)
        y0 = state_vector(state)
        _, grad = cost_gradient(y0, inputs, path, config, P, (0, 0))
        fd = fd_gradient(y0, inputs, path, config)
        scale = max(1.0, float(np.max(np.abs(fd))))
        assert np.max(np.abs(grad - fd)) / scale < 1e-6


class TestSolve:
    def test_solution_is_feasible_and_improving(self):
        config = NmpcConfig(time_budget_s=None)
        state = VesselState(north=3.0, psi=math.pi / 2, u=0.5)
        zero_cost = cost_of_inputs(state_vector(state),
                                   np.zeros((config.steps_N, 2)),
                                   EAST_LINE, config, P, (0, 0))
        sol = solve_nmpc(state, EAST_LINE, config, P)
        assert sol is not None
        assert sol.inputs.shape == (config.steps_N, 2)
        assert np.all(np.abs(sol.inputs) <= 1.0 + 1e-12)
        assert sol.cost < zero_cost
        assert sol.predicted.shape == (config.steps_N + 1, 6)
        assert sol.iters >= 1

    def test_steers_back_toward_path(self):
        # offset to port of an east-going line: the plan's endpoint must
        # close most of the cross-track gap
        config = NmpcConfig(time_budget_s=None)
        state = VesselState(north=4.0, psi=math.pi / 2, u=1.0)
        sol = solve_nmpc(state, EAST_LINE, config, P)
        assert abs(sol.predicted[-1, 0]) < 2.0

    def test_none_on_nonfinite_state(self):
        config = NmpcConfig(time_budget_s=None)
        state = VesselState(u=float("nan"))
        assert solve_nmpc(state, EAST_LINE, config, P) is None

    def test_warm_start_shift(self):
        inputs = np.arange(8.0).reshape(4, 2)
        sol = ControlSolution(inputs=inputs, predicted=np.zeros((5, 6)),
                              cost=0.0, iters=1, solve_time=0.0,
                              converged=True)
        shifted = shift_warm_start(sol)
        assert np.array_equal(shifted[:-1], inputs[1:])
        assert np.array_equal(shifted[-1], inputs[-1])

    def test_warm_started_resolve_is_cheap(self):
        config = NmpcConfig(time_budget_s=None)
        state = VesselState(psi=math.pi / 2, u=1.0)
        cold = solve_nmpc(state, EAST_LINE, config, P)
        warm = solve_nmpc(state, EAST_LINE, config, P, warm_start=cold,
                          prev_input=tuple(cold.inputs[0]))
        assert warm.iters <= cold.iters

    def test_config_validation(self):
        with pytest.raises(ValueError):
            NmpcConfig(steps_N=1)
        with pytest.raises(ValueError):
            NmpcConfig(w_ct=-1.0)


class TestStateFromSynced:
    def test_velocity_rotated_into_body_frame(self):
        sample = SyncedSample(
            gps={"lat": 45.0, "lon": -76.0, "utc": 0.0, "alt": 0.0},
            imu={"yaw": 90.0, "r": 5.0, "utc": 0.0, "roll": 0, "pitch": 0,
                 "p": 0, "q": 0},
            cogsog={"cog": 90.0, "sog": 1.5, "utc": 0.0},
            stamp=0.0)
        state = state_from_synced(sample, 45.0, -76.0)
        assert state.u == pytest.approx(1.5)
        assert state.v == pytest.approx(0.0, abs=1e-12)
        assert state.psi == pytest.approx(math.pi / 2)
        assert state.r == pytest.approx(math.radians(5.0))

    def test_crabbing_shows_up_as_sway(self):
        sample = SyncedSample(
            gps={"lat": 45.0, "lon": -76.0},
            imu={"yaw": 0.0, "r": 0.0},
            cogsog={"cog": 90.0, "sog": 2.0},
            stamp=0.0)
        state = state_from_synced(sample, 45.0, -76.0)
        assert state.u == pytest.approx(0.0, abs=1e-12)
        assert state.v == pytest.approx(2.0)  # pushed straight to starboard
