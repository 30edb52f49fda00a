"""3-DOF planar catamaran model: surge/sway/yaw dynamics, differential
thrust allocation, and motor lag with a cold-start delay.

State convention (NED-style, planar): heading psi is 0 at north,
positive clockwise; u is body forward speed, v body starboard speed,
r yaw rate (positive clockwise seen from above).

Dynamics:

    m11 u' = F_port + F_stbd - d1u u - d2u u|u| + m22 v r
    m22 v' = -d1v v - m11 u r
    m33 r' = lever (F_port - F_stbd) - d1r r - (m22 - m11) u v

The (m22 - m11) u v Munk moment keeps the Coriolis terms
energy-conservative, so free decay strictly dissipates kinetic energy.
The default damping coefficients come from the top-speed calibration
identity 2 F_max = d1u v_max + d2u v_max^2 with a 50/50 linear/quadratic
drag split at v_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class NumericFault(ArithmeticError):
    """State or derivative became non-finite; the simulation must halt."""


DEFAULT_V_MAX = 3.0     # m/s, top speed (calibration target)
DEFAULT_F_MAX = 120.0   # N per motor
RPM_MAX = 1100.0        # rev/min at |actual_norm| = 1
MOTOR_SNAP_EPS = 1e-4   # |actual| below this with zero target snaps to 0
STATIONARY_SPEED_EPS = 0.05  # m/s; below this the hull counts as stationary


@dataclass(frozen=True)
class VesselParams:
    m11: float = 120.0    # kg, surge inertia incl. added mass
    m22: float = 180.0    # kg, sway inertia incl. added mass
    m33: float = 50.0     # kg m^2, yaw inertia incl. added mass
    d1u: float = DEFAULT_F_MAX / DEFAULT_V_MAX
    d2u: float = DEFAULT_F_MAX / DEFAULT_V_MAX ** 2
    d1v: float = 200.0
    d1r: float = 80.0
    F_max: float = DEFAULT_F_MAX   # N per motor
    lever: float = 0.54            # m, half thruster separation
    v_max: float = DEFAULT_V_MAX   # m/s
    startup_delay: float = 2.0     # s, cold-start motor delay
    motor_tau: float = 0.5         # s, first-order motor lag

    def __post_init__(self):
        for name in ("m11", "m22", "m33", "d1u", "d2u", "d1v", "d1r",
                     "F_max", "lever", "v_max", "startup_delay", "motor_tau"):
            if getattr(self, name) <= 0:
                raise ValueError(f"VesselParams.{name} must be positive")
        lhs = 2.0 * self.F_max
        rhs = self.d1u * self.v_max + self.d2u * self.v_max ** 2
        if abs(lhs - rhs) > 1e-6 * lhs:
            raise ValueError(
                "top-speed calibration identity violated: "
                f"2*F_max={lhs} but d1u*v_max + d2u*v_max^2={rhs}")


@dataclass(frozen=True)
class VesselState:
    north: float = 0.0
    east: float = 0.0
    psi: float = 0.0   # rad, [0, 2pi)
    u: float = 0.0     # m/s surge
    v: float = 0.0     # m/s sway
    r: float = 0.0     # rad/s yaw rate
    origin_lat: float = 45.0
    origin_lon: float = -76.0

    def speed(self) -> float:
        return math.hypot(self.u, self.v)


@dataclass(frozen=True)
class EnvDisturbance:
    current_north: float = 0.0  # m/s, world frame
    current_east: float = 0.0


@dataclass(frozen=True)
class MotorState:
    target_norm: float = 0.0
    actual_norm: float = 0.0
    since_stationary_cmd: float = 0.0  # s into a cold-start delay episode
    rpm_signed: float = 0.0

    @property
    def rpm_unsigned(self) -> int:
        return int(round(abs(self.rpm_signed)))


def saturate(x: float) -> float:
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else x)


def allocate_thrust(x_norm: float, z_norm: float,
                    params: VesselParams) -> tuple[float, float]:
    """Map normalized surge/torque commands to per-motor thrusts (N).

    Positive z turns the vessel clockwise (to starboard): the port
    motor gets x + z, the starboard motor x - z, both saturated.
    """
    if not (-1.0 <= x_norm <= 1.0 and -1.0 <= z_norm <= 1.0):
        raise ValueError(f"command out of range: x={x_norm}, z={z_norm}")
    f_port = params.F_max * saturate(x_norm + z_norm)
    f_stbd = params.F_max * saturate(x_norm - z_norm)
    return f_port, f_stbd


def apply_motor_lag(motor: MotorState, target: float, dt: float,
                    params: VesselParams, stationary: bool) -> MotorState:
    """Advance one motor by dt toward a normalized target.

    A nonzero target arriving while the motor is at rest and the hull
    is stationary produces zero actual thrust until startup_delay has
    elapsed; after that (and in all other cases) the actual value
    relaxes toward the target with time constant motor_tau.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    target = saturate(target)
    since = motor.since_stationary_cmd
    if motor.actual_norm == 0.0 and target != 0.0 and stationary:
        since += dt
        if since < params.startup_delay - 1e-12:
            return MotorState(target, 0.0, since, 0.0)
    actual = motor.actual_norm + (target - motor.actual_norm) * (
        1.0 - math.exp(-dt / params.motor_tau))
    if target == 0.0 and abs(actual) < MOTOR_SNAP_EPS:
        actual = 0.0
    if actual != 0.0 or target == 0.0:
        since = 0.0
    return MotorState(target, actual, since, actual * RPM_MAX)


def dynamics_deriv(y, f_port: float, f_stbd: float,
                   current_north: float, current_east: float,
                   p: VesselParams):
    """Continuous-time derivative of [north, east, psi, u, v, r]."""
    _, _, psi, u, v, r = y
    spsi, cpsi = math.sin(psi), math.cos(psi)
    return (
        u * cpsi - v * spsi + current_north,
        u * spsi + v * cpsi + current_east,
        r,
        (f_port + f_stbd - p.d1u * u - p.d2u * u * abs(u) + p.m22 * v * r) / p.m11,
        (-p.d1v * v - p.m11 * u * r) / p.m22,
        (p.lever * (f_port - f_stbd) - p.d1r * r - (p.m22 - p.m11) * u * v) / p.m33,
    )


def rk4_step(y, f_port, f_stbd, current_north, current_east,
             p: VesselParams, dt: float):
    """One classical RK4 step of the 6-state model; psi left unwrapped."""
    def f(yy):
        return dynamics_deriv(yy, f_port, f_stbd, current_north, current_east, p)

    k1 = f(y)
    k2 = f(tuple(y[i] + 0.5 * dt * k1[i] for i in range(6)))
    k3 = f(tuple(y[i] + 0.5 * dt * k2[i] for i in range(6)))
    k4 = f(tuple(y[i] + dt * k3[i] for i in range(6)))
    return tuple(
        y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(6))


def wrap_2pi(angle: float) -> float:
    wrapped = math.fmod(angle, 2.0 * math.pi)
    return wrapped + 2.0 * math.pi if wrapped < 0.0 else wrapped


def step_dynamics(state: VesselState, forces: tuple[float, float],
                  env: EnvDisturbance, params: VesselParams,
                  dt: float) -> VesselState:
    """Integrate one time step via RK4; dt must be in (0, 0.1]."""
    if not 0.0 < dt <= 0.1:
        raise ValueError(f"dt must be in (0, 0.1], got {dt}")
    y = (state.north, state.east, state.psi, state.u, state.v, state.r)
    f_port, f_stbd = forces
    out = rk4_step(y, f_port, f_stbd, env.current_north, env.current_east,
                   params, dt)
    if not all(math.isfinite(val) for val in out):
        raise NumericFault(f"non-finite state after step: {out}")
    return replace(state, north=out[0], east=out[1], psi=wrap_2pi(out[2]),
                   u=out[3], v=out[4], r=out[5])


def kinetic_energy(state: VesselState, params: VesselParams) -> float:
    return 0.5 * (params.m11 * state.u ** 2 + params.m22 * state.v ** 2
                  + params.m33 * state.r ** 2)
