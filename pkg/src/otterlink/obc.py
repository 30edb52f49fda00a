"""Simulated Otter onboard computer.

Runs the 3-DOF hull model at a fixed 20 ms internal step, applies the
active control mode (drift / manual / station keeping / course+speed),
and emits telemetry sentences: position and attitude at the configured
telemetry rate, status and time at 1 Hz.

Reported motor RPM is always unsigned, matching the real interface's
inability to show propeller direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import codec, geo
from .vessel import (EnvDisturbance, MotorState, STATIONARY_SPEED_EPS,
                     VesselParams, VesselState, allocate_thrust,
                     apply_motor_lag, saturate, step_dynamics)

SIM_DT = 0.02          # s, internal physics step
STATUS_HZ = 1.0
DEFAULT_UTC_DATE = 20250101
DEFAULT_UTC0 = 43200.0  # seconds of day at t = 0

IDLE_POWER_W = 35.0
FULL_POWER_W = 900.0      # both motors at full
BATTERY_WH = 1800.0


@dataclass(frozen=True)
class ControlGains:
    """Cascaded PI/PD gains for the built-in course-and-speed mode."""

    kp_psi: float = 0.4    # per rad
    kd_psi: float = 0.35   # per rad/s
    kp_u: float = 1.0      # per m/s
    ki_u: float = 0.3      # per m
    integ_limit: float = 2.0
    sk_deadband: float = 2.0   # m
    sk_gain: float = 0.2       # 1/s, distance-to-speed gain


class Drift:
    def __repr__(self):
        return "Drift()"


@dataclass(frozen=True)
class Manual:
    x: float
    z: float


@dataclass(frozen=True)
class StationKeep:
    lat: float
    lon: float
    speed_cap: float


@dataclass(frozen=True)
class CourseSpeed:
    course: float  # deg
    speed: float   # m/s


def wrap_deg180(angle: float) -> float:
    """Wrap degrees to (-180, 180]."""
    wrapped = math.fmod(angle, 360.0)
    if wrapped <= -180.0:
        wrapped += 360.0
    elif wrapped > 180.0:
        wrapped -= 360.0
    return wrapped


def builtin_course_speed(state: VesselState, course_cmd: float,
                         speed_cmd: float, gains: ControlGains,
                         integ: float, dt: float) -> tuple[float, float, float]:
    """Cascaded PI/PD: PD on heading error, PI on speed error.

    Returns (x_norm, z_norm, new_integrator). The speed integrator is
    clamped (anti-windup) and both outputs are clamped to [-1, 1].
    """
    err_deg = wrap_deg180(course_cmd - math.degrees(state.psi))
    z = gains.kp_psi * math.radians(err_deg) - gains.kd_psi * state.r
    err_u = speed_cmd - state.u
    integ = max(-gains.integ_limit, min(gains.integ_limit, integ + err_u * dt))
    x = gains.kp_u * err_u + gains.ki_u * integ
    return saturate(x), saturate(z), integ


def builtin_station_keep(state: VesselState, target_lat: float,
                         target_lon: float, speed_cap: float,
                         gains: ControlGains, integ: float,
                         dt: float) -> tuple[float, float, float]:
    """Steer toward the target outside the deadband, drift inside it.

    Returns (x_norm, z_norm, new_integrator).
    """
    tn, te = geo.latlon_to_local(target_lat, target_lon,
                                 state.origin_lat, state.origin_lon)
    dn, de = tn - state.north, te - state.east
    dist = math.hypot(dn, de)
    if dist < gains.sk_deadband:
        return 0.0, 0.0, 0.0
    course = math.degrees(math.atan2(de, dn)) % 360.0
    speed = min(speed_cap, gains.sk_gain * dist)
    return builtin_course_speed(state, course, speed, gains, integ, dt)


class OtterObc:
    """Single-owner simulated OBC: call handle_command and tick from
    one driving context."""

    def __init__(self, params: VesselParams | None = None,
                 telemetry_hz: float = 10.0,
                 env: EnvDisturbance | None = None,
                 initial_state: VesselState | None = None,
                 gains: ControlGains | None = None,
                 utc_date: int = DEFAULT_UTC_DATE,
                 utc0: float = DEFAULT_UTC0):
        if not 1.0 <= telemetry_hz <= 20.0:
            raise ValueError(f"telemetry rate {telemetry_hz} Hz outside [1, 20]")
        self.params = params or VesselParams()
        self.env = env or EnvDisturbance()
        self.state = initial_state or VesselState()
        self.gains = gains or ControlGains()
        self.mode = Drift()
        self.motor_port = MotorState()
        self.motor_stbd = MotorState()
        self.telemetry_hz = telemetry_hz
        self.utc_date = utc_date
        self.utc0 = utc0
        self.battery = 100.0
        self.power = IDLE_POWER_W
        self.t = 0.0
        self._next_nav = 1.0 / telemetry_hz
        self._next_status = 1.0 / STATUS_HZ
        self._integ_u = 0.0

    # -- commands -----------------------------------------------------

    def handle_command(self, msg: codec.OtterMessage) -> None:
        """Switch the active mode from a validated command message."""
        if isinstance(msg, codec.DriftCmd):
            if msg.on:
                self._set_mode(Drift())
        elif isinstance(msg, codec.ManualCmd):
            # y is carried on the wire but deliberately discarded
            self._set_mode(Manual(msg.x, msg.z))
        elif isinstance(msg, codec.StationKeepCmd):
            self._set_mode(StationKeep(msg.lat, msg.lon, msg.speed))
        elif isinstance(msg, codec.CourseSpeedCmd):
            self._set_mode(CourseSpeed(msg.course, msg.speed))
        else:
            raise TypeError(f"not a command message: {type(msg).__name__}")

    def _set_mode(self, mode) -> None:
        if type(mode) is not type(self.mode):
            self._integ_u = 0.0
        self.mode = mode

    @property
    def mode_tag(self) -> str:
        return {Drift: "DRIFT", Manual: "MAN",
                StationKeep: "SK", CourseSpeed: "CRS"}[type(self.mode)]

    # -- stepping -----------------------------------------------------

    def _mode_outputs(self) -> tuple[float, float]:
        mode = self.mode
        if isinstance(mode, Manual):
            return saturate(mode.x), saturate(mode.z)
        if isinstance(mode, CourseSpeed):
            x, z, self._integ_u = builtin_course_speed(
                self.state, mode.course, mode.speed, self.gains,
                self._integ_u, SIM_DT)
            return x, z
        if isinstance(mode, StationKeep):
            x, z, self._integ_u = builtin_station_keep(
                self.state, mode.lat, mode.lon, mode.speed_cap, self.gains,
                self._integ_u, SIM_DT)
            return x, z
        return 0.0, 0.0

    def _step_once(self) -> None:
        x, z = self._mode_outputs()
        stationary = (self.state.speed() < STATIONARY_SPEED_EPS
                      and self.motor_port.actual_norm == 0.0
                      and self.motor_stbd.actual_norm == 0.0)
        self.motor_port = apply_motor_lag(
            self.motor_port, saturate(x + z), SIM_DT, self.params, stationary)
        self.motor_stbd = apply_motor_lag(
            self.motor_stbd, saturate(x - z), SIM_DT, self.params, stationary)
        f_port = self.params.F_max * self.motor_port.actual_norm
        f_stbd = self.params.F_max * self.motor_stbd.actual_norm
        self.state = step_dynamics(self.state, (f_port, f_stbd), self.env,
                                   self.params, SIM_DT)
        load = (abs(self.motor_port.actual_norm)
                + abs(self.motor_stbd.actual_norm)) / 2.0
        self.power = IDLE_POWER_W + (FULL_POWER_W - IDLE_POWER_W) * load
        self.battery = max(
            0.0, self.battery - self.power * SIM_DT / 3600.0 / BATTERY_WH * 100.0)
        self.t += SIM_DT

    def tick(self, now: float) -> list[str]:
        """Advance physics up to `now` and return due telemetry lines."""
        if now < self.t - 1e-9:
            raise ValueError("tick time must be monotone")
        lines: list[str] = []
        while self.t + SIM_DT <= now + 1e-9:
            self._step_once()
            if self.t + 1e-9 >= self._next_nav:
                self._next_nav += 1.0 / self.telemetry_hz
                lines.append(codec.encode_sentence(self._pos_report()))
                lines.append(codec.encode_sentence(self._att_report()))
            if self.t + 1e-9 >= self._next_status:
                self._next_status += 1.0 / STATUS_HZ
                lines.append(codec.encode_sentence(self._status_report()))
                lines.append(codec.encode_sentence(self._time_report()))
        return lines

    # -- telemetry ----------------------------------------------------

    def _utc(self) -> float:
        return (self.utc0 + self.t) % 86400.0

    def _ground_velocity(self) -> tuple[float, float]:
        s = self.state
        ndot = (s.u * math.cos(s.psi) - s.v * math.sin(s.psi)
                + self.env.current_north)
        edot = (s.u * math.sin(s.psi) + s.v * math.cos(s.psi)
                + self.env.current_east)
        return ndot, edot

    def _pos_report(self) -> codec.PosReport:
        s = self.state
        lat, lon = geo.local_to_latlon(s.north, s.east,
                                       s.origin_lat, s.origin_lon)
        ndot, edot = self._ground_velocity()
        sog = math.hypot(ndot, edot)
        if sog > 1e-3:
            cog = math.degrees(math.atan2(edot, ndot)) % 360.0
        else:
            cog = math.degrees(s.psi) % 360.0
        return codec.PosReport(self._utc(), lat, lon, 0.0, sog, cog)

    def _att_report(self) -> codec.AttReport:
        s = self.state
        return codec.AttReport(self._utc(), 0.0, 0.0,
                               math.degrees(s.psi) % 360.0,
                               0.0, 0.0, math.degrees(s.r))

    def _status_report(self) -> codec.StatusReport:
        return codec.StatusReport(self.mode_tag,
                                  self.motor_port.rpm_unsigned,
                                  self.motor_stbd.rpm_unsigned,
                                  22.5, self.battery, self.power)

    def _time_report(self) -> codec.TimeReport:
        return codec.TimeReport(self.utc_date, self._utc())
