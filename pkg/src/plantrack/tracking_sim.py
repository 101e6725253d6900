"""Closed-loop tracking of a planned trajectory on the nonlinear quadrotor.

The altitude loop applies the LQR law to the interpolated reference
position only (no feed-forward).  The lateral and attitude loops are
PD laws with zero references; for a vertical task they stay dormant,
which keeps the motion one-dimensional.  Integration is fixed-step RK4
on the 6-state rigid-body model, with the controller evaluated at every
stage.

Scoring follows the planner's quadrature: actual cost is the trapezoid
integral of the squared body accelerations, actual error the integral
of the squared reference-minus-plant altitude gap, both over the
reference horizon exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .collocation_planner import PlannedTrajectory
from .error_estimator import trapezoid_quadrature
from .lqr import ControllerSpec
from .model import ModelParams

# PD gains of the dormant loops: lateral position and attitude.
_POSITION_GAIN_D = 10.0
_POSITION_GAIN_P = 100.0
_ATTITUDE_GAIN_D = 80.0
_ATTITUDE_GAIN_P = 100.0


class SimulationDivergedError(RuntimeError):
    """State left the finite range; carries the failure time."""

    def __init__(self, time: float):
        super().__init__(f"simulation diverged at t = {time:.6f} s")
        self.time = time


def select_step(
    controller: ControllerSpec,
    horizon: float,
    max_step: float = 1e-3,
    pole_fraction: float = 0.2,
) -> float:
    """Fixed RK4 step for a controller: min(max_step, fraction / |fast pole|).

    The raw step is then snapped down so an integer number of steps
    lands on the horizon exactly.
    """
    raw = min(max_step, pole_fraction / abs(controller.pair.lambda_fast))
    steps = max(1, math.ceil(horizon / raw - 1e-9))
    return horizon / steps


@dataclass(frozen=True)
class SimConfig:
    step: float
    reference: PlannedTrajectory
    controller: ControllerSpec
    params: ModelParams = field(default_factory=ModelParams)

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.step > self.reference.knot_spacing * (1 + 1e-9):
            raise ValueError("step must not exceed the knot spacing")
        ratio = self.reference.horizon / self.step
        if abs(ratio - round(ratio)) > 1e-6:
            raise ValueError("step must divide the reference horizon")


@dataclass(frozen=True)
class TrackingResult:
    """Dense simulated history plus the two scalar scores."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    q: np.ndarray
    x_dot: np.ndarray
    y_dot: np.ndarray
    q_dot: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    y_ref: np.ndarray
    x_ddot: np.ndarray
    y_ddot: np.ndarray
    q_ddot: np.ndarray
    error: np.ndarray
    actual_cost: float
    actual_error_integral: float


def reference_lookup(traj: PlannedTrajectory, t: float) -> float:
    """Reference altitude at time t by cubic Hermite interpolation.

    Each segment uses the knot positions and velocities, so the lookup
    reproduces cubic references exactly.  Beyond the horizon the final
    knot is held (the plan is over, the setpoint remains).
    """
    times = traj.times
    horizon = traj.horizon
    if t >= horizon:
        return float(traj.y[-1])
    if t <= 0.0:
        return float(traj.y[0])
    dt = traj.knot_spacing
    k = min(int(t / dt), times.size - 2)
    s = (t - times[k]) / dt
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return float(
        h00 * traj.y[k]
        + h10 * dt * traj.v[k]
        + h01 * traj.y[k + 1]
        + h11 * dt * traj.v[k + 1]
    )


def _hermite_lookup(traj: PlannedTrajectory):
    """Plain-float interpolator for the integration loop."""
    y = traj.y.tolist()
    v = traj.v.tolist()
    dt = traj.knot_spacing
    horizon = traj.horizon
    last = y[-1]
    first = y[0]
    top = len(y) - 2

    def lookup(t: float) -> float:
        if t >= horizon:
            return last
        if t <= 0.0:
            return first
        k = int(t / dt)
        if k > top:
            k = top
        s = (t - k * dt) / dt
        one = 1.0 - s
        h00 = (1.0 + 2.0 * s) * one * one
        h10 = s * one * one
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return h00 * y[k] + h10 * dt * v[k] + h01 * y[k + 1] + h11 * dt * v[k + 1]

    return lookup


def simulate(config: SimConfig) -> TrackingResult:
    """Run the closed loop from the trimmed initial state.

    Per stage: altitude thrust from the LQR law on (y, y_dot) and the
    interpolated reference; commanded lateral acceleration from the PD
    law with zero reference; commanded pitch from small-angle thrust
    inversion q_cmd = -M x_ddot_cmd / thrust; differential thrust from
    the attitude PD law.  The rotor pair is recovered from sum and
    difference and drives the nonlinear model.
    """
    spec = config.controller
    params = config.params
    mass = params.mass
    arm = params.arm_length
    grav = params.gravity
    k1 = spec.k1
    k2 = spec.k2
    n1 = spec.n1
    trim = mass * grav
    lookup = _hermite_lookup(config.reference)
    sin = math.sin
    cos = math.cos

    def stage(t, x, y, q, xd, yd, qd):
        y_ref = lookup(t)
        thrust = -k1 * y - k2 * yd + n1 * y_ref + trim
        xdd_cmd = -_POSITION_GAIN_D * xd - _POSITION_GAIN_P * x
        q_cmd = -mass * xdd_cmd / thrust if thrust != 0.0 else 0.0
        qdd_cmd = -_ATTITUDE_GAIN_D * qd + _ATTITUDE_GAIN_P * (q_cmd - q)
        diff = mass * arm * qdd_cmd
        u1 = 0.5 * (thrust - diff)
        u2 = 0.5 * (thrust + diff)
        total = u1 + u2
        sin_q = sin(q)
        cos_q = cos(q)
        return (
            xd,
            yd,
            qd,
            -sin_q * total / mass,
            cos_q * total / mass - grav,
            (u2 - u1) / (mass * arm),
            u1,
            u2,
            y_ref,
        )

    horizon = config.reference.horizon
    step = config.step
    steps = round(horizon / step)
    half = 0.5 * step
    sixth = step / 6.0

    times = np.arange(steps + 1) * step
    hist = np.empty((steps + 1, 13))

    x = y = q = xd = yd = qd = 0.0
    for i in range(steps + 1):
        t = i * step
        d = stage(t, x, y, q, xd, yd, qd)
        hist[i] = (t, x, y, q, xd, yd, qd, d[6], d[7], d[8], d[3], d[4], d[5])
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(q)):
            raise SimulationDivergedError(t)
        if i == steps:
            break
        a1 = d[:6]
        a2 = stage(
            t + half,
            x + half * a1[0], y + half * a1[1], q + half * a1[2],
            xd + half * a1[3], yd + half * a1[4], qd + half * a1[5],
        )[:6]
        a3 = stage(
            t + half,
            x + half * a2[0], y + half * a2[1], q + half * a2[2],
            xd + half * a2[3], yd + half * a2[4], qd + half * a2[5],
        )[:6]
        a4 = stage(
            t + step,
            x + step * a3[0], y + step * a3[1], q + step * a3[2],
            xd + step * a3[3], yd + step * a3[4], qd + step * a3[5],
        )[:6]
        x += sixth * (a1[0] + 2.0 * (a2[0] + a3[0]) + a4[0])
        y += sixth * (a1[1] + 2.0 * (a2[1] + a3[1]) + a4[1])
        q += sixth * (a1[2] + 2.0 * (a2[2] + a3[2]) + a4[2])
        xd += sixth * (a1[3] + 2.0 * (a2[3] + a3[3]) + a4[3])
        yd += sixth * (a1[4] + 2.0 * (a2[4] + a3[4]) + a4[4])
        qd += sixth * (a1[5] + 2.0 * (a2[5] + a3[5]) + a4[5])

    error = hist[:, 9] - hist[:, 2]
    cost = trapezoid_quadrature(
        times, hist[:, 10] ** 2 + hist[:, 11] ** 2 + hist[:, 12] ** 2
    )
    error_integral = trapezoid_quadrature(times, error**2)
    return TrackingResult(
        times=times,
        x=hist[:, 1],
        y=hist[:, 2],
        q=hist[:, 3],
        x_dot=hist[:, 4],
        y_dot=hist[:, 5],
        q_dot=hist[:, 6],
        u1=hist[:, 7],
        u2=hist[:, 8],
        y_ref=hist[:, 9],
        x_ddot=hist[:, 10],
        y_ddot=hist[:, 11],
        q_ddot=hist[:, 12],
        error=error,
        actual_cost=cost,
        actual_error_integral=error_integral,
    )


def score(result: TrackingResult) -> tuple[float, float]:
    """Recompute (actual_cost, actual_error_integral) from the history."""
    cost = trapezoid_quadrature(
        result.times, result.x_ddot**2 + result.y_ddot**2 + result.q_ddot**2
    )
    error_integral = trapezoid_quadrature(result.times, result.error**2)
    return cost, error_integral


TRACKING_COLUMNS = (
    "t", "x", "y", "q", "xdot", "ydot", "qdot", "u1", "u2", "y_ref", "err",
)


def write_tracking_csv(result: TrackingResult, path) -> None:
    columns = np.column_stack(
        [
            result.times,
            result.x,
            result.y,
            result.q,
            result.x_dot,
            result.y_dot,
            result.q_dot,
            result.u1,
            result.u2,
            result.y_ref,
            result.error,
        ]
    )
    with open(path, "w", newline="") as handle:
        handle.write(",".join(TRACKING_COLUMNS) + "\n")
        for row in columns:
            handle.write(",".join(f"{value:.17g}" for value in row) + "\n")
