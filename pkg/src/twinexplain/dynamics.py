"""Planar vehicle physics: point mass, rigid body, bicycle-model vehicle,
environmental forces (drag and collisions) and pairwise links (headway).

All states are immutable value types; every function here is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .lanes import ZERO, Lane, LaneMap, LaneRef, Vec2

COLLISION_STIFFNESS = 1.0e5   # N/m
DEFAULT_DRAG = 0.4            # kg/m, folded 0.5*rho*Cd*A
LOW_SPEED = 5.0               # m/s, slip-angle floor
TYRE_FADE_SPEED = 1.0         # m/s, lateral tyre force fades to zero below this


@dataclass(frozen=True, slots=True)
class PointMassState:
    position: Vec2
    velocity: Vec2
    acceleration: Vec2
    mass: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (*self.position, *self.velocity,
                                              *self.acceleration, self.mass))


@dataclass(frozen=True, slots=True)
class RigidBodyState(PointMassState):
    rotation: float
    angular_velocity: float
    angular_acceleration: float
    moment_of_inertia: float
    half_extents: Vec2  # (half length along heading, half width)

    def is_finite(self) -> bool:
        return PointMassState.is_finite(self) and all(math.isfinite(v) for v in (
            self.rotation, self.angular_velocity, self.angular_acceleration))

    @property
    def heading_vector(self) -> Vec2:
        return Vec2(math.cos(self.rotation), math.sin(self.rotation))

    @property
    def forward_speed(self) -> float:
        return self.velocity.dot(self.heading_vector)

    @property
    def forward_acceleration(self) -> float:
        return self.acceleration.dot(self.heading_vector)

    @property
    def length(self) -> float:
        return 2 * self.half_extents.x

    @property
    def width(self) -> float:
        return 2 * self.half_extents.y


@dataclass(frozen=True, slots=True)
class VehicleParams:
    wheelbase: float
    front_axle_offset: float          # centre of mass to front axle
    cornering_stiffness_front: float  # N/rad
    cornering_stiffness_rear: float
    wheel_radius: float
    max_motor_torque: float
    max_steer: float
    drag_area_coefficient: float = DEFAULT_DRAG

    def __post_init__(self):
        for name in ("wheelbase", "front_axle_offset", "cornering_stiffness_front",
                     "cornering_stiffness_rear", "wheel_radius", "max_motor_torque",
                     "max_steer", "drag_area_coefficient"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steer >= math.pi / 2:
            raise ValueError("max_steer must be below pi/2")
        if self.front_axle_offset >= self.wheelbase:
            raise ValueError("front axle offset must lie within the wheelbase")

    @property
    def rear_axle_offset(self) -> float:
        return self.wheelbase - self.front_axle_offset


@dataclass(frozen=True, slots=True)
class EnvForce:
    force: Vec2
    torque: float
    magnitude: float

    def is_finite(self) -> bool:
        return math.isfinite(self.force.x) and math.isfinite(self.force.y) \
            and math.isfinite(self.torque)


NO_FORCE = EnvForce(ZERO, 0.0, 0.0)


def default_vehicle(length: float, width: float, *, mass: float = 1500.0,
                    drag: float = DEFAULT_DRAG) -> tuple[VehicleParams, float, float]:
    """Rough parameters from bounding-box dimensions: (params, mass, inertia)."""
    wheelbase = 0.6 * length
    params = VehicleParams(
        wheelbase=wheelbase, front_axle_offset=wheelbase / 2,
        cornering_stiffness_front=8.0e4, cornering_stiffness_rear=8.0e4,
        wheel_radius=0.3, max_motor_torque=3000.0, max_steer=0.5,
        drag_area_coefficient=drag)
    inertia = mass * (length ** 2 + width ** 2) / 12.0
    return params, mass, inertia


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]; angles already in range come back untouched."""
    if -math.pi < a <= math.pi:
        return a
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def step_point_mass(s: PointMassState, net_force, dt: float) -> PointMassState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = Vec2(net_force[0] / s.mass, net_force[1] / s.mass)
    v = Vec2(s.velocity.x + a.x * dt, s.velocity.y + a.y * dt)
    x = Vec2(s.position.x + v.x * dt, s.position.y + v.y * dt)
    return PointMassState(x, v, a, s.mass)


def step_rigid_body(s: RigidBodyState, net_force, net_torque: float, dt: float) -> RigidBodyState:
    """Semi-implicit Euler for the linear and angular parts."""
    lin = step_point_mass(s, net_force, dt)
    alpha = net_torque / s.moment_of_inertia
    omega = s.angular_velocity + alpha * dt
    theta = wrap_angle(s.rotation + omega * dt)
    return RigidBodyState(lin.position, lin.velocity, lin.acceleration, s.mass,
                          theta, omega, alpha, s.moment_of_inertia, s.half_extents)


def vehicle_forces(s: RigidBodyState, p: VehicleParams, motor_torque: float,
                   steer: float) -> tuple[Vec2, float]:
    """Front-wheel-drive dynamic bicycle model with linear tyres.

    Returns the world-frame force at the centre of mass and the yaw torque.
    Inputs outside the vehicle limits are clamped.
    """
    steer = min(max(steer, -p.max_steer), p.max_steer)
    motor_torque = min(max(motor_torque, -p.max_motor_torque), p.max_motor_torque)
    c, sn = math.cos(s.rotation), math.sin(s.rotation)
    vx = c * s.velocity.x + sn * s.velocity.y
    vy = -sn * s.velocity.x + c * s.velocity.y
    r = s.angular_velocity
    a = p.front_axle_offset
    b = p.rear_axle_offset

    drive = motor_torque / p.wheel_radius
    if drive < 0 and vx <= 0:
        drive = 0.0  # braking never pushes backwards

    u = max(vx, LOW_SPEED)
    fade = min(max(vx, 0.0) / TYRE_FADE_SPEED, 1.0)
    slip_f = math.atan2(vy + a * r, u) - steer
    slip_r = math.atan2(vy - b * r, u)
    lat_f = -p.cornering_stiffness_front * slip_f * fade
    lat_r = -p.cornering_stiffness_rear * slip_r * fade

    cd, sd = math.cos(steer), math.sin(steer)
    front_y = drive * sd + lat_f * cd
    fx = drive * cd - lat_f * sd
    fy = front_y + lat_r
    torque = a * front_y - b * lat_r
    return Vec2(c * fx - sn * fy, sn * fx + c * fy), torque


def step_vehicle(s: RigidBodyState, p: VehicleParams, motor_torque: float, steer: float,
                 env: EnvForce, dt: float, substeps: int = 4) -> RigidBodyState:
    """Advance a vehicle by ``dt`` with the environment force held constant.

    Tyre forces are re-evaluated every substep; they are stiff at low speed.
    """
    h = dt / substeps
    out = s
    for _ in range(substeps):
        f, tq = vehicle_forces(out, p, motor_torque, steer)
        before = out.forward_speed
        out = step_rigid_body(out, (f.x + env.force.x, f.y + env.force.y), tq + env.torque, h)
        if motor_torque < 0 and before >= 0 and out.forward_speed < 0:
            # brakes stop the car rather than reversing it
            hv = out.heading_vector
            fwd = out.velocity.dot(hv)
            out = replace(out, velocity=Vec2(out.velocity.x - fwd * hv.x,
                                             out.velocity.y - fwd * hv.y))
    # report the mean acceleration over the full step
    acc = Vec2((out.velocity.x - s.velocity.x) / dt, (out.velocity.y - s.velocity.y) / dt)
    alpha = (out.angular_velocity - s.angular_velocity) / dt
    return replace(out, acceleration=acc, angular_acceleration=alpha)


# ---------------------------------------------------------------------------
# oriented rectangles

def corners(s: RigidBodyState) -> tuple[Vec2, Vec2, Vec2, Vec2]:
    c, sn = math.cos(s.rotation), math.sin(s.rotation)
    hl, hw = s.half_extents
    px, py = s.position
    ax, ay = c * hl, sn * hl
    bx, by = -sn * hw, c * hw
    return (Vec2(px + ax + bx, py + ay + by), Vec2(px + ax - bx, py + ay - by),
            Vec2(px - ax - bx, py - ay - by), Vec2(px - ax + bx, py - ay + by))


def _axes(s: RigidBodyState) -> tuple[Vec2, Vec2]:
    c, sn = math.cos(s.rotation), math.sin(s.rotation)
    return Vec2(c, sn), Vec2(-sn, c)


def penetration(a: RigidBodyState, b: RigidBodyState) -> tuple[float, Vec2] | None:
    """Separating-axis test. Returns (depth, unit axis pointing from b to a) or None."""
    ra = a.half_extents.x + a.half_extents.y
    rb = b.half_extents.x + b.half_extents.y
    dx = a.position.x - b.position.x
    dy = a.position.y - b.position.y
    if dx * dx + dy * dy > (ra + rb) ** 2:
        return None
    ca, cb = corners(a), corners(b)
    best = None
    for axis in (*_axes(a), *_axes(b)):
        pa = [axis.dot(q) for q in ca]
        pb = [axis.dot(q) for q in cb]
        overlap = min(max(pa), max(pb)) - max(min(pa), min(pb))
        if overlap <= 0:
            return None
        if best is None or overlap < best[0]:
            best = (overlap, axis)
    depth, axis = best
    if axis.dot((dx, dy)) < 0:
        axis = -axis
    return depth, axis


def _body_key(s: RigidBodyState) -> tuple:
    return (s.position.x, s.position.y, s.rotation, s.half_extents.x, s.half_extents.y)


def collision_force(a: RigidBodyState, b: RigidBodyState,
                    stiffness: float = COLLISION_STIFFNESS) -> Vec2:
    """Linear penalty force on ``a`` pushing it out of ``b`` along the minimum axis."""
    # evaluate in a canonical argument order so that f(a, b) == -f(b, a) even on axis ties
    ka, kb = _body_key(a), _body_key(b)
    if kb < ka:
        f = collision_force(b, a, stiffness)
        return Vec2(-f.x, -f.y)
    if ka == kb:
        return ZERO  # coincident identical boxes: no direction to push along
    hit = penetration(a, b)
    if hit is None:
        return ZERO
    depth, axis = hit
    if axis.x == 0.0 and axis.y == 0.0:
        return ZERO
    return axis * (stiffness * depth)


def environment_forces(body: RigidBodyState, p: VehicleParams,
                       others: Sequence[RigidBodyState],
                       stiffness: float = COLLISION_STIFFNESS) -> EnvForce:
    v = body.velocity
    speed = v.norm()
    fx = -p.drag_area_coefficient * speed * v.x
    fy = -p.drag_area_coefficient * speed * v.y
    for o in others:
        if o is body:
            continue
        cf = collision_force(body, o, stiffness)
        fx += cf.x
        fy += cf.y
    return EnvForce(Vec2(fx, fy), 0.0, math.hypot(fx, fy))


def headway(a: RigidBodyState, b: RigidBodyState, lane_of_a: Lane | LaneRef,
            lane_map: LaneMap | None = None) -> float | None:
    """Bumper-to-bumper gap from ``a`` to ``b`` along ``a``'s lane, if ``b`` leads in it."""
    lane = lane_of_a if isinstance(lane_of_a, Lane) else lane_map[lane_of_a]
    fb = lane.project(b.position)
    if abs(fb.d) > lane.width / 2:
        return None
    fa = lane.project(a.position)
    gap = fb.s - fa.s
    if gap <= 0:
        return None
    return max(gap - a.half_extents.x - b.half_extents.x, 0.0)


def nearest_headway(a: RigidBodyState, others: Sequence[RigidBodyState], lane: Lane | None
                    ) -> float | None:
    if lane is None:
        return None
    best = None
    for o in others:
        if o is a:
            continue
        h = headway(a, o, lane)
        if h is not None and (best is None or h < best):
            best = h
    return best
