"""Controller and planner.

The controller turns a goal-based action into motor torque and steering with
two PD loops. The planner enumerates candidate actions, simulates each one by
intervening on the agent's controller input, and keeps the action whose
outcome scores highest under a reward profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .actions import Action, ActionDistanceConfig, Goal, action_distance
from .dynamics import LOW_SPEED, RigidBodyState, VehicleParams
from .lanes import LaneMap, LaneRef
from .reward import Outcome, RewardConfig, RewardProfile, reward

if TYPE_CHECKING:
    from .world import World


class OffMap(RuntimeError):
    """The vehicle is not inside any lane."""


class AllCandidatesDiverged(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class ControlOutput:
    motor_torque: float
    steer: float

    def is_finite(self) -> bool:
        return math.isfinite(self.motor_torque) and math.isfinite(self.steer)


@dataclass(frozen=True)
class PlannerConfig:
    horizon: float = 5.0
    speed_deltas: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0)
    lane_options: tuple[str, ...] = ("left", "stay", "right")
    goal_lead_time: float = 4.0
    speed_kp: float = 0.8       # 1/s, desired acceleration per m/s of error
    speed_kd: float = 0.1       # s, on current acceleration
    lateral_kp: float = 1.0     # 1/s^2, desired lateral acceleration per m of offset
    lateral_kd: float = 2.0     # 1/s, per m/s of lateral velocity
    yaw_damping: float = 0.5    # fraction of the current yaw rate's kinematic steer removed
    max_lateral_accel: float = 3.0
    time_step: float = 0.1
    substeps: int = 4
    speed_tolerance: float = 1.5  # m/s, for goal accomplishment
    include_observed: bool = True

    def __post_init__(self):
        if self.horizon <= 0 or self.goal_lead_time <= 0:
            raise ValueError("horizon and goal lead time must be positive")
        if self.time_step <= 0 or self.substeps < 1:
            raise ValueError("bad integration settings")
        bad = set(self.lane_options) - {"left", "stay", "right"}
        if bad:
            raise ValueError(f"unknown lane options {sorted(bad)}")
        object.__setattr__(self, "speed_deltas", tuple(float(d) for d in self.speed_deltas))
        object.__setattr__(self, "lane_options", tuple(self.lane_options))


def control(a: Action, s: RigidBodyState, p: VehicleParams, lane_geometry: LaneMap,
            t: float, cfg: PlannerConfig, *, require_lane: bool = True) -> ControlOutput:
    """PD speed tracking plus PD lateral tracking of the goal lane's centreline.

    Goals are held after their target time expires, so ``t`` only matters to
    callers that schedule actions. With ``require_lane=False`` a vehicle
    outside every lane still steers toward its goal lane instead of raising.
    """
    if require_lane and lane_geometry.locate(s.position) is None:
        raise OffMap(f"position {tuple(s.position)} is outside every lane")
    v = s.forward_speed
    accel = cfg.speed_kp * (a.speed_goal.target_value - v) - cfg.speed_kd * s.forward_acceleration
    torque = accel * s.mass * p.wheel_radius
    torque = min(max(torque, -p.max_motor_torque), p.max_motor_torque)

    lane = lane_geometry[a.lane]
    f = lane.project(s.position)
    normal_x, normal_y = -math.sin(f.heading), math.cos(f.heading)
    lat_vel = s.velocity.x * normal_x + s.velocity.y * normal_y
    lat_acc = -cfg.lateral_kp * f.d - cfg.lateral_kd * lat_vel
    lat_acc = min(max(lat_acc, -cfg.max_lateral_accel), cfg.max_lateral_accel)
    vc = max(v, LOW_SPEED)
    # heading error enters through lat_vel; the yaw term damps tyre lag at highway speed
    steer = (math.atan(p.wheelbase * lat_acc / (vc * vc))
             - cfg.yaw_damping * s.angular_velocity * p.wheelbase / vc)
    steer = min(max(steer, -p.max_steer), p.max_steer)
    return ControlOutput(torque, steer)


def maintain_action(speed: float, lane: LaneRef, t: float, cfg: PlannerConfig) -> Action:
    t_goal = t + cfg.goal_lead_time
    return Action(Goal(max(speed, 0.0), t_goal), Goal(lane, t_goal))


def generate_candidates(s: RigidBodyState, lane: LaneRef, t: float, cfg: PlannerConfig,
                        lane_map: LaneMap | None = None) -> list[Action]:
    """Speed targets (current speed + delta, floored at 0) x reachable lane options."""
    v = max(s.forward_speed, 0.0)
    t_goal = t + cfg.goal_lead_time
    lanes = []
    for opt in cfg.lane_options:
        target = lane if opt == "stay" or lane_map is None else lane_map.neighbour(lane, opt)
        if lane_map is None and opt != "stay":
            raise ValueError("a lane map is needed for lane-change options")
        if target is not None:
            lanes.append(target)
    out = [Action(Goal(max(v + d, 0.0), t_goal), Goal(l, t_goal))
           for d in cfg.speed_deltas for l in lanes]
    keep = maintain_action(v, lane, t, cfg)
    if keep not in out:
        out.append(keep)
    return out


def select_best(outcomes: Sequence[tuple[Action, Outcome | None]], profile: RewardProfile,
                maintain: Action, reward_cfg: RewardConfig = RewardConfig(),
                dist_cfg: ActionDistanceConfig = ActionDistanceConfig()) -> Action:
    """Argmax of reward; ties go to the action nearest ``maintain``, then list order."""
    best = None
    for i, (a, o) in enumerate(outcomes):
        if o is None:
            continue
        key = (-reward(o, profile, reward_cfg), action_distance(a, maintain, dist_cfg), i)
        if best is None or key < best[0]:
            best = (key, a)
    if best is None:
        raise AllCandidatesDiverged("every candidate rollout failed")
    return best[1]


def plan(world: "World", agent_id: str, profile: RewardProfile, t: float, cfg: PlannerConfig,
         reward_cfg: RewardConfig = RewardConfig(),
         dist_cfg: ActionDistanceConfig = ActionDistanceConfig(),
         candidates: Sequence[Action] | None = None
         ) -> tuple[Action, list[tuple[Action, Outcome | None]]]:
    """Simulate every candidate for ``cfg.horizon`` seconds and pick the best.

    Diverged or off-map rollouts appear in the outcome list with ``None``.
    """
    if candidates is None:
        candidates = world.candidates(agent_id, t)
    outcomes = world.simulate_candidates(agent_id, t, candidates)
    state = world.body(agent_id, world.index(t))
    lane = world.lane_map.locate(state.position)
    keep = maintain_action(state.forward_speed, lane if lane is not None else candidates[0].lane,
                           t, cfg)
    return select_best(outcomes, profile, keep, reward_cfg, dist_cfg), outcomes
