"""Goal-based actions and the distance between two actions."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Goal:
    target_value: float   # m/s for a speed goal, lane id for a lane goal
    target_time: float    # absolute scene time, s


@dataclass(frozen=True, order=True)
class Action:
    speed_goal: Goal
    lane_goal: Goal

    @property
    def speed(self) -> float:
        return self.speed_goal.target_value

    @property
    def lane(self) -> int:
        return int(self.lane_goal.target_value)

    def to_dict(self) -> dict:
        return {"speed": [self.speed_goal.target_value, self.speed_goal.target_time],
                "lane": [self.lane, self.lane_goal.target_time]}

    @classmethod
    def from_dict(cls, d: dict) -> "Action":
        return cls(Goal(float(d["speed"][0]), float(d["speed"][1])),
                   Goal(int(d["lane"][0]), float(d["lane"][1])))


def make_action(speed: float, speed_time: float, lane: int, lane_time: float) -> Action:
    return Action(Goal(float(speed), float(speed_time)), Goal(int(lane), float(lane_time)))


@dataclass(frozen=True)
class ActionDistanceConfig:
    alpha_a: float = 0.1
    alpha_vl: float = 10.0
    threshold: float = 0.0

    def __post_init__(self):
        if self.alpha_a <= 0 or self.alpha_vl <= 0:
            raise ValueError("action distance weights must be positive")
        if not self.threshold >= 0:
            raise ValueError("threshold must be non-negative")


def action_distance(a: Action, b: Action, cfg: ActionDistanceConfig = ActionDistanceConfig()
                    ) -> float:
    va, vb = a.speed_goal.target_value, b.speed_goal.target_value
    if va + vb > 0:
        speed_term = (2 * (va - vb) / (va + vb)) ** 2
    else:
        log.debug("both speed targets zero; speed term dropped")
        speed_term = 0.0
    lane_term = 0.0 if a.lane == b.lane else cfg.alpha_vl
    total = (speed_term
             + (a.speed_goal.target_time - b.speed_goal.target_time) ** 2
             + lane_term
             + (a.lane_goal.target_time - b.lane_goal.target_time) ** 2)
    return cfg.alpha_a * math.sqrt(total)


@dataclass(frozen=True, order=True)
class TimeActionPair:
    agent: str
    t_a: float
    action: Action

    def to_dict(self) -> dict:
        return {"agent": self.agent, "t": self.t_a, "action": self.action.to_dict()}
