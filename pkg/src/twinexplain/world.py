"""Scene-level structural causal model.

Every agent ``X`` contributes five variables per slice:

``X.obs``        exogenous observed body (None where the track has no frame)
``X.obs_action`` exogenous observed action active at that slice
``X.action``     controller input; the planner and counterfactuals intervene here
``X.control``    motor torque and steering from the PD controller
``X.env``        drag plus collision forces from the other bodies (previous slice)
``X.state``      body and a ``diverged`` flag
``X.headway``    gap to the leader in the agent's current lane

An agent replays its observations until its controller input departs from the
observed action (or observations run out); from then on it is simulated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .actions import Action, TimeActionPair
from .agent import (ControlOutput, OffMap, PlannerConfig, control, generate_candidates)
from .dynamics import (NO_FORCE, EnvForce, RigidBodyState, VehicleParams, environment_forces,
                       nearest_headway, step_vehicle)
from .lanes import LaneMap
from .reward import NO_LEADER, Outcome
from .scm import (CausalModel, ExogenousSpec, Initial, Intervention, NumericOverflow, Rollout,
                  StructuralEquation, build_model, intervene, prev, simulate)


@dataclass(frozen=True, slots=True)
class AgentState:
    body: RigidBodyState
    diverged: bool

    def is_finite(self) -> bool:
        return self.body.is_finite()


@dataclass(frozen=True)
class AgentSetup:
    agent: str
    params: VehicleParams
    observed: tuple[RigidBodyState | None, ...]   # per slice from slice 0
    actions: tuple[TimeActionPair, ...]           # sorted by time


def _schedule(seq: Sequence, tail):
    n = len(seq)

    def at(k: int):
        return seq[k] if k < n else tail
    return at


def _action_per_slice(actions: Sequence[TimeActionPair], n: int, t0: float, dt: float
                      ) -> list[Action]:
    out = []
    j = 0
    for k in range(n):
        t = t0 + k * dt + 1e-9
        while j + 1 < len(actions) and actions[j + 1].t_a <= t:
            j += 1
        out.append(actions[j].action)
    return out


def build_scene_model(lane_map: LaneMap, setups: Sequence[AgentSetup], cfg: PlannerConfig,
                      t0: float = 0.0) -> CausalModel:
    dt, substeps = cfg.time_step, cfg.substeps
    names = [s.agent for s in setups]
    equations, exo = [], []
    for s in setups:
        if not s.actions:
            raise ValueError(f"agent {s.agent} has no actions")
        if not s.observed or s.observed[0] is None:
            raise ValueError(f"agent {s.agent} has no observed state at the first slice")
        X = s.agent
        others = [n for n in names if n != X]
        per_slice = _action_per_slice(s.actions, len(s.observed), t0, dt)
        exo.append(ExogenousSpec(f"{X}.obs", schedule=_schedule(s.observed, None)))
        exo.append(ExogenousSpec(f"{X}.obs_action", schedule=_schedule(per_slice, per_slice[-1])))
        equations.append(StructuralEquation(f"{X}.action", [f"{X}.obs_action"], lambda a: a))
        equations.append(StructuralEquation(
            f"{X}.control", [f"{X}.action", f"{X}.obs_action", f"{X}.obs", prev(f"{X}.state")],
            _control_eq(s.params, lane_map, cfg), initial=Initial((), lambda: None)))
        equations.append(StructuralEquation(
            f"{X}.env", [prev(f"{X}.state")] + [prev(f"{o}.state") for o in others],
            _env_eq(s.params),
            initial=Initial(tuple([f"{X}.obs"] + [f"{o}.obs" for o in others]),
                            _env_init(s.params))))
        equations.append(StructuralEquation(
            f"{X}.state",
            [prev(f"{X}.state"), f"{X}.control", f"{X}.env", f"{X}.obs", f"{X}.action",
             f"{X}.obs_action"],
            _state_eq(s.params, dt, substeps),
            initial=Initial((f"{X}.obs",), lambda o: AgentState(o, False))))
        equations.append(StructuralEquation(
            f"{X}.headway", [f"{X}.state"] + [f"{o}.state" for o in others],
            _headway_eq(lane_map)))
    return build_model(equations, exo)


def _replaying(prev_state: AgentState, obs, action, obs_action) -> bool:
    return (obs is not None and not prev_state.diverged
            and (action is obs_action or action == obs_action))


def _control_eq(p: VehicleParams, lane_map: LaneMap, cfg: PlannerConfig):
    def f(action, obs_action, obs, prev_state):
        if _replaying(prev_state, obs, action, obs_action):
            return None
        # a body shoved off the road by a collision keeps steering for its goal lane
        return control(action, prev_state.body, p, lane_map, 0.0, cfg, require_lane=False)
    return f


def _env_eq(p: VehicleParams):
    def f(me, *others):
        return environment_forces(me.body, p, [o.body for o in others])
    return f


def _env_init(p: VehicleParams):
    def f(me, *others):
        return environment_forces(me, p, list(others))
    return f


def _state_eq(p: VehicleParams, dt: float, substeps: int):
    def f(prev_state, ctrl: ControlOutput | None, env: EnvForce, obs, action, obs_action):
        if ctrl is None:
            return AgentState(obs, False)
        body = step_vehicle(prev_state.body, p, ctrl.motor_torque, ctrl.steer, env, dt, substeps)
        return AgentState(body, True)
    return f


def _headway_eq(lane_map: LaneMap):
    def f(me, *others):
        lid = lane_map.locate(me.body.position)
        if lid is None:
            return None
        return nearest_headway(me.body, [o.body for o in others], lane_map[lid])
    return f


class World:
    """A rolled-out scene model that supports interventions on controller inputs."""

    def __init__(self, lane_map: LaneMap, setups: Sequence[AgentSetup], cfg: PlannerConfig,
                 model: CausalModel, base: Rollout, t0: float = 0.0, seed: int = 0):
        self.lane_map = lane_map
        self.setups = {s.agent: s for s in setups}
        self.cfg = cfg
        self.model = model
        self.base = base
        self.t0 = t0
        self.seed = seed

    @classmethod
    def build(cls, lane_map: LaneMap, setups: Sequence[AgentSetup], cfg: PlannerConfig,
              duration: float, t0: float = 0.0, seed: int = 0) -> "World":
        """Factual world covering ``duration`` seconds plus one planning horizon."""
        model = build_scene_model(lane_map, setups, cfg, t0)
        span = duration + cfg.horizon
        n = max(int(round(span / cfg.time_step)), 1)
        base = simulate(model, cfg.time_step, n * cfg.time_step, seed)
        return cls(lane_map, setups, cfg, model, base, t0, seed)

    @property
    def agents(self) -> tuple[str, ...]:
        return tuple(self.setups)

    @property
    def time_step(self) -> float:
        return self.cfg.time_step

    def index(self, t: float) -> int:
        return int(round((t - self.t0) / self.cfg.time_step))

    def time(self, k: int) -> float:
        return self.t0 + k * self.cfg.time_step

    def state(self, agent: str, k: int) -> AgentState:
        return self.base.get(f"{agent}.state", k)

    def body(self, agent: str, k: int) -> RigidBodyState:
        return self.state(agent, k).body

    def with_intervention(self, iv: Intervention) -> "World":
        """Apply ``iv`` and re-simulate everything from its first slice onward."""
        model = intervene(self.model, iv)
        k = max(iv.start, self.base.start_index)
        if k >= self.base.last_index:
            return World(self.lane_map, self.setups.values(), self.cfg, model, self.base,
                         self.t0, self.seed)
        span = (self.base.last_index - k) * self.cfg.time_step
        run = simulate(model, self.cfg.time_step, span, self.seed, start_index=k,
                       initial=self.base.slice(k))
        return World(self.lane_map, self.setups.values(), self.cfg, model,
                     self.base.spliced(run), self.t0, self.seed)

    def hold_action(self, agent: str, action: Action, t: float) -> "World":
        return self.with_intervention(
            Intervention(f"{agent}.action", value=action, start=self.index(t)))

    def candidates(self, agent: str, t: float) -> list[Action]:
        body = self.body(agent, self.index(t))
        lane = self.lane_map.locate(body.position)
        if lane is None:
            raise OffMap(f"{agent} is off the map at t={t:.2f}")
        return generate_candidates(body, lane, t, self.cfg, self.lane_map)

    def simulate_action(self, agent: str, t: float, action: Action) -> Rollout:
        k = self.index(t)
        model = intervene(self.model, Intervention(f"{agent}.action", value=action, start=k))
        return simulate(model, self.cfg.time_step, self.cfg.horizon, self.seed, start_index=k,
                        initial=self.base.slice(k))

    def simulate_candidates(self, agent: str, t: float, candidates: Sequence[Action]
                            ) -> list[tuple[Action, Outcome | None]]:
        out = []
        for a in candidates:
            try:
                r = self.simulate_action(agent, t, a)
                out.append((a, self.outcome(r, agent, a)))
            except (NumericOverflow, OffMap):
                out.append((a, None))
        return out

    def segment(self, t: float) -> Rollout:
        """The world's own rollout over one planning horizon from ``t``."""
        k = self.index(t)
        n = int(round(self.cfg.horizon / self.cfg.time_step))
        k1 = min(k + n, self.base.last_index)
        vals = tuple(self.base.slice(j) for j in range(k, k1 + 1))
        return Rollout(self.cfg.time_step, k, vals, self.seed)

    def observed_outcome(self, agent: str, t: float, action: Action) -> Outcome:
        return self.outcome(self.segment(t), agent, action)

    def outcome(self, r: Rollout, agent: str, action: Action) -> Outcome:
        states = r.series(f"{agent}.state")
        lanes = [self.lane_map.locate(s.body.position) for s in states]
        lt = 0
        cur = None
        for lid in lanes:
            if lid is None:
                continue
            if cur is not None and lid != cur:
                lt += self.lane_map.lane_step(cur, lid)
            cur = lid
        fs = max(states[-1].body.forward_speed, 0.0)
        dh = r.values[-1][f"{agent}.headway"]
        ef = max((v[f"{agent}.env"].magnitude for v in r.values[1:]), default=0.0)

        def at(t: float) -> int:
            return min(max(self.index(t), r.start_index), r.last_index) - r.start_index

        ks = at(action.speed_goal.target_time)
        speed_ok = abs(states[ks].body.forward_speed - action.speed) <= self.cfg.speed_tolerance
        lane_ok = lanes[at(action.lane_goal.target_time)] == action.lane
        return Outcome(lt, fs, NO_LEADER if dh is None else dh, ef, speed_ok and lane_ok)

    def trajectory(self, agent: str) -> list[RigidBodyState]:
        return [s.body for s in self.base.series(f"{agent}.state")]
