"""Twin-world causal discovery between agent actions.

For a candidate cause (agent C acting at t_C) and effect (agent A acting at
t_A > t_C):

1. fit a reward profile for A's decision at t_A,
2. plan for A in the observed world,
3. plan for A in a world where C kept its previous action from t_C on,
4. call the link causal when the two plans are further apart than a threshold.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .actions import (Action, ActionDistanceConfig, Goal, TimeActionPair, action_distance,
                      make_action)
from .agent import AllCandidatesDiverged, OffMap, PlannerConfig, maintain_action, select_best
from .data_io.scene import AgentTrack, SceneModel
from .lanes import LaneMap
from .reward import (FEATURE_NAMES, Outcome, OutcomeDistanceConfig, RewardConfig, RewardProfile,
                     learn_profile)
from .scm import NumericOverflow
from .world import AgentSetup, World

log = logging.getLogger(__name__)

MOTIVES = ("lane progress", "safe headway", "higher speed", "lower speed",
           "collision avoidance")


class TrackTooShort(ValueError):
    pass


class PlanningFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionConfig:
    accel_threshold: float = 0.3            # m/s^2
    hysteresis: float = 0.5                 # s
    lateral_speed_threshold: float = 0.2    # m/s


@dataclass(frozen=True)
class EngineConfig:
    reward: RewardConfig = RewardConfig()
    distance: OutcomeDistanceConfig = OutcomeDistanceConfig()
    action: ActionDistanceConfig = ActionDistanceConfig()
    planner: PlannerConfig = PlannerConfig()
    extraction: ExtractionConfig = ExtractionConfig()
    seed: int = 0

    def with_threshold(self, threshold: float) -> "EngineConfig":
        return replace(self, action=replace(self.action, threshold=threshold))


# ---------------------------------------------------------------------------
# action extraction

def _forward(frame) -> tuple[float, float]:
    hx, hy = math.cos(frame.heading), math.sin(frame.heading)
    return (frame.velocity.x * hx + frame.velocity.y * hy,
            frame.acceleration.x * hx + frame.acceleration.y * hy)


def _phases(acc: Sequence[float], hold: int, thr: float) -> list[tuple[str, int, int]]:
    """Longitudinal phases (mode, first frame, last frame) with a persistence filter."""
    def classify(a):
        return "accel" if a > thr else "decel" if a < -thr else "cruise"

    mode, start = "cruise", 0
    run_mode, run_start = None, None
    out = []
    for i, a in enumerate(acc):
        c = classify(a)
        if c == mode:
            run_mode = run_start = None
            continue
        if c != run_mode:
            run_mode, run_start = c, i
        if i - run_start + 1 >= hold:
            if run_start > start:
                out.append((mode, start, run_start))
            mode, start = c, run_start
            run_mode = run_start = None
    out.append((mode, start, len(acc) - 1))
    return out


def extract_actions(track: AgentTrack, lane_map: LaneMap,
                    cfg: ExtractionConfig = ExtractionConfig()) -> list[TimeActionPair]:
    """Segment a track into discrete time-action pairs.

    Longitudinal manoeuvres start when the acceleration leaves the dead band
    for longer than the hysteresis; their speed goal is the speed at the end
    of the phase. Lane changes start at the last frame before the lateral
    speed toward the new lane exceeds the threshold.
    """
    frames = track.frames
    n = len(frames)
    if n < 2:
        raise TrackTooShort(f"track {track.agent} has {n} frame(s)")
    fwd = [_forward(f) for f in frames]
    speeds = [max(v, 0.0) for v, _ in fwd]
    hold = max(1, int(round(cfg.hysteresis * track.frame_rate)))
    phases = _phases([a for _, a in fwd], hold, cfg.accel_threshold)

    events: list[tuple[int, int, str, Goal]] = []
    for order, (mode, i0, i1) in enumerate(phases):
        if order == 0 or mode == "cruise":
            continue
        events.append((i0, 0, "speed", Goal(speeds[i1], track.time(i1))))

    lanes = [f.lane_id for f in frames]
    prev_lane = next((l for l in lanes if l is not None), None)
    for i in range(1, n):
        lid = lanes[i]
        if lid is None or prev_lane is None or lid == prev_lane:
            if lid is not None:
                prev_lane = lid
            continue
        sign = lane_map.lane_step(prev_lane, lid) if prev_lane in lane_map and lid in lane_map \
            else 0
        sign = 1 if sign > 0 else -1 if sign < 0 else 0

        def toward(j, ref=prev_lane, s=sign):
            if s == 0 or ref not in lane_map:
                return 0.0
            h = lane_map[ref].project(frames[j].position).heading
            return s * (-frames[j].velocity.x * math.sin(h) + frames[j].velocity.y * math.cos(h))

        j = i - 1
        while j > 0 and toward(j) > cfg.lateral_speed_threshold:
            j -= 1
        m = i
        while m < n - 1 and toward(m) > cfg.lateral_speed_threshold:
            m += 1
        events.append((j, 1, "lane", Goal(lid, track.time(m))))
        prev_lane = lid

    _, first_start, first_end = phases[0]
    speed_goal = Goal(speeds[first_end], track.time(first_end))
    first_lane = next((l for l in lanes if l is not None), None)
    if first_lane is None:
        raise TrackTooShort(f"track {track.agent} never lies in a lane")
    lane_goal = Goal(first_lane, track.time(0))
    out = [TimeActionPair(track.agent, track.time(0), Action(speed_goal, lane_goal))]
    for idx, _, kind, goal in sorted(events, key=lambda e: (e[0], e[1])):
        if kind == "speed":
            speed_goal = goal
        else:
            lane_goal = goal
        act = Action(speed_goal, lane_goal)
        t = track.time(idx)
        if act == out[-1].action:
            continue
        if len(out) > 1 and t - out[-1].t_a < cfg.hysteresis - 1e-9:
            # parts of one manoeuvre detected a few frames apart
            out[-1] = TimeActionPair(track.agent, out[-1].t_a, act)
        elif abs(t - out[-1].t_a) < 1e-9:
            out[-1] = TimeActionPair(track.agent, t, act)
        else:
            out.append(TimeActionPair(track.agent, t, act))
    return out


# ---------------------------------------------------------------------------
# world construction

def scene_world(scene: SceneModel, actions: dict[str, list[TimeActionPair]],
                cfg: PlannerConfig, seed: int = 0) -> World:
    """Factual world replaying the scene's tracks."""
    t0, t1 = scene.time_range
    dt = cfg.time_step
    n = int(round((t1 - t0) / dt)) + 1
    setups = []
    for tr in scene.tracks:
        bodies = {}
        observed = []
        for k in range(n):
            i = tr.frame_index(t0 + k * dt)
            if i is None:
                observed.append(None)
                continue
            if i not in bodies:
                bodies[i] = tr.body(i)
            observed.append(bodies[i])
        if observed[0] is None:
            raise ValueError(f"track {tr.agent} does not cover the scene start")
        # trailing None from the track ending early: extrapolated by simulation
        params, _, _ = tr.vehicle()
        setups.append(AgentSetup(tr.agent, params, tuple(observed), tuple(actions[tr.agent])))
    return World.build(scene.lane_map, setups, cfg, duration=t1 - t0, t0=t0, seed=seed)


# ---------------------------------------------------------------------------
# causal test

@dataclass(frozen=True)
class CausalLink:
    cause: TimeActionPair
    effect: TimeActionPair
    distance: float
    factual_plan: Action
    counterfactual_plan: Action
    cause_previous: Action | None = None
    cause_manoeuvre: str = "acting"
    effect_manoeuvre: str = "act differently"

    def __post_init__(self):
        if not self.cause.t_a < self.effect.t_a:
            raise ValueError("a cause must precede its effect")


@dataclass(frozen=True)
class PairResult:
    cause: TimeActionPair
    effect: TimeActionPair
    distance: float | None
    factual_plan: Action | None = None
    counterfactual_plan: Action | None = None
    cause_previous: Action | None = None
    cause_manoeuvre: str = ""
    effect_manoeuvre: str = ""
    error: str | None = None

    def link(self, threshold: float) -> CausalLink | None:
        if self.distance is None or not self.distance > threshold:
            return None
        return CausalLink(self.cause, self.effect, self.distance, self.factual_plan,
                          self.counterfactual_plan, self.cause_previous, self.cause_manoeuvre,
                          self.effect_manoeuvre)


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class CausalGraph:
    vertices: tuple[TimeActionPair, ...]
    tests: tuple[PairResult, ...]
    threshold: float = 0.0
    profiles: dict = field(default_factory=dict, compare=False)
    agents: tuple[str, ...] = ()

    @property
    def edges(self) -> tuple[CausalLink, ...]:
        out = []
        for r in self.tests:
            link = r.link(self.threshold)
            if link is not None:
                out.append(link)
        return tuple(out)

    @property
    def agent_adjacency(self) -> frozenset[tuple[str, str]]:
        return frozenset(_pair_key(e.cause.agent, e.effect.agent) for e in self.edges)

    @property
    def failures(self) -> tuple[PairResult, ...]:
        return tuple(r for r in self.tests if r.error is not None)

    def at_threshold(self, threshold: float) -> "CausalGraph":
        return replace(self, threshold=threshold)


def _gerund(verb: str) -> str:
    return {"accelerate": "accelerating", "slow down": "slowing down",
            "change lane left": "changing lane left", "change lane right": "changing lane right",
            "maintain course": "maintaining course"}.get(verb, verb)


def manoeuvre(new: Action, old: Action, lane_map: LaneMap | None = None,
              speed_eps: float = 0.5) -> str:
    """Verb describing ``new`` relative to ``old``."""
    if new.lane != old.lane:
        step = lane_map.lane_step(old.lane, new.lane) if lane_map is not None else 0
        return "change lane left" if step > 0 else "change lane right" if step < 0 \
            else "change lane"
    dv = new.speed - old.speed
    if dv > speed_eps:
        return "accelerate"
    if dv < -speed_eps:
        return "slow down"
    return "maintain course"


def top_motive(profile: RewardProfile) -> str:
    w = profile.weights[:5]
    best = max(range(5), key=lambda i: (abs(w[i]), -i))
    return MOTIVES[best]


def explain(link: CausalLink, profile: RewardProfile) -> str:
    c, a = link.cause.agent, link.effect.agent
    return (f"{c} {_gerund(link.cause_manoeuvre)} caused {a} to {link.effect_manoeuvre}, "
            f"as {a} wishes to prioritise {top_motive(profile)}")


@dataclass
class _EffectInfo:
    profile: RewardProfile | None
    factual_plan: Action | None
    candidates: list[Action]
    observed: Outcome | None
    error: str | None = None


class SceneAnalysis:
    """Caches shared between all pair tests of one scene.

    The profile and factual plan depend only on the effect; the counterfactual
    world depends only on the cause.
    """

    def __init__(self, scene: SceneModel, cfg: EngineConfig = EngineConfig(),
                 actions: dict[str, list[TimeActionPair]] | None = None):
        self.scene = scene
        self.cfg = cfg
        if actions is None:
            actions = {tr.agent: extract_actions(tr, scene.lane_map, cfg.extraction)
                       for tr in scene.tracks}
        self.actions = actions
        self.world = scene_world(scene, actions, cfg.planner, cfg.seed)
        self._effects: dict[TimeActionPair, _EffectInfo] = {}
        self._cf_worlds: dict[TimeActionPair, World] = {}

    def previous_action(self, pair: TimeActionPair) -> Action:
        seq = self.actions[pair.agent]
        i = seq.index(pair)
        return seq[i - 1].action if i > 0 else pair.action

    def effect_info(self, effect: TimeActionPair) -> _EffectInfo:
        info = self._effects.get(effect)
        if info is not None:
            return info
        cfg = self.cfg
        w = self.world
        A, t = effect.agent, effect.t_a
        try:
            cands = w.candidates(A, t)
            outcomes = w.simulate_candidates(A, t, cands)
            observed = w.observed_outcome(A, t, effect.action)
            hyps = [o for _, o in outcomes if o is not None]
            if cfg.planner.include_observed:
                # intervening with the observed action reproduces the factual rollout
                hyps.append(w.outcome(w.simulate_action(A, t, effect.action), A, effect.action))
            profile = learn_profile(observed, hyps, cfg.reward, cfg.distance)
            keep = self._maintain(w, A, t)
            fplan = select_best(outcomes, profile, keep, cfg.reward, cfg.action)
            info = _EffectInfo(profile, fplan, cands, observed)
        except (AllCandidatesDiverged, OffMap, NumericOverflow, ValueError) as e:
            info = _EffectInfo(None, None, [], None, f"{type(e).__name__}: {e}")
        self._effects[effect] = info
        return info

    def _maintain(self, w: World, agent: str, t: float) -> Action:
        body = w.body(agent, w.index(t))
        lane = w.lane_map.locate(body.position)
        return maintain_action(body.forward_speed, lane if lane is not None else -1, t,
                               self.cfg.planner)

    def counterfactual_world(self, cause: TimeActionPair) -> World:
        cf = self._cf_worlds.get(cause)
        if cf is None:
            held = self.previous_action(cause)
            if held == cause.action:
                cf = self.world
            else:
                cf = self.world.hold_action(cause.agent, held, cause.t_a)
            self._cf_worlds[cause] = cf
        return cf

    def test(self, cause: TimeActionPair, effect: TimeActionPair) -> PairResult:
        if not cause.t_a < effect.t_a:
            raise ValueError("cause must precede effect")
        if cause.agent == effect.agent:
            raise ValueError("cause and effect must belong to different agents")
        held = self.previous_action(cause)
        c_verb = manoeuvre(cause.action, held, self.scene.lane_map)
        info = self.effect_info(effect)
        if info.error is not None:
            return PairResult(cause, effect, None, cause_previous=held, cause_manoeuvre=c_verb,
                              error=f"PlanningFailed: {info.error}")
        try:
            cf = self.counterfactual_world(cause)
        except (NumericOverflow, OffMap) as e:
            return PairResult(cause, effect, None, cause_previous=held, cause_manoeuvre=c_verb,
                              error=f"PlanningFailed: counterfactual world: {e}")
        A, t = effect.agent, effect.t_a
        if cf is self.world:
            cplan = info.factual_plan
        else:
            try:
                cands = cf.candidates(A, t)
                outcomes = cf.simulate_candidates(A, t, cands)
                cplan = select_best(outcomes, info.profile, self._maintain(cf, A, t),
                                    self.cfg.reward, self.cfg.action)
            except (AllCandidatesDiverged, OffMap) as e:
                return PairResult(cause, effect, None, cause_previous=held,
                                  cause_manoeuvre=c_verb,
                                  error=f"PlanningFailed: {type(e).__name__}: {e}")
        d = action_distance(info.factual_plan, cplan, self.cfg.action)
        e_verb = manoeuvre(info.factual_plan, cplan, self.scene.lane_map)
        return PairResult(cause, effect, d, info.factual_plan, cplan, held, c_verb, e_verb)

    def pairs(self) -> list[tuple[TimeActionPair, TimeActionPair]]:
        """Cross-agent pairs in temporal order, deterministic."""
        allp = sorted((p for seq in self.actions.values() for p in seq),
                      key=lambda p: (p.t_a, p.agent))
        return [(c, e) for c in allp for e in allp
                if c.agent != e.agent and c.t_a < e.t_a]

    def discover(self) -> CausalGraph:
        tests = tuple(self.test(c, e) for c, e in self.pairs())
        vertices = tuple(sorted((p for seq in self.actions.values() for p in seq),
                                key=lambda p: (p.t_a, p.agent)))
        profiles = {eff: info.profile for eff, info in self._effects.items()
                    if info.profile is not None}
        return CausalGraph(vertices, tests, self.cfg.action.threshold, profiles,
                           self.scene.agents)


def test_causal_link(scene: SceneModel, cause: TimeActionPair, effect: TimeActionPair,
                     cfgs: EngineConfig = EngineConfig(), *,
                     analysis: SceneAnalysis | None = None
                     ) -> tuple[bool, CausalLink | None]:
    analysis = analysis or SceneAnalysis(scene, cfgs)
    r = analysis.test(cause, effect)
    if r.error is not None:
        raise PlanningFailed(r.error)
    link = r.link(cfgs.action.threshold)
    return link is not None, link


def discover(scene: SceneModel, cfgs: EngineConfig = EngineConfig()) -> CausalGraph:
    return SceneAnalysis(scene, cfgs).discover()


def counterfactual_world(world: World, cause: TimeActionPair, previous: Action) -> World:
    """World in which ``cause.agent`` keeps ``previous`` from ``cause.t_a`` onward."""
    if previous == cause.action:
        return world
    return world.hold_action(cause.agent, previous, cause.t_a)
