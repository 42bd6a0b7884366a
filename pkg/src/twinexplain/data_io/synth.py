"""Synthetic labelled scenes produced by the dynamics and controller stack.

Each template scripts a few goal changes per vehicle and rolls the scene
model forward with every agent simulated (no observations after the first
slice). The ground-truth adjacency comes from the template: the scripted
reaction of ``c1`` to ``c0``. Every template adds independent vehicles
``i0, i1, ...`` far enough away that nothing they do can matter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..actions import TimeActionPair, make_action
from ..agent import PlannerConfig
from ..dynamics import RigidBodyState, default_vehicle
from ..lanes import LaneMap, Vec2, straight_highway
from ..scm import simulate
from ..world import AgentSetup, build_scene_model
from .scene import AgentTrack, Frame, SceneModel

TEMPLATES = ("convoy-brake", "merge", "overtake", "independent")
SPEC_FORMAT = "twinexplain-scenario/1"
CAR = (4.5, 1.8)


class UnknownTemplate(ValueError):
    def __init__(self, name):
        super().__init__(f"unknown template {name!r}; valid templates: {', '.join(TEMPLATES)}")
        self.name = name


@dataclass(frozen=True)
class ScenarioSpec:
    template: str
    duration: float = 12.0
    n_independent: int | None = None   # None: 2 or 3, drawn from the seed
    frame_rate: float = 10.0

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise UnknownTemplate(self.template)
        if self.duration <= 2.0:
            raise ValueError("duration must exceed 2 s")
        if self.n_independent is not None and self.n_independent < 0:
            raise ValueError("n_independent must be non-negative")

    def to_dict(self) -> dict:
        return {"format": SPEC_FORMAT, "template": self.template, "duration": self.duration,
                "n_independent": self.n_independent, "frame_rate": self.frame_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        extra = set(d) - {"format", "template", "duration", "n_independent", "frame_rate"}
        if extra:
            raise ValueError(f"unknown scenario keys {sorted(extra)}")
        if d.get("format", SPEC_FORMAT) != SPEC_FORMAT:
            raise ValueError(f"unsupported scenario format {d['format']!r}")
        return cls(d["template"], float(d.get("duration", 12.0)), d.get("n_independent"),
                   float(d.get("frame_rate", 10.0)))


@dataclass
class _Script:
    agent: str
    lane: int
    x: float
    speed: float
    # (time, speed, speed target time, lane, lane target time)
    goals: list[tuple[float, float, float, int, float]] = field(default_factory=list)
    cls: str = "car"


def _initial_body(lm: LaneMap, s: _Script) -> RigidBodyState:
    length, width = CAR
    _, mass, inertia = default_vehicle(length, width)
    y = lm[s.lane].centreline[0].y
    return RigidBodyState(Vec2(s.x, y), Vec2(s.speed, 0.0), Vec2(0.0, 0.0), mass, 0.0, 0.0, 0.0,
                          inertia, Vec2(length / 2, width / 2))


def _place_independents(rng, lm: LaneMap, taken: list[tuple[int, float]], count: int,
                        v_ref: float, t_end: float) -> list[_Script]:
    """Vehicles far from the scripted pair and 150 m from each other.

    The 250 m margin covers the relative drift of a braking or accelerating
    pair over the scene plus one planning horizon.
    """
    out = []
    lanes = list(lm.ids)
    flags = [True] * len(taken)
    for i in range(count):
        for _ in range(200):
            lane = int(rng.choice(lanes))
            x = float(rng.uniform(-650.0, 650.0))
            if all(abs(x - x2) >= (250.0 if scripted else 150.0)
                   for (_, x2), scripted in zip(taken, flags)):
                break
        else:
            raise RuntimeError("could not place an independent vehicle")
        taken.append((lane, x))
        flags.append(False)
        v = float(v_ref + rng.uniform(-2.0, 2.0))
        s = _Script(f"i{i}", lane, x, v)
        # short scenes leave no room for a scripted manoeuvre
        if rng.random() < 0.7 and t_end - 5.0 > 1.5:
            t = float(np.round(rng.uniform(1.5, t_end - 5.0), 1))
            if rng.random() < 0.5:
                dv = float(rng.choice([-1.0, 1.0]) * rng.uniform(3.0, 6.0))
                s.goals.append((t, v + dv, t + 3.0, lane, t + 3.0))
            else:
                opts = [l for l in (lm[lane].left, lm[lane].right) if l is not None]
                s.goals.append((t, v, t + 4.0, int(rng.choice(opts)), t + 4.0))
        out.append(s)
    return out


def _convoy_brake(rng, lm):
    v0 = float(rng.uniform(24.0, 30.0))
    lane = int(rng.choice(list(lm.ids)))
    # a close follower: keeping speed after the brake would break the two-second rule
    gap = float(rng.uniform(1.0, 1.5)) * v0
    t_b = float(np.round(rng.uniform(2.5, 4.0), 1))
    dv = float(rng.uniform(8.0, 12.0))
    t_r = float(np.round(t_b + rng.uniform(0.6, 1.2), 1))
    c0 = _Script("c0", lane, gap + CAR[0], v0, [(t_b, v0 - dv, t_b + 3.0, lane, t_b + 3.0)])
    v1 = v0 - dv - float(rng.uniform(0.0, 1.5))
    c1 = _Script("c1", lane, 0.0, v0, [(t_r, v1, t_r + 3.0, lane, t_r + 3.0)])
    return [c0, c1], v0


def _merge(rng, lm):
    # rightmost lane plays the on-ramp
    ramp = lm.ids[-1]
    main = lm[ramp].left
    v = float(rng.uniform(20.0, 26.0))
    t_c = float(np.round(rng.uniform(1.5, 3.0), 1))
    dv = float(rng.uniform(6.0, 9.0))
    t_m = float(np.round(t_c + rng.uniform(1.5, 2.5), 1))
    c0 = _Script("c0", main, 0.0, v, [(t_c, v + dv, t_c + 3.0, main, t_c + 3.0)])
    c1 = _Script("c1", ramp, -float(rng.uniform(0.0, 5.0)), v + float(rng.uniform(-1.0, 1.0)),
                 [(t_m, v, t_m + 4.0, main, t_m + 4.0)])
    return [c0, c1], v


def _overtake(rng, lm):
    ids = list(lm.ids)
    fast = ids[0]
    slow = lm[fast].right
    v1 = float(rng.uniform(20.0, 25.0))
    v0 = v1 + float(rng.uniform(6.0, 9.0))
    behind = float(rng.uniform(15.0, 25.0))
    ahead = float(rng.uniform(12.0, 18.0))
    t_c = float(np.round((behind + ahead) / (v0 - v1), 1))
    v_after = v1 - float(rng.uniform(3.0, 5.0))
    t_r = float(np.round(t_c + rng.uniform(1.0, 1.8), 1))
    c0 = _Script("c0", fast, -behind, v0, [(t_c, v_after, t_c + 4.0, slow, t_c + 4.0)])
    c1 = _Script("c1", slow, 0.0, v1,
                 [(t_r, v1 - float(rng.uniform(4.0, 7.0)), t_r + 3.0, slow, t_r + 3.0)])
    return [c0, c1], v1


def synth_scene(spec: ScenarioSpec | str, seed: int = 0) -> SceneModel:
    if isinstance(spec, str):
        spec = ScenarioSpec(spec)
    rng = np.random.default_rng([seed, TEMPLATES.index(spec.template)])
    lm = straight_highway(3)
    if spec.template == "convoy-brake":
        scripts, v_ref = _convoy_brake(rng, lm)
    elif spec.template == "merge":
        scripts, v_ref = _merge(rng, lm)
    elif spec.template == "overtake":
        scripts, v_ref = _overtake(rng, lm)
    else:
        scripts, v_ref = [], float(rng.uniform(22.0, 30.0))
    n_ind = spec.n_independent
    if n_ind is None:
        n_ind = 4 if spec.template == "independent" else int(rng.integers(2, 4))
    # reserve the interaction zone around the scripted pair
    taken = [(s.lane, s.x) for s in scripts] or [(0, 1e9)]
    scripts += _place_independents(rng, lm, taken, n_ind, v_ref, spec.duration)
    labels = frozenset({("c0", "c1")}) if scripts and scripts[0].agent == "c0" else frozenset()
    scene = _roll_out(lm, scripts, spec, seed)
    return SceneModel(scene.lane_map, scene.tracks, scene.time_range, labels,
                      f"{spec.template}-{seed}", {"generator": spec.to_dict(), "seed": seed})


def _roll_out(lm: LaneMap, scripts: list[_Script], spec: ScenarioSpec, seed: int) -> SceneModel:
    dt = 1.0 / spec.frame_rate
    cfg = PlannerConfig(time_step=dt)
    n = int(round(spec.duration / dt)) + 1
    setups = []
    for s in scripts:
        params, _, _ = default_vehicle(*CAR)
        acts = [TimeActionPair(s.agent, 0.0, make_action(s.speed, 0.0, s.lane, 0.0))]
        for t, v, tv, lane, tl in s.goals:
            acts.append(TimeActionPair(s.agent, t, make_action(max(v, 0.0), tv, lane, tl)))
        observed = (_initial_body(lm, s),) + (None,) * (n - 1)
        setups.append(AgentSetup(s.agent, params, observed, tuple(acts)))
    model = build_scene_model(lm, setups, cfg)
    run = simulate(model, dt, (n - 1) * dt, seed)
    tracks = []
    for s in scripts:
        frames = []
        for st in run.series(f"{s.agent}.state"):
            b = st.body
            frames.append(Frame(_r(b.position), _r(b.velocity), _r(b.acceleration),
                                lm.locate(b.position), round(b.rotation, 9)))
        tracks.append(AgentTrack(s.agent, spec.frame_rate, 0.0, tuple(frames), *CAR, s.cls))
    return SceneModel(lm, tuple(tracks), (0.0, (n - 1) * dt))


def _r(v: Vec2) -> Vec2:
    # rounding keeps the written scene files short and round-trip exact
    return Vec2(round(v.x, 9), round(v.y, 9))
