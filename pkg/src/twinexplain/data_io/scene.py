"""Track and scene types plus the native JSON scene format."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..dynamics import RigidBodyState, default_vehicle
from ..lanes import LaneMap, Vec2

SCENE_FORMAT = "twinexplain-scene/1"


class MalformedRecord(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path


class MissingColumn(MalformedRecord):
    pass


@dataclass(frozen=True)
class Frame:
    position: Vec2
    velocity: Vec2
    acceleration: Vec2
    lane_id: int | None
    heading: float

    @property
    def speed(self) -> float:
        return self.velocity.norm()


@dataclass(frozen=True)
class AgentTrack:
    agent: str
    frame_rate: float
    start_time: float
    frames: tuple[Frame, ...]
    length: float
    width: float
    cls: str = "car"

    @property
    def end_time(self) -> float:
        return self.start_time + (len(self.frames) - 1) / self.frame_rate

    @property
    def duration(self) -> float:
        return (len(self.frames) - 1) / self.frame_rate

    def time(self, i: int) -> float:
        return self.start_time + i / self.frame_rate

    def frame_index(self, t: float) -> int | None:
        i = int(round((t - self.start_time) * self.frame_rate))
        if 0 <= i < len(self.frames):
            return i
        return None

    def vehicle(self):
        mass = 15000.0 if self.cls == "truck" else 1500.0
        return default_vehicle(self.length, self.width, mass=mass)

    def body(self, i: int) -> RigidBodyState:
        """Rigid-body state at frame ``i`` with yaw rate from neighbouring frames."""
        f = self.frames[i]
        _, mass, inertia = self.vehicle()
        j0, j1 = max(i - 1, 0), min(i + 1, len(self.frames) - 1)
        omega = 0.0
        if j1 > j0:
            dh = math.remainder(self.frames[j1].heading - self.frames[j0].heading, 2 * math.pi)
            omega = dh * self.frame_rate / (j1 - j0)
        return RigidBodyState(f.position, f.velocity, f.acceleration, mass, f.heading, omega, 0.0,
                              inertia, Vec2(self.length / 2, self.width / 2))

    def clipped(self, t0: float, t1: float) -> "AgentTrack":
        i0 = max(int(math.ceil((t0 - self.start_time) * self.frame_rate - 1e-9)), 0)
        i1 = min(int(math.floor((t1 - self.start_time) * self.frame_rate + 1e-9)),
                 len(self.frames) - 1)
        return AgentTrack(self.agent, self.frame_rate, self.time(i0), self.frames[i0:i1 + 1],
                          self.length, self.width, self.cls)

    def renamed(self, agent: str) -> "AgentTrack":
        return AgentTrack(agent, self.frame_rate, self.start_time, self.frames, self.length,
                          self.width, self.cls)


def _pair(a, b) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class SceneModel:
    lane_map: LaneMap
    tracks: tuple[AgentTrack, ...]
    time_range: tuple[float, float]
    labels: frozenset[tuple[str, str]] | None = None
    name: str = ""
    source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t0, t1 = self.time_range
        for tr in self.tracks:
            if tr.start_time < t0 - 1e-6 or tr.end_time > t1 + 1e-6:
                raise ValueError(f"track {tr.agent} leaves the scene time range")
        if self.labels is not None:
            object.__setattr__(self, "labels", frozenset(_pair(*e) for e in self.labels))

    @property
    def agents(self) -> tuple[str, ...]:
        return tuple(t.agent for t in self.tracks)

    def track(self, agent: str) -> AgentTrack:
        for t in self.tracks:
            if t.agent == agent:
                return t
        raise KeyError(agent)

    @property
    def labelled(self) -> bool:
        return self.labels is not None

    # -- native format -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": SCENE_FORMAT,
            "name": self.name,
            "time_range": list(self.time_range),
            "lane_map": self.lane_map.to_dict(),
            "labels": None if self.labels is None else sorted(list(e) for e in self.labels),
            "source": self.source,
            "tracks": [{
                "agent": t.agent, "frame_rate": t.frame_rate, "start_time": t.start_time,
                "length": t.length, "width": t.width, "class": t.cls,
                "frames": [[*f.position, *f.velocity, *f.acceleration, f.lane_id, f.heading]
                           for f in t.frames],
            } for t in self.tracks],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneModel":
        if d.get("format") != SCENE_FORMAT:
            raise MalformedRecord(f"unsupported scene format {d.get('format')!r}")
        tracks = []
        for t in d["tracks"]:
            frames = tuple(
                Frame(Vec2(r[0], r[1]), Vec2(r[2], r[3]), Vec2(r[4], r[5]),
                      None if r[6] is None else int(r[6]), float(r[7]))
                for r in t["frames"])
            tracks.append(AgentTrack(t["agent"], float(t["frame_rate"]), float(t["start_time"]),
                                     frames, float(t["length"]), float(t["width"]),
                                     t.get("class", "car")))
        labels = d.get("labels")
        return cls(LaneMap.from_dict(d["lane_map"]), tuple(tracks), tuple(d["time_range"]),
                   None if labels is None else frozenset(tuple(e) for e in labels),
                   d.get("name", ""), d.get("source", {}))


def write_scene(scene: SceneModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=1, sort_keys=True) + "\n")


def read_scene(path: str | Path) -> SceneModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise MalformedRecord(str(e), e.lineno, str(path)) from e
    return SceneModel.from_dict(data)


def read_scenes(paths: Iterable[str | Path]) -> list[SceneModel]:
    return [read_scene(p) for p in paths]
