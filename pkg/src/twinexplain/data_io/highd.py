"""Adapter for highD-layout recordings (tracks, tracks meta, recording meta).

Image coordinates are converted to a right-handed ground frame: the bounding
box corner (x, y) becomes the box centre and y is negated. Upper-carriageway
lanes travel toward -x, lower ones toward +x. Lane ids keep the dataset's
numbering: with ``n_u`` upper markings the upper lanes are ``2..n_u`` and the
lower lanes start at ``n_u + 2``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..lanes import Lane, LaneMap, Vec2
from .scene import AgentTrack, Frame, MalformedRecord, MissingColumn

TRACK_COLUMNS = ("frame", "id", "x", "y", "width", "height", "xVelocity", "yVelocity",
                 "xAcceleration", "yAcceleration", "laneId")
META_COLUMNS = ("frameRate", "upperLaneMarkings", "lowerLaneMarkings")
MAX_SPEED = 70.0   # m/s; anything faster is a unit or parsing error
MAP_MARGIN = 500.0


@dataclass(frozen=True)
class Recording:
    tracks: tuple[AgentTrack, ...]
    lane_map: LaneMap
    frame_rate: float
    name: str = ""

    def track(self, agent: str) -> AgentTrack:
        for t in self.tracks:
            if t.agent == agent:
                return t
        raise KeyError(agent)


def _rows(path: Path, required: Sequence[str]):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing and header:
            raise MissingColumn(f"missing column(s) {', '.join(missing)}", 1, str(path))
        for row in reader:
            yield reader.line_num, row


def _num(row: dict, key: str, line: int, path: Path) -> float:
    raw = row.get(key)
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise MalformedRecord(f"column {key}: not a number: {raw!r}", line, str(path)) from None
    if not math.isfinite(v):
        raise MalformedRecord(f"column {key}: non-finite value {raw!r}", line, str(path))
    return v


def _markings(raw: str, line: int, path: Path) -> list[float]:
    try:
        vals = [float(v) for v in raw.split(";") if v.strip()]
    except ValueError:
        raise MalformedRecord(f"bad lane markings {raw!r}", line, str(path)) from None
    if len(vals) == 1 or vals != sorted(vals):
        raise MalformedRecord(f"lane markings must be increasing and at least two: {raw!r}",
                              line, str(path))
    return vals


def read_recording_meta(path: str | Path) -> tuple[float, list[float], list[float]]:
    path = Path(path)
    for line, row in _rows(path, META_COLUMNS):
        rate = _num(row, "frameRate", line, path)
        if rate <= 0:
            raise MalformedRecord("frameRate must be positive", line, str(path))
        return (rate, _markings(row["upperLaneMarkings"], line, path),
                _markings(row["lowerLaneMarkings"], line, path))
    raise MalformedRecord("recording meta has no data row", None, str(path))


def lanes_from_markings(upper: Sequence[float], lower: Sequence[float],
                        x_range: tuple[float, float]) -> LaneMap:
    """Straight parallel lanes between consecutive marking lines (image y, metres)."""
    x0, x1 = x_range
    lanes = []
    n_u = len(upper)
    up_ids = list(range(2, n_u + 1))
    for i, lid in enumerate(up_ids):
        y = -(upper[i] + upper[i + 1]) / 2
        w = upper[i + 1] - upper[i]
        lanes.append(Lane(lid, (Vec2(x1, y), Vec2(x0, y)), w,
                          left=lid + 1 if lid + 1 in up_ids else None,
                          right=lid - 1 if lid - 1 in up_ids else None))
    lo_ids = list(range(n_u + 2, n_u + len(lower) + 1))
    for i, lid in enumerate(lo_ids):
        y = -(lower[i] + lower[i + 1]) / 2
        w = lower[i + 1] - lower[i]
        lanes.append(Lane(lid, (Vec2(x0, y), Vec2(x1, y)), w,
                          left=lid - 1 if lid - 1 in lo_ids else None,
                          right=lid + 1 if lid + 1 in lo_ids else None))
    return LaneMap(tuple(lanes))


def _read_tracks_meta(path: Path) -> dict[str, str]:
    out = {}
    for line, row in _rows(path, ("id", "class")):
        out[str(int(_num(row, "id", line, path)))] = row["class"].strip().lower()
    return out


def load_recording(tracks_file: str | Path, meta_file: str | Path,
                   lanes_source: str | Path | None = None,
                   tracks_meta: str | Path | None = None) -> Recording:
    """Load one recording into SI ground-frame tracks plus a lane map.

    ``lanes_source`` is either the recording meta itself (lane markings) or a
    JSON lane-map document for maps that are not straight carriageways.
    """
    tracks_file, meta_file = Path(tracks_file), Path(meta_file)
    for p in (tracks_file, meta_file, lanes_source, tracks_meta):
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(str(p))
    rate, upper, lower = read_recording_meta(meta_file)
    classes = _read_tracks_meta(Path(tracks_meta)) if tracks_meta is not None else {}

    per_vehicle: dict[str, list] = {}
    dims: dict[str, tuple[float, float]] = {}
    xs = []
    for line, row in _rows(tracks_file, TRACK_COLUMNS):
        f = {k: _num(row, k, line, tracks_file) for k in TRACK_COLUMNS}
        vx, vy = f["xVelocity"], 0.0 - f["yVelocity"]
        if math.hypot(vx, vy) > MAX_SPEED:
            raise MalformedRecord(f"speed {math.hypot(vx, vy):.1f} m/s outside [0, {MAX_SPEED}]",
                                  line, str(tracks_file))
        length, width = f["width"], f["height"]
        if length <= 0 or width <= 0:
            raise MalformedRecord("vehicle dimensions must be positive", line, str(tracks_file))
        agent = str(int(f["id"]))
        pos = Vec2(f["x"] + length / 2, 0.0 - (f["y"] + width / 2))
        xs.append(pos.x)
        per_vehicle.setdefault(agent, []).append(
            (int(f["frame"]), pos, Vec2(vx, vy), Vec2(f["xAcceleration"], 0.0 - f["yAcceleration"]),
             int(f["laneId"]), line))
        dims.setdefault(agent, (length, width))

    if lanes_source is None or Path(lanes_source) == meta_file \
            or Path(lanes_source).suffix.lower() == ".csv":
        x_range = (min(xs, default=0.0) - MAP_MARGIN, max(xs, default=0.0) + MAP_MARGIN)
        lane_map = lanes_from_markings(upper, lower, x_range)
    else:
        try:
            lane_map = LaneMap.from_dict(json.loads(Path(lanes_source).read_text()))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise MalformedRecord(f"bad lane map: {e}", None, str(lanes_source)) from e

    tracks = []
    for agent in sorted(per_vehicle, key=int):
        rows = sorted(per_vehicle[agent], key=lambda r: r[0])
        for a, b in zip(rows, rows[1:]):
            if b[0] != a[0] + 1:
                raise MalformedRecord(f"vehicle {agent}: frames {a[0]} -> {b[0]} not consecutive",
                                      b[5], str(tracks_file))
        frames = []
        for _, pos, vel, acc, lid, _line in rows:
            if lid not in lane_map:
                lid = lane_map.locate(pos)
            if vel.norm() > 0.5:
                heading = math.atan2(vel.y, vel.x)
            elif lid is not None:
                heading = lane_map[lid].project(pos).heading
            else:
                heading = 0.0
            frames.append(Frame(pos, vel, acc, lid, heading))
        length, width = dims[agent]
        tracks.append(AgentTrack(agent, rate, rows[0][0] / rate, tuple(frames), length, width,
                                 classes.get(agent, "car")))
    return Recording(tuple(tracks), lane_map, rate, tracks_file.stem)
