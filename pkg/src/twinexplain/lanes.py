"""Lane maps: ordered polyline centrelines with widths and left/right adjacency.

Lateral offsets are measured left-positive relative to the direction of travel,
which is the order of the centreline points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

LaneRef = int


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, o):  # type: ignore[override]
        return Vec2(self.x + o[0], self.y + o[1])

    def __sub__(self, o):
        return Vec2(self.x - o[0], self.y - o[1])

    def __mul__(self, k):  # type: ignore[override]
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def dot(self, o) -> float:
        return self.x * o[0] + self.y * o[1]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


ZERO = Vec2(0.0, 0.0)


class LaneFrame(NamedTuple):
    s: float          # along-lane distance from the first centreline point
    d: float          # lateral offset, left positive
    heading: float    # direction of travel at the projection point


@dataclass(frozen=True)
class Lane:
    id: LaneRef
    centreline: tuple[Vec2, ...]
    width: float
    left: LaneRef | None = None
    right: LaneRef | None = None
    successors: tuple[LaneRef, ...] = ()
    _cum: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        pts = tuple(Vec2(float(p[0]), float(p[1])) for p in self.centreline)
        if len(pts) < 2:
            raise ValueError(f"lane {self.id}: centreline needs at least two points")
        if self.width <= 0:
            raise ValueError(f"lane {self.id}: width must be positive")
        object.__setattr__(self, "centreline", pts)
        cum = [0.0]
        for a, b in zip(pts, pts[1:]):
            cum.append(cum[-1] + math.hypot(b.x - a.x, b.y - a.y))
        object.__setattr__(self, "_cum", tuple(cum))

    @property
    def length(self) -> float:
        return self._cum[-1]

    def project(self, p) -> LaneFrame:
        """Closest-point projection of ``p`` onto the centreline."""
        px, py = p[0], p[1]
        pts = self.centreline
        best = None
        for i in range(len(pts) - 1):
            ax, ay = pts[i]
            bx, by = pts[i + 1]
            dx, dy = bx - ax, by - ay
            seg2 = dx * dx + dy * dy
            u = ((px - ax) * dx + (py - ay) * dy) / seg2
            uc = min(max(u, 0.0), 1.0)
            qx, qy = ax + uc * dx, ay + uc * dy
            dist2 = (px - qx) ** 2 + (py - qy) ** 2
            if best is None or dist2 < best[0]:
                seg = math.sqrt(seg2)
                cross = (dx * (py - ay) - dy * (px - ax)) / seg
                best = (dist2, self._cum[i] + u * seg, cross, math.atan2(dy, dx))
        _, s, d, h = best
        return LaneFrame(s, d, h)

    def contains(self, p) -> bool:
        f = self.project(p)
        return -1e-9 <= f.s <= self.length + 1e-9 and abs(f.d) <= self.width / 2


@dataclass(frozen=True)
class LaneMap:
    lanes: tuple[Lane, ...]

    def __post_init__(self):
        ids = [l.id for l in self.lanes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate lane ids")
        known = set(ids)
        for l in self.lanes:
            for ref in (l.left, l.right, *l.successors):
                if ref is not None and ref not in known:
                    raise ValueError(f"lane {l.id} references unknown lane {ref}")

    def __getitem__(self, lane_id: LaneRef) -> Lane:
        for l in self.lanes:
            if l.id == lane_id:
                return l
        raise KeyError(lane_id)

    def __contains__(self, lane_id) -> bool:
        return any(l.id == lane_id for l in self.lanes)

    @property
    def ids(self) -> tuple[LaneRef, ...]:
        return tuple(l.id for l in self.lanes)

    def locate(self, p) -> LaneRef | None:
        """Lane containing point ``p``; the nearest centreline wins on a shared boundary."""
        best = None
        for l in self.lanes:
            f = l.project(p)
            if -1e-9 <= f.s <= l.length + 1e-9 and abs(f.d) <= l.width / 2:
                if best is None or abs(f.d) < best[0]:
                    best = (abs(f.d), l.id)
        return None if best is None else best[1]

    def lane_step(self, src: LaneRef, dst: LaneRef) -> int:
        """Signed number of lane transitions from ``src`` to ``dst`` (left positive).

        Returns 0 for unconnected lanes (branches are not lane changes).
        """
        if src == dst:
            return 0
        for attr, sign in (("left", 1), ("right", -1)):
            cur, n = src, 0
            seen = set()
            while cur is not None and cur not in seen:
                seen.add(cur)
                cur = getattr(self[cur], attr)
                n += 1
                if cur == dst:
                    return sign * n
        return 0

    def neighbour(self, lane_id: LaneRef, side: str) -> LaneRef | None:
        if side == "stay":
            return lane_id
        return getattr(self[lane_id], side)

    # serialisation helpers
    def to_dict(self) -> dict:
        return {"lanes": [
            {"id": l.id, "centreline": [list(p) for p in l.centreline], "width": l.width,
             "left": l.left, "right": l.right, "successors": list(l.successors)}
            for l in self.lanes]}

    @classmethod
    def from_dict(cls, d: dict) -> "LaneMap":
        return cls(tuple(
            Lane(int(l["id"]), tuple(Vec2(*p) for p in l["centreline"]), float(l["width"]),
                 l.get("left"), l.get("right"), tuple(l.get("successors", ())))
            for l in d["lanes"]))


def straight_highway(n_lanes: int, *, width: float = 3.5, x_min: float = -2000.0,
                     x_max: float = 4000.0, first_id: int = 1) -> LaneMap:
    """Parallel straight lanes travelling +x; lane ``first_id`` is leftmost (largest y)."""
    lanes = []
    for i in range(n_lanes):
        y = (n_lanes - 1 - i) * width
        lid = first_id + i
        lanes.append(Lane(
            lid, (Vec2(x_min, y), Vec2(x_max, y)), width,
            left=lid - 1 if i > 0 else None,
            right=lid + 1 if i < n_lanes - 1 else None))
    return LaneMap(tuple(lanes))
