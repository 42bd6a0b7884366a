"""Convoy scenes: a leader/follower pair that stays close in one lane."""
from __future__ import annotations

from .highd import Recording
from .scene import AgentTrack, SceneModel


def _gap(lead: AgentTrack, follow: AgentTrack, i_l: int, i_f: int, lane_map) -> float | None:
    """Bumper-to-bumper gap along the shared lane, or None when not convoying."""
    fl, ff = lead.frames[i_l], follow.frames[i_f]
    if fl.lane_id is None or fl.lane_id != ff.lane_id or fl.lane_id not in lane_map:
        return None
    lane = lane_map[fl.lane_id]
    ds = lane.project(fl.position).s - lane.project(ff.position).s
    if ds <= 0:
        return None
    return ds - (lead.length + follow.length) / 2


def _blocked(lead, follow, others, t, lane_map) -> bool:
    """Another vehicle sits between the pair in their lane."""
    fl = lead.frames[lead.frame_index(t)]
    lane = lane_map[fl.lane_id]
    s_l = lane.project(fl.position).s
    s_f = lane.project(follow.frames[follow.frame_index(t)].position).s
    for o in others:
        i = o.frame_index(t)
        if i is None or o.frames[i].lane_id != fl.lane_id:
            continue
        if s_f < lane.project(o.frames[i].position).s < s_l:
            return True
    return False


def _runs(lead, follow, others, lane_map, gap_max):
    """Maximal (t_start, t_end) intervals where the pair satisfies the predicate."""
    rate = lead.frame_rate
    t0 = max(lead.start_time, follow.start_time)
    t1 = min(lead.end_time, follow.end_time)
    n = int(round((t1 - t0) * rate)) + 1
    runs, start = [], None
    for k in range(max(n, 0)):
        t = t0 + k / rate
        i_l, i_f = lead.frame_index(t), follow.frame_index(t)
        g = None if i_l is None or i_f is None else _gap(lead, follow, i_l, i_f, lane_map)
        ok = g is not None and g <= gap_max and not _blocked(lead, follow, others, t, lane_map)
        if ok and start is None:
            start = t
        if not ok and start is not None:
            runs.append((start, t - 1 / rate))
            start = None
    if start is not None:
        runs.append((start, t0 + (n - 1) / rate))
    return runs


def convoy_holds(scene: SceneModel, gap_max: float = 50.0, window: float = 5.0) -> bool:
    """Re-check the extraction predicate on a scene labelled c0 (front) and c1 (rear)."""
    lead, follow = scene.track("c0"), scene.track("c1")
    others = [t for t in scene.tracks if t.agent not in ("c0", "c1")]
    t0, t1 = scene.time_range
    runs = _runs(lead, follow, [], scene.lane_map, gap_max)
    covered = any(a <= t0 + 1e-6 and b >= t1 - 1e-6 for a, b in runs)
    return covered and t1 - t0 >= window - 1e-6 and all(
        t.start_time <= t0 + 1e-6 and t.end_time >= t1 - 1e-6 for t in others)


def extract_convoy_scenes(recording: Recording, gap_max: float = 50.0, window: float = 5.0,
                          max_independent: int | None = None) -> list[SceneModel]:
    """One scene per maximal convoy interval lasting at least ``window`` seconds.

    Independent vehicles are those in other lanes whose tracks cover the whole
    interval; ``max_independent`` keeps the lowest ids when set.
    """
    lm = recording.lane_map
    tracks = recording.tracks
    scenes = []
    for lead in tracks:
        for follow in tracks:
            if lead is follow:
                continue
            others = [t for t in tracks if t is not lead and t is not follow]
            for a, b in _runs(lead, follow, others, lm, gap_max):
                if b - a < window - 1e-9:
                    continue
                lanes = {f.lane_id for f in lead.clipped(a, b).frames}
                indep = [t for t in others
                         if t.start_time <= a + 1e-9 and t.end_time >= b - 1e-9
                         and not lanes & {f.lane_id for f in t.clipped(a, b).frames}]
                if max_independent is not None:
                    indep = indep[:max_independent]
                clipped = [lead.clipped(a, b).renamed("c0"), follow.clipped(a, b).renamed("c1")]
                clipped += [t.clipped(a, b).renamed(f"i{j}") for j, t in enumerate(indep)]
                ids = {"c0": lead.agent, "c1": follow.agent}
                ids.update({f"i{j}": t.agent for j, t in enumerate(indep)})
                scenes.append(SceneModel(
                    lm, tuple(clipped), (clipped[0].start_time, clipped[0].end_time),
                    frozenset({("c0", "c1")}),
                    f"{recording.name}-{lead.agent}-{follow.agent}-{a:.2f}",
                    {"recording": recording.name, "ids": ids}))
    return scenes
