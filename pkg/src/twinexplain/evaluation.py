"""Scoring predicted agent adjacency against labelled scenes."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .causal import CausalGraph, EngineConfig, SceneAnalysis
from .data_io.scene import SceneModel

DEFAULT_THRESHOLDS = tuple(round(0.1 * a, 1) for a in range(11))
TABLE_COLUMNS = ("threshold", "tp", "fp", "fn", "tn", "precision", "recall", "fpr", "f1")


class EdgeOutsideAgentSet(ValueError):
    pass


class UnlabelledScene(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, o: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + o.tp, self.fp + o.fp, self.fn + o.fn, self.tn + o.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    threshold: float
    counts: ConfusionCounts
    precision: float | None
    recall: float | None
    fpr: float | None
    f1: float | None

    def row(self) -> dict:
        c = self.counts
        return {"threshold": self.threshold, "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn,
                "precision": self.precision, "recall": self.recall, "fpr": self.fpr,
                "f1": self.f1}


def _norm(edges, agents) -> set[tuple[str, str]]:
    out = set()
    for a, b in edges:
        if a not in agents or b not in agents:
            raise EdgeOutsideAgentSet(f"edge {a}-{b} uses an agent outside {sorted(agents)}")
        if a == b:
            raise EdgeOutsideAgentSet(f"self edge {a}-{b}")
        out.add((a, b) if a <= b else (b, a))
    return out


def confusion(pred: Iterable[tuple[str, str]], truth: Iterable[tuple[str, str]],
              agents: Iterable[str]) -> ConfusionCounts:
    agents = set(agents)
    p, t = _norm(pred, agents), _norm(truth, agents)
    n = len(agents)
    tp, fp, fn = len(p & t), len(p - t), len(t - p)
    return ConfusionCounts(tp, fp, fn, n * (n - 1) // 2 - tp - fp - fn)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(c: ConfusionCounts, threshold: float = 0.0) -> MetricReport:
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    fpr = _ratio(c.fp, c.fp + c.tn)
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricReport(threshold, c, precision, recall, fpr, f1)


def scene_graphs(scenes: Sequence[SceneModel], cfgs: EngineConfig = EngineConfig()
                 ) -> list[CausalGraph]:
    for s in scenes:
        if not s.labelled:
            raise UnlabelledScene(f"scene {s.name or '?'} has no ground-truth labels")
    return [SceneAnalysis(s, cfgs).discover() for s in scenes]


def sweep_graphs(scenes: Sequence[SceneModel], graphs: Sequence[CausalGraph],
                 thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> list[MetricReport]:
    """Re-threshold cached pair distances; no simulation happens here."""
    reports = []
    for lam in thresholds:
        total = ConfusionCounts()
        for s, g in zip(scenes, graphs):
            total = total + confusion(g.at_threshold(lam).agent_adjacency, s.labels, s.agents)
        reports.append(metrics(total, lam))
    return reports


def roc_sweep(scenes: Sequence[SceneModel], thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
              cfgs: EngineConfig = EngineConfig()) -> list[MetricReport]:
    return sweep_graphs(scenes, scene_graphs(scenes, cfgs), thresholds)


def best_f1(reports: Sequence[MetricReport]) -> MetricReport | None:
    scored = [r for r in reports if r.f1 is not None]
    if not scored:
        return None
    # first (lowest-threshold) row among equals
    return max(scored, key=lambda r: (r.f1, -r.threshold))


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return f"{v:.6f}" if math.isfinite(v) else str(v)
    return str(v)


def format_table(reports: Sequence[MetricReport], delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in reports:
        row = r.row()
        w.writerow([f"{r.threshold:g}"] + [_fmt(row[k]) for k in TABLE_COLUMNS[1:]])
    return buf.getvalue()
