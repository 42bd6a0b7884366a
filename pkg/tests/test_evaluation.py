import math

import pytest
from hypothesis import given, strategies as st

from twinexplain.evaluation import (DEFAULT_THRESHOLDS, ConfusionCounts, EdgeOutsideAgentSet,
                                    UnlabelledScene, best_f1, confusion, format_table, metrics,
                                    scene_graphs, sweep_graphs)

AG = ("a", "b", "c", "d", "e")


def test_confusion_examples():
    assert confusion([("a", "b")], [("b", "a")], ["a", "b"]) == ConfusionCounts(1, 0, 0, 0)
    assert confusion([("a", "b"), ("c", "d")], [("a", "b")], AG) == ConfusionCounts(1, 1, 0, 8)
    assert confusion([], [("a", "b")], ["a", "b", "c"]) == ConfusionCounts(0, 0, 1, 2)


def test_edges_must_use_scene_agents():
    with pytest.raises(EdgeOutsideAgentSet):
        confusion([("a", "z")], [], AG)
    with pytest.raises(EdgeOutsideAgentSet):
        confusion([], [("a", "a")], AG)


def test_metrics_undefined_values():
    m = metrics(ConfusionCounts(0, 0, 0, 3))
    assert m.precision is None and m.recall is None and m.f1 is None and m.fpr == 0.0
    m = metrics(ConfusionCounts(1, 1, 0, 8), 0.3)
    assert (m.precision, m.recall, m.fpr) == (0.5, 1.0, 1 / 9)
    assert m.f1 == pytest.approx(2 / 3)
    assert m.threshold == 0.3


edge_sets = st.sets(st.sampled_from([(a, b) for i, a in enumerate(AG) for b in AG[i + 1:]]))


@given(edge_sets, edge_sets)
def test_confusion_partitions_pairs(pred, truth):
    c = confusion(pred, truth, AG)
    assert c.total == 10
    assert c.tp + c.fn == len(truth) and c.tp + c.fp == len(pred)
    m = metrics(c)
    for v in (m.precision, m.recall, m.fpr, m.f1):
        assert v is None or 0.0 <= v <= 1.0


def test_table_format():
    reports = [metrics(ConfusionCounts(1, 1, 0, 8), 0.0), metrics(ConfusionCounts(0, 0, 1, 9), 1.0)]
    lines = format_table(reports).splitlines()
    assert lines[0] == "threshold,tp,fp,fn,tn,precision,recall,fpr,f1"
    assert lines[1] == "0,1,1,0,8,0.500000,1.000000,0.111111,0.666667"
    assert lines[2] == "1,0,0,1,9,none,0.000000,0.000000,none"
    assert best_f1(reports) is reports[0]
    assert best_f1(reports[1:]) is None


def test_default_thresholds():
    assert DEFAULT_THRESHOLDS == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def test_unlabelled_rejected(synth):
    from dataclasses import replace
    s = replace(synth("merge", 0), labels=None)
    with pytest.raises(UnlabelledScene):
        scene_graphs([s])


def test_sweep_monotone(synth, analysed):
    scenes = [synth(t, 0) for t in ("convoy-brake", "merge", "overtake", "independent")]
    graphs = [analysed(t, 0)[1] for t in ("convoy-brake", "merge", "overtake", "independent")]
    lams = [0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, math.inf]
    reports = sweep_graphs(scenes, graphs, lams)
    for lo, hi in zip(reports, reports[1:]):
        assert hi.counts.tp <= lo.counts.tp and hi.counts.fp <= lo.counts.fp
        assert hi.counts.total == lo.counts.total
    assert reports[-1].recall == 0.0 and reports[-1].counts.fp == 0
