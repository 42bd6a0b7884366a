import math

import pytest
from hypothesis import given, strategies as st

from twinexplain.lanes import Lane, LaneMap, Vec2, straight_highway


def test_vec2_arithmetic():
    a, b = Vec2(1.0, 2.0), Vec2(3.0, -1.0)
    assert a + b == Vec2(4.0, 1.0)
    assert a - b == Vec2(-2.0, 3.0)
    assert a * 2 == Vec2(2.0, 4.0)
    assert -a == Vec2(-1.0, -2.0)
    assert a.dot(b) == 1.0
    assert Vec2(3.0, 4.0).norm() == 5.0


def test_highway_layout():
    lm = straight_highway(3)
    assert lm.ids == (1, 2, 3)
    assert lm[1].centreline[0].y > lm[3].centreline[0].y
    assert lm.neighbour(2, "left") == 1 and lm.neighbour(2, "right") == 3
    assert lm.neighbour(1, "left") is None
    assert lm.lane_step(3, 1) == 2 and lm.lane_step(1, 2) == -1


def test_project_left_is_positive():
    lane = straight_highway(1)[1]
    f = lane.project((10.0, 0.5))
    assert f.d == pytest.approx(0.5) and f.heading == pytest.approx(0.0)
    rev = Lane(9, ((10.0, 0.0), (0.0, 0.0)), 3.5)
    assert rev.project((5.0, 0.5)).d == pytest.approx(-0.5)


def test_polyline_projection_arc_length():
    lane = Lane(1, ((0, 0), (10, 0), (10, 10)), 3.0)
    f = lane.project((11.0, 5.0))
    assert f.s == pytest.approx(15.0)
    assert f.d == pytest.approx(-1.0)
    assert f.heading == pytest.approx(math.pi / 2)


def test_bad_maps_rejected():
    with pytest.raises(ValueError):
        Lane(1, ((0, 0),), 3.0)
    with pytest.raises(ValueError):
        LaneMap((Lane(1, ((0, 0), (1, 0)), 3.0, left=7),))


@given(st.floats(-1000, 3000), st.floats(-1.7, 8.7))
def test_every_point_maps_to_at_most_one_lane(x, y):
    lm = straight_highway(3)
    hits = [l.id for l in lm.lanes if l.contains((x, y))]
    loc = lm.locate((x, y))
    if not hits:
        assert loc is None
    else:
        assert loc in hits


def test_round_trip_dict():
    lm = straight_highway(2)
    assert LaneMap.from_dict(lm.to_dict()) == lm
