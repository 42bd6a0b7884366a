import math

import pytest
from hypothesis import given, strategies as st

from twinexplain.actions import make_action
from twinexplain.agent import (AllCandidatesDiverged, OffMap, PlannerConfig, control,
                               generate_candidates, maintain_action, select_best)
from twinexplain.dynamics import NO_FORCE, RigidBodyState, default_vehicle, step_vehicle
from twinexplain.lanes import Vec2, straight_highway
from twinexplain.reward import NO_LEADER, Outcome, RewardProfile, reward

LM = straight_highway(3)
PARAMS, MASS, INERTIA = default_vehicle(4.5, 1.8)
CFG = PlannerConfig()


def body(lane=2, v=20.0, dy=0.0, heading=0.0):
    y = LM[lane].centreline[0].y + dy
    return RigidBodyState(Vec2(0.0, y), Vec2(v * math.cos(heading), v * math.sin(heading)),
                          Vec2(0.0, 0.0), MASS, heading, 0.0, 0.0, INERTIA, Vec2(2.25, 0.9))


def test_zero_error_zero_output():
    out = control(make_action(20.0, 4.0, 2, 4.0), body(), PARAMS, LM, 0.0, CFG)
    assert out.motor_torque == pytest.approx(0.0, abs=1e-9)
    assert out.steer == pytest.approx(0.0, abs=1e-12)


def test_speed_error_sign():
    assert control(make_action(25.0, 4.0, 2, 4.0), body(), PARAMS, LM, 0.0, CFG).motor_torque > 0
    assert control(make_action(15.0, 4.0, 2, 4.0), body(), PARAMS, LM, 0.0, CFG).motor_torque < 0


def test_off_map_raises():
    far = RigidBodyState(Vec2(0.0, 50.0), Vec2(10.0, 0.0), Vec2(0.0, 0.0), MASS, 0.0, 0.0, 0.0,
                         INERTIA, Vec2(2.25, 0.9))
    with pytest.raises(OffMap):
        control(make_action(10.0, 1.0, 2, 1.0), far, PARAMS, LM, 0.0, CFG)
    out = control(make_action(10.0, 1.0, 1, 1.0), far, PARAMS, LM, 0.0, CFG, require_lane=False)
    assert out.steer < 0   # back toward lane 1 (south of the car)


@pytest.mark.parametrize("v", [8.0, 20.0, 35.0])
def test_closed_loop_lane_change_settles(v):
    s = body(lane=2, v=v)
    a = make_action(v, 4.0, 1, 4.0)
    target_y = LM[1].centreline[0].y
    assert control(a, s, PARAMS, LM, 0.0, CFG).steer > 0
    for _ in range(int(CFG.horizon / 0.1)):
        c = control(a, s, PARAMS, LM, 0.0, CFG)
        s = step_vehicle(s, PARAMS, c.motor_torque, c.steer, NO_FORCE, 0.1)
    assert abs(s.position.y - target_y) < 0.3
    assert LM.locate(s.position) == 1


def test_speed_tracking_closed_loop():
    s = body(v=15.0)
    a = make_action(25.0, 4.0, 2, 4.0)
    for _ in range(60):
        c = control(a, s, PARAMS, LM, 0.0, CFG)
        s = step_vehicle(s, PARAMS, c.motor_torque, c.steer, NO_FORCE, 0.1)
    assert s.forward_speed == pytest.approx(25.0, abs=0.5)


def test_candidate_counts():
    assert len(generate_candidates(body(2), 2, 0.0, CFG, LM)) == 15
    assert len(generate_candidates(body(1), 1, 0.0, CFG, LM)) == 10
    slow = generate_candidates(body(2, v=2.0), 2, 0.0, CFG, LM)
    assert min(a.speed for a in slow) == 0.0


@given(st.floats(0.0, 60.0), st.sampled_from([1, 2, 3]), st.floats(0.0, 100.0))
def test_candidates_contain_maintain_and_are_nonnegative(v, lane, t):
    cands = generate_candidates(body(lane, v=v), lane, t, CFG, LM)
    assert maintain_action(v, lane, t, CFG) in cands
    assert all(a.speed >= 0 for a in cands)
    assert all(a.speed_goal.target_time == t + CFG.goal_lead_time for a in cands)


def outcome_table():
    cands = [make_action(v, 4.0, l, 4.0) for v in (10.0, 20.0, 30.0) for l in (1, 2)]
    outs = [Outcome(2 - a.lane, a.speed, NO_LEADER if a.lane == 1 else 15.0, 300.0, True)
            for a in cands]
    return list(zip(cands, outs))


def test_single_candidate():
    pairs = outcome_table()[:1]
    keep = pairs[0][0]
    assert select_best(pairs, RewardProfile((1, 0, 0, 0, 0, 0)), keep) == keep


def test_slow_profile_picks_lowest_speed():
    pairs = outcome_table()
    best = select_best(pairs, RewardProfile((0, 0, 0, 1, 0, 0)), pairs[2][0])
    assert best.speed == 10.0


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(0.01, 100))
def test_argmax_scaling_invariance(w, c):
    pairs = outcome_table()
    keep = pairs[2][0]
    p = RewardProfile(tuple(w))
    best = select_best(pairs, p, keep)
    assert select_best(pairs, p.scaled(c), keep) == best
    top = max(reward(o, p) for _, o in pairs)
    assert reward(dict(pairs)[best], p) == top


def test_ties_prefer_maintain_then_order():
    pairs = outcome_table()
    keep = pairs[3][0]
    assert select_best(pairs, RewardProfile((0, 0, 0, 0, 0, 1)), keep) == keep


def test_all_diverged():
    with pytest.raises(AllCandidatesDiverged):
        select_best([(make_action(1, 1, 1, 1), None)], RewardProfile((1,) * 6),
                    make_action(1, 1, 1, 1))


def test_planner_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(horizon=0)
    with pytest.raises(ValueError):
        PlannerConfig(lane_options=("up",))
