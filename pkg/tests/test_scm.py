import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twinexplain.scm import (CycleDetected, ExogenousSpec, Initial, Intervention, NoSuchVariable,
                             NumericOverflow, StructuralEquation, UnboundVariable, VariableId,
                             build_model, intervene, prev, simulate)


def counter_model():
    eqs = [
        StructuralEquation("car.speed", [prev("car.speed"), "car.accel"],
                           lambda v, a: v + 0.1 * a, initial=10.0),
        StructuralEquation("car.accel", ["drv.cmd"], lambda c: 2.0 * c),
        StructuralEquation("car.pos", [prev("car.pos"), "car.speed"], lambda x, v: x + 0.1 * v,
                           initial=Initial(("car.speed",), lambda v: 0.0)),
    ]
    return build_model(eqs, [ExogenousSpec("drv.cmd", value=1.0)])


def test_variable_id_key_and_parse():
    v = VariableId("car", "speed", 3)
    assert v.key == "car.speed"
    assert VariableId.parse("car.speed", 3) == v
    with pytest.raises(ValueError):
        VariableId("car", "speed", -1)


def test_order_is_topological_and_stable():
    m = counter_model()
    assert m.order.index("drv.cmd") < m.order.index("car.accel") < m.order.index("car.speed")
    assert m.order.index("car.speed") < m.order.index("car.pos")
    assert counter_model().order == m.order


def test_cycle_rejected():
    eqs = [StructuralEquation("a.x", ["a.y"], lambda y: y),
           StructuralEquation("a.y", ["a.x"], lambda x: x)]
    with pytest.raises(CycleDetected):
        build_model(eqs, [])


def test_lag_without_initial_is_unbound():
    eqs = [StructuralEquation("a.x", [prev("a.x")], lambda x: x)]
    with pytest.raises(UnboundVariable):
        build_model(eqs, [])


def test_unknown_parent_is_unbound():
    with pytest.raises(UnboundVariable):
        build_model([StructuralEquation("a.x", ["a.nope"], lambda y: y)], [])


def test_rollout_values_hand_computed():
    r = simulate(counter_model(), 0.1, 0.3)
    assert r.series("car.speed") == pytest.approx([10.0, 10.2, 10.4, 10.6])
    assert r.series("car.pos")[1] == pytest.approx(1.02)
    assert r[VariableId("car", "speed", 2)] == pytest.approx(10.4)
    assert r.horizon == pytest.approx(0.3)


def test_intervention_unknown_target():
    with pytest.raises(NoSuchVariable):
        intervene(counter_model(), Intervention("car.nothing", value=1.0))


def test_intervention_window_and_glob():
    m = intervene(counter_model(), Intervention("car.acc*", value=0.0, start=2, stop=4))
    r = simulate(m, 0.1, 0.5)
    assert r.series("car.accel") == [2.0, 2.0, 0.0, 0.0, 2.0, 2.0]
    assert r.series("car.speed")[2] == r.series("car.speed")[3]


def test_equation_intervention_reorders():
    m = intervene(counter_model(),
                  Intervention("car.accel", equation=StructuralEquation(
                      "car.accel", [prev("car.speed")], lambda v: -v,
                      initial=0.0)))
    r = simulate(m, 0.1, 0.2)
    assert r.get("car.accel", 1) == pytest.approx(-10.0)


def test_non_finite_aborts():
    eqs = [StructuralEquation("a.x", [prev("a.x")], lambda x: x * 1e200, initial=1e200)]
    with pytest.raises(NumericOverflow) as e:
        simulate(build_model(eqs, []), 1.0, 3.0)
    assert e.value.time_index == 1


def test_resume_and_splice_reproduce_full_run():
    def sampler(rng, k):
        return float(rng.normal())
    eqs = [StructuralEquation("a.x", [prev("a.x"), "a.u"], lambda x, u: 0.9 * x + u, initial=0.0)]
    m = build_model(eqs, [ExogenousSpec("a.u", sampler=sampler)])
    full = simulate(m, 0.1, 2.0, seed=7)
    part = simulate(m, 0.1, 1.0, seed=7, start_index=10, initial=full.slice(10))
    assert full.spliced(part).values == full.values


# -- randomized small models -----------------------------------------------

@st.composite
def small_models(draw):
    n = draw(st.integers(1, 9))
    coeffs = draw(st.lists(st.floats(-0.9, 0.9), min_size=n * n, max_size=n * n))
    self_lag = draw(st.lists(st.floats(-0.9, 0.9), min_size=n, max_size=n))
    eqs = []
    for i in range(n):
        parents = [f"m.v{j}" for j in range(i)]
        w = coeffs[i * n:i * n + i]
        lag = self_lag[i]

        def fn(prev_self, noise, *ps, w=tuple(w), lag=lag):
            return lag * prev_self + sum(a * b for a, b in zip(w, ps)) + noise
        eqs.append(StructuralEquation(f"m.v{i}", [prev(f"m.v{i}"), "m.noise"] + parents, fn,
                                      initial=0.0))
    model = build_model(eqs, [ExogenousSpec("m.noise", sampler=lambda rng, k: rng.normal())])
    return model, n


@given(small_models(), st.integers(1, 50), st.integers(0, 2**31 - 1))
def test_rollout_is_deterministic(mn, slices, seed):
    m, _ = mn
    a = simulate(m, 0.1, slices * 0.1, seed)
    b = simulate(m, 0.1, slices * 0.1, seed)
    assert a.values == b.values


@given(small_models(), st.integers(2, 50), st.data())
def test_forcing_factual_values_changes_nothing(mn, slices, data):
    m, n = mn
    full = simulate(m, 0.1, slices * 0.1, 3)
    i = data.draw(st.integers(0, n - 1))
    k = data.draw(st.integers(0, slices))
    key = f"m.v{i}"
    forced = intervene(m, Intervention(key, value=full.get(key, k), start=k, stop=k + 1))
    assert simulate(forced, 0.1, slices * 0.1, 3).values == full.values


@given(small_models(), st.integers(2, 50), st.data())
def test_intervention_is_local_in_time(mn, slices, data):
    m, n = mn
    full = simulate(m, 0.1, slices * 0.1, 5)
    i = data.draw(st.integers(0, n - 1))
    k = data.draw(st.integers(1, slices))
    r = simulate(intervene(m, Intervention(f"m.v{i}", value=123.0, start=k)), 0.1,
                 slices * 0.1, 5)
    assert r.values[:k] == full.values[:k]
    assert r.get(f"m.v{i}", k) == 123.0
    # variables that are not descendants (lower index, same slice) keep their values at k
    for j in range(i):
        assert r.get(f"m.v{j}", k) == full.get(f"m.v{j}", k)


def chain():
    return build_model([StructuralEquation("c.v", ["c.u"], lambda u: 2 * u),
                        StructuralEquation("c.w", ["c.v"], lambda v: v + 1)],
                       [ExogenousSpec("c.u", value=3)])


def test_chain_substitution():
    r = simulate(chain(), 1.0, 1.0)
    assert r.get("c.v", 0) == 6 and r.get("c.w", 1) == 7


def test_do_operator_severs_parents():
    m = intervene(chain(), Intervention("c.v", value=5))
    r = simulate(m, 1.0, 2.0)
    assert r.series("c.w") == [6, 6, 6]
    # the original model is untouched
    assert simulate(chain(), 1.0, 1.0).get("c.w", 0) == 7


def test_future_parent_rejected():
    from twinexplain.scm import Parent
    eq = StructuralEquation("a.x", [Parent("a.x", -1)], lambda x: x, initial=0.0)
    with pytest.raises(UnboundVariable):
        build_model([eq], [])
