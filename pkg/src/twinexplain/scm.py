"""Structural causal models unrolled over discrete time slices.

Equations are authored once per variable and stamped across slices. A parent
reference is either same-slice (lag 0) or previous-slice (lag 1); nothing else
is allowed, which keeps every rollout Markov with a single step of memory.

Variables are addressed by a ``"module.name"`` key inside a slice, and by a
:class:`VariableId` (key plus slice index) inside a :class:`Rollout`.
"""
from __future__ import annotations

import fnmatch
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "SCMError",
    "CycleDetected",
    "UnboundVariable",
    "NoSuchVariable",
    "NumericOverflow",
    "VariableId",
    "Parent",
    "prev",
    "Initial",
    "StructuralEquation",
    "ExogenousSpec",
    "Intervention",
    "CausalModel",
    "Rollout",
    "build_model",
    "intervene",
    "simulate",
]


class SCMError(Exception):
    """Base class for model construction and rollout failures."""


class CycleDetected(SCMError):
    pass


class UnboundVariable(SCMError):
    pass


class NoSuchVariable(SCMError):
    pass


class NumericOverflow(SCMError):
    """A rollout produced a non-finite value."""

    def __init__(self, key: str, time_index: int):
        super().__init__(f"non-finite value for {key} at slice {time_index}")
        self.key = key
        self.time_index = time_index


@dataclass(frozen=True, order=True)
class VariableId:
    module_name: str
    variable_name: str
    time_index: int = 0

    def __post_init__(self):
        if self.time_index < 0:
            raise ValueError("time_index must be >= 0")

    @property
    def key(self) -> str:
        return f"{self.module_name}.{self.variable_name}"

    @classmethod
    def parse(cls, key: str, time_index: int = 0) -> "VariableId":
        module, _, name = key.partition(".")
        return cls(module, name, time_index)


@dataclass(frozen=True)
class Parent:
    key: str
    lag: int = 0


def prev(key: str) -> Parent:
    """Reference to ``key`` at the previous slice."""
    return Parent(key, 1)


def _as_parent(p: str | Parent) -> Parent:
    return p if isinstance(p, Parent) else Parent(p, 0)


@dataclass(frozen=True)
class Initial:
    """Slice-0 equation for a variable whose regular equation looks back one slice."""

    parents: tuple[str, ...]
    fn: Callable[..., Any]


@dataclass(frozen=True)
class StructuralEquation:
    target: str
    parents: tuple[Parent, ...]
    fn: Callable[..., Any]
    initial: Any = None

    def __init__(self, target: str, parents: Iterable[str | Parent], fn: Callable[..., Any],
                 initial: Any = None):
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "parents", tuple(_as_parent(p) for p in parents))
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "initial", initial)

    @property
    def lagged(self) -> bool:
        return any(p.lag == 1 for p in self.parents)


@dataclass(frozen=True)
class ExogenousSpec:
    """Exogenous input: a point value, a per-slice schedule, or a seeded sampler.

    ``schedule(k)`` gives a deterministic value for slice ``k``;
    ``sampler(rng, k)`` draws from a generator seeded by ``(seed, k)``.
    """

    variable: str
    value: Any = None
    schedule: Callable[[int], Any] | None = None
    sampler: Callable[[np.random.Generator, int], Any] | None = None

    def __post_init__(self):
        if self.schedule is not None and self.sampler is not None:
            raise ValueError(f"{self.variable}: give a schedule or a sampler, not both")


_UNSET = object()


@dataclass(frozen=True)
class Intervention:
    """do(target := value) or a replacement equation over slices [start, stop).

    ``target`` may be a glob pattern over variable keys (``"c0.*"``).
    """

    target: str
    value: Any = _UNSET
    equation: StructuralEquation | None = None
    start: int = 0
    stop: int | None = None

    def __post_init__(self):
        if (self.value is _UNSET) == (self.equation is None):
            raise ValueError("intervention needs exactly one of value or equation")

    def active(self, k: int) -> bool:
        return k >= self.start and (self.stop is None or k < self.stop)


@dataclass(frozen=True)
class CausalModel:
    equations: Mapping[str, StructuralEquation]
    exogenous: Mapping[str, ExogenousSpec]
    order: tuple[str, ...]
    interventions: tuple[tuple[str, Intervention], ...] = ()

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(self.exogenous) + tuple(self.equations)


def _sort_key(key: str) -> tuple[str, str]:
    module, _, name = key.partition(".")
    return module, name


def _toposort(nodes: Iterable[str], edges: Mapping[str, set[str]]) -> tuple[str, ...]:
    # Kahn; ties broken by (module, name) so the order never depends on insertion.
    indeg = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in indeg}
    for child, parents in edges.items():
        for p in parents:
            children[p].append(child)
            indeg[child] += 1
    heap = [(_sort_key(n), n) for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, n = heapq.heappop(heap)
        out.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, (_sort_key(c), c))
    if len(out) != len(indeg):
        stuck = sorted(n for n, d in indeg.items() if d > 0)
        raise CycleDetected(f"within-slice cycle among {stuck}")
    return tuple(out)


def _same_slice_parents(eq: StructuralEquation) -> set[str]:
    deps = {p.key for p in eq.parents if p.lag == 0}
    if isinstance(eq.initial, Initial):
        deps.update(eq.initial.parents)
    return deps


def _check_parents(eq: StructuralEquation, known: set[str]) -> None:
    for p in eq.parents:
        if p.lag not in (0, 1):
            raise UnboundVariable(
                f"{eq.target}: parent {p.key} at lag {p.lag}; only lags 0 and 1 are allowed")
        if p.key not in known:
            raise UnboundVariable(f"{eq.target}: parent {p.key} has no equation or exogenous spec")
    if isinstance(eq.initial, Initial):
        for k in eq.initial.parents:
            if k not in known:
                raise UnboundVariable(f"{eq.target}: initial parent {k} is unbound")
    elif eq.lagged and eq.initial is None:
        raise UnboundVariable(f"{eq.target}: lagged parents but no initial value for slice 0")


def _order(equations: Mapping[str, StructuralEquation], exogenous: Mapping[str, ExogenousSpec],
           extra: Iterable[StructuralEquation] = ()) -> tuple[str, ...]:
    edges: dict[str, set[str]] = {k: set() for k in exogenous}
    for key, eq in equations.items():
        edges[key] = _same_slice_parents(eq)
    for eq in extra:
        edges[eq.target] = edges.get(eq.target, set()) | _same_slice_parents(eq)
    return _toposort(edges, edges)


def build_model(equations: Sequence[StructuralEquation],
                exo: Sequence[ExogenousSpec]) -> CausalModel:
    exogenous: dict[str, ExogenousSpec] = {}
    for spec in exo:
        if spec.variable in exogenous:
            raise SCMError(f"duplicate exogenous spec for {spec.variable}")
        exogenous[spec.variable] = spec
    eqs: dict[str, StructuralEquation] = {}
    for eq in equations:
        if eq.target in eqs or eq.target in exogenous:
            raise SCMError(f"duplicate definition of {eq.target}")
        eqs[eq.target] = eq
    known = set(eqs) | set(exogenous)
    for eq in eqs.values():
        _check_parents(eq, known)
    return CausalModel(eqs, exogenous, _order(eqs, exogenous))


def intervene(model: CausalModel, iv: Intervention) -> CausalModel:
    """Return a new model with ``iv`` applied on top of existing interventions."""
    targets = [k for k in model.keys if fnmatch.fnmatchcase(k, iv.target)]
    if not targets:
        raise NoSuchVariable(iv.target)
    extra = []
    if iv.equation is not None:
        known = set(model.keys)
        for t in targets:
            repl = StructuralEquation(t, iv.equation.parents, iv.equation.fn, iv.equation.initial)
            _check_parents(repl, known)
            extra.append(repl)
    for _, old in model.interventions:
        if old.equation is not None:
            extra.append(old.equation)
    order = _order(model.equations, model.exogenous, extra) if extra else model.order
    added = tuple((t, iv) for t in targets)
    return CausalModel(model.equations, model.exogenous, order, model.interventions + added)


@dataclass(frozen=True)
class Rollout:
    """Values of every variable for slices ``start_index .. start_index + len(values) - 1``."""

    time_step: float
    start_index: int
    values: tuple[Mapping[str, Any], ...]
    seed: int = 0

    @property
    def horizon(self) -> float:
        return (len(self.values) - 1) * self.time_step

    @property
    def stop_index(self) -> int:
        return self.start_index + len(self.values)

    @property
    def last_index(self) -> int:
        return self.stop_index - 1

    def slice(self, k: int) -> Mapping[str, Any]:
        if not self.start_index <= k < self.stop_index:
            raise IndexError(f"slice {k} outside [{self.start_index}, {self.stop_index})")
        return self.values[k - self.start_index]

    def get(self, key: str, k: int) -> Any:
        return self.slice(k)[key]

    def __getitem__(self, var: VariableId) -> Any:
        return self.get(var.key, var.time_index)

    def series(self, key: str) -> list[Any]:
        return [v[key] for v in self.values]

    def time(self, k: int) -> float:
        return k * self.time_step

    def index_of(self, t: float) -> int:
        return int(round(t / self.time_step))

    def spliced(self, later: "Rollout") -> "Rollout":
        """Prefix of ``self`` up to ``later.start_index`` followed by ``later``."""
        if not self.start_index <= later.start_index <= self.stop_index:
            raise ValueError("rollouts do not overlap")
        head = self.values[: later.start_index - self.start_index]
        return Rollout(self.time_step, self.start_index, head + later.values, later.seed)


def _is_finite(v: Any) -> bool:
    if v is None or isinstance(v, (bool, str)):
        return True
    if isinstance(v, (int, float)):
        return math.isfinite(v)
    check = getattr(v, "is_finite", None)
    if check is not None:
        return check()
    if isinstance(v, np.ndarray):
        return v.dtype.kind not in "fc" or bool(np.isfinite(v).all())
    if isinstance(v, tuple):
        return all(_is_finite(x) for x in v)
    return True


def simulate(model: CausalModel, time_step: float, horizon: float, seed: int = 0, *,
             start_index: int = 0, initial: Mapping[str, Any] | None = None) -> Rollout:
    """Roll the model forward for ``horizon`` seconds.

    With ``initial`` the slice at ``start_index`` is taken as given (a snapshot
    from an earlier rollout) and evaluation resumes from the next slice.
    Exogenous draws for slice ``k`` depend only on ``(seed, k)``, so resuming
    mid-way reproduces the uninterrupted rollout.
    """
    if time_step <= 0:
        raise ValueError("time_step must be positive")
    if horizon < time_step - 1e-12:
        raise ValueError("horizon must be at least one time step")
    n = int(round(horizon / time_step))

    by_target: dict[str, list[Intervention]] = {}
    for key, iv in model.interventions:
        by_target.setdefault(key, []).append(iv)

    plan = []
    for key in model.order:
        spec = model.exogenous.get(key)
        ivs = by_target.get(key, ())
        if spec is not None:
            plan.append((key, spec, None, ivs))
        else:
            eq = model.equations[key]
            plan.append((key, None, eq, ivs))

    def evaluate(k: int, prev_vals: Mapping[str, Any] | None) -> dict[str, Any]:
        cur: dict[str, Any] = {}
        rng = None
        for key, spec, eq, ivs in plan:
            forced = None
            for iv in reversed(ivs):
                if iv.active(k):
                    forced = iv
                    break
            if forced is not None and forced.equation is None:
                val = forced.value
            else:
                use = eq if forced is None else forced.equation
                if use is None:
                    if spec.sampler is not None:
                        if rng is None:
                            rng = np.random.default_rng([seed, k])
                        val = spec.sampler(rng, k)
                    elif spec.schedule is not None:
                        val = spec.schedule(k)
                    else:
                        val = spec.value
                elif prev_vals is None and (use.lagged or use.initial is not None):
                    init = use.initial
                    if isinstance(init, Initial):
                        val = init.fn(*[cur[p] for p in init.parents])
                    else:
                        val = init
                else:
                    args = [prev_vals[p.key] if p.lag else cur[p.key] for p in use.parents]
                    val = use.fn(*args)
            if not _is_finite(val):
                raise NumericOverflow(key, k)
            cur[key] = val
        return cur

    if initial is None:
        first = evaluate(start_index, None)
    else:
        first = dict(initial)
    values = [first]
    for k in range(start_index + 1, start_index + n + 1):
        values.append(evaluate(k, values[-1]))
    return Rollout(time_step, start_index, tuple(values), seed)
