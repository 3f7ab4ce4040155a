"""Turn a precedent solution's candidate inferences into concrete task suggestions.

Skolems are resolved in dependency order. Plunkable skolems become cells, paths
or anonymous task instances; non-plunkable ones can only be bound by forcing an
alternate mapping. A rejected skolem takes everything that depends on it down too.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .config import Config
from .kb import Case, Cell, Const, Expression, Taxonomy, default_taxonomy, derive_locations
from .sme import (CandidateInference, Mapping, MatchConstraints, Remap, Skolem, incremental_remap,
                  match_hypotheses, sme_map)
from .spatial import (DEFAULT_PASSABLE, SPATIAL_RELATIONS, PathQuery, SpatialConstraint, SpatialError,
                      find_region, plan_path)

SYMMETRIC_RELATIONS = frozenset({"near", "farFrom", "visibleFrom", "notVisibleFrom"})
SLOT_FUNCTORS = frozenset({"performedBy", "taskTarget", "taskLocation", "taskPath", "pathStart",
                           "pathEnd", "taskType"})
REJECTION_CODES = ("non-plunkable", "remap-failed", "spatially-infeasible", "dependency-rejected",
                   "inconsistent")
TASK_PARTITIONS = frozenset({"BlueTask", "RedTask"})
PATH_PARTITIONS = frozenset({"BluePath", "RedPath"})


@dataclass(frozen=True)
class PlunkPolicy:
    plunkable: frozenset
    remap_enabled: bool = True
    partitions_enabled: bool = True

    def __post_init__(self) -> None:
        bad = self.plunkable & {"MilitaryUnit", "TerrainFeature", "BlueUnit", "RedUnit"}
        if bad:
            raise ValueError(f"partitions {sorted(bad)} can never be plunked")

    @classmethod
    def from_config(cls, config: Config, taxonomy: Taxonomy | None = None) -> "PlunkPolicy":
        taxonomy = taxonomy or default_taxonomy()
        plunkable = frozenset(p for p, ok in taxonomy.plunkable_partitions.items() if ok)
        return cls(plunkable, config.remap, config.partitions)


def _is_skolem(term) -> bool:
    return isinstance(term, Skolem)


def _skolems_in(term) -> list[str]:
    if isinstance(term, Skolem):
        return [term.base_entity]
    if isinstance(term, Expression):
        return [s for a in term.args for s in _skolems_in(a)]
    return []


def fact_subject(expr: Expression) -> str | None:
    """The skolem a fact constrains, or None when it constrains none directly."""
    if expr.functor in SYMMETRIC_RELATIONS and len(expr.args) == 2:
        return next((a.base_entity for a in expr.args if _is_skolem(a)), None)
    first = expr.args[0]
    return first.base_entity if _is_skolem(first) else None


def constraining_facts(expr: Expression) -> Iterable[tuple[str, Expression]]:
    """(subject skolem, fact) for this fact, or for its nested facts when it has no subject."""
    subj = fact_subject(expr)
    if subj is not None:
        yield subj, expr
        return
    for a in expr.args:
        if isinstance(a, Expression):
            yield from constraining_facts(a)


@dataclass
class PlunkGraph:
    skolems: dict[str, Skolem]
    prereqs: dict[str, set[str]]
    order: list[str]
    cyclic: set[str]

    def dependents_closure(self, seeds: Iterable[str]) -> set[str]:
        users: dict[str, set[str]] = defaultdict(set)
        for s, ps in self.prereqs.items():
            for p in ps:
                users[p].add(s)
        out = set(seeds)
        stack = list(out)
        while stack:
            for u in users[stack.pop()]:
                if u not in out:
                    out.add(u)
                    stack.append(u)
        return out

    def requirements(self, roots: Iterable[str]) -> set[str]:
        out: set[str] = set()
        stack = list(roots)
        while stack:
            s = stack.pop()
            if s not in out:
                out.add(s)
                stack.extend(self.prereqs.get(s, ()))
        return out


def plunk_dependencies(inferences: Iterable[CandidateInference]) -> PlunkGraph:
    """Prerequisite edges between skolems plus a deterministic topological order.

    A skolem depends on every other skolem appearing in a fact that constrains it.
    Members of dependency cycles are reported in ``cyclic`` and left out of the order.
    """
    skolems: dict[str, Skolem] = {}
    prereqs: dict[str, set[str]] = {}
    for inf in inferences:
        for s in inf.skolems:
            skolems.setdefault(s.base_entity, s)
            prereqs.setdefault(s.base_entity, set())
        for subj, fact in constraining_facts(inf.expr):
            others = set(_skolems_in(fact)) - {subj}
            prereqs.setdefault(subj, set()).update(others)

    # a node is cyclic iff it can reach itself through at least one edge
    cyclic: set[str] = set()
    for s in sorted(prereqs):
        seen: set[str] = set()
        stack = list(prereqs[s])
        while stack:
            n = stack.pop()
            if n == s:
                cyclic.add(s)
                break
            if n not in seen:
                seen.add(n)
                stack.extend(prereqs.get(n, ()))

    order: list[str] = []
    remaining = {s: set(ps) for s, ps in prereqs.items() if s not in cyclic}
    doomed = set(cyclic)
    while remaining:
        ready = sorted(s for s, ps in remaining.items() if not (ps - set(order)))
        if not ready:
            break
        for s in ready:
            if remaining[s] & doomed:
                doomed.add(s)
            else:
                order.append(s)
            del remaining[s]
    return PlunkGraph(skolems, prereqs, order, cyclic)


@dataclass
class ConstraintNetwork:
    """Facts transferred onto each skolem, grouped by role."""

    spatial: dict[str, list[Expression]] = field(default_factory=lambda: defaultdict(list))
    slots: dict[str, list[Expression]] = field(default_factory=lambda: defaultdict(list))
    anchors: dict[str, list[Cell]] = field(default_factory=lambda: defaultdict(list))
    support: dict[str, list[int]] = field(default_factory=lambda: defaultdict(list))

    @classmethod
    def build(cls, inferences: Iterable[CandidateInference]) -> "ConstraintNetwork":
        net = cls()
        for inf in inferences:
            for subj, fact in constraining_facts(inf.expr):
                net.support[subj].append(inf.fact_index)
                if fact.functor in SPATIAL_RELATIONS:
                    net.spatial[subj].append(fact)
                elif fact.functor in SLOT_FUNCTORS:
                    net.slots[subj].append(fact)
                elif fact.functor == "locatedAt" and isinstance(fact.args[-1], Cell):
                    net.anchors[subj].append(fact.args[-1])
        return net


@dataclass(frozen=True)
class Rejection:
    skolem: str
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class TaskSuggestion:
    task_type: str
    unit: str
    target: str | None = None
    location: Cell | None = None
    path: tuple[Cell, ...] | None = None
    support: tuple[str, ...] = ()
    skolem: str | None = None
    remap_group: tuple[str, ...] = ()
    mapping_score: float = 0.0

    @property
    def is_original(self) -> bool:
        return not self.remap_group


@dataclass
class Trace:
    mapping_score: float = 0.0
    rejections: list[Rejection] = field(default_factory=list)
    remaps: list[tuple[str, str, float]] = field(default_factory=list)
    dropped: list[tuple[str, str]] = field(default_factory=list)

    def rejected(self) -> set[str]:
        return {r.skolem for r in self.rejections}


# binding kinds: ("entity", id) | ("cell", Cell) | ("path", cells) | ("task", TaskSuggestion)
Binding = tuple


class _Resolver:
    def __init__(self, solution: Case, probe: Case, mapping: Mapping, graph: PlunkGraph, hyps,
                 constraints: MatchConstraints, policy: PlunkPolicy, config: Config,
                 taxonomy: Taxonomy) -> None:
        self.solution, self.probe, self.mapping, self.graph = solution, probe, mapping, graph
        self.hyps, self.constraints = hyps, constraints
        self.policy, self.config, self.taxonomy = policy, config, taxonomy
        self.net = ConstraintNetwork.build(mapping.inferences)
        self.bindings: dict[str, Binding] = {}
        self.remap_of: dict[str, tuple[str, ...]] = {}
        self.remap_score: dict[str, float] = {}

    def _term(self, term):
        """Concrete value of a term after substituting resolved skolems."""
        if isinstance(term, Skolem):
            return self.bindings[term.base_entity][1]
        return term

    def _groups(self, names: Iterable[str]) -> tuple[str, ...]:
        out: set[str] = set()
        for n in names:
            out.update(self.remap_of.get(n, ()))
        return tuple(sorted(out))

    def resolve(self, sk: Skolem) -> Binding | Rejection:
        part = sk.partition
        if part not in self.policy.plunkable:
            return self._remap(sk)
        if part == "Location":
            return self._location(sk)
        if part in PATH_PARTITIONS:
            return self._path(sk)
        if part in TASK_PARTITIONS:
            return self._task(sk)
        return Rejection(sk.base_entity, "inconsistent", f"no resolution rule for partition {part}")

    def _remap(self, sk: Skolem) -> Binding | Rejection:
        if not self.policy.remap_enabled:
            return Rejection(sk.base_entity, "non-plunkable", sk.partition)
        remap: Remap | None = incremental_remap(
            self.solution, self.probe, self.mapping, sk.base_entity, constraints=self.constraints,
            hypotheses=self.hyps, taxonomy=self.taxonomy)
        if remap is None:
            return Rejection(sk.base_entity, "remap-failed", sk.partition)
        self.remap_of[sk.base_entity] = (sk.base_entity,)
        self.remap_score[sk.base_entity] = remap.mapping.score
        return ("entity", remap.target_entity, remap.mapping.score)

    def _location(self, sk: Skolem) -> Binding | Rejection:
        grid = self.probe.terrain
        if grid is None:
            return Rejection(sk.base_entity, "spatially-infeasible", "probe has no terrain")
        cons = []
        for fact in self.net.spatial.get(sk.base_entity, ()):
            others = [a for a in fact.args if not (_is_skolem(a) and a.base_entity == sk.base_entity)]
            if fact.functor in SYMMETRIC_RELATIONS and len(others) != 1:
                continue
            cons.append(SpatialConstraint(fact.functor, tuple(self._term(a) for a in others)))
        anchors = self.net.anchors.get(sk.base_entity)
        anchor = anchors[0] if anchors else None
        try:
            cell = find_region(grid, self.probe, cons, anchor=anchor,
                               d_near=self.config.d_near, d_far=self.config.d_far)
        except SpatialError as exc:
            return Rejection(sk.base_entity, "spatially-infeasible", str(exc))
        if cell is None:
            return Rejection(sk.base_entity, "spatially-infeasible", "no cell satisfies the constraints")
        return ("cell", cell)

    def _endpoint(self, term) -> Cell:
        v = self._term(term)
        if isinstance(v, Cell):
            return v
        if isinstance(v, str):
            return self.probe.anchor_cell(v)
        raise SpatialError(f"cannot use {v!r} as a path endpoint")

    def _path(self, sk: Skolem) -> Binding | Rejection:
        grid = self.probe.terrain
        if grid is None:
            return Rejection(sk.base_entity, "spatially-infeasible", "probe has no terrain")
        start = goal = None
        vis = []
        try:
            for fact in self.net.slots.get(sk.base_entity, ()):
                if fact.functor == "pathStart":
                    start = self._endpoint(fact.args[1])
                elif fact.functor == "pathEnd":
                    goal = self._endpoint(fact.args[1])
            for fact in self.net.spatial.get(sk.base_entity, ()):
                others = [a for a in fact.args if not (_is_skolem(a) and a.base_entity == sk.base_entity)]
                if len(others) != 1:
                    continue
                if fact.functor == "notVisibleFrom":
                    vis.append(("mustNotBeSeenBy", self._term(others[0])))
                elif fact.functor == "visibleFrom":
                    vis.append(("mustSee", self._term(others[0])))
            if start is None or goal is None:
                return Rejection(sk.base_entity, "spatially-infeasible", "path lacks an endpoint")
            path = plan_path(grid, PathQuery(start, goal, DEFAULT_PASSABLE, tuple(vis)), self.probe)
        except SpatialError as exc:
            return Rejection(sk.base_entity, "spatially-infeasible", str(exc))
        if path is None:
            return Rejection(sk.base_entity, "spatially-infeasible", "no compliant path")
        return ("path", tuple(path))

    def _task(self, sk: Skolem) -> Binding | Rejection:
        task_type = sk.collections[0]
        unit = target = loc = path = None
        used = [sk.base_entity]
        for fact in self.net.slots.get(sk.base_entity, ()):
            f, arg = fact.functor, fact.args[-1]
            if _is_skolem(arg):
                used.append(arg.base_entity)
            v = self._term(arg)
            if f == "taskType" and isinstance(v, Const):
                task_type = v.name
            elif f == "performedBy" and unit is None:
                unit = v
            elif f == "taskTarget" and target is None:
                target = v
            elif f == "taskLocation" and loc is None:
                loc = v
            elif f == "taskPath" and path is None:
                path = v
        if not isinstance(unit, str):
            return Rejection(sk.base_entity, "inconsistent", "task has no acting unit")
        if task_type not in self.taxonomy or self.taxonomy.partition_of(task_type) not in TASK_PARTITIONS:
            return Rejection(sk.base_entity, "inconsistent", f"{task_type} is not a task type")
        if target is not None and not isinstance(target, str):
            return Rejection(sk.base_entity, "inconsistent", "task target is not an entity")
        if isinstance(loc, str):
            try:
                loc = self.probe.anchor_cell(loc)
            except SpatialError as exc:
                return Rejection(sk.base_entity, "spatially-infeasible", str(exc))
        if loc is not None and not isinstance(loc, Cell):
            return Rejection(sk.base_entity, "inconsistent", "task location is not a place")
        if path is not None and not (isinstance(path, tuple) and all(isinstance(c, Cell) for c in path)):
            return Rejection(sk.base_entity, "inconsistent", "task path is not a path")
        if target is None and loc is None and path is None:
            return Rejection(sk.base_entity, "inconsistent", "task has no target, location or path")
        # every skolem this task was specified through counts toward its remap group
        group = self._groups(self.graph.requirements([sk.base_entity]))
        support = tuple(f"f{i}" for i in sorted(set(self.net.support.get(sk.base_entity, ()))))
        score = min((self.remap_score[g] for g in group), default=self.mapping.score)
        return ("task", TaskSuggestion(task_type, unit, target, loc, path, support, sk.base_entity,
                                       group, score))


def consistency_filter(suggestions: list[TaskSuggestion], probe: Case | None = None) -> list[TaskSuggestion]:
    """Drop remap-derived suggestions that contradict a higher-priority one.

    Two suggestions for the same unit conflict when at least one comes from an
    alternate mapping and either they place the unit in two different cells or they
    come from the same remap group. Originals outrank rewritten ones, then higher
    mapping score wins, then the earlier suggestion.
    """
    ranked = sorted(range(len(suggestions)),
                    key=lambda i: (not suggestions[i].is_original, -suggestions[i].mapping_score, i))
    kept: list[int] = []
    for i in ranked:
        s = suggestions[i]
        clash = False
        for j in kept:
            k = suggestions[j]
            if k.unit != s.unit or (s.is_original and k.is_original):
                continue
            two_places = s.location is not None and k.location is not None and s.location != k.location
            same_group = bool(set(s.remap_group) & set(k.remap_group))
            if two_places or same_group:
                clash = True
                break
        if not clash:
            kept.append(i)
    return [suggestions[i] for i in sorted(kept)]


def generate_suggestions(probe: Case, precedent, config: Config = Config(),
                         taxonomy: Taxonomy | None = None) -> tuple[list[TaskSuggestion], Trace]:
    """Map the precedent's solution onto ``probe`` and concretize the inferred tasks.

    ``precedent`` is a solution case, a ``(problem, solution)`` pair, or any object
    with a ``solution``.
    """
    taxonomy = taxonomy or default_taxonomy()
    if isinstance(precedent, Case):
        solution = precedent
    else:
        solution = precedent[1] if isinstance(precedent, tuple) else precedent.solution
    probe = derive_locations(probe)
    constraints = MatchConstraints(partitions_enabled=config.partitions)
    hyps = match_hypotheses(solution, probe, constraints)
    mapping = sme_map(solution, probe, constraints, hypotheses=hyps)
    policy = PlunkPolicy.from_config(config, taxonomy)
    graph = plunk_dependencies(mapping.inferences)
    trace = Trace(mapping_score=mapping.score)

    tasks = sorted(s for s, sk in graph.skolems.items() if sk.partition == "BlueTask")
    needed = graph.requirements(tasks)
    resolver = _Resolver(solution, probe, mapping, graph, hyps, constraints, policy, config, taxonomy)

    rejected: dict[str, Rejection] = {}
    for s in sorted(needed & graph.cyclic):
        rejected[s] = Rejection(s, "inconsistent", "dependency cycle")
    for s in [s for s in graph.order if s in needed]:
        if graph.prereqs[s] & rejected.keys():
            rejected[s] = Rejection(s, "dependency-rejected",
                                    ",".join(sorted(graph.prereqs[s] & rejected.keys())))
            continue
        out = resolver.resolve(graph.skolems[s])
        if isinstance(out, Rejection):
            rejected[s] = out
        else:
            resolver.bindings[s] = out
            if out[0] == "entity":
                trace.remaps.append((s, out[1], out[2]))
    # anything needed but never ordered sits downstream of a cycle
    for s in sorted(needed - set(graph.order) - rejected.keys()):
        rejected[s] = Rejection(s, "dependency-rejected", "depends on a cycle")
    trace.rejections = [rejected[s] for s in sorted(rejected)]

    suggestions = [resolver.bindings[s][1] for s in tasks if s in resolver.bindings]
    kept = consistency_filter(suggestions, probe)
    for s in suggestions:
        if s not in kept:
            trace.dropped.append((s.skolem or "?", "inconsistent"))
    return kept, trace


def _fmt_cell(c: Cell) -> str:
    return f"({c.row} {c.col})"


def format_report(suggestions: list[TaskSuggestion], trace: Trace | None = None) -> str:
    lines = []
    for n, s in enumerate(suggestions, 1):
        loc = _fmt_cell(s.location) if s.location is not None else "-"
        path = "[" + " ".join(_fmt_cell(c) for c in s.path) + "]" if s.path else "-"
        support = ",".join(s.support) or "-"
        lines.append(f"task {n}: type={s.task_type} unit={s.unit} target={s.target or '-'} "
                     f"loc={loc} path={path} support={support}")
    if trace is not None:
        lines.append("trace:")
        for r in trace.rejections:
            lines.append(f"rejected {r.skolem} reason={r.reason}")
        for name, reason in trace.dropped:
            lines.append(f"dropped {name} reason={reason}")
    return "\n".join(lines) + ("\n" if lines else "")


_FIELD = re.compile(r"(\w+)=(\[[^\]]*\]|\([^)]*\)|\S+)")
_CELL = re.compile(r"\((-?\d+) (-?\d+)\)")


class ReportError(ValueError):
    pass


def parse_report(text: str) -> list[TaskSuggestion]:
    """Read the ``task`` lines of a suggestion report back into suggestions."""
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.startswith("task "):
            continue
        fields = dict(_FIELD.findall(line))
        if "type" not in fields or "unit" not in fields:
            raise ReportError(f"line {n}: task line needs type= and unit=")
        loc_text = fields.get("loc", "-")
        loc = _CELL.fullmatch(loc_text)
        if loc is None and loc_text != "-":
            raise ReportError(f"line {n}: malformed location {loc_text!r}")
        path_text = fields.get("path", "-")
        path = None
        if path_text != "-":
            path = tuple(Cell(int(r), int(c)) for r, c in _CELL.findall(path_text))
            if not path:
                raise ReportError(f"line {n}: malformed path {path_text!r}")
        support = fields.get("support", "-")
        target = fields.get("target", "-")
        out.append(TaskSuggestion(
            fields["type"], fields["unit"], None if target == "-" else target,
            Cell(int(loc.group(1)), int(loc.group(2))) if loc else None, path,
            () if support == "-" else tuple(support.split(",")),
        ))
    return out
