"""Entities, cases, the case-file format, and command-hierarchy location inference."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable

from ..spatial import TERRAIN_CODES, TerrainGrid, UnlocatedEntity
from .reader import Atom, CaseSyntaxError, KBError, SList, Text, integer, keyword_args, read_all, symbol
from .taxonomy import Taxonomy, UnknownCollection, default_taxonomy
from .terms import Cell, Const, Expression, format_term

RESERVED_FUNCTORS = (
    "isa", "locatedAt", "subordinateOf", "footprint", "taskType", "performedBy", "taskTarget",
    "taskLocation", "taskPath", "pathStart", "pathEnd", "near", "farFrom", "visibleFrom",
    "notVisibleFrom", "onTerrainType", "between", "enables", "rationale",
)
CASE_KINDS = ("problem", "solution")
TERRAIN_CLASSES = frozenset(TERRAIN_CODES.values())


class UnresolvedReference(KBError):
    def __init__(self, name: str, line: int = 0, col: int = 0) -> None:
        where = f" at line {line}, column {col}" if line else ""
        super().__init__(f"unresolved reference {name!r}{where}")
        self.name = name


class DuplicateEntity(KBError):
    def __init__(self, name: str) -> None:
        super().__init__(f"duplicate entity id {name!r}")
        self.name = name


class HierarchyCycle(KBError):
    def __init__(self, cycle: list[str]) -> None:
        super().__init__("subordinateOf cycle: " + " -> ".join(cycle))
        self.cycle = cycle


@dataclass(frozen=True)
class Entity:
    id: str
    collections: tuple[str, ...]
    partition: str


@dataclass(frozen=True)
class Case:
    id: str
    kind: str
    entities: tuple[Entity, ...]
    facts: tuple[Expression, ...]
    terrain: TerrainGrid | None = None

    @cached_property
    def entity_map(self) -> dict[str, Entity]:
        return {e.id: e for e in self.entities}

    def entity(self, entity_id: str) -> Entity:
        return self.entity_map[entity_id]

    @cached_property
    def expressions(self) -> tuple[Expression, ...]:
        """Distinct expression nodes, lowest order first, then first appearance."""
        seen: dict[Expression, int] = {}
        for fact in self.facts:
            for sub in fact.subexpressions():
                seen.setdefault(sub, len(seen))
        return tuple(sorted(seen, key=lambda e: (e.order, seen[e])))

    @cached_property
    def locations(self) -> dict[str, Cell]:
        out: dict[str, Cell] = {}
        for f in self.facts:
            if f.functor == "locatedAt" and len(f.args) == 2 and isinstance(f.args[0], str) \
                    and isinstance(f.args[1], Cell):
                out.setdefault(f.args[0], f.args[1])
        return out

    @cached_property
    def footprints(self) -> dict[str, tuple[Cell, ...]]:
        out: dict[str, tuple[Cell, ...]] = {}
        for f in self.facts:
            if f.functor == "footprint" and isinstance(f.args[0], str):
                cells = tuple(a for a in f.args[1:] if isinstance(a, Cell))
                out.setdefault(f.args[0], cells)
        return out

    def entity_cells(self, entity_id: str) -> tuple[Cell, ...]:
        if entity_id in self.locations:
            return (self.locations[entity_id],)
        cells = self.footprints.get(entity_id)
        if cells:
            return cells
        raise UnlocatedEntity(entity_id)

    def anchor_cell(self, entity_id: str) -> Cell:
        """Representative cell: the located cell, else the first footprint cell in row-major order."""
        return min(self.entity_cells(entity_id))

    def facts_with(self, functor: str) -> list[Expression]:
        return [f for f in self.facts if f.functor == functor]


def _convert(node, entities: set[str], taxonomy: Taxonomy):
    if isinstance(node, Atom):
        v = node.value
        if isinstance(v, Text):
            raise CaseSyntaxError("string literal not allowed in a fact", node.line, node.col)
        if isinstance(v, (int, float)):
            return v
        if v in entities:
            return v
        if v in taxonomy or v in TERRAIN_CLASSES:
            return Const(v)
        raise UnresolvedReference(v, node.line, node.col)
    head = node.head()
    if head is None:
        raise CaseSyntaxError("expected functor", node.line, node.col)
    if head == "cell":
        if len(node.items) != 3:
            raise CaseSyntaxError("cell takes row and column", node.line, node.col)
        return Cell(integer(node.items[1], "row"), integer(node.items[2], "column"))
    if len(node.items) < 2:
        raise CaseSyntaxError(f"expression ({head}) has no arguments", node.line, node.col)
    return Expression(head, (_convert(a, entities, taxonomy) for a in node.items[1:]))


def _parse_terrain(form: SList) -> TerrainGrid:
    opts, rest = keyword_args(form.items, 1)
    if "width" not in opts or "height" not in opts:
        raise CaseSyntaxError("terrain needs :width and :height", form.line, form.col)
    w, h = integer(opts["width"]), integer(opts["height"])
    rows: dict[int, str] = {}
    elev: dict[int, tuple[int, ...]] = {}
    for sub in rest:
        if not isinstance(sub, SList):
            raise CaseSyntaxError("expected (row ...) or (elev ...)", sub.line, sub.col)
        head = sub.head()
        r = integer(sub.items[1], "row index") if len(sub.items) > 1 else None
        if r is None or not 0 <= r < h:
            raise CaseSyntaxError("bad row index", sub.line, sub.col)
        if head == "row":
            text = sub.items[2].value if len(sub.items) == 3 else None
            if not isinstance(text, Text) or len(text) != w or set(text) - TERRAIN_CODES.keys():
                raise CaseSyntaxError(f"row {r} must be a string of {w} letters from GWFMU", sub.line, sub.col)
            rows[r] = str(text)
        elif head == "elev":
            vals = tuple(integer(a, "elevation") for a in sub.items[2:])
            if len(vals) != w:
                raise CaseSyntaxError(f"elev row {r} needs {w} integers", sub.line, sub.col)
            elev[r] = vals
        else:
            raise CaseSyntaxError(f"unknown terrain form {head!r}", sub.line, sub.col)
    missing = [r for r in range(h) if r not in rows]
    if missing:
        raise CaseSyntaxError(f"terrain missing row {missing[0]}", form.line, form.col)
    return TerrainGrid(w, h, tuple(rows[r] for r in range(h)),
                       tuple(elev.get(r, (0,) * w) for r in range(h)))


def parse_case(text: str, taxonomy: Taxonomy | None = None) -> Case:
    """Parse one case file. Raises a :class:`KBError` subclass on any defect."""
    taxonomy = taxonomy or default_taxonomy()
    forms = read_all(text)
    if len(forms) != 1 or not isinstance(forms[0], SList) or forms[0].head() != "case":
        where = forms[0] if forms else None
        raise CaseSyntaxError("expected a single (case ...) form",
                              getattr(where, "line", 1), getattr(where, "col", 1))
    top = forms[0]
    if len(top.items) < 2:
        raise CaseSyntaxError("case needs an id", top.line, top.col)
    case_id = symbol(top.items[1], "case id")
    opts, body = keyword_args(top.items, 2)
    kind = symbol(opts["kind"]) if "kind" in opts else "problem"
    if kind not in CASE_KINDS:
        raise CaseSyntaxError(f"unknown case kind {kind!r}", opts["kind"].line, opts["kind"].col)

    entities: list[Entity] = []
    fact_forms: list[SList] = []
    terrain = None
    seen: set[str] = set()
    for form in body:
        if not isinstance(form, SList):
            raise CaseSyntaxError("expected a form", form.line, form.col)
        head = form.head()
        if head == "entity":
            eid = symbol(form.items[1] if len(form.items) > 1 else None, "entity id")
            if eid in seen:
                raise DuplicateEntity(eid)
            seen.add(eid)
            isa = form.items[2] if len(form.items) == 3 else None
            if not isinstance(isa, SList) or isa.head() != "isa" or len(isa.items) < 2:
                raise CaseSyntaxError("entity needs (isa <Collection> ...)", form.line, form.col)
            colls = tuple(symbol(a, "collection") for a in isa.items[1:])
            entities.append(make_entity(eid, colls, taxonomy))
        elif head == "fact":
            if len(form.items) != 2 or not isinstance(form.items[1], SList):
                raise CaseSyntaxError("fact takes one expression", form.line, form.col)
            fact_forms.append(form.items[1])
        elif head == "terrain":
            terrain = _parse_terrain(form)
        else:
            raise CaseSyntaxError(f"unknown form {head!r}", form.line, form.col)

    facts: dict[Expression, None] = {}
    for ff in fact_forms:
        expr = _convert(ff, seen, taxonomy)
        if not isinstance(expr, Expression):
            raise CaseSyntaxError("fact must be an expression", ff.line, ff.col)
        facts.setdefault(expr, None)
    case = Case(case_id, kind, tuple(entities), tuple(facts), terrain)
    validate_case(case, taxonomy)
    return case


def make_entity(entity_id: str, collections: Iterable[str], taxonomy: Taxonomy | None = None) -> Entity:
    taxonomy = taxonomy or default_taxonomy()
    colls = tuple(collections)
    if not colls:
        raise KBError(f"entity {entity_id!r} has no collections")
    parts = {taxonomy.partition_of(c) for c in colls}
    if len(parts) != 1:
        raise KBError(f"entity {entity_id!r} spans partitions {sorted(parts)}")
    return Entity(entity_id, colls, parts.pop())


def validate_case(case: Case, taxonomy: Taxonomy | None = None) -> None:
    taxonomy = taxonomy or default_taxonomy()
    ids: set[str] = set()
    for e in case.entities:
        if e.id in ids:
            raise DuplicateEntity(e.id)
        ids.add(e.id)
        for c in e.collections:
            if c not in taxonomy:
                raise UnknownCollection(c)
    for f in case.facts:
        for eid in f.entities():
            if eid not in ids:
                raise UnresolvedReference(eid)
    if case.kind == "solution" and not any(e.partition == "BlueTask" for e in case.entities):
        raise KBError(f"solution case {case.id!r} has no task entity")
    if case.terrain is not None:
        for cells in [(c,) for c in case.locations.values()] + list(case.footprints.values()):
            for cell in cells:
                case.terrain.check(cell)


def print_case(case: Case) -> str:
    lines = [f"(case {case.id} :kind {case.kind}"]
    for e in case.entities:
        lines.append(f"  (entity {e.id} (isa {' '.join(e.collections)}))")
    for f in case.facts:
        lines.append(f"  (fact {f})")
    g = case.terrain
    if g is not None:
        lines.append(f"  (terrain :width {g.width} :height {g.height}")
        for r, row in enumerate(g.rows):
            lines.append(f'    (row {r} "{row}")')
        for r, vals in enumerate(g.elevation):
            if any(vals):
                lines.append(f"    (elev {r} {' '.join(format_term(v) for v in vals)})")
        lines[-1] += ")"
    lines.append(")")
    return "\n".join(lines) + "\n"


def derive_locations(case: Case) -> Case:
    """Give every unlocated subordinate the location of its nearest located commander."""
    commander: dict[str, str] = {}
    for f in case.facts:
        if f.functor == "subordinateOf" and len(f.args) == 2 \
                and isinstance(f.args[0], str) and isinstance(f.args[1], str):
            commander.setdefault(f.args[0], f.args[1])
    for start in sorted(commander):
        path, node = [start], commander.get(start)
        while node is not None:
            if node in path:
                raise HierarchyCycle(path[path.index(node):] + [node])
            path.append(node)
            node = commander.get(node)

    located = dict(case.locations)
    added: list[Expression] = []
    for unit in sorted(commander):
        if unit in located:
            continue
        node = commander.get(unit)
        while node is not None and node not in located:
            node = commander.get(node)
        if node is not None:
            added.append(Expression("locatedAt", (unit, located[node])))
    if not added:
        return case
    return replace(case, facts=case.facts + tuple(added))
