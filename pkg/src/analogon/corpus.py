"""Deterministic synthetic scenario corpus.

Each family shares a relational skeleton and a template layout; variants jitter the
layout, rename entities, vary unit counts and add distractor facts. Expert task
locations and routes are computed on the variant's own grid, so every expert
solution is consistent with its terrain.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .kb.reader import SList, read_all
from .kb import Case, Cell, Const, Expression, derive_locations, make_entity, print_case
from .macfac import INDEX_FILE, CaseLibrary, LibraryEntry
from .spatial import (DEFAULT_PASSABLE, PathQuery, SpatialConstraint, TerrainGrid, chebyshev, find_region,
                      line_cells, line_of_sight, plan_path)

FAMILIES = ("ambush", "defend-chokepoint", "seize-objective", "screen-flank")
FACT_RANGE = (100, 300)
LARGE_FACT_RANGE = (500, 1000)
MAX_ATTEMPTS = 60

# family-specific relational vocabulary, also used for distractors in other families
VOCABULARY = {
    "ambush": ("movesAlong", "follows", "adjacentTo", "concealedBy", "threatens", "surprises", "canInterdict"),
    "defend-chokepoint": ("crosses", "spans", "chokepoint", "mustCross", "covers", "vulnerableAt", "holds"),
    "seize-objective": ("occupies", "dominates", "objectiveOf", "controls", "approaches", "suppresses", "assaults"),
    "screen-flank": ("flankOf", "approachesFlank", "exposed", "observes", "screens", "warns", "delays"),
}

# Per-family relational stories over role names; roles are bound to entity ids per variant.
STORIES = {
    "ambush": """
        (follows avenue road) (adjacentTo woods road) (concealedBy road woods)
        (threatens red town) (overlooks hill road) (canInterdict amb avenue)
        (surprises amb red) (canObserve sup road) (screenedBy amb woods)
        (restricts road red) (killZone road) (vulnerable red) (leadsInto road town)
        (enables (screenedBy amb woods) (surprises amb red))
        (causes (restricts road red) (vulnerable red))
        (implies (killZone road) (vulnerable red))
        (implies (enables (screenedBy amb woods) (surprises amb red)) (causes (restricts road red) (vulnerable red)))
        (prevents (concealedBy road woods) (detects red amb))
        (causes (surprises amb red) (disrupts amb red))
        (enables (overlooks hill road) (canObserve sup road))
        (causes (leadsInto road town) (threatens red town))
    """,
    "defend-chokepoint": """
        (obstacle river) (channelizes river red) (holds d1 bridge) (reinforces d2 d1)
        (follows avenue road) (canBlock d2 road) (overwatches ridge road)
        (vulnerableAt red bridge) (narrows bridge avenue) (anchoredOn d1 river)
        (causes (channelizes river red) (mustCross red bridge))
        (implies (obstacle river) (channelizes river red))
        (enables (overwatches ridge road) (canBlock d2 road))
        (implies (causes (mustCross red bridge) (vulnerableAt red bridge)) (enables (covers ridge bridge) (holds d1 bridge)))
        (prevents (holds d1 bridge) (crossesOver red river))
        (enables (reinforces d2 d1) (holds d1 bridge))
        (causes (narrows bridge avenue) (vulnerableAt red bridge))
        (enables (anchoredOn d1 river) (holds d1 bridge))
    """,
    "seize-objective": """
        (coveredApproach woods hill) (keyTerrain hill) (supportsFrom tank woods)
        (assigned sq plt) (fixes tank red) (isolated red) (controls red hill)
        (overlooksTown hill town) (bypasses plt town) (exposedOn red hill)
        (enables (coveredApproach woods hill) (approaches plt hill))
        (causes (fixes tank red) (isolated red))
        (implies (keyTerrain hill) (objectiveOf hill coy))
        (implies (causes (fixes tank red) (isolated red)) (enables (approaches plt hill) (assaults sq hill)))
        (prevents (suppresses tank red) (resupplies red hill))
        (enables (supportsFrom tank woods) (suppresses tank red))
        (causes (overlooksTown hill town) (keyTerrain hill))
        (enables (exposedOn red hill) (fixes tank red))
    """,
    "screen-flank": """
        (exposed main) (masks woods main) (earlyWarning scout main) (canDelay guard red)
        (leadsTo route village) (patrols red route) (overlooksRoute ridge route)
        (needsScreen main) (fallsBackTo guard village)
        (causes (observes scout ridge) (warns scout main))
        (enables (overlooksRoute ridge route) (observes scout ridge))
        (causes (patrols red route) (approachesFlank red main))
        (implies (exposed main) (needsScreen main))
        (implies (causes (patrols red route) (approachesFlank red main)) (enables (approachesFlank red main) (exposed main)))
        (prevents (earlyWarning scout main) (surprisedBy main red))
        (enables (canDelay guard red) (earlyWarning scout main))
        (causes (leadsTo route village) (threatensRear red village))
    """,
}


# Subsidiary engagements repeated a few times per case, over unlocated entities.
SECTORS = {
    "ambush": """
        (movesAlong red lane) (concealedBy lane cover) (screenedBy blue cover) (canInterdict blue lane)
        (surprises blue red) (restricts lane red) (killZone lane)
        (enables (screenedBy blue cover) (surprises blue red))
        (causes (restricts lane red) (vulnerable red))
    """,
    "defend-chokepoint": """
        (mustCross red gap) (spans gap obstacle) (holds blue gap) (channelizes obstacle red)
        (covers rise gap) (chokepoint gap) (obstacle obstacle)
        (causes (channelizes obstacle red) (mustCross red gap))
        (enables (covers rise gap) (holds blue gap))
    """,
    "seize-objective": """
        (occupies red knoll) (approaches blue knoll) (keyTerrain knoll) (coveredApproach cover knoll)
        (fixes blue red) (controls red knoll) (objectiveOf knoll blue)
        (enables (coveredApproach cover knoll) (approaches blue knoll))
        (causes (fixes blue red) (isolated red))
    """,
    "screen-flank": """
        (approachesFlank red flank) (observes blue rise) (screens rise lane) (patrols red lane)
        (overlooksRoute rise lane) (earlyWarning blue flank) (exposed flank)
        (causes (patrols red lane) (approachesFlank red flank))
        (enables (overlooksRoute rise lane) (observes blue rise))
    """,
}
SECTOR_ROLES = {
    "red": ("red", "RedRifleSquad", "red"),
    "blue": ("blue", "BlueInfantrySquad", "blue"),
    "lane": ("lane", "Road", "terrain"),
    "cover": ("cover", "Woods", "terrain"),
    "gap": ("gap", "Bridge", "terrain"),
    "obstacle": ("obstacle", "Stream", "terrain"),
    "rise": ("rise", "Ridge", "terrain"),
    "knoll": ("knoll", "Hill", "terrain"),
    "flank": ("flank", "BlueInfantryPlatoon", "blue"),
}


def _sectors(b: "_Builder", family: str, count: int) -> None:
    roles_used = {a.value for node in read_all(SECTORS[family]) for a in _atoms(node)} & set(SECTOR_ROLES)
    for _ in range(count):
        roles = {r: b.entity(*SECTOR_ROLES[r]) for r in sorted(roles_used)}
        for node in read_all(SECTORS[family]):
            e = _template_expr(node, roles)
            b.fact(e.functor, *e.args)


def _atoms(node):
    for a in node.items[1:]:
        if isinstance(a, SList):
            yield from _atoms(a)
        else:
            yield a


def _template_expr(node, roles: dict[str, str]) -> Expression:
    args = tuple(_template_expr(a, roles) if isinstance(a, SList) else roles[a.value] for a in node.items[1:])
    return Expression(node.head(), args)


def _story(b: "_Builder", family: str, roles: dict[str, str]) -> None:
    for node in read_all(STORIES[family]):
        e = _template_expr(node, roles)
        b.fact(e.functor, *e.args)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    families: tuple[str, ...] = FAMILIES
    variants: int = 4
    grid_size: int = 24
    noise: tuple[int, int] = (10, 30)
    large: bool = False

    def __post_init__(self) -> None:
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown families {sorted(unknown)}")
        if self.variants < 1:
            raise ValueError("need at least one variant per family")
        if self.grid_size < 16:
            raise ValueError("grid_size must be >= 16")

    @property
    def fact_range(self) -> tuple[int, int]:
        return LARGE_FACT_RANGE if self.large else FACT_RANGE

    def is_probe(self, variant: int) -> bool:
        return self.variants == 1 or variant != self.variants - 1

    def extra_enemy_variant(self) -> int:
        return min(2, self.variants - 1)


@dataclass(frozen=True)
class CorpusCase:
    id: str
    family: str
    variant: int
    problem: Case
    solution: Case
    probe: bool
    extra_enemy: bool
    enemies: tuple[str, ...] = ()


@dataclass(frozen=True)
class Corpus:
    spec: CorpusSpec
    cases: tuple[CorpusCase, ...]

    def library(self) -> CaseLibrary:
        return CaseLibrary(tuple(
            LibraryEntry(c.id, derive_locations(c.problem), derive_locations(c.solution), probe=c.probe)
            for c in self.cases))

    def index_text(self) -> str:
        lines = [f"# corpus seed={self.spec.seed} families={len(self.spec.families)} "
                 f"variants={self.spec.variants} large={'yes' if self.spec.large else 'no'}"]
        for c in self.cases:
            lines.append(f"{c.id} {c.id}.problem.case {c.id}.solution.case {'probe' if c.probe else '-'}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for c in self.cases:
            (out / f"{c.id}.problem.case").write_text(print_case(c.problem), encoding="utf-8")
            (out / f"{c.id}.solution.case").write_text(print_case(c.solution), encoding="utf-8")
        (out / INDEX_FILE).write_text(self.index_text(), encoding="utf-8")
        return out


# ---------------------------------------------------------------- building blocks

@dataclass
class _Loc:
    id: str
    collection: str
    constraints: list[tuple[str, object]]  # (relation, other place)
    hint: Cell
    cell: Cell | None = None


@dataclass
class _Route:
    id: str
    collection: str
    start: object
    end: object
    hidden_from: list[str] = field(default_factory=list)


@dataclass
class _Task:
    id: str
    collection: str
    unit: str
    target: str | None = None
    location: str | None = None
    path: str | None = None


class _Builder:
    def __init__(self, rng: random.Random, size: int) -> None:
        self.rng = rng
        self.size = size
        self.rows = [["G"] * size for _ in range(size)]
        self.elev = [[0] * size for _ in range(size)]
        self.entities: dict[str, tuple[str, ...]] = {}
        self.loc: dict[str, Cell] = {}
        self.foot: dict[str, list[Cell]] = {}
        self.kind: dict[str, str] = {}
        self.facts: list[Expression] = []
        self.used_numbers: set[int] = set()
        self.locations: list[_Loc] = []
        self.routes: list[_Route] = []
        self.tasks: list[_Task] = []
        self.enemies: list[str] = []  # main-force red units of the family skeleton
        self.solution_facts_later: Callable[[], list[tuple]] = lambda: []

    # geometry
    def at(self, fr: float, fc: float, jitter: int = 2) -> Cell:
        s = self.size
        r = int(round(fr * (s - 1))) + self.rng.randint(-jitter, jitter)
        c = int(round(fc * (s - 1))) + self.rng.randint(-jitter, jitter)
        return Cell(min(max(r, 1), s - 2), min(max(c, 1), s - 2))

    def inside(self, cell) -> bool:
        return 0 <= cell[0] < self.size and 0 <= cell[1] < self.size

    def blob(self, center: Cell, radius: int) -> list[Cell]:
        out = []
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                c = Cell(center[0] + dr, center[1] + dc)
                if self.inside(c) and abs(dr) + abs(dc) <= radius + (1 if self.rng.random() < 0.3 else 0):
                    out.append(c)
        return sorted(set(out))

    def paint(self, cells, letter: str | None = None, elevation: int | None = None) -> None:
        for r, c in cells:
            if letter is not None:
                self.rows[r][c] = letter
            if elevation is not None:
                self.elev[r][c] = max(self.elev[r][c], elevation)

    def scatter(self, letter: str, count: int) -> None:
        for _ in range(count):
            r, c = self.rng.randrange(self.size), self.rng.randrange(self.size)
            if self.rows[r][c] == "G":
                self.rows[r][c] = letter

    # entities and facts
    def name(self, prefix: str) -> str:
        while True:
            n = self.rng.randint(10, 999)
            if n not in self.used_numbers:
                self.used_numbers.add(n)
                return f"{prefix}-{n}"

    def entity(self, prefix: str, collection: str, kind: str) -> str:
        eid = self.name(prefix)
        self.entities[eid] = (collection,)
        self.kind[eid] = kind
        return eid

    def unit(self, prefix: str, collection: str, cell: Cell | None, side: str) -> str:
        eid = self.entity(prefix, collection, side)
        if cell is not None:
            self.rows[cell[0]][cell[1]] = "G"
            self.loc[eid] = cell
            self.fact("locatedAt", eid, cell)
        return eid

    def feature(self, prefix: str, collection: str, cells: list[Cell], letter: str | None = None,
                elevation: int | None = None) -> str:
        eid = self.entity(prefix, collection, "terrain")
        cells = sorted(set(cells))
        self.paint(cells, letter, elevation)
        self.foot[eid] = cells
        self.fact("footprint", eid, *cells)
        return eid

    def fact(self, functor: str, *args) -> Expression:
        e = Expression(functor, args)
        if e not in self.facts:
            self.facts.append(e)
        return e

    def cells_of(self, eid: str) -> list[Cell]:
        if eid in self.loc:
            return [self.loc[eid]]
        return self.foot.get(eid, [])

    def grid(self) -> TerrainGrid:
        return TerrainGrid(self.size, self.size, tuple("".join(r) for r in self.rows),
                           tuple(tuple(r) for r in self.elev))


def _spatial_facts(b: _Builder, grid: TerrainGrid, ids: list[str]) -> None:
    """Proximity among located entities; distance and sight only between opposing units."""
    placed = [e for e in ids if b.cells_of(e)]
    for i, x in enumerate(placed):
        xs = b.cells_of(x)
        for y in placed[i + 1:]:
            ys = b.cells_of(y)
            d = min(chebyshev(p, q) for p in xs for q in ys)
            if d <= 3:
                b.fact("near", x, y)
            if {b.kind[x], b.kind[y]} != {"red", "blue"}:
                continue
            if d > 8:
                b.fact("farFrom", x, y)
            if line_of_sight(grid, xs[0], ys[0]):
                b.fact("visibleFrom", x, y)
    for x in placed:
        if x in b.loc:
            b.fact("onTerrainType", x, Const(grid.terrain(b.loc[x])))


# ---------------------------------------------------------------- families

def _ambush(b: _Builder, extra_enemy: bool) -> None:
    s = b.size
    road_row = b.at(0.5, 0.5, 1)[0]
    road = [Cell(road_row, c) for c in range(1, s - 1)]
    rd = b.feature("road", "Road", road, "G")
    wc = b.at(0.5, 0.5, 2)
    woods = b.feature("woods", b.rng.choice(("Woods", "DenseWoods")),
                      b.blob(Cell(road_row - 3, wc[1]), 2), "F")
    hl = b.feature("hill", "Hill", b.blob(b.at(0.2, 0.75), 1), None, 2)
    tn = b.feature("town", b.rng.choice(("Town", "Village")), b.blob(Cell(road_row, s - 3), 1), "U")
    b.paint(road, "G")
    red = b.unit("red", b.rng.choice(("RedMechanizedPlatoon", "RedRiflePlatoon")), Cell(road_row, 1), "red")
    rp = b.entity("avenue", "RedAvenueOfApproach", "path")
    rt = b.entity("enemy-task", "EnemyAdvance", "task")
    b.fact("pathStart", rp, red)
    b.fact("pathEnd", rp, tn)
    b.fact("performedBy", rt, red)
    b.fact("taskPath", rt, rp)
    amb = b.unit("blue", "BlueInfantryPlatoon", b.at(0.15, 0.45), "blue")
    sup = b.unit("blue", "BlueMortarSection", b.at(0.1, 0.65), "blue")
    if b.rng.random() < 0.5:
        b.unit("blue", "BlueTankPlatoon", b.at(0.1, 0.25), "blue")
    v = VOCABULARY["ambush"]
    b.fact(v[0], red, rp)
    b.fact(v[1], rp, rd)
    b.fact(v[2], woods, rd)
    b.fact(v[3], rd, woods)
    b.fact(v[4], red, tn)
    b.fact("enables", Expression(v[2], (woods, rd)), Expression(v[5], (amb, red)))
    b.fact("causes", Expression(v[4], (red, tn)), Expression(v[6], (amb, rp)))
    b.fact("enables", Expression(v[0], (red, rp)), Expression(v[6], (sup, rp)))
    _story(b, "ambush", dict(red=red, avenue=rp, road=rd, woods=woods, hill=hl, town=tn, amb=amb, sup=sup))
    reds = [red]
    if extra_enemy:
        red2 = b.unit("red", "RedRiflePlatoon", Cell(min(road_row + 2, s - 2), 2), "red")
        b.fact(v[0], red2, rp)
        b.fact(v[4], red2, tn)
        reds.append(red2)
    b.enemies = reds

    site = b.name("site")
    b.locations.append(_Loc(site, "AmbushSite",
                            [("near", rd), ("onTerrainType", Const("Forest"))] +
                            [("notVisibleFrom", r) for r in reds], Cell(road_row - 2, wc[1])))
    route = b.name("route")
    b.routes.append(_Route(route, "BlueRoute", sup, hl))
    t1, t2 = b.name("task"), b.name("task")
    b.tasks += [_Task(t1, "Ambush", amb, red, location=site), _Task(t2, "SupportByFire", sup, red, path=route)]
    b.solution_facts_later = lambda: [
        ("rationale", t1, Expression("notVisibleFrom", (site, red))),
        ("rationale", t1, Expression("near", (site, rd))),
        ("enables", Expression("taskLocation", (t1, site)), Expression(v[5], (amb, red))),
        ("supports", t2, t1),
    ] + [("rationale", t1, Expression(v[0], (r, rp))) for r in reds[1:]]


def _defend(b: _Builder, extra_enemy: bool) -> None:
    s = b.size
    col = b.at(0.5, 0.45, 1)[1]
    river = [Cell(r, col) for r in range(s)]
    rv = b.feature("river", b.rng.choice(("River", "Stream")), river, "W")
    row = b.at(0.5, 0.5, 2)[0]
    br = b.feature("bridge", "Bridge", [Cell(row, col)], "G")
    road = [Cell(row, c) for c in range(1, s - 1) if c != col]
    rd = b.feature("road", "Road", road, "G")
    hl = b.feature("hill", "Ridge", b.blob(b.at(0.25, 0.75), 1), None, 2)
    b.feature("woods", "Woods", b.blob(b.at(0.8, 0.75), 2), "F")
    red = b.unit("red", "RedTankPlatoon", Cell(row, 1), "red")
    rp = b.entity("avenue", "RedAvenueOfApproach", "path")
    rt = b.entity("enemy-task", "EnemyAttack", "task")
    b.fact("pathStart", rp, red)
    b.fact("pathEnd", rp, hl)
    b.fact("performedBy", rt, red)
    b.fact("taskPath", rt, rp)
    d1 = b.unit("blue", "BlueInfantryPlatoon", b.at(0.3, 0.85), "blue")
    d2 = b.unit("blue", "BlueTankPlatoon", b.at(0.7, 0.85), "blue")
    if b.rng.random() < 0.5:
        b.unit("blue", "BlueMortarSection", b.at(0.5, 0.95, 1), "blue")
    v = VOCABULARY["defend-chokepoint"]
    b.fact(v[0], rp, rv)
    b.fact(v[1], br, rv)
    b.fact(v[2], br)
    b.fact(v[3], red, br)
    b.fact(v[4], hl, br)
    b.fact("enables", Expression(v[1], (br, rv)), Expression(v[2], (br,)))
    b.fact("causes", Expression(v[3], (red, br)), Expression(v[5], (red, br)))
    b.fact("enables", Expression(v[4], (hl, br)), Expression(v[6], (d1, br)))
    _story(b, "defend-chokepoint", dict(red=red, avenue=rp, river=rv, bridge=br, road=rd, ridge=hl, d1=d1, d2=d2))
    reds = [red]
    if extra_enemy:
        red2 = b.unit("red", "RedMechanizedPlatoon", Cell(max(row - 2, 1), 2), "red")
        b.fact(v[3], red2, br)
        b.fact(v[0], red2, rv)
        reds.append(red2)
    b.enemies = reds
    bp1, bp2 = b.name("position"), b.name("position")
    b.locations.append(_Loc(bp1, "BattlePosition",
                            [("near", br), ("visibleFrom", br), ("onTerrainType", Const("Grass"))] +
                            [("farFrom", r) for r in reds], Cell(row - 2, min(col + 3, s - 2))))
    b.locations.append(_Loc(bp2, "BattlePosition",
                            [("near", hl), ("visibleFrom", rd), ("onTerrainType", Const("Grass"))],
                            b.cells_of(hl)[0]))
    t1, t2 = b.name("task"), b.name("task")
    b.tasks += [_Task(t1, "BattlePositionDefense", d1, red, location=bp1),
                _Task(t2, "BlockingPosition", d2, reds[-1], location=bp2)]
    b.solution_facts_later = lambda: [
        ("rationale", t1, Expression("visibleFrom", (bp1, br))),
        ("enables", Expression("taskLocation", (t1, bp1)), Expression(v[6], (d1, br))),
        ("rationale", t2, Expression(v[4], (hl, br))),
        ("supports", t2, t1),
    ] + [("rationale", t1, Expression(v[3], (r, br))) for r in reds[1:]]


def _seize(b: _Builder, extra_enemy: bool) -> None:
    hc = b.at(0.3, 0.7)
    hl = b.feature("hill", "Hill", b.blob(hc, 1), "G", 2)
    woods = b.feature("woods", "Woods", b.blob(b.at(0.55, 0.45), 2), "F")
    tn = b.feature("town", "Village", b.blob(b.at(0.15, 0.2), 1), "U")
    red = b.unit("red", "RedRifleSquad", hc, "red")
    rt = b.entity("enemy-task", "EnemyDefend", "task")
    b.fact("performedBy", rt, red)
    b.fact("taskTarget", rt, hl)
    coy = b.unit("blue", "BlueRifleCompany", b.at(0.85, 0.15), "blue")
    plt = b.unit("blue", "BlueInfantryPlatoon", b.at(0.75, 0.3), "blue")
    sq = b.unit("blue", "BlueInfantrySquad", None, "blue")
    tank = b.unit("blue", "BlueTankPlatoon", b.at(0.8, 0.55), "blue")
    b.fact("subordinateOf", plt, coy)
    b.fact("subordinateOf", sq, plt)
    v = VOCABULARY["seize-objective"]
    b.fact(v[0], red, hl)
    b.fact(v[1], hl, woods)
    b.fact(v[2], hl, coy)
    b.fact(v[4], plt, hl)
    b.fact("enables", Expression(v[0], (red, hl)), Expression(v[3], (red, hl)))
    b.fact("causes", Expression(v[1], (hl, woods)), Expression(v[5], (tank, red)))
    b.fact("enables", Expression(v[4], (plt, hl)), Expression(v[6], (sq, hl)))
    _story(b, "seize-objective", dict(red=red, hill=hl, woods=woods, town=tn, coy=coy, plt=plt, sq=sq, tank=tank))
    reds = [red]
    if extra_enemy:
        red2 = b.unit("red", "RedRifleSquad", Cell(hc[0] - 1, hc[1] + 1), "red")
        b.fact(v[0], red2, hl)
        reds.append(red2)
    b.enemies = reds
    axis = b.name("axis")
    b.routes.append(_Route(axis, "BlueAxisOfAdvance", sq, hl))
    sbf = b.name("position")
    b.locations.append(_Loc(sbf, "BattlePosition",
                            [("visibleFrom", hl), ("near", woods), ("onTerrainType", Const("Grass"))] +
                            [("visibleFrom", r) for r in reds[1:]], b.at(0.5, 0.6)))
    t1, t2 = b.name("task"), b.name("task")
    b.tasks += [_Task(t1, "Seize", sq, hl, path=axis), _Task(t2, "SupportByFire", tank, reds[-1], location=sbf)]
    b.solution_facts_later = lambda: [
        ("rationale", t1, Expression(v[0], (red, hl))),
        ("enables", Expression("taskTarget", (t2, reds[-1])), Expression(v[5], (tank, red))),
        ("supports", t2, t1),
    ] + [("rationale", t1, Expression(v[0], (r, hl))) for r in reds[1:]]


def _screen(b: _Builder, extra_enemy: bool) -> None:
    a, z = b.at(0.2, 0.55), b.at(0.65, 0.7)
    ridge_cells = [c for p in line_cells(a, z) for c in (p, Cell(p[0], p[1] + 1)) if b.inside(c)]
    rg = b.feature("ridge", "Ridge", ridge_cells, "G", 3)
    vl = b.feature("village", "Village", b.blob(b.at(0.85, 0.85), 1), "U")
    woods = b.feature("woods", "Woods", b.blob(b.at(0.3, 0.25), 2), "F")
    red = b.unit("red", b.rng.choice(("RedPatrol", "RedObservationPost")), b.at(0.1, 0.92, 1), "red")
    rp = b.entity("avenue", "RedRoute", "path")
    rt = b.entity("enemy-task", "EnemyAdvance", "task")
    b.fact("pathStart", rp, red)
    b.fact("pathEnd", rp, vl)
    b.fact("performedBy", rt, red)
    b.fact("taskPath", rt, rp)
    main = b.unit("blue", "BlueInfantryPlatoon", b.at(0.55, 0.3), "blue")
    scout = b.unit("blue", "BlueScoutSection", b.at(0.45, 0.4), "blue")
    guard = b.unit("blue", "BlueTankPlatoon", b.at(0.75, 0.45), "blue")
    v = VOCABULARY["screen-flank"]
    b.fact(v[0], rg, main)
    b.fact(v[1], red, main)
    b.fact(v[3], scout, rg)
    b.fact(v[4], rg, rp)
    b.fact("enables", Expression(v[1], (red, main)), Expression(v[2], (main,)))
    b.fact("causes", Expression(v[3], (scout, rg)), Expression(v[5], (scout, main)))
    b.fact("enables", Expression(v[4], (rg, rp)), Expression(v[6], (guard, red)))
    _story(b, "screen-flank", dict(red=red, route=rp, ridge=rg, village=vl, woods=woods, main=main, scout=scout, guard=guard))
    reds = [red]
    if extra_enemy:
        red2 = b.unit("red", "RedPatrol", b.at(0.3, 0.95, 1), "red")
        b.fact(v[1], red2, main)
        reds.append(red2)
    b.enemies = reds
    op, cp = b.name("outpost"), b.name("checkpoint")
    b.locations.append(_Loc(op, "ObservationPoint",
                            [("near", rg), ("visibleFrom", vl), ("onTerrainType", Const("Grass"))],
                            b.at(0.5, 0.8)))
    b.locations.append(_Loc(cp, "Checkpoint",
                            [("near", vl), ("onTerrainType", Const("Grass"))] +
                            [("farFrom", r) for r in reds], b.at(0.75, 0.7)))
    t1, t2 = b.name("task"), b.name("task")
    b.tasks += [_Task(t1, "FlankScreen", scout, red, location=op),
                _Task(t2, "Guard", guard, reds[-1], location=cp)]
    b.solution_facts_later = lambda: [
        ("rationale", t1, Expression(v[1], (red, main))),
        ("enables", Expression("taskLocation", (t1, op)), Expression(v[5], (scout, main))),
        ("supports", t2, t1),
    ] + [("rationale", t2, Expression(v[1], (r, main))) for r in reds[1:]]


FAMILY_BUILDERS: dict[str, Callable[[_Builder, bool], None]] = {
    "ambush": _ambush,
    "defend-chokepoint": _defend,
    "seize-objective": _seize,
    "screen-flank": _screen,
}

DISTRACTOR_UNITS = ("RedPatrol", "RedObservationPost", "BlueScoutSection")
DISTRACTOR_TERRAIN = (("Village", "U"), ("Lake", "W"), ("Swamp", None), ("Hill", None))


def _distractors(b: _Builder, family: str, n_facts: int) -> None:
    corner = b.rng.choice(((0.05, 0.05), (0.95, 0.05), (0.05, 0.95), (0.95, 0.95)))
    ents = []
    for col in b.rng.sample(DISTRACTOR_UNITS, 2):
        side = "red" if col.startswith("Red") else "blue"
        ents.append(b.unit("other", col, b.at(*corner, 2), side))
    coll, letter = b.rng.choice(DISTRACTOR_TERRAIN)
    ents.append(b.feature("other", coll, b.blob(b.at(*corner, 2), 1), letter))
    vocab = [f for fam, fs in VOCABULARY.items() if fam != family for f in fs]
    added = 0
    guard = 0
    while added < n_facts and guard < 20 * n_facts:
        guard += 1
        functor = b.rng.choice(vocab)
        x, y = b.rng.sample(ents, 2)
        before = len(b.facts)
        if b.rng.random() < 0.2:
            b.fact("enables", Expression(functor, (x, y)), Expression(b.rng.choice(vocab), (y, x)))
        else:
            b.fact(functor, x, y)
        added += len(b.facts) - before


def _large_padding(b: _Builder, family: str, n_sectors: int) -> None:
    """Extra sectors of units and terrain with the family's own vocabulary, for scale tests."""
    v = VOCABULARY[family]
    for k in range(n_sectors):
        fr, fc = b.rng.random() * 0.8 + 0.1, b.rng.random() * 0.8 + 0.1
        hill = b.feature("sector", "Hill", b.blob(b.at(fr, fc, 3), 1), None, 1)
        woods = b.feature("sector", "Woods", b.blob(b.at(fr, fc, 4), 1), "F")
        blue = b.unit("blue", b.rng.choice(("BlueInfantryPlatoon", "BlueTankPlatoon")), b.at(fr, fc, 4), "blue")
        red = b.unit("red", b.rng.choice(("RedRiflePlatoon", "RedPatrol")), b.at(fr, fc, 5), "red")
        b.fact(v[k % len(v)], red, hill)
        b.fact(v[(k + 1) % len(v)], blue, woods)
        b.fact("enables", Expression(v[(k + 2) % len(v)], (hill, woods)), Expression(v[(k + 3) % len(v)], (blue, red)))


def _resolve_place(b: _Builder, place, cells: dict[str, Cell]):
    if isinstance(place, str) and place in cells:
        return cells[place]
    return place


def _attempt(rng: random.Random, spec: CorpusSpec, family: str, variant: int, extra_enemy: bool):
    size = spec.grid_size * (2 if spec.large else 1)
    b = _Builder(rng, size)
    b.scatter("F", size // 2)
    b.scatter("M", size // 6)
    FAMILY_BUILDERS[family](b, extra_enemy)
    _sectors(b, family, rng.randint(45, 60) if spec.large else rng.randint(3, 5))
    if spec.large:
        _large_padding(b, family, 5)
    lo, hi = spec.noise
    noise = rng.randint(lo, hi) * (2 if spec.large else 1)
    _distractors(b, family, noise)
    # units never stand on impassable ground
    for cell in b.loc.values():
        b.rows[cell[0]][cell[1]] = "G"
    grid = b.grid()
    _spatial_facts(b, grid, list(b.entities))

    case_id = f"{family.split('-')[0]}-{variant + 1}"
    ents = tuple(make_entity(e, cols) for e, cols in b.entities.items())
    problem = Case(case_id, "problem", ents, tuple(b.facts), grid)
    probe = derive_locations(problem)

    placed: dict[str, Cell] = {}
    for loc in b.locations:
        cons = [SpatialConstraint(rel, (_resolve_place(b, other, placed),)) for rel, other in loc.constraints]
        cell = find_region(grid, probe, cons, anchor=loc.hint)
        if cell is None:
            return None
        loc.cell = placed[loc.id] = cell
    for route in b.routes:
        def end(x):
            x = _resolve_place(b, x, placed)
            return x if isinstance(x, Cell) else probe.anchor_cell(x)
        vis = tuple(("mustNotBeSeenBy", r) for r in route.hidden_from)
        if plan_path(grid, PathQuery(end(route.start), end(route.end), DEFAULT_PASSABLE, vis), probe) is None:
            return None

    sol_ents = list(ents)
    sol: list[Expression] = list(b.facts)

    def add(functor, *args):
        e = Expression(functor, args)
        if e not in sol:
            sol.append(e)

    for loc in b.locations:
        sol_ents.append(make_entity(loc.id, (loc.collection,)))
    for route in b.routes:
        sol_ents.append(make_entity(route.id, (route.collection,)))
    for t in b.tasks:
        sol_ents.append(make_entity(t.id, (t.collection,)))
    for loc in b.locations:
        add("locatedAt", loc.id, loc.cell)
        for rel, other in loc.constraints:
            add(rel, loc.id, other)
    for route in b.routes:
        add("pathStart", route.id, route.start)
        add("pathEnd", route.id, route.end)
        for r in route.hidden_from:
            add("notVisibleFrom", route.id, r)
    for t in b.tasks:
        add("taskType", t.id, Const(t.collection))
        add("performedBy", t.id, t.unit)
        if t.target:
            add("taskTarget", t.id, t.target)
        if t.location:
            add("taskLocation", t.id, t.location)
        if t.path:
            add("taskPath", t.id, t.path)
    for functor, *args in b.solution_facts_later():
        add(functor, *args)
    solution = Case(case_id, "solution", tuple(sol_ents), tuple(sol), grid)

    lo, hi = spec.fact_range
    if not (lo <= len(problem.facts) and len(solution.facts) <= hi):
        return None
    return problem, solution, tuple(b.enemies)


def generate_case(spec: CorpusSpec, family: str, variant: int) -> CorpusCase:
    extra = variant == spec.extra_enemy_variant() and spec.variants > 1
    rng = random.Random(f"{spec.seed}:{family}:{variant}:{'L' if spec.large else 'S'}")
    for _ in range(MAX_ATTEMPTS):
        out = _attempt(rng, spec, family, variant, extra)
        if out is not None:
            problem, solution, enemies = out
            return CorpusCase(problem.id, family, variant, problem, solution, spec.is_probe(variant), extra,
                              enemies)
    raise GenerationError(f"could not lay out {family} variant {variant} in {MAX_ATTEMPTS} attempts")


def generate(spec: CorpusSpec = CorpusSpec()) -> Corpus:
    cases = [generate_case(spec, fam, v) for fam in spec.families for v in range(spec.variants)]
    return Corpus(spec, tuple(cases))
