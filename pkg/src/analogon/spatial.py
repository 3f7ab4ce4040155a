"""Grid spatial reasoning: line of sight, constrained path planning and region finding."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .kb.terms import Cell, Const

TERRAIN_CODES = {"G": "Grass", "W": "Water", "F": "Forest", "M": "Mountain", "U": "Urban"}
TERRAIN_LETTERS = {v: k for k, v in TERRAIN_CODES.items()}
SIGHT_BLOCKERS = frozenset({"Forest", "Urban", "Mountain"})
DEFAULT_PASSABLE = frozenset({"Grass", "Forest", "Urban"})

# N, E, S, W
NEIGHBOR_STEPS = ((-1, 0), (0, 1), (1, 0), (0, -1))

SPATIAL_RELATIONS = frozenset({"near", "farFrom", "visibleFrom", "notVisibleFrom", "onTerrainType", "between"})


class SpatialError(ValueError):
    pass


class OutOfBounds(SpatialError):
    pass


class UnlocatedEntity(SpatialError):
    def __init__(self, entity: str) -> None:
        super().__init__(f"entity {entity!r} has no location")
        self.entity = entity


@dataclass(frozen=True)
class TerrainGrid:
    """Rectangular grid; ``rows`` holds one terrain letter (GWFMU) per cell."""

    width: int
    height: int
    rows: tuple[str, ...]
    elevation: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise SpatialError("grid dimensions must be >= 1")
        if len(self.rows) != self.height or any(len(r) != self.width for r in self.rows):
            raise SpatialError("terrain rows do not match grid dimensions")
        bad = {ch for r in self.rows for ch in r} - TERRAIN_CODES.keys()
        if bad:
            raise SpatialError(f"unknown terrain letters {sorted(bad)}")
        if len(self.elevation) != self.height or any(len(r) != self.width for r in self.elevation):
            raise SpatialError("elevation rows do not match grid dimensions")

    @classmethod
    def uniform(cls, width: int, height: int, letter: str = "G") -> "TerrainGrid":
        return cls(width, height, tuple(letter * width for _ in range(height)),
                   tuple((0,) * width for _ in range(height)))

    @classmethod
    def from_rows(cls, rows: Sequence[str], elevation: Sequence[Sequence[int]] | None = None) -> "TerrainGrid":
        h, w = len(rows), len(rows[0])
        elev = tuple(tuple(r) for r in elevation) if elevation else tuple((0,) * w for _ in range(h))
        return cls(w, h, tuple(rows), elev)

    @cached_property
    def _memo(self) -> dict:
        return {"los": {}, "view": {}}

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def check(self, cell) -> Cell:
        if not self.in_bounds(cell):
            raise OutOfBounds(f"cell {tuple(cell)} outside {self.height}x{self.width} grid")
        return Cell(*cell)

    def terrain(self, cell) -> str:
        return TERRAIN_CODES[self.rows[cell[0]][cell[1]]]

    def elev(self, cell) -> int:
        return self.elevation[cell[0]][cell[1]]

    def cells(self) -> Iterable[Cell]:
        for r in range(self.height):
            for c in range(self.width):
                yield Cell(r, c)

    def diagonal(self) -> float:
        return ((self.width - 1) ** 2 + (self.height - 1) ** 2) ** 0.5


def chebyshev(a, b) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def line_cells(a, b) -> list[Cell]:
    """Integer line from ``a`` to ``b`` inclusive (Bresenham)."""
    r0, c0 = a
    r1, c1 = b
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 > r0 else -1
    sc = 1 if c1 > c0 else -1
    err = dc - dr
    out = [Cell(r0, c0)]
    while (r0, c0) != (r1, c1):
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c0 += sc
        if e2 < dc:
            err += dc
            r0 += sr
        out.append(Cell(r0, c0))
    return out


def line_of_sight(grid: TerrainGrid, a, b) -> bool:
    """True iff no intermediate cell on the a-b line is a blocker or rises above both ends."""
    a, b = grid.check(a), grid.check(b)
    if a == b:
        return True
    key = (a, b) if a <= b else (b, a)
    memo = grid._memo["los"]
    hit = memo.get(key)
    if hit is not None:
        return hit
    limit = max(grid.elev(a), grid.elev(b))
    visible = True
    # walk from the smaller endpoint so the traversal, and the answer, is symmetric
    for cell in line_cells(*key)[1:-1]:
        if grid.terrain(cell) in SIGHT_BLOCKERS or grid.elev(cell) > limit:
            visible = False
            break
    memo[key] = visible
    return visible


def viewshed(grid: TerrainGrid, source) -> frozenset[Cell]:
    source = grid.check(source)
    memo = grid._memo["view"]
    if source not in memo:
        memo[source] = frozenset(c for c in grid.cells() if line_of_sight(grid, source, c))
    return memo[source]


def place_cells(place, case=None) -> tuple[Cell, ...]:
    """Cells occupied by a place: a cell, a cell sequence, or an entity id resolved in ``case``."""
    if isinstance(place, Cell):
        return (place,)
    if isinstance(place, str):
        if case is None:
            raise UnlocatedEntity(place)
        return case.entity_cells(place)
    cells = tuple(Cell(*c) for c in place)
    if not cells:
        raise SpatialError("empty place")
    return cells


@dataclass(frozen=True)
class PathQuery:
    start: Cell
    goal: Cell
    trafficability: frozenset[str] = DEFAULT_PASSABLE
    # (mode, place) with mode "mustSee" or "mustNotBeSeenBy"
    visibility: tuple = ()


def _visibility_ok(grid, cell, rules) -> bool:
    for mode, observers in rules:
        if mode == "mustSee":
            if not any(line_of_sight(grid, cell, o) for o in observers):
                return False
        elif mode == "mustNotBeSeenBy":
            if all(line_of_sight(grid, cell, o) for o in observers):
                return False
        else:
            raise SpatialError(f"unknown visibility mode {mode!r}")
    return True


def plan_path(grid: TerrainGrid, query: PathQuery, case=None) -> list[Cell] | None:
    """Shortest 4-connected path whose every cell is passable and visibility-compliant.

    Returns None when no such path exists. Neighbors expand in N, E, S, W order.
    """
    start, goal = grid.check(query.start), grid.check(query.goal)
    rules = [(mode, place_cells(place, case)) for mode, place in query.visibility]

    def ok(cell) -> bool:
        return grid.terrain(cell) in query.trafficability and _visibility_ok(grid, cell, rules)

    if not ok(start) or not ok(goal):
        return None
    parent = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            break
        for dr, dc in NEIGHBOR_STEPS:
            nxt = Cell(cur[0] + dr, cur[1] + dc)
            if nxt in parent or not grid.in_bounds(nxt) or not ok(nxt):
                continue
            parent[nxt] = cur
            queue.append(nxt)
    if goal not in parent:
        return None
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    return path


@dataclass(frozen=True)
class SpatialConstraint:
    """A relation between the unknown cell and other places.

    ``args`` are entity ids, cells, cell sequences, or (for ``onTerrainType``) a terrain name.
    """

    relation: str
    args: tuple = field(default=())

    def __post_init__(self) -> None:
        if self.relation not in SPATIAL_RELATIONS:
            raise SpatialError(f"unknown spatial relation {self.relation!r}")
        want = 2 if self.relation == "between" else 1
        if len(self.args) != want:
            raise SpatialError(f"{self.relation} takes {want} argument(s)")


def _terrain_name(arg) -> str:
    return arg.name if isinstance(arg, Const) else str(arg)


def satisfies(grid: TerrainGrid, probe, cell, constraint: SpatialConstraint,
              d_near: int = 3, d_far: int = 8) -> bool:
    """Direct, uncached check of one constraint at one cell."""
    rel, args = constraint.relation, constraint.args
    if rel == "onTerrainType":
        return grid.terrain(cell) == _terrain_name(args[0])
    if rel == "between":
        xs, ys = place_cells(args[0], probe), place_cells(args[1], probe)
        return any(chebyshev(cell, p) <= 1 for x in xs for y in ys for p in line_cells(x, y))
    xs = place_cells(args[0], probe)
    if rel == "near":
        return any(chebyshev(cell, x) <= d_near for x in xs)
    if rel == "farFrom":
        return any(chebyshev(cell, x) > d_far for x in xs)
    if rel == "visibleFrom":
        return any(line_of_sight(grid, cell, x) for x in xs)
    return any(not line_of_sight(grid, cell, x) for x in xs)  # notVisibleFrom


def _region(grid, probe, constraint, d_near, d_far) -> set[Cell]:
    rel, args = constraint.relation, constraint.args
    cells = list(grid.cells())
    if rel == "onTerrainType":
        name = _terrain_name(args[0])
        return {c for c in cells if grid.terrain(c) == name}
    if rel == "between":
        band: set[Cell] = set()
        for x in place_cells(args[0], probe):
            for y in place_cells(args[1], probe):
                for p in line_cells(x, y):
                    band.update(Cell(p[0] + dr, p[1] + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1))
        return {c for c in band if grid.in_bounds(c)}
    xs = [grid.check(x) for x in place_cells(args[0], probe)]
    if rel == "near":
        return {c for c in cells if any(chebyshev(c, x) <= d_near for x in xs)}
    if rel == "farFrom":
        return {c for c in cells if any(chebyshev(c, x) > d_far for x in xs)}
    seen: set[Cell] = set()
    for x in xs:
        view = viewshed(grid, x)
        seen |= view if rel == "visibleFrom" else set(cells) - view
    return seen


def find_region(grid: TerrainGrid, probe, constraints: Iterable[SpatialConstraint], *,
                soft: Iterable[SpatialConstraint] = (), anchor=None,
                d_near: int = 3, d_far: int = 8) -> Cell | None:
    """Pick a cell satisfying every hard constraint, or None.

    Among satisfiers the pick maximizes satisfied soft constraints, then minimizes
    squared distance to ``anchor`` (when given), then takes the lowest row-major index.
    """
    candidates = set(grid.cells())
    for con in constraints:
        candidates &= _region(grid, probe, con, d_near, d_far)
        if not candidates:
            return None
    soft = list(soft)
    soft_regions = [_region(grid, probe, con, d_near, d_far) for con in soft]

    def key(c):
        n_soft = sum(c in reg for reg in soft_regions)
        dist = (c[0] - anchor[0]) ** 2 + (c[1] - anchor[1]) ** 2 if anchor is not None else 0
        return (-n_soft, dist, c[0] * grid.width + c[1])

    return min(candidates, key=key)
