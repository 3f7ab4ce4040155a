"""Collection taxonomy: specialization DAG, partition classes, plunkability, task metadata."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .reader import KBError, SList, keyword_args, read_all, symbol

PARTITION_CLASSES = (
    "TerrainFeature",
    "MilitaryUnit",
    "BlueTask",
    "RedTask",
    "BluePath",
    "RedPath",
    "BlueUnit",
    "RedUnit",
    "Location",
)


class UnknownCollection(KBError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown collection {name!r}")
        self.name = name


@dataclass(frozen=True)
class TaskMeta:
    category: str | None
    posture: str | None


class Taxonomy:
    """A specialization DAG over collection ids.

    ``parents`` maps each collection to its direct generalizations. The partition
    class of a collection is the most specific partition class it reaches.
    """

    def __init__(self, parents: dict[str, tuple[str, ...]], plunkable: dict[str, bool],
                 task_meta: dict[str, TaskMeta] | None = None) -> None:
        self.parents = {c: tuple(ps) for c, ps in parents.items()}
        for p in plunkable:
            self.parents.setdefault(p, ())
        for c, ps in list(self.parents.items()):
            for p in ps:
                if p not in self.parents:
                    raise UnknownCollection(p)
        self.plunkable_partitions = dict(plunkable)
        self.task_meta = dict(task_meta or {})
        self._ancestors: dict[str, frozenset[str]] = {}
        self._check_acyclic()
        self._partition = {c: self._derive_partition(c) for c in self.parents}

    def __contains__(self, collection: str) -> bool:
        return collection in self.parents

    @property
    def collections(self) -> list[str]:
        return sorted(self.parents)

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}
        for root in sorted(self.parents):
            if root in state:
                continue
            stack = [(root, iter(self.parents[root]))]
            state[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    raise KBError(f"taxonomy cycle through {nxt!r}")
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(self.parents[nxt])))

    def ancestors(self, collection: str) -> frozenset[str]:
        """Reflexive-transitive generalizations of ``collection``."""
        if collection not in self.parents:
            raise UnknownCollection(collection)
        cached = self._ancestors.get(collection)
        if cached is None:
            out = {collection}
            for p in self.parents[collection]:
                out |= self.ancestors(p)
            cached = self._ancestors[collection] = frozenset(out)
        return cached

    def is_specialization(self, c1: str, c2: str) -> bool:
        """True iff ``c1`` equals ``c2`` or lies below it."""
        if c2 not in self.parents:
            raise UnknownCollection(c2)
        return c2 in self.ancestors(c1)

    def _derive_partition(self, collection: str) -> str:
        reached = [p for p in self.ancestors(collection) if p in self.plunkable_partitions]
        minimal = [p for p in reached
                   if not any(q != p and self.is_specialization(q, p) for q in reached)]
        if len(minimal) != 1:
            raise KBError(f"collection {collection!r} reaches partition classes {sorted(minimal)}")
        return minimal[0]

    def partition_of(self, collection: str) -> str:
        try:
            return self._partition[collection]
        except KeyError:
            raise UnknownCollection(collection) from None

    def plunkable(self, partition: str) -> bool:
        return self.plunkable_partitions[partition]

    def category(self, collection: str) -> str | None:
        meta = self.task_meta.get(collection)
        return meta.category if meta else None

    def posture(self, collection: str) -> str | None:
        # nearest generalization carrying a posture wins
        frontier = [collection]
        seen = set()
        while frontier:
            for c in frontier:
                meta = self.task_meta.get(c)
                if meta and meta.posture:
                    return meta.posture
            seen.update(frontier)
            frontier = sorted({p for c in frontier for p in self.parents[c]} - seen)
        return None


def parse_taxonomy(text: str) -> Taxonomy:
    parents: dict[str, tuple[str, ...]] = {}
    plunkable: dict[str, bool] = {}
    meta: dict[str, TaskMeta] = {}
    for form in read_all(text):
        if not isinstance(form, SList):
            raise KBError(f"unexpected atom at line {form.line}")
        head = form.head()
        opts, rest = keyword_args(form.items, 1)
        name = symbol(rest[0], "collection name")
        if head == "partition":
            flag = symbol(opts["plunkable"]) if "plunkable" in opts else None
            if flag not in ("true", "false"):
                raise KBError(f"partition {name!r} at line {form.line} needs :plunkable true|false")
            plunkable[name] = flag == "true"
            parents.setdefault(name, ())
        elif head == "collection":
            parents[name] = tuple(symbol(n) for n in rest[1:])
            if "category" in opts or "posture" in opts:
                meta[name] = TaskMeta(
                    symbol(opts["category"]) if "category" in opts else None,
                    symbol(opts["posture"]) if "posture" in opts else None,
                )
        else:
            raise KBError(f"unknown taxonomy form {head!r} at line {form.line}")
    # partition classes may also be listed as collections with parents
    for p in plunkable:
        parents.setdefault(p, ())
    return Taxonomy(parents, plunkable, meta)


def load_taxonomy(path: str | Path | None = None) -> Taxonomy:
    if path is None:
        return default_taxonomy()
    return parse_taxonomy(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def default_taxonomy() -> Taxonomy:
    text = resources.files("analogon.kb").joinpath("data/taxonomy.sexp").read_text(encoding="utf-8")
    return parse_taxonomy(text)
