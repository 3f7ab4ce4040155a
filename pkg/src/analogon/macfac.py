"""Two-stage retrieval: a content-vector filter followed by structural comparison."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .kb import Case, KBError, derive_locations, parse_case
from .sme import UNCONSTRAINED, MatchConstraints, ScoreParams, similarity

MAC_THRESHOLD = 0.9
MAC_CAP = 3
INDEX_FILE = "index.txt"

ContentVector = Counter


def content_vector(case: Case) -> Counter:
    """Functor counts over every expression node, nested ones included."""
    return Counter(e.functor for f in case.facts for e in f.subexpressions())


def dot(a: Counter, b: Counter) -> int:
    if len(b) < len(a):
        a, b = b, a
    return sum(n * b.get(k, 0) for k, n in a.items())


@dataclass(frozen=True)
class LibraryEntry:
    id: str
    problem: Case
    solution: Case
    probe: bool = False
    vector: Counter = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.vector is None:
            object.__setattr__(self, "vector", content_vector(self.problem))


@dataclass(frozen=True)
class CaseLibrary:
    entries: tuple[LibraryEntry, ...]

    def __post_init__(self) -> None:
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise KBError("duplicate case id in library")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[LibraryEntry]:
        return iter(self.entries)

    def __contains__(self, case_id: str) -> bool:
        return any(e.id == case_id for e in self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def get(self, case_id: str) -> LibraryEntry:
        for e in self.entries:
            if e.id == case_id:
                return e
        raise KeyError(case_id)

    def without(self, ids: Iterable[str]) -> "CaseLibrary":
        drop = set(ids)
        return CaseLibrary(tuple(e for e in self.entries if e.id not in drop))

    def probes(self) -> list[LibraryEntry]:
        return [e for e in self.entries if e.probe]


def read_case_file(path: str | Path) -> Case:
    return derive_locations(parse_case(Path(path).read_text(encoding="utf-8")))


def load_library(directory: str | Path, index: str = INDEX_FILE) -> CaseLibrary:
    """Load a library directory.

    The index has one line per case: ``<id> <problem-file> <solution-file> <probe|->``.
    Blank lines and ``#`` comments are ignored.
    """
    root = Path(directory)
    index_path = root / index
    if not index_path.is_file():
        raise FileNotFoundError(f"no {index} in {root}")
    entries = []
    for n, line in enumerate(index_path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise KBError(f"{index_path}:{n}: expected '<id> <problem> <solution> [probe|-]'")
        cid, prob, sol = parts[:3]
        flag = parts[3] if len(parts) == 4 else "-"
        entries.append(LibraryEntry(cid, read_case_file(root / prob), read_case_file(root / sol),
                                    probe=flag == "probe"))
    if not entries:
        raise KBError(f"{index_path} lists no cases")
    return CaseLibrary(tuple(entries))


def mac_stage(probe: Case, library: CaseLibrary, *, threshold: float = MAC_THRESHOLD,
              cap: int = MAC_CAP) -> list[LibraryEntry]:
    """Entries whose dot product reaches ``threshold`` × the best, at most ``cap``."""
    if not len(library):
        raise ValueError("empty library")
    pv = content_vector(probe)
    scored = sorted(((dot(pv, e.vector), e.id, e) for e in library), key=lambda x: (-x[0], x[1]))
    best = scored[0][0]
    return [e for d, _, e in scored if d >= threshold * best][:cap]


SimilarityFn = Callable[[Case, LibraryEntry], float]


def structural_similarity(constraints: MatchConstraints = UNCONSTRAINED,
                          params: ScoreParams = ScoreParams()) -> SimilarityFn:
    """Similarity of a probe to an entry's problem case, memoized per (probe, entry) id pair."""
    memo: dict[tuple[str, str], float] = {}

    def fn(probe: Case, entry: LibraryEntry) -> float:
        key = (probe.id, entry.id)
        if key not in memo:
            memo[key] = similarity(entry.problem, probe, constraints, params=params)
        return memo[key]

    return fn


@dataclass(frozen=True)
class RetrievalHit:
    id: str
    similarity: float
    entry: LibraryEntry = field(repr=False, compare=False)


def fac_stage(probe: Case, candidates: list[LibraryEntry],
              sim: SimilarityFn | None = None) -> RetrievalHit:
    """The candidate with the highest structural similarity (ties by id)."""
    if not candidates:
        raise ValueError("no candidates")
    sim = sim or structural_similarity()
    scored = [(sim(probe, e), e) for e in candidates]
    s, e = min(scored, key=lambda x: (-x[0], x[1].id))
    return RetrievalHit(e.id, s, e)


def retrieve_ranked(probe: Case, library: CaseLibrary, k: int, *,
                    sim: SimilarityFn | None = None, threshold: float = MAC_THRESHOLD,
                    cap: int = MAC_CAP) -> list[RetrievalHit]:
    """Retrieve, remove the winner, and repeat ``k`` times. The probe's own id is left out."""
    pool = library.without([probe.id])
    if k < 0 or k > len(pool):
        raise ValueError(f"cannot retrieve {k} precedents from a library of {len(pool)}")
    sim = sim or structural_similarity()
    hits: list[RetrievalHit] = []
    for _ in range(k):
        hit = fac_stage(probe, mac_stage(probe, pool, threshold=threshold, cap=cap), sim)
        hits.append(hit)
        pool = pool.without([hit.id])
    return hits
