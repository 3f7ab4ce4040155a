"""Task rubric, solution accuracy, retrieval error and the experiment drivers."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

from .config import Config
from .kb import Case, Cell, Const, KBError, Taxonomy, default_taxonomy
from .macfac import CaseLibrary, LibraryEntry, retrieve_ranked, structural_similarity
from .sme import UNCONSTRAINED, MatchConstraints
from .solver import TaskSuggestion, generate_suggestions
from .spatial import TerrainGrid

log = logging.getLogger(__name__)

RANK_LABELS = ("1", "2", "3", "4", "5", "EM")
LOCATION_BANDS = ((0.05, 5), (0.10, 4), (0.20, 3), (0.35, 2), (0.50, 1))


class MalformedTask(KBError):
    pass


@dataclass(frozen=True)
class ExpertTask:
    id: str
    task_type: str
    unit: str
    target: str | None = None
    location: Cell | None = None
    path: tuple[Cell, Cell] | None = None  # endpoints only


@dataclass(frozen=True)
class TaskScore:
    type: int
    target: int
    unit: int
    location: int
    normalizer: int = 20

    @property
    def total(self) -> int:
        return self.type + self.target + self.unit + self.location

    @property
    def normalized(self) -> float:
        return self.total / self.normalizer


def _slot(case: Case, subject: str, functor: str):
    for f in case.facts:
        if f.functor == functor and len(f.args) == 2 and f.args[0] == subject:
            return f.args[1]
    return None


def _place_cell(case: Case, term) -> Cell:
    if isinstance(term, Cell):
        return term
    if isinstance(term, str):
        return case.anchor_cell(term)
    raise MalformedTask(f"{term} is not a place")


def expert_tasks(solution: Case) -> list[ExpertTask]:
    """Blue task entities of a solution case with their slots resolved to concrete values."""
    out = []
    for e in solution.entities:
        if e.partition != "BlueTask":
            continue
        ttype = _slot(solution, e.id, "taskType")
        ttype = ttype.name if isinstance(ttype, Const) else e.collections[0]
        unit = _slot(solution, e.id, "performedBy")
        if not isinstance(unit, str):
            raise MalformedTask(f"task {e.id} has no performedBy unit")
        target = _slot(solution, e.id, "taskTarget")
        loc = _slot(solution, e.id, "taskLocation")
        path_id = _slot(solution, e.id, "taskPath")
        try:
            cell = _place_cell(solution, loc) if loc is not None else None
            path = None
            if path_id is not None:
                start, end = _slot(solution, path_id, "pathStart"), _slot(solution, path_id, "pathEnd")
                if start is None or end is None:
                    raise MalformedTask(f"path {path_id} lacks an endpoint")
                path = (_place_cell(solution, start), _place_cell(solution, end))
        except KBError:
            raise
        except ValueError as exc:
            raise MalformedTask(f"task {e.id}: {exc}") from exc
        if target is None and cell is None and path is None:
            raise MalformedTask(f"task {e.id} has no target, location or path")
        out.append(ExpertTask(e.id, ttype, unit, target if isinstance(target, str) else None, cell, path))
    return out


def type_points(taxonomy: Taxonomy, proposed: str, expert: str) -> int:
    """5 exact, 4 specialization, 3 same category, 2 generalization, 1 same posture, else 0."""
    if proposed not in taxonomy or expert not in taxonomy:
        return 0
    if proposed == expert:
        return 5
    if taxonomy.is_specialization(proposed, expert):
        return 4
    cat = taxonomy.category(proposed)
    if cat is not None and cat == taxonomy.category(expert):
        return 3
    if taxonomy.is_specialization(expert, proposed):
        return 2
    posture = taxonomy.posture(proposed)
    if posture is not None and posture == taxonomy.posture(expert):
        return 1
    return 0


def entity_points(taxonomy: Taxonomy, proposed: str | None, expert: str | None,
                  collections: dict[str, tuple[str, ...]]) -> int:
    """Same entity 5, then the type rubric over the entities' most specific collections.

    Shared direct generalization plays the role of "same category"; same partition
    class plays the role of "same posture".
    """
    if proposed is None and expert is None:
        return 5
    if proposed is None or expert is None:
        return 0
    if proposed == expert:
        return 5
    pc, ec = collections.get(proposed), collections.get(expert)
    if not pc or not ec:
        return 0
    p, e = pc[0], ec[0]
    if taxonomy.is_specialization(p, e):
        return 4
    if set(taxonomy.parents[p]) & set(taxonomy.parents[e]):
        return 3
    if taxonomy.is_specialization(e, p):
        return 2
    if taxonomy.partition_of(p) == taxonomy.partition_of(e):
        return 1
    return 0


def distance_points(a: Cell, b: Cell, diagonal: float) -> int:
    d = math.hypot(a[0] - b[0], a[1] - b[1])
    frac = d / diagonal if diagonal > 0 else 0.0
    for limit, pts in LOCATION_BANDS:
        if frac <= limit + 1e-12:
            return pts
    return 0


def location_points(proposed: TaskSuggestion, expert: ExpertTask, grid: TerrainGrid | None) -> int:
    p_path = (proposed.path[0], proposed.path[-1]) if proposed.path else None
    if proposed.location is None and p_path is None and expert.location is None and expert.path is None:
        return 5
    diag = grid.diagonal() if grid is not None else 0.0
    if proposed.location is not None and expert.location is not None:
        return distance_points(proposed.location, expert.location, diag)
    if p_path is not None and expert.path is not None:
        ends = distance_points(p_path[0], expert.path[0], diag) + distance_points(p_path[1], expert.path[1], diag)
        return ends // 2
    return 0


def score_task(proposed: TaskSuggestion, expert: ExpertTask, taxonomy: Taxonomy | None = None,
               grid: TerrainGrid | None = None, *, collections: dict[str, tuple[str, ...]] | None = None,
               normalizer: int = 20) -> TaskScore:
    taxonomy = taxonomy or default_taxonomy()
    collections = collections or {}
    return TaskScore(
        type_points(taxonomy, proposed.task_type, expert.task_type),
        entity_points(taxonomy, proposed.target, expert.target, collections),
        entity_points(taxonomy, proposed.unit, expert.unit, collections),
        location_points(proposed, expert, grid),
        normalizer,
    )


def collection_table(*cases: Case) -> dict[str, tuple[str, ...]]:
    out: dict[str, tuple[str, ...]] = {}
    for case in cases:
        for e in case.entities:
            out.setdefault(e.id, e.collections)
    return out


def score_solution(suggestions: list[TaskSuggestion], expert_solution: Case,
                   taxonomy: Taxonomy | None = None, grid: TerrainGrid | None = None, *,
                   probe: Case | None = None, normalizer: int = 20) -> float:
    """Mean over suggestions of the best normalized score against any expert task."""
    if not suggestions:
        return 0.0
    taxonomy = taxonomy or default_taxonomy()
    experts = expert_tasks(expert_solution)
    if not experts:
        raise MalformedTask(f"solution {expert_solution.id} has no tasks")
    grid = grid or expert_solution.terrain
    table = collection_table(*(c for c in (probe, expert_solution) if c is not None))
    total = 0.0
    for s in suggestions:
        total += max(score_task(s, e, taxonomy, grid, collections=table, normalizer=normalizer).normalized
                     for e in experts)
    return total / len(suggestions)


def is_tainted(suggestion: TaskSuggestion, probe: Case, taxonomy: Taxonomy) -> bool:
    """True when a suggestion crosses partitions: a non-Blue actor, or a type that is not a Blue task."""
    actor = probe.entity_map.get(suggestion.unit)
    if actor is None or actor.partition != "BlueUnit":
        return True
    return suggestion.task_type not in taxonomy or taxonomy.partition_of(suggestion.task_type) != "BlueTask"


def retrieval_error(rank: int, initial_library_size: int) -> float:
    if rank < 1 or initial_library_size < 1:
        raise ValueError("rank and library size must be >= 1")
    return (rank - 1) / initial_library_size


def sme_rank(similarities: dict[str, float], choice: str) -> int:
    """1 + number of cases strictly more similar than ``choice``."""
    s = similarities[choice]
    return 1 + sum(1 for v in similarities.values() if v > s + 1e-12)


@dataclass
class RetrievalResult:
    ranked: dict[str, list[str]]
    constrained: dict[str, dict[str, float]]
    unconstrained: dict[str, dict[str, float]]
    errors_unconstrained: dict[str, list[float]]
    errors_constrained: dict[str, list[float]]
    library_size: int

    @staticmethod
    def _mean(table: dict[str, list[float]]) -> float:
        vals = [v for vs in table.values() for v in vs]
        return sum(vals) / len(vals) if vals else 0.0

    @property
    def mean_error_unconstrained(self) -> float:
        return self._mean(self.errors_unconstrained)

    @property
    def mean_error_constrained(self) -> float:
        return self._mean(self.errors_constrained)

    def evil(self, probe_id: str) -> str:
        """Least similar precedent under constrained similarity (ties by id)."""
        row = self.constrained[probe_id]
        return min(row, key=lambda cid: (row[cid], cid))


def similarity_matrix(library: CaseLibrary, probes: list[LibraryEntry],
                      constraints: MatchConstraints) -> dict[str, dict[str, float]]:
    fn = structural_similarity(constraints)
    return {p.id: {e.id: fn(p.problem, e) for e in library if e.id != p.id} for p in probes}


def run_retrieval_experiment(library: CaseLibrary, config: Config = Config(), *,
                             probes: list[LibraryEntry] | None = None, k: int = 5) -> RetrievalResult:
    """Iterated MAC/FAC retrieval per probe, scored against full similarity matrices."""
    probes = probes if probes is not None else library.probes()
    constrained = similarity_matrix(library, probes, MatchConstraints(partitions_enabled=True))
    unconstrained = similarity_matrix(library, probes, UNCONSTRAINED)

    def fac(probe: Case, entry: LibraryEntry) -> float:
        return unconstrained[probe.id][entry.id]

    ranked: dict[str, list[str]] = {}
    err_u: dict[str, list[float]] = {}
    err_c: dict[str, list[float]] = {}
    for p in probes:
        hits = retrieve_ranked(p.problem, library, k, sim=fac, threshold=config.mac_threshold,
                               cap=config.mac_cap)
        ranked[p.id] = [h.id for h in hits]
        remaining = set(unconstrained[p.id])
        err_u[p.id], err_c[p.id] = [], []
        for h in hits:
            u = {c: unconstrained[p.id][c] for c in remaining}
            c = {c: constrained[p.id][c] for c in remaining}
            err_u[p.id].append(retrieval_error(sme_rank(u, h.id), len(library)))
            err_c[p.id].append(retrieval_error(sme_rank(c, h.id), len(library)))
            remaining.discard(h.id)
    return RetrievalResult(ranked, constrained, unconstrained, err_u, err_c, len(library))


@dataclass(frozen=True)
class ExperimentRow:
    problem: str
    rank: str
    precedent: str
    accuracy: float
    n_tasks: int
    rejected: int
    tainted: int = 0


@dataclass
class ExperimentReport:
    config: Config
    rows: list[ExperimentRow]
    retrieval: RetrievalResult
    runtime: float = field(default=0.0, compare=False)

    def accuracy(self, problem: str, rank: str) -> float:
        for r in self.rows:
            if r.problem == problem and r.rank == rank:
                return r.accuracy
        raise KeyError((problem, rank))

    def mean(self, rank: str) -> float:
        vals = [r.accuracy for r in self.rows if r.rank == rank]
        return sum(vals) / len(vals) if vals else 0.0

    @property
    def problems(self) -> list[str]:
        return list(dict.fromkeys(r.problem for r in self.rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["problem", "rank", "accuracy", "n_tasks", "config"])
        for r in self.rows:
            w.writerow([r.problem, r.rank, f"{r.accuracy:.4f}", r.n_tasks, self.config.label])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [self.config.header(), ""]
        lines.append("problem-solving accuracy by precedent rank")
        lines.append(f"{'problem':<12}" + "".join(f"{lab:>8}" for lab in RANK_LABELS))
        for p in self.problems:
            lines.append(f"{p:<12}" + "".join(f"{self.accuracy(p, lab):>8.4f}" for lab in RANK_LABELS))
        lines.append(f"{'mean':<12}" + "".join(f"{self.mean(lab):>8.4f}" for lab in RANK_LABELS))
        r1, em = self.mean("1"), self.mean("EM")
        gain = (r1 - em) / em if em > 0 else float("inf")
        lines.append(f"relative improvement rank 1 over EM: {gain:.4f}")
        lines.append("")
        lines.append("retrieval")
        for p in self.problems:
            lines.append(f"{p:<12} " + " ".join(self.retrieval.ranked[p]) + f"  EM={self.retrieval.evil(p)}")
        lines.append(f"mean retrieval error vs unconstrained SME: {self.retrieval.mean_error_unconstrained:.4f}")
        lines.append(f"mean retrieval error vs constrained SME: {self.retrieval.mean_error_constrained:.4f}")
        lines.append("")
        lines.append("unsolved (0 tasks): " + (" ".join(f"{r.problem}@{r.rank}" for r in self.rows
                                                        if r.n_tasks == 0) or "none"))
        return "\n".join(lines) + "\n"


def run_ps_experiment(library: CaseLibrary, config: Config = Config(), *,
                      retrieval: RetrievalResult | None = None,
                      taxonomy: Taxonomy | None = None) -> ExperimentReport:
    """Solve every probe with its rank 1..5 precedents and the least similar one."""
    taxonomy = taxonomy or default_taxonomy()
    started = time.perf_counter()
    retrieval = retrieval or run_retrieval_experiment(library, config)
    rows: list[ExperimentRow] = []
    for pid in retrieval.ranked:
        probe = library.get(pid)
        precedents = list(zip(RANK_LABELS[:5], retrieval.ranked[pid])) + [("EM", retrieval.evil(pid))]
        for label, cid in precedents:
            prec = library.get(cid)
            suggestions, trace = generate_suggestions(probe.problem, (prec.problem, prec.solution),
                                                      config, taxonomy)
            acc = score_solution(suggestions, probe.solution, taxonomy, probe=probe.problem,
                                 normalizer=config.normalizer)
            tainted = sum(is_tainted(x, probe.problem, taxonomy) for x in suggestions)
            rows.append(ExperimentRow(pid, label, cid, acc, len(suggestions), len(trace.rejections), tainted))
    report = ExperimentReport(config, rows, retrieval)
    report.runtime = time.perf_counter() - started
    log.info("experiment finished in %.2fs", report.runtime)
    return report
