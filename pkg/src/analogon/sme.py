"""Structure-mapping engine.

Match hypotheses pair expressions with identical functors whose arguments can be
aligned. A global mapping is a descendant-closed, 1-to-1 set of hypotheses. Its
score gives every expression correspondence a base weight and every mapped
parent-to-mapped-argument edge a trickle-down bonus, which makes the score of a
union the sum of per-hypothesis weights.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace

from .kb.case import Case
from .kb.taxonomy import Taxonomy, default_taxonomy
from .kb.terms import Expression, format_term

log = logging.getLogger(__name__)

EXACT_KERNEL_LIMIT = 12
EXACT_NODE_BUDGET = 200_000
GREEDY_RESTARTS = 4
IMPROVE_TRIALS = 64
IMPROVE_WORK = 400_000  # trials x units; keeps local search affordable on large cases
EPS = 1e-9


class UnsatisfiableConstraints(ValueError):
    pass


@dataclass(frozen=True)
class ScoreParams:
    expression_weight: float = 1.0
    trickle: float = 0.8


@dataclass(frozen=True)
class MatchConstraints:
    required: frozenset = frozenset()
    excluded: frozenset = frozenset()
    partitions_enabled: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "required", frozenset(self.required))
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        bases = [b for b, _ in self.required]
        targets = [t for _, t in self.required]
        if len(set(bases)) != len(bases) or len(set(targets)) != len(targets):
            raise ValueError("required pairs map an entity twice")
        if self.required & self.excluded:
            raise ValueError("a pair is both required and excluded")

    @property
    def is_symmetric(self) -> bool:
        return not self.required and not self.excluded

    def with_required(self, base_entity: str, target_entity: str) -> "MatchConstraints":
        return replace(self, required=self.required | {(base_entity, target_entity)})


UNCONSTRAINED = MatchConstraints(partitions_enabled=False)


@dataclass(frozen=True)
class Skolem:
    """Stand-in for a base entity with no target correspondent."""

    base_entity: str
    partition: str
    collections: tuple[str, ...]

    def __str__(self) -> str:
        return f"?{self.base_entity}"


@dataclass(frozen=True)
class CandidateInference:
    expr: Expression
    skolems: tuple[Skolem, ...]
    root_support: tuple[str, ...]
    fact_index: int
    # base entity whose skolem was rewritten by an alternate mapping, if any
    remap: str | None = None

    @property
    def support_id(self) -> str:
        return f"f{self.fact_index}"

    def skolem_ids(self) -> tuple[str, ...]:
        return tuple(s.base_entity for s in self.skolems)


@dataclass(frozen=True)
class Mapping:
    entity_corrs: dict
    expr_corrs: dict
    score: float
    inferences: tuple[CandidateInference, ...] = ()

    def key(self) -> tuple:
        return (tuple(sorted(self.entity_corrs.items())),
                tuple(sorted((str(b), str(t)) for b, t in self.expr_corrs.items())))

    def skolems(self) -> dict[str, Skolem]:
        out: dict[str, Skolem] = {}
        for inf in self.inferences:
            for s in inf.skolems:
                out.setdefault(s.base_entity, s)
        return out


def _signature(expr: Expression) -> tuple:
    parts = []
    for a in expr.args:
        if isinstance(a, str):
            parts.append("E")
        elif isinstance(a, Expression):
            parts.append("X")
        else:
            parts.append(("V", type(a).__name__ if not isinstance(a, (int, float)) else "n", a))
    return (expr.functor, tuple(parts))


class _EntityFilter:
    def __init__(self, base: Case, target: Case, constraints: MatchConstraints) -> None:
        self.base, self.target, self.c = base, target, constraints
        self.req_b = dict(constraints.required)
        self.req_t = {t: b for b, t in constraints.required}
        self.memo: dict[tuple[str, str], bool] = {}

    def __call__(self, b: str, t: str) -> bool:
        key = (b, t)
        hit = self.memo.get(key)
        if hit is None:
            hit = self.memo[key] = self._check(b, t)
        return hit

    def _check(self, b: str, t: str) -> bool:
        if (b, t) in self.c.excluded:
            return False
        if self.c.partitions_enabled and \
                self.base.entity(b).partition != self.target.entity(t).partition:
            return False
        rb = self.req_b.get(b)
        if rb is not None and rb != t:
            return False
        rt = self.req_t.get(t)
        return rt is None or rt == b


class Hypotheses:
    """Match hypotheses between two cases with their closures precomputed.

    Hypotheses are indexed by position; children always precede parents.
    """

    def __init__(self, base: Case, target: Case, constraints: MatchConstraints,
                 pairs: list, children: list, ents: list) -> None:
        self.base, self.target, self.constraints = base, target, constraints
        self.pairs = pairs
        self.children = children
        self.ents = ents
        n = len(pairs)
        self.closure: list[frozenset] = [frozenset()] * n
        self.closure_ents: list[frozenset] = [frozenset()] * n
        self.consistent: list[bool] = [True] * n
        for i in range(n):
            kids = children[i]
            if not kids:
                self.closure[i] = frozenset((i,))
                ce = frozenset(ents[i])
                self.closure_ents[i] = ce
                self.consistent[i] = _one_to_one(ce)
                continue
            cl = {i}
            ce = set(ents[i])
            ok = True
            for k in kids:
                cl |= self.closure[k]
                ce |= self.closure_ents[k]
                ok = ok and self.consistent[k]
            self.closure[i] = frozenset(cl)
            self.closure_ents[i] = frozenset(ce)
            self.consistent[i] = ok and _one_to_one(ce) and _one_to_one(pairs[j] for j in cl)

    def __len__(self) -> int:
        return len(self.pairs)

    def entity_pairs(self) -> set[tuple[str, str]]:
        return {p for e in self.ents for p in e}

    def restrict(self, constraints: MatchConstraints) -> "Hypotheses":
        """Drop hypotheses whose closure uses an entity pair the new constraints forbid."""
        allowed = _EntityFilter(self.base, self.target, constraints)
        keep = [i for i in range(len(self.pairs)) if all(allowed(b, t) for b, t in self.closure_ents[i])]
        renum = {old: new for new, old in enumerate(keep)}
        return Hypotheses(
            self.base, self.target, constraints,
            [self.pairs[i] for i in keep],
            [tuple(renum[k] for k in self.children[i]) for i in keep],
            [self.ents[i] for i in keep],
        )


def _one_to_one(pairs) -> bool:
    fwd: dict = {}
    bwd: dict = {}
    for b, t in pairs:
        if fwd.setdefault(b, t) != t or bwd.setdefault(t, b) != b:
            return False
    return True


def match_hypotheses(base: Case, target: Case,
                     constraints: MatchConstraints = MatchConstraints()) -> Hypotheses:
    """All expression pairs with identical functors and alignable arguments."""
    allowed = _EntityFilter(base, target, constraints)
    index: dict[tuple, list[Expression]] = defaultdict(list)
    for t in target.expressions:
        index[_signature(t)].append(t)
    pos: dict[tuple, int] = {}
    pairs: list = []
    children: list = []
    ents: list = []
    for b in base.expressions:
        cands = index.get(_signature(b))
        if not cands:
            continue
        for t in cands:
            e: list = []
            k: list = []
            for ba, ta in zip(b.args, t.args):
                if isinstance(ba, str):
                    if not allowed(ba, ta):
                        break
                    e.append((ba, ta))
                elif isinstance(ba, Expression):
                    j = pos.get((ba, ta))
                    if j is None:
                        break
                    k.append(j)
            else:
                pos[(b, t)] = len(pairs)
                pairs.append((b, t))
                children.append(tuple(dict.fromkeys(k)))
                ents.append(tuple(e))
    return Hypotheses(base, target, constraints, pairs, children, ents)


class _GMap:
    __slots__ = ("hyps", "members", "b2t", "t2b", "eb2t", "et2b", "score", "weights")

    def __init__(self, hyps: Hypotheses, weights: list[float], required=()) -> None:
        self.hyps = hyps
        self.weights = weights
        self.members: set[int] = set()
        self.b2t: dict = {}
        self.t2b: dict = {}
        self.eb2t: dict = {}
        self.et2b: dict = {}
        self.score = 0.0
        for b, t in sorted(required):
            self.eb2t[b] = t
            self.et2b[t] = b

    def copy(self) -> "_GMap":
        g = _GMap.__new__(_GMap)
        g.hyps, g.weights = self.hyps, self.weights
        g.members = set(self.members)
        g.b2t, g.t2b = dict(self.b2t), dict(self.t2b)
        g.eb2t, g.et2b = dict(self.eb2t), dict(self.et2b)
        g.score = self.score
        return g

    def fits(self, unit: int) -> bool:
        h = self.hyps
        for j in h.closure[unit]:
            if j in self.members:
                continue
            b, t = h.pairs[j]
            if self.b2t.get(b, t) != t or self.t2b.get(t, b) != b:
                return False
        for b, t in h.closure_ents[unit]:
            if self.eb2t.get(b, t) != t or self.et2b.get(t, b) != b:
                return False
        return True

    def covers(self, unit: int) -> bool:
        return unit in self.members

    def add(self, unit: int) -> None:
        h = self.hyps
        for j in h.closure[unit]:
            if j not in self.members:
                self.members.add(j)
                b, t = h.pairs[j]
                self.b2t[b] = t
                self.t2b[t] = b
                self.score += self.weights[j]
        for b, t in h.closure_ents[unit]:
            self.eb2t[b] = t
            self.et2b[t] = b

    def to_mapping(self) -> Mapping:
        h = self.hyps
        members = sorted(self.members)
        score = sum(self.weights[j] for j in members)
        expr_corrs = {h.pairs[j][0]: h.pairs[j][1] for j in members}
        return Mapping(dict(sorted(self.eb2t.items())), expr_corrs, score)


def _weights(hyps: Hypotheses, params: ScoreParams) -> list[float]:
    return [params.expression_weight + params.trickle * len(k) for k in hyps.children]


def _ranked_units(hyps: Hypotheses, weights: list[float], units: list[int]) -> list[int]:
    n_base: dict = defaultdict(int)
    n_target: dict = defaultdict(int)
    for b, t in hyps.pairs:
        n_base[b] += 1
        n_target[t] += 1
    # how many hypotheses reuse each entity pair: kernels whose bindings are widely
    # shared tend to be compatible with more of the remaining structure
    pair_use: dict = defaultdict(int)
    for i in units:
        for p in set(hyps.ents[i]):
            pair_use[p] += 1

    def key(i):
        b, t = hyps.pairs[i]
        score = sum(weights[j] for j in hyps.closure[i])
        support = sum(pair_use[p] for p in hyps.closure_ents[i])
        return (-round(score, 9), -support, n_base[b] + n_target[t],
                tuple(sorted(hyps.closure_ents[i])), str(b), str(t))

    return sorted(units, key=key)


def kernels(hyps: Hypotheses) -> list[int]:
    """Consistent hypotheses that are not the argument of another consistent hypothesis."""
    has_unit_parent = [False] * len(hyps)
    for i, kids in enumerate(hyps.children):
        if hyps.consistent[i]:
            for k in kids:
                has_unit_parent[k] = True
    return [i for i in range(len(hyps)) if hyps.consistent[i] and not has_unit_parent[i]]


def _greedy(hyps, weights, ordered_kernels, ordered_units, required, seed=None) -> _GMap:
    g = _GMap(hyps, weights, required)
    if seed is not None:
        g.add(seed)
    for i in ordered_kernels:
        if not g.covers(i) and g.fits(i):
            g.add(i)
    # consistent parts of kernels that were rejected whole
    for i in ordered_units:
        if not g.covers(i) and g.fits(i):
            g.add(i)
    return g


def _improve(hyps, weights, ordered_kernels, ordered_units, required, g: _GMap,
             budget: int = IMPROVE_TRIALS) -> _GMap:
    """Re-seed with each kernel the current mapping leaves out; keep strict improvements."""
    trials = 0
    improved = True
    while improved and trials < budget:
        improved = False
        for seed in ordered_kernels:
            if trials >= budget:
                break
            if g.covers(seed) or g.fits(seed):
                continue
            trials += 1
            alt = _greedy(hyps, weights, ordered_kernels, ordered_units, required, seed)
            if alt.score > g.score + EPS:
                g = alt
                improved = True
                break
    return g


def _exact(hyps, weights, ordered_units, required, budget: int | None) -> _GMap | None:
    closures = hyps.closure
    best: list = [None, -1.0, None]  # gmap, score, key
    nodes = [0]

    def leaf(g: _GMap) -> None:
        s = sum(weights[j] for j in sorted(g.members))
        if s > best[1] + EPS:
            best[:] = [g, s, None]
        elif abs(s - best[1]) <= EPS:
            if best[2] is None:
                best[2] = best[0].to_mapping().key()
            k = g.to_mapping().key()
            if k < best[2]:
                best[:] = [g, s, k]

    def rec(g: _GMap, cands: list[int]) -> bool:
        nodes[0] += 1
        if budget is not None and nodes[0] > budget:
            return False
        live = [u for u in cands if not g.covers(u) and g.fits(u)]
        if not live:
            leaf(g)
            return True
        reach: set[int] = set()
        for u in live:
            reach |= closures[u]
        bound = g.score + sum(weights[j] for j in reach - g.members)
        if bound < best[1] - EPS:
            return True
        head, rest = live[0], live[1:]
        inc = g.copy()
        inc.add(head)
        if not rec(inc, rest):
            return False
        return rec(g, rest)

    if not rec(_GMap(hyps, weights, required), ordered_units):
        return None
    return best[0]


def merge_gmaps(hyps: Hypotheses, constraints: MatchConstraints | None = None, *,
                params: ScoreParams = ScoreParams(), mode: str = "auto",
                max_mappings: int = 3) -> list[Mapping]:
    """Combine hypotheses into ranked global mappings.

    ``mode`` is ``"exact"`` (exhaustive search over consistent hypothesis closures),
    ``"greedy"``, or ``"auto"`` (exact when there are at most 12 kernels).
    Returns ``[]`` when the required pairs cannot be honored.
    """
    constraints = constraints or hyps.constraints
    if mode not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown merge mode {mode!r}")
    base, target = hyps.base, hyps.target
    for b, t in constraints.required:
        if b not in base.entity_map or t not in target.entity_map:
            return []
        if (b, t) in constraints.excluded:
            return []
        if constraints.partitions_enabled and base.entity(b).partition != target.entity(t).partition:
            return []
    required = sorted(constraints.required)
    weights = _weights(hyps, params)
    units = [i for i in range(len(hyps)) if hyps.consistent[i]]
    ordered_units = _ranked_units(hyps, weights, units)
    ks = kernels(hyps)
    kernel_set = set(ks)
    ordered_kernels = [i for i in ordered_units if i in kernel_set]

    top = None
    if mode == "exact" or (mode == "auto" and len(ks) <= EXACT_KERNEL_LIMIT):
        top = _exact(hyps, weights, ordered_units, required,
                     None if mode == "exact" else EXACT_NODE_BUDGET)
        if top is None:
            log.warning("exact merge exceeded its node budget; falling back to greedy")
    trials = min(IMPROVE_TRIALS, max(1, IMPROVE_WORK // max(1, len(ordered_units))))
    first = _improve(hyps, weights, ordered_kernels, ordered_units, required,
                     _greedy(hyps, weights, ordered_kernels, ordered_units, required), trials)
    found = [top or first]
    if top is not None:
        found.append(first)
    # seeded restarts from kernels the first pass had to reject
    budget = max(max_mappings, GREEDY_RESTARTS)
    for seed in ordered_kernels:
        if len(found) > budget:
            break
        if not any(g.covers(seed) for g in found) and not first.fits(seed):
            found.append(_greedy(hyps, weights, ordered_kernels, ordered_units, required, seed))

    out: dict[tuple, Mapping] = {}
    for g in found:
        m = g.to_mapping()
        out.setdefault(m.key(), m)
    ranked = sorted(out.values(), key=lambda m: (-round(m.score, 9), m.key()))
    if top is not None:
        # the exhaustive optimum leads even if a greedy variant ties it with a smaller key
        best = top.to_mapping()
        ranked = [best] + [m for m in ranked if m.key() != best.key()]
    return ranked[:max_mappings]


def score_gmap(mapping: Mapping, params: ScoreParams = ScoreParams()) -> float:
    """Recompute a mapping's score from its expression correspondences."""
    total = 0.0
    corrs = mapping.expr_corrs
    for b in sorted(corrs, key=str):
        total += params.expression_weight
        kids = {a for a in b.args if isinstance(a, Expression) and a in corrs}
        total += params.trickle * len(kids)
    return total


def self_score(case: Case, params: ScoreParams = ScoreParams()) -> float:
    """Score of the identity mapping of ``case`` onto itself."""
    total = 0.0
    for e in case.expressions:
        kids = {a for a in e.args if isinstance(a, Expression)}
        total += params.expression_weight + params.trickle * len(kids)
    return total


def candidate_inferences(base: Case, target: Case, mapping: Mapping) -> tuple[CandidateInference, ...]:
    """Project unmapped base facts connected to the mapped structure into the target."""
    ecorr = mapping.entity_corrs
    xcorr = mapping.expr_corrs
    skolems: dict[str, Skolem] = {}

    def skolem(eid: str) -> Skolem:
        s = skolems.get(eid)
        if s is None:
            ent = base.entity(eid)
            s = skolems[eid] = Skolem(eid, ent.partition, ent.collections)
        return s

    pending = []
    for i, fact in enumerate(base.facts):
        if fact in xcorr:
            continue
        ents = list(dict.fromkeys(fact.entities()))
        direct = [e for e in ents if e in ecorr]
        direct += [str(s) for s in fact.subexpressions() if s is not fact and s in xcorr]
        pending.append((i, fact, ents, tuple(dict.fromkeys(direct))))

    anchored: dict[int, tuple[str, ...]] = {}
    reached: dict[str, tuple[str, ...]] = {}
    changed = True
    while changed:
        changed = False
        for i, fact, ents, direct in pending:
            if i in anchored:
                continue
            support = direct
            if not support:
                via = next((e for e in ents if e in reached), None)
                if via is None:
                    continue
                support = reached[via]
            anchored[i] = support
            for e in ents:
                if e not in ecorr and e not in reached:
                    reached[e] = support
            changed = True

    out = []
    for i, fact, ents, _ in pending:
        if i not in anchored:
            continue
        image = fact.substitute(lambda a: (ecorr[a] if a in ecorr else skolem(a)) if isinstance(a, str) else a)
        sks = tuple(skolem(e) for e in ents if e not in ecorr)
        out.append(CandidateInference(image, sks, anchored[i], i))
    return tuple(out)


def sme_map(base: Case, target: Case, constraints: MatchConstraints = MatchConstraints(), *,
            params: ScoreParams = ScoreParams(), mode: str = "auto",
            hypotheses: Hypotheses | None = None) -> Mapping:
    """Best mapping from ``base`` onto ``target`` with its candidate inferences."""
    hyps = hypotheses if hypotheses is not None else match_hypotheses(base, target, constraints)
    ranked = merge_gmaps(hyps, constraints, params=params, mode=mode, max_mappings=1)
    if not ranked:
        raise UnsatisfiableConstraints(f"required pairs {sorted(constraints.required)} cannot be honored")
    top = ranked[0]
    return replace(top, inferences=candidate_inferences(base, target, top))


def similarity(base: Case, target: Case, constraints: MatchConstraints = MatchConstraints(), *,
               params: ScoreParams = ScoreParams(), mode: str = "auto") -> float:
    """Best-mapping score normalized by the geometric mean of the two self-scores."""
    denom = (self_score(base, params) * self_score(target, params)) ** 0.5
    if denom == 0:
        return 0.0
    if constraints.is_symmetric and (target.id, target.kind) < (base.id, base.kind):
        # greedy merging is direction-sensitive; fix one direction for unordered pairs
        base, target = target, base
    hyps = match_hypotheses(base, target, constraints)
    ranked = merge_gmaps(hyps, constraints, params=params, mode=mode, max_mappings=1)
    if not ranked:
        return 0.0
    return min(1.0, ranked[0].score / denom)


@dataclass(frozen=True)
class Remap:
    base_entity: str
    target_entity: str
    mapping: Mapping
    inferences: tuple[CandidateInference, ...] = field(default=())


def _adjacency(base: Case, target: Case, mapping: Mapping, entity: str) -> dict[str, int]:
    neighbors = set()
    for f in base.facts:
        ents = set(f.entities())
        if entity in ents:
            neighbors |= {mapping.entity_corrs[e] for e in ents if e in mapping.entity_corrs}
    counts: dict[str, int] = defaultdict(int)
    for f in target.facts:
        ents = set(f.entities())
        if ents & neighbors:
            for e in ents:
                counts[e] += 1
    return counts


def _rewrite(inf: CandidateInference, entity: str, target_entity: str) -> CandidateInference:
    if entity not in inf.skolem_ids():
        return inf
    expr = inf.expr.substitute(
        lambda a: target_entity if isinstance(a, Skolem) and a.base_entity == entity else a)
    return replace(inf, expr=expr, skolems=tuple(s for s in inf.skolems if s.base_entity != entity),
                   remap=entity)


def incremental_remap(base: Case, target: Case, mapping: Mapping, entity: str, *,
                      constraints: MatchConstraints = MatchConstraints(),
                      params: ScoreParams = ScoreParams(), mode: str = "auto",
                      hypotheses: Hypotheses | None = None,
                      taxonomy: Taxonomy | None = None) -> Remap | None:
    """Force an unmapped, non-plunkable base entity onto some target entity.

    Candidates share the entity's partition and are tried in order of adjacency to
    the prior mapping's neighborhood, then id. The best-scoring alternate mapping in
    which the forced pair has structural support wins; None if there is none.
    """
    taxonomy = taxonomy or default_taxonomy()
    if entity in mapping.entity_corrs:
        raise ValueError(f"{entity!r} is already mapped")
    if entity not in mapping.skolems():
        raise ValueError(f"{entity!r} has no skolem in this mapping")
    partition = base.entity(entity).partition
    if taxonomy.plunkable(partition):
        raise ValueError(f"{entity!r} is plunkable ({partition}); remapping applies to non-plunkable entities")

    hyps = hypotheses if hypotheses is not None else match_hypotheses(base, target, constraints)
    adj = _adjacency(base, target, mapping, entity)
    cands = [e.id for e in target.entities
             if e.partition == partition and (entity, e.id) not in constraints.excluded
             and e.id not in {t for _, t in constraints.required}]
    cands.sort(key=lambda t: (-adj.get(t, 0), t))
    best = None
    for t in cands:
        forced = constraints.with_required(entity, t)
        ranked = merge_gmaps(hyps.restrict(forced), forced, params=params, mode=mode, max_mappings=1)
        if not ranked:
            continue
        alt = ranked[0]
        if not any(entity in b.args for b in alt.expr_corrs):
            continue
        if best is None or alt.score > best[1].score + EPS:
            best = (t, alt)
    if best is None:
        return None
    t, alt = best
    alt = replace(alt, inferences=candidate_inferences(base, target, alt))
    rewritten = tuple(_rewrite(inf, entity, t) for inf in mapping.inferences)
    return Remap(entity, t, alt, rewritten)


def mapping_violations(mapping: Mapping, base: Case, target: Case,
                       constraints: MatchConstraints = MatchConstraints()) -> list[str]:
    """Every broken mapping invariant, as human-readable strings (empty when sound)."""
    errs: list[str] = []
    ec, xc = mapping.entity_corrs, mapping.expr_corrs
    if len(set(ec.values())) != len(ec):
        errs.append("entity correspondences are not 1-to-1")
    if len(set(xc.values())) != len(xc):
        errs.append("expression correspondences are not 1-to-1")
    for b, t in xc.items():
        if b.functor != t.functor or len(b.args) != len(t.args):
            errs.append(f"{b} and {t} have different functors or arity")
            continue
        for ba, ta in zip(b.args, t.args):
            if isinstance(ba, str):
                ok = ec.get(ba) == ta
            elif isinstance(ba, Expression):
                ok = xc.get(ba) == ta
            else:
                ok = ba == ta
            if not ok:
                errs.append(f"argument {format_term(ba)} of {b} is not supported")
    for b, t in ec.items():
        if b not in base.entity_map or t not in target.entity_map:
            errs.append(f"({b} {t}) names an unknown entity")
        elif constraints.partitions_enabled and base.entity(b).partition != target.entity(t).partition:
            errs.append(f"({b} {t}) crosses partitions")
        if (b, t) in constraints.excluded:
            errs.append(f"excluded pair ({b} {t}) present")
    for b, t in constraints.required:
        if ec.get(b) != t:
            errs.append(f"required pair ({b} {t}) missing")
    for inf in mapping.inferences:
        errs.extend(_inference_violations(inf, ec, target, base, constraints))
    return errs


def _inference_violations(inf, ecorr, target, base, constraints) -> list[str]:
    errs = []
    if not inf.root_support:
        errs.append(f"inference {inf.expr} has no root support")
    for s in inf.skolems:
        if s.base_entity in ecorr:
            errs.append(f"skolem {s} names a mapped entity")
    for e in inf.expr.entities():
        if e not in target.entity_map:
            errs.append(f"inference term {e} missing from target")
        elif constraints.partitions_enabled and inf.remap:
            # rewritten inference: the forced target must share the skolem's partition
            if target.entity(e).partition != base.entity(inf.remap).partition and e not in ecorr.values():
                errs.append(f"rewritten inference {inf.expr} crosses partitions")
    return errs


def mapping_to_text(mapping: Mapping) -> str:
    lines = [f"(mapping :score {mapping.score:.6f}"]
    for b, t in sorted(mapping.entity_corrs.items()):
        lines.append(f"  (corr {b} {t})")
    for b, t in sorted(((str(b), str(t)) for b, t in mapping.expr_corrs.items())):
        lines.append(f"  (corr {b} {t})")
    for inf in mapping.inferences:
        sk = " ".join(inf.skolem_ids())
        lines.append(f"  (infer {inf.expr} :skolems ({sk}))")
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


__all__ = [
    "CandidateInference", "Hypotheses", "Mapping", "MatchConstraints", "Remap", "ScoreParams",
    "Skolem", "UNCONSTRAINED", "UnsatisfiableConstraints", "candidate_inferences",
    "incremental_remap", "kernels", "mapping_to_text", "match_hypotheses", "merge_gmaps",
    "mapping_violations", "score_gmap", "self_score", "similarity", "sme_map",
]
