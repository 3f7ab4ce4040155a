from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from analogon.kb import Case, Expression, make_entity
from analogon.sme import (UNCONSTRAINED, Mapping, MatchConstraints, ScoreParams, UnsatisfiableConstraints,
                          candidate_inferences, kernels, mapping_to_text, mapping_violations, match_hypotheses,
                          merge_gmaps, score_gmap, self_score, similarity, sme_map, incremental_remap)
from oracles import brute_force_best, random_pair


def case(cid: str, ents: dict[str, str], *facts: Expression, kind: str = "problem") -> Case:
    return Case(cid, kind, tuple(make_entity(e, (c,)) for e, c in ents.items()), tuple(facts))


def E(functor: str, *args) -> Expression:
    return Expression(functor, args)


UNITS = {"u1": "BlueInfantryPlatoon", "u2": "RedRiflePlatoon", "h1": "Hill"}


# ---------------------------------------------------------------- hypotheses

def test_identity_pairs_every_expression():
    c = case("c", UNITS, E("near", "u1", "h1"), E("enables", E("near", "u1", "h1"), E("attack", "u1", "u2")))
    hyps = match_hypotheses(c, c)
    pairs = set(hyps.pairs)
    for e in c.expressions:
        assert (e, e) in pairs


def test_functor_mismatch_gives_nothing():
    b = case("b", UNITS, E("attack", "u1", "u2"))
    t = case("t", UNITS, E("defend", "u1", "u2"))
    assert len(match_hypotheses(b, t)) == 0


def test_partition_mismatch_discards_hypothesis():
    b = case("b", {"blueU": "BlueInfantryPlatoon", "hill": "Hill"}, E("near", "blueU", "hill"))
    t = case("t", {"redU": "RedRiflePlatoon", "river": "River"}, E("near", "redU", "river"))
    assert len(match_hypotheses(b, t, MatchConstraints())) == 0
    assert len(match_hypotheses(b, t, UNCONSTRAINED)) == 1


def test_excluded_pair_is_dropped():
    b = case("b", UNITS, E("near", "u1", "h1"))
    cons = MatchConstraints(excluded=frozenset({("u1", "u1")}))
    assert len(match_hypotheses(b, b, cons)) == 0


def test_constraint_validation():
    with pytest.raises(ValueError):
        MatchConstraints(required=frozenset({("a", "x"), ("a", "y")}))
    with pytest.raises(ValueError):
        MatchConstraints(required=frozenset({("a", "x")}), excluded=frozenset({("a", "x")}))


# ---------------------------------------------------------------- merging

def test_disjoint_hypotheses_merge_into_one():
    b = case("b", UNITS, E("near", "u1", "h1"), E("attack", "u1", "u2"))
    ranked = merge_gmaps(match_hypotheses(b, b))
    assert ranked[0].entity_corrs == {"u1": "u1", "u2": "u2", "h1": "h1"}
    assert len(ranked[0].expr_corrs) == 2


def test_one_to_one_forces_split():
    base = case("base", {"b": "Hill"}, E("small", "b"), E("steep", "b"))
    target = case("target", {"t1": "Hill", "t2": "Hill"}, E("small", "t1"), E("steep", "t2"))
    ranked = merge_gmaps(match_hypotheses(base, target), max_mappings=3)
    assert len(ranked) == 2
    for m in ranked:
        assert len(m.entity_corrs) == 1 and len(m.expr_corrs) == 1


def test_required_unsatisfiable_returns_empty():
    b = case("b", UNITS, E("near", "u1", "h1"))
    cons = MatchConstraints(required=frozenset({("u1", "nobody")}))
    assert merge_gmaps(match_hypotheses(b, b, cons), cons) == []
    with pytest.raises(UnsatisfiableConstraints):
        sme_map(b, b, cons)


def test_kernels_are_roots():
    inner = E("near", "u1", "h1")
    c = case("c", UNITS, E("enables", inner, E("attack", "u1", "u2")))
    hyps = match_hypotheses(c, c)
    roots = [hyps.pairs[k][0] for k in kernels(hyps)]
    assert roots == [c.facts[0]]


def test_merge_mode_validation():
    c = case("c", UNITS, E("near", "u1", "h1"))
    with pytest.raises(ValueError):
        merge_gmaps(match_hypotheses(c, c), mode="fast")


# ---------------------------------------------------------------- scoring

def test_score_examples():
    assert score_gmap(Mapping({}, {}, 0.0)) == 0
    facts = [E("small", f"h{i}") for i in range(4)]
    c = case("c", {f"h{i}": "Hill" for i in range(4)}, *facts)
    assert sme_map(c, c).score == pytest.approx(4)


def _nested_chain(n: int) -> Expression:
    e = E("small", "h")
    for _ in range(n - 1):
        e = E("cause", e)
    return e


def _recursive_score(e) -> float:
    if not isinstance(e, Expression):
        return 0.0
    kids = [a for a in e.args if isinstance(a, Expression)]
    return 1.0 + 0.8 * len(kids) + sum(_recursive_score(k) for k in kids)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_chain_closed_form(n):
    chain = _nested_chain(n)
    c = case("c", {"h": "Hill"}, chain)
    m = sme_map(c, c)
    assert m.score == pytest.approx(n + 0.8 * (n - 1), abs=1e-9)
    assert m.score == pytest.approx(_recursive_score(chain), abs=1e-9)
    assert score_gmap(m) == pytest.approx(m.score)
    if n >= 2:
        assert m.score > n


def test_systematicity_nested_beats_flat():
    nested = case("n", {"h": "Hill"}, _nested_chain(4))
    flat = case("f", {"h": "Hill", "k": "Hill", "j": "Hill", "i": "Hill"},
                E("small", "h"), E("small", "k"), E("small", "j"), E("small", "i"))
    assert sme_map(nested, nested).score > sme_map(flat, flat).score
    assert len(nested.expressions) == len(flat.expressions)


def test_score_params_respected():
    c = case("c", {"h": "Hill"}, _nested_chain(3))
    m = sme_map(c, c, params=ScoreParams(expression_weight=2.0, trickle=0.5))
    assert m.score == pytest.approx(3 * 2.0 + 2 * 0.5)


# ---------------------------------------------------------------- inferences

def test_inference_with_all_entities_mapped():
    target = case("t", UNITS, E("near", "u1", "h1"), E("guards", "u2", "h1"))
    base = case("b", UNITS, E("near", "u1", "h1"), E("guards", "u2", "h1"), E("attack", "u1", "u2"))
    m = sme_map(base, target)
    assert [str(i.expr) for i in m.inferences] == ["(attack u1 u2)"]
    assert m.inferences[0].skolems == ()


def test_inference_with_task_skolem():
    ents = {"task1": "Ambush", "u9": "BlueInfantryPlatoon", "r": "RedRiflePlatoon"}
    base = case("b", ents, E("near", "u9", "r"), E("performedBy", "task1", "u9"), kind="problem")
    target = case("t", {"u9": "BlueInfantryPlatoon", "r": "RedRiflePlatoon"}, E("near", "u9", "r"))
    m = sme_map(base, target)
    assert len(m.inferences) == 1
    inf = m.inferences[0]
    assert inf.skolem_ids() == ("task1",)
    assert inf.skolems[0].partition == "BlueTask"
    assert str(inf.expr).startswith("(performedBy ?task1")


def test_isolated_fact_gives_no_inference():
    base = case("b", {**UNITS, "x": "Hill"}, E("near", "u1", "h1"), E("small", "x"))
    target = case("t", UNITS, E("near", "u1", "h1"))
    assert sme_map(base, target).inferences == ()


def _connected_facts(base: Case, mapping: Mapping) -> set[Expression]:
    """Oracle: unmapped facts reachable from mapped structure through shared entities or subexpressions."""
    mapped_ents = set(mapping.entity_corrs)
    mapped_exprs = set(mapping.expr_corrs)
    pending = [f for f in base.facts if f not in mapped_exprs]
    linked: set[Expression] = set()
    frontier_ents = set(mapped_ents)
    changed = True
    while changed:
        changed = False
        for f in pending:
            if f in linked:
                continue
            subs = set(f.subexpressions())
            if set(f.entities()) & frontier_ents or subs & mapped_exprs:
                linked.add(f)
                frontier_ents |= set(f.entities())
                changed = True
    return linked


def test_inference_connectivity_oracle():
    rng = random.Random(7)
    for _ in range(150):
        base, target = random_pair(rng)
        m = sme_map(base, target, UNCONSTRAINED)
        emitted = {inf.fact_index for inf in m.inferences}
        expected = {i for i, f in enumerate(base.facts) if f in _connected_facts(base, m)}
        assert emitted == expected


def test_candidate_inferences_deterministic():
    rng = random.Random(3)
    base, target = random_pair(rng)
    m = sme_map(base, target, UNCONSTRAINED)
    assert candidate_inferences(base, target, m) == candidate_inferences(base, target, m)


# ---------------------------------------------------------------- sme_map

def test_identical_cases_self_map():
    c = case("c", UNITS, E("near", "u1", "h1"), E("enables", E("near", "u1", "h1"), E("attack", "u1", "u2")))
    m = sme_map(c, c)
    assert m.score == pytest.approx(self_score(c))
    assert m.inferences == ()
    assert m.entity_corrs == {"u1": "u1", "u2": "u2", "h1": "h1"}


def test_missing_task_subtree_is_reconstructed():
    ents = {"b1": "BlueInfantryPlatoon", "r1": "RedRiflePlatoon", "w": "Woods", "rd": "Road",
            "t1": "Ambush"}
    shared = [E("near", "w", "rd"), E("movesAlong", "r1", "rd"), E("near", "b1", "w")]
    task = [E("performedBy", "t1", "b1"), E("taskTarget", "t1", "r1"),
            E("enables", E("near", "b1", "w"), E("taskTarget", "t1", "r1"))]
    base = case("b", ents, *shared, *task, kind="solution")
    target = case("t", {k: v for k, v in ents.items() if k != "t1"}, *shared)
    m = sme_map(base, target)
    assert len(m.inferences) == 3
    assert all(inf.skolem_ids() == ("t1",) for inf in m.inferences)
    assert {str(i.expr) for i in m.inferences} == {
        "(performedBy ?t1 b1)", "(taskTarget ?t1 r1)", "(enables (near b1 w) (taskTarget ?t1 r1))"}


def test_required_pair_forces_lower_scoring_mapping():
    base = case("b", {"a": "Hill", "b": "Hill"}, E("small", "a"), E("steep", "a"), E("small", "b"))
    target = case("t", {"x": "Hill", "y": "Hill"}, E("small", "x"), E("steep", "x"), E("small", "y"))
    free = sme_map(base, target)
    assert free.entity_corrs["a"] == "x"
    cons = MatchConstraints(required=frozenset({("a", "y")}))
    forced = sme_map(base, target, cons)
    assert forced.entity_corrs["a"] == "y"
    assert forced.score < free.score
    assert forced.score == pytest.approx(brute_force_best(base, target, cons))


def test_mapping_text_is_deterministic():
    rng = random.Random(11)
    for _ in range(20):
        base, target = random_pair(rng)
        a = mapping_to_text(sme_map(base, target, UNCONSTRAINED))
        b = mapping_to_text(sme_map(base, target, UNCONSTRAINED))
        assert a == b
        assert a.startswith("(mapping :score")


def test_violations_detected():
    c = case("c", UNITS, E("near", "u1", "h1"))
    bad = Mapping({"u1": "h1", "h1": "h1"}, {E("near", "u1", "h1"): E("near", "u1", "h1")}, 1.0)
    errs = mapping_violations(bad, c, c)
    assert any("1-to-1" in e for e in errs)
    assert any("crosses partitions" in e for e in errs)
    assert any("not supported" in e for e in errs)


# ---------------------------------------------------------------- properties

@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000))
def test_exact_equals_brute_force(seed):
    base, target = random_pair(random.Random(seed))
    for cons in (UNCONSTRAINED, MatchConstraints()):
        m = sme_map(base, target, cons, mode="exact")
        assert m.score == pytest.approx(brute_force_best(base, target, cons), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_partition_soundness(seed):
    base, target = random_pair(random.Random(seed))
    m = sme_map(base, target, MatchConstraints())
    for b, t in m.entity_corrs.items():
        assert base.entity(b).partition == target.entity(t).partition


def test_monotone_under_fact_removal(library):
    rng = random.Random(5)
    entries = list(library)
    for _ in range(6):
        a, b = rng.sample(entries, 2)
        target = b.problem
        base = a.problem
        top = sme_map(base, target).score
        for _ in range(3):
            drop = rng.randrange(len(base.facts))
            smaller = Case(base.id, base.kind, base.entities, base.facts[:drop] + base.facts[drop + 1:],
                           base.terrain)
            assert sme_map(smaller, target).score <= top + 1e-9


def test_similarity_examples(library):
    c = library.entries[0].problem
    assert similarity(c, c) == pytest.approx(1.0)
    x = case("x", {"h": "Hill"}, E("weird", "h"))
    y = case("y", {"h": "Hill"}, E("other", "h"))
    assert similarity(x, y) == 0.0


def test_similarity_symmetric_on_corpus(library):
    entries = list(library)
    for a, b in zip(entries, entries[1:]):
        assert similarity(a.problem, b.problem, UNCONSTRAINED) == pytest.approx(
            similarity(b.problem, a.problem, UNCONSTRAINED), abs=1e-9)


# ---------------------------------------------------------------- incremental remap

def _two_reds():
    base_ents = {"b1": "BlueInfantryPlatoon", "r1": "RedRiflePlatoon", "r2": "RedRiflePlatoon", "h": "Hill"}
    base = case("b", base_ents,
                E("near", "b1", "h"), E("attacks", "r1", "h"), E("attacks", "r2", "h"),
                E("guards", "b1", "r2"))
    target = case("t", {"b1": "BlueInfantryPlatoon", "r1": "RedRiflePlatoon", "h": "Hill"},
                  E("near", "b1", "h"), E("attacks", "r1", "h"))
    return base, target


def test_remap_onto_single_enemy():
    base, target = _two_reds()
    m = sme_map(base, target)
    unmapped = [s for s in m.skolems()]
    assert len(unmapped) == 1
    ent = unmapped[0]
    remap = incremental_remap(base, target, m, ent)
    assert remap is not None
    assert remap.target_entity == "r1"
    assert remap.mapping.entity_corrs[ent] == "r1"
    texts = {str(i.expr) for i in remap.inferences}
    assert "(guards b1 r1)" in texts
    assert all(not i.skolems for i in remap.inferences if i.remap == ent)


def test_remap_without_candidates_fails():
    base = case("b", {"b1": "BlueInfantryPlatoon", "r1": "RedRiflePlatoon", "h": "Hill"},
                E("near", "b1", "h"), E("guards", "b1", "r1"))
    target = case("t", {"b1": "BlueInfantryPlatoon", "h": "Hill"}, E("near", "b1", "h"))
    m = sme_map(base, target)
    assert incremental_remap(base, target, m, "r1") is None


def test_remap_preconditions():
    base, target = _two_reds()
    m = sme_map(base, target)
    with pytest.raises(ValueError, match="already mapped"):
        incremental_remap(base, target, m, "b1")
    ents = {"t1": "Ambush", "b1": "BlueInfantryPlatoon"}
    b2 = case("b2", ents, E("small", "b1"), E("performedBy", "t1", "b1"))
    t2 = case("t2", {"b1": "BlueInfantryPlatoon"}, E("small", "b1"))
    m2 = sme_map(b2, t2)
    with pytest.raises(ValueError, match="plunkable"):
        incremental_remap(b2, t2, m2, "t1")


def test_remap_cross_partition_never_chosen():
    base, target = _two_reds()
    m = sme_map(base, target)
    remap = incremental_remap(base, target, m, "r2")
    assert target.entity(remap.target_entity).partition == base.entity("r2").partition
