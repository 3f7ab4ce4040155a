from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from analogon.kb import (PARTITION_CLASSES, Case, CaseSyntaxError, Cell, Const, DuplicateEntity, Expression,
                         HierarchyCycle, KBError, Taxonomy, UnknownCollection, UnresolvedReference,
                         derive_locations, is_specialization, make_entity, parse_case, print_case,
                         validate_case)
from analogon.kb.taxonomy import parse_taxonomy
from oracles import transitive_closure

MINIMAL = """
(case tiny :kind problem
  (entity hill-1 (isa Hill))
  (fact (small hill-1)))
"""


def test_minimal_case():
    case = parse_case(MINIMAL)
    assert case.id == "tiny" and case.kind == "problem"
    assert len(case.entities) == 1 and len(case.facts) == 1
    assert case.entity("hill-1").partition == "TerrainFeature"


def test_unresolved_reference_names_entity():
    text = "(case x :kind problem (entity h (isa Hill)) (fact (near h unit-x)))"
    with pytest.raises(UnresolvedReference, match="unit-x"):
        parse_case(text)


def test_syntax_error_reports_position():
    with pytest.raises(CaseSyntaxError) as info:
        parse_case("(case x :kind problem\n  (entity h (isa Hill))\n  (fact (near h h))")
    assert info.value.line >= 1


def test_unknown_collection_and_duplicates():
    with pytest.raises(UnknownCollection):
        parse_case("(case x :kind problem (entity h (isa Volcano)) (fact (small h)))")
    with pytest.raises(DuplicateEntity):
        parse_case("(case x :kind problem (entity h (isa Hill)) (entity h (isa Hill)) (fact (small h)))")


def test_terrain_block_and_values():
    text = """
    (case g :kind problem
      (entity u (isa BlueInfantryPlatoon))
      (fact (locatedAt u (cell 1 2)))
      (fact (onTerrainType u Grass))
      (fact (strength u 3))
      (terrain :width 3 :height 2
        (row 0 "GWF")
        (row 1 "MUG")
        (elev 1 0 2 0)))
    """
    case = parse_case(text)
    assert case.terrain.terrain(Cell(0, 1)) == "Water"
    assert case.terrain.elev(Cell(1, 1)) == 2
    assert case.locations["u"] == Cell(1, 2)
    assert Expression("onTerrainType", ("u", Const("Grass"))) in case.facts
    assert Expression("strength", ("u", 3)) in case.facts


def test_solution_needs_a_task():
    with pytest.raises(KBError):
        parse_case("(case s :kind solution (entity h (isa Hill)) (fact (small h)))")


def test_expression_order():
    inner = Expression("near", ("a", "b"))
    outer = Expression("enables", (inner, Expression("cause", (inner,))))
    assert inner.order == 1 and outer.order == 3


def test_round_trip_on_corpus(corpus):
    for c in corpus.cases:
        for case in (c.problem, c.solution):
            assert parse_case(print_case(case)) == case


def test_specialization_examples(taxonomy):
    assert is_specialization(taxonomy, "Ambush", "Ambush")
    assert is_specialization(taxonomy, "NightAmbush", "Ambush")
    assert not is_specialization(taxonomy, "Ambush", "NightAmbush")
    with pytest.raises(UnknownCollection):
        is_specialization(taxonomy, "Ambush", "Nope")


def test_specialization_matches_closure_oracle(taxonomy):
    closure = transitive_closure(taxonomy.parents)
    for c1 in taxonomy.collections:
        for c2 in taxonomy.collections:
            assert taxonomy.is_specialization(c1, c2) == (c2 in closure[c1]), (c1, c2)


def test_every_collection_has_one_partition(taxonomy):
    for c in taxonomy.collections:
        assert taxonomy.partition_of(c) in PARTITION_CLASSES


def test_plunkability(taxonomy):
    for p in ("MilitaryUnit", "TerrainFeature", "BlueUnit", "RedUnit"):
        assert not taxonomy.plunkable(p)
    for p in ("BlueTask", "RedTask", "BluePath", "RedPath", "Location"):
        assert taxonomy.plunkable(p)


def test_taxonomy_cycle_rejected():
    with pytest.raises(KBError):
        Taxonomy({"A": ("B",), "B": ("A",)}, {"A": True})


def test_partition_totality_on_corpus(corpus, taxonomy):
    for c in corpus.cases:
        for e in c.solution.entities:
            parts = {taxonomy.partition_of(col) for col in e.collections}
            assert parts == {e.partition}


HIER = """
(case h :kind problem
  (entity coy (isa BlueRifleCompany))
  (entity plt (isa BlueInfantryPlatoon))
  (entity sq (isa BlueInfantrySquad))
  (entity own (isa BlueTankPlatoon))
  (fact (locatedAt coy (cell 4 7)))
  (fact (locatedAt own (cell 1 1)))
  (fact (subordinateOf plt coy))
  (fact (subordinateOf sq plt))
  (fact (subordinateOf own coy)))
"""


def test_derive_locations_chain():
    case = derive_locations(parse_case(HIER))
    assert case.locations["plt"] == Cell(4, 7)
    assert case.locations["sq"] == Cell(4, 7)
    assert case.locations["own"] == Cell(1, 1)


def test_derive_locations_idempotent_and_preserving():
    raw = parse_case(HIER)
    once = derive_locations(raw)
    assert derive_locations(once) == once
    assert set(raw.facts) <= set(once.facts)


def _single_step(case: Case) -> Case:
    locs = case.locations
    new = list(case.facts)
    for f in case.facts_with("subordinateOf"):
        child, boss = f.args
        if child not in locs and boss in locs:
            e = Expression("locatedAt", (child, locs[boss]))
            if e not in new:
                new.append(e)
    return Case(case.id, case.kind, case.entities, tuple(new), case.terrain)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=6, max_size=6), st.sets(st.integers(0, 5), max_size=3))
def test_derive_locations_fixpoint_oracle(parents, located):
    # a random forest over 6 units: parent index < own index keeps it acyclic
    ents = [make_entity(f"u{i}", ("BlueInfantryPlatoon",)) for i in range(6)]
    facts = [Expression("subordinateOf", (f"u{i}", f"u{parents[i] % i}")) for i in range(1, 6)]
    facts += [Expression("locatedAt", (f"u{i}", Cell(i, i))) for i in sorted(located)]
    case = Case("r", "problem", tuple(ents), tuple(facts))
    expected = case
    while True:
        nxt = _single_step(expected)
        if nxt == expected:
            break
        expected = nxt
    assert derive_locations(case).locations == expected.locations


def test_subordination_cycle_is_named():
    text = """
    (case c :kind problem
      (entity a (isa BlueInfantrySquad)) (entity b (isa BlueInfantrySquad))
      (fact (subordinateOf a b)) (fact (subordinateOf b a)))
    """
    with pytest.raises(HierarchyCycle, match="a"):
        derive_locations(parse_case(text))


def test_validate_case_accepts_corpus(corpus, taxonomy):
    for c in corpus.cases:
        validate_case(c.problem, taxonomy)
        validate_case(c.solution, taxonomy)


def test_custom_taxonomy_text():
    tax = parse_taxonomy("""
        (partition Thing :plunkable false)
        (partition Act :plunkable true)
        (collection Rock Thing)
        (collection Throw Act :category hurl :posture offensive)
    """)
    assert tax.partition_of("Rock") == "Thing"
    assert tax.category("Throw") == "hurl"
    assert tax.plunkable("Act") and not tax.plunkable("Thing")


def test_taxonomy_plunkable_flag_is_strict():
    with pytest.raises(KBError, match="plunkable"):
        parse_taxonomy("(partition Thing :plunkable yes)")
