"""Knowledge representation: terms, cases, taxonomy and the case-file format."""

from .case import (
    RESERVED_FUNCTORS,
    Case,
    DuplicateEntity,
    Entity,
    HierarchyCycle,
    UnresolvedReference,
    derive_locations,
    make_entity,
    parse_case,
    print_case,
    validate_case,
)
from .reader import CaseSyntaxError, KBError
from .taxonomy import PARTITION_CLASSES, Taxonomy, UnknownCollection, default_taxonomy, load_taxonomy
from .terms import Cell, Const, Expression

__all__ = [
    "RESERVED_FUNCTORS", "PARTITION_CLASSES", "Case", "CaseSyntaxError", "Cell", "Const",
    "DuplicateEntity", "Entity", "Expression", "HierarchyCycle", "KBError", "Taxonomy",
    "UnknownCollection", "UnresolvedReference", "default_taxonomy", "derive_locations",
    "load_taxonomy", "make_entity", "parse_case", "print_case", "validate_case",
]


def is_specialization(taxonomy: Taxonomy, c1: str, c2: str) -> bool:
    return taxonomy.is_specialization(c1, c2)
