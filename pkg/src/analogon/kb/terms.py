"""Term types shared by cases, mappings and inferences."""

from __future__ import annotations

from typing import NamedTuple, Union


class Cell(NamedTuple):
    """A grid cell, written ``(cell r c)`` in case files. Matched as an atomic value."""

    row: int
    col: int

    def __str__(self) -> str:
        return f"(cell {self.row} {self.col})"


class Const(NamedTuple):
    """A symbolic constant argument: a taxonomy collection or a terrain class name."""

    name: str

    def __str__(self) -> str:
        return self.name


class Expression:
    """An immutable functor application.

    Arguments are entity ids (``str``), nested expressions, or atomic values
    (:class:`Cell`, :class:`Const`, numbers). Equality is structural and the
    hash is computed once, so expressions can be used freely as dict keys.
    """

    __slots__ = ("functor", "args", "order", "_hash", "_text")

    def __init__(self, functor: str, args) -> None:
        args = tuple(args)
        if not args:
            raise ValueError(f"expression {functor!r} has no arguments")
        self.functor = functor
        self.args = args
        self.order = 1 + max((a.order for a in args if isinstance(a, Expression)), default=0)
        self._hash = hash((functor, args))
        self._text = None

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expression) or self._hash != other._hash:
            return False
        return self.functor == other.functor and self.args == other.args

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        if self._text is None:
            self._text = "(" + " ".join([self.functor, *(format_term(a) for a in self.args)]) + ")"
        return self._text

    def __repr__(self) -> str:
        return f"Expression<{self}>"

    def subexpressions(self):
        """Yield this expression and every nested expression, pre-order, with repeats."""
        stack = [self]
        while stack:
            e = stack.pop()
            yield e
            stack.extend(a for a in reversed(e.args) if isinstance(a, Expression))

    def entities(self):
        """Yield entity ids in argument order (depth first), with repeats."""
        for a in self.args:
            if isinstance(a, Expression):
                yield from a.entities()
            elif isinstance(a, str):
                yield a

    def substitute(self, fn) -> "Expression":
        """Rebuild with every non-expression argument replaced by ``fn(arg)``."""
        return Expression(
            self.functor,
            (a.substitute(fn) if isinstance(a, Expression) else fn(a) for a in self.args),
        )


Value = Union[Cell, Const, int, float]
Term = Union[str, Expression, Cell, Const, int, float]


def format_term(term) -> str:
    if isinstance(term, float):
        return repr(term)
    return str(term)


def is_value(term) -> bool:
    return isinstance(term, (Cell, Const, int, float)) and not isinstance(term, bool)
