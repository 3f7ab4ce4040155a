"""Tokenizer and reader for parenthesized prefix text with ``;`` comments."""

from __future__ import annotations

import re
from dataclasses import dataclass


class KBError(ValueError):
    """Base class for knowledge-base load errors."""


class CaseSyntaxError(KBError):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Atom:
    """A leaf token. ``value`` is a str symbol, an int/float, or a :class:`Text` string."""

    value: object
    line: int
    col: int


class Text(str):
    """A double-quoted string literal (distinguished from symbols)."""


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int
    col: int

    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Atom) and isinstance(self.items[0].value, str) \
                and not isinstance(self.items[0].value, Text):
            return self.items[0].value
        return None


_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|"(?:[^"\\]|\\.)*"|[^\s()";]+|"')
_INT = re.compile(r"[-+]?\d+$")
_FLOAT = re.compile(r"[-+]?(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?$")


def _positions(text: str):
    line, col = 1, 1
    pos = 0
    for m in _TOKEN.finditer(text):
        if m.start() != pos:
            raise CaseSyntaxError("unexpected character", line, col)
        tok = m.group()
        yield tok, line, col
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    if pos != len(text):
        raise CaseSyntaxError("unexpected character", line, col)


def _atom(tok: str, line: int, col: int) -> Atom:
    if tok.startswith('"'):
        if len(tok) < 2 or not tok.endswith('"'):
            raise CaseSyntaxError("unterminated string", line, col)
        return Atom(Text(tok[1:-1].replace('\\"', '"').replace("\\\\", "\\")), line, col)
    if _INT.match(tok):
        return Atom(int(tok), line, col)
    if _FLOAT.match(tok):
        return Atom(float(tok), line, col)
    return Atom(tok, line, col)


def read_all(text: str) -> list:
    """Read every top-level form in ``text``."""
    stack: list[tuple[list, int, int]] = []
    forms: list = []
    for tok, line, col in _positions(text):
        if tok[0].isspace() or tok.startswith(";"):
            continue
        if tok == "(":
            stack.append(([], line, col))
        elif tok == ")":
            if not stack:
                raise CaseSyntaxError("unbalanced ')'", line, col)
            items, l0, c0 = stack.pop()
            node = SList(tuple(items), l0, c0)
            (stack[-1][0] if stack else forms).append(node)
        else:
            node = _atom(tok, line, col)
            (stack[-1][0] if stack else forms).append(node)
    if stack:
        _, l0, c0 = stack[-1]
        raise CaseSyntaxError("unclosed '('", l0, c0)
    return forms


def symbol(node, what: str = "symbol") -> str:
    if isinstance(node, Atom) and isinstance(node.value, str) and not isinstance(node.value, Text):
        return node.value
    line, col = (node.line, node.col) if node is not None else (0, 0)
    raise CaseSyntaxError(f"expected {what}", line, col)


def integer(node, what: str = "integer") -> int:
    if isinstance(node, Atom) and isinstance(node.value, int):
        return node.value
    raise CaseSyntaxError(f"expected {what}", node.line, node.col)


def keyword_args(items, start: int) -> tuple[dict, list]:
    """Split ``:key value`` pairs from the remaining positional forms."""
    opts: dict = {}
    rest: list = []
    i = start
    while i < len(items):
        node = items[i]
        if isinstance(node, Atom) and isinstance(node.value, str) and not isinstance(node.value, Text) \
                and node.value.startswith(":"):
            if i + 1 >= len(items):
                raise CaseSyntaxError(f"missing value for {node.value}", node.line, node.col)
            opts[node.value[1:]] = items[i + 1]
            i += 2
        else:
            rest.append(node)
            i += 1
    return opts, rest
