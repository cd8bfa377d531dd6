"""BNF grammars and the genotype-to-phenotype mapping of grammatical evolution.

Grammar files hold one rule per line::

    # comment
    <expr> ::= sum((x <comp> <x_v>) != (y <comp> <y_v>))
    <comp> ::= < | > | <= | >=
    <x_v>  ::= range(4.1, 4.9, 0.05)

Symbols in angle brackets are non-terminals, everything else is split into
expression tokens, which become terminals.  ``range(lo, hi, step)`` expands to
one alternative per value.  The left-hand side of the first rule is the start
symbol.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import expr as _expr
from .errors import (
    EmptyProduction,
    ExprSyntaxError,
    GrammarSyntaxError,
    MappingIncomplete,
    UndefinedSymbol,
)

DEFAULT_MAX_WRAPS = 3

_RULE = re.compile(r"^\s*<([A-Za-z_][A-Za-z0-9_]*)>\s*::=(.*)$")
_NONTERMINAL = re.compile(r"<([A-Za-z_][A-Za-z0-9_]*)>")
_RANGE = re.compile(r"range\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)")


def is_nonterminal(symbol: str) -> bool:
    return _NONTERMINAL.fullmatch(symbol) is not None


def nt(name: str) -> str:
    return f"<{name}>"


@dataclass(frozen=True)
class NumericRange:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("range step must be positive")
        if self.hi < self.lo:
            raise ValueError("range upper bound below lower bound")
        k = round((self.hi - self.lo) / self.step)
        if abs(self.lo + k * self.step - self.hi) > 1e-9:
            raise ValueError(
                f"range({self.lo}, {self.hi}, {self.step}) does not land on its upper bound"
            )

    def values(self) -> list:
        k = round((self.hi - self.lo) / self.step)
        return [round(self.lo + i * self.step, 10) + 0.0 for i in range(k + 1)]

    def tokens(self) -> list:
        return [repr(v) for v in self.values()]


@dataclass(frozen=True)
class Grammar:
    """A context-free grammar.

    ``productions`` maps each non-terminal name to its alternatives; an
    alternative is a tuple of symbols where non-terminals keep their angle
    brackets (``"<comp>"``) and every other string is a terminal token.
    """

    nonterminals: frozenset
    terminals: frozenset
    start: str
    productions: Mapping[str, tuple]

    def __post_init__(self):
        if self.start not in self.nonterminals:
            raise UndefinedSymbol(f"start symbol <{self.start}> is not a non-terminal")
        for name in self.nonterminals:
            alts = self.productions.get(name)
            if not alts:
                raise EmptyProduction(f"<{name}> has no alternatives")
            for alt in alts:
                if not alt:
                    raise EmptyProduction(f"<{name}> has an empty alternative")
                for sym in alt:
                    if is_nonterminal(sym):
                        if sym[1:-1] not in self.nonterminals:
                            raise UndefinedSymbol(f"{sym} used in <{name}> is never defined")
                    elif sym not in self.terminals:
                        raise UndefinedSymbol(f"terminal {sym!r} missing from the terminal set")

    def alternatives(self, name: str) -> tuple:
        return self.productions[name]

    def restrict(self, name: str, alternatives: Sequence[str]) -> "Grammar":
        """Copy of the grammar with ``<name>`` limited to the given alternatives.

        Each alternative is grammar source text, e.g. ``restrict("var", ["GTEP"])``.
        """
        alts = tuple(_split_alternative(a, None) for a in alternatives)
        alts = tuple(itertools.chain.from_iterable(alts))
        prods = dict(self.productions)
        prods[name] = alts
        return _build(self.start, prods)

    def render(self) -> str:
        lines = []
        for name, alts in self.productions.items():
            rhs = " | ".join(" ".join(alt) for alt in alts)
            lines.append(f"<{name}> ::= {rhs}")
        return "\n".join(lines) + "\n"


def _split_alternative(text: str, lineno):
    """Tokenize one alternative; returns the list of expanded alternatives."""
    text = text.strip()
    if not text:
        raise EmptyProduction(
            f"empty alternative{'' if lineno is None else f' on line {lineno}'}"
        )
    ranges = []

    def _sub(m):
        try:
            r = NumericRange(float(m.group(1)), float(m.group(2)), float(m.group(3)))
        except ValueError as exc:
            raise GrammarSyntaxError(str(exc), lineno) from None
        ranges.append(r)
        return f" <__range{len(ranges) - 1}> "

    text = _RANGE.sub(_sub, text)
    symbols = []
    pos = 0
    for m in _NONTERMINAL.finditer(text):
        symbols.extend(_terminal_tokens(text[pos : m.start()], lineno))
        symbols.append(m.group(0))
        pos = m.end()
    symbols.extend(_terminal_tokens(text[pos:], lineno))
    if not ranges:
        return [tuple(symbols)]
    choices = [r.tokens() for r in ranges]
    out = []
    for combo in itertools.product(*choices):
        out.append(
            tuple(
                combo[int(s[8:-1])] if s.startswith("<__range") else s for s in symbols
            )
        )
    return out


def _terminal_tokens(chunk: str, lineno):
    if not chunk.strip():
        return []
    try:
        return _expr.tokenize(chunk)
    except ExprSyntaxError as exc:
        raise GrammarSyntaxError(str(exc), lineno) from None


def _build(start: str, productions: Mapping[str, list]) -> Grammar:
    terminals = set()
    for alts in productions.values():
        for alt in alts:
            terminals.update(s for s in alt if not is_nonterminal(s))
    return Grammar(
        nonterminals=frozenset(productions),
        terminals=frozenset(terminals),
        start=start,
        productions={k: tuple(tuple(a) for a in v) for k, v in productions.items()},
    )


def parse_grammar(text: str) -> Grammar:
    """Parse grammar source text; see the module docstring for the format."""
    if not text or not text.strip():
        raise GrammarSyntaxError("grammar text is empty")
    productions: dict = {}
    start = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _RULE.match(line)
        if m is None:
            raise GrammarSyntaxError(f"malformed rule {raw.strip()!r}", lineno)
        name, rhs = m.group(1), m.group(2)
        if name in productions:
            raise GrammarSyntaxError(f"<{name}> defined twice", lineno)
        if not rhs.strip():
            raise EmptyProduction(f"<{name}> has no alternatives (line {lineno})")
        alts = []
        for part in rhs.split("|"):
            alts.extend(_split_alternative(part, lineno))
        productions[name] = alts
        if start is None:
            start = name
    if start is None:
        raise GrammarSyntaxError("grammar has no rules")
    return _build(start, productions)


def load_grammar(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return parse_grammar(fh.read())


def render(g: Grammar) -> str:
    return g.render()


# ---------------------------------------------------------------------------
# genotype -> phenotype


def derive(g: Grammar, genome: Sequence[int], max_wraps: int = DEFAULT_MAX_WRAPS):
    """Leftmost derivation driven by ``genome``.

    Every expansion consumes one codon and picks alternative
    ``codon % len(alternatives)``.  Codons are read left to right and the
    genome may be re-read from the start ``max_wraps`` times.

    Returns ``(tokens, codons_used)``.
    """
    n = len(genome)
    if n == 0:
        raise ValueError("genome must contain at least one codon")
    if max_wraps < 0:
        raise ValueError("max_wraps must be non-negative")
    budget = n * (max_wraps + 1)
    prods = g.productions
    out = []
    stack = [nt(g.start)]
    used = 0
    while stack:
        sym = stack.pop()
        if sym[0] != "<" or len(sym) < 3 or sym[-1] != ">":
            out.append(sym)
            continue
        if used >= budget:
            raise MappingIncomplete(
                f"non-terminals remain after {max_wraps} wraps of a {n}-codon genome"
            )
        alts = prods[sym[1:-1]]
        choice = alts[genome[used % n] % len(alts)]
        used += 1
        stack.extend(reversed(choice))
    return tuple(out), used


def map_genome(g: Grammar, genome: Sequence[int], max_wraps: int = DEFAULT_MAX_WRAPS):
    """Map a genome to its expression tree (raises ``MappingIncomplete``)."""
    tokens, _ = derive(g, genome, max_wraps)
    return _expr.parse_tokens(tokens)


def enumerate_phenotypes(g: Grammar, limit: int = 100_000) -> list:
    """All token sequences of a non-recursive grammar, in derivation order."""

    def expand(symbols, depth):
        if depth > 50:
            raise ValueError("grammar is recursive or too deep to enumerate")
        if not symbols:
            yield ()
            return
        head, rest = symbols[0], symbols[1:]
        heads = (
            [h for alt in g.productions[head[1:-1]] for h in expand(alt, depth + 1)]
            if is_nonterminal(head)
            else [(head,)]
        )
        for h in heads:
            for t in expand(rest, depth):
                yield h + t

    out = []
    for tokens in expand((nt(g.start),), 0):
        out.append(tokens)
        if len(out) > limit:
            raise ValueError("phenotype space exceeds the enumeration limit")
    return out
