import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulebayes.errors import (
    EmptyProduction,
    GrammarSyntaxError,
    MappingIncomplete,
    UndefinedSymbol,
)
from rulebayes.expr import Var, parse_expr
from rulebayes.grammar import (
    NumericRange,
    derive,
    enumerate_phenotypes,
    load_grammar,
    map_genome,
    parse_grammar,
)
from rulebayes.config import resource_path

LINEAR_GRAMMAR = """
<expr> ::= sum((x <comp> <x_v>) != (y <comp> <y_v>))
<comp> ::= > | < | <= | >=
<x_v> ::= range(4.1, 4.9, 0.05)
<y_v> ::= range(7.0, 11.0, 0.05)
"""


def test_linear_grammar_structure():
    g = parse_grammar(LINEAR_GRAMMAR)
    assert g.nonterminals == {"expr", "comp", "x_v", "y_v"}
    assert g.start == "expr"
    assert len(g.alternatives("comp")) == 4


def test_range_enumerates_both_ends():
    g = parse_grammar(LINEAR_GRAMMAR)
    xs = [float(alt[0]) for alt in g.alternatives("x_v")]
    assert len(xs) == 17
    assert xs[0] == 4.1 and xs[-1] == 4.9
    assert 4.8 in xs


def test_numeric_range_rejects_missing_endpoint():
    with pytest.raises(ValueError):
        NumericRange(0.0, 1.0, 0.3)


def test_minimal_grammar():
    g = parse_grammar("<s> ::= x")
    assert g.start == "s"
    assert g.productions == {"s": (("x",),)}
    assert "x" in g.terminals


def test_undefined_symbol():
    with pytest.raises(UndefinedSymbol):
        parse_grammar("<s> ::= <t>")


@pytest.mark.parametrize("text", ["", "   \n", "s ::= x", "<s> ::= x\n<s> ::= y"])
def test_syntax_errors(text):
    with pytest.raises(GrammarSyntaxError):
        parse_grammar(text)


def test_empty_production():
    with pytest.raises(EmptyProduction):
        parse_grammar("<s> ::=")


def test_mod_rule_selects_alternative():
    g = parse_grammar("<e> ::= x | y")
    assert map_genome(g, [3]) == Var("y")
    assert map_genome(g, [4]) == Var("x")


def test_single_alternative_consumes_one_codon():
    g = parse_grammar("<e> ::= x")
    tokens, used = derive(g, [0, 7, 2])
    assert tokens == ("x",) and used == 1


def test_recursion_exhausts_wraps():
    g = parse_grammar("<e> ::= ( <e> + <e> ) | x")
    with pytest.raises(MappingIncomplete):
        map_genome(g, [0], max_wraps=2)


def test_recursive_mapping_terminates():
    g = parse_grammar("<e> ::= ( <e> + <e> ) | x")
    assert str(map_genome(g, [0, 1, 1])) == "(x + x)"


def test_wrapping_reads_genome_again():
    g = parse_grammar("<e> ::= <a> <a> <a>\n<a> ::= x | y")
    # codons: 0 -> <e>, 1 -> y, wrap, 0 -> x, 1 -> y
    assert derive(g, [0, 1], max_wraps=1) == (("y", "x", "y"), 4)
    with pytest.raises(MappingIncomplete):
        derive(g, [0, 1], max_wraps=0)


def test_mapping_linear_genome():
    g = parse_grammar(LINEAR_GRAMMAR)
    # comp index 1 is '<', x_v index 14 is 4.8, comp index 2 is '<=', y_v index 73 is 10.65
    e = map_genome(g, [0, 1, 14, 2, 73])
    assert e == parse_expr("sum((x < 4.8) != (y <= 10.65))")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2**16 - 1), min_size=1, max_size=12), st.integers(0, 3))
def test_mapping_is_deterministic(genome, wraps):
    g = parse_grammar("<e> ::= ( <e> + <e> ) | ( <e> * <e> ) | x | y")

    def run():
        try:
            return derive(g, genome, wraps)
        except MappingIncomplete:
            return "incomplete"

    assert run() == run()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=5, max_size=5), st.integers(0, 4), st.integers(1, 50))
def test_modulo_invariance(genome, position, k):
    g = parse_grammar(LINEAR_GRAMMAR)
    sizes = [1, 4, 17, 4, 81]  # alternatives at each expansion, in derivation order
    shifted = list(genome)
    shifted[position] += k * sizes[position]
    assert derive(g, genome) == derive(g, shifted)


@pytest.mark.parametrize("name", ["linear_proportion", "linear_distance", "advection", "emissions", "powerplant"])
def test_render_round_trip(name):
    g = load_grammar(resource_path("grammars", f"{name}.bnf"))
    assert parse_grammar(g.render()) == g


def test_restrict_limits_alternatives():
    g = load_grammar(resource_path("grammars", "powerplant.bnf"))
    r = g.restrict("var", ["AT"])
    assert r.alternatives("var") == (("AT",),)
    assert len(g.alternatives("var")) == 4


def test_enumerate_small_grammar():
    g = parse_grammar("<e> ::= <a> <op> <a>\n<a> ::= x | y\n<op> ::= + | *")
    phen = enumerate_phenotypes(g)
    assert len(phen) == 8
    assert ("x", "+", "y") in phen
