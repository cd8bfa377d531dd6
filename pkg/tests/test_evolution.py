import math

import numpy as np
import pytest

from rulebayes.errors import AllInvalid, TypeMismatch
from rulebayes.evolution import CostFunction, EvolutionConfig, evaluate_cost, evolve
from rulebayes.expr import Dataset, eval_aggregate, parse_expr, parse_tokens
from rulebayes.grammar import enumerate_phenotypes, parse_grammar


def test_identity_cost():
    e = parse_expr("sum((x < 2) != (x < 5))")
    d = Dataset({"x": [1.0, 2.0, 3.0, 4.0, 6.0]})
    assert evaluate_cost(CostFunction("identity"), e, d) == 3.0


def test_rss_perfect_fit():
    d = Dataset({"x": [1.0, 2.0], "t": [1.0, 2.0]})
    assert evaluate_cost(CostFunction("rss", "t"), parse_expr("x"), d) == 0.0


def test_misclassification_count():
    d = Dataset({"x": [1.0, -1.0, 1.0], "t": [1.0, 1.0, 1.0]})
    e = parse_expr("ifelse((x > 0), 1, 0)")
    assert evaluate_cost(CostFunction("misclassification", "t"), e, d) == 1.0


def test_cost_shape_checks():
    d = Dataset({"x": [1.0], "t": [1.0]})
    with pytest.raises(TypeMismatch):
        evaluate_cost(CostFunction("identity"), parse_expr("x"), d)
    with pytest.raises(TypeMismatch):
        evaluate_cost(CostFunction("rss", "t"), parse_expr("sum((x < 1) != (x > 1))"), d)
    with pytest.raises(ValueError):
        CostFunction("rss")


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(population_size=1)
    with pytest.raises(ValueError):
        EvolutionConfig(mutation_chance=1.5)
    assert EvolutionConfig(genome_length=9).effective_mutation_chance == 1.0


def test_two_phenotype_search():
    g = parse_grammar("<e> ::= x | y")
    d = Dataset({"x": [5.0, 5.0], "y": [0.0, 1.0], "t": [0.0, 1.0]})
    res = evolve(g, CostFunction("rss", "t"), d, EvolutionConfig(iterations=10, seed=3))
    assert str(res.best_expr) == "y"
    assert res.best_cost == 0.0


def test_single_iteration_history():
    g = parse_grammar("<e> ::= x | y")
    d = Dataset({"x": [0.0], "y": [1.0], "t": [1.0]})
    res = evolve(g, CostFunction("rss", "t"), d, EvolutionConfig(iterations=1))
    assert len(res.cost_history) == 1


def test_all_invalid():
    g = parse_grammar("<e> ::= ( <e> + <e> )")
    d = Dataset({"x": [0.0], "t": [0.0]})
    with pytest.raises(AllInvalid):
        evolve(g, CostFunction("rss", "t"), d, EvolutionConfig(iterations=3, genome_length=4))


def _toy_problem():
    g = parse_grammar(
        "<e> ::= sum((x <c> <v>) != (y <c> <w>))\n<c> ::= < | >=\n<v> ::= range(0, 3, 1)\n<w> ::= range(0, 3, 1)"
    )
    rng = np.random.default_rng(11)
    x = rng.uniform(0, 3, 60)
    y = np.where(x < 2, 0.5, 2.5) + rng.normal(0, 0.8, 60)
    return g, Dataset({"x": x, "y": y})


def test_finds_global_minimum_of_small_space():
    g, d = _toy_problem()
    phenotypes = enumerate_phenotypes(g)
    assert len(phenotypes) == 64
    oracle = min(eval_aggregate(parse_tokens(p), d) for p in phenotypes)
    res = evolve(g, CostFunction("identity"), d, EvolutionConfig(iterations=2000, seed=0))
    assert res.best_cost == oracle


def test_elitism_and_seed_determinism():
    g, d = _toy_problem()
    cfg = EvolutionConfig(iterations=200, seed=5)
    a = evolve(g, CostFunction("identity"), d, cfg)
    b = evolve(g, CostFunction("identity"), d, cfg)
    assert a.best_genome == b.best_genome and a.cost_history == b.cost_history
    hist = np.array(a.cost_history)
    assert np.all(np.diff(hist) <= 0)
    assert math.isfinite(hist[-1])
