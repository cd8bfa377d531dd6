"""Evolution strategy over integer genomes for grammatical evolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AllInvalid, MappingIncomplete, TypeMismatch
from .expr import Dataset, SumOver, eval_aggregate, evaluate, kind, parse_tokens
from .grammar import DEFAULT_MAX_WRAPS, Grammar, derive

CODON_MAX = 2**16
DEFAULT_GENOME_LENGTH = 64

IDENTITY = "identity"
RSS = "rss"
DISTANCE_SUM = "distance"
MISCLASSIFICATION = "misclassification"
COST_TAGS = (IDENTITY, RSS, DISTANCE_SUM, MISCLASSIFICATION)


@dataclass(frozen=True)
class CostFunction:
    """What the evolution minimises.

    ``identity`` uses the value of a ``sum(...)`` expression directly;
    ``rss`` and ``distance`` are residual sums of squares against ``target``;
    ``misclassification`` counts rows whose rounded prediction differs from
    ``target``.
    """

    tag: str
    target: Optional[str] = None

    def __post_init__(self):
        if self.tag not in COST_TAGS:
            raise ValueError(f"unknown cost function {self.tag!r}")
        if self.tag != IDENTITY and not self.target:
            raise ValueError(f"cost function {self.tag!r} needs a target column")


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 8
    random_individual_fraction: float = 0.25
    mutation_chance: Optional[float] = None  # None -> 10 / (1 + genome_length)
    iterations: int = 10_000
    genome_length: int = DEFAULT_GENOME_LENGTH
    max_wraps: int = DEFAULT_MAX_WRAPS
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 0.0 <= self.random_individual_fraction <= 1.0:
            raise ValueError("random_individual_fraction must lie in [0, 1]")
        if self.mutation_chance is not None and not 0.0 <= self.mutation_chance <= 1.0:
            raise ValueError("mutation_chance must lie in [0, 1]")
        if self.iterations < 1 or self.genome_length < 1 or self.max_wraps < 0:
            raise ValueError("iterations and genome_length must be positive")

    @property
    def effective_mutation_chance(self) -> float:
        if self.mutation_chance is not None:
            return self.mutation_chance
        return min(1.0, 10.0 / (1.0 + self.genome_length))


@dataclass
class EvolutionResult:
    best_genome: tuple
    best_expr: object
    best_cost: float
    cost_history: list = field(default_factory=list)

    @property
    def phenotype(self) -> str:
        return str(self.best_expr)


def evaluate_cost(f: CostFunction, e, data: Dataset) -> float:
    """Cost of expression ``e`` on ``data``; non-finite results cost +inf."""
    if f.tag == IDENTITY:
        if not isinstance(e, SumOver):
            raise TypeMismatch("identity cost needs a sum(...) expression")
        cost = eval_aggregate(e, data)
    else:
        if isinstance(e, SumOver):
            raise TypeMismatch(f"{f.tag} cost needs a row-valued expression")
        values = evaluate(e, data)
        target = data[f.target]
        if f.tag == MISCLASSIFICATION:
            predicted = (np.asarray(values, dtype=float) >= 0.5).astype(float)
            cost = float(np.count_nonzero(predicted != target))
        else:
            if kind(e) != "real":
                raise TypeMismatch(f"{f.tag} cost needs a real-valued expression")
            cost = float(np.sum((target - values) ** 2))
    return cost if math.isfinite(cost) else math.inf


class _Scorer:
    """Maps genomes and caches costs per phenotype."""

    def __init__(self, g, f, data, max_wraps):
        self.g, self.f, self.data, self.max_wraps = g, f, data, max_wraps
        self.cache = {}

    def __call__(self, genome):
        try:
            tokens, _ = derive(self.g, genome, self.max_wraps)
        except MappingIncomplete:
            return math.inf, None
        hit = self.cache.get(tokens)
        if hit is None:
            e = parse_tokens(tokens)
            hit = (evaluate_cost(self.f, e, self.data), e)
            self.cache[tokens] = hit
        return hit


def evolve(g: Grammar, f: CostFunction, data: Dataset, cfg: EvolutionConfig) -> EvolutionResult:
    """Minimise ``f`` over expressions of ``g``.

    Each generation keeps the best individual found so far, draws a fraction
    of fresh random genomes and fills the rest with mutants of parents picked
    uniformly from the best half of the current population.  Ties go to the
    individual found first.
    """
    rng = np.random.default_rng(cfg.seed)
    size, length = cfg.population_size, cfg.genome_length
    n_random = int(round(cfg.random_individual_fraction * size))
    n_random = min(n_random, size - 1)
    n_parents = math.ceil(size / 2)
    p_mut = cfg.effective_mutation_chance
    score = _Scorer(g, f, data, cfg.max_wraps)

    best_genome, best_expr, best_cost = None, None, math.inf
    history = []
    population = rng.integers(0, CODON_MAX, size=(size, length))
    for gen in range(cfg.iterations):
        if gen > 0:
            order = np.argsort(costs, kind="stable")
            parents = population[order[:n_parents]]
            children = [np.array(best_genome if best_genome is not None else population[order[0]])]
            children.extend(rng.integers(0, CODON_MAX, size=(n_random, length)))
            for _ in range(size - len(children)):
                child = parents[rng.integers(n_parents)].copy()
                mask = rng.random(length) < p_mut
                child[mask] = rng.integers(0, CODON_MAX, size=int(mask.sum()))
                children.append(child)
            population = np.array(children)
        scored = [score(genome) for genome in population]
        costs = np.array([c for c, _ in scored])
        for genome, (cost, e) in zip(population, scored):
            if cost < best_cost or (best_genome is None and e is not None):
                best_genome, best_expr, best_cost = genome.copy(), e, cost
        history.append(best_cost)

    if best_genome is None:
        raise AllInvalid(
            "no individual mapped to a complete expression; "
            "increase genome_length or max_wraps"
        )
    return EvolutionResult(tuple(int(c) for c in best_genome), best_expr, best_cost, history)
