"""IF-THEN rule bases: extraction from evolved expressions, violation checks
and a plain-text serialization.

A rule base is a conjunction of rules, each with a single-column threshold
antecedent and one consequent on the model output(s).  Thresholds are kept in
original data units; ``scales`` records how the evolved expression's
standardized units map back.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import EmptyGrid, UnknownColumn, UnrecognizedShape
from .expr import (
    COMPARE_OPS,
    MIRRORED,
    NEGATED,
    Compare,
    Const,
    Dataset,
    IfElse,
    NotEqual,
    SumOver,
    Var,
    evaluate,
    parse_expr,
)

DEFAULT_DISCRETIZATION = 100


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class Antecedent:
    column: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in COMPARE_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def holds(self, values):
        return COMPARE_OPS[self.op](np.asarray(values), self.threshold)

    def negated(self) -> "Antecedent":
        return Antecedent(self.column, NEGATED[self.op], self.threshold)

    def __str__(self):
        return f"{self.column} {self.op} {self.threshold!r}"


@dataclass(frozen=True)
class OutputCompare:
    output: str
    op: str
    threshold: float

    def __str__(self):
        return f"{self.output} {self.op} {self.threshold!r}"


@dataclass(frozen=True)
class OutputOrder:
    left: str
    op: str
    right: str

    def __str__(self):
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class OutputFormula:
    expr: object
    output: str = "y"

    def __str__(self):
        return f"{self.output}' = {self.expr}"


@dataclass(frozen=True)
class ClassLabel:
    label: int
    output: str = "y"

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("class label must be 0 or 1")

    def __str__(self):
        return f"{self.output} = {self.label}"


Consequent = Union[OutputCompare, OutputOrder, OutputFormula, ClassLabel]


@dataclass(frozen=True)
class Rule:
    antecedent: Antecedent
    consequent: Consequent

    def __str__(self):
        return f"IF {self.antecedent} THEN {self.consequent}"


@dataclass(frozen=True)
class Proportion:
    a: float = 1.0
    b: float = 100.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta parameters must be positive")


@dataclass(frozen=True)
class TotalDistance:
    lam: float = 10.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("Exponential rate must be positive")


@dataclass(frozen=True)
class Piecewise:
    sigma_r: float = 0.1
    theta_mode: str = "current"  # or "empirical"

    def __post_init__(self):
        if not self.sigma_r > 0:
            raise ValueError("sigma_r must be positive")
        if self.theta_mode not in ("current", "empirical"):
            raise ValueError("theta_mode must be 'current' or 'empirical'")


Variant = Union[Proportion, TotalDistance, Piecewise]


@dataclass(frozen=True)
class RuleBase:
    """Conjunction (AND) of rules plus the penalty variant they feed.

    ``formula_tolerance`` only matters when formula rules are scored by
    proportion or distance: a prediction further than this from the rule
    output counts as a violation.
    """

    rules: tuple
    variant: Variant = field(default_factory=Proportion)
    discretization_n: int = DEFAULT_DISCRETIZATION
    scales: tuple = ()  # ((column, mean, sd), ...)
    formula_tolerance: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "scales", tuple(tuple(s) for s in self.scales))
        if not self.rules:
            raise ValueError("a rule base needs at least one rule")
        if self.discretization_n < 1:
            raise ValueError("discretization_n must be positive")

    @property
    def scale_map(self) -> dict:
        return {c: (m, s) for c, m, s in self.scales}

    @property
    def input_columns(self) -> list:
        return sorted({r.antecedent.column for r in self.rules})

    def with_variant(self, variant: Variant) -> "RuleBase":
        return RuleBase(self.rules, variant, self.discretization_n, self.scales, self.formula_tolerance)

    def to_text(self) -> str:
        return dumps(self)

    def __str__(self):
        return dumps(self)


@dataclass(frozen=True, eq=False)
class RuleInputGrid:
    """Discretized rule inputs: ``n`` points per rule antecedent segment."""

    column: str
    points: np.ndarray
    rule_index: np.ndarray

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# extraction


def _threshold_compare(c):
    """Return (column, op, value) for ``Var op Const`` or ``Const op Var``."""
    if not isinstance(c, Compare):
        return None
    if isinstance(c.lhs, Var) and isinstance(c.rhs, Const):
        return c.lhs.name, c.op, c.rhs.value
    if isinstance(c.lhs, Const) and isinstance(c.rhs, Var):
        return c.rhs.name, MIRRORED[c.op], c.lhs.value
    return None


def _consequent_from(c, scales):
    tc = _threshold_compare(c)
    if tc is not None:
        col, op, value = tc
        return OutputCompare(col, op, _to_original(col, value, scales))
    if isinstance(c, Compare) and isinstance(c.lhs, Var) and isinstance(c.rhs, Var):
        return OutputOrder(c.lhs.name, c.op, c.rhs.name)
    return None


def _negate_consequent(c):
    if isinstance(c, OutputCompare):
        return OutputCompare(c.output, NEGATED[c.op], c.threshold)
    return OutputOrder(c.left, NEGATED[c.op], c.right)


def _to_original(col, value, scales):
    if col in scales:
        mean, sd = scales[col]
        return float(value) * sd + mean
    return float(value)


def _boundary_rules(cond, scales):
    if not isinstance(cond, NotEqual):
        return None
    ante = _threshold_compare(cond.lhs)
    cons = _consequent_from(cond.rhs, scales)
    if ante is None or cons is None:
        return None
    col, op, value = ante
    outs = (cons.left, cons.right) if isinstance(cons, OutputOrder) else (cons.output,)
    if col in outs:
        return None  # consequent must constrain an output, not the rule input
    first = Antecedent(col, op, _to_original(col, value, scales))
    # (A != C) counts violations, so the rules are A -> C and not A -> not C.
    return [Rule(first, cons), Rule(first.negated(), _negate_consequent(cons))]


def extract_rules(
    e,
    variant: Variant,
    *,
    scales: Optional[Mapping[str, tuple]] = None,
    output: str = "y",
    discretization_n: int = DEFAULT_DISCRETIZATION,
) -> RuleBase:
    """Turn an evolved expression into a rule base.

    Supported shapes:

    * ``sum((x op c) != (y op d))`` and ``sum((x op c) != (u1 op u2))``
    * ``ifelse((x op c) != (y op d), v, y)`` (distance form)
    * ``ifelse(x op c, f1, f2)`` with formula branches, or with constant
      0/1 branches for class labels

    ``scales`` maps standardized column names to ``(mean, sd)``; thresholds
    on those columns are converted back to original units.
    """
    scales = dict(scales or {})
    rules = None
    if isinstance(e, SumOver):
        rules = _boundary_rules(e.arg, scales)
    elif isinstance(e, IfElse):
        rules = _boundary_rules(e.cond, scales)
        if rules is None:
            ante = _threshold_compare(e.cond)
            if ante is not None:
                col, op, value = ante
                first = Antecedent(col, op, _to_original(col, value, scales))
                branches = (e.then, e.other)
                if all(isinstance(b, Const) and b.value in (0.0, 1.0) for b in branches):
                    cons = [ClassLabel(int(b.value), output) for b in branches]
                else:
                    cons = [OutputFormula(b, output) for b in branches]
                rules = [Rule(first, cons[0]), Rule(first.negated(), cons[1])]
    if rules is None:
        raise UnrecognizedShape(f"no rule template matches {e}")
    used = {r.antecedent.column for r in rules}
    for r in rules:
        if isinstance(r.consequent, OutputCompare):
            used.add(r.consequent.output)
        if isinstance(r.consequent, OutputFormula):
            used.add(r.consequent.output)
    kept = tuple((c, *scales[c]) for c in sorted(scales) if c in used or _formula_uses(rules, c))
    return RuleBase(tuple(rules), variant, discretization_n, kept)


def _formula_uses(rules, column):
    from .expr import variables

    return any(
        isinstance(r.consequent, OutputFormula) and column in variables(r.consequent.expr)
        for r in rules
    )


def combine(*bases: RuleBase) -> RuleBase:
    """Conjunction of several rule bases sharing the first one's variant."""
    rules = tuple(r for b in bases for r in b.rules)
    scales = {}
    for b in bases:
        scales.update(b.scale_map)
    first = bases[0]
    return RuleBase(
        rules,
        first.variant,
        first.discretization_n,
        tuple((c, *scales[c]) for c in sorted(scales)),
        first.formula_tolerance,
    )


# ---------------------------------------------------------------------------
# grids and violations


def _segment(op, threshold, lo, hi, n):
    c = min(max(threshold, lo), hi)
    if op == "<":
        return np.linspace(lo, c, n, endpoint=False) if c > lo else np.empty(0)
    if op == "<=":
        return np.linspace(lo, c, n) if threshold >= lo else np.empty(0)
    if op == ">=":
        return np.linspace(c, hi, n) if threshold <= hi else np.empty(0)
    # ">"
    return c + (hi - c) * np.arange(1, n + 1) / n if c < hi else np.empty(0)


def build_grid(rb: RuleBase, lo: float, hi: float, n: Optional[int] = None) -> RuleInputGrid:
    """``n`` equally spaced points inside each rule's antecedent region.

    Strict antecedents exclude the threshold itself, so a threshold point
    belongs to the rule whose antecedent uses ``<=`` or ``>=``.
    """
    if hi <= lo:
        raise EmptyGrid("grid upper limit must exceed the lower limit")
    n = rb.discretization_n if n is None else n
    columns = rb.input_columns
    if len(columns) != 1:
        raise ValueError(f"rule antecedents span several columns: {columns}")
    pts, idx = [], []
    for i, rule in enumerate(rb.rules):
        seg = _segment(rule.antecedent.op, rule.antecedent.threshold, lo, hi, n)
        pts.append(seg)
        idx.append(np.full(len(seg), i))
    points = np.concatenate(pts)
    if points.size == 0:
        raise EmptyGrid("no grid point falls inside any antecedent")
    return RuleInputGrid(columns[0], points, np.concatenate(idx))


def _as_outputs(outputs, rb):
    if isinstance(outputs, Mapping):
        return outputs
    names = set()
    for r in rb.rules:
        c = r.consequent
        names.update([c.left, c.right] if isinstance(c, OutputOrder) else [c.output])
    return {name: outputs for name in names}


def _rule_targets(rb: RuleBase, grid: RuleInputGrid):
    """Formula rule outputs at the grid points (model units)."""
    scales = rb.scale_map
    col = grid.column
    values = grid.points
    if col in scales:
        mean, sd = scales[col]
        values = (values - mean) / sd
    return {col: values}


def violations(rb: RuleBase, grid: RuleInputGrid, outputs):
    """Per-grid-point violation flags and distances to the rule boundary.

    ``outputs`` is either one array of predictions at the grid points or a
    mapping from output name to such arrays, in model units: outputs listed
    in ``rb.scales`` are standardized and get converted back before they are
    compared with a threshold consequent.
    """
    if len(grid) == 0:
        raise EmptyGrid("grid has no points")
    outs = _as_outputs(outputs, rb)
    scales = rb.scale_map
    bad = np.zeros(len(grid), dtype=bool)
    gap = np.zeros(len(grid))
    formula_inputs = None
    for i, rule in enumerate(rb.rules):
        sel = grid.rule_index == i
        if not sel.any():
            continue
        c = rule.consequent
        if isinstance(c, OutputCompare):
            y = np.asarray(outs[c.output])[sel]
            if c.output in scales:
                mean, sd = scales[c.output]
                y = y * sd + mean
            ok = COMPARE_OPS[c.op](y, c.threshold)
            d = np.abs(y - c.threshold)
        elif isinstance(c, OutputOrder):
            a = np.asarray(outs[c.left])[sel]
            b = np.asarray(outs[c.right])[sel]
            ok = COMPARE_OPS[c.op](a, b)
            d = np.abs(a - b)
        elif isinstance(c, ClassLabel):
            p = np.asarray(outs[c.output])[sel]
            ok = (p >= 0.5) == bool(c.label)
            d = np.abs(p - 0.5)
        else:
            if formula_inputs is None:
                formula_inputs = _rule_targets(rb, grid)
            target = evaluate(c.expr, {k: v[sel] for k, v in formula_inputs.items()})
            y = np.asarray(outs[c.output])[sel]
            d = np.abs(y - target)
            ok = d <= rb.formula_tolerance
            d = np.maximum(d - rb.formula_tolerance, 0.0)
        bad[sel] = ~ok
        gap[sel] = np.where(ok, 0.0, d)
    return bad, gap


def violation_proportion(rb: RuleBase, grid: RuleInputGrid, predict) -> float:
    """Fraction of grid points whose predicted output breaks its rule.

    ``predict`` maps the grid to outputs (see ``violations``); it may also be
    the outputs themselves.
    """
    outputs = predict(grid) if callable(predict) else predict
    bad, _ = violations(rb, grid, outputs)
    return float(np.count_nonzero(bad)) / len(grid)


def violation_distance(rb: RuleBase, grid: RuleInputGrid, predict) -> float:
    """Summed distance of violating predictions from their rule boundary."""
    outputs = predict(grid) if callable(predict) else predict
    bad, gap = violations(rb, grid, outputs)
    return float(gap[bad].sum())


def rule_outputs(rb: RuleBase, data: Dataset) -> np.ndarray:
    """Rule-output values y' per row.

    Rows are routed by the antecedents (compared in original units) and each
    formula is evaluated on the columns as stored in ``data``.
    """
    out = np.full(data.n, np.nan)
    assigned = np.zeros(data.n, dtype=bool)
    for rule in rb.rules:
        c = rule.consequent
        if not isinstance(c, (OutputFormula, ClassLabel, OutputCompare)):
            continue
        col = rule.antecedent.column
        if col not in data:
            raise UnknownColumn(f"unknown column {col!r}")
        rows = rule.antecedent.holds(data.original(col)) & ~assigned
        if isinstance(c, OutputFormula):
            values = evaluate(c.expr, data)
        elif isinstance(c, ClassLabel):
            values = np.full(data.n, float(c.label))
        else:
            values = np.full(data.n, c.threshold)
        out[rows] = values[rows]
        assigned |= rows
    return out


# ---------------------------------------------------------------------------
# text format

_LINE = re.compile(r"^IF\s+(\S+)\s+(<=|>=|<|>)\s+(\S+)\s+THEN\s+(.+)$")


def dumps(rb: RuleBase) -> str:
    lines = [str(rule) for rule in rb.rules]
    v = rb.variant
    if isinstance(v, Proportion):
        lines.append(f"VARIANT proportion a={v.a!r} b={v.b!r}")
    elif isinstance(v, TotalDistance):
        lines.append(f"VARIANT distance lambda={v.lam!r}")
    else:
        lines.append(f"VARIANT piecewise sigma_r={v.sigma_r!r} theta={v.theta_mode}")
    lines.append(f"DISCRETIZATION {rb.discretization_n}")
    lines.append(f"TOLERANCE {rb.formula_tolerance!r}")
    for col, mean, sd in rb.scales:
        lines.append(f"SCALE {col} mean={mean!r} sd={sd!r}")
    return "\n".join(lines) + "\n"


def _parse_consequent(text):
    text = text.strip()
    m = re.fullmatch(r"(\w+)'\s*=\s*(.+)", text)
    if m:
        return OutputFormula(parse_expr(m.group(2)), m.group(1))
    m = re.fullmatch(r"(\w+)\s*=\s*([01])", text)
    if m:
        return ClassLabel(int(m.group(2)), m.group(1))
    m = re.fullmatch(r"(\w+)\s+(<=|>=|<|>)\s+(\S+)", text)
    if m:
        out, op, rhs = m.groups()
        try:
            return OutputCompare(out, op, float(rhs))
        except ValueError:
            return OutputOrder(out, op, rhs)
    raise ValueError(f"cannot parse consequent {text!r}")


def _keyvals(parts):
    return dict(p.split("=", 1) for p in parts)


def loads(text: str) -> RuleBase:
    rules, variant, n, tol, scales = [], Proportion(), DEFAULT_DISCRETIZATION, 0.1, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("IF "):
            m = _LINE.match(line)
            if m is None:
                raise ValueError(f"line {lineno}: malformed rule {line!r}")
            col, op, thr, cons = m.groups()
            rules.append(Rule(Antecedent(col, op, float(thr)), _parse_consequent(cons)))
            continue
        head, *rest = line.split()
        if head == "VARIANT":
            kind_, kv = rest[0], _keyvals(rest[1:])
            if kind_ == "proportion":
                variant = Proportion(float(kv["a"]), float(kv["b"]))
            elif kind_ == "distance":
                variant = TotalDistance(float(kv["lambda"]))
            elif kind_ == "piecewise":
                variant = Piecewise(float(kv["sigma_r"]), kv.get("theta", "current"))
            else:
                raise ValueError(f"line {lineno}: unknown variant {kind_!r}")
        elif head == "DISCRETIZATION":
            n = int(rest[0])
        elif head == "TOLERANCE":
            tol = float(rest[0])
        elif head == "SCALE":
            kv = _keyvals(rest[1:])
            scales.append((rest[0], float(kv["mean"]), float(kv["sd"])))
        else:
            raise ValueError(f"line {lineno}: unknown directive {head!r}")
    return RuleBase(tuple(rules), variant, n, tuple(scales), tol)


def load(path) -> RuleBase:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
