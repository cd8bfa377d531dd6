"""Expression trees produced by the grammar mapper, and their evaluation.

An expression is a small immutable tree.  Real-valued nodes are ``Const``,
``Var``, ``Binary`` and ``IfElse``; boolean nodes are ``Compare`` and
``NotEqual``.  ``SumOver`` wraps a boolean and counts the rows where it
holds; it is only legal at the root.

Expressions are evaluated column-wise with numpy: ``evaluate`` returns one
value per dataset row.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ExprSyntaxError, TypeMismatch, UnknownColumn, ZeroVariance

ARITH_OPS = {"+": np.add, "-": np.subtract, "*": np.multiply}
COMPARE_OPS = {
    "<": operator.lt,
    ">": operator.gt,
    "<=": operator.le,
    ">=": operator.ge,
}
NEGATED = {"<": ">=", ">=": "<", ">": "<=", "<=": ">"}
MIRRORED = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named numeric columns of equal length.

    ``standardization`` maps a column name to the ``(mean, sd)`` used to
    standardize it, so original units can be recovered.
    """

    columns: Mapping[str, np.ndarray]
    standardization: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        cols = {}
        n = None
        for name, values in self.columns.items():
            arr = np.array(values, dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"column {name!r} must be one-dimensional")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise ValueError("all columns must have the same length")
            if np.isnan(arr).any():
                raise ValueError(f"column {name!r} has missing values")
            arr.flags.writeable = False
            cols[name] = arr
        for name, (_, sd) in self.standardization.items():
            if not sd > 0:
                raise ZeroVariance(f"column {name!r} recorded with sd={sd}")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "standardization", dict(self.standardization))

    @property
    def n(self) -> int:
        return next(iter(self.columns.values())).shape[0] if self.columns else 0

    @property
    def names(self) -> list:
        return list(self.columns)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownColumn(f"unknown column {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            list(self.columns) == list(other.columns)
            and all(np.array_equal(self.columns[k], other.columns[k]) for k in self.columns)
            and self.standardization == other.standardization
        )

    def original(self, name: str) -> np.ndarray:
        """Column values in original units."""
        values = self[name]
        if name in self.standardization:
            mean, sd = self.standardization[name]
            return values * sd + mean
        return values

    def subset(self, rows) -> "Dataset":
        return Dataset({k: v[rows] for k, v in self.columns.items()}, self.standardization)

    def with_columns(self, **new) -> "Dataset":
        cols = dict(self.columns)
        cols.update(new)
        return Dataset(cols, self.standardization)

    def select(self, names: Sequence[str]) -> "Dataset":
        cols = {k: self[k] for k in names}
        std = {k: v for k, v in self.standardization.items() if k in cols}
        return Dataset(cols, std)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self[k] for k in names]) if names else np.empty((self.n, 0))


def standardize(data: Dataset, columns: Sequence[str]) -> Dataset:
    """Replace each selected column by its z-score (population sd).

    Columns that are already standardized are rescaled relative to their
    current values, and the recorded transform composes with the previous
    one so ``destandardize`` still returns the original units.
    """
    cols = dict(data.columns)
    record = dict(data.standardization)
    for name in columns:
        values = data[name]
        mean = float(values.mean())
        sd = float(values.std())
        if not sd > 0:
            raise ZeroVariance(f"column {name!r} is constant")
        cols[name] = (values - mean) / sd
        if name in record:
            m0, s0 = record[name]
            record[name] = (m0 + s0 * mean, s0 * sd)
        else:
            record[name] = (mean, sd)
    return Dataset(cols, record)


def destandardize(data: Dataset) -> Dataset:
    cols = {name: data.original(name) for name in data.columns}
    return Dataset(cols)


def apply_standardization(data: Dataset, record: Mapping[str, tuple]) -> Dataset:
    """Standardize ``data`` with an externally supplied (mean, sd) record."""
    cols = dict(data.columns)
    std = dict(data.standardization)
    for name, (mean, sd) in record.items():
        if name in cols:
            cols[name] = (data[name] - mean) / sd
            std[name] = (mean, sd)
    return Dataset(cols, std)


# ---------------------------------------------------------------------------
# expression nodes


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self):
        return _fmt(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Binary:
    op: str
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self):
        return f"({self.lhs} {self.op} {self.rhs})"


@dataclass(frozen=True)
class Compare:
    op: str
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self):
        return f"({self.lhs} {self.op} {self.rhs})"


@dataclass(frozen=True)
class NotEqual:
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self):
        return f"({self.lhs} != {self.rhs})"


@dataclass(frozen=True)
class IfElse:
    cond: "Expr"
    then: "Expr"
    other: "Expr"

    def __str__(self):
        return f"ifelse({self.cond}, {self.then}, {self.other})"


@dataclass(frozen=True)
class SumOver:
    arg: "Expr"

    def __str__(self):
        return f"sum({self.arg})"


Expr = Union[Const, Var, Binary, Compare, NotEqual, IfElse, SumOver]

REAL, BOOL = "real", "bool"


def _fmt(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def kind(e: Expr, *, root: bool = True) -> str:
    """Type-check ``e`` and return ``"real"`` or ``"bool"``."""
    if isinstance(e, (Const, Var)):
        return REAL
    if isinstance(e, Binary):
        if e.op not in ARITH_OPS:
            raise TypeMismatch(f"unknown arithmetic operator {e.op!r}")
        if kind(e.lhs, root=False) != REAL or kind(e.rhs, root=False) != REAL:
            raise TypeMismatch(f"arithmetic on booleans in {e}")
        return REAL
    if isinstance(e, Compare):
        if e.op not in COMPARE_OPS:
            raise TypeMismatch(f"unknown comparison {e.op!r}")
        if kind(e.lhs, root=False) != REAL or kind(e.rhs, root=False) != REAL:
            raise TypeMismatch(f"comparison of booleans in {e}")
        return BOOL
    if isinstance(e, NotEqual):
        if kind(e.lhs, root=False) != BOOL or kind(e.rhs, root=False) != BOOL:
            raise TypeMismatch(f"'!=' needs boolean operands in {e}")
        return BOOL
    if isinstance(e, IfElse):
        if kind(e.cond, root=False) != BOOL:
            raise TypeMismatch(f"ifelse condition must be boolean in {e}")
        a, b = kind(e.then, root=False), kind(e.other, root=False)
        if a != b:
            raise TypeMismatch(f"ifelse branches disagree in {e}")
        return a
    if isinstance(e, SumOver):
        if not root:
            raise TypeMismatch("sum(...) is only allowed at the root")
        if kind(e.arg, root=False) != BOOL:
            raise TypeMismatch("sum(...) needs a boolean argument")
        return REAL
    raise TypeMismatch(f"not an expression node: {e!r}")


def variables(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Binary, Compare, NotEqual)):
        return variables(e.lhs) | variables(e.rhs)
    if isinstance(e, IfElse):
        return variables(e.cond) | variables(e.then) | variables(e.other)
    if isinstance(e, SumOver):
        return variables(e.arg)
    raise TypeMismatch(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


def _columns(data) -> Mapping[str, np.ndarray]:
    return data.columns if isinstance(data, Dataset) else data


def _n_rows(cols) -> int:
    for v in cols.values():
        return np.shape(v)[0]
    return 1


def _eval(e: Expr, cols, n):
    if isinstance(e, Const):
        return np.full(n, e.value, dtype=float)
    if isinstance(e, Var):
        try:
            return np.asarray(cols[e.name], dtype=float)
        except KeyError:
            raise UnknownColumn(f"unknown column {e.name!r}") from None
    if isinstance(e, Binary):
        return ARITH_OPS[e.op](_eval(e.lhs, cols, n), _eval(e.rhs, cols, n))
    if isinstance(e, Compare):
        return COMPARE_OPS[e.op](_eval(e.lhs, cols, n), _eval(e.rhs, cols, n))
    if isinstance(e, NotEqual):
        return np.logical_xor(_eval(e.lhs, cols, n), _eval(e.rhs, cols, n))
    if isinstance(e, IfElse):
        return np.where(_eval(e.cond, cols, n), _eval(e.then, cols, n), _eval(e.other, cols, n))
    raise TypeMismatch(f"cannot evaluate {type(e).__name__} row-wise")


def evaluate(e: Expr, data) -> np.ndarray:
    """Row-wise values of a non-aggregate expression, one per row."""
    if isinstance(e, SumOver):
        raise TypeMismatch("sum(...) is an aggregate; use eval_aggregate")
    kind(e)
    cols = _columns(data)
    return _eval(e, cols, _n_rows(cols))


def eval_row(e: Expr, data: Dataset, row: int):
    """Value of ``e`` at a single row: a float or a bool."""
    if not 0 <= row < data.n:
        raise IndexError(f"row {row} out of range for {data.n} rows")
    if isinstance(e, SumOver):
        raise TypeMismatch("sum(...) is an aggregate; use eval_aggregate")
    k = kind(e)
    cols = {name: data.columns[name][row : row + 1] for name in data.columns}
    value = _eval(e, cols, 1)[0]
    return bool(value) if k == BOOL else float(value)


def eval_aggregate(e: Expr, data: Dataset):
    """Count of rows satisfying a ``SumOver`` root.

    For other roots the row values are returned as an array and the caller
    reduces them.
    """
    if isinstance(e, SumOver):
        kind(e)
        cols = _columns(data)
        return float(np.count_nonzero(_eval(e.arg, cols, _n_rows(cols))))
    return evaluate(e, data)


# ---------------------------------------------------------------------------
# text syntax

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|!=|[<>+\-*(),])"
    r")"
)


def tokenize(text: str) -> list:
    """Split expression text into tokens.

    A ``-`` directly followed by a number is folded into a negative literal
    when it cannot be a binary minus (at the start, or after an operator,
    comma or opening parenthesis).
    """
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos:pos + 1]!r} at {pos}")
        pos = m.end()
        tok = m.group("num") or m.group("ident") or m.group("op")
        if m.group("num") and tokens and tokens[-1] == "-" and _unary_slot(tokens[:-1]):
            tokens[-1] = "-" + tok
        else:
            tokens.append(tok)
    return tokens


def _unary_slot(preceding) -> bool:
    if not preceding:
        return True
    prev = preceding[-1]
    return prev in ("(", ",") or prev in COMPARE_OPS or prev in ARITH_OPS or prev == "!="


def is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return tok not in ("nan", "inf", "infinity") and tok[0] in "-.0123456789"


class _Parser:
    def __init__(self, tokens):
        self.tokens = list(tokens)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression")
        if expected is not None and tok != expected:
            raise ExprSyntaxError(f"expected {expected!r}, got {tok!r}")
        self.i += 1
        return tok

    def parse(self):
        e = self.ne()
        if self.peek() is not None:
            raise ExprSyntaxError(f"trailing tokens starting at {self.peek()!r}")
        return e

    def ne(self):
        e = self.cmp()
        while self.peek() == "!=":
            self.take()
            e = NotEqual(e, self.cmp())
        return e

    def cmp(self):
        e = self.add()
        if self.peek() in COMPARE_OPS:
            op = self.take()
            e = Compare(op, e, self.add())
        return e

    def add(self):
        e = self.mul()
        while self.peek() in ("+", "-"):
            op = self.take()
            e = Binary(op, e, self.mul())
        return e

    def mul(self):
        e = self.unary()
        while self.peek() == "*":
            self.take()
            e = Binary("*", e, self.unary())
        return e

    def unary(self):
        if self.peek() == "-":
            self.take()
            inner = self.unary()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Binary("*", Const(-1.0), inner)
        return self.primary()

    def primary(self):
        tok = self.take()
        if tok == "(":
            e = self.ne()
            self.take(")")
            return e
        if tok == "sum":
            self.take("(")
            e = self.ne()
            self.take(")")
            return SumOver(e)
        if tok == "ifelse":
            self.take("(")
            cond = self.ne()
            self.take(",")
            then = self.ne()
            self.take(",")
            other = self.ne()
            self.take(")")
            return IfElse(cond, then, other)
        if is_number(tok):
            return Const(float(tok))
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            return Var(tok)
        raise ExprSyntaxError(f"unexpected token {tok!r}")


def parse_tokens(tokens: Sequence[str]) -> Expr:
    """Build a type-checked expression from a token sequence."""
    e = _Parser(tokens).parse()
    kind(e)
    return e


def parse_expr(text: str) -> Expr:
    return parse_tokens(tokenize(text))
