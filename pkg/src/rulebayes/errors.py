"""Exception hierarchy shared across the package."""


class RuleBayesError(Exception):
    """Base class for all package errors."""


# grammar / mapping
class GrammarError(RuleBayesError, ValueError):
    pass


class GrammarSyntaxError(GrammarError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class UndefinedSymbol(GrammarError):
    pass


class EmptyProduction(GrammarError):
    pass


class MappingIncomplete(RuleBayesError):
    """Non-terminals remain after the allowed number of genome wraps."""


# expressions / datasets
class ExprSyntaxError(RuleBayesError, ValueError):
    pass


class TypeMismatch(RuleBayesError, TypeError):
    pass


class UnknownColumn(RuleBayesError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ZeroVariance(RuleBayesError, ValueError):
    pass


# evolution / rules
class AllInvalid(RuleBayesError):
    """Every individual of every generation failed to map."""


class UnrecognizedShape(RuleBayesError, ValueError):
    pass


class EmptyGrid(RuleBayesError, ValueError):
    pass


# bayes / likelihoods
class DimensionMismatch(RuleBayesError, ValueError):
    pass


class UnsupportedVariantModelPair(RuleBayesError, ValueError):
    pass


class InvalidInit(RuleBayesError, ValueError):
    pass


class NonFiniteTarget(RuleBayesError, FloatingPointError):
    pass


class EmptyTrace(RuleBayesError, ValueError):
    pass


class OutOfDomain(RuleBayesError, ValueError):
    pass


# data
class UnstableConfig(RuleBayesError):
    pass


class MissingColumn(RuleBayesError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NonNumericCell(RuleBayesError, ValueError):
    def __init__(self, row, column, value):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"non-numeric cell at row {row}, column {column!r}: {value!r}")


class SingleClass(RuleBayesError, ValueError):
    pass


# metrics
class LengthMismatch(RuleBayesError, ValueError):
    pass


class SingleDraw(RuleBayesError, ValueError):
    pass


class NoPositives(RuleBayesError, ValueError):
    pass


# cli
class ConfigError(RuleBayesError):
    pass
