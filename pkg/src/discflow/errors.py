"""Exception types raised by discflow."""

from __future__ import annotations


class DiscflowError(Exception):
    """Base class for all package errors."""


class InvalidFunction(DiscflowError):
    """A right-hand side failed validation; carries the report."""

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class QuadratureNonConvergence(DiscflowError):
    """An adaptive integral could neither converge nor be shown divergent."""


class UnresolvedZero(DiscflowError):
    """A zero of a custom piece could not be located or certified."""


class OutsideDomain(DiscflowError):
    """The requested points do not lie in a common monotone interval."""


class PhiMissing(DiscflowError):
    """A branch point has no deterministic direction assigned."""


class ThetaMissing(DiscflowError):
    """A branch point has no branching probability assigned."""


class NotConverged(DiscflowError):
    """A sequence of paths does not contract towards its limit."""


class SpecError(DiscflowError):
    """Base class for problem-file errors; names the offending key and rule."""

    def __init__(self, key: str, rule: str, message: str = ""):
        self.key = key
        self.rule = rule
        text = f"{key}: {rule}"
        if message:
            text += f" ({message})"
        super().__init__(text)


class SchemaError(SpecError):
    """Problem file does not match the schema."""


class SemanticError(SpecError):
    """Problem file is well-formed but violates a consistency rule."""
