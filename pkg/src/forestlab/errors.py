"""Exception taxonomy shared across the package.

Every error raised on purpose is one of these, so callers (and the CLI exit
code mapping) can tell bad inputs apart from blown budgets and from numerical
failures.
"""


class ForestLabError(Exception):
    """Base class for all deliberate errors."""


class DomainError(ForestLabError, ValueError):
    """Input outside an operation's domain (bad dimension, empty root set, ...)."""


class BudgetError(ForestLabError, RuntimeError):
    """A configured resource budget would be exceeded.

    Carries what was requested and what the budget allows.
    """

    def __init__(self, kind: str, requested, allowed):
        self.kind = kind
        self.requested = requested
        self.allowed = allowed
        super().__init__(f"{kind} budget exceeded: requested {requested}, budget {allowed}")


class ConfigError(ForestLabError, ValueError):
    """An experiment config failed validation; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid config field '{field}': {message}")


class ContractError(ForestLabError, RuntimeError):
    """An internal invariant that should be unbreakable was broken."""


class SolverError(ForestLabError, RuntimeError):
    """A linear solve failed to reach the required residual."""


class StatisticalError(ForestLabError, RuntimeError):
    """A statistical harness was asked for a test its sample sizes cannot support."""
