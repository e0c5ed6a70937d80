"""Exception hierarchy shared across the package.

Every error raised on purpose derives from SimlabError so callers (and the
CLI) can separate expected failures from bugs.
"""
from __future__ import annotations


class SimlabError(Exception):
    """Base class for all package errors."""


# --- linear algebra / graph construction ---

class SingularSystem(SimlabError):
    """L+B is numerically singular: a follower is unreachable or the pinning is invalid."""


class DimensionMismatch(SimlabError):
    """Array shapes inconsistent with the configured topology/order."""


class SolveFailure(SimlabError):
    """A linear solve that should be well posed failed."""


# --- sliding-surface design ---

class NonPositiveRoot(SimlabError):
    """Surface roots must be strictly positive."""


class NotHurwitz(SimlabError):
    """Surface polynomial has a root with nonnegative real part."""


# --- barrier function ---

class NonPDWeight(SimlabError):
    """Weighted norm evaluated with a matrix that is not positive definite."""


class DomainExceeded(SimlabError):
    """Barrier argument reached or passed the bound mu."""

    def __init__(self, z: float, mu: float, message: str | None = None):
        self.z = float(z)
        self.mu = float(mu)
        super().__init__(message or f"barrier argument {z!r} outside domain [0, {mu!r})")


# --- adaptation ---

class BoundViolated(SimlabError):
    """The inner-update magnitude bound failed at some sliding value."""

    def __init__(self, r: float, message: str | None = None):
        self.r = float(r)
        super().__init__(message or f"update-magnitude bound violated at r={r!r}")


class MissingBound(SimlabError):
    """A required bound estimate was not supplied."""


class ZeroRowGain(SimlabError):
    """An agent has d_i + b_i = 0: no incoming information, topology invalid."""


# --- expression parsing / evaluation ---

class ExprSyntaxError(SimlabError):
    """Malformed dynamics expression; carries the offending position."""

    def __init__(self, message: str, pos: int):
        self.pos = int(pos)
        super().__init__(f"{message} (at position {pos})")


class UnknownVariable(ExprSyntaxError):
    """Variable name outside x1..xM / x01..x0M / t."""


class UnknownFunction(ExprSyntaxError):
    """Function name outside the supported set."""


class EvalError(SimlabError):
    """Expression evaluation hit a numeric fault (division by zero, domain, overflow)."""


# --- simulation ---

class BarrierBreach(SimlabError):
    """||r||_P reached mu during integration; the run is aborted."""

    def __init__(self, t: float, norm: float, mu: float, trace=None):
        self.t = float(t)
        self.norm = float(norm)
        self.mu = float(mu)
        self.trace = trace if trace is not None else []
        super().__init__(f"barrier breached at t={t:.6g}: ||r||_P={norm:.6g} >= mu={mu:.6g}")


class InitialBarrierViolation(SimlabError):
    """||r(0)||_P >= mu: the run is refused before stepping."""


class NumericOverflow(SimlabError):
    """A state component became non-finite during integration."""


# --- configuration / CLI ---

class ConfigError(SimlabError):
    """Base class for scenario-file problems."""


class ParseError(ConfigError):
    """Scenario file could not be parsed; carries line/column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")


class ValidationError(ConfigError):
    """A scenario violates a module invariant; the message names the invariant."""

    def __init__(self, invariant: str, detail: str):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}")


class IoError(SimlabError):
    """Output emission failed."""
