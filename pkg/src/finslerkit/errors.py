"""Exception hierarchy with stable machine-readable codes.

Every error carries a ``code`` string that the CLI emits verbatim, so
scripts can dispatch on failures without parsing human text.  Codes in
``DOMAIN_CODES`` map to exit status 2 (the request asked for something
outside a metric's domain or was malformed); everything else numeric
maps to exit status 3.
"""

from __future__ import annotations


class FinslerError(Exception):
    """Base class for all library errors."""

    code = "error"


class NonFiniteSample(FinslerError):
    """A probed function value was NaN/inf (too close to a domain boundary)."""

    code = "non_finite_sample"


class NoBracket(FinslerError):
    """Root bracketing failed after the doubling search (degenerate direction)."""

    code = "no_bracket"


class OutsideCone(FinslerError):
    """A vector's polar angle lies outside the curve's angular interval."""

    code = "outside_cone"


class DegenerateDirection(FinslerError):
    """A ray never crosses the unit-ball boundary; the gauge is not defined there."""

    code = "degenerate_direction"


class OutsideDomain(FinslerError):
    """A tangent vector is not in the metric's conic domain."""

    code = "outside_domain"


class OutsideProfile(FinslerError):
    """The homogeneous ratio falls outside the profile's interval."""

    code = "outside_profile"


class DomainEmpty(FinslerError):
    """No probed direction is admissible for a combined metric."""

    code = "domain_empty"


class BadExponent(FinslerError):
    """Family exponent violates its validity range."""

    code = "bad_exponent"


class NotAdmissible(FinslerError):
    """A curve velocity leaves the conic domain; carries the offending parameter."""

    code = "not_admissible"

    def __init__(self, message: str, parameter: float | None = None):
        super().__init__(message)
        self.parameter = parameter


class DegenerateTensor(FinslerError):
    """The fundamental tensor is (numerically) degenerate along an orbit."""

    code = "degenerate_tensor"


class LeftDomain(FinslerError):
    """Geodesic integration exited the conic domain; carries the exit parameter."""

    code = "left_domain"

    def __init__(self, message: str, parameter: float | None = None):
        super().__init__(message)
        self.parameter = parameter


class ParseError(FinslerError):
    """Configuration text is not syntactically valid."""

    code = "parse_error"

    def __init__(self, message: str, line: int | None = None, path: str = ""):
        super().__init__(message)
        self.line = line
        self.path = path


class ValidationError(FinslerError):
    """Configuration is well-formed but violates a schema constraint."""

    code = "validation_error"

    def __init__(self, message: str, path: str = "", constraint: str = ""):
        super().__init__(message)
        self.path = path
        self.constraint = constraint


# Codes that signal a domain/usage problem (CLI exit 2); the remaining
# library codes signal numerical failure (CLI exit 3).
DOMAIN_CODES = frozenset(
    {
        "outside_domain",
        "outside_cone",
        "outside_profile",
        "domain_empty",
        "bad_exponent",
        "not_admissible",
        "parse_error",
        "validation_error",
    }
)
