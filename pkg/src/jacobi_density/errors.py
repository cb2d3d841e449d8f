"""Exception hierarchy.

Every numerical failure the library can signal derives from
:class:`JacobiError`; configuration problems derive from
:class:`ConfigError` so the CLI can map them to a distinct exit code.
"""


class JacobiError(Exception):
    """Base class for numerical failures."""


class NonPositiveEntry(JacobiError):
    pass


class OutsideBand(JacobiError):
    pass


class BandEdge(JacobiError):
    pass


class ZeroPhi(JacobiError):
    pass


class SingularSystem(JacobiError):
    pass


class NoConvergence(JacobiError):
    pass


class PoleHit(JacobiError):
    pass


class NoAdmissibleN0(JacobiError):
    pass


class ZeroLambda(JacobiError):
    pass


class SeedDegenerate(JacobiError):
    pass


class NoAdmissibleIndices(JacobiError):
    pass


class NoStabilization(JacobiError):
    pass


class ConfigError(Exception):
    """Base class for rejected configurations."""


class ParseError(ConfigError):
    pass


class HypothesisViolation(ConfigError):
    """A family violates a structural hypothesis of the density formulas."""


class CriticalParameter(HypothesisViolation):
    """|d| >= 1 handed to the non-critical pipeline."""
