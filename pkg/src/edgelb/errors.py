"""Exception types shared across the package.

Everything derives from EdgeLbError so callers (notably the CLI) can treat
any validation or input problem uniformly.
"""


class EdgeLbError(Exception):
    """Base class for all edgelb errors."""


class ParseError(EdgeLbError):
    """A file is structurally malformed (bad JSON, bad CSV line, wrong types)."""


class ValidationError(EdgeLbError):
    """Parsed data violates a semantic invariant (duplicate key, missing cell, out-of-range value)."""


class InvalidDelta(EdgeLbError):
    """Accuracy tolerance delta is negative."""


class InvalidConfig(EdgeLbError):
    """A workload configuration is invalid (non-stochastic matrix, bad tail parameter, bad client setup)."""


class ConfigError(EdgeLbError):
    """A simulation or experiment configuration is invalid."""


class EmptyTrace(EdgeLbError):
    """A frame trace contains no frames."""


class EmptySamples(EdgeLbError):
    """A metric was requested over an empty sample set."""


class EmptyResult(EdgeLbError):
    """A simulation result with no records was passed to the aggregator."""
