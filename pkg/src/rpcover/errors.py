"""Exception hierarchy.

The CLI maps these onto exit statuses: input-type errors exit 2,
capacity/precision/invariant errors exit 3.
"""


class RpcError(Exception):
    """Base class for all errors raised by this package."""


class InputError(RpcError, ValueError):
    """Malformed user input: bad vertex ids, bad weights, bad graph text."""


class ConfigError(InputError):
    """Parameter combination outside the supported domain."""


class QueryError(InputError):
    """A query that the forest cannot answer (e.g. too many failures)."""


class FormatError(InputError):
    """A serialized forest that is truncated, tampered with or mismatched."""


class CapacityError(RpcError):
    """An enumeration would exceed the configured work budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class SamplingError(RpcError):
    """Rejection sampling could not find an eligible query."""


class PrecisionError(RpcError):
    """Certified arithmetic could not separate two values."""


class InvariantError(RpcError):
    """A runtime-checked construction invariant failed."""
