"""Exception types shared across the package."""

from __future__ import annotations


class SlowBondError(Exception):
    """Base class for all errors raised by this package."""


class NotOrdered(SlowBondError, ValueError):
    """The requested endpoints are not ordered coordinate-wise."""


class NoAdmissiblePath(SlowBondError, ValueError):
    """A region constraint eliminated every monotone path."""


class BandTooNarrow(SlowBondError):
    """A banded computation touched (or needed cells beyond) the band edge."""


class OutOfRange(SlowBondError, IndexError):
    pass


class HorizonExceeded(SlowBondError):
    """A query or stop rule reaches past the certified validity horizon."""


class WindowNotTracked(SlowBondError, ValueError):
    pass


class IncompleteParallelogram(SlowBondError, KeyError):
    pass


class NegativeEpsilon(SlowBondError, ValueError):
    pass


class NonpositiveEpsilon(SlowBondError, ValueError):
    pass


class InsufficientData(SlowBondError, ValueError):
    pass


class ConfigError(SlowBondError, ValueError):
    """Invalid experiment configuration.

    ``errors`` holds ``(field, message)`` pairs so callers can print
    field-level diagnostics.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [("", errors)]
        self.errors = list(errors)
        lines = [f"{field}: {msg}" if field else msg for field, msg in self.errors]
        super().__init__("; ".join(lines))


class SchemaMismatch(SlowBondError, ValueError):
    pass


class TruncationSuspect(UserWarning):
    """Point-to-set maximizer sits on the truncation boundary."""
