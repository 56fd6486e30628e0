"""Exception hierarchy.

Every error carries an optional ``witnesses`` payload (cube multi-indices,
sample points, or matrices) so that callers and reports can show *why*
something failed.
"""
from __future__ import annotations


class ConleyError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str = "", witnesses=None):
        super().__init__(message)
        self.witnesses = witnesses if witnesses is not None else []

    @property
    def name(self) -> str:
        return type(self).__name__


class NonFinite(ConleyError):
    pass


class NoLattice(ConleyError):
    pass


class NotNested(ConleyError):
    pass


class NotContained(ConleyError):
    pass


class NotPreIndex(ConleyError):
    pass


class TamenessUnachievable(ConleyError):
    pass


class BlockFailed(ConleyError):
    pass


class TransversalityFailed(ConleyError):
    pass


class NotCellular(ConleyError):
    pass


class BoxTooSmall(ConleyError):
    pass


class CollarTooThin(ConleyError):
    pass


class BallTooSmall(ConleyError):
    pass


class ReportFail(ConleyError):
    pass


class OddShift(ConleyError):
    pass


class ShiftMismatch(ConleyError):
    pass


class NonIntegerComplexShift(ConleyError):
    pass


class SquareFails(ConleyError):
    pass


class LevelUnavailable(ConleyError):
    pass


class DimUnsupported(ConleyError):
    pass


class ScenarioError(ConleyError):
    """Malformed scenario file or failed schema validation."""
