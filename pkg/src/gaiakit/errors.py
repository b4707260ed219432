"""Typed errors raised across the toolkit.

Every failure mode the library reports deliberately derives from GaiaError so
callers (and the CLI) can catch one base class and still print a precise name.
"""

from __future__ import annotations


class GaiaError(Exception):
    """Base class for all gaiakit errors."""


# --- label space ---------------------------------------------------------


class MissingToken(GaiaError):
    """A category token has no embedding and no fallback was configured."""


class ZeroVector(GaiaError):
    """An embedding has zero norm, so cosine similarity is undefined."""


class DimensionMismatch(GaiaError):
    """Vectors that must share a dimension do not."""


class EmptyInput(GaiaError):
    """An operation that needs at least one element received none."""


class DuplicateDataset(GaiaError):
    """Two label spaces carry the same dataset id."""


class UnknownCategoryInOverride(GaiaError):
    """An override references a category or target absent from the report."""


# --- architecture space --------------------------------------------------


class SpaceTooLarge(GaiaError):
    """Enumeration was asked to materialize more members than its cap."""


class EmptySpace(GaiaError):
    """A sub-space definition admits no architectures."""


class InvalidPhase(GaiaError):
    """A progressive-shrinking phase is malformed (epochs, warmup, ordering)."""


class EpochOutOfRange(GaiaError):
    """Epoch index falls outside the schedule's total span."""


# --- cost model ----------------------------------------------------------


class DegenerateFit(GaiaError):
    """Latency regression lacks the rank to determine its coefficients."""


class BandOverlap(GaiaError):
    """FLOPs bands overlap or are out of order."""


# --- evaluation ----------------------------------------------------------


class EndpointDown(GaiaError):
    """External evaluator process exited or closed its pipes."""


class ProtocolError(GaiaError):
    """A line from the external evaluator was not valid protocol JSON."""


class RemoteError(GaiaError):
    """The external evaluator answered a request with an error payload."""


class CacheCorrupt(GaiaError):
    """The on-disk evaluation cache has an unreadable line."""


class ConflictingResult(GaiaError):
    """A cache put disagrees with a stored metric for the same key."""


# --- search --------------------------------------------------------------


class NoFeasibleGroup(GaiaError):
    """No (scale, total depth) group satisfies the constraint."""


class SamplingExhausted(GaiaError):
    """Rejection sampling hit its attempt cap without enough members."""


class AllTied(GaiaError):
    """Rank correlation is undefined because one list is entirely tied."""


# --- data selection ------------------------------------------------------


class BadRecord(GaiaError):
    """A feature file record is malformed."""


class NoSharedCategory(GaiaError):
    """Source and target feature sets share no category id."""


class EmptySource(GaiaError):
    """Selection was asked to draw from an empty source pool."""


# --- supernet ------------------------------------------------------------


class ShapeMismatch(GaiaError):
    """Tensor shapes disagree with the toy-supernet configuration."""


class IndexOutOfRange(GaiaError):
    """A selector or surgery index exceeds the available rows."""


class CheckpointCorrupt(GaiaError):
    """A checkpoint file fails magic/version/length validation."""


# --- reporting -----------------------------------------------------------


class BadCSV(GaiaError):
    """A results CSV is missing required columns or has ragged rows."""
