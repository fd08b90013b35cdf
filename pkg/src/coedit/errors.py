"""Typed error hierarchy shared by all engine modules.

Every failure the engine can raise on purpose derives from CoeditError so
callers (and the CLI exit-code map) can distinguish engine failures from
bugs. Pipeline stages attach a ``stage`` attribute before re-raising.
"""
from __future__ import annotations


class CoeditError(Exception):
    """Base class for all engine errors."""

    #: pipeline stage attribution, filled in by the orchestrator
    stage: str | None = None


# --- mask / raster arithmetic ------------------------------------------------

class EmptySelection(CoeditError):
    """A tag-id selection was empty where at least one id is required."""


class TagOutOfRange(CoeditError):
    """A tag id fell outside 1..n for the mask set in play."""


class EmptyMaskSet(CoeditError):
    """An operation needing at least one mask got an empty set."""


class EmptyMask(CoeditError):
    """A mask with no true pixels where a region is required."""


class DimensionMismatch(CoeditError):
    """Two rasters that must share dimensions do not."""


class UnsupportedImage(CoeditError):
    """Input raster is empty, mis-shaped, or has the wrong dtype."""


# --- visual tagging / markers -------------------------------------------------

class ImageTooSmallForLabels(CoeditError):
    """Image cannot fit the numeric tag labels without overlap."""


class ImageTooSmall(CoeditError):
    """Image cannot fit the corner badge."""


# --- structured-response parsing ----------------------------------------------

class ParseError(CoeditError):
    """Base for model-response parse failures (all retryable)."""


class NoListFound(ParseError):
    """No bracketed list literal could be extracted from the response."""


class EmptyList(ParseError):
    """The extracted list had no members."""


class FairnessConstraintViolated(ParseError):
    """Fairness prompt lacked the required "different {concept}" phrase."""


class EmptyResponse(ParseError):
    """Response was empty after trimming quotes and markup."""


class UnparseableVerdict(ParseError):
    """Judge reply could not be read as yes/no."""


# --- backends -------------------------------------------------------------------

class BackendError(CoeditError):
    """Base for model-backend failures."""


class BackendUnavailable(BackendError):
    """Endpoint unreachable, unconfigured, or exhausted its retries."""


class Timeout(BackendError):
    """Request exceeded the endpoint's deadline after retries."""


class ProtocolError(BackendError):
    """Reply violated the wire protocol (shape, dims, empty text)."""


class ProviderRefusal(BackendError):
    """Provider's content filter refused to answer; surfaced distinctly
    so runs can report filter interference instead of a generic failure."""


class EmptyResult(BackendError):
    """Segmentation returned zero masks."""


class ReplayMiss(BackendUnavailable):
    """Replay store has no recording for this request."""


# --- pipeline stages --------------------------------------------------------------

class FocusEmpty(CoeditError):
    """Focus selection could not be obtained after retries."""


class SubstitutionFailed(CoeditError):
    """Subject rewrite never produced a teddy-bear description."""


class InsufficientDescriptions(CoeditError):
    """Concept expansion fell short of the requested count after retries."""
