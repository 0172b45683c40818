"""Exception hierarchy shared by all scalematch modules."""


class ScaleMatchError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ScaleMatchError):
    """Annotation file is not valid JSON; message carries the byte offset."""


class IntegrityError(ScaleMatchError):
    """Annotation data violates a structural invariant (dangling ids, zero-area boxes, missing masks)."""


class ConfigError(ScaleMatchError):
    """A configuration value is out of its valid range."""


class EmptyMaskError(ScaleMatchError):
    """A segmentation rasterized to an empty mask."""


class DegenerateWarp(ScaleMatchError):
    """An instance shrank below one pixel during warping; the caller should skip it."""


class InpaintError(ScaleMatchError):
    """The hole cannot be filled (no boundary pixels to diffuse from)."""


class EmptyDatasetError(ScaleMatchError):
    """An operation that needs at least one instance got an empty dataset."""


class PipelineError(ScaleMatchError):
    """A dataset transform failed as a whole (e.g. too many per-image failures)."""
