"""Exception hierarchy shared across the package."""


class VideoSemNetError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(VideoSemNetError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NumericDomainError(VideoSemNetError, ValueError):
    """Input contains NaN/Inf or is otherwise outside the numeric domain."""


class DegenerateInputError(VideoSemNetError, ValueError):
    """Input is degenerate for the operation (e.g. a zero-norm vector)."""


class EmptyInputError(VideoSemNetError, ValueError):
    """A sequence that must be non-empty was empty."""


class ConfigError(VideoSemNetError, ValueError):
    """A configuration value violates the component's contract."""


class ContractError(VideoSemNetError, ValueError):
    """A caller broke an API contract (e.g. non-scalar output to backward)."""


class BatchSizeError(VideoSemNetError, ValueError):
    """Batch too small for the requested mode."""


class VocabularyError(VideoSemNetError, KeyError):
    """Token or token id not present in the vocabulary."""


class ContainerError(VideoSemNetError):
    """Base for tensor-container file problems."""


class ContainerFormatError(ContainerError, ValueError):
    """Bad magic bytes or unsupported container version."""


class ContainerShapeError(ContainerError, ValueError):
    """Entry rank/shape does not match what the caller requires."""


class ContainerTruncatedError(ContainerError, IOError):
    """Container file ended before the declared payload."""


class SchemaError(VideoSemNetError, ValueError):
    """A structured document (manifest, run config, results) fails validation."""


class RangeError(VideoSemNetError, ValueError):
    """A numeric field is outside its documented range."""


class StratificationError(VideoSemNetError, ValueError):
    """A class has too few items for a stratified split."""


class CoverageError(VideoSemNetError, ValueError):
    """Training data does not cover every class."""
