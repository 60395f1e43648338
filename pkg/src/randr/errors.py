"""Exception hierarchy shared across the pipeline."""


class RandrError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RandrError):
    """Base class for configuration loading and validation failures."""


class ParseError(ConfigError):
    """A JSON input could not be parsed, or a field has the wrong shape."""


class ValidationError(ConfigError):
    """A configuration value violates a documented constraint."""


class UnknownField(ConfigError):
    """A configuration document contains a field that is not part of the schema."""


class ConfigInvalid(RandrError):
    """An operation received a config object that fails its own validation."""


class DegenerateLookAt(RandrError):
    """Eye and target coincide, or the up hint is parallel to the view direction."""


class InvalidPattern(RandrError):
    """A texture pattern has out-of-range fields."""


class EmptyPatternSet(RandrError):
    """A texture library build was requested with no enabled pattern families."""


class TooManyObjects(RandrError):
    """More grid cells were requested than the grid contains."""


class BadTextureId(RandrError):
    """A scene references a texture index outside the library."""


class IndivisibleDimensions(RandrError):
    """Image dimensions are not divisible by the downscale factor."""


class IoFailure(RandrError):
    """A dataset file could not be written or read."""


class EvalInputError(RandrError):
    """Base class for malformed evaluation inputs."""


class UnknownClass(EvalInputError):
    """A detection or ground-truth record names a class outside the known set."""


class ImageIdMismatch(EvalInputError):
    """A detection references an image id absent from the ground truth."""
