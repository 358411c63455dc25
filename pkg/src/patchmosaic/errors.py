"""Exception hierarchy shared across the package.

Everything raised deliberately by this package derives from
``PatchMosaicError`` so batch drivers can catch one type at the top
level. Plain ``ValueError`` / ``TypeError`` are still used for
garden-variety argument misuse (wrong dtype, bad enum value).
"""


class PatchMosaicError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(PatchMosaicError):
    """Raster bytes could not be decoded (corrupt or not an image)."""


class UnsupportedFormatError(DecodeError):
    """The raster decoded, but not to 8-bit RGB/RGBA PNG."""


class ColorMapError(PatchMosaicError):
    """Color map file is malformed, or a color/index has no mapping."""


class SizeError(PatchMosaicError):
    """Raster dimensions violate a requirement (mismatch, too small, odd)."""


class PlacementError(PatchMosaicError):
    """A patch paste would touch pixels outside the canvas."""


class ConfigError(PatchMosaicError):
    """Augmentation config file or field values are invalid."""


class ManifestError(PatchMosaicError):
    """Dataset manifest is malformed or references bad paths."""


class EmptySplitError(ManifestError):
    """A split that must be non-empty has no entries."""


class EvaluationError(PatchMosaicError):
    """Metric computation is impossible (nothing to score, bad inputs)."""
