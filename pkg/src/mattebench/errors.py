"""Exception types raised across the toolkit."""


class MatteError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class DimensionMismatch(MatteError, ValueError):
    pass


class InvalidRaster(MatteError, ValueError):
    """Raster violates a type invariant (shape, channel count, value range)."""


class ImageIOError(MatteError, OSError):
    """Reading or writing a raster file failed.

    ``reason`` is one of ``file-not-found``, ``unsupported-format``,
    ``corrupt-data``, ``invalid-path`` or ``io-failure``.
    """

    def __init__(self, path, reason, detail=""):
        self.path = str(path)
        self.reason = reason
        self.detail = detail
        msg = f"{self.path}: {reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SynthesisError(MatteError):
    pass


class SpecError(MatteError):
    """Network description is malformed or fails shape validation."""
