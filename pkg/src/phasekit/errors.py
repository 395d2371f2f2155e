"""Exception hierarchy shared by all phasekit modules."""


class PhasekitError(Exception):
    """Base class for all phasekit errors."""


class InvalidValue(PhasekitError):
    """A numeric argument is outside its domain (NaN, inf, ...)."""


class DegeneratePhasor(PhasekitError):
    """A phasor with zero real and imaginary parts carries no phase."""


class OutOfBounds(PhasekitError):
    """A requested window or index lies outside the raster."""


class InvalidMargin(PhasekitError):
    """Reflect padding margin must satisfy 0 <= margin < min(width, height)."""


class FormatError(PhasekitError):
    """Raster or checkpoint file failed header/payload validation."""


class IoError(PhasekitError):
    """Underlying file I/O failed."""


class InvalidScene(PhasekitError):
    """Scene geometry out of bounds or otherwise malformed."""


class InvalidCoherence(PhasekitError):
    """Coherence value outside (0, 1]; gamma <= 0 implies infinite phase noise."""


class ShapeError(PhasekitError):
    """Array shape does not match the layer or network contract."""


class ImageTooSmall(PhasekitError):
    """Image smaller than the patch/window the operation requires."""


class TrainingDiverged(PhasekitError):
    """Loss became non-finite; carries the last good weights if any."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class NoResiduesToReduce(PhasekitError):
    """RRP is undefined when the noisy input has zero residues."""


class ConfigError(PhasekitError):
    """Key=value config file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
