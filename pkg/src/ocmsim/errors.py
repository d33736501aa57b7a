"""Exception types raised across the package."""


class OcmsimError(Exception):
    """Base class for all package-specific errors."""


class GridTooCoarse(OcmsimError):
    """Sampling too coarse to represent the field (PSF under-sampled)."""


class SpacingMismatch(OcmsimError):
    """Two grids that must share sample spacing do not."""


class GridMismatch(OcmsimError):
    """Grids that must share geometry (shape/spacing/origin) do not."""


class WrongPupilProfile(OcmsimError):
    """Operation requires a different pupil profile."""


class EmptyInput(OcmsimError):
    """An input collection that must be non-empty is empty."""


class EvanescentInput(OcmsimError):
    """Transverse wavevector outside the paraxial domain (radicand <= 0)."""


class UnnormalizableDensity(OcmsimError):
    """Probability density has zero total mass."""


class SinkWriteError(OcmsimError):
    """Failed to write an output file."""


class UnsortedInput(OcmsimError):
    """Event stream not sorted by (frame_id, t_bin)."""


class TooFewFrames(OcmsimError):
    """Not enough frames for cross-frame accidental estimation."""


class EmptyBand(OcmsimError):
    """Projection band selects no samples."""


class NoPeak(OcmsimError):
    """Profile has no usable peak."""


class AmbiguousPeak(OcmsimError):
    """Profile is multi-modal and no fit model was given."""


class PeaksNotFound(OcmsimError):
    """Profile unusable for slit scoring (too short or degenerate)."""


class DegenerateInput(OcmsimError):
    """Fit input is degenerate (too few or identical abscissae)."""


class ConfigError(OcmsimError):
    """Run configuration failed to parse or validate."""
