"""Exception types raised across the package.

Plain precondition violations (bad shapes, invalid parameter values) raise
ValueError; the classes here mark failures a caller may want to catch and
handle per item, e.g. when sweeping a corpus.
"""


class RirPostError(Exception):
    """Base class for all package-specific errors."""


class AudioFileError(RirPostError):
    """A WAV file could not be read: missing, empty, or unsupported encoding."""


class AllZeroInputError(RirPostError):
    """Waveform is identically zero and cannot be peak-normalized."""


class ZeroEnergyError(RirPostError):
    """Operation requires a signal with nonzero energy."""


class InsufficientDecayError(RirPostError):
    """Energy-decay curve never reaches the level required by the estimator."""


class DegenerateDataError(RirPostError):
    """Training data carries no variance in any dimension."""


class NaNLossError(RirPostError):
    """A training loss became non-finite; carries the component losses."""

    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = dict(components or {})


class CheckpointError(RirPostError):
    """Base class for checkpoint read failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version."""


class CheckpointCorruptError(CheckpointError):
    """Checkpoint file is truncated or structurally invalid."""


class EmptyCorpusError(RirPostError):
    """A corpus-level operation was given no usable entries."""
