# src/errors.py
"""
Exception hierarchy for the toolkit
Each error carries the exit code the CLI maps it to
"""


class AASVError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 2


class ShapeError(AASVError):
    """Shape or dimensionality mismatch"""


class NonFiniteError(AASVError):
    """A NaN or Inf appeared where only finite values are allowed"""

    exit_code = 1


class DataError(AASVError):
    """Degenerate, insufficient or malformed input data"""


class ConfigError(AASVError):
    """Invalid configuration value or schema violation"""


class PrerequisiteError(AASVError):
    """An upstream artifact is missing or fails its checksum"""


class CheckpointError(AASVError):
    """Unreadable checkpoint or architecture mismatch"""


class PatternCheckError(AASVError):
    """One or more acceptance pattern checks failed"""

    exit_code = 1


class StageError(AASVError):
    """Wraps a failure with the name of the pipeline stage it happened in"""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, AASVError):
            self.exit_code = cause.exit_code
        elif isinstance(cause, OSError):
            self.exit_code = 3
        else:
            self.exit_code = 1
