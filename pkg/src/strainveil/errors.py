"""Exception hierarchy shared across the pipeline.

InputError maps to CLI exit code 2 (missing/unusable inputs), everything
else derived from StrainveilError maps to exit code 3.
"""


class StrainveilError(Exception):
    """Base class for all pipeline errors."""


class InputError(StrainveilError):
    """Missing files, bad arguments, unusable configuration."""


class FormatError(StrainveilError):
    """Malformed or unsupported data encountered while decoding."""


class PipelineError(StrainveilError):
    """A processing stage failed; carries the stage name and frame index."""

    def __init__(self, stage: str, frame_index: int | None, message: str):
        self.stage = stage
        self.frame_index = frame_index
        where = f"stage '{stage}'"
        if frame_index is not None:
            where += f", frame {frame_index}"
        super().__init__(f"{where}: {message}")
