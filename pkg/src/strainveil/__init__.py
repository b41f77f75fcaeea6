"""Expression suppression for face video via optical-strain pixel replacement."""

__version__ = "0.1.0"

from strainveil.errors import FormatError, InputError, PipelineError, StrainveilError

__all__ = [
    "__version__",
    "StrainveilError",
    "InputError",
    "FormatError",
    "PipelineError",
]
