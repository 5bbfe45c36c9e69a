"""Exception hierarchy shared by the library and the command line.

Every error carries the process exit code the CLI reports for it.
"""
from typing import Optional


class ResnetsError(Exception):
    """Base class for all errors raised by the package"""
    exit_code: int = 1


class ValidationError(ResnetsError):
    """Input data or configuration violates a documented invariant"""
    exit_code = 2


class ParseError(ValidationError):
    """A file could not be parsed into the expected structure"""


class InvalidInputError(ValidationError):
    """A numeric input is outside the accepted domain (e.g. non-finite)"""


class AsymmetryError(ValidationError):
    """A connectivity matrix is not symmetric within tolerance"""


class NegativeWeightError(ValidationError):
    """A connectivity matrix holds a negative weight"""


class ManifestError(ValidationError):
    """A population manifest is inconsistent with the files it references"""


class DimensionMismatchError(ValidationError):
    """Two operands do not share the required shape"""


class ConfigError(ValidationError):
    """A configuration dataclass failed validation"""


class SeparationInfeasibleError(ValidationError):
    """Cluster prototypes could not be separated within the attempt budget"""


class TrainingDivergenceError(ResnetsError):
    """Training produced a non-finite value"""
    exit_code = 3

    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration


class StorageError(ResnetsError):
    """Reading or writing a file failed"""
    exit_code = 4


class MissingFileError(StorageError):
    """A required input file does not exist"""


class OverwriteRefusedError(StorageError):
    """A result file already exists and overwriting was not requested"""


class FoldError(ResnetsError):
    """A leave-one-out fold failed; wraps the underlying error"""

    def __init__(self, fold: int, subject_id: str, cause: Exception):
        super().__init__(f"fold {fold} (held-out subject '{subject_id}') failed: {cause}")
        self.fold = fold
        self.subject_id = subject_id
        self.cause = cause

    @property
    def exit_code(self) -> int:
        return getattr(self.cause, "exit_code", 1)
