"""
Error hierarchy for ADE-Net
Every failure carries a category and the exit code the CLI maps it to
"""
from typing import Optional


class AdeNetError(Exception):
    """Base class for all ADE-Net failures"""

    category = "internal"
    exit_code = 5

    def __init__(self, message: str, detail: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def __str__(self) -> str:
        if self.detail:
            return f"[{self.category}] {self.message} ({self.detail})"
        return f"[{self.category}] {self.message}"


class UsageError(AdeNetError):
    """Unknown verb or malformed command line"""

    category = "usage"
    exit_code = 1


class ConfigurationError(AdeNetError):
    """Invalid configuration value, key or combination"""

    category = "config"
    exit_code = 2


class DataFormatError(AdeNetError):
    """Input file is malformed or truncated"""

    category = "data"
    exit_code = 3


class ValidationError(DataFormatError):
    """Input parsed but violates a data invariant"""


class LabelError(DataFormatError):
    """Label outside its valid range"""


class RankError(DataFormatError):
    """Data matrix has lower rank than requested"""


class MissingInputError(DataFormatError):
    """A command's input artifact does not exist"""


class NumericalError(AdeNetError):
    """Non-finite values produced from finite inputs"""

    category = "numerical"
    exit_code = 4


class DimensionError(AdeNetError):
    """Operand shapes do not agree"""


class ContractError(AdeNetError):
    """API used outside its documented contract"""
