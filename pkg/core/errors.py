"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from typing import Optional


class AmmAnalysisError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code: int = 1


class DomainError(AmmAnalysisError, ValueError):
    """A mathematical precondition does not hold."""


class PathUnavailableError(DomainError):
    """A hop's pool is missing or inactive in the snapshot."""

    def __init__(self, pool_id: str, block: Optional[int] = None):
        self.pool_id = pool_id
        self.block = block
        where = f" at block {block}" if block is not None else ""
        super().__init__(f"pool {pool_id} unavailable{where}")


class CorrelationUndefinedError(DomainError):
    """Correlation requested on series where it has no value."""


class ConfigError(AmmAnalysisError):
    exit_code = 3


class InputFileError(AmmAnalysisError):
    exit_code = 4


class DataFormatError(AmmAnalysisError):
    """A malformed or duplicate record in an input file."""

    exit_code = 5

    def __init__(self, source: str, line: int, field: str, reason: str):
        self.source = source
        self.line = line
        self.field = field
        self.reason = reason
        super().__init__(f"{source}:{line}: {field}: {reason}")


class UnmappedBlockError(AmmAnalysisError):
    """A block needed for a day lookup has no timestamp."""

    exit_code = 5

    def __init__(self, block: int):
        self.block = block
        super().__init__(f"block {block} has no timestamp in the blocks file")


class MissingPriceError(AmmAnalysisError):
    exit_code = 6

    def __init__(self, token: str, day: object):
        self.token = token
        self.day = day
        super().__init__(f"no USD price for {token} on {day}")


class InconsistentDataError(AmmAnalysisError):
    """validate found swaps or reserves that do not replay."""

    exit_code = 7


EXIT_CODES = {
    0: "success",
    1: "unexpected analysis error",
    2: "usage error (unknown flag, bad argument)",
    ConfigError.exit_code: "configuration conflict or unknown network",
    InputFileError.exit_code: "missing or unreadable input / unwritable output",
    DataFormatError.exit_code: "malformed or duplicate input record, or a block without timestamp",
    MissingPriceError.exit_code: "missing USD price for a token/day",
    InconsistentDataError.exit_code: "validate found consistency flags or closure mismatches",
}
