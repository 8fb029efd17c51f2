"""Exception hierarchy shared by all qrck modules.

Every error carries a stable ``exit_code`` so the command line front end can
map error classes to machine-readable process exit codes.
"""

from __future__ import annotations


class QRCKError(Exception):
    exit_code = 1


class NotHermitian(QRCKError, ValueError):
    exit_code = 10


class NotPositiveDefinite(QRCKError, ValueError):
    exit_code = 11


class DimensionMismatch(QRCKError, ValueError):
    exit_code = 12


class NonRealResult(QRCKError, ValueError):
    exit_code = 13


class RangeViolation(QRCKError, ValueError):
    """Raised for out-of-range inputs.

    ``index`` names the offending sample when the check runs over a series.
    """

    exit_code = 14

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class AncillaPresent(QRCKError, ValueError):
    exit_code = 15


class NotOrthogonal(QRCKError, ValueError):
    exit_code = 16


class BadMagic(QRCKError, ValueError):
    exit_code = 20


class TruncatedFile(QRCKError, ValueError):
    exit_code = 21


class CountMismatch(QRCKError, ValueError):
    exit_code = 22


class ParseError(QRCKError, ValueError):
    exit_code = 30

    def __init__(self, message: str, line: int | None = None, position: int | None = None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", col {position})" if position is not None else ")")
        super().__init__(message + where)
        self.line = line
        self.position = position


class ValidationError(QRCKError, ValueError):
    exit_code = 31

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class IoError(QRCKError, OSError):
    exit_code = 40


class RunExists(QRCKError, FileExistsError):
    """A result directory for this run id is already present."""

    exit_code = 41
