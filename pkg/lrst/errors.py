"""
Exceptions raised by lrst.

Every error carries an ``exit_code`` so the command-line interface can map failures to distinct process
exit statuses. Errors about malformed input also derive from ``ValueError``.
"""


class LrstError(Exception):
    exit_code = 1


class SchemaError(LrstError, ValueError):
    exit_code = 3


class MissingCellError(LrstError, ValueError):
    exit_code = 4

    def __init__(self, message, subjects=()):
        super().__init__(message)
        self.subjects = list(subjects)


class DuplicateCellError(LrstError, ValueError):
    exit_code = 5


class UnknownArmLabelError(LrstError, ValueError):
    exit_code = 6


class NonFiniteValueError(LrstError, ValueError):
    exit_code = 7


class DegenerateDesignError(LrstError, ValueError):
    exit_code = 8


class MissingBaselineError(LrstError, ValueError):
    exit_code = 9


class EmptyInputError(LrstError, ValueError):
    exit_code = 10


class InvalidWeightsError(LrstError, ValueError):
    exit_code = 11


class NonPositiveVarianceError(LrstError, ArithmeticError):
    """The estimated variance of the weighted rank difference is not positive, so the test is undefined."""

    exit_code = 12


class NonPDCovarianceError(LrstError, ValueError):
    exit_code = 13


class InvalidModelError(LrstError, ValueError):
    exit_code = 14


class ConfigError(LrstError, ValueError):
    exit_code = 15

    def __init__(self, message, section=None, key=None, line=None):
        context = []
        if section is not None:
            context.append(f"[{section}]")
        if key is not None:
            context.append(key)
        if line is not None:
            context.append(f"line {line}")
        prefix = " ".join(context)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.section = section
        self.key = key
        self.line = line
