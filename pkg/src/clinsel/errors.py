"""Exception hierarchy. Each category carries the CLI exit code it maps to."""


class ClinselError(Exception):
    exit_code = 1


class ConfigError(ClinselError):
    exit_code = 2


class SchemaError(ClinselError):
    exit_code = 3


class ParseError(ClinselError):
    exit_code = 3

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DataValidationError(ClinselError):
    exit_code = 3


class ImputationError(ClinselError):
    exit_code = 4


class FitError(ClinselError):
    exit_code = 5


class InterfaceError(ClinselError):
    exit_code = 5


class UndefinedMetricError(ClinselError):
    exit_code = 5


class GenerationError(ClinselError):
    exit_code = 6


class ReportIOError(ClinselError):
    exit_code = 7
