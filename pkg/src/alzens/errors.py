"""Exception hierarchy.

Three families map onto the CLI exit codes: configuration problems (2),
data problems (3) and everything raised while fitting or predicting (4).
"""


class AlzensError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 4


class ConfigError(AlzensError):
    exit_code = 2


class DataError(AlzensError):
    exit_code = 3


class MissingTarget(DataError):
    pass


class NonNumericCell(DataError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {column!r}")


class MissingValue(DataError):
    def __init__(self, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"empty cell at row {row}, column {column!r}")


class NoLabels(DataError):
    pass


class DegenerateClass(DataError):
    pass


class BadFraction(DataError):
    pass


class MissingColumn(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class SingleClassLabels(DataError):
    pass


class StageInputMissing(DataError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"stage input missing: expected {self.path}")


class ModelError(AlzensError):
    pass


class SingleClass(ModelError):
    pass


class EmptyNode(ModelError):
    pass


class UnfittedModel(ModelError):
    pass


class MissingCover(ModelError):
    pass


class TooFewMinority(ModelError):
    pass


class NoMembers(ModelError):
    pass


class EmptyAttribution(ModelError):
    pass
