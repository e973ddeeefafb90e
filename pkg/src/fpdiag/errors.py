"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FPDiagError(Exception):
    """Base class for every error raised by fpdiag."""


class IngestError(FPDiagError):
    pass


class MissingFile(IngestError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"missing input file: {self.path}")


class EmptyFile(IngestError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"no data rows in {self.path}")


class MissingColumn(IngestError):
    def __init__(self, name: str, path=None):
        self.name = name
        self.path = None if path is None else str(path)
        where = f" in {self.path}" if self.path else ""
        super().__init__(f"missing column {name!r}{where}")


class BadValue(IngestError):
    """A cell failed to parse or violated a record invariant.

    ``row`` is 1-based and counts the header as row 1, so it matches what a
    spreadsheet shows.
    """

    def __init__(self, row: int, column: str, reason: str, path=None):
        self.row = row
        self.column = column
        self.reason = reason
        self.path = None if path is None else str(path)
        where = f"{self.path}: " if self.path else ""
        super().__init__(f"{where}row {row}, column {column!r}: {reason}")


class MixedCountryYear(IngestError):
    pass


class EmptyPanel(IngestError):
    pass


class MissingSlice(IngestError):
    def __init__(self, indicator, variant, population_group):
        self.indicator = indicator
        self.variant = variant
        self.population_group = population_group
        super().__init__(
            f"no estimates for indicator={indicator}, variant={variant}, "
            f"population_group={population_group}"
        )


class UngroupedCountry(FPDiagError):
    def __init__(self, code: str):
        self.code = code
        super().__init__(f"country {code!r} has no entry in the grouping map")


class TooShort(FPDiagError):
    def __init__(self, n: int, minimum: int):
        self.n = n
        self.minimum = minimum
        super().__init__(f"series has {n} points, need at least {minimum}")


class DegenerateTimes(FPDiagError):
    pass


class LengthMismatch(FPDiagError):
    pass


class EmptyInput(FPDiagError):
    pass


class UnknownCountry(FPDiagError):
    def __init__(self, code: str):
        self.code = code
        super().__init__(f"unknown country {code!r}")


class MissingStageOutput(FPDiagError):
    def __init__(self, stage: str, path):
        self.stage = stage
        self.path = str(path)
        super().__init__(f"stage {stage!r} output not found: {self.path} (run it first)")
