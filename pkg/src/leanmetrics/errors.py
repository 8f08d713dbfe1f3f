"""Exception hierarchy shared across the package."""


class LeanMetricsError(Exception):
    """Base class; carries a human-readable message."""


# --- corpus / parsing ---------------------------------------------------


class CorpusError(LeanMetricsError):
    pass


class EmptyFile(CorpusError):
    pass


class MissingColumn(CorpusError):
    def __init__(self, column: str):
        super().__init__(f"missing required column: {column!r}")
        self.column = column


class UnknownColumn(CorpusError):
    def __init__(self, column: str):
        super().__init__(
            f"unknown column {column!r} (pass lenient=True to ignore extra columns)"
        )
        self.column = column


class DuplicateColumn(CorpusError):
    def __init__(self, column: str):
        super().__init__(f"duplicate column: {column!r}")
        self.column = column


class NonNumericCell(CorpusError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"non-numeric value {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class NegativeMetricValue(CorpusError):
    def __init__(self, row: int, column: str, value: float):
        super().__init__(f"negative metric value {value} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class NegativeBugCount(CorpusError):
    def __init__(self, row: int, value: float):
        super().__init__(f"negative bug count {value} at row {row}")
        self.row = row
        self.value = value


class AlreadyFiltered(CorpusError):
    pass


class NotBinarized(CorpusError):
    pass


class ManifestError(CorpusError):
    pass


class UnknownMetric(LeanMetricsError):
    def __init__(self, name: str):
        super().__init__(f"unknown metric name: {name!r}")
        self.name = name


# --- numeric / selection ------------------------------------------------


class LengthMismatch(LeanMetricsError):
    pass


class TooFewSamples(LeanMetricsError):
    pass


class EmptySubset(LeanMetricsError):
    pass


class SingleClassData(LeanMetricsError):
    pass


class MissingFeature(LeanMetricsError):
    def __init__(self, name: str):
        super().__init__(f"instance does not provide metric {name!r}")
        self.name = name


# --- statistics ---------------------------------------------------------


class AllZeroDifferences(LeanMetricsError):
    pass


class DegenerateTestSet(LeanMetricsError):
    pass


class MatchingFailure(LeanMetricsError):
    def __init__(self, unmatched_a, unmatched_b):
        self.unmatched_a = tuple(unmatched_a)
        self.unmatched_b = tuple(unmatched_b)
        super().__init__(
            "result rows do not match: "
            f"{len(self.unmatched_a)} only in A, {len(self.unmatched_b)} only in B"
        )


# --- scenarios / configuration -------------------------------------------


class NoTrainingData(LeanMetricsError):
    pass


class ConfigError(LeanMetricsError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field {field!r}: {message}")
        self.field = field


class MissingArtifacts(LeanMetricsError):
    pass
