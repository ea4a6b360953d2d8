"""Exception hierarchy shared by every sharedqaas module."""


class SharedQaasError(Exception):
    """Base class of all errors raised by sharedqaas."""


# relational IR

class QuerySyntaxError(SharedQaasError, ValueError):
    pass


class UnknownRelationError(SharedQaasError, KeyError):
    """A table or column is not present in the schema catalog."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UnsupportedConstructError(SharedQaasError):
    def __init__(self, construct: str, detail: str = "") -> None:
        self.construct = construct
        message = f"unsupported construct: {construct}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class BindingError(SharedQaasError, ValueError):
    pass


# data-query model

class EncodingError(SharedQaasError, ValueError):
    pass


class QueryNotInBatchError(SharedQaasError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class AnnotationMissingError(SharedQaasError):
    pass


# predicate index

class NoIndexableIntervalsError(SharedQaasError):
    pass


class MissingAttributeError(SharedQaasError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


# SQL generation

class QueryTooLargeError(SharedQaasError):
    def __init__(self, measured_bytes: int, limit: int, dialect: str) -> None:
        self.measured_bytes = measured_bytes
        self.limit = limit
        self.dialect = dialect
        super().__init__(
            f"rendered statement is {measured_bytes} bytes, over the {limit} byte limit of dialect '{dialect}'"
        )


class UnsupportedDialectFeatureError(SharedQaasError):
    pass


# plan construction

class IncompatibleBatchError(SharedQaasError):
    pass


class MaterializationUnsupportedError(SharedQaasError):
    pass


# cost model

class CostDomainError(SharedQaasError, ValueError):
    pass


class MissingStatisticsError(SharedQaasError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


# execution

class BackendError(SharedQaasError):
    def __init__(self, message: str, sql: str | None = None) -> None:
        self.sql = sql
        if sql:
            message = f"{message}\n-- failing statement:\n{sql}"
        super().__init__(message)
