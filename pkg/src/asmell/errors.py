"""Exception hierarchy shared by all asmell modules."""


class AsmellError(Exception):
    """Base class for every error raised by asmell."""


class GraphError(AsmellError):
    pass


class DanglingEdgeError(GraphError):
    pass


class LevelMismatchError(GraphError):
    pass


class MissingComponentError(GraphError):
    pass


class FormatError(AsmellError):
    """Malformed interchange or CSV input. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class SourceTreeError(AsmellError, OSError):
    """A snapshot root could not be read."""


class EmptyGraphError(AsmellError):
    pass


class MissingMetricError(AsmellError):
    pass


class NotStronglyConnectedError(AsmellError):
    pass


class EmptyComponentError(AsmellError):
    pass


class VersionMismatchError(AsmellError):
    pass


class TooShortError(AsmellError):
    pass


class EmptyInputError(AsmellError):
    pass


class MissingStageInputError(AsmellError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"missing stage input: {path}")
