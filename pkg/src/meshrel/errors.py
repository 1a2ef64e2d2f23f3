class MeshRelError(Exception):
    """Base class for all errors raised by meshrel."""


class FormatError(MeshRelError):
    """A malformed input line. Carries the source name and 1-based line number."""

    def __init__(self, message, source="<input>", line_no=None):
        self.source = source
        self.line_no = line_no
        where = source if line_no is None else f"{source}:{line_no}"
        super().__init__(f"{where}: {message}")


class VocabularyError(MeshRelError):
    pass


class UnknownTermError(MeshRelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DisconnectedError(MeshRelError):
    pass


class IndexFormatError(MeshRelError):
    pass
