"""Exceptions raised by vertfeed.

Every error the package raises derives from VertfeedError so the CLI can turn
it into a single-line message and a non-zero exit code.
"""


class VertfeedError(Exception):
    """Base class for all vertfeed errors."""


class ConfigError(VertfeedError):
    """A parameter or configuration value violates its contract."""


class CorpusFormatError(VertfeedError):
    """A corpus line could not be parsed into a Document."""

    def __init__(self, path, line_number, reason):
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{self.path}:{line_number}: {reason}")


class DuplicateDocumentError(VertfeedError):
    def __init__(self, doc_id):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id {doc_id!r}")


class UnmappedSourceError(VertfeedError):
    def __init__(self, source):
        self.source = source
        super().__init__(f"source {source!r} is not assigned to any vertical and no default vertical is set")


class VerticalConfigError(VertfeedError):
    """The vertical/source mapping is malformed."""


class EmptyQueryError(VertfeedError):
    """A query model has no terms."""


class UnknownDocumentError(VertfeedError):
    def __init__(self, doc_id):
        self.doc_id = doc_id
        super().__init__(f"unknown document {doc_id!r}")


class EmptyExpansionModelError(VertfeedError):
    def __init__(self):
        super().__init__("empty expansion model")


class UnknownTopicError(VertfeedError):
    def __init__(self, topic_id):
        self.topic_id = topic_id
        super().__init__(f"unknown topic {topic_id!r}")


class MixedMethodsError(VertfeedError):
    """Cost reports of different methods were aggregated together."""


class MissingInputError(VertfeedError):
    def __init__(self, name, path=None):
        self.name = name
        self.path = None if path is None else str(path)
        detail = f" ({self.path})" if path is not None else ""
        super().__init__(f"missing input: {name}{detail}")


class IndexFormatError(VertfeedError):
    """A stored index file is unreadable or has an unsupported format version."""
