"""Exception hierarchy shared by every stage of the pipeline."""


class EngineError(Exception):
    """Base class; the CLI maps these to exit code 2."""


class CorpusError(EngineError):
    pass


class MalformedLine(CorpusError):
    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: malformed JSON{': ' + detail if detail else ''}")


class MissingField(CorpusError):
    def __init__(self, line_no: int, field: str):
        self.line_no = line_no
        self.field = field
        super().__init__(f"line {line_no}: missing or non-string field {field!r}")


class DuplicateId(CorpusError):
    def __init__(self, doc_id: str, line_no: int | None = None):
        self.doc_id = doc_id
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}duplicate document id {doc_id!r}")


class ResourceError(EngineError):
    pass


class BadRow(ResourceError):
    def __init__(self, line_no: int, detail: str = "wrong column count"):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail}")


class UnknownEntityType(ResourceError):
    def __init__(self, line_no: int, etype: str):
        self.line_no = line_no
        self.etype = etype
        super().__init__(f"line {line_no}: unknown entity type {etype!r}")


class DimensionMismatch(ResourceError):
    def __init__(self, line_no: int | None, expected: int, got: int):
        self.line_no = line_no
        self.expected = expected
        self.got = got
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}expected dimension {expected}, got {got}")


class NonNumeric(ResourceError):
    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: non-numeric or non-finite vector component")


class ZeroVector(EngineError):
    pass


class RetrievalError(EngineError):
    pass


class EmptyIndex(RetrievalError):
    def __init__(self):
        super().__init__("index contains no documents")


class UnknownDocument(RetrievalError):
    def __init__(self, doc_ordinal: int):
        self.doc_ordinal = doc_ordinal
        super().__init__(f"no document with ordinal {doc_ordinal}")


class CorruptIndex(RetrievalError):
    pass


class QueryError(EngineError):
    pass


class EmptyQuery(QueryError):
    def __init__(self, detail: str = "query has no entities"):
        super().__init__(detail)


class NoEvidence(EngineError):
    """The document cannot evidence the query."""

    def __init__(self, doc_id: str, reason: str):
        self.doc_id = doc_id
        self.reason = reason
        super().__init__(f"{doc_id}: {reason}")


class EmptyReference(EngineError):
    def __init__(self):
        super().__init__("reference summary has no tokens")


class GoldenFormat(EngineError):
    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        super().__init__(f"golden line {line_no}: {detail or 'bad record'}")


class ConfigError(EngineError):
    pass
