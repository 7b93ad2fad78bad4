"""Exception types shared across the package.

Every error carries the name of the subsystem it belongs to (used by the
CLI to qualify diagnostics) and the CLI exit code class: 1 for usage
errors, 2 for data/policy errors, 3 for a benchmark oracle mismatch.
"""


class AgdbError(Exception):
    module = "agdb"
    exit_code = 2


# -- object model ------------------------------------------------------------

class ModelError(AgdbError):
    module = "model"


class UnknownAnchor(ModelError):
    pass


class DuplicateId(ModelError):
    pass


class CycleDetected(ModelError):
    pass


class InvalidFeatureName(ModelError):
    pass


# -- import/export formats ---------------------------------------------------

class FormatError(AgdbError):
    module = "formats"


class UnsupportedFormat(FormatError):
    exit_code = 1


class BadDocument(FormatError):
    pass


# -- connect strings / config ------------------------------------------------

class ConnectError(AgdbError):
    module = "connect"
    exit_code = 1


class MalformedPair(ConnectError):
    pass


class UnknownDsn(ConnectError):
    pass


# -- relational store --------------------------------------------------------

class StoreError(AgdbError):
    module = "store"


class StorageFailure(StoreError):
    pass


class UnknownAgset(StoreError):
    pass


class UnknownAnnotation(StoreError):
    pass


class PolicyViolation(StoreError):
    pass


class VersionConflict(StoreError):
    pass


# -- query language frontend -------------------------------------------------

class QueryLanguageError(AgdbError):
    module = "agql"
    exit_code = 1


class LexError(QueryLanguageError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ParseError(QueryLanguageError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
        self.expected = expected


class UnboundSelectVariable(QueryLanguageError):
    pass


# -- closure indexes ---------------------------------------------------------

class ClosureError(AgdbError):
    module = "closure"


class MissingOffsets(ClosureError):
    pass


# -- query planner / engine --------------------------------------------------

class EngineError(AgdbError):
    module = "engine"


class MissingIndex(EngineError):
    pass


class UnknownCorpus(EngineError):
    pass


class UnknownFeature(EngineError):
    pass


# -- benchmark harness -------------------------------------------------------

class BenchError(AgdbError):
    module = "bench"


class OracleMismatch(BenchError):
    exit_code = 3


class BenchTimeout(BenchError):
    pass
