"""
Exceptions and warnings for the unitrod toolkit.

Every failure raised by the library is a UnitRodError so the CLI can map
them to exit code 2 in one place.
"""


class UnitRodError(Exception):
    """Base class for all toolkit errors"""


# graph-core
class DuplicateEdge(UnitRodError):
    pass


class SelfLoop(UnitRodError):
    pass


class NonPositiveLength(UnitRodError):
    pass


class MissingVertexCoordinates(UnitRodError):
    pass


class VertexOutOfRange(UnitRodError):
    pass


# gadgets
class DimensionTooSmall(UnitRodError):
    pass


class LengthMismatch(UnitRodError):
    pass


class EdgeNotFound(UnitRodError):
    pass


class InvalidInterval(UnitRodError):
    pass


class IterationCapExceeded(UnitRodError):
    pass


# reduction
class DomainError(UnitRodError):
    pass


class InvalidInputGraph(UnitRodError):
    pass


class RodUnavailable(UnitRodError):
    pass


# witness
class InvalidColoring(UnitRodError):
    pass


class TriangleInfeasible(UnitRodError):
    pass


class DegeneracyRetryExhausted(UnitRodError):
    """Random rotations kept producing degenerate placements.

    Bad rotations form a measure-zero set, so hitting this almost always
    means the tolerances are too coarse for the instance size.
    """


class NotAnEmbedding(UnitRodError):
    pass


class DegenerateK(UnitRodError):
    pass


# solver / oracle
class InsufficientSuccesses(UnitRodError):
    pass


class PartialColoring(UnitRodError):
    pass


class TooLarge(UnitRodError):
    pass


# serialization
class MalformedHeader(UnitRodError):
    pass


class SchemaViolation(UnitRodError):
    pass


class EdgeCountMismatch(UserWarning):
    """DIMACS header edge count differs from the number of distinct edges read"""


class DuplicateEdgeLines(UserWarning):
    """DIMACS input repeated an edge; the repeats were collapsed"""
