"""
Exception hierarchy for hexloop
"""


class HexLoopError(Exception):
    """Base exception for all hexloop errors"""
    pass


# ==================== Geometry ====================

class NotAClosedWalk(HexLoopError):
    """Boundary walk is not a closed walk of adjacent lattice vertices"""
    pass


class NonSimpleCycle(HexLoopError):
    """Boundary walk repeats a vertex"""
    pass


class OriginOutside(HexLoopError):
    """The origin vertex is neither inside nor on the boundary cycle"""
    pass


class ParityViolation(HexLoopError):
    """Offset does not map the lattice onto itself"""
    pass


# ==================== Configurations ====================

class NotEven(HexLoopError):
    """Some vertex has a degree other than 0 or 2"""
    pass


class DomainMismatch(HexLoopError):
    """Operands belong to different domains"""
    pass


# ==================== Measures / Couplings ====================

class TooLarge(HexLoopError):
    """Domain exceeds the exhaustive enumeration bound"""
    pass


class NonPositiveN(HexLoopError):
    """Loop weight n must be strictly positive"""
    pass


class OutOfRange(HexLoopError):
    """Parameter outside its admissible range"""
    pass


# ==================== Sampling / Analysis ====================

class ChainCorruption(HexLoopError):
    """Incremental chain caches disagree with a full recomputation"""
    pass


class InsufficientData(HexLoopError):
    """Too few usable points for a fit"""
    pass


# ==================== Files ====================

class SchemaError(HexLoopError):
    """Input file does not match its documented schema"""
    pass


class StorageError(HexLoopError):
    """Result files could not be written or read"""
    pass
