"""Exception hierarchy.

Every error carries a short ``code`` string so that callers (the CLI in
particular) can report failures uniformly.
"""


class LaneEmdenError(Exception):
    code = "error"


class InvalidRange(LaneEmdenError, ValueError):
    code = "invalid-range"


class NonconvergentTail(LaneEmdenError, ValueError):
    code = "nonconvergent-tail"


class SingularMatrix(LaneEmdenError, ArithmeticError):
    code = "singular-matrix"


class NoConvergence(LaneEmdenError, RuntimeError):
    code = "no-convergence"


class DegenerateWindow(LaneEmdenError, ValueError):
    code = "degenerate-window"


class ExponentOutOfRange(LaneEmdenError, ValueError):
    code = "exponent-out-of-range"


class BracketNotFound(LaneEmdenError, RuntimeError):
    code = "bracket-not-found"


class TailNotResolved(LaneEmdenError, RuntimeError):
    code = "tail-not-resolved"


class CoincidentPoints(LaneEmdenError, ValueError):
    code = "coincident-points"


class InsideHole(LaneEmdenError, ValueError):
    code = "inside-hole"


class OutsideBall(LaneEmdenError, ValueError):
    code = "outside-ball"


class MeshTooCoarse(LaneEmdenError, RuntimeError):
    code = "mesh-too-coarse"


class IndexOutOfRange(LaneEmdenError, IndexError):
    code = "index-out-of-range"


class UnderResolvedMesh(LaneEmdenError, ValueError):
    code = "under-resolved-mesh"


class ConsistencyFailure(LaneEmdenError, RuntimeError):
    code = "consistency-failure"


class ConvergedToZero(LaneEmdenError, RuntimeError):
    code = "converged-to-zero"


class NewtonDivergence(LaneEmdenError, RuntimeError):
    code = "newton-divergence"
