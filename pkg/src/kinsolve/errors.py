"""Exception hierarchy.

``InputError`` subclasses signal malformed or inconsistent input (CLI exit
code 1); ``NumericalError`` subclasses signal geometry the solvers cannot
handle (CLI exit code 2).
"""


class KinsolveError(Exception):
    pass


class InputError(KinsolveError, ValueError):
    pass


class NumericalError(KinsolveError, ArithmeticError):
    pass


class SchemaError(InputError):
    def __init__(self, message, pointer=""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}" if pointer is not None else message)


class DimensionMismatch(InputError):
    pass


class RootHasNoBone(InputError):
    pass


class ZeroVector(NumericalError):
    pass


class Degenerate(NumericalError):
    pass


class DegenerateTriplet(NumericalError):
    pass


class ZeroBone(NumericalError):
    pass


class CoincidentAC(NumericalError):
    pass


class Infeasible(NumericalError):
    pass


class BehindCamera(NumericalError):
    pass


class DegenerateObservation(NumericalError):
    pass


class NonFinite(NumericalError):
    pass
