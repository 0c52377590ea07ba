"""Exception hierarchy.

Every error raised on bad input derives from :class:`InputError`; failures of
the numerical machinery derive from :class:`NumericalError`. The CLI maps the
two families to exit codes 2 and 3.
"""


class CTSTError(Exception):
    """Base class for all package errors."""


class InputError(CTSTError, ValueError):
    pass


class NumericalError(CTSTError, ArithmeticError):
    pass


# graph
class SelfLoopError(InputError):
    pass


class NegativeWeightError(InputError):
    pass


class NodeOutOfRangeError(InputError):
    pass


class DuplicateEdgeError(InputError):
    pass


class LengthMismatchError(InputError):
    pass


class EmptyGraphError(InputError):
    pass


# kernels / samples
class DimensionMismatchError(InputError):
    pass


class TooFewPointsError(InputError):
    pass


class AllPointsIdenticalError(InputError):
    pass


class EmptyDataError(InputError):
    pass


class DuplicateAnchorsError(InputError):
    pass


class EmptyNodeSampleError(InputError):
    pass


class NodeCountMismatchError(InputError):
    pass


class NonFiniteKernelMatrixError(NumericalError):
    pass


# estimation
class SingularBlockSystemError(NumericalError):
    pass


class NonFiniteObjectiveError(NumericalError):
    pass


class TooFewObservationsForFoldsError(InputError):
    pass


# testing
class InvalidPermutationError(InputError):
    pass


class InvalidRateError(InputError):
    pass


class EmptyListError(InputError):
    pass


# scenarios / evaluation
class UnknownScenarioError(InputError):
    pass


class UnknownMethodError(InputError):
    pass


class EmptyInputError(InputError):
    pass


class EmptyAffectedSetError(InputError):
    pass


class DegenerateLabelsError(InputError):
    pass


class EmptyCurveError(InputError):
    pass


# seismic pipeline
class TooFewStationsError(InputError):
    pass


class DuplicateCoordinatesError(InputError):
    pass


class SeriesTooShortError(InputError):
    pass


class SamplingRateTooLowError(InputError):
    pass


class ZeroVarianceError(InputError):
    pass


# io
class ParseError(InputError):
    pass
