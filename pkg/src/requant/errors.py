"""Exception hierarchy shared by all modules."""


class RequantError(Exception):
    """Base class for numerical failures raised by the toolkit."""


class DimensionMismatch(RequantError, ValueError):
    pass


class NonHermitian(RequantError, ValueError):
    pass


class NonSymplecticPoint(RequantError):
    """The pulled-back symplectic form is singular (or ill-conditioned) here."""


class StepSizeUnderflow(RequantError):
    pass


class NoClosureFound(RequantError):
    pass


class BracketNotFound(RequantError):
    pass


class NotACylinderOrbit(RequantError):
    pass


class ZeroAverage(RequantError):
    pass


class SpectrumNotInteger(RequantError):
    pass


class NotConverged(RequantError):
    pass


class SaddlePoint(RequantError):
    pass


class ComplexInstability(RequantError):
    pass


class NegativePhaseDirection(RequantError):
    pass


class TargetUnreachable(RequantError):
    pass


class TruncationInsufficient(RequantError):
    pass


class IncommensurateSpectrum(RequantError):
    pass


class NonCommutingGenerators(RequantError, ValueError):
    pass
