"""Exception types raised by the solvers."""


class MomexError(Exception):
    pass


class ShapeError(MomexError, ValueError):
    pass


class InvalidDimensionError(MomexError, ValueError):
    pass


class SymmetryError(MomexError, ValueError):
    pass


class DimensionTooLargeError(MomexError, ValueError):
    pass


class TruncationHeadroomError(MomexError, ValueError):
    """A requested moment needs more Fock levels than the state carries."""


class DepthError(MomexError, ValueError):
    """The moment hierarchy is too shallow for the requested quantity."""


class UnsupportedGeneratorError(MomexError, ValueError):
    pass


class RangeError(MomexError, ArithmeticError):
    """A truncated eigenvector construction would overflow or is unreliable."""


class NoConvergenceError(MomexError, RuntimeError):
    pass


class DivergenceError(MomexError, ArithmeticError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step, time=None, message=None):
        self.step = step
        self.time = time
        if message is None:
            message = f"state became non-finite at step {step}"
            if time is not None:
                message += f" (t = {time:g})"
        super().__init__(message)


class ConfigError(MomexError, ValueError):
    pass
