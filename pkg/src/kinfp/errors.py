"""Exception types shared across the package."""


class RangeError(ValueError):
    """Exponent m lies outside the admissible interval for the given dimension."""


class DomainError(ValueError):
    """Argument outside the domain of definition (e.g. nonpositive time)."""


class IntegralDivergence(ArithmeticError):
    """A requested moment or normalization integral diverges."""


class CFLError(RuntimeError):
    """Explicit substepping would exceed the configured substep cap."""


class ConvergenceError(RuntimeError):
    """An iterative procedure (bisection, eigensolver) failed to converge."""


class InversionError(RuntimeError):
    """Numerical inversion of a scalar function failed."""


class NonFiniteError(RuntimeError):
    """A field developed non-finite values during time stepping."""


class SingularShift(RuntimeError):
    """Shift-invert factorization hit a (near-)singular shift."""
