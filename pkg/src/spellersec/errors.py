"""Exception types shared across the package."""


class SpellersecError(Exception):
    """Base class for package errors."""


class ParameterError(SpellersecError, ValueError):
    """Invalid argument: bad band edges, unknown character, wrong shape."""


class BoundsError(ParameterError):
    """Index or window falls outside the recorded signal."""


class DegenerateInputError(SpellersecError, ValueError):
    """Input has no usable variation (constant channel, zero perturbation)."""


class ConvergenceError(SpellersecError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""


class FormatError(SpellersecError, ValueError):
    """A serialized file is malformed, truncated, or has an unknown version."""
