"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or unknown key."""


class ShapeError(ValueError):
    """Array dimensions do not chain or do not match."""


class NumericalDivergence(FloatingPointError):
    """A non-finite value appeared in states, actions, gradients or targets."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class BufferUnderfilled(RuntimeError):
    """The replay buffer holds fewer transitions than the requested batch."""
