"""
Exception types raised by latentdg.
"""


class ShapeError(ValueError):
    """Raised when an operation receives inputs with incompatible shapes."""

    def __init__(self, op, message):
        self.op = op
        super().__init__("{}: {}".format(op, message))


class GraphError(RuntimeError):
    """Raised when backpropagation is requested on an invalid graph."""


class DivergenceError(FloatingPointError):
    """Raised when a loss or gradient becomes non-finite during training."""

    def __init__(self, message, epoch=None, step=None):
        self.epoch = epoch
        self.step = step
        if epoch is not None or step is not None:
            message = "{} (epoch {}, step {})".format(message, epoch, step)
        super().__init__(message)


class CheckpointError(ValueError):
    """Raised when a checkpoint file cannot be read or does not match."""


class ConfigError(ValueError):
    """Raised for invalid configuration values or unknown keys."""
