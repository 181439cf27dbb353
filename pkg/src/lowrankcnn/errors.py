"""Exception types shared across the package."""


class LowRankCnnError(Exception):
    """Base class for all package errors."""


class ShapeError(LowRankCnnError):
    """An operation received tensors whose dimensions do not fit together.

    The message always names the offending dimension so callers can report
    which axis broke the contract.
    """

    def __init__(self, op, dimension, expected, got):
        self.op = op
        self.dimension = dimension
        self.expected = expected
        self.got = got
        super().__init__(
            f"{op}: dimension '{dimension}' expected {expected}, got {got}"
        )


class ArchError(LowRankCnnError):
    """An architecture spec failed validation."""


class UnknownModelError(LowRankCnnError):
    """Requested model name is not in the zoo; message lists what is."""

    def __init__(self, name, available):
        self.name = name
        self.available = list(available)
        super().__init__(
            f"unknown model '{name}'; available: {', '.join(self.available)}"
        )


class DataFormatError(LowRankCnnError):
    """A data file violates its binary format; carries the byte offset."""

    def __init__(self, path, offset, reason):
        self.path = str(path)
        self.offset = offset
        self.reason = reason
        super().__init__(f"{path} at byte {offset}: {reason}")


class CheckpointError(LowRankCnnError):
    """A checkpoint file is malformed or fails its integrity check."""


class TrainingDiverged(LowRankCnnError):
    """Loss became non-finite during training."""

    def __init__(self, iteration, loss):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"loss is {loss} at iteration {iteration}; aborting")
