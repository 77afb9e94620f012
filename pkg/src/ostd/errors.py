"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised for out-of-domain arguments or mismatched dimensions."""


class NumericError(ArithmeticError):
    """A numerical failure during estimation.

    ``slot`` and ``trajectory`` are filled in when the failure can be
    attributed to a position in an experiment run.
    """

    def __init__(self, message, slot=None, trajectory=None):
        super().__init__(message)
        self.slot = slot
        self.trajectory = trajectory

    def __str__(self):
        msg = super().__str__()
        where = []
        if self.trajectory is not None:
            where.append(f"trajectory {self.trajectory}")
        if self.slot is not None:
            where.append(f"slot {self.slot}")
        return f"{msg} ({', '.join(where)})" if where else msg


class IllConditionedError(NumericError):
    """A linear system was too badly conditioned to solve reliably."""

    def __init__(self, message, condition=float("inf"), slot=None, trajectory=None):
        super().__init__(f"{message}; condition estimate {condition:.3e}", slot, trajectory)
        self.condition = condition
