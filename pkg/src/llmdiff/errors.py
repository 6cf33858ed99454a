"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class NotInitializedError(RuntimeError):
    """A required model or checkpoint has not been loaded/trained."""


class TrainingFailureError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class DegenerateInputError(ValueError):
    """Input is numerically degenerate (e.g. a zero-norm token row)."""


class CheckpointIntegrityError(RuntimeError):
    """A checkpoint file is corrupt, truncated, or inconsistent with its header."""


class EmptyDatasetError(RuntimeError):
    """A dataset filter left nothing to train on."""


class InvalidManifestError(ValueError):
    """A comparison-pair manifest references missing data."""


class SessionNotFoundError(KeyError):
    """Unknown evaluation session id."""


class PairNotFoundError(KeyError):
    """Pair index outside the session's range."""


class IncompleteSessionError(RuntimeError):
    """Results were requested before every pair received a vote."""

    def __init__(self, missing: dict):
        self.missing = missing  # session id -> sorted list of unvoted indices
        parts = ", ".join(f"{sid}: {idx}" for sid, idx in missing.items())
        super().__init__(f"sessions incomplete ({parts})")
