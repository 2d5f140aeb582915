"""Exception types raised across the package."""


class FedImbError(Exception):
    """Base class for every error raised by fedimb."""


class InvalidParameterError(FedImbError, ValueError):
    pass


class MalformedFileError(FedImbError):
    pass


class CorruptRecordError(FedImbError):
    def __init__(self, message, record_index):
        super().__init__(message)
        self.record_index = record_index


class InfeasiblePartitionError(FedImbError):
    pass


class EmptyShardError(FedImbError):
    pass


class EmptyGroupError(FedImbError):
    pass


class NumericFailureError(FedImbError, ArithmeticError):
    pass


class ConfigError(FedImbError, ValueError):
    pass


class ExperimentError(FedImbError):
    """Wraps a failure inside run_experiment with the seed and round it happened at."""

    def __init__(self, message, seed=None, round_index=None):
        where = f"seed={seed}"
        if round_index is not None:
            where += f", round={round_index}"
        super().__init__(f"{message} [{where}]")
        self.seed = seed
        self.round_index = round_index
