"""Error hierarchy shared by the simulator, the learning engine and the services."""


class SimulationError(Exception):
    """Base class for every error raised by the engine."""


class ParameterError(SimulationError, ValueError):
    """Invalid argument or value outside the model's domain."""


class ConstraintViolationError(SimulationError):
    """A cluster assignment leaves some UE without a serving AP."""


class NumericalError(SimulationError, ArithmeticError):
    """Numerical breakdown (non-PSD covariance, saturated probabilities)."""


class CheckpointMismatchError(SimulationError):
    """Checkpoint cannot be used with the requested scenario."""


class ConfigError(SimulationError):
    """Experiment configuration is missing, unreadable or invalid."""
