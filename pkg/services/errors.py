# errors.py - Exception hierarchy shared by the services and the CLI


class ConductionNetError(Exception):
    """Base class for every error raised by this package"""


class DimensionError(ConductionNetError, ValueError):
    """Tensor shapes do not agree for the requested operation"""


class ConfigurationError(ConductionNetError, ValueError):
    """A configuration record or input violates its preconditions"""


class StabilityError(ConfigurationError):
    """Diffusion coefficient outside the explicit-scheme stability range"""


class CheckpointError(ConductionNetError):
    """Checkpoint file is malformed or has an unsupported version"""


class VerificationError(ConductionNetError):
    """A verification suite (e.g. gradient checks) reported failures"""
