"""Exception hierarchy shared by every module.

Each error carries a ``category`` used by the CLI to pick an exit code and to
print a machine-readable error line.
"""


class TurbcloudError(Exception):
    category = "error"
    exit_code = 1

    def __init__(self, message, module=None):
        super().__init__(message)
        self.module = module


class InvalidParameter(TurbcloudError, ValueError):
    category = "invalid-parameter"


class InvalidInput(TurbcloudError, ValueError):
    category = "invalid-input"


class InsufficientData(TurbcloudError, ValueError):
    category = "insufficient-data"


class UnsupportedDimension(TurbcloudError, ValueError):
    category = "unsupported-dimension"


class UnsupportedConfiguration(TurbcloudError, ValueError):
    category = "unsupported-configuration"


class SizeError(TurbcloudError, ValueError):
    category = "size"


class CouplingOrderError(TurbcloudError, RuntimeError):
    category = "coupling-order"


class SpectrumNormalizationError(TurbcloudError, ValueError):
    category = "spectrum-normalization"

    def __init__(self, message, total_energy=None, target=None, module="turbulence"):
        super().__init__(message, module=module)
        self.total_energy = total_energy
        self.target = target


class ConfigError(TurbcloudError):
    category = "config"
    exit_code = 2

    def __init__(self, message, key=None):
        super().__init__(message, module="cli")
        self.key = key


class StabilityError(TurbcloudError, RuntimeError):
    category = "numerical-stability"
    exit_code = 3

    def __init__(self, message, admissible_dt=None, module=None):
        super().__init__(message, module=module)
        self.admissible_dt = admissible_dt


class PositivityError(StabilityError):
    category = "positivity"


class FitFailure(TurbcloudError, RuntimeError):
    category = "fit-failure"
    exit_code = 4

    def __init__(self, message, interval=None, module=None):
        super().__init__(message, module=module)
        self.interval = interval
