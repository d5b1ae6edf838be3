"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration values."""


class UnknownKeyError(ConfigError):
    """A config file or --set override used a key that does not exist."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unknown configuration key: {key!r}")


class UnsupportedEfficiencyError(ValueError):
    """Wavefunction unraveling was requested at eta < 1.

    Sub-unit detection efficiency mixes the conditioned state; use the
    density-matrix integrator for that regime.
    """


class EstimatorDivergedError(RuntimeError):
    """The Gaussian estimator produced a non-finite moment."""


class StepSizeError(RuntimeError):
    """A stochastic step violated its pre-renormalization tolerance."""


class UncontrollableRegimeError(ValueError):
    """Steady-state theory requested for beta >= 1 (heating beats cooling)."""


class EnsembleInvalidError(RuntimeError):
    """Too many trajectories of an ensemble failed for the run to be used."""
