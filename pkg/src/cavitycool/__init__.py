"""Feedback cooling of a continuously observed atom in an optical-lattice well.

The package simulates the conditioned motion of a single trapped atom whose
position is monitored through homodyne detection of the cavity output, runs a
real-time Gaussian estimator and a bang-bang depth controller against the
synthesized photocurrent, and provides the analysis layer (band populations,
parity statistics, steady-state theory) for studying the closed loop.
"""

__version__ = "0.1.0"

from .params import (ControlConfig, PhysicalParams, RunConfig, ScaledParams,
                     SimConfig, derive_scaled, descale, resolve_config)
from .grid import SpatialGrid
from .truestate import (NoiseStream, WaveState, expectation, gaussian_packet,
                        invert_photocurrent, step_hamiltonian,
                        step_measurement, synthesize_photocurrent)
from .density import DensityState, density_moments, step_density
from .estimator import GaussianState, InnovationRecord, estimator_step, gaussian_closure
from .controller import (ControllerState, QuadraticFit, decide, push_and_fit,
                         select_signal_source)
from .analysis import (BandBasis, TheoryInputs, band_populations,
                       compute_band_basis, heating_rate, parity_statistics,
                       theory_ss_energy)
from .ensemble import (EnsembleStats, TrajectoryRecord, epsilon_sweep,
                       run_ensemble, run_trajectory)
