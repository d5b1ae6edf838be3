"""Observables and theory: band structure, parity statistics, rate formulas.

Band energies come from dense diagonalization of the discretized
H = pi*P^2 - Vmax*cos^2(ktilde*X) (spectral kinetic matrix plus diagonal
potential) at the nominal depth, and are reported relative to the potential
minimum -Vmax.  In scaled units the harmonic approximation to one well is
H + Vmax ~= pi (P^2 + X^2), so the lowest levels sit near pi*(2n+1); at the
default depth Vmax ~= 131 the first two are within 1% of pi and 3*pi.

The steady-state energy theory balances the coarse-grained feedback cooling
rate -8*eps*(<H> - E0) against measurement heating 4*Gamma*ktilde^4*<H>
(harmonic form), giving

    <H>_ss = (E0 + E1) / (2 * (1 - beta)),        beta = Gamma*ktilde^4/(2*eps),

where the replacement E0 -> (E0+E1)/2 accounts for the conserved-parity split
of the ensemble between the lowest two bands.  A squeezed-excess variant
replaces 1/(1-beta) by (1-beta^2)^(-1/2) and always predicts less energy.

The exact measurement heating rate used for diagnostics is

    d<H>/dt = 8*pi*Gamma*ktilde^2 * <cos^2(ktilde X) sin^2(ktilde X)>,

which reduces to 4*Gamma*ktilde^4*<H> in the harmonic regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UncontrollableRegimeError
from .grid import SpatialGrid
from .params import ScaledParams


@dataclass
class BandBasis:
    """Lowest eigenstates of the nominal-lattice Hamiltonian on the grid."""

    energies_rel: np.ndarray     # relative to -Vmax, nondecreasing
    states: np.ndarray           # (N, M) orthonormal columns
    domain_periods: int

    @property
    def n_states(self) -> int:
        return self.states.shape[1]

    def band_energy(self, band: int) -> float:
        """Mean energy of a band's cluster (single state when one period)."""
        m = self.domain_periods
        return float(np.mean(self.energies_rel[band * m:(band + 1) * m]))


def hamiltonian_matrix(grid: SpatialGrid, ktilde: float, amplitude: float) -> np.ndarray:
    """Dense discretized H = pi P^2 - amplitude cos^2(ktilde X)."""
    n = grid.n_points
    kin_diag = math.pi * grid.spectral_frequencies ** 2
    kinetic = np.fft.ifft(kin_diag[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
    h = kinetic + np.diag(-amplitude * grid.cos_sq(ktilde))
    return 0.5 * (h + h.conj().T)


def compute_band_basis(p: ScaledParams, grid: SpatialGrid,
                       n_states: int | None = None,
                       domain_periods: int = 1) -> BandBasis:
    """Diagonalize the nominal lattice and keep the lowest states."""
    if n_states is None:
        n_states = max(8, 6 * domain_periods)
    h = hamiltonian_matrix(grid, p.ktilde, p.vmax)
    energies, vectors = np.linalg.eigh(h)
    order = np.argsort(energies)[:n_states]
    return BandBasis(energies_rel=energies[order] + p.vmax,
                     states=vectors[:, order],
                     domain_periods=domain_periods)


def band_populations(psi: np.ndarray, basis: BandBasis, n_bands: int = 4):
    """Populations of the lowest bands plus the remainder.

    ``psi`` may carry leading batch axes.  With several lattice periods each
    band is the sum over its cluster of ``domain_periods`` states.
    """
    amps = psi @ np.conj(basis.states)            # (..., M)
    probs = np.abs(amps) ** 2
    m = basis.domain_periods
    pops = np.stack([probs[..., b * m:(b + 1) * m].sum(axis=-1)
                     for b in range(n_bands)], axis=-1)
    remainder = 1.0 - pops.sum(axis=-1)
    return pops, remainder


@dataclass
class TheoryInputs:
    """Inputs to the steady-state energy prediction."""

    epsilon: float
    gamma: float
    ktilde: float
    e0: float = math.pi
    e1: float = 3 * math.pi

    @property
    def beta(self) -> float:
        return self.gamma * self.ktilde**4 / (2.0 * self.epsilon)

    @property
    def controllable(self) -> bool:
        return self.beta < 1.0


def theory_ss_energy(t: TheoryInputs, variant: str = "centroid") -> float:
    """Predicted steady-state <H> relative to the potential minimum."""
    if not t.controllable:
        raise UncontrollableRegimeError(
            f"beta = {t.beta:.3g} >= 1: heating exceeds feedback cooling, "
            "no finite steady state")
    base = 0.5 * (t.e0 + t.e1)
    if variant == "centroid":
        return base / (1.0 - t.beta)
    if variant == "squeezing":
        return base / math.sqrt(1.0 - t.beta**2)
    raise ValueError(f"unknown theory variant {variant!r}")


def heating_rate(gamma: float, ktilde: float, cos_sq_sin_sq_mean):
    """Measurement heating d<H>/dt from <cos^2(kX) sin^2(kX)>."""
    return 8.0 * math.pi * gamma * ktilde**2 * np.asarray(cos_sq_sin_sq_mean)


def heating_rate_harmonic(gamma: float, ktilde: float, energy_rel):
    """Harmonic-regime form 4*Gamma*ktilde^4*<H> of the heating rate."""
    return 4.0 * gamma * ktilde**4 * np.asarray(energy_rel)


def cooling_rate(epsilon: float, energy_rel, e0: float):
    """Coarse-grained feedback cooling rate -8*eps*(<H> - E0)."""
    return -8.0 * epsilon * (np.asarray(energy_rel) - e0)


@dataclass
class ParityStats:
    """Ensemble parity diagnostics (martingale drift, purification, split)."""

    drift: float                 # mean of final - initial <parity>
    drift_se: float
    purified_fraction: float     # trajectories with |<parity>| > 0.99 at the end
    even_fraction: float         # sign of final <parity> > 0
    n_trajectories: int

    def drift_consistent_with_zero(self, n_sigma: float = 2.0) -> bool:
        return abs(self.drift) <= n_sigma * self.drift_se

    def even_split_interval(self, confidence_z: float = 1.96) -> tuple[float, float]:
        half = confidence_z * math.sqrt(0.25 / self.n_trajectories)
        return 0.5 - half, 0.5 + half


def parity_statistics(parity_series: np.ndarray,
                      purity_threshold: float = 0.99) -> ParityStats:
    """Diagnostics from per-trajectory <parity> time series, shape (B, T)."""
    series = np.asarray(parity_series, dtype=float)
    if series.ndim != 2 or series.shape[0] < 2:
        raise ValueError("parity_statistics expects (n_trajectories >= 2, n_times)")
    deltas = series[:, -1] - series[:, 0]
    n = series.shape[0]
    drift = float(np.mean(deltas))
    drift_se = float(np.std(deltas, ddof=1) / math.sqrt(n))
    purified = float(np.mean(np.abs(series[:, -1]) > purity_threshold))
    even = float(np.mean(series[:, -1] > 0))
    return ParityStats(drift=drift, drift_se=drift_se, purified_fraction=purified,
                       even_fraction=even, n_trajectories=n)
