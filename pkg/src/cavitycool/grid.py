"""Periodic spatial grid for the optical-lattice well.

The domain covers ``domain_periods`` lattice periods of length pi/ktilde,
centered so the well minimum of -V*cos^2(ktilde*x) sits at x = 0 and the
reflection x -> -x maps grid points onto grid points (index i -> (N-i) mod N).
Wavefunctions are stored as unit 2-norm complex vectors; momentum-space
operations use the FFT with angular spectral frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(eq=False)
class SpatialGrid:
    n_points: int
    domain_length: float
    positions: np.ndarray
    spectral_frequencies: np.ndarray
    dx: float
    reflection_index: np.ndarray
    _prop_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def for_lattice(cls, ktilde: float, n_points: int = 512,
                    domain_periods: int = 1) -> "SpatialGrid":
        if n_points < 4 or (n_points & (n_points - 1)) != 0:
            raise ConfigError(f"grid size must be a power of two >= 4, got {n_points}")
        if domain_periods < 1:
            raise ConfigError("domain_periods must be >= 1")
        length = domain_periods * math.pi / ktilde
        dx = length / n_points
        positions = (np.arange(n_points) - n_points // 2) * dx
        freqs = 2 * np.pi * np.fft.fftfreq(n_points, d=dx)
        reflection = (n_points - np.arange(n_points)) % n_points
        return cls(n_points=n_points, domain_length=length, positions=positions,
                   spectral_frequencies=freqs, dx=dx, reflection_index=reflection)

    def cos_sq(self, ktilde: float) -> np.ndarray:
        """cos^2(ktilde * x) sampled on the grid (cached per ktilde)."""
        key = ("cos_sq", round(ktilde, 15))
        hit = self._prop_cache.get(key)
        if hit is None:
            hit = np.cos(ktilde * self.positions) ** 2
            self._prop_cache[key] = hit
        return hit
