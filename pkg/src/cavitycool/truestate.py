"""Conditioned evolution of the true atomic state on the spatial grid.

One full time step of the conditioned dynamics interleaves

* a symmetric split step of the unitary part exp(-i H dt) with
  H = pi*P^2 - V(t)*cos^2(ktilde*X): half potential phase in position space,
  full kinetic phase in momentum space (FFT), half potential phase; and
* an Euler-Maruyama step of the measurement back-action.  At unit detection
  efficiency the conditioned state stays pure and obeys the norm-preserving
  nonlinear diffusion

      d psi = [ -G_m (c - <c>)^2 dt - sqrt(2 G_m) (c - <c>) dW ] psi,

  with c = cos^2(ktilde*X) and G_m the measurement strength; the state is
  renormalized explicitly after the update.

The synthesized homodyne record for the same step is

      dr = sqrt(eta) * ( dW - sqrt(8 eta G_m) <c> dt ),

so the time-averaged photocurrent measures -<cos^2(ktilde*X)> up to noise.

All state arrays carry the grid index in the LAST axis; leading axes (a batch
of trajectories in lockstep) broadcast through every operation here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import UnsupportedEfficiencyError
from .grid import SpatialGrid
from .params import ScaledParams


@dataclass
class WaveState:
    """Pure conditioned state: unit-norm amplitudes plus the current drive."""

    grid: SpatialGrid
    psi: np.ndarray              # complex, shape (..., N)
    amplitude: float | np.ndarray  # current V(t); scalar or shape (...)
    time: float = 0.0
    ktilde: float = 0.155

    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.psi) ** 2, axis=-1))


@dataclass
class NoiseStream:
    """Per-trajectory Wiener increments, deterministic in (base_seed, index).

    Draws are buffered in blocks; the emitted sequence does not depend on the
    block size, so records are reproducible regardless of how the stream is
    consumed.
    """

    base_seed: int
    trajectory_index: int
    dt: float
    block: int = 8192

    def __post_init__(self):
        self._rng = np.random.default_rng(
            np.random.SeedSequence((self.base_seed, self.trajectory_index)))
        self._buf = np.empty(0)
        self._pos = 0

    @property
    def rng(self) -> np.random.Generator:
        """Direct generator access (used once, for initial conditions)."""
        return self._rng

    def next_dw(self) -> float:
        return float(self.next_block(1)[0])

    def next_block(self, n: int) -> np.ndarray:
        """Next ``n`` increments; chunk boundaries never affect the sequence."""
        out = np.empty(n)
        filled = 0
        while filled < n:
            if self._pos >= self._buf.size:
                self._buf = self._rng.standard_normal(self.block)
                self._pos = 0
            take = min(n - filled, self._buf.size - self._pos)
            out[filled:filled + take] = self._buf[self._pos:self._pos + take]
            self._pos += take
            filled += take
        return out * math.sqrt(self.dt)


def gaussian_packet(grid: SpatialGrid, x0, p0, vx: float = 0.5) -> np.ndarray:
    """Coherent-state-like wavepacket with position variance ``vx``.

    ``x0`` and ``p0`` may be arrays (leading batch axes).
    """
    x0 = np.asarray(x0, dtype=float)[..., None]
    p0 = np.asarray(p0, dtype=float)[..., None]
    x = grid.positions
    psi = np.exp(-((x - x0) ** 2) / (4.0 * vx) + 1j * p0 * x)
    psi /= np.linalg.norm(psi, axis=-1, keepdims=True)
    return psi


def _propagators(grid: SpatialGrid, dt: float, amplitude: float, ktilde: float):
    """Cached (exp_v_half, exp_kinetic) factors for one drive amplitude."""
    key = (round(dt, 15), round(float(amplitude), 12), round(ktilde, 15))
    hit = grid._prop_cache.get(key)
    if hit is None:
        cos2 = grid.cos_sq(ktilde)
        exp_v_half = np.exp(0.5j * dt * amplitude * cos2)   # potential is -V cos^2
        exp_k = np.exp(-1j * math.pi * grid.spectral_frequencies ** 2 * dt)
        hit = (exp_v_half, exp_k)
        grid._prop_cache[key] = hit
    return hit


def step_hamiltonian(state: WaveState, dt: float) -> WaveState:
    """One Strang split step of exp(-i H dt) at the state's current amplitude."""
    amp = np.asarray(state.amplitude)
    if amp.ndim == 0:
        exp_v, exp_k = _propagators(state.grid, dt, float(amp), state.ktilde)
    else:
        # batch of per-trajectory amplitudes: gather rows from the cache
        uniq = np.unique(amp)
        table = {a: _propagators(state.grid, dt, float(a), state.ktilde) for a in uniq}
        exp_v = np.stack([table[a][0] for a in amp])
        exp_k = table[uniq[0]][1]
    psi = exp_v * state.psi
    psi = np.fft.ifft(exp_k * np.fft.fft(psi, axis=-1), axis=-1)
    psi *= exp_v
    return replace(state, psi=psi, time=state.time + dt)


def _per_row(value):
    """Append a grid axis to batched per-trajectory scalars for broadcasting."""
    value = np.asarray(value)
    return value[..., None] if value.ndim else value


def step_measurement(state: WaveState, dW, p: ScaledParams, dt: float,
                     gamma_scale=1.0) -> WaveState:
    """Euler-Maruyama measurement step of the pure-state unraveling (eta = 1).

    ``gamma_scale`` rescales the measurement strength with the drive
    ((1 +/- eps)^2 when the intracavity intensity follows the switching).
    """
    if p.eta != 1.0:
        raise UnsupportedEfficiencyError(
            "wavefunction unraveling requires eta = 1; use the density-matrix "
            "integrator for eta < 1")
    gm = p.gamma * np.asarray(gamma_scale, dtype=float)
    c = state.grid.cos_sq(state.ktilde)
    prob = np.abs(state.psi) ** 2
    c_mean = prob @ c
    dev = c - c_mean[..., None]
    factor = (1.0 - _per_row(gm * dt) * dev ** 2
              - _per_row(np.sqrt(2.0 * gm)) * dev * _per_row(dW))
    psi = state.psi * factor
    psi /= np.linalg.norm(psi, axis=-1, keepdims=True)
    return replace(state, psi=psi)


def synthesize_photocurrent(c_mean, dW, p: ScaledParams, dt: float,
                            gamma_scale=1.0):
    """Scaled homodyne record increment dr for one step.

    ``c_mean`` is <cos^2(ktilde X)> of the true state.  Inverting this relation
    with the same ``c_mean`` recovers ``dW`` exactly.
    """
    gm = p.gamma * np.asarray(gamma_scale)
    return math.sqrt(p.eta) * (dW - np.sqrt(8.0 * p.eta * gm) * c_mean * dt)


def invert_photocurrent(dr, c_mean, p: ScaledParams, dt: float, gamma_scale=1.0):
    """Noise increment implied by a record ``dr`` and a predicted <cos^2>."""
    gm = p.gamma * np.asarray(gamma_scale)
    return dr / math.sqrt(p.eta) + np.sqrt(8.0 * p.eta * gm) * c_mean * dt


# ---------------------------------------------------------------------------
# Observables

def position_density(psi: np.ndarray) -> np.ndarray:
    return np.abs(psi) ** 2


def expect_diag(psi: np.ndarray, values: np.ndarray) -> np.ndarray:
    """<f(X)> for a position-diagonal grid function."""
    return position_density(psi) @ values


def expect_x(psi: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    return expect_diag(psi, grid.positions)


def momentum_probabilities(psi: np.ndarray) -> np.ndarray:
    psi_k = np.fft.fft(psi, axis=-1)
    prob = np.abs(psi_k) ** 2
    return prob / np.sum(prob, axis=-1, keepdims=True)


def expect_p(psi: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    return momentum_probabilities(psi) @ grid.spectral_frequencies


def expect_p2(psi: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    return momentum_probabilities(psi) @ grid.spectral_frequencies ** 2


def kinetic_energy(psi: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """<pi P^2>."""
    return math.pi * expect_p2(psi, grid)


def energy_relative(psi: np.ndarray, grid: SpatialGrid, ktilde: float,
                    v_nominal: float) -> np.ndarray:
    """<H> + V_nominal with H evaluated at the NOMINAL amplitude.

    Energies are bookkept in the nominal potential even while the drive
    switches, so they compare directly with the band energies.
    """
    c_mean = expect_diag(psi, grid.cos_sq(ktilde))
    return kinetic_energy(psi, grid) + v_nominal * (1.0 - c_mean)


def expect_parity(psi: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    reflected = psi[..., grid.reflection_index]
    return np.real(np.sum(np.conj(psi) * reflected, axis=-1))


def expectation(state: WaveState, which: str | Callable) -> np.ndarray:
    """Observable dispatch for a WaveState.

    ``which`` is one of 'X', 'P', 'P2', 'cos2kX', 'cosSq', 'H_eff', 'parity',
    or a callable f(x) evaluated as a position-diagonal operator.  'H_eff'
    uses the nominal amplitude pi/ktilde^2 and is reported relative to the
    potential minimum.
    """
    grid, psi, k = state.grid, state.psi, state.ktilde
    if callable(which):
        return expect_diag(psi, which(grid.positions))
    match which:
        case "X":
            return expect_x(psi, grid)
        case "P":
            return expect_p(psi, grid)
        case "P2":
            return expect_p2(psi, grid)
        case "cos2kX":
            return expect_diag(psi, np.cos(2 * k * grid.positions))
        case "cosSq":
            return expect_diag(psi, grid.cos_sq(k))
        case "H_eff":
            return energy_relative(psi, grid, k, math.pi / k**2)
        case "parity":
            return expect_parity(psi, grid)
    raise ValueError(f"unknown observable {which!r}")
