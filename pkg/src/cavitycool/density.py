"""Density-matrix integrator of the conditioned master equation.

Validation-scale companion to the wavefunction unraveling (grids of at most
128 points): it propagates the full conditioned density matrix

    d rho = -i[H, rho] dt - G_m [c, [c, rho]] dt
            - sqrt(2 eta G_m) ( [c, rho]_+ - 2<c> rho ) dW,

with c = cos^2(ktilde*X) diagonal in position.  The unitary part uses the
same Strang-split propagator as the wavefunction path (applied as
U rho U^dagger), so trajectory-wise comparisons between the two integrators
isolate the Euler-Maruyama treatment of the measurement terms.  Because c is
diagonal, the measurement terms are elementwise:

    [c, rho]_{ij} = (c_i - c_j) rho_{ij},      [c, rho]_+{ij} = (c_i + c_j) rho_{ij}.

Both measurement terms are traceless, so the pre-renormalization trace drift
per step is pure roundoff; a deviation above 1e-6 indicates a broken step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import StepSizeError
from .grid import SpatialGrid
from .params import ScaledParams

MAX_DENSITY_POINTS = 128


@dataclass
class DensityState:
    grid: SpatialGrid
    rho: np.ndarray              # complex, (N, N), unit trace
    amplitude: float
    time: float = 0.0
    ktilde: float = 0.155

    @classmethod
    def from_psi(cls, grid: SpatialGrid, psi: np.ndarray, amplitude: float,
                 ktilde: float, time: float = 0.0) -> "DensityState":
        rho = np.outer(psi, np.conj(psi))
        return cls(grid=grid, rho=rho, amplitude=amplitude, time=time, ktilde=ktilde)

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


def _split_unitary(grid: SpatialGrid, dt: float, amplitude: float,
                   ktilde: float) -> np.ndarray:
    """Dense matrix of the Strang-split one-step propagator."""
    key = ("U", round(dt, 15), round(float(amplitude), 12), round(ktilde, 15))
    hit = grid._prop_cache.get(key)
    if hit is None:
        n = grid.n_points
        exp_v = np.exp(0.5j * dt * amplitude * grid.cos_sq(ktilde))
        exp_k = np.exp(-1j * math.pi * grid.spectral_frequencies ** 2 * dt)
        cols = exp_v[:, None] * np.eye(n, dtype=complex)
        cols = np.fft.ifft(exp_k[:, None] * np.fft.fft(cols, axis=0), axis=0)
        hit = exp_v[:, None] * cols
        grid._prop_cache[key] = hit
    return hit


def measurement_substep(rho: np.ndarray, c: np.ndarray, gm: float, eta: float,
                        dW: float, dt: float) -> np.ndarray:
    """Euler-Maruyama update for the decoherence + conditioning terms alone."""
    diff = c[:, None] - c[None, :]
    total = c[:, None] + c[None, :]
    c_mean = float(np.real(np.sum(c * np.diagonal(rho).real)))
    return rho - gm * dt * diff**2 * rho \
        - math.sqrt(2.0 * eta * gm) * dW * (total - 2.0 * c_mean) * rho


def step_density(state: DensityState, dW: float, p: ScaledParams, dt: float,
                 gamma_scale: float = 1.0) -> DensityState:
    """One full step: split-step unitary, then Euler-Maruyama measurement."""
    if state.grid.n_points > MAX_DENSITY_POINTS:
        raise ValueError(
            f"density integrator is limited to {MAX_DENSITY_POINTS} grid points")
    gm = p.gamma * gamma_scale
    u = _split_unitary(state.grid, dt, state.amplitude, state.ktilde)
    rho = u @ state.rho @ u.conj().T
    rho = measurement_substep(rho, state.grid.cos_sq(state.ktilde), gm, p.eta, dW, dt)

    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1.0) > 1e-6:
        raise StepSizeError(
            f"density trace drifted to {trace!r} before renormalization; reduce dt")
    rho = 0.5 * (rho + rho.conj().T) / trace
    return replace(state, rho=rho, time=state.time + dt)


# ---------------------------------------------------------------------------
# Moments from the density matrix

def density_expect_diag(state: DensityState, values: np.ndarray) -> float:
    return float(np.real(np.sum(values * np.diagonal(state.rho).real)))


def density_expect_x(state: DensityState) -> float:
    return density_expect_diag(state, state.grid.positions)


def density_expect_cos_sq(state: DensityState) -> float:
    return density_expect_diag(state, state.grid.cos_sq(state.ktilde))


def density_momentum_probabilities(state: DensityState) -> np.ndarray:
    transformed = np.fft.ifft(np.fft.fft(state.rho, axis=0), axis=1)
    return np.real(np.diagonal(transformed))


def density_expect_p(state: DensityState) -> float:
    probs = density_momentum_probabilities(state)
    return float(probs @ state.grid.spectral_frequencies)


def density_expect_p2(state: DensityState) -> float:
    probs = density_momentum_probabilities(state)
    return float(probs @ state.grid.spectral_frequencies ** 2)


def density_expect_parity(state: DensityState) -> float:
    """tr(Pi rho) with (Pi rho)_{ij} = rho_{refl(i), j}."""
    refl = state.grid.reflection_index
    idx = np.arange(state.grid.n_points)
    return float(np.real(np.sum(state.rho[refl, idx])))


def density_moments(state: DensityState) -> dict[str, float]:
    """Means and (co)variances (x, p, vx, vp, cxp) plus <cos^2>."""
    x = state.grid.positions
    probs_x = np.diagonal(state.rho).real
    x_mean = float(probs_x @ x)
    x2_mean = float(probs_x @ x**2)
    p_mean = density_expect_p(state)
    p2_mean = density_expect_p2(state)
    # <XP + PX> = 2 Re tr(P rho X): P rho via the spectral representation
    freqs = state.grid.spectral_frequencies
    p_rho = np.fft.ifft(freqs[:, None] * np.fft.fft(state.rho, axis=0), axis=0)
    xp_sym = 2.0 * float(np.real(np.sum(np.diagonal(p_rho) * x)))
    return {
        "x": x_mean,
        "p": p_mean,
        "vx": x2_mean - x_mean**2,
        "vp": p2_mean - p_mean**2,
        "cxp": xp_sym - 2.0 * x_mean * p_mean,
        "cos_sq": density_expect_cos_sq(state),
    }
