"""Fast invariant suite behind ``cavitycool validate``.

Each check returns (name, passed, detail).  These are quick smoke-level
renditions of the package's core contracts (seconds, not the full statistical
acceptance runs).
"""

from __future__ import annotations

import math

import numpy as np

from .analysis import TheoryInputs, compute_band_basis, theory_ss_energy
from .controller import ControllerState, push_and_fit
from .estimator import GaussianState, cos_sq_mean
from .grid import SpatialGrid
from .params import RunConfig
from .truestate import (WaveState, energy_relative, gaussian_packet,
                        invert_photocurrent, step_hamiltonian,
                        synthesize_photocurrent)


def run_invariant_suite(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    scaled = cfg.resolve_scaled()
    k, vmax = scaled.ktilde, scaled.vmax
    results = []

    results.append(("vmax consistency", abs(vmax * k**2 - math.pi) < 1e-12,
                    f"vmax*ktilde^2 = {vmax * k**2:.15f}"))

    grid = SpatialGrid.for_lattice(k, 256, 1)
    basis = compute_band_basis(scaled, grid)
    e0, e1 = basis.energies_rel[0], basis.energies_rel[1]
    results.append(("band energies near harmonic",
                    abs(e0 / math.pi - 1) < 0.011 and abs(e1 / (3 * math.pi) - 1) < 0.011,
                    f"E0 = {e0:.4f} (pi = {math.pi:.4f}), E1 = {e1:.4f} (3pi = {3 * math.pi:.4f})"))

    # unitary conservation at gamma = 0
    psi = gaussian_packet(grid, 1.0, 0.0)
    state = WaveState(grid=grid, psi=psi, amplitude=vmax, ktilde=k)
    e_start = float(energy_relative(state.psi, grid, k, vmax))
    for _ in range(2000):
        state = step_hamiltonian(state, cfg.control.dt)
    e_end = float(energy_relative(state.psi, grid, k, vmax))
    norm_err = abs(float(state.norm()) - 1.0)
    drift = abs(e_end - e_start) / abs(e_start)
    results.append(("unitary energy conservation", drift < 1e-6 and norm_err < 1e-12,
                    f"relative drift {drift:.2e}, norm error {norm_err:.2e}"))

    # photocurrent inversion identity
    rng = np.random.default_rng(0)
    dw = rng.standard_normal(64) * math.sqrt(cfg.control.dt)
    c_mean = rng.uniform(0, 1, 64)
    dr = synthesize_photocurrent(c_mean, dw, scaled, cfg.control.dt)
    back = invert_photocurrent(dr, c_mean, scaled, cfg.control.dt)
    results.append(("photocurrent round-trip", bool(np.max(np.abs(back - dw)) < 1e-14),
                    f"max |dW error| = {np.max(np.abs(back - dw)):.2e}"))

    # Gaussian closure against quadrature
    g = GaussianState(x_mean=1.3, p_mean=0.0, vx=0.8, vp=0.7, cxp=0.1)
    xs = np.linspace(-60, 60, 200001)
    density = np.exp(-((xs - g.x_mean) ** 2) / (2 * g.vx))
    density /= density.sum()
    quad = float(density @ np.cos(k * xs) ** 2)
    closed = float(cos_sq_mean(g, k))
    results.append(("Gaussian closure vs quadrature", abs(quad - closed) < 1e-9,
                    f"|diff| = {abs(quad - closed):.2e}"))

    # quadratic fit recovers an exact quadratic slope
    cs = ControllerState(config=cfg.control, vmax=vmax)
    t = 0.0
    fit = None
    for i in range(10):
        t = i * cfg.control.dt
        fit = push_and_fit(cs, t, 3.0 * t**2 - 2.0 * t + 0.5)
    slope_err = abs(fit.slope_at_now - (6.0 * t - 2.0))
    results.append(("quadratic fit exactness", slope_err < 1e-9,
                    f"|slope error| = {slope_err:.2e}"))

    # steady-state theory sanity
    inputs = TheoryInputs(epsilon=0.1, gamma=scaled.gamma, ktilde=k)
    centroid = theory_ss_energy(inputs, "centroid")
    squeezing = theory_ss_energy(inputs, "squeezing")
    results.append(("theory ordering", squeezing < centroid and centroid > 2 * math.pi,
                    f"centroid {centroid:.3f}, squeezing {squeezing:.3f}, beta {inputs.beta:.4f}"))

    return results
