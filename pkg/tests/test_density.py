import dataclasses
import math

import numpy as np
import pytest

from cavitycool.density import (DensityState, density_moments,
                                measurement_substep, step_density)
from cavitycool.errors import StepSizeError
from cavitycool.grid import SpatialGrid
from cavitycool.truestate import (WaveState, expect_diag, expect_x,
                                  gaussian_packet, step_hamiltonian,
                                  step_measurement)


@pytest.fixture(scope="module")
def paper_grid64(paper_scaled):
    return SpatialGrid.for_lattice(paper_scaled.ktilde, 64, 1)


def test_moments_of_constructed_gaussian(paper_scaled, paper_grid64):
    psi = gaussian_packet(paper_grid64, 1.2, -0.4, vx=0.6)
    state = DensityState.from_psi(paper_grid64, psi, paper_scaled.vmax,
                                  paper_scaled.ktilde)
    m = density_moments(state)
    assert m["x"] == pytest.approx(1.2, abs=1e-9)
    assert m["p"] == pytest.approx(-0.4, abs=1e-9)
    assert m["vx"] == pytest.approx(0.6, rel=1e-6)
    assert m["vp"] == pytest.approx(1.0 / (4 * 0.6), rel=1e-6)  # pure packet
    assert m["cxp"] == pytest.approx(0.0, abs=1e-8)


def test_unitary_limit_preserves_purity(paper_scaled, paper_grid64):
    zero_gamma = dataclasses.replace(paper_scaled, gamma=0.0)
    psi = gaussian_packet(paper_grid64, 1.5, 0.0)
    state = DensityState.from_psi(paper_grid64, psi, paper_scaled.vmax,
                                  paper_scaled.ktilde)
    for _ in range(2000):
        state = step_density(state, 0.0, zero_gamma, 5e-4)
    assert state.purity() == pytest.approx(1.0, abs=1e-8)
    assert abs(np.trace(state.rho).real - 1.0) < 1e-12


def test_pure_decoherence_channel_against_analytic_decay(paper_scaled, paper_grid64):
    # with the Hamiltonian off and eta = 0 the coherences obey
    # rho(x, x', t) = rho(x, x', 0) exp(-Gamma (c(x) - c(x'))^2 t)
    k = paper_scaled.ktilde
    c = paper_grid64.cos_sq(k)
    psi = gaussian_packet(paper_grid64, 2.0, 0.0, vx=4.0)
    rho = np.outer(psi, psi.conj())
    rho0 = rho.copy()
    gamma = paper_scaled.gamma
    dt, steps = 1e-5, 2000
    for _ in range(steps):
        rho = measurement_substep(rho, c, gamma, 0.0, 0.0, dt)
    t = dt * steps
    expected = rho0 * np.exp(-gamma * (c[:, None] - c[None, :]) ** 2 * t)
    assert np.max(np.abs(rho - expected)) < 1e-6


def test_trace_guard_raises(paper_scaled, paper_grid64):
    psi = gaussian_packet(paper_grid64, 1.0, 0.0)
    state = DensityState.from_psi(paper_grid64, psi, paper_scaled.vmax,
                                  paper_scaled.ktilde)
    state = dataclasses.replace(state, rho=state.rho * (1 + 5e-6))
    with pytest.raises(StepSizeError):
        step_density(state, 0.0, paper_scaled, 5e-4)


def test_grid_size_limit(paper_scaled, grid512):
    psi = gaussian_packet(grid512, 1.0, 0.0)
    state = DensityState.from_psi(grid512, psi, paper_scaled.vmax,
                                  paper_scaled.ktilde)
    with pytest.raises(ValueError):
        step_density(state, 0.0, paper_scaled, 5e-4)


def test_sub_unit_efficiency_decoheres_without_blowup(paper_scaled, paper_grid64, rng):
    half = dataclasses.replace(paper_scaled, eta=0.5)
    psi = gaussian_packet(paper_grid64, 1.0, 0.0)
    state = DensityState.from_psi(paper_grid64, psi, paper_scaled.vmax,
                                  paper_scaled.ktilde)
    dt = 1e-4
    for _ in range(500):
        state = step_density(state, rng.standard_normal() * math.sqrt(dt), half, dt)
    assert state.purity() < 0.999       # decoherence wins at eta < 1
    assert state.purity() > 0.5
    assert abs(np.trace(state.rho).real - 1.0) < 1e-10


def test_trajectorywise_agreement_with_unraveling(paper_scaled, paper_grid64, rng):
    # same noise stream through both integrators at eta = 1
    k, vmax = paper_scaled.ktilde, paper_scaled.vmax
    psi0 = gaussian_packet(paper_grid64, 1.0, 0.0)
    wave = WaveState(grid=paper_grid64, psi=psi0.copy(), amplitude=vmax, ktilde=k)
    dens = DensityState.from_psi(paper_grid64, psi0, vmax, k)
    dt, steps = 1e-4, 200
    c_arr = paper_grid64.cos_sq(k)
    worst = 0.0
    for _ in range(steps):
        dw = rng.standard_normal() * math.sqrt(dt)
        wave = step_measurement(step_hamiltonian(wave, dt), dw, paper_scaled, dt)
        dens = step_density(dens, dw, paper_scaled, dt)
        moments = density_moments(dens)
        worst = max(worst,
                    abs(float(expect_x(wave.psi, paper_grid64)) - moments["x"]),
                    abs(float(expect_diag(wave.psi, c_arr)) - moments["cos_sq"]))
    assert worst < 2e-3
    assert dens.purity() > 0.999        # eta = 1 keeps the state pure
