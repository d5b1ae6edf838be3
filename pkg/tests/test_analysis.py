import math

import numpy as np
import pytest

from cavitycool.analysis import (BandBasis, TheoryInputs, band_populations,
                                 compute_band_basis, cooling_rate,
                                 heating_rate, heating_rate_harmonic,
                                 parity_statistics, theory_ss_energy)
from cavitycool.errors import UncontrollableRegimeError
from cavitycool.grid import SpatialGrid
from cavitycool.params import ScaledParams
from cavitycool.truestate import expect_diag, expect_parity, gaussian_packet


class TestBandBasis:
    def test_lowest_levels_near_harmonic(self, band_basis):
        # harmonic levels are pi*(2n+1); the quartic softening pulls E0 down
        # by 0.60% and E1 by 1.01% at this depth
        assert band_basis.energies_rel[0] == pytest.approx(math.pi, rel=0.007)
        assert band_basis.energies_rel[1] == pytest.approx(3 * math.pi, rel=0.011)
        assert np.all(np.diff(band_basis.energies_rel) > 0)

    def test_orthonormality(self, band_basis):
        overlap = band_basis.states.conj().T @ band_basis.states
        assert np.max(np.abs(overlap - np.eye(band_basis.n_states))) < 1e-10

    def test_eigenstate_parity_alternates(self, band_basis, grid512):
        for n in range(6):
            parity = float(expect_parity(band_basis.states[:, n], grid512))
            assert parity == pytest.approx((-1.0) ** n, abs=1e-8)

    def test_projector_idempotent(self, band_basis):
        states = band_basis.states
        projector = states @ states.conj().T
        assert np.max(np.abs(projector @ projector - projector)) < 1e-12

    def test_level_spacing_approaches_harmonic_as_lattice_deepens(self):
        # vmax = pi/ktilde^2, so smaller ktilde means a deeper lattice and
        # E1 - E0 -> 2 pi with the deviation shrinking like ktilde^2
        gaps = []
        for ktilde in (0.155, 0.08, 0.04):
            s = ScaledParams(gamma=23.6, ktilde=ktilde)
            grid = SpatialGrid.for_lattice(ktilde, 512, 1)
            basis = compute_band_basis(s, grid)
            gaps.append(basis.energies_rel[1] - basis.energies_rel[0])
        deviations = [abs(g - 2 * math.pi) for g in gaps]
        assert deviations[0] > deviations[1] > deviations[2]
        assert deviations[2] < 2 * math.pi * (5 / 6) * 0.04**2  # ~first-order bound
        assert gaps[2] == pytest.approx(2 * math.pi, rel=2e-3)

    def test_multi_period_band_clustering(self, paper_scaled):
        grid = SpatialGrid.for_lattice(paper_scaled.ktilde, 512, 2)
        basis = compute_band_basis(paper_scaled, grid, domain_periods=2)
        # two quasimomentum states per band, nearly degenerate in a deep lattice
        assert basis.band_energy(0) == pytest.approx(math.pi, rel=0.01)
        assert abs(basis.energies_rel[1] - basis.energies_rel[0]) < 1e-6
        assert abs(basis.energies_rel[3] - basis.energies_rel[2]) < 1e-5


class TestBandPopulations:
    def test_pure_eigenstates(self, band_basis):
        pops, remainder = band_populations(band_basis.states[:, 0], band_basis)
        assert np.allclose(pops, [1, 0, 0, 0], atol=1e-12)
        assert abs(remainder) < 1e-9

    def test_equal_mixture(self, band_basis):
        psi = (band_basis.states[:, 0] + band_basis.states[:, 1]) / math.sqrt(2)
        pops, remainder = band_populations(psi, band_basis)
        assert np.allclose(pops, [0.5, 0.5, 0, 0], atol=1e-12)
        assert abs(remainder) < 1e-9

    def test_populations_bounded(self, band_basis, grid512, rng):
        psi = gaussian_packet(grid512, rng.uniform(-4, 4, 16), rng.uniform(-2, 2, 16))
        pops, remainder = band_populations(psi, band_basis)
        assert pops.shape == (16, 4)
        assert np.all(pops.sum(axis=-1) <= 1 + 1e-9)
        assert np.all(remainder >= -1e-9)

    def test_batched_rows_match_single(self, band_basis, grid512):
        psi = gaussian_packet(grid512, np.array([0.4, 2.2]), np.array([0.1, -0.3]))
        batch, _ = band_populations(psi, band_basis)
        single, _ = band_populations(psi[1], band_basis)
        assert np.allclose(batch[1], single, atol=1e-14)


class TestTheory:
    def test_paper_operating_point(self):
        t = TheoryInputs(epsilon=0.1, gamma=23.6, ktilde=0.155)
        assert t.beta == pytest.approx(0.0681, abs=2e-4)
        assert theory_ss_energy(t, "centroid") == pytest.approx(6.74, abs=0.01)

    def test_zero_measurement_limit(self):
        t = TheoryInputs(epsilon=0.1, gamma=0.0, ktilde=0.155)
        assert theory_ss_energy(t, "centroid") == pytest.approx(2 * math.pi, abs=1e-12)
        assert theory_ss_energy(t, "squeezing") == pytest.approx(2 * math.pi, abs=1e-12)

    def test_squeezing_always_below_centroid(self):
        for beta in np.linspace(0.01, 0.99, 25):
            t = TheoryInputs(epsilon=23.6 * 0.155**4 / (2 * beta), gamma=23.6,
                             ktilde=0.155)
            assert t.beta == pytest.approx(beta, rel=1e-12)
            assert theory_ss_energy(t, "squeezing") < theory_ss_energy(t, "centroid")

    def test_centroid_monotone_in_beta(self):
        values = []
        for beta in np.linspace(0.0, 0.95, 20):
            eps = math.inf if beta == 0 else 23.6 * 0.155**4 / (2 * beta)
            t = TheoryInputs(epsilon=eps, gamma=23.6, ktilde=0.155)
            values.append(theory_ss_energy(t, "centroid"))
        assert np.all(np.diff(values) > 0)

    def test_uncontrollable_regime_flagged(self):
        t = TheoryInputs(epsilon=0.005, gamma=23.6, ktilde=0.155)
        assert not t.controllable
        with pytest.raises(UncontrollableRegimeError):
            theory_ss_energy(t, "centroid")

    def test_unknown_variant(self):
        t = TheoryInputs(epsilon=0.1, gamma=23.6, ktilde=0.155)
        with pytest.raises(ValueError):
            theory_ss_energy(t, "sideways")


class TestRates:
    def test_ground_state_heating_both_forms(self, paper_scaled, grid512, band_basis):
        # quadrature form vs the harmonic rewriting 4 Gamma ktilde^4 <H>;
        # they agree up to the anharmonicity of the true ground state
        k = paper_scaled.ktilde
        ground = band_basis.states[:, 0]
        c = grid512.cos_sq(k)
        integrand = float(expect_diag(ground, c * (1 - c)))
        exact = float(heating_rate(paper_scaled.gamma, k, integrand))
        harmonic = float(heating_rate_harmonic(paper_scaled.gamma, k,
                                               band_basis.energies_rel[0]))
        assert exact == pytest.approx(harmonic, rel=0.05)
        assert exact > 0

    def test_cooling_rate_fixed_point(self):
        e0 = math.pi
        assert cooling_rate(0.1, e0, e0) == 0.0
        assert cooling_rate(0.1, 10.0, e0) < 0
        assert cooling_rate(0.1, 10.0, e0) == pytest.approx(-8 * 0.1 * (10 - e0))


class TestParityStatistics:
    def test_synthetic_purifying_ensemble(self, rng):
        # driftless random-walk parities that purify to +/-1
        n, t = 64, 200
        signs = rng.choice([-1.0, 1.0], size=n)
        progress = np.linspace(0, 1, t) ** 0.5
        series = signs[:, None] * progress[None, :] \
            + 0.01 * rng.standard_normal((n, t)) * (1 - progress)
        stats = parity_statistics(series)
        assert stats.n_trajectories == n
        assert stats.purified_fraction > 0.9
        assert 0.2 < stats.even_fraction < 0.8
        low, high = stats.even_split_interval()
        assert low == pytest.approx(0.5 - 1.96 * math.sqrt(0.25 / n))
        assert high == pytest.approx(0.5 + 1.96 * math.sqrt(0.25 / n))

    def test_drift_detection(self):
        series = np.linspace(0, 0.5, 50)[None, :] * np.ones((8, 1))
        stats = parity_statistics(series)
        assert not stats.drift_consistent_with_zero()

    def test_requires_ensemble(self):
        with pytest.raises(ValueError):
            parity_statistics(np.zeros((1, 10)))
