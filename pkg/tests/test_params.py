import dataclasses
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitycool.errors import ConfigError, UnknownKeyError
from cavitycool.params import (ControlConfig, PhysicalParams, ScaledParams,
                               SimConfig, config_as_dict, derive_scaled,
                               descale, parse_config_text, resolve_config)


def test_paper_inputs_give_quoted_scaled_values():
    s = derive_scaled(PhysicalParams())
    assert f"{s.ktilde:.3g}" == "0.155"
    assert f"{s.gamma:.3g}" == "23.6"
    assert f"{s.vmax:.3g}" == "131"


def test_vmax_is_derived_exactly():
    s = derive_scaled(PhysicalParams())
    assert s.vmax * s.ktilde**2 == pytest.approx(math.pi, abs=1e-14)


def test_alpha_scaling_of_gamma_and_ktilde():
    # omega_HO scales linearly with alpha, so gamma ~ alpha^2/omega ~ alpha
    # and ktilde ~ omega^(-1/2) ~ alpha^(-1/2); recomputed, not quoted.
    base = derive_scaled(PhysicalParams())
    doubled = derive_scaled(dataclasses.replace(PhysicalParams(), mean_photon_alpha=2.0))
    assert doubled.omega_ho / base.omega_ho == pytest.approx(2.0, rel=1e-12)
    assert doubled.gamma / base.gamma == pytest.approx(2.0, rel=1e-12)
    assert doubled.ktilde / base.ktilde == pytest.approx(2.0 ** -0.5, rel=1e-12)


def test_descale_round_trip():
    p = PhysicalParams()
    s = derive_scaled(p)
    back = descale(s, atom_mass=p.atom_mass, optical_wavenumber=p.optical_wavenumber,
                   coupling_g=p.coupling_g, mean_photon_alpha=p.mean_photon_alpha)
    assert back.cavity_decay_kappa == pytest.approx(p.cavity_decay_kappa, rel=1e-12)
    assert back.detuning_delta == pytest.approx(p.detuning_delta, rel=1e-12)
    assert back.detection_eta == p.detection_eta


def test_descale_rejects_inconsistent_anchors():
    s = derive_scaled(PhysicalParams())
    with pytest.raises(ConfigError):
        descale(s, atom_mass=1e-26, optical_wavenumber=11732e2,
                coupling_g=2 * math.pi * 120e6)


@settings(max_examples=60, deadline=None)
@given(mass=st.floats(1e-27, 1e-24), wavenumber=st.floats(1e5, 1e7),
       g=st.floats(1e6, 1e10), kappa=st.floats(1e5, 1e10),
       delta=st.floats(1e8, 1e12), alpha=st.floats(0.1, 10))
def test_vmax_ktilde_pi_identity_property(mass, wavenumber, g, kappa, delta, alpha):
    s = derive_scaled(PhysicalParams(
        atom_mass=mass, optical_wavenumber=wavenumber, coupling_g=g,
        cavity_decay_kappa=kappa, detuning_delta=-delta, mean_photon_alpha=alpha))
    assert abs(s.vmax * s.ktilde**2 - math.pi) < 1e-12 * math.pi


def test_derive_scaled_is_deterministic():
    p = PhysicalParams()
    assert derive_scaled(p) == derive_scaled(p)


def test_physical_validation_errors():
    with pytest.raises(ConfigError):
        PhysicalParams(atom_mass=-1.0)
    with pytest.raises(ConfigError):
        PhysicalParams(detection_eta=0.0)
    with pytest.raises(ConfigError):
        PhysicalParams(detection_eta=1.5)
    with pytest.raises(ConfigError):
        PhysicalParams(detuning_delta=0.0)


def test_detuning_advisory_is_not_an_error():
    p = PhysicalParams(detuning_delta=-2 * math.pi * 50e6)  # comparable to kappa
    assert not p.detuning_is_adiabatic()
    assert PhysicalParams().detuning_is_adiabatic()


def test_control_and_sim_validation():
    with pytest.raises(ConfigError):
        ControlConfig(epsilon=1.0)
    with pytest.raises(ConfigError):
        ControlConfig(fit_window=2)
    with pytest.raises(ConfigError):
        ControlConfig(dt=0.0)
    with pytest.raises(ConfigError):
        ControlConfig(controller_source="oracle")
    with pytest.raises(ConfigError):
        SimConfig(grid_points=500)
    with pytest.raises(ConfigError):
        SimConfig(domain_periods=0)
    with pytest.raises(ConfigError):
        ScaledParams(gamma=1.0, ktilde=0.1, eta=1.2)


def test_config_file_and_overrides():
    text = """
    # sample configuration
    control.epsilon = 0.05
    sim.grid_points = 256   # inline comment
    sim.heating_diagnostics = true
    """
    cfg = resolve_config(text, overrides=["control.epsilon=0.2", "sim.base_seed=9"])
    assert cfg.control.epsilon == 0.2          # override wins over file
    assert cfg.sim.grid_points == 256
    assert cfg.sim.heating_diagnostics is True
    assert cfg.sim.base_seed == 9
    flat = config_as_dict(cfg)
    assert flat["control.epsilon"] == 0.2
    assert flat["scaled.derived_from_physical"] is True


def test_unknown_key_is_named():
    with pytest.raises(UnknownKeyError) as err:
        resolve_config(None, overrides=["control.epsilonn=0.1"])
    assert "control.epsilonn" in str(err.value)
    with pytest.raises(UnknownKeyError):
        resolve_config("nosection.key = 1\n")


def test_scaled_override_switches_to_direct_parameters():
    cfg = resolve_config(None, overrides=["scaled.gamma=10", "scaled.ktilde=0.2"])
    s = cfg.resolve_scaled()
    assert s.gamma == 10
    assert s.ktilde == 0.2
    assert s.vmax == pytest.approx(math.pi / 0.04)


def test_scaled_vmax_is_not_settable():
    with pytest.raises(ConfigError):
        resolve_config(None, overrides=["scaled.vmax=100"])


def test_sweep_epsilons_parsing():
    cfg = resolve_config("sweep.epsilons = 0.02, 0.05,0.1\n")
    assert cfg.sweep_epsilons == (0.02, 0.05, 0.1)


def test_malformed_config_lines():
    with pytest.raises(ConfigError):
        parse_config_text("control.epsilon 0.1\n")
    with pytest.raises(ConfigError):
        resolve_config("control.epsilon = abc\n")
    with pytest.raises(ConfigError):
        resolve_config(None, overrides=["control.fit_window=2.5"])
