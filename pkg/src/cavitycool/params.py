"""Model parameters: physical cavity-QED inputs and their scaled counterparts.

Scaled units used throughout the simulator: position in sqrt(hbar/(m*omega_HO)),
momentum in sqrt(hbar*m*omega_HO), and time in units of 2*pi/omega_HO, where
omega_HO is the oscillation frequency of the harmonic approximation to one
optical-potential well.  In these units the effective Hamiltonian reads

    H = pi * P^2 - V(t) * cos^2(ktilde * X),       V_nominal = vmax = pi / ktilde^2,

and the model is fully specified by (gamma, ktilde, eta) plus the control
parameters describing how V(t) is modulated.

Two unit conventions are deliberately fixed here:

* ``optical_wavenumber`` is the spectroscopic wavenumber 1/lambda (the usual
  "cm^-1" number); the spatial frequency entering every formula is
  k = 2*pi/lambda.  For the cesium D2 line, 1/lambda = 11732 cm^-1.
* Because time is measured in units of 2*pi/omega_HO (not 1/omega_HO), the
  dimensionless measurement strength carries an extra factor of 2*pi:
  gamma = 2*pi * 2*alpha^2*g^4 / (Delta^2 * kappa * omega_HO).

With the default cesium/cavity numbers below these conventions give
ktilde ~= 0.155, gamma ~= 23.6, vmax ~= 131.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError, UnknownKeyError

HBAR = 1.054571817e-34  # J s

SIGNAL_SOURCES = ("estimator", "photocurrent", "truestate", "none")


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory-frame inputs (SI units, angular frequencies in rad/s)."""

    atom_mass: float = 2.21e-25
    optical_wavenumber: float = 11732e2  # 1/lambda in 1/m
    coupling_g: float = 2 * math.pi * 120e6
    cavity_decay_kappa: float = 2 * math.pi * 40e6
    detuning_delta: float = -2 * math.pi * 4e9
    mean_photon_alpha: float = 1.0
    detection_eta: float = 1.0

    def __post_init__(self):
        for name in ("atom_mass", "optical_wavenumber", "coupling_g",
                     "cavity_decay_kappa", "mean_photon_alpha"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ConfigError(f"physical.{name} must be finite and > 0, got {v}")
        if not math.isfinite(self.detuning_delta) or self.detuning_delta == 0:
            raise ConfigError("physical.detuning_delta must be finite and nonzero")
        if not 0 < self.detection_eta <= 1:
            raise ConfigError(f"physical.detection_eta must lie in (0, 1], got {self.detection_eta}")

    @property
    def spatial_frequency(self) -> float:
        """k = 2*pi/lambda in rad/m."""
        return 2 * math.pi * self.optical_wavenumber

    def detuning_is_adiabatic(self) -> bool:
        """Advisory check |Delta| >> kappa (factor 10)."""
        return abs(self.detuning_delta) > 10 * self.cavity_decay_kappa


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless model parameters; vmax is always derived from ktilde."""

    gamma: float
    ktilde: float
    eta: float = 1.0
    omega_ho: float = float("nan")  # rad/s; only needed for unit round-trips

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ConfigError(f"scaled.gamma must be finite and >= 0, got {self.gamma}")
        if not math.isfinite(self.ktilde) or self.ktilde <= 0:
            raise ConfigError(f"scaled.ktilde must be finite and > 0, got {self.ktilde}")
        if not 0 < self.eta <= 1:
            raise ConfigError(f"scaled.eta must lie in (0, 1], got {self.eta}")

    @property
    def vmax(self) -> float:
        return math.pi / self.ktilde**2


def derive_scaled(p: PhysicalParams) -> ScaledParams:
    """Convert physical cavity-QED parameters to the scaled model parameters.

    Pure and deterministic; see the module docstring for the two unit
    conventions (k = 2*pi * optical_wavenumber, extra 2*pi in gamma).
    """
    k = p.spatial_frequency
    abs_delta = abs(p.detuning_delta)
    omega_ho = p.mean_photon_alpha * p.coupling_g * k * math.sqrt(
        2 * HBAR / (p.atom_mass * abs_delta))
    ktilde = k * math.sqrt(HBAR / (p.atom_mass * omega_ho))
    gamma = 2 * math.pi * 2 * p.mean_photon_alpha**2 * p.coupling_g**4 / (
        p.detuning_delta**2 * p.cavity_decay_kappa * omega_ho)
    return ScaledParams(gamma=gamma, ktilde=ktilde, eta=p.detection_eta,
                        omega_ho=omega_ho)


def descale(s: ScaledParams, atom_mass: float, optical_wavenumber: float,
            coupling_g: float, mean_photon_alpha: float = 1.0,
            detuning_sign: int = -1) -> PhysicalParams:
    """Invert :func:`derive_scaled` given the anchor quantities (m, 1/lambda, g, alpha).

    The scaled model does not retain enough information to recover all six
    physical rates on its own; mass, wavenumber, coupling and photon number
    pin the remaining freedom.  Raises ConfigError if the stored ktilde is
    inconsistent with the anchors.
    """
    if not math.isfinite(s.omega_ho) or s.omega_ho <= 0:
        raise ConfigError("descale requires ScaledParams.omega_ho")
    k = 2 * math.pi * optical_wavenumber
    ktilde_check = k * math.sqrt(HBAR / (atom_mass * s.omega_ho))
    if abs(ktilde_check - s.ktilde) > 1e-9 * s.ktilde:
        raise ConfigError(
            "ScaledParams.ktilde is inconsistent with the supplied mass/wavenumber anchors")
    abs_delta = 2 * HBAR * (mean_photon_alpha * coupling_g * k)**2 / (
        atom_mass * s.omega_ho**2)
    kappa = 2 * math.pi * 2 * mean_photon_alpha**2 * coupling_g**4 / (
        abs_delta**2 * s.gamma * s.omega_ho)
    return PhysicalParams(
        atom_mass=atom_mass,
        optical_wavenumber=optical_wavenumber,
        coupling_g=coupling_g,
        cavity_decay_kappa=kappa,
        detuning_delta=detuning_sign * abs_delta,
        mean_photon_alpha=mean_photon_alpha,
        detection_eta=s.eta,
    )


@dataclass(frozen=True)
class ControlConfig:
    """Feedback-loop parameters."""

    epsilon: float = 0.1
    fit_window: int = 300
    dt: float = 0.0005
    feedback_start_time: float = 2.0
    controller_source: str = "estimator"
    scale_gamma_with_drive: bool = False

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ConfigError(f"control.epsilon must lie in [0, 1), got {self.epsilon}")
        if self.fit_window < 3:
            raise ConfigError(f"control.fit_window must be >= 3, got {self.fit_window}")
        if not self.dt > 0:
            raise ConfigError(f"control.dt must be > 0, got {self.dt}")
        if self.feedback_start_time < 0:
            raise ConfigError("control.feedback_start_time must be >= 0")
        if self.controller_source not in SIGNAL_SOURCES:
            raise ConfigError(
                f"control.controller_source must be one of {SIGNAL_SOURCES}, "
                f"got {self.controller_source!r}")


@dataclass(frozen=True)
class SimConfig:
    """Discretization, run length, and ensemble bookkeeping."""

    grid_points: int = 512
    domain_periods: int = 1
    t_max: float = 100.0
    n_trajectories: int = 128
    base_seed: int = 42
    output_stride: int = 100
    heating_diagnostics: bool = False

    def __post_init__(self):
        n = self.grid_points
        if n < 4 or (n & (n - 1)) != 0:
            raise ConfigError(f"sim.grid_points must be a power of two >= 4, got {n}")
        if self.domain_periods < 1:
            raise ConfigError("sim.domain_periods must be >= 1")
        if not self.t_max > 0:
            raise ConfigError("sim.t_max must be > 0")
        if self.n_trajectories < 1:
            raise ConfigError("sim.n_trajectories must be >= 1")
        if self.output_stride < 1:
            raise ConfigError("sim.output_stride must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for a run (the four sections + sweep list)."""

    physical: PhysicalParams = field(default_factory=PhysicalParams)
    scaled: ScaledParams | None = None  # None -> derived from physical
    control: ControlConfig = field(default_factory=ControlConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    sweep_epsilons: tuple[float, ...] = (0.004, 0.02, 0.05, 0.1, 0.2)

    def resolve_scaled(self) -> ScaledParams:
        return self.scaled if self.scaled is not None else derive_scaled(self.physical)


_SECTION_TYPES = {
    "physical": PhysicalParams,
    "scaled": ScaledParams,
    "control": ControlConfig,
    "sim": SimConfig,
}

_BOOL_STRINGS = {"true": True, "yes": True, "1": True, "on": True,
                 "false": False, "no": False, "0": False, "off": False}


def _coerce(raw: str, py_type, key: str):
    raw = raw.strip()
    if py_type is bool:
        try:
            return _BOOL_STRINGS[raw.lower()]
        except KeyError:
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}") from None
    if py_type is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if py_type is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def resolve_config(file_text: str | None = None,
                   overrides: list[str] | None = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional config file, and CLI overrides.

    Overrides are ``key=value`` strings and win over file values.  Any
    ``scaled.*`` key switches the run to the directly supplied scaled
    parameters instead of deriving them from the physical section.
    """
    entries: dict[str, str] = {}
    if file_text is not None:
        entries.update(parse_config_text(file_text))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        entries[key.strip()] = value.strip()

    section_values: dict[str, dict] = {name: {} for name in _SECTION_TYPES}
    sweep_epsilons: tuple[float, ...] | None = None

    for key, raw in entries.items():
        if key == "sweep.epsilons":
            try:
                sweep_epsilons = tuple(float(tok) for tok in raw.split(",") if tok.strip())
            except ValueError:
                raise ConfigError(f"sweep.epsilons: expected comma-separated numbers, got {raw!r}") from None
            continue
        if "." not in key:
            raise UnknownKeyError(key)
        section, _, name = key.partition(".")
        cls = _SECTION_TYPES.get(section)
        if cls is None:
            raise UnknownKeyError(key)
        if section == "scaled" and name == "vmax":
            raise ConfigError("scaled.vmax is derived as pi/ktilde^2; set scaled.ktilde instead")
        field_types = {f.name: f.type for f in fields(cls)}
        if name not in field_types:
            raise UnknownKeyError(key)
        py_type = {"float": float, "int": int, "bool": bool, "str": str}[field_types[name]]
        section_values[section][name] = _coerce(raw, py_type, key)

    physical = PhysicalParams(**section_values["physical"])
    scaled = None
    if section_values["scaled"]:
        base = derive_scaled(physical)
        scaled = replace(base, **section_values["scaled"])
    control = ControlConfig(**section_values["control"])
    sim = SimConfig(**section_values["sim"])
    kwargs = {}
    if sweep_epsilons is not None:
        kwargs["sweep_epsilons"] = sweep_epsilons
    return RunConfig(physical=physical, scaled=scaled, control=control, sim=sim, **kwargs)


def config_as_dict(cfg: RunConfig) -> dict[str, object]:
    """Flatten a RunConfig to dotted keys (for manifests and hashing)."""
    out: dict[str, object] = {}
    for section, obj in (("physical", cfg.physical), ("control", cfg.control),
                         ("sim", cfg.sim)):
        for f in fields(obj):
            out[f"{section}.{f.name}"] = getattr(obj, f.name)
    scaled = cfg.resolve_scaled()
    for f in fields(scaled):
        out[f"scaled.{f.name}"] = getattr(scaled, f.name)
    out["scaled.vmax"] = scaled.vmax
    out["scaled.derived_from_physical"] = cfg.scaled is None
    out["sweep.epsilons"] = ",".join(repr(e) for e in cfg.sweep_epsilons)
    return out
