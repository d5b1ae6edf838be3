"""Closed-loop trajectory ensembles: orchestration, statistics, persistence.

Each trajectory couples four pieces per control step dt:

    true state  --Strang split + measurement-->  <cos^2>  -->  photocurrent dr
    estimator   --consumes dr only-->  predicted moments
    controller  --trigger signal (configured source)-->  new drive amplitude
    amplitude   --applied to BOTH the true state and the estimator

Initial conditions: the atom starts in a coherent wavepacket (V_x = V_p = 1/2)
whose centroid energy equals the potential energy at a displacement of 58% of
the half-well width; the initial position is uniform between the well bottom
and that displacement, with |p0| making up the energy difference and a random
sign.  The estimator starts mismatched at <X>=6, <P>=0, V_x=V_p=1/sqrt(2),
C=0.  Feedback activates at ``control.feedback_start_time``.

Trajectories are statistically independent: trajectory i draws all of its
randomness from a stream seeded by (base_seed, i), so ensembles are
reproducible and independent of execution order or batching.  For speed, an
ensemble evolves as one lockstep batch of states with a leading trajectory
axis; every per-row operation is independent, which keeps single-trajectory
runs and batched runs interchangeable.

Energies are recorded relative to the potential minimum of the NOMINAL
lattice depth (the drive modulation does not change the bookkeeping
potential).  Estimator columns are NaN for runs whose signal source does not
instantiate the filter (``photocurrent``, ``truestate``, ``none``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from ._fft import fft_last, ifft_last
from ._kernels import (estimator_update, measure_update, phase_multiply,
                       phase_multiply_row)
from .analysis import TheoryInputs, compute_band_basis, theory_ss_energy
from .controller import HIGH, _FitWeights, amplitude_table, decide_code
from .ensemble_io import write_ensemble_csv, write_manifest, write_sweep_csv
from .errors import EnsembleInvalidError, UncontrollableRegimeError
from .estimator import GaussianState
from .grid import SpatialGrid
from .params import RunConfig, config_as_dict
from .truestate import NoiseStream, gaussian_packet

CLAMP_FLAG_FRACTION = 1e-3
FINAL_WINDOW = 10.0              # length of the late-time averaging window

SERIES_NAMES = (
    "energy", "p0", "p1", "p2", "p3", "parity", "x_true", "p_true", "vx_true",
    "x_est", "p_est", "vx_est", "vp_est", "cxp_est", "cos_sq_true",
    "amplitude", "amp_high", "slope", "clamp_count", "heat_integral",
    "meas_noise_cum", "norm_dev_mean",
)


@dataclass
class TrajectoryRecord:
    """Strided time series and diagnostics for one trajectory."""

    trajectory_index: int
    base_seed: int
    config_hash: str
    times: np.ndarray
    series: dict[str, np.ndarray]
    failed: bool
    fail_step: int               # -1 when the estimator never diverged
    clamp_fraction: float

    @property
    def flagged(self) -> bool:
        """Filter needed clamping often enough to distrust the trajectory."""
        return self.clamp_fraction > CLAMP_FLAG_FRACTION

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[name]


@dataclass
class EnsembleStats:
    """Per-time ensemble mean/standard error plus late-window averages.

    Standard errors are taken across trajectories (never across time
    samples); the late window averages each trajectory over t in
    [t_max - 10, t_max] first and then aggregates.
    """

    times: np.ndarray
    mean: dict[str, np.ndarray]
    se: dict[str, np.ndarray]
    final_mean: dict[str, float]
    final_se: dict[str, float]
    n_trajectories: int
    n_failed: int
    n_flagged: int


def config_hash(cfg: RunConfig) -> str:
    text = json.dumps({k: repr(v) for k, v in sorted(config_as_dict(cfg).items())})
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def initial_displacement_bound(ktilde: float) -> float:
    """Maximum initial centroid displacement: 58% of the half-well width."""
    return 0.58 * math.pi / (2.0 * ktilde)


class _BatchEngine:
    """Evolves a batch of trajectories in lockstep (shared time grid)."""

    def __init__(self, cfg: RunConfig, indices: list[int]):
        self.cfg = cfg
        self.indices = list(indices)
        self.scaled = cfg.resolve_scaled()
        self.k = self.scaled.ktilde
        self.vmax = self.scaled.vmax
        self.eta = self.scaled.eta
        self.cc = cfg.control
        self.sc = cfg.sim
        self.dt = self.cc.dt
        self.n_steps = int(round(self.sc.t_max / self.dt))
        self.grid = SpatialGrid.for_lattice(self.k, self.sc.grid_points,
                                            self.sc.domain_periods)
        self.hash = config_hash(cfg)

    # -- initial conditions ------------------------------------------------
    def _initialize(self):
        k, vmax = self.k, self.vmax
        b = len(self.indices)
        self.streams = [NoiseStream(self.sc.base_seed, idx, self.dt)
                        for idx in self.indices]
        x_max = initial_displacement_bound(k)
        x0 = np.empty(b)
        sign = np.empty(b)
        for row, stream in enumerate(self.streams):
            x0[row] = stream.rng.uniform(0.0, x_max)
            sign[row] = 1.0 if stream.rng.integers(0, 2) else -1.0
        energy_gap = vmax * (np.cos(k * x0) ** 2 - math.cos(k * x_max) ** 2)
        p0 = sign * np.sqrt(np.maximum(energy_gap, 0.0) / math.pi)
        self.psi = gaussian_packet(self.grid, x0, p0, vx=0.5)

        self.est_m: np.ndarray | None = None
        if self.cc.controller_source == "estimator":
            init = GaussianState(x_mean=6.0, p_mean=0.0, vx=1.0 / math.sqrt(2.0),
                                 vp=1.0 / math.sqrt(2.0), cxp=0.0)
            self.est_m = np.tile(np.array([[init.x_mean], [init.p_mean],
                                           [init.vx], [init.vp], [init.cxp]]),
                                 (1, b))

        self.amps = amplitude_table(vmax, self.cc.epsilon)
        self.codes = np.zeros(b, dtype=np.intp)
        self.amp_values = self.amps[self.codes].copy()
        exp_rows = [np.exp(0.5j * self.dt * a * self.grid.cos_sq(k)) for a in self.amps]
        self.exp_v_table = np.stack(exp_rows)
        self.exp_v = self.exp_v_table[self.codes].copy()
        self.exp_k = np.exp(-1j * math.pi * self.grid.spectral_frequencies ** 2 * self.dt)

        self.history = np.zeros((b, self.cc.fit_window))
        self.n_filled = 0
        self.fit_weights = _FitWeights(self.dt)
        self.slope = np.full(b, np.nan)

        self.failed = np.zeros(b, dtype=bool)
        self.fail_step = np.full(b, -1, dtype=np.int64)
        self.clamp_count = np.zeros(b)
        self.norm_dev_sum = np.zeros(b)
        self.heat_integral = np.zeros(b)
        self.meas_noise_cum = np.zeros(b)

        self.basis = compute_band_basis(self.scaled, self.grid,
                                        domain_periods=self.sc.domain_periods)
        self.band_states = np.conj(self.basis.states[:, :4 * self.sc.domain_periods])

    # -- per-step kernels ----------------------------------------------------
    def _gamma_scale(self):
        if self.cc.scale_gamma_with_drive:
            return self.amp_values / self.vmax
        return 1.0

    def _heating_diagnostics(self, c_arr, c1mc, dw, gm_row):
        """Accumulate the exact heating integral and the energy-noise term."""
        psi = self.psi
        prob = psi.real**2 + psi.imag**2
        c_mean = prob @ c_arr
        self.heat_integral += (prob @ c1mc) * self.dt
        psi_k = fft_last(psi)
        cpsi_k = fft_last(c_arr * psi)
        kin_diag = math.pi * self.grid.spectral_frequencies ** 2
        n = self.grid.n_points
        kin_cross = np.real(np.einsum("bn,n,bn->b", np.conj(psi_k), kin_diag, cpsi_k)) / n
        kin_mean = ((psi_k.real**2 + psi_k.imag**2) @ kin_diag) / n
        cov_hc = (kin_cross - kin_mean * c_mean
                  - self.vmax * (prob @ c_arr**2 - c_mean**2))
        self.meas_noise_cum += -np.sqrt(8.0 * self.eta * gm_row) * cov_hc * dw

    # -- main loop -----------------------------------------------------------
    def run(self) -> list[TrajectoryRecord]:
        self._initialize()
        cc, sc, grid = self.cc, self.sc, self.grid
        k, vmax, eta, dt = self.k, self.vmax, self.eta, self.dt
        b = len(self.indices)
        gamma = self.scaled.gamma
        c_arr = grid.cos_sq(k)
        c_sq_arr = c_arr**2
        c1mc = c_arr * (1.0 - c_arr)
        x_arr = grid.positions
        x2_arr = x_arr**2
        kin_diag = math.pi * grid.spectral_frequencies ** 2
        p_diag = grid.spectral_frequencies
        n = grid.n_points
        refl = grid.reflection_index
        source = cc.controller_source
        run_estimator = source == "estimator"
        feedback_start = cc.feedback_start_time

        stride = sc.output_stride
        sample_steps = np.arange(0, self.n_steps + 1, stride)
        n_samples = sample_steps.size
        buf = {name: np.full((n_samples, b), np.nan) for name in SERIES_NAMES}

        chunk = 8192
        dw_block = np.empty((b, 0))
        block_pos = 0

        sample_row = 0

        def record(row, step):
            psi = self.psi
            prob = psi.real**2 + psi.imag**2
            psi_k = fft_last(psi)
            prob_k = (psi_k.real**2 + psi_k.imag**2) / n
            c_mean = prob @ c_arr
            kinetic = prob_k @ kin_diag
            buf["energy"][row] = kinetic + vmax * (1.0 - c_mean)
            buf["cos_sq_true"][row] = c_mean
            buf["x_true"][row] = prob @ x_arr
            buf["vx_true"][row] = prob @ x2_arr - buf["x_true"][row] ** 2
            buf["p_true"][row] = prob_k @ p_diag
            buf["parity"][row] = np.real(np.sum(np.conj(psi) * psi[:, refl], axis=-1))
            pops = np.abs(psi @ self.band_states) ** 2
            m = sc.domain_periods
            for band in range(4):
                buf[f"p{band}"][row] = pops[:, band * m:(band + 1) * m].sum(axis=-1)
            if self.est_m is not None:
                buf["x_est"][row] = self.est_m[0]
                buf["p_est"][row] = self.est_m[1]
                buf["vx_est"][row] = self.est_m[2]
                buf["vp_est"][row] = self.est_m[3]
                buf["cxp_est"][row] = self.est_m[4]
            buf["amplitude"][row] = self.amp_values
            buf["amp_high"][row] = (self.codes == HIGH).astype(float)
            buf["slope"][row] = self.slope
            buf["clamp_count"][row] = self.clamp_count
            buf["heat_integral"][row] = self.heat_integral
            buf["meas_noise_cum"][row] = self.meas_noise_cum
            steps_done = max(step, 1)
            buf["norm_dev_mean"][row] = self.norm_dev_sum / steps_done

        record(sample_row, 0)
        sample_row += 1

        w = cc.fit_window
        slope_rolls = None           # per-offset reorderings of the full-window row
        write_pos = 0
        scale_gamma = cc.scale_gamma_with_drive
        sqrt_eta = math.sqrt(eta)
        b_size = len(self.indices)
        c_mean = np.empty(b_size)
        norm_dev = np.empty(b_size)
        clamped = np.empty(b_size, dtype=bool)
        gm_row = np.full(b_size, gamma)
        gm_dt_row = np.full(b_size, gamma * dt)
        sqrt_2gm_row = np.full(b_size, math.sqrt(2.0 * gamma))
        sqrt_8egm_dt_row = np.full(b_size, math.sqrt(8.0 * eta * gamma) * dt)

        def refresh_gamma_rows():
            np.multiply(gamma, self._gamma_scale(), out=gm_row)
            np.multiply(gm_row, dt, out=gm_dt_row)
            np.sqrt(2.0 * gm_row, out=sqrt_2gm_row)
            np.multiply(np.sqrt(8.0 * eta * gm_row), dt, out=sqrt_8egm_dt_row)

        for step in range(self.n_steps):
            if block_pos >= dw_block.shape[1]:
                take = min(chunk, self.n_steps - step)
                dw_block = np.stack([s.next_block(take) for s in self.streams])
                block_pos = 0
            dw = dw_block[:, block_pos]
            block_pos += 1
            t_next = (step + 1) * dt

            if sc.heating_diagnostics:
                self._heating_diagnostics(c_arr, c1mc, dw, gm_row)

            # unitary split step at the current amplitude, then measurement
            # back-action (Euler-Maruyama) + renormalization
            phase_multiply(self.psi, self.exp_v)
            psi_k = fft_last(self.psi)
            phase_multiply_row(psi_k, self.exp_k)
            self.psi = ifft_last(psi_k)
            measure_update(self.psi, self.exp_v, c_arr, gm_dt_row,
                           sqrt_2gm_row * dw, c_mean, norm_dev)
            self.norm_dev_sum += norm_dev

            # homodyne record synthesized from the true <cos^2>
            dr = sqrt_eta * (dw - sqrt_8egm_dt_row * c_mean)

            signal = None
            if run_estimator:
                estimator_update(self.est_m, dr, self.amp_values, gm_row, eta,
                                 k, dt, clamped)
                self.clamp_count += clamped
                bad = ~np.isfinite(self.est_m).all(axis=0)
                if bad.any():
                    new_fail = bad & ~self.failed
                    if np.any(new_fail):
                        self.failed |= new_fail
                        self.fail_step[new_fail] = step
                e2 = np.exp(-2.0 * k**2 * self.est_m[2])
                signal = -0.5 * (1.0 + e2 * np.cos(2.0 * k * self.est_m[0]))
            elif source == "truestate":
                signal = -c_mean
            elif source == "photocurrent":
                signal = dr / (eta * np.sqrt(8.0 * gm_row) * dt)

            if signal is not None:
                if self.n_filled < w:
                    self.history[:, self.n_filled] = signal
                    self.n_filled += 1
                    if 3 <= self.n_filled:
                        rows = self.fit_weights.slope_row(self.n_filled)
                        self.slope = self.history[:, :self.n_filled] @ rows
                else:
                    # circular buffer: write in place, read with rotated weights
                    if slope_rolls is None:
                        base = self.fit_weights.slope_row(w)
                        slope_rolls = np.stack([np.roll(base, s) for s in range(w)])
                        write_pos = 0
                    self.history[:, write_pos] = signal
                    write_pos = (write_pos + 1) % w
                    self.slope = self.history @ slope_rolls[write_pos]
                if self.n_filled >= 3 and t_next >= feedback_start:
                    new_codes = decide_code(self.slope, self.codes)
                    changed = new_codes != self.codes
                    if np.any(changed):
                        self.codes = new_codes
                        self.amp_values[changed] = self.amps[new_codes[changed]]
                        self.exp_v[changed] = self.exp_v_table[new_codes[changed]]
                        if scale_gamma:
                            refresh_gamma_rows()

            if sample_row < n_samples and step + 1 == sample_steps[sample_row]:
                record(sample_row, step + 1)
                sample_row += 1

        times = sample_steps * dt
        records = []
        for row, index in enumerate(self.indices):
            series = {name: buf[name][:, row].copy() for name in SERIES_NAMES}
            clamp_fraction = float(self.clamp_count[row]) / self.n_steps
            records.append(TrajectoryRecord(
                trajectory_index=index,
                base_seed=sc.base_seed,
                config_hash=self.hash,
                times=times.astype(float),
                series=series,
                failed=bool(self.failed[row]),
                fail_step=int(self.fail_step[row]),
                clamp_fraction=clamp_fraction,
            ))
        return records


def run_trajectory(cfg: RunConfig, trajectory_index: int) -> TrajectoryRecord:
    """Run a single conditioned closed-loop trajectory (deterministic in
    (config, base_seed, trajectory_index))."""
    return _BatchEngine(cfg, [trajectory_index]).run()[0]


def _run_chunk(args) -> list[TrajectoryRecord]:
    cfg, indices = args
    return _BatchEngine(cfg, indices).run()


def run_batch(cfg: RunConfig, indices: list[int]) -> list[TrajectoryRecord]:
    return _BatchEngine(cfg, indices).run()


def aggregate(records: list[TrajectoryRecord], t_max: float) -> EnsembleStats:
    """Ensemble statistics over the non-failed trajectories."""
    good = [r for r in records if not r.failed]
    if not good:
        raise EnsembleInvalidError("no surviving trajectories to aggregate")
    times = good[0].times
    window = times >= t_max - FINAL_WINDOW
    mean: dict[str, np.ndarray] = {}
    se: dict[str, np.ndarray] = {}
    final_mean: dict[str, float] = {}
    final_se: dict[str, float] = {}
    n = len(good)
    for name in SERIES_NAMES:
        stack = np.stack([r[name] for r in good])          # (n, T)
        mean[name] = stack.mean(axis=0)
        se[name] = (stack.std(axis=0, ddof=1) / math.sqrt(n)) if n > 1 else np.full(times.size, np.nan)
        per_traj = stack[:, window].mean(axis=1)
        final_mean[name] = float(per_traj.mean())
        final_se[name] = float(per_traj.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    parity_abs = np.stack([np.abs(r["parity"]) for r in good])
    mean["parity_abs"] = parity_abs.mean(axis=0)
    se["parity_abs"] = (parity_abs.std(axis=0, ddof=1) / math.sqrt(n)) if n > 1 else np.full(times.size, np.nan)
    final_mean["parity_abs"] = float(parity_abs[:, window].mean())
    final_se["parity_abs"] = float("nan")
    return EnsembleStats(times=times, mean=mean, se=se,
                         final_mean=final_mean, final_se=final_se,
                         n_trajectories=len(records),
                         n_failed=sum(r.failed for r in records),
                         n_flagged=sum(r.flagged for r in records))


def run_ensemble(cfg: RunConfig, out_dir=None, csv_name: str = "ensemble.csv",
                 threads: int = 1, manifest_extra: dict | None = None):
    """Run the configured ensemble; returns (stats, records).

    With ``out_dir`` set, writes the ensemble CSV and a manifest sufficient
    to re-run the ensemble exactly.  More than 10% failed trajectories marks
    the run invalid (EnsembleInvalidError after persisting outputs).
    """
    t0 = _time.time()
    indices = list(range(cfg.sim.n_trajectories))
    if threads > 1 and len(indices) > 1:
        chunks = np.array_split(np.asarray(indices), threads)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, list(cn)) for cn in chunks if cn.size]))
        records = [r for part in parts for r in part]
    else:
        records = run_batch(cfg, indices)
    records.sort(key=lambda r: r.trajectory_index)
    stats = aggregate(records, cfg.sim.t_max)
    failure_fraction = stats.n_failed / max(len(records), 1)
    if out_dir is not None:
        import pathlib
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_ensemble_csv(stats, out / csv_name)
        manifest = {
            "kind": "ensemble",
            "config": {k: repr(v) if isinstance(v, float) else v
                       for k, v in config_as_dict(cfg).items()},
            "config_hash": config_hash(cfg),
            "n_trajectories": len(records),
            "trajectory_indices": [r.trajectory_index for r in records],
            "base_seed": cfg.sim.base_seed,
            "n_failed": stats.n_failed,
            "n_flagged": stats.n_flagged,
            "failed_indices": [r.trajectory_index for r in records if r.failed],
            "valid": failure_fraction <= 0.1,
            "wall_time_s": round(_time.time() - t0, 3),
            "versions": {"cavitycool": __version__, "numpy": np.__version__},
            "outputs": [csv_name],
        }
        manifest.update(manifest_extra or {})
        write_manifest(out / (csv_name.rsplit(".", 1)[0] + "_manifest.json"), manifest)
    if failure_fraction > 0.1:
        raise EnsembleInvalidError(
            f"{stats.n_failed}/{len(records)} trajectories failed (> 10%)")
    return stats, records


def epsilon_sweep(cfg: RunConfig, epsilons=None, sources=("estimator", "truestate"),
                  out_dir=None, csv_name: str = "sweep.csv", threads: int = 1):
    """Final-window energies versus switching amplitude, with theory overlay."""
    epsilons = list(cfg.sweep_epsilons if epsilons is None else epsilons)
    scaled = cfg.resolve_scaled()
    rows = []
    for eps in epsilons:
        theory = {}
        inputs = TheoryInputs(epsilon=eps, gamma=scaled.gamma, ktilde=scaled.ktilde)
        for variant in ("centroid", "squeezing"):
            try:
                theory[variant] = theory_ss_energy(inputs, variant)
            except UncontrollableRegimeError:
                theory[variant] = float("nan")
        for source in sources:
            run_cfg = replace(
                cfg,
                control=dataclasses.replace(cfg.control, epsilon=eps,
                                            controller_source=source))
            stats, _ = run_ensemble(run_cfg, out_dir=None, threads=threads)
            rows.append({
                "epsilon": eps,
                "source": source,
                "energy_final_mean": stats.final_mean["energy"],
                "energy_final_se": stats.final_se["energy"],
                "theory_centroid": theory["centroid"],
                "theory_squeezing": theory["squeezing"],
            })
    if out_dir is not None:
        import pathlib
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out / csv_name)
        manifest = {
            "kind": "sweep",
            "config": {k: repr(v) if isinstance(v, float) else v
                       for k, v in config_as_dict(cfg).items()},
            "config_hash": config_hash(cfg),
            "epsilons": epsilons,
            "sources": list(sources),
            "n_trajectories": cfg.sim.n_trajectories,
            "versions": {"cavitycool": __version__, "numpy": np.__version__},
            "outputs": [csv_name],
        }
        write_manifest(out / (csv_name.rsplit(".", 1)[0] + "_manifest.json"), manifest)
    return rows
