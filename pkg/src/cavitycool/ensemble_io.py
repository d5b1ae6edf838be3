"""CSV and manifest writers for ensemble results.

Ensemble CSV columns (one row per recorded time):
    time, energy_mean, energy_se, p0_mean, p0_se, p1_mean, p1_se,
    p2_mean, p2_se, p3_mean, p3_se, parity_mean, parity_abs_mean,
    amplitude_high_fraction

Sweep CSV columns (one row per (epsilon, source) ensemble):
    epsilon, source, energy_final_mean, energy_final_se,
    theory_centroid, theory_squeezing

Trajectory CSV (single-trajectory demos): time plus the true and estimated
means/variances, energy, amplitude, and parity.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

ENSEMBLE_COLUMNS = (
    "time", "energy_mean", "energy_se", "p0_mean", "p0_se", "p1_mean", "p1_se",
    "p2_mean", "p2_se", "p3_mean", "p3_se", "parity_mean", "parity_abs_mean",
    "amplitude_high_fraction",
)

SWEEP_COLUMNS = (
    "epsilon", "source", "energy_final_mean", "energy_final_se",
    "theory_centroid", "theory_squeezing",
)

TRAJECTORY_COLUMNS = (
    "time", "x_true", "x_est", "p_true", "p_est", "vx_true", "vx_est",
    "energy", "amplitude", "parity", "slope",
)


def write_ensemble_csv(stats, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENSEMBLE_COLUMNS)
        for i, t in enumerate(stats.times):
            writer.writerow([
                f"{t:.6g}",
                repr(float(stats.mean["energy"][i])), repr(float(stats.se["energy"][i])),
                repr(float(stats.mean["p0"][i])), repr(float(stats.se["p0"][i])),
                repr(float(stats.mean["p1"][i])), repr(float(stats.se["p1"][i])),
                repr(float(stats.mean["p2"][i])), repr(float(stats.se["p2"][i])),
                repr(float(stats.mean["p3"][i])), repr(float(stats.se["p3"][i])),
                repr(float(stats.mean["parity"][i])),
                repr(float(stats.mean["parity_abs"][i])),
                repr(float(stats.mean["amp_high"][i])),
            ])


def write_sweep_csv(rows, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: (repr(float(row[key]))
                                   if isinstance(row[key], (int, float))
                                   else row[key])
                             for key in SWEEP_COLUMNS})


def write_trajectory_csv(record, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for i, t in enumerate(record.times):
            writer.writerow(
                [f"{t:.6g}"]
                + [repr(float(record[name][i])) for name in TRAJECTORY_COLUMNS[1:]])


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
