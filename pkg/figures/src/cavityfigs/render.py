"""Render the simulator's CSV outputs as publication-style figures.

Four figure kinds, one per CSV interface of the simulation package:

* ``fig1``  single-trajectory tracking: true vs estimated <X> and V_x
            (``fig1_trajectory.csv``)
* ``fig2``  mean-energy relaxation for the estimator / photocurrent / none
            signal sources (``fig2_<source>.csv``; any available subset is
            drawn, with missing sources noted beside the legend)
* ``fig3``  band populations, estimator vs truestate source, two panels
            (``fig3_<source>.csv``)
* ``fig4``  final energies against the switching amplitude with the
            steady-state theory overlay and a magnified inset
            (``fig4_sweep.csv``)

Rendering is read-only and deterministic: styles are fixed and the SVG/PNG
payload carries no timestamps, so identical inputs give identical bytes.
Energies are relative to the potential minimum; time is in scaled units.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "cavityfigs"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

TRAJECTORY_FILE = "fig1_trajectory.csv"
FIG2_SOURCES = ("estimator", "photocurrent", "none")
FIG2_LABELS = {"estimator": "Gaussian estimator", "photocurrent": "photocurrent",
               "none": "no cooling"}
FIG3_SOURCES = ("estimator", "truestate")
FIG3_LABELS = {"estimator": "Gaussian estimator", "truestate": "true state"}
SWEEP_FILE = "fig4_sweep.csv"

BAND_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


class RenderError(RuntimeError):
    """Unusable input (missing file, missing column, or no data rows)."""


def read_csv(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise RenderError(f"expected input file is missing: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise RenderError(f"{path.name}: missing required column {column!r}")
        rows = list(reader)
    if not rows:
        raise RenderError(f"{path.name}: no data rows")
    out: dict[str, np.ndarray] = {}
    for col in header:
        values = [row[col] for row in rows]
        try:
            out[col] = np.array([float(v) for v in values])
        except ValueError:
            out[col] = np.array(values)
    return out


def _save(fig, output_path: Path) -> None:
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output_path, metadata=_no_date_metadata(output_path))
    plt.close(fig)


def _no_date_metadata(output_path: Path) -> dict | None:
    if output_path.suffix.lower() == ".svg":
        return {"Date": None}
    return None


def render_fig1(input_dir: Path, output_path: Path) -> dict:
    data = read_csv(Path(input_dir) / TRAJECTORY_FILE,
                    ("time", "x_true", "x_est", "vx_true", "vx_est"))
    fig, (ax_x, ax_v) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    ax_x.plot(data["time"], data["x_true"], lw=1.8, color="k", label="true")
    ax_x.plot(data["time"], data["x_est"], lw=0.8, color="#d62728", label="estimator")
    ax_x.set_ylabel(r"$\langle X \rangle$")
    ax_x.legend(loc="upper right", frameon=False)
    ax_v.plot(data["time"], data["vx_true"], lw=1.8, color="k")
    ax_v.plot(data["time"], data["vx_est"], lw=0.8, color="#d62728")
    ax_v.set_ylabel(r"$V_x$")
    ax_v.set_xlabel("time (scaled units)")
    fig.align_ylabels()
    _save(fig, output_path)
    return {"series": ["x_true", "x_est", "vx_true", "vx_est"]}


def render_fig2(input_dir: Path, output_path: Path) -> dict:
    input_dir = Path(input_dir)
    available, missing = [], []
    for source in FIG2_SOURCES:
        path = input_dir / f"fig2_{source}.csv"
        if path.exists():
            available.append((source, read_csv(path, ("time", "energy_mean",
                                                      "energy_se"))))
        else:
            missing.append(source)
    if not available:
        raise RenderError(f"no fig2_<source>.csv files found in {input_dir}")
    fig, ax = plt.subplots(figsize=(6, 4))
    widths = {"estimator": 1.8, "photocurrent": 0.9, "none": 1.2}
    styles = {"estimator": "-", "photocurrent": "-", "none": "--"}
    for source, data in available:
        ax.plot(data["time"], data["energy_mean"], styles[source],
                lw=widths[source], color="k", label=FIG2_LABELS[source])
        ax.fill_between(data["time"],
                        data["energy_mean"] - data["energy_se"],
                        data["energy_mean"] + data["energy_se"],
                        color="k", alpha=0.15, linewidth=0)
    ax.set_xlabel("time (scaled units)")
    ax.set_ylabel(r"$\langle H \rangle$ above potential minimum")
    legend_title = None
    if missing:
        legend_title = "no data: " + ", ".join(missing)
    ax.legend(loc="upper left", frameon=False, title=legend_title)
    _save(fig, output_path)
    return {"sources": [source for source, _ in available], "missing": missing}


def render_fig3(input_dir: Path, output_path: Path) -> dict:
    input_dir = Path(input_dir)
    required = ("time", "p0_mean", "p1_mean", "p2_mean", "p3_mean")
    panels = [(source, read_csv(input_dir / f"fig3_{source}.csv", required))
              for source in FIG3_SOURCES]
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6, 5.5))
    for ax, (source, data) in zip(axes, panels):
        for band in range(4):
            ax.plot(data["time"], data[f"p{band}_mean"], lw=1.2,
                    color=BAND_COLORS[band], label=f"band {band}")
        ax.set_ylabel("population")
        ax.set_ylim(0, 1)
        ax.text(0.98, 0.84, FIG3_LABELS[source], transform=ax.transAxes,
                ha="right")
    axes[0].legend(loc="center right", frameon=False, fontsize=8)
    axes[1].set_xlabel("time (scaled units)")
    _save(fig, output_path)
    return {"sources": [source for source, _ in panels]}


def render_fig4(input_dir: Path, output_path: Path) -> dict:
    data = read_csv(Path(input_dir) / SWEEP_FILE,
                    ("epsilon", "source", "energy_final_mean",
                     "energy_final_se", "theory_centroid"))
    with (Path(input_dir) / SWEEP_FILE).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    sources = sorted({row["source"] for row in rows})
    markers = {"estimator": "o", "truestate": "s", "photocurrent": "^"}

    fig, ax = plt.subplots(figsize=(6, 4.2))
    for source in sources:
        eps = np.array([float(r["epsilon"]) for r in rows if r["source"] == source])
        e = np.array([float(r["energy_final_mean"]) for r in rows
                      if r["source"] == source])
        se = np.array([float(r["energy_final_se"]) for r in rows
                       if r["source"] == source])
        order = np.argsort(eps)
        ax.errorbar(eps[order], e[order], yerr=se[order], mfc="none", color="k",
                    marker=markers.get(source, "d"), ls="none", capsize=2,
                    label=source)
    theory_pairs = sorted({(float(r["epsilon"]), float(r["theory_centroid"]))
                           for r in rows
                           if r["theory_centroid"] not in ("", "nan")
                           and not np.isnan(float(r["theory_centroid"]))})
    has_theory = bool(theory_pairs)
    if has_theory:
        te, tv = zip(*theory_pairs)
        ax.plot(te, tv, "k--", lw=1.0, label="theory")
    ax.set_xlabel(r"switching amplitude $\epsilon$")
    ax.set_ylabel("final energy")
    ax.legend(loc="upper right", frameon=False)

    # magnified inset over the effective-cooling plateau
    effective = [(float(r["epsilon"]), float(r["energy_final_mean"]),
                  float(r["energy_final_se"])) for r in rows
                 if float(r["epsilon"]) > 0.01]
    if effective:
        inset = ax.inset_axes([0.42, 0.45, 0.53, 0.4])
        for source in sources:
            pts = [(float(r["epsilon"]), float(r["energy_final_mean"]),
                    float(r["energy_final_se"])) for r in rows
                   if r["source"] == source and float(r["epsilon"]) > 0.01]
            if not pts:
                continue
            eps, e, se = map(np.array, zip(*sorted(pts)))
            inset.errorbar(eps, e, yerr=se, mfc="none", color="k",
                           marker=markers.get(source, "d"), ls="none",
                           capsize=2, markersize=3)
        if has_theory:
            te, tv = zip(*(p for p in theory_pairs if p[0] > 0.01))
            inset.plot(te, tv, "k--", lw=0.8)
        inset.tick_params(labelsize=7)
    _save(fig, output_path)
    return {"sources": sources, "theory_overlay": has_theory,
            "inset": bool(effective)}


RENDERERS = {"fig1": render_fig1, "fig2": render_fig2, "fig3": render_fig3,
             "fig4": render_fig4}


def render(fig_spec: str, input_dir, output_path) -> dict:
    """Render one figure kind from ``input_dir`` CSVs to ``output_path``."""
    try:
        renderer = RENDERERS[fig_spec]
    except KeyError:
        raise RenderError(f"unknown figure spec {fig_spec!r}; "
                          f"choose from {sorted(RENDERERS)}") from None
    return renderer(Path(input_dir), Path(output_path))
