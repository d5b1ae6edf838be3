"""Command-line entry point with figure presets and full parameter override.

Subcommands:
    fig1      single-trajectory tracking demo (true vs estimated <X>, V_x)
    fig2      energy-relaxation ensembles: estimator, photocurrent, none
    fig3      band-population ensembles: estimator and truestate sources
    fig4      switching-amplitude sweep with the steady-state theory overlay
    run       fully custom ensemble from the resolved configuration
    theory    print the steady-state predictions for the configured epsilons
    validate  run the fast invariant suite and report pass/fail

Common flags: --config FILE, --set key=value (repeatable), --out DIR,
--ntraj N, --seed S, --threads T.  Presets default to 32 trajectories
(--ntraj 128 reproduces the full-statistics ensembles).  Every run writes a
manifest sufficient to re-run it exactly.

Exit codes: 0 success, 1 failed run, 2 bad configuration key.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .errors import ConfigError, EnsembleInvalidError, UnknownKeyError
from .params import RunConfig, resolve_config
from .analysis import TheoryInputs, theory_ss_energy
from .errors import UncontrollableRegimeError

PRESET_TRAJECTORIES = 32


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="key = value config file")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config key (repeatable)")
    sub.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    sub.add_argument("--ntraj", type=int, default=None, help="trajectory count")
    sub.add_argument("--seed", type=int, default=None, help="base seed")
    sub.add_argument("--threads", type=int, default=1, help="worker process count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavitycool", description=__doc__.split("\n")[0])
    subs = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("fig1", "single-trajectory tracking demo"),
        ("fig2", "cooling-performance ensembles (estimator/photocurrent/none)"),
        ("fig3", "band-population ensembles (estimator/truestate)"),
        ("fig4", "epsilon sweep with theory overlay"),
        ("run", "custom ensemble from the configuration"),
        ("theory", "print steady-state theory values"),
        ("validate", "run the fast invariant suite"),
    ):
        _add_common(subs.add_parser(name, help=text))
    return parser


def _resolve(args, default_ntraj=None) -> RunConfig:
    text = args.config.read_text() if args.config else None
    cfg = resolve_config(text, list(args.overrides))
    sim_changes = {}
    ntraj = args.ntraj if args.ntraj is not None else default_ntraj
    if ntraj is not None and not any(o.startswith("sim.n_trajectories") for o in args.overrides):
        sim_changes["n_trajectories"] = ntraj
    if args.seed is not None:
        sim_changes["base_seed"] = args.seed
    if sim_changes:
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, **sim_changes))
    return cfg


def _with(cfg: RunConfig, **control_changes) -> RunConfig:
    return dataclasses.replace(
        cfg, control=dataclasses.replace(cfg.control, **control_changes))


def cmd_fig1(args) -> int:
    from .ensemble import run_trajectory, config_hash
    from .ensemble_io import write_trajectory_csv, write_manifest
    from .params import config_as_dict

    cfg = _resolve(args, default_ntraj=1)
    cfg = _with(cfg, controller_source="estimator")
    if not any(o.startswith("sim.t_max") for o in args.overrides):
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, t_max=10.0))
    args.out.mkdir(parents=True, exist_ok=True)
    record = run_trajectory(cfg, 0)
    write_trajectory_csv(record, args.out / "fig1_trajectory.csv")
    write_manifest(args.out / "fig1_manifest.json", {
        "kind": "fig1",
        "config": {k: repr(v) if isinstance(v, float) else v
                   for k, v in config_as_dict(cfg).items()},
        "config_hash": config_hash(cfg),
        "trajectory_index": 0,
        "base_seed": cfg.sim.base_seed,
        "failed": record.failed,
        "outputs": ["fig1_trajectory.csv"],
    })
    print(f"fig1: wrote {args.out / 'fig1_trajectory.csv'}")
    return 0


def _preset_ensembles(args, sources, stem: str, default_ntraj=PRESET_TRAJECTORIES) -> int:
    from .ensemble import run_ensemble

    cfg = _resolve(args, default_ntraj=default_ntraj)
    status = 0
    for source in sources:
        run_cfg = _with(cfg, controller_source=source)
        try:
            stats, _ = run_ensemble(run_cfg, out_dir=args.out,
                                    csv_name=f"{stem}_{source}.csv",
                                    threads=args.threads,
                                    manifest_extra={"kind": stem, "source": source})
        except EnsembleInvalidError as exc:
            print(f"{stem}/{source}: RUN INVALID - {exc}", file=sys.stderr)
            status = 1
            continue
        print(f"{stem}/{source}: final-window energy "
              f"{stats.final_mean['energy']:.3f} +/- {stats.final_se['energy']:.3f} "
              f"({stats.n_trajectories} trajectories, {stats.n_failed} failed)")
    return status


def cmd_fig2(args) -> int:
    return _preset_ensembles(args, ("estimator", "photocurrent", "none"), "fig2")


def cmd_fig3(args) -> int:
    return _preset_ensembles(args, ("estimator", "truestate"), "fig3")


def cmd_fig4(args) -> int:
    from .ensemble import epsilon_sweep

    cfg = _resolve(args, default_ntraj=PRESET_TRAJECTORIES)
    rows = epsilon_sweep(cfg, out_dir=args.out, csv_name="fig4_sweep.csv",
                         threads=args.threads)
    for row in rows:
        print(f"fig4: eps={row['epsilon']:g} source={row['source']}: "
              f"E = {row['energy_final_mean']:.3f} +/- {row['energy_final_se']:.3f} "
              f"(theory {row['theory_centroid']:.3f})")
    return 0


def cmd_run(args) -> int:
    from .ensemble import run_ensemble

    cfg = _resolve(args)
    try:
        stats, _ = run_ensemble(cfg, out_dir=args.out, csv_name="ensemble.csv",
                                threads=args.threads, manifest_extra={"kind": "run"})
    except EnsembleInvalidError as exc:
        print(f"run: RUN INVALID - {exc}", file=sys.stderr)
        return 1
    print(f"run: final-window energy {stats.final_mean['energy']:.3f} "
          f"+/- {stats.final_se['energy']:.3f}")
    return 0


def cmd_theory(args) -> int:
    cfg = _resolve(args)
    scaled = cfg.resolve_scaled()
    epsilons = [cfg.control.epsilon] + [e for e in cfg.sweep_epsilons
                                        if e != cfg.control.epsilon]
    print(f"gamma = {scaled.gamma:.4g}  ktilde = {scaled.ktilde:.4g}  "
          f"vmax = {scaled.vmax:.4g}")
    print(f"{'epsilon':>9} {'beta':>9} {'centroid':>9} {'squeezing':>9}")
    for eps in epsilons:
        inputs = TheoryInputs(epsilon=eps, gamma=scaled.gamma, ktilde=scaled.ktilde)
        try:
            centroid = theory_ss_energy(inputs, "centroid")
            squeezing = theory_ss_energy(inputs, "squeezing")
            print(f"{eps:9.4g} {inputs.beta:9.4g} {centroid:9.4g} {squeezing:9.4g}")
        except UncontrollableRegimeError:
            print(f"{eps:9.4g} {inputs.beta:9.4g} {'(beta>=1)':>9} {'-':>9}")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_invariant_suite

    cfg = _resolve(args)
    results = run_invariant_suite(cfg)
    failed = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} invariants passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {
        "fig1": cmd_fig1, "fig2": cmd_fig2, "fig3": cmd_fig3, "fig4": cmd_fig4,
        "run": cmd_run, "theory": cmd_theory, "validate": cmd_validate,
    }[args.command]
    try:
        return handler(args)
    except UnknownKeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EnsembleInvalidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
