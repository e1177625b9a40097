"""Command-line surface: ensemble / analytics / trajectory / sweeps / oracle.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import storage_prob_cavity, storage_prob_fs, weighted_mean_dephasing
from .config import RunConfig, load_config, preset, preset_names, save_config
from .ensemble import dump_csv
from .errors import ConfigError, NumericalError
from .sweeps import emit_results, evaluate_point, materialize, run_efficiency_sweep, run_im_sweep, _build_generator, _auto_dt
from .dynamics import run_deterministic, storage_probability
from .trajectories import batch_run, master_equation_oracle, run_trajectory


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run config (object or list of curve objects)")
    p.add_argument("--preset", choices=preset_names(), help="shipped figure preset")
    p.add_argument("--scale", type=float, default=1.0, help="atom-count multiplier for desk-scale runs")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--n-traj", type=int, help="override trajectory count")
    p.add_argument("--threads", type=int, default=1, help="parallel sweep points")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _load(args) -> list[RunConfig]:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("provide exactly one of --config or --preset")
    configs = load_config(args.config) if args.config else preset(args.preset)
    out = []
    for cfg in configs:
        if args.scale != 1.0:
            cfg = cfg.scaled(args.scale)
        d = cfg.to_dict()
        if args.seed is not None:
            d["run"]["base_seed"] = args.seed
        if getattr(args, "n_traj", None) is not None:
            d["run"]["n_traj"] = args.n_traj
        out.append(RunConfig.from_dict(d))
    return out


def _cmd_ensemble(args) -> None:
    cfg = _load(args)[0]
    setup = materialize(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{cfg.label}_ensemble.csv"
    dump_csv(setup.ensemble, path)
    summary = {
        "label": cfg.label,
        "n_atoms": setup.ensemble.n_atoms,
        "blockade_metric": "cbar_bp" if cfg.variant == "cavity" else "dbar_bp",
        "realized_blockade_re": setup.realized_blockade,
        "blockade_ratio": setup.blockade_ratio,
        "positions_csv": str(path),
    }
    print(json.dumps(summary, indent=2))


def _cmd_analytics(args) -> None:
    out = []
    for cfg in _load(args):
        setup = materialize(cfg)
        cc = cfg.control
        entry = {
            "label": cfg.label,
            "variant": cfg.variant,
            "delta_small": setup.control.delta_small,
            "gamma_out": setup.gamma_out_val,
            "coupling": setup.coupling,
            "matched_alpha_in_p_sq": setup.matched_alpha_sq,
            "gamma_r_bar_at_matched": weighted_mean_dephasing(
                setup.channels_unit.scaled(np.sqrt(setup.matched_alpha_sq)).gamma_r, setup.weights
            ),
            "realized_blockade_re": setup.realized_blockade,
            "pulse_tau": setup.control.pulse.tau,
            "pulse_t0": setup.control.pulse.t0,
        }
        if cfg.variant == "cavity":
            entry["storage_prob_analytic"] = storage_prob_cavity(setup.coupling)
        else:
            entry["storage_prob_analytic_a"] = storage_prob_fs(setup.coupling, cc.gamma_ec, cc.delta_big, "a")
            entry["storage_prob_analytic_b"] = storage_prob_fs(setup.coupling, cc.gamma_ec, cc.delta_big, "b")
        out.append(entry)
    print(json.dumps(out[0] if len(out) == 1 else out, indent=2))


def _cmd_trajectory(args) -> None:
    cfg = _load(args)[0]
    setup = materialize(cfg)
    alpha_sq = cfg.probe.alpha_in_p_sq if cfg.probe.alpha_in_p_sq is not None else setup.matched_alpha_sq
    ch = setup.channels_unit.scaled(float(np.sqrt(alpha_sq)))
    gen = _build_generator(cfg.variant, setup.ensemble, setup.control, ch)
    t_post = cfg.run.t_max_post if cfg.run.t_max_post is not None else 50.0 / setup.gamma_out_val
    rec = run_trajectory(gen, setup.control.pulse.end + t_post, cfg.run.base_seed, index=args.index, dt_obs=_auto_dt(cfg, setup.control.pulse.tau))
    args.out.mkdir(parents=True, exist_ok=True)
    ev_path = args.out / f"{cfg.label}_trajectory_{args.index}.csv"
    with open(ev_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["traj_id", "t", "kind", "l"])
        for ev in rec.events:
            w.writerow([args.index, repr(ev.t), ev.kind, "" if ev.l is None else ev.l])
    print(
        json.dumps(
            {
                "label": cfg.label,
                "index": args.index,
                "seed": rec.seed,
                "n_events": len(rec.events),
                "n_readout": rec.n_readout,
                "outcome": rec.outcome,
                "converted": rec.converted,
                "terminated": rec.terminated,
                "events_csv": str(ev_path),
            },
            indent=2,
        )
    )


def _run_sweep_cmd(args, kind: str) -> None:
    configs = _load(args)
    runner = run_im_sweep if kind == "im" else run_efficiency_sweep
    curves = []
    for cfg in configs:
        result = runner(cfg, threads=args.threads)
        csv_path, meta_path = emit_results(result, args.out)
        curves.append({"csv": csv_path.name, "label": cfg.label})
        print(f"{cfg.label}: wrote {csv_path} and {meta_path}")
    spec_name = args.preset or (args.config.stem if args.config else "sweep")
    y = "im_probability" if kind == "im" else "efficiency"
    figure_spec = {
        "curves": curves,
        "x": "axis_value",
        "y": y,
        "yerr": "im_stderr" if kind == "im" else "efficiency_stderr",
        "xlabel": configs[0].sweep.axis,
        "ylabel": y,
        "out": f"{spec_name}.svg",
        "format": "svg",
        "guide_degree": None if kind == "im" else 3,
    }
    spec_path = args.out / f"{spec_name}.figure-spec.json"
    with open(spec_path, "w") as fh:
        json.dump(figure_spec, fh, indent=2)
        fh.write("\n")
    print(f"figure spec: {spec_path}")


def _cmd_oracle(args) -> None:
    cfg = _load(args)[0]
    setup = materialize(cfg)
    alpha_sq = cfg.probe.alpha_in_p_sq if cfg.probe.alpha_in_p_sq is not None else setup.matched_alpha_sq
    ch = setup.channels_unit.scaled(float(np.sqrt(alpha_sq)))
    gen = _build_generator(cfg.variant, setup.ensemble, setup.control, ch)
    t_post = cfg.run.t_max_post if cfg.run.t_max_post is not None else 50.0 / setup.gamma_out_val
    t_total = setup.control.pulse.end + t_post
    t_eval = np.linspace(0.0, t_total, 9)[1:]
    oracle = master_equation_oracle(gen, t_eval)
    stats = batch_run(gen, t_total, cfg.run.n_traj, cfg.run.base_seed, n_th=cfg.run.n_th, sample_times=t_eval, dt_obs=_auto_dt(cfg, setup.control.pulse.tau))
    pops = stats.population_samples
    print(
        json.dumps(
            {
                "label": cfg.label,
                "t": list(map(float, oracle["t"])),
                "oracle_pop_r": oracle["pop_r"].tolist(),
                "trajectory_pop_r": pops["pop_r"].tolist(),
                "oracle_readout_mean": oracle["readout_mean"].tolist(),
                "trajectory_readout_mean": stats.mean_readout_jumps,
                "n_traj": stats.n_traj,
            },
            indent=2,
        )
    )


def _cmd_dump_preset(args) -> None:
    configs = preset(args.preset)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.preset}.json"
    save_config(configs, path)
    print(f"wrote {path}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rydspt", description="CW Rydberg single-photon transistor simulator")
    parser.add_argument("--version", action="version", version=f"rydspt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, extra in [
        ("ensemble", _cmd_ensemble, None),
        ("analytics", _cmd_analytics, None),
        ("trajectory", _cmd_trajectory, "index"),
        ("im-sweep", lambda a: _run_sweep_cmd(a, "im"), None),
        ("efficiency-sweep", lambda a: _run_sweep_cmd(a, "efficiency"), None),
        ("oracle", _cmd_oracle, None),
    ]:
        p = sub.add_parser(name)
        _add_common(p)
        if extra == "index":
            p.add_argument("--index", type=int, default=0, help="trajectory index within the batch")
        p.set_defaults(func=fn)

    p = sub.add_parser("dump-preset", help="write a preset's JSON config")
    p.add_argument("--preset", choices=preset_names(), required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=_cmd_dump_preset)

    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
