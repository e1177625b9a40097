"""Experiment drivers: impedance-matching and efficiency sweeps.

Each sweep point is self-contained (rebuild channels, re-match the probe,
run a trajectory batch) and seeded deterministically from (base_seed, point
index), so points can run in any order or in parallel with identical output.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import dressed_two_photon_detuning, gamma_out, matched_probe_intensity, two_photon_detuning
from .channels import JumpChannelSet, cavity_channels, freespace_channels
from .config import RunConfig
from .dynamics import ControlParams, PulseShape, build_generator_cavity, build_generator_fs, run_deterministic, storage_probability
from .ensemble import AtomEnsemble, EnsembleGeometry, ProbeParams, build_ensemble, pairwise_vdw
from .errors import ConfigError
from .trajectories import batch_run, splitmix64

CSV_COLUMNS = [
    "point_index",
    "axis",
    "axis_value",
    "status",
    "variant",
    "n_atoms",
    "blockade_metric",
    "realized_blockade_re",
    "blockade_ratio",
    "alpha_in_p_sq",
    "matched_alpha_in_p_sq",
    "gamma_out",
    "gamma_r_bar",
    "delta_small",
    "det_p_ryd",
    "det_reflection",
    "det_closure_residual",
    "im_probability",
    "im_stderr",
    "efficiency",
    "efficiency_stderr",
    "mean_readout_jumps",
    "mean_readout_stderr",
    "n_traj",
    "n_th",
    "point_seed",
]


class SkippedPoint(Exception):
    """Target blockade metric unreachable at this geometry; point reported as skipped."""


@dataclass
class PointSetup:
    ensemble: AtomEnsemble
    probe_unit: ProbeParams
    channels_unit: JumpChannelSet
    control: ControlParams
    coupling: float  # C_c (cavity) or d_c (free space)
    gamma_out_val: float
    matched_alpha_sq: float
    weights: np.ndarray | None
    realized_blockade: float
    blockade_ratio: float


@dataclass
class SweepResult:
    label: str
    axis: str
    rows: list[dict]
    meta: dict


def point_seed(base_seed: int, point_index: int) -> int:
    return splitmix64((base_seed ^ 0xC2B2AE3D27D4EB4F) + 7919 * (point_index + 1))


def _empty_channels(variant: str, n: int) -> JumpChannelSet:
    return JumpChannelSet(variant, np.zeros(n, complex), np.zeros((n, n), complex), np.zeros(n))


def _realized_blockade(ensemble: AtomEnsemble, probe: ProbeParams, variant: str) -> float:
    from .ensemble import cooperativity_matrix, optical_depth_matrix

    if variant == "cavity":
        cb, _ = cooperativity_matrix(ensemble, probe)
        return float(np.mean(cb.real))
    db1, _ = optical_depth_matrix(ensemble, probe)
    return float(np.mean(db1.sum(axis=1).real))


def _with_ratio(positions: np.ndarray, ratio: float, probe_cfg, geometry: EnsembleGeometry) -> AtomEnsemble:
    c6 = abs(probe_cfg.omega_p) ** 2 * geometry.sigma**6 / ratio
    return AtomEnsemble(positions=positions, c6=c6, vdw=pairwise_vdw(positions, c6))


def _tune_blockade(cfg: RunConfig, positions: np.ndarray, probe_unit_kw: dict) -> tuple[float, AtomEnsemble, float]:
    """Bisect blockade_ratio so the realized mean Re C_b / d_b hits the target within 1%."""
    target = cfg.probe.target_blockade
    geometry = cfg.geometry

    def realized(ratio: float) -> float:
        ens = _with_ratio(positions, ratio, cfg.probe, geometry)
        return _realized_blockade(ens, ProbeParams(**probe_unit_kw), cfg.variant)

    full = realized(1e-12)  # full-blockade ceiling
    if target > 0.999 * full:
        raise SkippedPoint(f"target blockade {target} exceeds full-blockade ceiling {full:.4g}")
    lo, hi = 1e-12, 1.0
    while realized(hi) > target and hi < 1e15:
        hi *= 10.0
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        val = realized(mid)
        if abs(val - target) <= 0.01 * target:
            ens = _with_ratio(positions, mid, cfg.probe, geometry)
            return mid, ens, val
        if val > target:
            lo = mid
        else:
            hi = mid
    raise SkippedPoint(f"blockade tuning failed to converge on target {target}")


def materialize(cfg: RunConfig) -> PointSetup:
    """Build everything a sweep point needs: ensemble, channels, control, matching."""
    cfg.validate()
    n = cfg.geometry.n_atoms
    probe_kw = dict(
        g_p=cfg.probe.g_p,
        omega_p=cfg.probe.omega_p,
        gamma_ep=cfg.probe.gamma_ep,
        kappa_p=cfg.probe.kappa_p,
        d_p1=cfg.probe.d_p1,
        alpha_in_p=1.0,
    )
    if cfg.variant == "freespace" and probe_kw["d_p1"] is None:
        probe_kw["d_p1"] = cfg.control.d_c / n

    base = build_ensemble(cfg.geometry, c6=abs(cfg.probe.omega_p) ** 2 * cfg.geometry.sigma**6 / cfg.probe.blockade_ratio)
    if cfg.probe.target_blockade is not None:
        ratio, ensemble, realized = _tune_blockade(cfg, base.positions, probe_kw)
    else:
        ratio, ensemble = cfg.probe.blockade_ratio, base
        realized = _realized_blockade(ensemble, ProbeParams(**probe_kw), cfg.variant)

    probe_unit = ProbeParams(**probe_kw)
    channels_unit = cavity_channels(ensemble, probe_unit) if cfg.variant == "cavity" else freespace_channels(ensemble, probe_unit)

    cc = cfg.control
    if cfg.variant == "cavity":
        g_c = cc.g_c if cc.g_c is not None else float(np.sqrt(cc.cooperativity * cc.kappa_c * cc.gamma_ec / n))
        coupling = abs(g_c) ** 2 * n / (cc.kappa_c * cc.gamma_ec)
    else:
        g_c, coupling = None, cc.d_c
    g_out = gamma_out(cfg.variant, coupling, cc.gamma_ec, cc.omega_c, cc.delta_big)
    if cc.delta_small is not None:
        delta_small = cc.delta_small
    elif cc.delta_mode == "dressed":
        delta_small = dressed_two_photon_detuning(cfg.variant, coupling, cc.gamma_ec, cc.omega_c, cc.delta_big)
    else:
        delta_small = two_photon_detuning(cc.omega_c, cc.delta_big)
    tau = cc.pulse_tau if cc.pulse_tau is not None else cc.pulse_tau_gamma_out / g_out
    t0 = cc.pulse_t0 if cc.pulse_t0 is not None else 5.0 * tau
    control = ControlParams(
        omega_c=cc.omega_c,
        gamma_ec=cc.gamma_ec,
        delta_big=cc.delta_big,
        delta_small=delta_small,
        pulse=PulseShape(t0=t0, tau=tau),
        g_c=g_c,
        kappa_c=cc.kappa_c,
        d_c=cc.d_c,
    )

    weights = None
    if not cfg.run.flat_weights:
        gen0 = _build_generator(cfg.variant, ensemble, control, _empty_channels(cfg.variant, n))
        det0 = run_deterministic(gen0, control.pulse.end, _auto_dt(cfg, tau))
        if det0.i_r_atom.sum() > 0:
            weights = det0.i_r_atom
    matched = matched_probe_intensity(g_out, channels_unit, weights) ** 2
    return PointSetup(
        ensemble=ensemble,
        probe_unit=probe_unit,
        channels_unit=channels_unit,
        control=control,
        coupling=coupling,
        gamma_out_val=g_out,
        matched_alpha_sq=matched,
        weights=weights,
        realized_blockade=realized,
        blockade_ratio=ratio,
    )


def _build_generator(variant, ensemble, control, channels):
    return build_generator_cavity(ensemble, control, channels) if variant == "cavity" else build_generator_fs(ensemble, control, channels)


def _auto_dt(cfg: RunConfig, tau: float) -> float:
    if cfg.run.dt_obs is not None:
        return cfg.run.dt_obs
    return float(np.clip(tau / 400.0, 0.02, 1.0))


def _apply_axis(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    d = cfg.to_dict()
    if axis == "cbar_bp" or axis == "dbar_bp":
        d["probe"]["target_blockade"] = value
    elif axis == "c_c":
        d["control"]["cooperativity"] = value
        d["control"]["g_c"] = None
    elif axis == "d_c":
        d["control"]["d_c"] = value
        d["probe"]["d_p1"] = None  # keep d_p1 = d_c / N
    elif axis != "alpha_in_p_sq":
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return RunConfig.from_dict(d)


def _gamma_r_bar(setup: PointSetup, alpha_sq: float) -> float:
    from .analytics import weighted_mean_dephasing

    ch = setup.channels_unit.scaled(np.sqrt(alpha_sq))
    return weighted_mean_dephasing(ch.gamma_r, setup.weights)


def _run_point_batch(cfg, setup, alpha_sq, t_post, seed, n_traj=None):
    ch = setup.channels_unit.scaled(float(np.sqrt(alpha_sq)))
    gen = _build_generator(cfg.variant, setup.ensemble, setup.control, ch)
    t_total = setup.control.pulse.end + t_post
    dt = _auto_dt(cfg, setup.control.pulse.tau)
    det = run_deterministic(gen, t_total, dt)
    stats = batch_run(
        gen,
        t_total,
        n_traj or cfg.run.n_traj,
        seed,
        n_th=cfg.run.n_th,
        det=det,
        dt_obs=dt,
        jump_tol=cfg.run.jump_tol,
        group_size=cfg.run.group_size,
    )
    return det, stats


def _optimize_alpha(cfg, setup, t_post, seed) -> tuple[float, list[dict]]:
    """Coarse log grid then golden-section refinement, maximizing efficiency."""
    trace = []
    n_sub = max(100, cfg.run.n_traj // 4)

    def eff(mult: float, k: int) -> float:
        _, stats = _run_point_batch(cfg, setup, mult * setup.matched_alpha_sq, t_post, splitmix64(seed + k), n_traj=n_sub)
        trace.append({"multiplier": mult, "efficiency": stats.efficiency, "n_traj": n_sub})
        return stats.efficiency

    mults = [0.3, 0.55, 1.0, 1.8, 3.3]
    vals = [eff(m, i) for i, m in enumerate(mults)]
    best = int(np.argmax(vals))
    lo = mults[max(best - 1, 0)]
    hi = mults[min(best + 1, len(mults) - 1)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = np.log(lo), np.log(hi)
    for k in range(3):
        m1, m2 = b - phi * (b - a), a + phi * (b - a)
        if eff(float(np.exp(m1)), 10 + 2 * k) >= eff(float(np.exp(m2)), 11 + 2 * k):
            b = m2
        else:
            a = m1
    best_mult = float(np.exp(0.5 * (a + b)))
    return best_mult * setup.matched_alpha_sq, trace


def _skipped_row(cfg, idx, axis, value, reason) -> dict:
    return {
        "point_index": idx,
        "axis": axis,
        "axis_value": value,
        "status": f"skipped:{reason}",
        "variant": cfg.variant,
        "n_atoms": cfg.geometry.n_atoms,
        "blockade_metric": "cbar_bp" if cfg.variant == "cavity" else "dbar_bp",
    }


def evaluate_point(cfg: RunConfig, point_index: int, value: float, kind: str) -> dict:
    """One sweep point: realize the axis value, match the probe, run the batch."""
    axis = cfg.sweep.axis
    seed = point_seed(cfg.run.base_seed, point_index)
    t_start = time.perf_counter()
    try:
        cfg_pt = _apply_axis(cfg, axis, value)
        setup = materialize(cfg_pt)
    except SkippedPoint as exc:
        row = _skipped_row(cfg, point_index, axis, value, str(exc))
        row["wall_time_s"] = time.perf_counter() - t_start
        return row

    optimizer_trace = None
    t_post = cfg.run.t_max_post if cfg.run.t_max_post is not None else 50.0 / setup.gamma_out_val
    if kind == "im":
        t_post = min(t_post, 10.0 / setup.gamma_out_val)
    if axis == "alpha_in_p_sq":
        alpha_sq = value * setup.matched_alpha_sq if cfg.sweep.relative_to_matched else value
    elif cfg.probe.alpha_in_p_sq is not None:
        alpha_sq = cfg.probe.alpha_in_p_sq
    elif cfg.run.optimize_alpha:
        alpha_sq, optimizer_trace = _optimize_alpha(cfg_pt, setup, t_post, seed)
    else:
        alpha_sq = setup.matched_alpha_sq

    det, stats = _run_point_batch(cfg_pt, setup, alpha_sq, t_post, seed)
    row = {
        "point_index": point_index,
        "axis": axis,
        "axis_value": value,
        "status": "ok",
        "variant": cfg.variant,
        "n_atoms": cfg_pt.geometry.n_atoms,
        "blockade_metric": "cbar_bp" if cfg.variant == "cavity" else "dbar_bp",
        "realized_blockade_re": setup.realized_blockade,
        "blockade_ratio": setup.blockade_ratio,
        "alpha_in_p_sq": alpha_sq,
        "matched_alpha_in_p_sq": setup.matched_alpha_sq,
        "gamma_out": setup.gamma_out_val,
        "gamma_r_bar": _gamma_r_bar(setup, alpha_sq),
        "delta_small": setup.control.delta_small,
        "det_p_ryd": storage_probability(det),
        "det_reflection": det.i_out,
        "det_closure_residual": det.closure_residual,
        "im_probability": stats.im_probability,
        "im_stderr": stats.im_stderr,
        "efficiency": stats.efficiency,
        "efficiency_stderr": stats.efficiency_stderr,
        "mean_readout_jumps": stats.mean_readout_jumps,
        "mean_readout_stderr": stats.mean_readout_stderr,
        "n_traj": stats.n_traj,
        "n_th": stats.n_th,
        "point_seed": seed,
        "wall_time_s": time.perf_counter() - t_start,
    }
    if optimizer_trace is not None:
        row["optimizer_trace"] = optimizer_trace
    return row


def _point_worker(args) -> dict:
    cfg_dict, point_index, value, kind = args
    return evaluate_point(RunConfig.from_dict(cfg_dict), point_index, value, kind)


def _run_sweep(cfg: RunConfig, kind: str, threads: int = 1) -> SweepResult:
    cfg.validate()
    if cfg.sweep is None:
        raise ConfigError("config has no sweep section")
    order = np.argsort(cfg.sweep.values, kind="stable")
    jobs = [(cfg.to_dict(), int(i), float(cfg.sweep.values[i]), kind) for i in order]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_point_worker, jobs))
    else:
        rows = [_point_worker(j) for j in jobs]
    wall = [r.pop("wall_time_s", 0.0) for r in rows]
    traces = {r["point_index"]: r.pop("optimizer_trace") for r in rows if "optimizer_trace" in r}
    meta = {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "sweep_kind": kind,
        "base_seed": cfg.run.base_seed,
        "point_seeds": [r.get("point_seed") for r in rows],
        "wall_time_s": wall,
        "optimizer_traces": traces or None,
    }
    return SweepResult(label=cfg.label, axis=cfg.sweep.axis, rows=rows, meta=meta)


def run_im_sweep(cfg: RunConfig, threads: int = 1) -> SweepResult:
    """Impedance-matching probability vs probe strength."""
    if cfg.sweep is None or cfg.sweep.axis != "alpha_in_p_sq":
        raise ConfigError("im-sweep requires sweep axis alpha_in_p_sq")
    return _run_sweep(cfg, "im", threads)


def run_efficiency_sweep(cfg: RunConfig, threads: int = 1) -> SweepResult:
    """Transistor efficiency vs blockade metric or control coupling."""
    if cfg.sweep is None or cfg.sweep.axis == "alpha_in_p_sq":
        raise ConfigError("efficiency-sweep requires a non-alpha sweep axis")
    return _run_sweep(cfg, "efficiency", threads)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_results(result: SweepResult, out_dir: str | Path, basename: str | None = None) -> tuple[Path, Path]:
    """Write <label>.csv (header + one row per point) and a JSON metadata sidecar.

    The CSV is byte-stable for a fixed (config, seed, version); run-varying
    details like wall times live in the sidecar.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = basename or result.label
    csv_path = out_dir / f"{name}.csv"
    meta_path = out_dir / f"{name}.meta.json"
    lines = [",".join(CSV_COLUMNS)]
    for row in result.rows:
        lines.append(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS))
    csv_path.write_text("\n".join(lines) + "\n")
    with open(meta_path, "w") as fh:
        json.dump(result.meta, fh, indent=2, default=_json_default)
        fh.write("\n")
    return csv_path, meta_path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def read_results(csv_path: str | Path) -> list[dict]:
    """Parse an emitted CSV back into numeric rows (round-trip helper)."""
    import csv as _csv

    rows = []
    with open(csv_path, newline="") as fh:
        for rec in _csv.DictReader(fh):
            parsed = {}
            for key, val in rec.items():
                if val == "":
                    parsed[key] = None
                    continue
                try:
                    parsed[key] = int(val)
                except ValueError:
                    try:
                        parsed[key] = float(val)
                    except ValueError:
                        parsed[key] = val
            rows.append(parsed)
    return rows
