import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rydspt.cli import main as cli_main
from rydspt.config import RunConfig, load_config, preset, preset_names, save_config
from rydspt.errors import ConfigError
from rydspt.sweeps import SweepResult, emit_results, materialize, read_results, run_im_sweep

DATA = Path(__file__).parent / "data"


def smoke_config() -> RunConfig:
    return preset("smoke")[0]


def test_preset_names_cover_figures():
    names = preset_names()
    for expected in ("fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "smoke"):
        assert expected in names


def test_config_round_trips_losslessly(tmp_path):
    for name in preset_names():
        configs = preset(name)
        path = tmp_path / f"{name}.json"
        save_config(configs, path)
        back = load_config(path)
        assert [c.to_dict() for c in back] == [c.to_dict() for c in configs]


def test_config_validation_errors():
    cfg = smoke_config().to_dict()
    cfg["variant"] = "freespace"
    with pytest.raises(ConfigError):
        RunConfig.from_dict(cfg)
    cfg2 = smoke_config().to_dict()
    cfg2["sweep"]["axis"] = "bogus"
    with pytest.raises(ConfigError):
        RunConfig.from_dict(cfg2)
    cfg3 = smoke_config().to_dict()
    cfg3["sweep"]["values"] = []
    with pytest.raises(ConfigError):
        RunConfig.from_dict(cfg3)


def test_scaled_adjusts_atom_count():
    cfg = preset("fig2a")[0]
    small = cfg.scaled(0.2)
    assert small.geometry.n_atoms == 200
    assert small.control.cooperativity == cfg.control.cooperativity


def test_emit_empty_sweep_header_only(tmp_path):
    res = SweepResult(label="empty", axis="alpha_in_p_sq", rows=[], meta={"config": {}})
    csv_path, meta_path = emit_results(res, tmp_path)
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("point_index,axis,axis_value")
    assert meta_path.exists()


def test_smoke_sweep_round_trip_and_golden(tmp_path):
    cfg = smoke_config()
    result = run_im_sweep(cfg)
    csv_path, meta_path = emit_results(result, tmp_path, basename="smoke")
    rows = read_results(csv_path)
    assert len(rows) == 3
    for row, orig in zip(rows, result.rows):
        for key in ("axis_value", "im_probability", "det_p_ryd", "alpha_in_p_sq"):
            assert row[key] == orig[key]  # full-precision repr round trip
    meta = json.loads(meta_path.read_text())
    assert meta["package_version"]
    assert meta["config_hash"] == cfg.config_hash()
    assert len(meta["wall_time_s"]) == 3
    # golden comparison: committed bytes from the reference run
    assert csv_path.read_bytes() == (DATA / "smoke_golden.csv").read_bytes()


def test_sweep_rerun_is_byte_identical(tmp_path):
    cfg = smoke_config()
    p1, _ = emit_results(run_im_sweep(cfg), tmp_path / "a")
    p2, _ = emit_results(run_im_sweep(cfg), tmp_path / "b")
    assert p1.read_bytes() == p2.read_bytes()


def test_parallel_equals_serial(tmp_path):
    cfg = smoke_config()
    serial, _ = emit_results(run_im_sweep(cfg, threads=1), tmp_path / "s")
    parallel, _ = emit_results(run_im_sweep(cfg, threads=2), tmp_path / "p")
    assert serial.read_bytes() == parallel.read_bytes()


def test_im_sweep_requires_alpha_axis():
    cfg = smoke_config().to_dict()
    cfg["sweep"] = {"axis": "cbar_bp", "values": [0.3]}
    with pytest.raises(ConfigError):
        run_im_sweep(RunConfig.from_dict(cfg))


def test_unreachable_blockade_target_reports_skipped():
    from rydspt.sweeps import evaluate_point

    cfg = smoke_config().to_dict()
    cfg["sweep"] = {"axis": "cbar_bp", "values": [500.0]}
    cfg = RunConfig.from_dict(cfg)
    row = evaluate_point(cfg, 0, 500.0, "efficiency")
    assert row["status"].startswith("skipped")


@pytest.mark.slow
def test_every_preset_runs_end_to_end_at_smoke_scale(tmp_path):
    from rydspt.sweeps import run_efficiency_sweep

    for name in preset_names():
        for cfg in preset(name):
            d = cfg.scaled(max(10.0 / cfg.geometry.n_atoms, 1e-9)).to_dict()
            d["run"]["n_traj"] = 6
            d["run"]["optimize_alpha"] = False
            d["sweep"]["values"] = d["sweep"]["values"][:2]
            cfg_small = RunConfig.from_dict(d)
            runner = run_im_sweep if cfg_small.sweep.axis == "alpha_in_p_sq" else run_efficiency_sweep
            result = runner(cfg_small)
            csv_path, _ = emit_results(result, tmp_path / name, basename=cfg.label)
            rows = read_results(csv_path)
            assert len(rows) == 2, name
            assert all(r["status"] == "ok" or str(r["status"]).startswith("skipped") for r in rows)


# ---------------------------------------------------------------------------
# CLI surface
# ---------------------------------------------------------------------------


def test_cli_requires_exactly_one_source(tmp_path):
    assert cli_main(["analytics"]) == 2


def test_cli_bad_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"variant": "cavity"}))
    assert cli_main(["analytics", "--config", str(bad)]) == 2


def test_cli_analytics_smoke(capsys):
    assert cli_main(["analytics", "--preset", "smoke"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["variant"] == "cavity"
    assert out["gamma_out"] == pytest.approx(0.12)
    assert "matched_alpha_in_p_sq" in out


def test_cli_ensemble_and_trajectory(tmp_path, capsys):
    assert cli_main(["ensemble", "--preset", "smoke", "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert (tmp_path / "smoke_ensemble.csv").exists()
    assert summary["n_atoms"] == 8

    assert cli_main(["trajectory", "--preset", "smoke", "--out", str(tmp_path), "--index", "1"]) == 0
    info = json.loads(capsys.readouterr().out)
    ev_path = tmp_path / "smoke_trajectory_1.csv"
    assert ev_path.exists()
    lines = ev_path.read_text().splitlines()
    assert lines[0] == "traj_id,t,kind,l"
    assert len(lines) == 1 + info["n_events"]


def test_cli_dump_preset_round_trip(tmp_path, capsys):
    assert cli_main(["dump-preset", "--preset", "fig3a", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    configs = load_config(tmp_path / "fig3a.json")
    assert len(configs) == 3
    assert all(c.variant == "freespace" for c in configs)


def test_cli_im_sweep_matches_api(tmp_path):
    out_dir = tmp_path / "cli"
    code = subprocess.run(
        [sys.executable, "-m", "rydspt.cli", "im-sweep", "--preset", "smoke", "--out", str(out_dir)],
        capture_output=True,
        text=True,
    )
    assert code.returncode == 0, code.stderr
    assert (out_dir / "smoke.csv").read_bytes() == (DATA / "smoke_golden.csv").read_bytes()
    spec = json.loads((out_dir / "smoke.figure-spec.json").read_text())
    assert spec["curves"] == [{"csv": "smoke.csv", "label": "smoke"}]
    assert spec["format"] == "svg"


def test_materialize_reports_realized_blockade():
    setup = materialize(smoke_config())
    assert setup.realized_blockade == pytest.approx(0.4, rel=0.05)
    assert setup.matched_alpha_sq > 0
