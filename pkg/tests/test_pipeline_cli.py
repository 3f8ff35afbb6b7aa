import csv
import hashlib
import json
import re
import shutil

import numpy as np
import pytest
from click.testing import CliRunner

from landflash.analysis import gray_area_map, write_gray_area_csv
from landflash.cli import main
from landflash.config import config_from_dict
from landflash.lattice import LandUseGrid, write_grid_csv
from landflash.nucleation import RegionMask, write_mask_csv
from landflash.pipeline import sweep_pipeline
from landflash.render import MAX_MARKERS, MissingInputs, render_reports

QUICK = {"t_start": 5.0, "t_target": 1.0, "thermalize_sweeps": 20, "cool_sweeps": 200,
         "equilibrate_sweeps": 50, "measure_sweeps": 200, "measure_interval": 10}

ISLAND = {"rows": 12, "cols": 12,
          "suitability": {"generator": {"kind": "two-region-island",
                                        "params": {"island": [3, 3, 6, 6], "margin": 2.0}}},
          "sweep": {"start": 1.0, "stop": 6.0, "step": 1.0}, "schedule": QUICK, "seed_count": 12}


def csv_files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


@pytest.fixture(scope="module")
def island_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("island") / "run"
    sweep_pipeline(config_from_dict(ISLAND), out)
    return out


def test_island_sweep_outputs(island_run):
    for name in ("effective_config.json", "suitability.csv", "use_count_series.csv", "flashpoints.csv",
                 "stable_intervals.csv", "manifest.json"):
        assert (island_run / name).exists()
    rows = list(csv.DictReader(open(island_run / "flashpoints.csv")))
    assert len({r["n"] for r in rows}) == 1 and "1" in {r["type"] for r in rows}
    n = rows[0]["n"]
    for side in ("below", "above", "combined"):
        assert (island_run / "grayarea" / f"fp{n}_{side}.csv").exists()
    pts = sorted((island_run / "points").iterdir())
    assert len(pts) == 6
    assert all((p / "samples.csv").exists() and (p / "ternary.csv").exists() for p in pts)
    series = list(csv.DictReader(open(island_run / "use_count_series.csv")))
    assert len(series) == 6 and all(int(r["replicates"]) == 12 for r in series)


def test_manifest_hashes_every_file(island_run):
    m = json.loads((island_run / "manifest.json").read_text())
    assert m["schema_version"] == 1 and m["status"] == "complete"
    listed = {f["path"]: f["sha256"] for f in m["files"]}
    on_disk = {p.relative_to(island_run).as_posix() for p in island_run.rglob("*")
               if p.is_file() and p.name != "manifest.json"}
    assert set(listed) == on_disk
    for path, digest in listed.items():
        assert hashlib.sha256((island_run / path).read_bytes()).hexdigest() == digest


def test_outputs_identical_across_parallelism(tmp_path, island_run):
    sweep_pipeline(config_from_dict(ISLAND), tmp_path / "p2", parallelism=2)
    assert csv_files(tmp_path / "p2") == csv_files(island_run)


def test_resume_reuses_completed_points(tmp_path, island_run):
    run = tmp_path / "resumed"
    shutil.copytree(island_run, run)
    kept = run / "points" / "ps_1.000000" / "samples.csv"
    stamp = kept.stat().st_mtime_ns
    (run / "points" / "ps_4.000000" / "samples.csv").unlink()
    # a stale temp file from an interrupted write must be ignored
    (run / "points" / "ps_5.000000" / "samples.csv.tmp").write_text("garbage")
    sweep_pipeline(config_from_dict(ISLAND), run, resume=True)
    assert kept.stat().st_mtime_ns == stamp
    (run / "points" / "ps_5.000000" / "samples.csv.tmp").unlink()
    assert csv_files(run) == csv_files(island_run)


def test_constant_field_has_no_flashpoints(tmp_path):
    raw = {"rows": 12, "cols": 12,
           "suitability": {"generator": {"kind": "uniform-random", "params": {"low": 0.5, "high": 0.5}}},
           "sweep": {"values": [0.5, 1.0, 2.0, 4.0]}, "seed_count": 8,
           "schedule": {**QUICK, "t_start": 20.0, "t_target": 12.0}}
    run = sweep_pipeline(config_from_dict(raw), tmp_path / "flat")
    assert (run / "flashpoints.csv").read_text().splitlines() == ["n,P_low,P_high,type,rel_change"]


def test_failure_marker_and_partial_manifest(tmp_path):
    cfg = config_from_dict({"suitability": {"file": "missing.csv"}, "seed_count": 2})
    with pytest.raises(FileNotFoundError):
        sweep_pipeline(cfg, tmp_path / "bad", base_dir=tmp_path)
    assert (tmp_path / "bad" / "FAILED").exists()
    assert json.loads((tmp_path / "bad" / "manifest.json").read_text())["status"] == "failed"


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("LANDFLASH_OUT", str(tmp_path / "env"))
    raw = {**ISLAND, "sweep": {"values": [1.0]}, "seed_count": 2}
    out = sweep_pipeline(config_from_dict(raw))
    assert out == tmp_path / "env" and (out / "use_count_series.csv").exists()


# --- render ---------------------------------------------------------------------

def test_render_from_run(island_run, tmp_path):
    files = render_reports(island_run)
    names = {p.name for p in files}
    assert {"fractions.csv", "fractions.svg", "free_energy.csv"} <= names
    assert any(n.startswith("grayarea_") for n in names)
    assert any(n.startswith("ternary_") for n in names)
    # CSVs alone reproduce the SVGs
    copy = tmp_path / "csv_only"
    shutil.copytree(island_run, copy, ignore=shutil.ignore_patterns("*.svg", "report"))
    render_reports(copy)
    for p in (island_run / "report").glob("*.svg"):
        assert (copy / "report" / p.name).read_bytes() == p.read_bytes()
    m = json.loads((island_run / "manifest.json").read_text())
    assert any(f["path"].startswith("report/") for f in m["files"])


def test_ternary_svg_capped(tmp_path):
    d = tmp_path / "run" / "points" / "ps_1.000000"
    d.mkdir(parents=True)
    rng = np.random.default_rng(0)
    w = rng.dirichlet(np.ones(3), size=1_000_000)
    with open(d / "ternary.csv", "w") as fh:
        fh.write("sample,x,y,w0,w1,w2\n")
        x, y = w[:, 1] + w[:, 2] / 2, w[:, 2] * np.sqrt(3) / 2
        np.savetxt(fh, np.column_stack([np.arange(len(w)), x, y, w]), delimiter=",",
                   fmt=["%d", "%.6f", "%.6f", "%.6f", "%.6f", "%.6f"])
    render_reports(tmp_path / "run")
    svg = (tmp_path / "run" / "report" / "ternary_ps_1.000000.svg").read_text()
    assert svg.count("<circle") == MAX_MARKERS


def test_unanimous_gray_area_fully_saturated(tmp_path):
    g = tmp_path / "run" / "grayarea"
    g.mkdir(parents=True)
    write_gray_area_csv(gray_area_map([np.full((4, 4), s) for s in (2, 2, 2)]), g / "fp0_combined.csv")
    render_reports(tmp_path / "run")
    svg = (tmp_path / "run" / "report" / "grayarea_fp0_combined.svg").read_text()
    fills = re.findall(r'fill="#([0-9a-f]{6})"', svg)
    assert len(fills) == 16
    for f in fills:
        rgb = [int(f[k:k + 2], 16) for k in (0, 2, 4)]
        assert max(rgb) == 255 and min(rgb) == 0


def test_render_empty_dir_lists_expected(tmp_path):
    with pytest.raises(MissingInputs) as exc:
        render_reports(tmp_path)
    assert "use_count_series.csv" in str(exc.value) and "ternary.csv" in str(exc.value)


# --- CLI ------------------------------------------------------------------------

def test_cli_end_to_end(tmp_path):
    runner = CliRunner()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**ISLAND, "sweep": {"values": [1.0, 5.0]}, "seed_count": 4}))
    r = runner.invoke(main, ["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"),
                             "--seed", "3", "--sampler", "metropolis"])
    assert r.exit_code == 0, r.output
    eff = json.loads((tmp_path / "s" / "effective_config.json").read_text())
    assert eff["master_seed"] == 3 and eff["sampler"] == "metropolis"
    r = runner.invoke(main, ["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"),
                             "--seed", "3", "--sampler", "metropolis", "--resume"])
    assert r.exit_code == 0, r.output

    r = runner.invoke(main, ["flashpoints", str(tmp_path / "s"), "--alpha", "0.1",
                             "--out", str(tmp_path / "fp.csv")])
    assert r.exit_code == 0 and (tmp_path / "fp.csv").exists()
    assert runner.invoke(main, ["flashpoints", str(tmp_path / "s"), "--alpha", "1.5"]).exit_code != 0

    r = runner.invoke(main, ["anneal", "--config", str(cfg), "--out", str(tmp_path / "a")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["ternary", str(tmp_path / "a" / "samples.csv"), "--out", str(tmp_path / "t.csv")])
    assert r.exit_code == 0 and len((tmp_path / "t.csv").read_text().splitlines()) == 4 * 20 + 1

    for k, cells in enumerate(([[0, 1], [1, 1]], [[2, 1], [1, 0]])):
        write_grid_csv(LandUseGrid(np.array(cells)), tmp_path / f"g{k}.csv")
    r = runner.invoke(main, ["grayarea", str(tmp_path / "g0.csv"), "--above", str(tmp_path / "g1.csv"),
                             "--out", str(tmp_path / "ga.csv")])
    assert r.exit_code == 0 and "2 gray parcels" in r.output

    write_mask_csv(RegionMask.rectangle((12, 12), 3, 3, 6, 6), tmp_path / "mask.csv")
    r = runner.invoke(main, ["nucleation", "--mask", str(tmp_path / "mask.csv"),
                             "--suitability", str(tmp_path / "s" / "suitability.csv"),
                             "--from", "0", "--to", "1", "--out", str(tmp_path / "pred.csv")])
    assert r.exit_code == 0 and "P_S*=3.77778" in r.output

    r = runner.invoke(main, ["render", str(tmp_path / "s")])
    assert r.exit_code == 0 and (tmp_path / "s" / "report" / "fractions.svg").exists()


def test_cli_bad_sampler_rejected(tmp_path):
    r = CliRunner().invoke(main, ["sweep", "--sampler", "gibbs"])
    assert r.exit_code != 0 and "gibbs" in r.output
