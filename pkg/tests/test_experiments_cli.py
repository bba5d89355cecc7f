"""Experiment runner and CLI: exit codes, manifests, determinism."""
import hashlib
import json

import pytest

from forestlab import EXPERIMENTS, ExperimentConfig, run
from forestlab.cli import main
from forestlab.errors import ConfigError


def _cfg(tmp_path, name, **kw):
    kw.setdefault("plot", False)
    kw.setdefault("out_dir", str(tmp_path / name))
    return ExperimentConfig(experiment=name, **kw)


def test_exit_code_invalid_config(tmp_path, capsys):
    assert run(_cfg(tmp_path, "sample", seed=-4)) == 2
    assert "seed" in capsys.readouterr().err
    assert run(ExperimentConfig(experiment="nonsense")) == 2
    assert run(_cfg(tmp_path, "cuttime", d=5)) == 2
    assert run(_cfg(tmp_path, "resample-test", radius=4, ball_radius=2)) == 2
    assert run(_cfg(tmp_path, "resistance", radii=(3, 1))) == 2


def test_exit_code_budget(tmp_path, capsys):
    code = run(_cfg(tmp_path, "sample", d=2, radius=4, replicas=2,
                    budget_vertices=10, dump_forests=False))
    assert code == 3
    assert "budget" in capsys.readouterr().err.lower()


def test_sample_artifacts_and_manifest(tmp_path):
    cfg = _cfg(tmp_path, "sample", d=2, radius=2, replicas=6)
    assert run(cfg) == 0
    out = tmp_path / "sample"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "sample"
    assert manifest["seed"] == 0
    assert {"python", "numpy", "scipy"} <= set(manifest["versions"])
    assert manifest["wall_time_s"] >= 0
    digest = hashlib.sha256(
        json.dumps(manifest["config"], sort_keys=True).encode()).hexdigest()
    assert manifest["config_sha256"] == digest
    assert "samples.csv" in manifest["artifacts"]
    assert "forests/forest_00000.txt" in manifest["artifacts"]
    body = (out / "samples.csv").read_text().splitlines()
    assert body[0] == "replica,components,origin_tree_size"
    assert len(body) == 7
    # config defaults were materialized into the manifest
    assert manifest["config"]["d"] == 2 and manifest["config"]["replicas"] == 6


def test_same_seed_same_bytes(tmp_path):
    a = _cfg(tmp_path, "sample", out_dir=str(tmp_path / "a"), d=2, radius=2,
             replicas=10, dump_forests=False)
    b = _cfg(tmp_path, "sample", out_dir=str(tmp_path / "b"), d=2, radius=2,
             replicas=10, dump_forests=False)
    assert run(a) == 0 and run(b) == 0
    assert (tmp_path / "a" / "samples.csv").read_bytes() == \
           (tmp_path / "b" / "samples.csv").read_bytes()


def test_thread_count_does_not_change_results(tmp_path):
    one = _cfg(tmp_path, "sample", out_dir=str(tmp_path / "t1"), d=2, radius=2,
               replicas=12, threads=1, dump_forests=False)
    four = _cfg(tmp_path, "sample", out_dir=str(tmp_path / "t4"), d=2, radius=2,
                replicas=12, threads=4, dump_forests=False)
    assert run(one) == 0 and run(four) == 0
    assert (tmp_path / "t1" / "samples.csv").read_bytes() == \
           (tmp_path / "t4" / "samples.csv").read_bytes()


def test_radius_expands_to_radii(tmp_path):
    cfg = _cfg(tmp_path, "resistance", d=1, radius=3)
    assert run(cfg) == 0
    manifest = json.loads((tmp_path / "resistance" / "manifest.json").read_text())
    assert manifest["config"]["radii"] == [1, 2, 3]
    assert manifest["summary"]["values"] == pytest.approx([3 / 4, 5 / 6, 7 / 8])


def test_kac_runner(tmp_path):
    cfg = _cfg(tmp_path, "kac", replicas=4000)
    assert run(cfg) == 0
    out = tmp_path / "kac"
    rows = (out / "kac.csv").read_text().splitlines()
    assert rows[0].startswith("chain,")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["summary"]["all_within_ci"] is True


def test_cli_end_to_end(tmp_path):
    out = tmp_path / "cli_sample"
    code = main(["sample", "--d", "2", "--radius", "2", "--replicas", "4",
                 "--out", str(out), "--no-plot", "--no-dump", "--seed", "7"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 7
    assert manifest["config"]["plot"] is False
    assert manifest["config"]["dump_forests"] is False
    assert not (out / "forests").exists()


def test_cli_config_file_and_flag_override(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps(
        {"d": 2, "radius": 2, "replicas": 5, "seed": 3, "plot": False,
         "dump_forests": False}))
    out = tmp_path / "from_file"
    code = main(["sample", "--config", str(cfg_file), "--out", str(out),
                 "--replicas", "8"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["replicas"] == 8   # flag beats file
    assert manifest["config"]["seed"] == 3       # file beats default


def test_cli_rejects_unknown_config_field(tmp_path, capsys):
    cfg_file = tmp_path / "bad.json"
    cfg_file.write_text(json.dumps({"replicass": 5}))
    assert main(["sample", "--config", str(cfg_file)]) == 2
    assert "replicass" in capsys.readouterr().err
    cfg_file.write_text("[1, 2]")
    assert main(["sample", "--config", str(cfg_file)]) == 2
    assert main(["sample", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_exit_code_plumbing(tmp_path, capsys):
    assert main(["cuttime", "--d", "5", "--out", str(tmp_path / "ct")]) == 2
    capsys.readouterr()
    with pytest.raises(SystemExit):
        main(["not-an-experiment"])


def test_plot_artifacts_written(tmp_path):
    cfg = ExperimentConfig(experiment="resistance", out_dir=str(tmp_path / "r"),
                           d=1, radius=2, plot=True)
    assert run(cfg) == 0
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert "resistance.png" in manifest["artifacts"]
    png = (tmp_path / "r" / "resistance.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_config_error_type():
    err = ConfigError("seed", "must be a nonnegative integer")
    assert err.field == "seed"
    assert isinstance(err, ValueError)
    assert "seed" in str(err)


def test_experiments_registry_complete():
    assert len(EXPERIMENTS) == 9
    assert len(set(EXPERIMENTS)) == 9
