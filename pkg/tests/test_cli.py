"""Command line driver: artifacts, determinism, exit codes."""

import json

import pytest

from branchlab.cli import main


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_propagate_run_writes_artifacts(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"experiment": "propagate"})
    rc = main(["--config", cfg, "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert rc == 0
    assert "PASS" in captured.out

    outdir = tmp_path / "out" / "propagate"
    summary = json.loads((outdir / "summary.json").read_text())
    assert all(c["pass"] for c in summary["checks"])

    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["package"]["name"] == "artifact"
    assert manifest["config"]["experiment"] == "propagate"
    assert "summary.json" in manifest["artifacts"]
    assert any(name.endswith(".csv") for name in manifest["artifacts"])


def test_manifest_echoes_seed_override(tmp_path):
    cfg = _write_config(tmp_path, {"experiment": "time-average", "seed": 3})
    rc = main(["--config", cfg, "--output", str(tmp_path / "out"),
               "--seed", "1234", "--quiet"])
    assert rc == 0
    manifest = json.loads(
        (tmp_path / "out" / "time-average" / "manifest.json").read_text()
    )
    assert manifest["config"]["seed"] == 1234
    assert manifest["config"]["output_dir"] == str(tmp_path / "out")


def test_branch_mc_runs_are_byte_identical(tmp_path):
    cfg = _write_config(tmp_path, {
        "experiment": "branch-mc",
        "seed": 42,
        "ensemble": {"n_samples": 400, "seed_repeats": 3},
    })
    rc_a = main(["--config", cfg, "--output", str(tmp_path / "a"), "--quiet"])
    rc_b = main(["--config", cfg, "--output", str(tmp_path / "b"), "--quiet"])
    assert rc_a == rc_b

    dir_a = tmp_path / "a" / "branch-mc"
    dir_b = tmp_path / "b" / "branch-mc"
    names = sorted(p.name for p in dir_a.iterdir() if p.name != "manifest.json")
    assert names == sorted(
        p.name for p in dir_b.iterdir() if p.name != "manifest.json"
    )
    for name in names:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()

    # a different seed must change the summary
    main(["--config", cfg, "--output", str(tmp_path / "c"), "--seed", "7",
          "--quiet"])
    assert (tmp_path / "c" / "branch-mc" / "summary.json").read_bytes() != (
        dir_a / "summary.json"
    ).read_bytes()


def test_quiet_suppresses_stdout(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"experiment": "time-average"})
    rc = main(["--config", cfg, "--output", str(tmp_path / "out"), "--quiet"])
    captured = capsys.readouterr()
    assert rc == 0
    assert captured.out == ""


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"experiment": "propagate", "bogus": 1})
    rc = main(["--config", cfg, "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert rc == 2
    report = json.loads(captured.err)
    assert report["error"]["code"] == "config-invalid"


def test_nested_unknown_key_is_rejected(tmp_path, capsys):
    cfg = _write_config(
        tmp_path, {"experiment": "propagate", "pathsum": {"bogus": 1}}
    )
    rc = main(["--config", cfg, "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert rc == 2
    assert json.loads(captured.err)["error"]["code"] == "config-invalid"


def test_malformed_json_is_rejected(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    rc = main(["--config", str(path), "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert rc == 2
    assert json.loads(captured.err)["error"]["code"] == "config-invalid"


def test_unknown_experiment_is_rejected(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"experiment": "frobnicate"})
    rc = main(["--config", cfg, "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert rc == 2
    assert json.loads(captured.err)["error"]["code"] == "config-invalid"


def test_missing_config_file_is_rejected(tmp_path, capsys):
    rc = main(["--config", str(tmp_path / "nope.json"),
               "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert rc == 2
    assert json.loads(captured.err)["error"]["code"] == "config-invalid"


def test_failed_tolerance_exits_one(tmp_path, capsys):
    # a 100x coarser step ruins the harmonic benchmark but not the run
    cfg = _write_config(
        tmp_path, {"experiment": "propagate", "pathsum": {"dt": 0.1}}
    )
    rc = main(["--config", cfg, "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert rc == 1
    assert "FAIL" in captured.out
    summary = json.loads(
        (tmp_path / "out" / "propagate" / "summary.json").read_text()
    )
    assert not all(c["pass"] for c in summary["checks"])
