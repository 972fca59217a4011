import json
import shutil
import subprocess
import sys

import pytest

from restproj.cli import ConfigError, ExperimentConfig, input_hash, main, run
from restproj.io import read_gridset_binary, read_gridset_text, read_profile

SMALL = {
    "gen-set": ["--M", "4", "--N", "8", "--depth", "3", "--seed", "7"],
    "gen-family": ["--family-depth", "3"],
    "tube-profile": ["--depth", "3", "--widths", "0.25", "0.125", "0.0625",
                     "--num-random-tubes", "50"],
    "smallness": ["--family-depth", "3"],
    "worst-case": ["--family-depth", "3", "--xi-grid-size", "100"],
    "project": ["--d", "3", "--set-kind", "cantor", "--M", "4", "--pattern", "0", "3",
                "--depth", "4", "--deltas", "0.125", "0.0625", "0.03125"],
    "mmp-run": ["--d", "3", "--set-kind", "cantor", "--M", "4", "--pattern", "0", "3",
                "--depth", "4", "--mode", "measure", "--num-dirs", "20",
                "--family-depth", "3", "--deltas", "0.125", "0.0625", "0.03125", "0.015625"],
}


def data_hashes(out):
    report = json.loads((out / "run_report.json").read_text())
    return {m["path"]: m["sha256"] for m in report["manifest"]}


def test_gen_set_writes_cardinality(tmp_path):
    assert main(["gen-set", *SMALL["gen-set"][:-2], "--depth", "4", "--seed", "7",
                 "--output-dir", str(tmp_path)]) == 0
    E = read_gridset_text(tmp_path / "gridset.txt")
    assert len(E) == 4096
    assert read_gridset_binary(tmp_path / "gridset.bin") == E
    report = json.loads((tmp_path / "run_report.json").read_text())
    assert {m["path"] for m in report["manifest"]} == {"gridset.txt", "gridset.bin"}
    assert report["exit_code"] == 0 and "generate" in report["timings"]


@pytest.mark.parametrize("kind", sorted(SMALL))
def test_reruns_are_byte_identical(tmp_path, kind):
    hashes = []
    for i, workers in enumerate(["1", "1", "8"]):
        out = tmp_path / f"run{i}"
        code = main([kind, *SMALL[kind], "--workers", workers, "--output-dir", str(out)])
        assert code in (0, 1)
        hashes.append(data_hashes(out))
    assert hashes[0] and hashes[0] == hashes[1] == hashes[2]


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "tube-profile", "depth": 3,
                               "widths": [0.25, 0.125, 0.0625]}))
    assert main(["tube-profile", "--config", str(cfg), "--seed", "3",
                 "--output-dir", str(tmp_path / "o"), "--plots"]) == 0
    report = json.loads((tmp_path / "o" / "run_report.json").read_text())
    assert report["config"]["seed"] == 3 and report["config"]["depth"] == 3
    assert (tmp_path / "o" / "tube_profile.svg").exists()
    prof = read_profile(tmp_path / "o" / "tube_profile.csv")
    assert len(prof.scales) == 3


@pytest.mark.parametrize("argv,field", [
    (["gen-set", "--N", "17"], "N"),
    (["gen-set", "--depth", "0"], "depth"),
    (["tube-profile", "--widths", "0.5", "2.0"], "widths"),
    (["smallness", "--rhos", "0.1", "0.2"], "rhos"),
    (["mmp-run", "--mode", "volume"], "mode"),
    (["worst-case", "--xi-grid-size", "10"], "xi_grid_size"),
])
def test_validation_errors_exit_2_and_name_field(tmp_path, capsys, argv, field):
    assert main([*argv, "--output-dir", str(tmp_path)]) == 2
    assert field in capsys.readouterr().err
    assert not (tmp_path / "run_report.json").exists()


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "gen-set", "colour": "red"}))
    assert main(["gen-set", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "gen-set", "depht": 3})


def test_mismatched_config_kind_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "smallness"}))
    assert main(["gen-set", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 2


def test_malformed_set_file_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("gridset d=2 M=2 depth=1 count=1\n0 x\n")
    assert main(["tube-profile", "--set-file", str(bad), "--output-dir", str(tmp_path)]) == 2
    assert "bad.txt:2:" in capsys.readouterr().err


def test_resource_failure_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["gen-set", "--depth", "2", "--output-dir", str(blocker / "sub")]) == 3


def test_calibrate_table(tmp_path):
    code = main(["calibrate", "--output-dir", str(tmp_path)])
    rows = json.loads((tmp_path / "calibration.json").read_text())
    names = [r["check"] for r in rows]
    assert names[:2] == ["box_dim_full_square", "box_dim_ternary_cantor"]
    assert rows[0]["value"] == pytest.approx(2.0, abs=0.05)
    assert rows[1]["value"] == pytest.approx(0.6309, abs=0.05)
    assert code == (0 if all(r["passed"] for r in rows) else 1)


def test_mmp_exit_code_follows_threshold(tmp_path):
    argv = ["mmp-run", "--d", "3", "--set-kind", "segment", "--axis", "2", "--M", "2",
            "--depth", "6", "--family-kind", "great-circle", "--family-normal", "0", "0", "1",
            "--num-dirs", "50", "--scales", "0.25", "0.125", "0.0625"]
    assert main([*argv, "--output-dir", str(tmp_path / "a")]) == 1
    report = json.loads((tmp_path / "a" / "mmp_report.json").read_text())
    assert report["pass_fraction"] == 0.0


def test_input_hash_ignores_run_placement():
    a = ExperimentConfig(kind="gen-set", workers=1, output_dir="x")
    b = ExperimentConfig(kind="gen-set", workers=8, output_dir="y", plots=True)
    c = ExperimentConfig(kind="gen-set", seed=1)
    assert input_hash(a) == input_hash(b) != input_hash(c)


def test_run_api_returns_report(tmp_path):
    rep = run(ExperimentConfig(kind="gen-family", family_kind="uniform", family_size=50,
                               output_dir=str(tmp_path)))
    assert rep.exit_code == 0
    assert [m["path"] for m in rep.manifest] == ["family.csv"]


def test_emit_plots_subcommand(tmp_path, capsys):
    csv = tmp_path / "p.csv"
    csv.write_text("scale,value\n1,1\n0.5,0.5\n0.25,0.25\n")
    assert main(["emit-plots", str(csv), "--output-dir", str(tmp_path / "figs")]) == 0
    assert (tmp_path / "figs" / "p.svg").exists()
    empty = tmp_path / "e.csv"
    empty.write_text("scale,value\n")
    assert main(["emit-plots", str(empty)]) == 2
    assert "empty profile" in capsys.readouterr().err
    assert main(["emit-plots", str(tmp_path / "missing.csv")]) == 2


@pytest.mark.skipif(shutil.which("restproj") is None, reason="console script not installed")
def test_console_script_uses_env_output_dir(tmp_path):
    env_dir = tmp_path / "from-env"
    proc = subprocess.run(["restproj", "gen-set", "--depth", "2"], cwd=tmp_path,
                          env={"RESTPROJ_OUTPUT_DIR": str(env_dir), "PATH": _path()},
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (env_dir / "gridset.txt").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "restproj.cli", "gen-set", "--depth", "2",
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def _path():
    import os
    return os.environ.get("PATH", "")
