from __future__ import annotations

import argparse

import pytest

from ..main import cli
from ..utils.cli import count, key_value, seed_value
from ..utils.io import read_results, read_scan


def test_key_value_parses_numbers():
    assert key_value("f2q=0.95") == ("f2q", 0.95)
    assert key_value("tau_vac=inf") == ("tau_vac", float("inf"))
    assert key_value(" seed = 4") == ("seed", 4)


@pytest.mark.parametrize("value", ["f2q", "=1", "f2q="])
def test_key_value_rejects_malformed_pairs(value):
    with pytest.raises(argparse.ArgumentTypeError):
        key_value(value)


def test_count_accepts_positive_whole_numbers():
    assert count("3") == 3


@pytest.mark.parametrize("value", ["0", "-2", "x", "1.5"])
def test_count_rejects_other_values(value):
    with pytest.raises(argparse.ArgumentTypeError):
        count(value)


def test_seed_accepts_decimal_and_hex():
    assert seed_value("42") == 42
    assert seed_value("0x10") == 16
    assert seed_value(str(2 ** 64 - 1)) == 2 ** 64 - 1


@pytest.mark.parametrize("value", ["-1", str(2 ** 64), "seed"])
def test_seed_rejects_values_outside_64_bits(value):
    with pytest.raises(argparse.ArgumentTypeError):
        seed_value(value)


def test_list_prints_every_scenario(capsys):
    assert cli(["list"]) == 0
    out = capsys.readouterr().out
    assert "loss_truth_table" in out
    assert "teleport" in out


def test_run_writes_a_results_document(tmp_path, capsys):
    dest = tmp_path / "results.json"

    code = cli(["--quiet", "run", "loss_truth_table", "--engine", "dm", "--shots", "500", "--out", str(dest)])

    assert code == 0
    assert "present_accuracy" in capsys.readouterr().out
    assert read_results(dest).scenario("loss_truth_table").engine == "density"


def test_noise_override_reaches_the_model(tmp_path):
    dest = tmp_path / "results.json"
    code = cli(["--quiet", "run", "loss_truth_table", "--engine", "dm", "--set", "f2q=0.5", "--out", str(dest)])

    assert code == 0
    assert read_results(dest).config["noise"]["f2q"] == 0.5


def test_bad_flags_exit_with_usage_error():
    assert cli(["run", "loss_truth_table", "--shots", "0"]) == 2
    assert cli(["run", "loss_truth_table", "--engine", "gpu"]) == 2
    assert cli([]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "tomography", "--shots", "10"],
        ["run", "loss_truth_table", "--set", "f2q=2"],
        ["run", "loss_truth_table", "--set", "cosmic_rays=1"],
    ],
)
def test_runtime_errors_exit_with_one(argv, capsys):
    assert cli(["--quiet", *argv]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_emit_scan_writes_one_csv_per_series(tmp_path, capsys):
    out_dir = tmp_path / "scans"

    code = cli(["--quiet", "emit-scan", "ramsey", "--engine", "dm", "--shots", "400", "--out-dir", str(out_dir)])

    assert code == 0
    written = sorted(path.name for path in out_dir.iterdir())
    assert written == ["ramsey_with_ldu.csv", "ramsey_without_ldu.csv"]
    scenario, scan = read_scan(out_dir / "ramsey_with_ldu.csv")
    assert scenario == "ramsey"
    assert len(scan.points) == 16


def test_emit_scan_without_scans_fails(tmp_path):
    code = cli(["--quiet", "emit-scan", "loss_truth_table", "--engine", "dm", "--out-dir", str(tmp_path)])
    assert code == 1
