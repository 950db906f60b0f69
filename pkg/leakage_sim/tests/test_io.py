from __future__ import annotations

import json

import pytest

from ..measure import SHOTS_SCHEMA, Outcome, ShotRecord
from ..models import ResultsDocument, ScanData, ScanPoint, ScenarioResult
from ..utils.io import read_results, read_scan, read_shot_log, write_results, write_scan, write_shot_log


def test_results_document_is_written_with_its_schema_tag(tmp_path):
    document = ResultsDocument(seed=3, scenarios=[ScenarioResult(name="ramsey", engine="density", shots=10)])
    path = write_results(document, tmp_path / "nested" / "results.json")

    payload = json.loads(path.read_text(encoding="utf-8"))
    assert payload["schema"] == "leakage-sim/results/v1"
    assert read_results(path).scenario("ramsey", engine="density").shots == 10


def test_foreign_results_schema_is_rejected(tmp_path):
    path = tmp_path / "results.json"
    path.write_text(json.dumps({"schema": "someone-else/v9"}), encoding="utf-8")
    with pytest.raises(ValueError):
        read_results(path)


def test_scan_file_keeps_exact_counts(tmp_path):
    scan = ScanData(label="with_ldu", points=[ScanPoint(phi_rad=0.1, n=812.25, k=401.5), ScanPoint(phi_rad=0.7, n=800, k=12)])
    path = write_scan(scan, tmp_path / "scan.csv", "ramsey")

    scenario, loaded = read_scan(path)

    assert scenario == "ramsey"
    assert loaded == scan


def test_scan_file_needs_its_column_header(tmp_path):
    path = tmp_path / "scan.csv"
    path.write_text("# leakage-sim/scan/v1 ramsey x\nphi,n,k\n0.0,1,1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_scan(path)


def test_shot_log_round_trips_records(tmp_path):
    records = [
        ShotRecord(shot=0, outcomes=(Outcome.ZERO, Outcome.ONE), retained=(True, True), seed_path=(1, 0, 0), label="present"),
        ShotRecord(shot=1, outcomes=(Outcome.NEITHER, Outcome.ONE), retained=(False, False), seed_path=(1, 0, 1), label="present"),
    ]
    path = write_shot_log(records, tmp_path / "shots.tsv")

    assert path.read_text(encoding="utf-8").splitlines()[0] == SHOTS_SCHEMA
    assert read_shot_log(path) == records


def test_shot_log_without_schema_is_rejected(tmp_path):
    path = tmp_path / "shots.tsv"
    path.write_text("0\t01\t11\t--\tpresent\t1.0.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_shot_log(path)
