from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List, Tuple

from ..measure import SHOTS_SCHEMA, ShotRecord, format_shot_record, parse_shot_record
from ..models import ResultsDocument, ScanData, ScanPoint

SCAN_SCHEMA = "# leakage-sim/scan/v1"


def _destination(dest: Path) -> Path:
    """Resolve an output file path, creating its folder if needed."""
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    return dest


def results_json(document: ResultsDocument) -> str:
    payload = document.model_dump(mode="json", by_alias=True)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_results(document: ResultsDocument, dest: Path) -> Path:
    dest = _destination(dest)
    dest.write_text(results_json(document), encoding="utf-8")
    return dest


def read_results(source: Path) -> ResultsDocument:
    """
    Load a results document. Raises ValueError if the schema tag is not one this library writes.
    """
    payload = json.loads(Path(source).read_text(encoding="utf-8"))
    document = ResultsDocument.model_validate(payload)
    if document.schema_tag != ResultsDocument().schema_tag:
        raise ValueError(f"{source}: unsupported results schema {document.schema_tag!r}")
    return document


def write_scan(scan: ScanData, dest: Path, scenario: str) -> Path:
    dest = _destination(dest)
    lines = [f"{SCAN_SCHEMA} {scenario} {scan.label}", "phi_rad,n,k"]
    lines.extend(f"{p.phi_rad!r},{p.n!r},{p.k!r}" for p in scan.points)
    dest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return dest


def read_scan(source: Path) -> Tuple[str, ScanData]:
    """Return ``(scenario, scan)``; comment lines other than the schema line are skipped."""
    scenario, label, points = "", "", []
    header_seen = False
    for line in Path(source).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith(SCAN_SCHEMA):
            parts = line[len(SCAN_SCHEMA):].split(maxsplit=1)
            scenario = parts[0] if parts else ""
            label = parts[1] if len(parts) > 1 else ""
            continue
        if line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != "phi_rad,n,k":
                raise ValueError(f"{source}: expected header 'phi_rad,n,k', got {line!r}")
            header_seen = True
            continue
        phi, n, k = (float(v) for v in line.split(","))
        points.append(ScanPoint(phi_rad=phi, n=n, k=k))
    return scenario, ScanData(label=label, points=points)


def write_shot_log(records: Iterable[ShotRecord], dest: Path) -> Path:
    dest = _destination(dest)
    with dest.open("w", encoding="utf-8") as handle:
        handle.write(SHOTS_SCHEMA + "\n")
        for record in records:
            handle.write(format_shot_record(record) + "\n")
    return dest


def read_shot_log(source: Path) -> List[ShotRecord]:
    lines = Path(source).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != SHOTS_SCHEMA:
        raise ValueError(f"{source}: missing shot-record schema line")
    return [parse_shot_record(line) for line in lines[1:] if line.strip() and not line.startswith("#")]
