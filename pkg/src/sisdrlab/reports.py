"""Batch evaluation of separated estimates against a dataset manifest.

Estimates follow the naming convention ``<record_id>_s<slot>.wav`` (slots are
1-based, matching the s1/s2 output directories). Scores are reported per
estimate slot together with the reference slot the best assignment matched
it to. Improvement is measured against the manifest's mixture — the signal a
separator actually consumed.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import read_wav
from .errors import SchemaVersionError
from .formats import format_db, json_restore, json_safe
from .metrics import pit_evaluate, sdr, si_sdr
from .mixer import load_manifest

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "UtteranceScores",
    "MetricReport",
    "evaluate_manifest",
    "aggregate",
    "report_aggregates",
    "save_report",
    "load_report",
    "load_report_csv",
    "merge_reports",
    "save_merged_csv",
    "load_merged_csv",
]

REPORT_SCHEMA_VERSION = "1"

_REPORT_CSV_COLUMNS = ["id", "slot", "ref_slot", "si_sdr_db", "si_sdri_db", "sdr_db"]
_MERGED_CSV_COLUMNS = ["label", "statistic", "si_sdr_db", "si_sdri_db", "sdr_db"]
_STATISTICS = [
    "mean",
    "median",
    "p05",
    "p95",
    "count_finite",
    "count_pos_inf",
    "count_neg_inf",
]


@dataclass(frozen=True)
class UtteranceScores:
    """Per-record scores, one entry per estimate slot (0-based internally)."""

    id: str
    permutation: tuple[int, ...]
    si_sdr_db: tuple[float, ...]
    si_sdri_db: tuple[float, ...]
    sdr_db: tuple[float, ...]


@dataclass
class MetricReport:
    """Everything the eval step learned, ready for serialization."""

    metric: str
    utterances: list[UtteranceScores]
    missing: list[str] = field(default_factory=list)
    schema_version: str = REPORT_SCHEMA_VERSION


def _score_record(
    record, base: Path, est_dir: Path, metric: str
) -> tuple[str, UtteranceScores | None]:
    refs = [read_wav(base / record.s1_path), read_wav(base / record.s2_path)]
    est_paths = [est_dir / f"{record.id}_s{slot}.wav" for slot in (1, 2)]
    if not all(p.is_file() for p in est_paths):
        return record.id, None
    ests = [read_wav(p) for p in est_paths]
    mixture = read_wav(base / record.mixture_path)
    pit = pit_evaluate(refs, ests, metric)
    si_values = []
    improvements = []
    sdr_values = []
    for i, j in enumerate(pit.permutation):
        est_score = si_sdr(refs[j], ests[i]).db
        mix_score = si_sdr(refs[j], mixture).db
        si_values.append(est_score)
        # IEEE extended arithmetic: inf - finite = inf, inf - inf = nan.
        improvements.append(est_score - mix_score)
        sdr_values.append(sdr(refs[j], ests[i]).db)
    return record.id, UtteranceScores(
        id=record.id,
        permutation=pit.permutation,
        si_sdr_db=tuple(si_values),
        si_sdri_db=tuple(improvements),
        sdr_db=tuple(sdr_values),
    )


def evaluate_manifest(
    manifest_path: str | Path,
    est_dir: str | Path,
    metric: str = "si-sdr",
    jobs: int = 1,
) -> MetricReport:
    """Score every manifest record; records with absent estimates are listed,
    not fatal. Flagged (unbuilt) records are skipped. Output order follows
    the manifest regardless of ``jobs``."""
    manifest_file = Path(manifest_path)
    if manifest_file.is_dir():
        manifest_file = manifest_file / "manifest.json"
    manifest = load_manifest(manifest_file)
    base = manifest_file.parent
    est_path = Path(est_dir)
    records = [r for r in manifest.records if not r.flagged]

    def work(record):
        return _score_record(record, base, est_path, metric)

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            results = list(pool.map(work, records))
    else:
        results = [work(r) for r in records]

    report = MetricReport(metric=metric, utterances=[], missing=[])
    for record_id, scores in results:
        if scores is None:
            report.missing.append(record_id)
        else:
            report.utterances.append(scores)
    return report


def aggregate(values: list[float]) -> dict[str, float | int]:
    """Summary statistics over the finite values, with infinity counts.

    mean/median/p05/p95 cover finite entries only (nan when there are none);
    +inf/-inf occurrences are counted separately so they stay visible.
    """
    finite = [v for v in values if math.isfinite(v)]
    if finite:
        arr = np.asarray(finite, dtype=np.float64)
        stats = {
            "mean": float(np.mean(arr)),
            "median": float(np.median(arr)),
            "p05": float(np.percentile(arr, 5)),
            "p95": float(np.percentile(arr, 95)),
        }
    else:
        stats = {"mean": math.nan, "median": math.nan, "p05": math.nan, "p95": math.nan}
    stats["count_finite"] = len(finite)
    stats["count_pos_inf"] = sum(1 for v in values if v == math.inf)
    stats["count_neg_inf"] = sum(1 for v in values if v == -math.inf)
    return stats


def report_aggregates(report: MetricReport) -> dict[str, dict[str, float | int]]:
    """Aggregate each score column over all (utterance, slot) entries."""
    return {
        "si_sdr_db": aggregate([v for u in report.utterances for v in u.si_sdr_db]),
        "si_sdri_db": aggregate([v for u in report.utterances for v in u.si_sdri_db]),
        "sdr_db": aggregate([v for u in report.utterances for v in u.sdr_db]),
    }


def _utterance_to_json(u: UtteranceScores) -> dict:
    sources = []
    for i, j in enumerate(u.permutation):
        sources.append(
            {
                "slot": i + 1,
                "ref_slot": j + 1,
                "si_sdr_db": json_safe(u.si_sdr_db[i]),
                "si_sdri_db": json_safe(u.si_sdri_db[i]),
                "sdr_db": json_safe(u.sdr_db[i]),
            }
        )
    return {"id": u.id, "sources": sources}


def _utterance_from_json(obj: dict) -> UtteranceScores:
    sources = sorted(obj["sources"], key=lambda s: s["slot"])
    return UtteranceScores(
        id=obj["id"],
        permutation=tuple(s["ref_slot"] - 1 for s in sources),
        si_sdr_db=tuple(json_restore(s["si_sdr_db"]) for s in sources),
        si_sdri_db=tuple(json_restore(s["si_sdri_db"]) for s in sources),
        sdr_db=tuple(json_restore(s["sdr_db"]) for s in sources),
    )


def save_report(report: MetricReport, base_path: str | Path) -> tuple[Path, Path]:
    """Write <base>.json and <base>.csv; returns both paths."""
    base = Path(base_path)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    json_path = base.with_suffix(".json")
    csv_path = base.with_suffix(".csv")
    payload = {
        "schema_version": report.schema_version,
        "metric": report.metric,
        "missing_estimates": list(report.missing),
        "utterances": [_utterance_to_json(u) for u in report.utterances],
        "aggregates": {
            name: {k: json_safe(v) for k, v in stats.items()}
            for name, stats in report_aggregates(report).items()
        },
    }
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", "utf-8")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_REPORT_CSV_COLUMNS)
        for u in report.utterances:
            for i, j in enumerate(u.permutation):
                writer.writerow(
                    [
                        u.id,
                        i + 1,
                        j + 1,
                        format_db(u.si_sdr_db[i]),
                        format_db(u.si_sdri_db[i]),
                        format_db(u.sdr_db[i]),
                    ]
                )
    return json_path, csv_path


def load_report(path: str | Path) -> MetricReport:
    """Load a report from its JSON file."""
    p = Path(path)
    obj = json.loads(p.read_text(encoding="utf-8"))
    version = obj.get("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{p}: report schema {version!r} != supported {REPORT_SCHEMA_VERSION!r}"
        )
    return MetricReport(
        metric=obj["metric"],
        utterances=[_utterance_from_json(u) for u in obj["utterances"]],
        missing=list(obj.get("missing_estimates", [])),
        schema_version=version,
    )


def load_report_csv(path: str | Path) -> list[dict]:
    """Read a per-source report CSV back into typed dicts."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _REPORT_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for raw in reader:
            rows.append(
                {
                    "id": raw["id"],
                    "slot": int(raw["slot"]),
                    "ref_slot": int(raw["ref_slot"]),
                    "si_sdr_db": float(raw["si_sdr_db"]),
                    "si_sdri_db": float(raw["si_sdri_db"]),
                    "sdr_db": float(raw["sdr_db"]),
                }
            )
    return rows


def merge_reports(labeled: list[tuple[str, MetricReport]]) -> list[dict]:
    """Side-by-side statistics rows, recomputed from the per-utterance data.

    One row per (label, statistic): the statistics listed in _STATISTICS,
    each carrying all three score columns.
    """
    rows = []
    for label, report in labeled:
        aggs = report_aggregates(report)
        for stat in _STATISTICS:
            rows.append(
                {
                    "label": label,
                    "statistic": stat,
                    "si_sdr_db": aggs["si_sdr_db"][stat],
                    "si_sdri_db": aggs["si_sdri_db"][stat],
                    "sdr_db": aggs["sdr_db"][stat],
                }
            )
    return rows


def save_merged_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_MERGED_CSV_COLUMNS)
        for row in rows:
            is_count = row["statistic"].startswith("count_")
            render = (lambda v: str(int(v))) if is_count else format_db
            writer.writerow(
                [
                    row["label"],
                    row["statistic"],
                    render(row["si_sdr_db"]),
                    render(row["si_sdri_db"]),
                    render(row["sdr_db"]),
                ]
            )


def load_merged_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _MERGED_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for raw in reader:
            is_count = raw["statistic"].startswith("count_")
            parse = int if is_count else float
            rows.append(
                {
                    "label": raw["label"],
                    "statistic": raw["statistic"],
                    "si_sdr_db": parse(raw["si_sdr_db"]),
                    "si_sdri_db": parse(raw["si_sdri_db"]),
                    "sdr_db": parse(raw["sdr_db"]),
                }
            )
    return rows
