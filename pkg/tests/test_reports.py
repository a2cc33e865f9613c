import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from sisdrlab.audio_io import read_wav, write_wav
from sisdrlab.errors import SchemaVersionError
from sisdrlab.mixer import MixConfig, build_dataset
from sisdrlab.reports import (
    aggregate,
    evaluate_manifest,
    load_merged_csv,
    load_report,
    load_report_csv,
    merge_reports,
    report_aggregates,
    save_merged_csv,
    save_report,
)
from sisdrlab.signals import Signal

from test_mixer import write_corpus


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    """One small dataset shared by the evaluation tests."""
    root = tmp_path_factory.mktemp("corpus")
    pairs, noise_files = write_corpus(root, n_pairs=3)
    out = root / "data"
    manifest = build_dataset(pairs, noise_files, MixConfig(seed=21), out)
    return out, manifest


def copy_references_as_estimates(data_dir: Path, manifest, est_dir: Path):
    est_dir.mkdir(parents=True, exist_ok=True)
    for record in manifest.records:
        shutil.copyfile(data_dir / record.s1_path, est_dir / f"{record.id}_s1.wav")
        shutil.copyfile(data_dir / record.s2_path, est_dir / f"{record.id}_s2.wav")


def copy_mixture_as_estimates(data_dir: Path, manifest, est_dir: Path):
    est_dir.mkdir(parents=True, exist_ok=True)
    for record in manifest.records:
        for slot in (1, 2):
            shutil.copyfile(
                data_dir / record.mixture_path, est_dir / f"{record.id}_s{slot}.wav"
            )


class TestAggregate:
    def test_known_values(self):
        stats = aggregate([0.0, 10.0, math.inf])
        assert stats["mean"] == 5.0
        assert stats["median"] == 5.0
        assert stats["p05"] == pytest.approx(0.5)
        assert stats["p95"] == pytest.approx(9.5)
        assert stats["count_finite"] == 2
        assert stats["count_pos_inf"] == 1
        assert stats["count_neg_inf"] == 0

    def test_counts_all_classes(self):
        stats = aggregate([1.0, -math.inf, math.inf, -math.inf])
        assert stats["count_finite"] == 1
        assert stats["count_pos_inf"] == 1
        assert stats["count_neg_inf"] == 2
        assert stats["mean"] == 1.0

    def test_no_finite_values(self):
        stats = aggregate([math.inf, math.inf])
        assert math.isnan(stats["mean"])
        assert math.isnan(stats["p95"])
        assert stats["count_finite"] == 0
        assert stats["count_pos_inf"] == 2

    def test_empty(self):
        stats = aggregate([])
        assert math.isnan(stats["mean"])
        assert stats["count_finite"] == 0

    def test_matches_numpy_on_random_data(self, rng):
        values = list(rng.normal(5.0, 3.0, size=200))
        stats = aggregate(values)
        assert stats["mean"] == pytest.approx(float(np.mean(values)), rel=1e-12)
        assert stats["median"] == pytest.approx(float(np.median(values)), rel=1e-12)
        assert stats["p05"] == pytest.approx(float(np.percentile(values, 5)), rel=1e-12)
        assert stats["p95"] == pytest.approx(float(np.percentile(values, 95)), rel=1e-12)


class TestEvaluateManifest:
    def test_perfect_estimates_hit_plus_inf(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_references_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        assert len(report.utterances) == 3
        assert not report.missing
        for scored in report.utterances:
            assert scored.permutation == (0, 1)
            assert scored.si_sdr_db == (math.inf, math.inf)
        stats = report_aggregates(report)
        assert stats["si_sdr_db"]["count_pos_inf"] == 6
        assert stats["si_sdr_db"]["count_finite"] == 0

    def test_mixture_estimates_zero_improvement(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        for scored in report.utterances:
            assert all(math.isfinite(v) for v in scored.si_sdr_db)
            assert scored.si_sdri_db == (0.0, 0.0)
        stats = report_aggregates(report)
        assert stats["si_sdri_db"]["mean"] == 0.0
        assert stats["si_sdri_db"]["count_finite"] == 6

    def test_permutation_recovers_swapped_estimates(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        est_dir.mkdir()
        for record in manifest.records:
            shutil.copyfile(data_dir / record.s2_path, est_dir / f"{record.id}_s1.wav")
            shutil.copyfile(data_dir / record.s1_path, est_dir / f"{record.id}_s2.wav")
        report = evaluate_manifest(data_dir, est_dir)
        for scored in report.utterances:
            assert scored.permutation == (1, 0)
            assert scored.si_sdr_db == (math.inf, math.inf)

    def test_missing_estimates_are_reported(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_references_as_estimates(data_dir, manifest, est_dir)
        dropped = manifest.records[1].id
        (est_dir / f"{dropped}_s1.wav").unlink()
        report = evaluate_manifest(data_dir, est_dir)
        assert report.missing == [dropped]
        assert [u.id for u in report.utterances] == [
            r.id for r in manifest.records if r.id != dropped
        ]

    def test_sdr_metric_differs_from_si_sdr(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        est_dir.mkdir()
        # Scaled copies: scale-invariant scoring still sits near the ceiling,
        # the plain ratio does not.
        for record in manifest.records:
            for slot, path in ((1, record.s1_path), (2, record.s2_path)):
                ref = read_wav(data_dir / path)
                write_wav(
                    est_dir / f"{record.id}_s{slot}.wav",
                    Signal(ref.samples * 0.5, ref.sample_rate_hz),
                )
        report = evaluate_manifest(data_dir, est_dir, metric="si-sdr")
        for scored in report.utterances:
            for si_value, sdr_value in zip(scored.si_sdr_db, scored.sdr_db):
                assert si_value > 40.0  # near-perfect after quantization
                assert sdr_value < 10.0  # halving wrecks the raw ratio

    def test_jobs_do_not_change_results(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        seq = evaluate_manifest(data_dir, est_dir, jobs=1)
        par = evaluate_manifest(data_dir, est_dir, jobs=4)
        assert seq.utterances == par.utterances

    def test_manifest_file_path_accepted(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        by_dir = evaluate_manifest(data_dir, est_dir)
        by_file = evaluate_manifest(data_dir / "manifest.json", est_dir)
        assert by_dir.utterances == by_file.utterances

    def test_unknown_metric_rejected(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_references_as_estimates(data_dir, manifest, est_dir)
        with pytest.raises(ValueError):
            evaluate_manifest(data_dir, est_dir, metric="pesq")


class TestReportRoundTrip:
    def test_json_and_csv_round_trip(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        base = tmp_path / "report"
        json_path, csv_path = save_report(report, base)
        assert json_path == base.with_suffix(".json")
        assert csv_path == base.with_suffix(".csv")
        loaded = load_report(json_path)
        assert loaded.utterances == report.utterances
        assert loaded.metric == report.metric
        assert loaded.missing == report.missing
        rows = load_report_csv(csv_path)
        assert len(rows) == 6
        flat = [
            (u.id, i + 1, u.si_sdr_db[i])
            for u in report.utterances
            for i in range(2)
        ]
        for row, (uid, slot, value) in zip(rows, flat):
            assert row["id"] == uid
            assert row["slot"] == slot
            assert row["si_sdr_db"] == pytest.approx(value, abs=1e-6)

    def test_suffix_on_base_path_is_stripped(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        json_path, csv_path = save_report(report, tmp_path / "report.csv")
        assert json_path.name == "report.json"
        assert csv_path.name == "report.csv"

    def test_infinities_survive_round_trip(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_references_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        json_path, csv_path = save_report(report, tmp_path / "perfect")
        assert '"+inf"' in json_path.read_text()
        loaded = load_report(json_path)
        assert loaded.utterances[0].si_sdr_db[0] == math.inf
        rows = load_report_csv(csv_path)
        assert rows[0]["si_sdr_db"] == math.inf

    def test_save_is_deterministic(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        p1, c1 = save_report(report, tmp_path / "one")
        p2, c2 = save_report(report, tmp_path / "two")
        assert p1.read_bytes() == p2.read_bytes()
        assert c1.read_bytes() == c2.read_bytes()

    def test_schema_version_mismatch_rejected(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        json_path, _ = save_report(report, tmp_path / "report")
        blob = json.loads(json_path.read_text())
        blob["schema_version"] = "99"
        json_path.write_text(json.dumps(blob))
        with pytest.raises(SchemaVersionError):
            load_report(json_path)


class TestMergeReports:
    def test_merge_two_systems(self, built, tmp_path):
        data_dir, manifest = built
        perfect_dir = tmp_path / "perfect"
        passthrough_dir = tmp_path / "passthrough"
        copy_references_as_estimates(data_dir, manifest, perfect_dir)
        copy_mixture_as_estimates(data_dir, manifest, passthrough_dir)
        perfect = evaluate_manifest(data_dir, perfect_dir)
        passthrough = evaluate_manifest(data_dir, passthrough_dir)
        rows = merge_reports([("oracle", perfect), ("identity", passthrough)])
        assert len(rows) == 14  # 2 labels x 7 statistics
        assert [r["label"] for r in rows[:7]] == ["oracle"] * 7
        by_key = {(r["label"], r["statistic"]): r for r in rows}
        assert by_key[("oracle", "count_pos_inf")]["si_sdr_db"] == 6
        assert by_key[("identity", "count_finite")]["si_sdr_db"] == 6
        assert by_key[("identity", "mean")]["si_sdri_db"] == 0.0

    def test_merged_csv_round_trip(self, built, tmp_path):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_mixture_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        rows = merge_reports([("identity", report)])
        path = tmp_path / "merged.csv"
        save_merged_csv(rows, path)
        loaded = load_merged_csv(path)
        assert len(loaded) == 7
        for got, want in zip(loaded, rows):
            assert got["label"] == want["label"]
            assert got["statistic"] == want["statistic"]
            if want["statistic"].startswith("count_"):
                assert got["si_sdr_db"] == want["si_sdr_db"]
                assert isinstance(got["si_sdr_db"], int)
            elif math.isnan(want["si_sdr_db"]):
                assert math.isnan(got["si_sdr_db"])
            else:
                assert got["si_sdr_db"] == pytest.approx(want["si_sdr_db"], abs=1e-6)

    def test_merged_csv_preserves_infinity_counts_with_nan_stats(
        self, built, tmp_path
    ):
        data_dir, manifest = built
        est_dir = tmp_path / "est"
        copy_references_as_estimates(data_dir, manifest, est_dir)
        report = evaluate_manifest(data_dir, est_dir)
        rows = merge_reports([("oracle", report)])
        path = tmp_path / "merged.csv"
        save_merged_csv(rows, path)
        loaded = load_merged_csv(path)
        by_stat = {r["statistic"]: r for r in loaded}
        assert math.isnan(by_stat["mean"]["si_sdr_db"])
        assert by_stat["count_pos_inf"]["si_sdr_db"] == 6

    def test_merged_csv_header_check(self, tmp_path):
        path = tmp_path / "bogus.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            load_merged_csv(path)
