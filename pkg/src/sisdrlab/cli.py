"""Command-line front end.

Subcommands: ``mix`` builds a two-speaker dataset with manifests, ``eval``
scores estimate files against a manifest, ``bound`` tabulates per-pair score
ceilings, ``tradeoff`` writes noise-scaling curves and ``report`` merges
evaluation reports. ``tradeoff`` and ``report`` also render a PNG figure
next to the CSV unless --no-plot is given.

Exit codes: 0 success; 1 configuration or I/O failure; 2 completed with
per-record failures (partial success).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

from . import bounds, mixer, reports
from .audio_io import read_wav
from .errors import SisdrlabError
from .formats import format_db, format_float
from .metrics import si_sdr
from .mixer import MixConfig
from .signals import Signal, generate_test_signal

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2

_BOUND_CSV_COLUMNS = [
    "id",
    "snr_db",
    "rho",
    "ideal_upper_bound_db",
    "direct_si_sdr_db",
    "abs_gap_db",
]
_CURVE_CSV_COLUMNS = ["ref_snr_db", "beta", "output_snr_db", "si_sdr_db"]
# The in-memory gap between the closed form and the direct metric; anything
# above this means the two computations disagree beyond rounding.
_GAP_ALERT_DB = 1e-6


class CliError(SisdrlabError):
    """Configuration problem surfaced to the user (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse would sys.exit(2) on usage errors, but 2 means partial
    # success here; remap to the configuration-failure path instead.
    def error(self, message: str):
        raise CliError(message)


def _parse_range(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise CliError(f"{flag} expects LO:HI, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise CliError(f"{flag}: could not parse {text!r} as numbers") from None
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise CliError(f"{flag}: bounds must be finite, got {text!r}")
    if lo > hi:
        raise CliError(f"{flag}: lower bound exceeds upper bound in {text!r}")
    return lo, hi


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise CliError(f"{flag}: could not parse {text!r}") from None
    if not values:
        raise CliError(f"{flag}: no values in {text!r}")
    if not all(math.isfinite(v) for v in values):
        raise CliError(f"{flag}: values must be finite")
    return values


def _list_wavs(directory: str, flag: str) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"{flag}: {directory} is not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() == ".wav")
    if not files:
        raise CliError(f"{flag}: no .wav files in {directory}")
    return files


def _default_jobs() -> int:
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sisdrlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mix", help="build a two-speaker dataset with manifests")
    p.add_argument("--refs", required=True, help="directory holding source WAV files")
    p.add_argument(
        "--pairs",
        required=True,
        help="text file with one pair of source files per line (relative to --refs)",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--noise", help="directory of ambient noise WAV files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rel-level", default="0:5", metavar="LO:HI",
                   help="relative level range in dB (default 0:5)")
    p.add_argument("--noise-snr", default="-6:3", metavar="LO:HI",
                   help="noise SNR range in dB (default -6:3)")
    p.add_argument("--length-mode", choices=("min", "max"), default="min")
    p.add_argument("--clip-policy", choices=("rescale", "error"), default="rescale")
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("eval", help="score estimates against a manifest")
    p.add_argument("--manifest", required=True, help="manifest.json or its directory")
    p.add_argument("--est", required=True,
                   help="directory of <record_id>_s<slot>.wav estimate files")
    p.add_argument("--metric", choices=("si-sdr", "sdr"), default="si-sdr",
                   help="metric that picks the best assignment")
    p.add_argument("--out", help="report base path (default <est>/report)")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="tabulate per-pair score ceilings")
    p.add_argument("--target", help="directory of clean target WAV files")
    p.add_argument("--noise", help="directory of matching noise WAV files")
    p.add_argument("--manifest", help="analyze a built dataset instead of file pairs")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("tradeoff", help="noise-scaling curves for synthetic references")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--ref-snrs", default="5,10,15,20", metavar="DB,DB,...",
                   help="reference SNRs in dB (default 5,10,15,20)")
    p.add_argument("--betas", default="50:1e-4", metavar="COUNT[:STOP]",
                   help="log-spaced noise scalings from 1 down to STOP "
                        "(default 50:1e-4)")
    p.add_argument("--length", type=int, default=8000, help="samples per signal")
    p.add_argument("--rate", type=int, default=8000, help="sample rate in Hz")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-plot", action="store_true",
                   help="skip the PNG figure next to the CSV")
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("report", help="merge evaluation reports side by side")
    p.add_argument("inputs", nargs="+", help="report JSON files to merge")
    p.add_argument("--labels", help="comma-separated labels, one per input")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--no-plot", action="store_true",
                   help="skip the PNG figure next to the CSV")
    p.set_defaults(func=cmd_report)

    return parser


def _read_pairs_file(pairs_path: str, refs_dir: str) -> list[tuple[str, str]]:
    refs = Path(refs_dir)
    if not refs.is_dir():
        raise CliError(f"--refs: {refs_dir} is not a directory")
    text = Path(pairs_path).read_text(encoding="utf-8")
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = [t for t in line.replace(",", " ").split() if t]
        if len(tokens) != 2:
            raise CliError(
                f"{pairs_path}:{lineno}: expected two files per line, got {raw!r}"
            )
        resolved = tuple(
            str(tok if Path(tok).is_absolute() else refs / tok) for tok in tokens
        )
        pairs.append(resolved)
    if not pairs:
        raise CliError(f"{pairs_path}: no pairs found")
    return pairs


def cmd_mix(args: argparse.Namespace) -> int:
    rel_range = _parse_range(args.rel_level, "--rel-level")
    snr_range = _parse_range(args.noise_snr, "--noise-snr")
    pairs = _read_pairs_file(args.pairs, args.refs)
    noise_files = (
        [str(p) for p in _list_wavs(args.noise, "--noise")] if args.noise else []
    )
    config = MixConfig(
        rel_level_range_db=rel_range,
        noise_snr_range_db=snr_range,
        length_mode=args.length_mode,
        clip_policy=args.clip_policy,
        seed=args.seed,
        sample_rate_hz=args.sample_rate,
    )
    jobs = args.jobs if args.jobs else _default_jobs()
    manifest = mixer.build_dataset(pairs, noise_files, config, args.out, jobs=jobs)
    flagged = [r for r in manifest.records if r.flagged]
    built = len(manifest.records) - len(flagged)
    print(f"built {built} of {len(manifest.records)} records -> {args.out}")
    for record in flagged:
        print(f"flagged {record.id}: {record.error}", file=sys.stderr)
    return EXIT_PARTIAL if flagged else EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    jobs = args.jobs if args.jobs else _default_jobs()
    report = reports.evaluate_manifest(args.manifest, args.est, args.metric, jobs=jobs)
    out_base = args.out if args.out else str(Path(args.est) / "report")
    json_path, csv_path = reports.save_report(report, out_base)
    print(f"evaluated {len(report.utterances)} records -> {json_path}, {csv_path}")
    for record_id in report.missing:
        print(f"missing estimates for record {record_id}", file=sys.stderr)
    return EXIT_PARTIAL if report.missing else EXIT_OK


def _bound_row(row_id: str, target: Signal, noise: Signal) -> tuple[list[str], bool]:
    """One CSV row; returns (row, ok). Degenerate pairs give nan columns."""
    try:
        ref = bounds.NoisyReference(target, noise)
        bound_db = bounds.ideal_upper_bound(ref)
        direct_db = si_sdr(ref.composite(), ref.target).db
        gap = abs(bound_db - direct_db)
        row = [
            row_id,
            format_db(ref.snr_db),
            f"{ref.rho:.6f}",
            format_db(bound_db),
            format_db(direct_db),
            format_db(gap),
        ]
        if not gap < _GAP_ALERT_DB:
            print(
                f"warning: {row_id}: closed form and direct metric disagree by "
                f"{gap:.3e} dB",
                file=sys.stderr,
            )
            return row, False
        return row, True
    except SisdrlabError as exc:
        print(f"skipping {row_id}: {exc}", file=sys.stderr)
        return [row_id, "nan", "nan", "nan", "nan", "nan"], False


def _bound_rows_from_dirs(target_dir: str, noise_dir: str):
    targets = {p.name: p for p in _list_wavs(target_dir, "--target")}
    noises = {p.name: p for p in _list_wavs(noise_dir, "--noise")}
    unpaired = sorted(set(targets) ^ set(noises))
    if unpaired:
        raise CliError(
            "--target and --noise must hold matching filenames; unpaired: "
            + ", ".join(unpaired)
        )
    for name in sorted(targets):
        yield Path(name).stem, read_wav(targets[name]), read_wav(noises[name])


def _bound_rows_from_manifest(manifest_path: str):
    manifest_file = Path(manifest_path)
    if manifest_file.is_dir():
        manifest_file = manifest_file / "manifest.json"
    manifest = mixer.load_manifest(manifest_file)
    base = manifest_file.parent
    for record in manifest.records:
        if record.flagged or record.noise_path is None:
            continue
        noise = read_wav(record.noise_path)
        clipped = Signal(
            noise.samples[: record.length_samples] * record.noise_gain,
            noise.sample_rate_hz,
        )
        for slot, rel in ((1, record.s1_path), (2, record.s2_path)):
            yield f"{record.id}_s{slot}", read_wav(base / rel), clipped


def cmd_bound(args: argparse.Namespace) -> int:
    by_dirs = args.target is not None or args.noise is not None
    if by_dirs and args.manifest:
        raise CliError("use either --target/--noise or --manifest, not both")
    if by_dirs:
        if not (args.target and args.noise):
            raise CliError("--target and --noise must be given together")
        rows_iter = _bound_rows_from_dirs(args.target, args.noise)
    elif args.manifest:
        rows_iter = _bound_rows_from_manifest(args.manifest)
    else:
        raise CliError("one of --target/--noise or --manifest is required")

    failures = 0
    count = 0
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_BOUND_CSV_COLUMNS)
        for row_id, target, noise in rows_iter:
            row, ok = _bound_row(row_id, target, noise)
            writer.writerow(row)
            count += 1
            failures += 0 if ok else 1
    print(f"wrote {count} bound rows -> {out}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _parse_betas(text: str) -> list[float]:
    parts = text.split(":")
    try:
        count = int(parts[0])
        stop = float(parts[1]) if len(parts) > 1 else 1e-4
    except (ValueError, IndexError):
        raise CliError(f"--betas: expected COUNT[:STOP], got {text!r}") from None
    if len(parts) > 2:
        raise CliError(f"--betas: expected COUNT[:STOP], got {text!r}")
    try:
        return bounds.default_betas(count, stop)
    except ValueError as exc:
        raise CliError(f"--betas: {exc}") from None


def cmd_tradeoff(args: argparse.Namespace) -> int:
    ref_snrs = _parse_float_list(args.ref_snrs, "--ref-snrs")
    betas = _parse_betas(args.betas)
    if args.length < 2:
        raise CliError("--length must be at least 2")
    curves = []
    for k, snr in enumerate(ref_snrs):
        # Distinct deterministic streams per curve: even offsets seed the
        # target, odd offsets the raw noise direction.
        target = generate_test_signal("white-noise", args.length, args.rate,
                                      args.seed + 2 * k)
        raw = generate_test_signal("white-noise", args.length, args.rate,
                                   args.seed + 2 * k + 1)
        ref = bounds.construct_reference_with_rho(target, raw, rho=0.0, snr_db=snr)
        curves.append(bounds.tradeoff_curve(ref, betas))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CURVE_CSV_COLUMNS)
        for curve in curves:
            for point in curve.points:
                writer.writerow(
                    [
                        format_db(curve.reference_snr_db),
                        format_float(point.beta),
                        format_db(point.output_snr_db),
                        format_db(point.si_sdr_db),
                    ]
                )
    message = f"wrote {sum(len(c.points) for c in curves)} curve points -> {out}"
    if not args.no_plot:
        from .plotting import save_tradeoff_figure

        figure = save_tradeoff_figure(curves, out.with_suffix(".png"))
        message += f" (figure {figure})"
    print(message)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    if args.labels:
        labels = [tok.strip() for tok in args.labels.split(",")]
        if len(labels) != len(args.inputs):
            raise CliError(
                f"--labels: got {len(labels)} labels for {len(args.inputs)} inputs"
            )
    else:
        labels = [Path(p).stem for p in args.inputs]
    if len(set(labels)) != len(labels):
        raise CliError(f"labels must be unique, got {labels}")
    loaded = [
        (label, reports.load_report(path)) for label, path in zip(labels, args.inputs)
    ]
    rows = reports.merge_reports(loaded)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    reports.save_merged_csv(rows, out)
    message = f"merged {len(loaded)} reports -> {out}"
    if not args.no_plot:
        from .plotting import save_report_figure

        figure = save_report_figure(rows, out.with_suffix(".png"))
        message += f" (figure {figure})"
    print(message)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SisdrlabError, OSError, ValueError) as exc:
        # Malformed inputs must fail with a message, never a traceback.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
