"""Deterministic two-speaker mixture building with optional ambient noise.

Every random draw derives from (seed, record_index), so a build is a pure
function of its inputs: the same files, config and seed give a byte-identical
output tree and manifests, independent of worker count or build order.

Output tree:
    out_dir/mix/<id>.wav        two-source mixture
    out_dir/s1/<id>.wav         first source, gain applied
    out_dir/s2/<id>.wav         second source, gain applied
    out_dir/noise-mix/<id>.wav  mixture plus scaled noise (only with noise)
    out_dir/manifest.json       full provenance
    out_dir/manifest.csv        flat analysis view
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import signals
from .audio_io import WavSpec, read_wav, write_wav
from .errors import (
    ClippingError,
    SchemaVersionError,
    SignalMismatchError,
    ZeroEnergyError,
)
from .formats import format_db, format_float, json_restore, json_safe
from .signals import Signal

__all__ = [
    "MANIFEST_SCHEMA_VERSION",
    "MixConfig",
    "MixRecord",
    "Manifest",
    "mix_pair",
    "add_noise",
    "build_dataset",
    "save_manifest",
    "load_manifest",
    "load_manifest_csv",
]

MANIFEST_SCHEMA_VERSION = "1"

_MASK64 = 0xFFFFFFFFFFFFFFFF
_CLIP_HEADROOM_PEAK = 0.9

_CSV_COLUMNS = [
    "id",
    "mixture_path",
    "s1_path",
    "s2_path",
    "gain1",
    "gain2",
    "rel_level_db",
    "noise_path",
    "noise_gain",
    "noise_snr_db",
    "length_samples",
]


@dataclass(frozen=True)
class MixConfig:
    """Build-wide knobs; every field participates in the manifest."""

    rel_level_range_db: tuple[float, float] = (0.0, 5.0)
    noise_snr_range_db: tuple[float, float] = (-6.0, 3.0)
    length_mode: str = "min"
    clip_policy: str = "rescale"
    seed: int = 0
    sample_rate_hz: int = 8000

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "rel_level_range_db", _validated_range(self.rel_level_range_db)
        )
        object.__setattr__(
            self, "noise_snr_range_db", _validated_range(self.noise_snr_range_db)
        )
        if self.length_mode not in ("min", "max"):
            raise ValueError(f"length_mode must be 'min' or 'max', got {self.length_mode!r}")
        if self.clip_policy not in ("rescale", "error"):
            raise ValueError(
                f"clip_policy must be 'rescale' or 'error', got {self.clip_policy!r}"
            )
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))


def _validated_range(bounds: tuple[float, float]) -> tuple[float, float]:
    lo, hi = (float(bounds[0]), float(bounds[1]))
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError(f"range bounds must be finite, got {bounds}")
    if lo > hi:
        raise ValueError(f"range lower bound exceeds upper bound: {bounds}")
    return (lo, hi)


@dataclass
class MixRecord:
    """Provenance for one mixture. Flagged records built no files."""

    id: str
    mixture_path: str | None
    s1_path: str | None
    s2_path: str | None
    gain1: float | None
    gain2: float | None
    rel_level_db: float | None
    noise_path: str | None
    noise_gain: float | None
    noise_snr_db: float | None
    length_samples: int
    rng_draws: dict[str, float]
    flagged: bool = False
    error: str | None = None


@dataclass
class Manifest:
    config: MixConfig
    records: list[MixRecord]
    schema_version: str = MANIFEST_SCHEMA_VERSION


def _aligned(s1: Signal, s2: Signal, length_mode: str) -> tuple[Signal, Signal]:
    """Equalize lengths: 'min' truncates, 'max' zero-pads at the end."""
    if s1.sample_rate_hz != s2.sample_rate_hz:
        raise SignalMismatchError(
            f"sample rate mismatch: {s1.sample_rate_hz} vs {s2.sample_rate_hz}"
        )
    if length_mode not in ("min", "max"):
        raise ValueError(f"length_mode must be 'min' or 'max', got {length_mode!r}")
    n1, n2 = len(s1), len(s2)
    if n1 == n2:
        return s1, s2
    if length_mode == "min":
        n = min(n1, n2)
        return (
            Signal(s1.samples[:n], s1.sample_rate_hz),
            Signal(s2.samples[:n], s2.sample_rate_hz),
        )
    n = max(n1, n2)
    pad1 = np.concatenate([s1.samples, np.zeros(n - n1)])
    pad2 = np.concatenate([s2.samples, np.zeros(n - n2)])
    return Signal(pad1, s1.sample_rate_hz), Signal(pad2, s2.sample_rate_hz)


def mix_pair(
    s1: Signal,
    s2: Signal,
    rel_level_db: float,
    length_mode: str = "min",
    clip_policy: str = "rescale",
) -> tuple[Signal, Signal, Signal]:
    """Mix two sources at a prescribed level difference.

    The first source keeps unit gain; the second is scaled so the
    first-to-second energy ratio is ``rel_level_db``. If the mixture would
    leave [-1, 1], policy 'rescale' scales both gains so the mixture peak is
    0.9; 'error' raises ClippingError. Returns (mixture, scaled1, scaled2)
    with mixture exactly the sample-wise sum of the other two.
    """
    if clip_policy not in ("rescale", "error"):
        raise ValueError(f"clip_policy must be 'rescale' or 'error', got {clip_policy!r}")
    rel_level_db = float(rel_level_db)
    if not math.isfinite(rel_level_db):
        raise ValueError(f"rel_level_db must be finite, got {rel_level_db}")
    a1, a2 = _aligned(s1, s2, length_mode)
    g1 = 1.0
    g2 = signals.gain_for_target_snr(a1, a2, rel_level_db)
    c1 = a1.samples * g1
    c2 = a2.samples * g2
    mix = c1 + c2
    peak = float(np.max(np.abs(mix)))
    if peak > 1.0:
        if clip_policy == "error":
            raise ClippingError(f"mixture peak {peak:.6g} exceeds 1.0")
        factor = _CLIP_HEADROOM_PEAK / peak
        g1 *= factor
        g2 *= factor
        c1 = a1.samples * g1
        c2 = a2.samples * g2
        mix = c1 + c2
    rate = s1.sample_rate_hz
    return Signal(mix, rate), Signal(c1, rate), Signal(c2, rate)


def add_noise(
    scaled_sources: list[Signal], noise: Signal, noise_snr_db: float
) -> tuple[Signal, Signal]:
    """Scale ambient noise against the loudest source and add it to the sum.

    The gain makes the energy ratio between the highest-energy source (ties:
    first index) and the noise equal ``noise_snr_db``. Returns
    (noisy_mixture, scaled_noise).
    """
    if not scaled_sources:
        raise ValueError("scaled_sources must be non-empty")
    for s in scaled_sources:
        signals.ensure_compatible(s, noise)
    energies = [signals.energy(s) for s in scaled_sources]
    loudest = int(np.argmax(energies))  # argmax takes the first maximum on ties
    if energies[loudest] == 0.0:
        raise ZeroEnergyError("all sources have zero energy")
    gain = signals.gain_for_target_snr(scaled_sources[loudest], noise, noise_snr_db)
    scaled_noise = signals.scale(noise, gain)
    total = scaled_sources[0].samples.copy()
    for s in scaled_sources[1:]:
        total = total + s.samples
    total = total + scaled_noise.samples
    return Signal(total, noise.sample_rate_hz), scaled_noise


def _record_rng(seed: int, record_index: int) -> np.random.Generator:
    # SeedSequence entropy must be non-negative, hence the 64-bit mask.
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & _MASK64, int(record_index)])
    )


def _read_checked(path: str | Path, expected_rate: int) -> Signal:
    s = read_wav(path)
    if s.sample_rate_hz != expected_rate:
        raise SignalMismatchError(
            f"{path}: sample rate {s.sample_rate_hz} != configured {expected_rate}"
        )
    return s


def _build_one(
    index: int,
    pair: tuple[str, str],
    noise_files: list[str],
    config: MixConfig,
    out_dir: Path,
) -> MixRecord:
    path1, path2 = pair
    record_id = f"{index:05d}_{Path(path1).stem}_{Path(path2).stem}"
    rng = _record_rng(config.seed, index)
    # Draw order is fixed (level first, then noise SNR) and documented:
    # changing it would silently re-randomize existing datasets.
    rel_level = float(rng.uniform(*config.rel_level_range_db))
    draws = {"rel_level_db": rel_level}

    s1 = _read_checked(path1, config.sample_rate_hz)
    s2 = _read_checked(path2, config.sample_rate_hz)
    a1, a2 = _aligned(s1, s2, config.length_mode)
    e1 = signals.energy(a1)
    e2 = signals.energy(a2)
    if e1 == 0.0 or e2 == 0.0:
        raise ZeroEnergyError(
            f"record {record_id}: a source is silent after length alignment"
        )
    length = len(a1)
    g1 = 1.0
    g2 = signals.gain_for_target_snr(a1, a2, rel_level)

    noise_file: str | None = None
    noise_snr: float | None = None
    gn: float | None = None
    noise_tail: np.ndarray | None = None
    if noise_files:
        noise_file = noise_files[index % len(noise_files)]
        noise_snr = float(rng.uniform(*config.noise_snr_range_db))
        draws["noise_snr_db"] = noise_snr
        noise_sig = _read_checked(noise_file, config.sample_rate_hz)
        if len(noise_sig) < length:
            raise SignalMismatchError(
                f"record {record_id}: noise file {noise_file} is shorter than the "
                f"mixture ({len(noise_sig)} < {length} samples)"
            )
        noise_tail = noise_sig.samples[:length]
        noise_energy = float(noise_tail @ noise_tail)
        if noise_energy == 0.0:
            raise ZeroEnergyError(
                f"record {record_id}: noise file {noise_file} is silent over the "
                "mixture span"
            )
        louder_energy = max(g1 * g1 * e1, g2 * g2 * e2)  # max picks s1 on ties
        gn = math.sqrt(louder_energy / noise_energy) * 10.0 ** (-noise_snr / 20.0)

    def render(f: float):
        c1 = a1.samples * (g1 * f)
        c2 = a2.samples * (g2 * f)
        pair_mix = c1 + c2
        if noise_tail is None:
            return c1, c2, pair_mix, None, None
        cn = noise_tail * (gn * f)
        return c1, c2, pair_mix, cn, pair_mix + cn

    c1, c2, pair_mix, cn, full_mix = render(1.0)
    written = [c1, c2, pair_mix] + ([cn, full_mix] if cn is not None else [])
    peak = max(float(np.max(np.abs(w))) for w in written)
    factor = 1.0
    if peak > 1.0:
        if config.clip_policy == "error":
            return MixRecord(
                id=record_id,
                mixture_path=None,
                s1_path=None,
                s2_path=None,
                gain1=None,
                gain2=None,
                rel_level_db=rel_level,
                noise_path=noise_file,
                noise_gain=None,
                noise_snr_db=noise_snr,
                length_samples=length,
                rng_draws=draws,
                flagged=True,
                error=f"clipping: peak {peak:.6g} exceeds 1.0",
            )
        factor = _CLIP_HEADROOM_PEAK / peak
        c1, c2, pair_mix, cn, full_mix = render(factor)

    rate = config.sample_rate_hz
    spec = WavSpec(rate)
    rel_paths = {
        "s1": f"s1/{record_id}.wav",
        "s2": f"s2/{record_id}.wav",
        "mix": f"mix/{record_id}.wav",
    }
    write_wav(out_dir / rel_paths["s1"], Signal(c1, rate), spec)
    write_wav(out_dir / rel_paths["s2"], Signal(c2, rate), spec)
    write_wav(out_dir / rel_paths["mix"], Signal(pair_mix, rate), spec)
    if full_mix is not None:
        rel_paths["noise-mix"] = f"noise-mix/{record_id}.wav"
        write_wav(out_dir / rel_paths["noise-mix"], Signal(full_mix, rate), spec)

    achieved_rel = 10.0 * math.log10(float(c1 @ c1) / float(c2 @ c2))
    achieved_noise_snr = None
    if cn is not None:
        louder = c1 if float(c1 @ c1) >= float(c2 @ c2) else c2
        achieved_noise_snr = 10.0 * math.log10(float(louder @ louder) / float(cn @ cn))

    # The recorded mixture is the one a separator would consume: the noisy
    # mix when noise is present, the clean two-source mix otherwise.
    mixture_rel = rel_paths.get("noise-mix", rel_paths["mix"])
    return MixRecord(
        id=record_id,
        mixture_path=mixture_rel,
        s1_path=rel_paths["s1"],
        s2_path=rel_paths["s2"],
        gain1=g1 * factor,
        gain2=g2 * factor,
        rel_level_db=achieved_rel,
        noise_path=noise_file,
        noise_gain=None if gn is None else gn * factor,
        noise_snr_db=achieved_noise_snr,
        length_samples=length,
        rng_draws=draws,
    )


def build_dataset(
    pairs: list[tuple[str, str]],
    noise_files: list[str] | None,
    config: MixConfig,
    out_dir: str | Path,
    jobs: int = 1,
) -> Manifest:
    """Build every pair, write the output tree and both manifest files.

    Unreadable inputs, sample-rate mismatches and silent sources raise;
    clipping under the 'error' policy only flags the affected record and the
    build continues. Results are identical for any ``jobs`` value.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    noise_list = [str(p) for p in noise_files] if noise_files else []
    out_path = Path(out_dir)
    for sub in ("mix", "s1", "s2") + (("noise-mix",) if noise_list else ()):
        (out_path / sub).mkdir(parents=True, exist_ok=True)

    def build(item: tuple[int, tuple[str, str]]) -> MixRecord:
        index, pair = item
        return _build_one(index, (str(pair[0]), str(pair[1])), noise_list, config, out_path)

    items = list(enumerate(pairs))
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            records = list(pool.map(build, items))
    else:
        records = [build(item) for item in items]

    manifest = Manifest(config=config, records=records)
    save_manifest(manifest, out_path)
    return manifest


def _record_to_json(record: MixRecord) -> dict:
    return {
        "id": record.id,
        "mixture_path": record.mixture_path,
        "s1_path": record.s1_path,
        "s2_path": record.s2_path,
        "gain1": record.gain1,
        "gain2": record.gain2,
        "rel_level_db": json_safe(record.rel_level_db),
        "noise_path": record.noise_path,
        "noise_gain": record.noise_gain,
        "noise_snr_db": json_safe(record.noise_snr_db),
        "length_samples": record.length_samples,
        "rng_draws": {k: json_safe(v) for k, v in record.rng_draws.items()},
        "flagged": record.flagged,
        "error": record.error,
    }


def _record_from_json(obj: dict) -> MixRecord:
    return MixRecord(
        id=obj["id"],
        mixture_path=obj["mixture_path"],
        s1_path=obj["s1_path"],
        s2_path=obj["s2_path"],
        gain1=obj["gain1"],
        gain2=obj["gain2"],
        rel_level_db=json_restore(obj["rel_level_db"]),
        noise_path=obj["noise_path"],
        noise_gain=obj["noise_gain"],
        noise_snr_db=json_restore(obj["noise_snr_db"]),
        length_samples=int(obj["length_samples"]),
        rng_draws={k: float(v) for k, v in obj["rng_draws"].items()},
        flagged=bool(obj["flagged"]),
        error=obj["error"],
    )


def save_manifest(manifest: Manifest, out_dir: str | Path) -> None:
    """Write manifest.json (full provenance) and manifest.csv (flat view)."""
    out_path = Path(out_dir)
    cfg = manifest.config
    payload = {
        "schema_version": manifest.schema_version,
        "config": {
            "rel_level_range_db": list(cfg.rel_level_range_db),
            "noise_snr_range_db": list(cfg.noise_snr_range_db),
            "length_mode": cfg.length_mode,
            "clip_policy": cfg.clip_policy,
            "seed": cfg.seed,
            "sample_rate_hz": cfg.sample_rate_hz,
        },
        "records": [_record_to_json(r) for r in manifest.records],
    }
    text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    (out_path / "manifest.json").write_text(text, encoding="utf-8")

    with open(out_path / "manifest.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for r in manifest.records:
            writer.writerow(
                [
                    r.id,
                    r.mixture_path or "",
                    r.s1_path or "",
                    r.s2_path or "",
                    "" if r.gain1 is None else format_float(r.gain1),
                    "" if r.gain2 is None else format_float(r.gain2),
                    "" if r.rel_level_db is None else format_db(r.rel_level_db),
                    r.noise_path or "",
                    "" if r.noise_gain is None else format_float(r.noise_gain),
                    "" if r.noise_snr_db is None else format_db(r.noise_snr_db),
                    r.length_samples,
                ]
            )


def load_manifest(path: str | Path) -> Manifest:
    """Load manifest.json (pass the file or the directory containing it)."""
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    obj = json.loads(p.read_text(encoding="utf-8"))
    version = obj.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{p}: manifest schema {version!r} != supported {MANIFEST_SCHEMA_VERSION!r}"
        )
    cfg = obj["config"]
    config = MixConfig(
        rel_level_range_db=tuple(cfg["rel_level_range_db"]),
        noise_snr_range_db=tuple(cfg["noise_snr_range_db"]),
        length_mode=cfg["length_mode"],
        clip_policy=cfg["clip_policy"],
        seed=cfg["seed"],
        sample_rate_hz=cfg["sample_rate_hz"],
    )
    records = [_record_from_json(r) for r in obj["records"]]
    return Manifest(config=config, records=records, schema_version=version)


def load_manifest_csv(path: str | Path) -> list[dict]:
    """Read manifest.csv back into typed dicts (None for empty fields)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for raw in reader:
            rows.append(
                {
                    "id": raw["id"],
                    "mixture_path": raw["mixture_path"] or None,
                    "s1_path": raw["s1_path"] or None,
                    "s2_path": raw["s2_path"] or None,
                    "gain1": float(raw["gain1"]) if raw["gain1"] else None,
                    "gain2": float(raw["gain2"]) if raw["gain2"] else None,
                    "rel_level_db": float(raw["rel_level_db"])
                    if raw["rel_level_db"]
                    else None,
                    "noise_path": raw["noise_path"] or None,
                    "noise_gain": float(raw["noise_gain"]) if raw["noise_gain"] else None,
                    "noise_snr_db": float(raw["noise_snr_db"])
                    if raw["noise_snr_db"]
                    else None,
                    "length_samples": int(raw["length_samples"]),
                }
            )
    return rows
