"""Batch orchestration: run improvement-stage combinations over a corpus,
report acoustic parameters, and export spectrograms.

Four stage combinations are supported: equalization alone, translation
alone, and the two orderings of both. Every stage output is quantized to
float32 (the on-disk WAV precision) before feeding the next stage, so a
combined run is bit-identical to running the stages as separate corpus
passes over materialized intermediates.

The report carries per-stage corpus means of T60/DRR/EDT/CTE, their
absolute differences against the manifest's Real split, and per-entry
input/output hashes for each stage. All paths inside the report are
basenames, keeping reruns into different directories byte-comparable.
"""

import csv
import enum
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .acoustics import acoustic_params
from .audio import Domain, ImpulseResponse, load_waveform, normalize_rir, spectrogram, write_waveform
from .equalization import DEFAULT_NUM_TAPS, equalize, load_gmm
from .errors import EmptyCorpusError, RirPostError
from .tsrirgan import load_checkpoint, models_from_checkpoint, translate

PARAM_NAMES = ("t60_s", "drr_db", "edt_s", "cte_db")


class Combination(enum.Enum):
    EQ_ONLY = "EQ_ONLY"
    TRANSLATE_AFTER_EQ = "TRANSLATE_AFTER_EQ"
    TRANSLATE_ONLY = "TRANSLATE_ONLY"
    EQ_AFTER_TRANSLATE = "EQ_AFTER_TRANSLATE"


_STAGES = {
    Combination.EQ_ONLY: ("equalize",),
    Combination.TRANSLATE_AFTER_EQ: ("equalize", "translate"),
    Combination.TRANSLATE_ONLY: ("translate",),
    Combination.EQ_AFTER_TRANSLATE: ("translate", "equalize"),
}


@dataclass
class PipelinePlan:
    combination: Combination
    checkpoint_path: str = None
    gmm_path: str = None
    seed: int = 0
    num_taps: int = DEFAULT_NUM_TAPS

    def __post_init__(self):
        if isinstance(self.combination, str):
            self.combination = Combination(self.combination)
        stages = _STAGES[self.combination]
        if "translate" in stages and not self.checkpoint_path:
            raise ValueError(f"{self.combination.value} requires a checkpoint_path")
        if "equalize" in stages and not self.gmm_path:
            raise ValueError(f"{self.combination.value} requires a gmm_path")

    @property
    def stages(self):
        return _STAGES[self.combination]


def _entry_seed(plan_seed, entry_id):
    """Stable per-entry seed from the id's base name (before any dot).

    Using the base keeps target-gain draws identical whether a stage runs
    inside a combination or as a later pass over materialized outputs
    named <id>.<combination>.wav.
    """
    base = str(entry_id).split(".")[0]
    digest = hashlib.sha256(f"{plan_seed}:{base}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _quantize(samples):
    """Round-trip through the on-disk float32 representation."""
    return np.asarray(samples, dtype=np.float32).astype(np.float64)


def _hash_samples(samples):
    return hashlib.sha256(np.ascontiguousarray(samples, dtype="<f4").tobytes()).hexdigest()


def _load_entry_rir(entry, domain):
    samples, rate = load_waveform(entry.wav_path)
    return normalize_rir(samples, rate, domain=domain, source_id=entry.id)


def _param_row(rir):
    params = acoustic_params(rir)
    return {"t60_s": params.t60, "drr_db": params.drr, "edt_s": params.edt, "cte_db": params.cte}


def _write_param_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("source_id",) + PARAM_NAMES)
        for source_id, row in rows:
            writer.writerow([source_id] + [f"{row[name]:.17g}" for name in PARAM_NAMES])


def _mean_params(rows):
    """NaN-skipping per-parameter means; NaN when no estimate succeeded."""
    out = {}
    for name in PARAM_NAMES:
        values = np.array([row[name] for _, row in rows], dtype=np.float64)
        finite = values[np.isfinite(values)]
        out[name] = float(np.mean(finite)) if finite.size else float("nan")
    return out


def run_pipeline(plan, manifest, out_dir, models=None, gmm=None):
    """Apply the plan's stages to every Synthetic entry of the manifest.

    Writes <id>.<combination>.wav per entry, per-stage parameter CSVs, and
    report.json. Entry failures are recorded in the report and do not stop
    the corpus. Returns the report dict.
    """
    stages = plan.stages
    if "translate" in stages and models is None:
        models = models_from_checkpoint(load_checkpoint(plan.checkpoint_path))
    if "equalize" in stages and gmm is None:
        gmm = load_gmm(plan.gmm_path)

    entries = sorted((e for e in manifest.entries if e.domain == Domain.SYNTHETIC), key=lambda e: e.id)
    if not entries:
        raise EmptyCorpusError("manifest has no Synthetic entries to process")
    os.makedirs(out_dir, exist_ok=True)

    stage_rows = {"input": []}
    for stage in stages:
        stage_rows[stage] = []
    report_entries = []
    failures = []
    for entry in entries:
        try:
            rir = _load_entry_rir(entry, Domain.SYNTHETIC)
            rir = ImpulseResponse(_quantize(rir.samples), rir.sample_rate, rir.domain, rir.source_id)
            stage_rows["input"].append((entry.id, _param_row(rir)))
            current = rir
            stage_records = []
            for stage in stages:
                input_hash = _hash_samples(current.samples)
                if stage == "translate":
                    current = translate(current, models)
                else:
                    target = gmm.sample(1, seed=_entry_seed(plan.seed, entry.id))[0]
                    current = equalize(current, target, num_taps=plan.num_taps)
                current = ImpulseResponse(
                    _quantize(current.samples), current.sample_rate, current.domain, current.source_id
                )
                stage_records.append(
                    {"stage": stage, "input_sha256": input_hash, "output_sha256": _hash_samples(current.samples)}
                )
                stage_rows[stage].append((entry.id, _param_row(current)))
            out_name = f"{entry.id}.{plan.combination.value}.wav"
            write_waveform(os.path.join(out_dir, out_name), current.samples, current.sample_rate)
            report_entries.append({"id": entry.id, "out_wav": out_name, "stages": stage_records})
        except (RirPostError, ValueError, OSError) as exc:
            failures.append({"id": entry.id, "error": f"{type(exc).__name__}: {exc}"})

    real_rows = []
    for entry in sorted((e for e in manifest.entries if e.domain == Domain.REAL), key=lambda e: e.id):
        try:
            real_rows.append((entry.id, _param_row(_load_entry_rir(entry, Domain.REAL))))
        except (RirPostError, ValueError, OSError) as exc:
            failures.append({"id": entry.id, "error": f"{type(exc).__name__}: {exc}"})

    stage_means = {}
    csv_files = {}
    for stage, rows in stage_rows.items():
        stage_means[stage] = _mean_params(rows)
        csv_name = f"params.{stage}.csv"
        _write_param_csv(os.path.join(out_dir, csv_name), rows)
        csv_files[stage] = csv_name
    reference_means = None
    differences = None
    if real_rows:
        reference_means = _mean_params(real_rows)
        csv_name = "params.real.csv"
        _write_param_csv(os.path.join(out_dir, csv_name), real_rows)
        csv_files["real"] = csv_name
        differences = {
            stage: {
                name: abs(stage_means[stage][name] - reference_means[name])
                for name in PARAM_NAMES
            }
            for stage in stage_means
        }

    report = {
        "combination": plan.combination.value,
        "seed": plan.seed,
        "num_taps": plan.num_taps,
        "stages": list(stages),
        "entries": report_entries,
        "failures": failures,
        "param_csv": csv_files,
        "stage_means": stage_means,
        "reference_means": reference_means,
        "mean_abs_difference_vs_real": differences,
        "n_processed": len(report_entries),
        "n_failed": len(failures),
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return report


def report_params(manifest, out_csv, reference=None):
    """Per-entry acoustic parameters plus corpus means, written as CSV.

    reference may be another manifest (or entry list) whose corpus means
    provide the Difference column; per-entry failures are recorded in the
    returned stats, not raised.
    """
    entries = getattr(manifest, "entries", manifest)
    entries = sorted(entries, key=lambda e: e.id)
    if not entries:
        raise EmptyCorpusError("no entries to analyze")
    rows = []
    failures = []
    for entry in entries:
        try:
            rows.append((entry.id, _param_row(_load_entry_rir(entry, entry.domain))))
        except (RirPostError, ValueError, OSError) as exc:
            failures.append({"id": entry.id, "error": f"{type(exc).__name__}: {exc}"})
    if out_csv is not None:
        _write_param_csv(out_csv, rows)
    stats = {
        "means": _mean_params(rows) if rows else None,
        "n_entries": len(rows),
        "failures": failures,
    }
    if reference is not None:
        ref_entries = sorted(getattr(reference, "entries", reference), key=lambda e: e.id)
        ref_rows = []
        for entry in ref_entries:
            try:
                ref_rows.append((entry.id, _param_row(_load_entry_rir(entry, entry.domain))))
            except (RirPostError, ValueError, OSError) as exc:
                failures.append({"id": entry.id, "error": f"{type(exc).__name__}: {exc}"})
        stats["reference_means"] = _mean_params(ref_rows) if ref_rows else None
        if stats["means"] and stats["reference_means"]:
            stats["differences"] = {
                name: abs(stats["means"][name] - stats["reference_means"][name]) for name in PARAM_NAMES
            }
    return stats


def _write_pgm(path, magnitudes_db, floor_db=-120.0):
    """8-bit grayscale render, dB floor black, 0 dB white, low bands at bottom."""
    levels = np.clip((magnitudes_db - floor_db) / -floor_db, 0.0, 1.0)
    img = np.round(levels * 255.0).astype(np.uint8)[::-1, :]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + img.tobytes())


def export_spectrograms(manifest, out_dir, window_size=512, hop=256):
    """Write per-entry spectrogram matrices (CSV) and grayscale images (PGM)."""
    entries = getattr(manifest, "entries", manifest)
    entries = sorted(entries, key=lambda e: e.id)
    if not entries:
        raise EmptyCorpusError("no entries to export")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    failures = []
    for entry in entries:
        try:
            rir = _load_entry_rir(entry, entry.domain)
            spec = spectrogram(rir, window_size=window_size, hop=hop)
            csv_path = os.path.join(out_dir, f"{entry.id}.spectrogram.csv")
            np.savetxt(csv_path, spec.magnitudes, fmt="%.17e", delimiter=",")
            pgm_path = os.path.join(out_dir, f"{entry.id}.spectrogram.pgm")
            _write_pgm(pgm_path, spec.magnitudes)
            written.append(entry.id)
        except (RirPostError, ValueError, OSError) as exc:
            failures.append({"id": entry.id, "error": f"{type(exc).__name__}: {exc}"})
    return {"written": written, "failures": failures}
