"""Far-field speech synthesis: clean speech convolved with an impulse
response plus looped environmental noise scaled to a target SNR.

The mixture is x_f = truncate(x_c conv r) + lambda * n[(l + t) mod N], with
lambda chosen so the power ratio of reverberant speech to scaled noise hits
the requested SNR exactly. If the mixture peak exceeds 1 the whole utterance
is rescaled and the factor recorded, preserving waveform shape.

Corpus generation derives one RNG per utterance from (corpus seed, index),
so serial and parallel runs, and any rerun, agree bit-exactly.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .audio import ImpulseResponse, load_waveform, resample, write_waveform
from .errors import ZeroEnergyError
from .validation import SAMPLE_RATE, check_waveform

DEFAULT_SNR_RANGE_DB = (1.0, 2.0)


@dataclass
class NoiseSpec:
    """A noise recording plus the loop offset and target SNR to apply."""

    noise: np.ndarray
    offset_l: int
    snr_db: float
    noise_id: str = ""

    def __post_init__(self):
        self.noise = check_waveform(np.asarray(self.noise, dtype=np.float64), "noise")
        if not 0 <= self.offset_l < self.noise.shape[0]:
            raise ValueError(f"offset_l {self.offset_l} outside noise of length {self.noise.shape[0]}")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")


@dataclass
class FarFieldUtterance:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    metadata: dict = field(default_factory=dict)


def convolve_full(x, h):
    """FFT-based linear convolution, length len(x) + len(h) - 1."""
    x = check_waveform(np.asarray(x, dtype=np.float64), "signal")
    h = check_waveform(np.asarray(h, dtype=np.float64), "kernel")
    return fftconvolve(x, h, mode="full")


def loop_noise(noise, offset_l, target_len):
    """Read target_len samples from noise starting at offset_l, wrapping around."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.size == 0:
        raise ValueError("noise sequence is empty")
    if not 0 <= offset_l < noise.shape[0]:
        raise ValueError(f"offset_l {offset_l} outside noise of length {noise.shape[0]}")
    if target_len < 0:
        raise ValueError("target_len must be non-negative")
    idx = (offset_l + np.arange(target_len)) % noise.shape[0]
    return noise[idx]


def compute_lambda(reverberant, noise_segment, snr_db):
    """Noise gain placing the reverberant-to-noise power ratio at snr_db."""
    reverberant = np.asarray(reverberant, dtype=np.float64)
    noise_segment = np.asarray(noise_segment, dtype=np.float64)
    p_rev = float(np.mean(reverberant**2)) if reverberant.size else 0.0
    p_noise = float(np.mean(noise_segment**2)) if noise_segment.size else 0.0
    if p_rev <= 0.0:
        raise ZeroEnergyError("reverberant signal has zero power")
    if p_noise <= 0.0:
        raise ZeroEnergyError("noise segment has zero power")
    return float(np.sqrt(p_rev / (p_noise * 10.0 ** (snr_db / 10.0))))


def augment(clean, rir, spec, noise_scale=None):
    """Build one far-field utterance; noise_scale overrides the SNR-derived gain.

    The convolution tail is truncated so output length equals the clean
    input. A peak above 1 triggers a global rescale, recorded in metadata
    (rescale == 1.0 means untouched).
    """
    clean = check_waveform(np.asarray(clean, dtype=np.float64), "clean speech")
    rir_samples = rir.samples if isinstance(rir, ImpulseResponse) else np.asarray(rir, dtype=np.float64)
    reverberant = convolve_full(clean, rir_samples)[: clean.shape[0]]
    segment = loop_noise(spec.noise, spec.offset_l, clean.shape[0])
    lam = compute_lambda(reverberant, segment, spec.snr_db) if noise_scale is None else float(noise_scale)
    mixture = reverberant + lam * segment
    rescale = 1.0
    peak = float(np.max(np.abs(mixture))) if mixture.size else 0.0
    if peak > 1.0:
        rescale = 1.0 / peak
        mixture = mixture * rescale
    return FarFieldUtterance(
        samples=mixture,
        sample_rate=SAMPLE_RATE,
        metadata={
            "rir_id": rir.source_id if isinstance(rir, ImpulseResponse) else "",
            "noise_id": spec.noise_id,
            "offset_l": int(spec.offset_l),
            "snr_db": float(spec.snr_db),
            "lambda": lam,
            "rescale": rescale,
        },
    )


def utterance_rng(corpus_seed, index):
    """Per-utterance generator; identical regardless of processing order."""
    return np.random.default_rng(np.random.SeedSequence([int(corpus_seed), int(index)]))


def generate_corpus(clean_paths, rirs, noises, out_dir, snr_range=DEFAULT_SNR_RANGE_DB, seed=0, manifest_path=None):
    """Augment every clean utterance with a randomly drawn RIR and noise.

    rirs: sequence of ImpulseResponse; noises: sequence of (noise_id, samples).
    Writes one WAV per utterance plus a JSON-lines manifest; returns the
    manifest rows in input order.
    """
    clean_paths = list(clean_paths)
    rirs = list(rirs)
    noises = list(noises)
    if not clean_paths:
        raise ValueError("no clean utterances supplied")
    if not rirs:
        raise ValueError("no impulse responses supplied")
    if not noises:
        raise ValueError("no noise recordings supplied")
    lo, hi = float(snr_range[0]), float(snr_range[1])
    if not lo <= hi:
        raise ValueError(f"invalid SNR range [{lo}, {hi}]")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for index, clean_path in enumerate(clean_paths):
        rng = utterance_rng(seed, index)
        clean, rate = load_waveform(clean_path)
        if rate != SAMPLE_RATE:
            clean = resample(clean, rate, SAMPLE_RATE)
        rir = rirs[int(rng.integers(0, len(rirs)))]
        noise_id, noise = noises[int(rng.integers(0, len(noises)))]
        offset_l = int(rng.integers(0, len(noise)))
        snr_db = float(rng.uniform(lo, hi))
        spec = NoiseSpec(noise=noise, offset_l=offset_l, snr_db=snr_db, noise_id=noise_id)
        utt = augment(clean, rir, spec)
        stem = os.path.splitext(os.path.basename(clean_path))[0]
        out_path = os.path.join(out_dir, f"{stem}.farfield.wav")
        write_waveform(out_path, utt.samples, SAMPLE_RATE)
        rows.append(
            {
                "clean_path": str(clean_path),
                "rir_id": utt.metadata["rir_id"],
                "noise_id": noise_id,
                "offset_l": offset_l,
                "snr_db": snr_db,
                "lambda": utt.metadata["lambda"],
                "rescale": utt.metadata["rescale"],
                "out_path": out_path,
            }
        )
    if manifest_path is None:
        manifest_path = os.path.join(out_dir, "farfield_manifest.jsonl")
    with open(manifest_path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return rows
