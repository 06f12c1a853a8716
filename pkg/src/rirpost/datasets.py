"""Dataset manifests: directory scans, train/dev/test splits, persistence.

A manifest lists WAV entries with a domain tag, a split assignment, and any
room geometry found in a JSON sidecar next to the WAV. Splits follow
configurable integer ratios (default 773:194:242, so a 1209-file corpus
lands exactly on {773, 194, 242}); non-divisible totals are rounded by
largest remainder, which is deterministic and order-independent.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .audio import Domain
from .errors import EmptyCorpusError

DEFAULT_SPLIT_RATIOS = (773, 194, 242)
SPLIT_NAMES = ("Train", "Dev", "Test")


@dataclass
class ManifestEntry:
    id: str
    wav_path: str
    domain: Domain
    split: str = ""
    room_meta: dict = None


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    split_seed: int = 0
    split_ratios: tuple = DEFAULT_SPLIT_RATIOS

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        dupes = {i for i in ids if ids.count(i) > 1} if len(ids) != len(set(ids)) else set()
        if dupes:
            raise ValueError(f"duplicate entry ids: {sorted(dupes)}")

    def split_entries(self, split):
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLIT_NAMES}")
        return [e for e in self.entries if e.split == split]

    def split_sizes(self):
        return {name: len(self.split_entries(name)) for name in SPLIT_NAMES}

    def by_id(self, entry_id):
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)


def split_counts(total, ratios=DEFAULT_SPLIT_RATIOS):
    """Apportion total into len(ratios) parts by largest-remainder rounding."""
    ratios = [float(r) for r in ratios]
    if total < 0 or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise ValueError("invalid split ratios")
    weight = sum(ratios)
    exact = [total * r / weight for r in ratios]
    counts = [int(np.floor(q)) for q in exact]
    remainders = [q - c for q, c in zip(exact, counts)]
    short = total - sum(counts)
    # ties broken by split position, which keeps the result deterministic
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        counts[i] += 1
    return tuple(counts)


def build_manifest(directory, domain, split_seed=0, ratios=DEFAULT_SPLIT_RATIOS):
    """Scan a directory of WAVs into a split manifest.

    Files are gathered in sorted order, shuffled once under split_seed, and
    cut into Train/Dev/Test by the ratio counts. A sidecar <stem>.json next
    to a WAV populates room_meta.
    """
    if isinstance(domain, str):
        domain = Domain(domain)
    names = sorted(f for f in os.listdir(directory) if f.lower().endswith(".wav"))
    if not names:
        raise EmptyCorpusError(f"no WAV files found in {directory}")
    entries = []
    seen = set()
    for name in names:
        stem = os.path.splitext(name)[0]
        if stem in seen:
            raise ValueError(f"duplicate entry id {stem!r} in {directory}")
        seen.add(stem)
        wav_path = os.path.join(directory, name)
        meta_path = os.path.join(directory, stem + ".json")
        room_meta = None
        if os.path.exists(meta_path):
            with open(meta_path) as fh:
                room_meta = json.load(fh)
        entries.append(ManifestEntry(id=stem, wav_path=wav_path, domain=domain, room_meta=room_meta))

    counts = split_counts(len(entries), ratios)
    order = np.random.default_rng(split_seed).permutation(len(entries))
    bounds = np.cumsum(counts)
    for pos, idx in enumerate(order):
        split_idx = int(np.searchsorted(bounds, pos, side="right"))
        entries[idx].split = SPLIT_NAMES[split_idx]
    return DatasetManifest(entries=entries, split_seed=split_seed, split_ratios=tuple(ratios))


def save_manifest(manifest, path):
    payload = {
        "split_seed": manifest.split_seed,
        "split_ratios": list(manifest.split_ratios),
        "entries": [
            {
                "id": e.id,
                "wav_path": e.wav_path,
                "domain": e.domain.value,
                "split": e.split,
                "room_meta": e.room_meta,
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_manifest(path):
    with open(path) as fh:
        payload = json.load(fh)
    entries = [
        ManifestEntry(
            id=e["id"],
            wav_path=e["wav_path"],
            domain=Domain(e["domain"]),
            split=e.get("split", ""),
            room_meta=e.get("room_meta"),
        )
        for e in payload["entries"]
    ]
    return DatasetManifest(
        entries=entries,
        split_seed=payload.get("split_seed", 0),
        split_ratios=tuple(payload.get("split_ratios", DEFAULT_SPLIT_RATIOS)),
    )
