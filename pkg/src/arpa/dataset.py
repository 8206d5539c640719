"""Dataset manifests, pitch-shift augmentation, synthetic corpus generation,
and stratified train/test splitting.

A manifest is one JSON file, {"version": 1, "samples": [{path, letter,
label, origin}]}, with audio paths relative to the manifest's directory.
Every randomized operation takes an explicit seed and is reproducible
byte-for-byte. Note that augmentation happens before splitting and keeps the
source label, so augmented copies of one recording can land on both sides of
a split; acceptable for a practice tool, but don't read the CV numbers as
generalization to new speakers.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, load_wav, save_wav
from .errors import ArpaError

MANIFEST_VERSION = 1
SYNTH_DURATION_S = 0.5
SYNTH_RATE_HZ = 16000
FREQ_JITTER = 0.03
NOISE_JITTER_DB = 6.0
MIN_TEMPLATE_SEPARATION_HZ = 200.0


class ManifestParseError(ArpaError):
    """Manifest JSON is malformed or has the wrong schema/version."""


class DuplicatePathError(ArpaError):
    """Two manifest entries point at the same audio file."""


class MissingAudioError(ArpaError):
    """Manifest references an audio file that does not exist."""


class FactorOutOfRangeError(ArpaError):
    """Pitch factor outside the supported [0.5, 2.0] range."""


class EmptyGroupError(ArpaError):
    """A (letter, label) group that must grow has no source samples."""


class BadRecipeError(ArpaError):
    """Synthetic corpus recipe is malformed or templates are too similar."""


class StratumTooSmallError(ArpaError):
    """A (letter, label) stratum has fewer samples than the fold count."""


class Label(Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"


class Origin(Enum):
    RECORDED = "recorded"
    AUGMENTED = "augmented"
    SYNTHETIC = "synthetic"


@dataclass
class LabeledSample:
    path: str  # relative to the manifest root
    letter_id: str
    label: Label
    origin: Origin = Origin.RECORDED

    def __post_init__(self):
        if not self.letter_id:
            raise ValueError("letter_id must be non-empty")


@dataclass
class DatasetManifest:
    samples: list[LabeledSample]
    root: Path
    version: int = MANIFEST_VERSION

    def resolve(self, sample: LabeledSample) -> Path:
        return Path(self.root) / sample.path

    def by_letter(self) -> dict[str, list[LabeledSample]]:
        out: dict[str, list[LabeledSample]] = {}
        for s in self.samples:
            out.setdefault(s.letter_id, []).append(s)
        return out

    def counts(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for s in self.samples:
            per = out.setdefault(s.letter_id, {l.value: 0 for l in Label})
            per[s.label.value] += 1
        return out


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != MANIFEST_VERSION:
        raise ManifestParseError(f"{path}: expected a version-{MANIFEST_VERSION} manifest object")
    if not isinstance(doc.get("samples"), list):
        raise ManifestParseError(f"{path}: missing samples list")
    samples = []
    seen = set()
    for entry in doc["samples"]:
        try:
            sample = LabeledSample(
                path=entry["path"],
                letter_id=entry["letter"],
                label=Label(entry["label"]),
                origin=Origin(entry.get("origin", "recorded")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestParseError(f"{path}: bad sample entry {entry!r}: {exc}") from exc
        if sample.path in seen:
            raise DuplicatePathError(f"{path}: duplicate audio path {sample.path}")
        seen.add(sample.path)
        samples.append(sample)
    manifest = DatasetManifest(samples, root=path.parent)
    for sample in samples:
        if not manifest.resolve(sample).is_file():
            raise MissingAudioError(f"missing audio file: {manifest.resolve(sample)}")
    return manifest


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "version": manifest.version,
        "samples": [
            {"path": s.path, "letter": s.letter_id, "label": s.label.value, "origin": s.origin.value}
            for s in manifest.samples
        ],
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def pitch_shift(clip: AudioClip, factor: float) -> AudioClip:
    """Resampling-based shift: frequencies scale by `factor`, duration by 1/factor."""
    if not 0.5 <= factor <= 2.0:
        raise FactorOutOfRangeError(f"factor {factor} outside [0.5, 2.0]")
    n = len(clip.samples)
    n_out = max(1, int(n / factor + 0.5))
    positions = np.arange(n_out) * factor
    out = np.interp(positions, np.arange(n), clip.samples)
    return AudioClip(out, clip.sample_rate_hz)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def augment_to_count(
    manifest: DatasetManifest,
    per_letter_target: int,
    factor_range: tuple[float, float] = (0.9, 1.1),
    seed: int = 0,
) -> DatasetManifest:
    """Grow every letter to `per_letter_target` samples with pitch-shifted
    copies, preserving each letter's correct/incorrect ratio (rounded).
    Sources are cycled in manifest order; factors come from the seeded RNG."""
    lo, hi = factor_range
    if not (0.5 <= lo <= hi <= 2.0):
        raise FactorOutOfRangeError(f"factor range [{lo}, {hi}] outside [0.5, 2.0]")
    rng = np.random.default_rng(seed)
    out_samples = list(manifest.samples)
    for letter in sorted(manifest.by_letter()):
        groups = {
            label: [s for s in manifest.samples if s.letter_id == letter and s.label is label]
            for label in Label
        }
        current = sum(len(g) for g in groups.values())
        if per_letter_target < current:
            raise ValueError(f"letter {letter}: target {per_letter_target} below current {current}")
        target_correct = _round_half_up(per_letter_target * len(groups[Label.CORRECT]) / current)
        targets = {Label.CORRECT: target_correct, Label.INCORRECT: per_letter_target - target_correct}
        for label in (Label.CORRECT, Label.INCORRECT):
            sources = groups[label]
            need = targets[label] - len(sources)
            if need <= 0:
                continue
            if not sources:
                raise EmptyGroupError(f"letter {letter} has no {label.value} samples to augment")
            for i in range(need):
                src = sources[i % len(sources)]
                factor = float(rng.uniform(lo, hi))
                clip = load_wav(manifest.resolve(src))
                shifted = pitch_shift(clip, factor)
                stem, _ = os.path.splitext(src.path)
                new_rel = f"{stem}.aug{i:03d}.wav"
                save_wav(shifted, Path(manifest.root) / new_rel)
                out_samples.append(LabeledSample(new_rel, letter, label, Origin.AUGMENTED))
    return DatasetManifest(out_samples, root=manifest.root)


def default_recipe() -> dict:
    text = resources.files("arpa.assets").joinpath("synthetic_recipe.json").read_text()
    return json.loads(text)


def _validate_recipe(recipe: dict) -> None:
    if not isinstance(recipe, dict) or not recipe:
        raise BadRecipeError("recipe must map letters to correct/incorrect templates")
    for letter, cells in recipe.items():
        if not isinstance(cells, dict) or set(cells) != {"correct", "incorrect"}:
            raise BadRecipeError(f"letter {letter!r} needs exactly correct and incorrect templates")
        for label, tpl in cells.items():
            freqs = tpl.get("freqs")
            if not isinstance(freqs, list) or not 2 <= len(freqs) <= 3:
                raise BadRecipeError(f"{letter}/{label}: need 2-3 sine frequencies")
            if any(not 0 < f < SYNTH_RATE_HZ / 2 for f in freqs):
                raise BadRecipeError(f"{letter}/{label}: frequencies must be in (0, Nyquist)")
            if not isinstance(tpl.get("noise_db"), (int, float)) or tpl["noise_db"] > 0:
                raise BadRecipeError(f"{letter}/{label}: noise_db must be a number <= 0")
        fc, fi = recipe[letter]["correct"]["freqs"], recipe[letter]["incorrect"]["freqs"]
        if len(fc) == len(fi) and all(
            abs(a - b) < MIN_TEMPLATE_SEPARATION_HZ for a, b in zip(fc, fi)
        ):
            raise BadRecipeError(
                f"letter {letter!r}: correct/incorrect templates must differ by "
                f">= {MIN_TEMPLATE_SEPARATION_HZ:.0f} Hz in at least one frequency"
            )


def _synth_clip(template: dict, rng: np.random.Generator) -> AudioClip:
    n = int(SYNTH_DURATION_S * SYNTH_RATE_HZ)
    t = np.arange(n) / SYNTH_RATE_HZ
    freqs = template["freqs"]
    amp = 0.8 / len(freqs)
    signal = np.zeros(n)
    for f in freqs:
        jittered = f * (1.0 + rng.uniform(-FREQ_JITTER, FREQ_JITTER))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += amp * np.sin(2.0 * np.pi * jittered * t + phase)
    noise_db = template["noise_db"] + rng.uniform(-NOISE_JITTER_DB, NOISE_JITTER_DB)
    signal += (10.0 ** (noise_db / 20.0)) * rng.standard_normal(n)
    return AudioClip(np.clip(signal, -1.0, 1.0), SYNTH_RATE_HZ)


def generate_synthetic_corpus(recipe: dict, n_per_cell: int, seed: int, out_dir) -> DatasetManifest:
    """Write n_per_cell half-second clips per (letter, label) under out_dir,
    plus a manifest.json; deterministic for a fixed (recipe, n, seed)."""
    _validate_recipe(recipe)
    if n_per_cell < 1:
        raise ValueError("n_per_cell must be >= 1")
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    samples = []
    for letter in sorted(recipe):
        for label in (Label.CORRECT, Label.INCORRECT):
            template = recipe[letter][label.value]
            cell_dir = out_dir / letter / label.value
            cell_dir.mkdir(parents=True, exist_ok=True)
            for i in range(n_per_cell):
                rel = f"{letter}/{label.value}/{letter}_{label.value}_{i:03d}.wav"
                save_wav(_synth_clip(template, rng), out_dir / rel)
                samples.append(LabeledSample(rel, letter, label, Origin.SYNTHETIC))
    manifest = DatasetManifest(samples, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


@dataclass
class Holdout:
    train_frac: float = 0.8


@dataclass
class KFold:
    k: int = 10


@dataclass
class HoldoutSplit:
    train: list[int]
    test: list[int]


@dataclass
class KFoldSplit:
    folds: list[list[int]] = field(default_factory=list)


def stratified_kfold(keys: list, k: int, seed: int) -> list[int]:
    """Assign each item a fold in 0..k-1, stratified by its key; per stratum
    fold sizes differ by at most one. Raises if any stratum has < k items."""
    strata: dict = {}
    for i, key in enumerate(keys):
        strata.setdefault(key, []).append(i)
    rng = np.random.default_rng(seed)
    fold_of = [0] * len(keys)
    for key in sorted(strata, key=repr):
        idx = np.array(strata[key])
        if len(idx) < k:
            raise StratumTooSmallError(f"stratum {key!r} has {len(idx)} samples < k={k}")
        rng.shuffle(idx)
        for fold, chunk in enumerate(np.array_split(idx, k)):
            for i in chunk:
                fold_of[int(i)] = fold
    return fold_of


def split(manifest: DatasetManifest, mode: Holdout | KFold, seed: int = 0):
    """Stratified split by (letter, label); deterministic for a given seed."""
    if not manifest.samples:
        raise ValueError("cannot split an empty manifest")
    keys = [(s.letter_id, s.label.value) for s in manifest.samples]
    if isinstance(mode, KFold):
        if not 2 <= mode.k <= len(manifest.samples):
            raise ValueError(f"k must be in [2, {len(manifest.samples)}]")
        fold_of = stratified_kfold(keys, mode.k, seed)
        folds: list[list[int]] = [[] for _ in range(mode.k)]
        for i, fold in enumerate(fold_of):
            folds[fold].append(i)
        return KFoldSplit(folds)
    if isinstance(mode, Holdout):
        if not 0.0 < mode.train_frac < 1.0:
            raise ValueError("train_frac must be in (0, 1)")
        strata: dict = {}
        for i, key in enumerate(keys):
            strata.setdefault(key, []).append(i)
        rng = np.random.default_rng(seed)
        train: list[int] = []
        test: list[int] = []
        for key in sorted(strata, key=repr):
            idx = np.array(strata[key])
            rng.shuffle(idx)
            n_train = _round_half_up(len(idx) * mode.train_frac)
            train.extend(int(i) for i in idx[:n_train])
            test.extend(int(i) for i in idx[n_train:])
        return HoldoutSplit(sorted(train), sorted(test))
    raise TypeError(f"unknown split mode {mode!r}")
