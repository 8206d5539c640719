"""Confusion counting, accuracy/precision/recall/F1, cross-validation
orchestration, and report rendering.

Correct pronunciation is the positive class. The headline numbers come from
one confusion matrix pooled over all held-out folds; per-fold accuracies are
reported alongside with mean and standard deviation. Zero-denominator metric
conventions are pessimistic: precision when nothing was predicted positive,
recall when nothing is positive, and F1 when both are zero all report 0.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from . import __version__
from .audio_io import load_wav, resample
from .classifiers import FeatureVector, cross_validate_vectors, pool
from .config import PipelineConfig
from .dataset import DatasetManifest, Label
from .errors import ArpaError
from .features import extract_features


class EmptyInputError(ArpaError):
    """No (predicted, actual) pairs to count."""


@dataclass
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def swapped(self) -> "ConfusionMatrix":
        """The same predictions with Incorrect treated as the positive class."""
        return ConfusionMatrix(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp)


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion(pairs: list[tuple[Label, Label]]) -> ConfusionMatrix:
    """Count (predicted, actual) pairs with Correct as the positive class."""
    if not pairs:
        raise EmptyInputError("no prediction pairs")
    cm = ConfusionMatrix()
    for predicted, actual in pairs:
        if actual is Label.CORRECT:
            if predicted is Label.CORRECT:
                cm.tp += 1
            else:
                cm.fn += 1
        else:
            if predicted is Label.CORRECT:
                cm.fp += 1
            else:
                cm.tn += 1
    return cm


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise EmptyInputError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(accuracy, precision, recall, f1)


@dataclass
class EvalReport:
    model_kind: str
    model_params: dict
    dataset: str
    n_samples: int
    letters: list[str]
    k_folds: int
    seed: int
    confusion: ConfusionMatrix
    aggregate: Metrics
    per_class: dict[str, Metrics]
    fold_accuracies: list[float]
    fold_mean: float
    fold_std: float
    tool_version: str = __version__


def clip_vector(clip, cfg: PipelineConfig) -> np.ndarray:
    """Pooled MFCC vector for one clip: resample -> preprocess+features -> pool."""
    canonical = resample(clip, cfg.sample_rate_hz)
    _, mfcc_matrix = extract_features(canonical, cfg)
    return pool(mfcc_matrix)


def manifest_vectors(manifest: DatasetManifest, cfg: PipelineConfig) -> list[FeatureVector]:
    return [
        FeatureVector(clip_vector(load_wav(manifest.resolve(s)), cfg), letter_id=s.letter_id, label=s.label)
        for s in manifest.samples
    ]


def cross_validate(
    manifest: DatasetManifest,
    cfg: PipelineConfig,
    model_kind: str,
    model_params: dict | None = None,
    k: int = 10,
    seed: int = 0,
) -> EvalReport:
    """Stratified k-fold CV over a manifest with one model per letter per fold;
    scalers are fit inside training, so held-out folds never leak into them."""
    model_params = model_params or {}
    vectors = manifest_vectors(manifest, cfg)
    fold_acc, pairs = cross_validate_vectors(vectors, model_kind, model_params, k, seed)
    cm = confusion(pairs)
    return EvalReport(
        model_kind=model_kind,
        model_params=model_params,
        dataset=str(manifest.root),
        n_samples=len(manifest.samples),
        letters=sorted(manifest.by_letter()),
        k_folds=k,
        seed=seed,
        confusion=cm,
        aggregate=metrics(cm),
        per_class={"correct": metrics(cm), "incorrect": metrics(cm.swapped())},
        fold_accuracies=fold_acc,
        fold_mean=float(np.mean(fold_acc)),
        fold_std=float(np.std(fold_acc)),
    )


class ReportFormat(Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "markdown"


def _pct(v: float) -> str:
    return f"{v * 100:.2f}%"


def render_markdown(report: EvalReport) -> str:
    m = report.aggregate
    lines = [
        f"# Evaluation: {report.model_kind} on {report.dataset}",
        "",
        f"Samples: {report.n_samples} ({', '.join(report.letters)}); "
        f"{report.k_folds}-fold cross-validation, seed {report.seed}.",
        "",
        "| Model | Precision | Recall | F1-Score | Accuracy |",
        "|-------|-----------|--------|----------|----------|",
        f"| {report.model_kind} | {_pct(m.precision)} | {_pct(m.recall)} | {_pct(m.f1)} | {_pct(m.accuracy)} |",
        "",
        f"Per-fold accuracy: mean {_pct(report.fold_mean)}, std {_pct(report.fold_std)}.",
        "",
        "| Class | Precision | Recall | F1-Score |",
        "|-------|-----------|--------|----------|",
    ]
    for name, pm in report.per_class.items():
        lines.append(f"| {name} | {_pct(pm.precision)} | {_pct(pm.recall)} | {_pct(pm.f1)} |")
    cm = report.confusion
    lines += [
        "",
        f"Confusion counts: TP={cm.tp} FP={cm.fp} TN={cm.tn} FN={cm.fn}.",
        "",
    ]
    return "\n".join(lines)


def render_csv(report: EvalReport) -> str:
    rows = ["model,fold,accuracy,precision,recall,f1"]
    for i, acc in enumerate(report.fold_accuracies):
        rows.append(f"{report.model_kind},{i},{acc!r},,,")
    m = report.aggregate
    rows.append(f"{report.model_kind},aggregate,{m.accuracy!r},{m.precision!r},{m.recall!r},{m.f1!r}")
    return "\n".join(rows) + "\n"


def render_report(report: EvalReport, fmt: ReportFormat, path) -> None:
    if fmt is ReportFormat.JSON:
        text = json.dumps(asdict(report), sort_keys=True, indent=2) + "\n"
    elif fmt is ReportFormat.CSV:
        text = render_csv(report)
    elif fmt is ReportFormat.MARKDOWN:
        text = render_markdown(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def default_report_name(dataset: str, model_kind: str) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = os.path.basename(os.path.normpath(dataset)) or "dataset"
    return f"report-{base}-{model_kind}-{stamp}.md"
