"""Command-line entry point: synth, augment, extract, train, eval, diagnose, serve.

Exit codes are script-friendly: 0 success (diagnose: Correct), 1 diagnose
Incorrect, 2 usage/config/data errors, 3 training errors like single-class
data, 4 unusable audio (silence / too short). All seeded commands are
reproducible flag-for-flag.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__, classifiers, dataset, evaluation, imaging
from .audio_io import load_wav, resample
from .classifiers import MODEL_KINDS
from .config import ConfigError, load_pipeline_config, load_service_config
from .dataset import BadRecipeError, load_manifest, save_manifest
from .errors import ArpaError
from .features import ClipTooShortError, extract_features, write_feature_file
from .preprocess import SilenceOnlyError


def _pipeline_cfg(config_path):
    try:
        return load_pipeline_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))


def _params(params_json: str) -> dict:
    try:
        doc = json.loads(params_json)
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"--params must be a JSON object: {exc}")
    if not isinstance(doc, dict):
        raise click.UsageError("--params must be a JSON object")
    return doc


@click.group()
@click.version_option(version=__version__)
def main():
    """Letter-pronunciation analysis toolkit."""


@main.command()
@click.option("--recipe", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Recipe JSON; defaults to the packaged three-letter recipe.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--n", "n_per_cell", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(recipe, out, n_per_cell, seed):
    """Generate a synthetic labeled corpus plus manifest.json."""
    if recipe is None:
        doc = dataset.default_recipe()
    else:
        try:
            doc = json.loads(Path(recipe).read_text())
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"recipe is not valid JSON: {exc}")
    try:
        manifest = dataset.generate_synthetic_corpus(doc, n_per_cell, seed, out)
    except (BadRecipeError, ValueError) as exc:
        raise click.UsageError(str(exc))
    click.echo(f"wrote {len(manifest.samples)} clips under {out} (manifest.json included)")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", required=True, type=int, help="Samples per letter after augmentation.")
@click.option("--factors", default="0.9:1.1", show_default=True, help="Pitch factor range lo:hi.")
@click.option("--seed", default=0, show_default=True)
def augment(manifest_path, target, factors, seed):
    """Pitch-shift-augment every letter up to --target samples."""
    try:
        lo, hi = (float(part) for part in factors.split(":"))
    except ValueError:
        raise click.UsageError("--factors must look like 0.9:1.1")
    source = load_manifest(manifest_path)
    try:
        augmented = dataset.augment_to_count(source, target, (lo, hi), seed)
    except (ArpaError, ValueError) as exc:
        raise click.UsageError(str(exc))
    out_path = Path(manifest_path).with_suffix(".augmented.json")
    save_manifest(augmented, out_path)
    click.echo(f"augmented manifest: {out_path} ({len(augmented.samples)} samples)")


def _feature_stem(rel_path: str) -> str:
    return Path(rel_path).with_suffix("").as_posix().replace("/", "_")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--images", is_flag=True, help="Also write colormap PNGs with JSON sidecars.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def extract(manifest_path, out, images, config_path):
    """Write mel and MFCC feature files (and optionally images) per clip."""
    cfg = _pipeline_cfg(config_path)
    manifest = load_manifest(manifest_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cmap = imaging.default_colormap() if images else None
    for sample in manifest.samples:
        clip = resample(load_wav(manifest.resolve(sample)), cfg.sample_rate_hz)
        mel, mfcc = extract_features(clip, cfg)
        stem = _feature_stem(sample.path)
        write_feature_file(mel, out_dir / f"{stem}.mel.arpf")
        write_feature_file(mfcc, out_dir / f"{stem}.mfcc.arpf")
        if images:
            imaging.render_png(mel, cmap, out_dir / f"{stem}.mel.png")
            imaging.render_png(mfcc, cmap, out_dir / f"{stem}.mfcc.png")
    n = len(manifest.samples)
    click.echo(f"extracted features for {n} clips into {out_dir}" + (" (with images)" if images else ""))


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_kind", required=True, type=click.Choice(MODEL_KINDS))
@click.option("--letter", default=None, help="Letter to train; default trains every letter.")
@click.option("--params", "params_json", default="{}", show_default=True, help="Model parameters as JSON.")
@click.option("--out", required=True, type=click.Path(), help="Model file (or directory when training all letters).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", default=0, show_default=True)
def train(manifest_path, model_kind, letter, params_json, out, config_path, seed):
    """Train one binary correct/incorrect model per letter."""
    cfg = _pipeline_cfg(config_path)
    params = _params(params_json)
    manifest = load_manifest(manifest_path)
    vectors = evaluation.manifest_vectors(manifest, cfg)
    by_letter: dict[str, list] = {}
    for v in vectors:
        by_letter.setdefault(v.letter_id, []).append(v)
    if letter is not None:
        if letter not in by_letter:
            raise click.UsageError(f"letter {letter!r} not present in manifest")
        targets = {letter: Path(out)}
    else:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        targets = {lt: out_dir / f"{lt}.{model_kind}.json" for lt in sorted(by_letter)}
    for lt, path in targets.items():
        try:
            model = classifiers.train_model(model_kind, by_letter[lt], params, seed=seed, letter_id=lt)
        except classifiers.SingleClassError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (ArpaError, ValueError, TypeError) as exc:
            raise click.UsageError(f"training failed for {lt}: {exc}")
        classifiers.save_model(model, path)
        correct = sum(1 for v in by_letter[lt] if classifiers.predict(model, v)[0] is v.label)
        click.echo(
            f"{lt}: {model_kind} model on {len(by_letter[lt])} samples, "
            f"training accuracy {correct / len(by_letter[lt]):.3f} -> {path}"
        )


@main.command(name="eval")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model-kind", required=True, type=click.Choice(MODEL_KINDS))
@click.option("--params", "params_json", default="{}", show_default=True)
@click.option("--cv", "k_folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", default=None, type=click.Path(),
              help="Report path; format from extension (.md/.json/.csv).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def eval_cmd(manifest_path, model_kind, params_json, k_folds, seed, report_path, config_path):
    """Cross-validate a model kind over a manifest and write a report."""
    cfg = _pipeline_cfg(config_path)
    manifest = load_manifest(manifest_path)
    try:
        report = evaluation.cross_validate(manifest, cfg, model_kind, _params(params_json), k_folds, seed)
    except (ArpaError, ValueError) as exc:
        raise click.UsageError(str(exc))
    if report_path is None:
        report_path = evaluation.default_report_name(report.dataset, model_kind)
    suffix = Path(report_path).suffix.lower()
    fmt = {
        ".json": evaluation.ReportFormat.JSON,
        ".csv": evaluation.ReportFormat.CSV,
    }.get(suffix, evaluation.ReportFormat.MARKDOWN)
    evaluation.render_report(report, fmt, report_path)
    m = report.aggregate
    click.echo(
        f"{model_kind}: accuracy {m.accuracy:.4f}, precision {m.precision:.4f}, "
        f"recall {m.recall:.4f}, f1 {m.f1:.4f} ({k_folds} folds) -> {report_path}"
    )


@main.command()
@click.option("--wav", "wav_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--letter", required=True)
@click.option("--models", "model_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def diagnose(wav_path, letter, model_dir, config_path):
    """Classify one clip; exit 0 for Correct, 1 for Incorrect."""
    from .service import load_model_registry

    cfg = _pipeline_cfg(config_path)
    registry = load_model_registry(model_dir)
    if letter not in registry:
        click.echo(f"error: no model for letter {letter!r} in {model_dir}", err=True)
        sys.exit(2)
    try:
        clip = load_wav(wav_path)
        vector = evaluation.clip_vector(clip, cfg)
    except SilenceOnlyError:
        click.echo("error: silence - could not hear any speech", err=True)
        sys.exit(4)
    except ClipTooShortError:
        click.echo("error: too-short - clip shorter than one analysis frame", err=True)
        sys.exit(4)
    except ArpaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    model = registry[letter]
    label, score = classifiers.predict(model, vector)
    click.echo(json.dumps({
        "letter_id": letter,
        "label": label.value,
        "score": score,
        "model": {"kind": model.kind, "version": 1},
    }))
    sys.exit(0 if label is dataset.Label.CORRECT else 1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def serve(config_path):
    """Run the diagnosis/progress HTTP service."""
    import uvicorn

    from .service import create_app, load_model_registry

    try:
        cfg = load_service_config(config_path)
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    if not load_model_registry(cfg.model_dir):
        click.echo(f"error: no loadable models in {cfg.model_dir!r}", err=True)
        sys.exit(2)
    app = create_app(cfg)
    click.echo(f"listening on http://{cfg.host}:{cfg.port}")
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")


if __name__ == "__main__":
    main()
