"""One config document for the whole pipeline, shared by the CLI and the
service. JSON file with flag/env overrides; flags win over file, file wins
over defaults."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

from .errors import ArpaError
from .features import FrameSpec
from .preprocess import PreprocessConfig


class ConfigError(ArpaError):
    """Config file is unreadable or contains an unknown/invalid field."""


@dataclass
class PipelineConfig:
    sample_rate_hz: int = 16000
    pre_emphasis_alpha: float = 0.97
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 40
    n_mfcc: int = 13
    mel_low_hz: float = 0.0
    mel_high_hz: float | None = None  # None -> sample_rate / 2
    gaussian_sigma_samples: float = 2.0
    kernel_radius: int | None = None
    silence_threshold_db: float = -40.0
    silence_frame_ms: float = 10.0
    seed: int = 0

    def __post_init__(self):
        # delegate range checks to the owning modules
        self.preprocess
        self.frames
        if not 0.0 <= self.pre_emphasis_alpha < 1.0:
            raise ConfigError("pre_emphasis_alpha must be in [0, 1)")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.n_mels < 1 or self.n_mfcc < 1 or self.n_mfcc > self.n_mels:
            raise ConfigError("need 1 <= n_mfcc <= n_mels")

    @property
    def preprocess(self) -> PreprocessConfig:
        try:
            return PreprocessConfig(
                gaussian_sigma_samples=self.gaussian_sigma_samples,
                kernel_radius=self.kernel_radius,
                silence_threshold_db=self.silence_threshold_db,
                silence_frame_ms=self.silence_frame_ms,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def frames(self) -> FrameSpec:
        try:
            return FrameSpec(frame_ms=self.frame_ms, hop_ms=self.hop_ms)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8077
    model_dir: str = "models"
    data_dir: str = "data"
    auth_tokens: dict = field(default_factory=dict)  # role name -> bearer token
    max_upload_bytes: int = 10 * 1024 * 1024
    max_audio_seconds: float = 30.0
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


_ENV_OVERRIDES = {
    "ARPA_HOST": "host",
    "ARPA_PORT": "port",
    "ARPA_MODEL_DIR": "model_dir",
    "ARPA_DATA_DIR": "data_dir",
}


def _build(cls, doc: dict, what: str):
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown {what} field(s): {', '.join(sorted(unknown))}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what} config: {exc}") from exc


def load_pipeline_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    doc = {}
    if path is not None:
        doc = _read_json(path).get("pipeline", {})
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return _build(PipelineConfig, doc, "pipeline")


def load_service_config(path=None, env: dict | None = None) -> ServiceConfig:
    raw = _read_json(path) if path is not None else {}
    doc = dict(raw.get("service", {}))
    pipeline = load_pipeline_config(path) if path is not None else PipelineConfig()
    env = os.environ if env is None else env
    for var, name in _ENV_OVERRIDES.items():
        if var in env:
            doc[name] = int(env[var]) if name == "port" else env[var]
    for role in ("parent", "therapist"):
        var = f"ARPA_{role.upper()}_TOKEN"
        if var in env:
            doc.setdefault("auth_tokens", {})
            doc["auth_tokens"] = {**doc["auth_tokens"], role: env[var]}
    doc["pipeline"] = pipeline
    return _build(ServiceConfig, doc, "service")


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc
