"""HTTP service: child profiles, audio diagnosis, game progress, reports.

State is an append-only JSON-lines event log per child (profile event first,
then one event per attempt), flushed and fsynced on every write, so a killed
process loses nothing; startup replays the logs. A compacted snapshot.json
is written on shutdown for quick inspection, but the logs stay the source
of truth.

The level rule is positive-reinforcement only: a Correct attempt raises the
letter's level by one, an Incorrect attempt leaves it unchanged, so a
child's level for a letter is exactly their count of Correct attempts.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse

from .audio_io import EmptyAudioError, NotWavError, UnsupportedEncodingError, load_wav_bytes
from .classifiers import TrainedModel, load_model, predict
from .config import ServiceConfig
from .dataset import Label
from .errors import ArpaError
from .evaluation import clip_vector
from .features import ClipTooShortError
from .preprocess import SilenceOnlyError

log = logging.getLogger("arpa.service")

GUARDIAN_ROLES = ("parent", "therapist")
GENDERS = ("female", "male", "unspecified")
MIN_AGE, MAX_AGE = 3, 12
PROGRESS_WINDOW = 5  # attempts per correct-rate window in reports


@dataclass
class ChildProfile:
    child_id: str
    display_name: str
    age_years: int
    guardian_role: str
    gender: str = "unspecified"


@dataclass
class Attempt:
    timestamp: float
    letter_id: str
    label: Label
    score: float
    model_kind: str


@dataclass
class ProgressRecord:
    child_id: str
    letter_id: str
    history: list[Attempt] = field(default_factory=list)

    @property
    def level(self) -> int:
        return sum(1 for a in self.history if a.label is Label.CORRECT)


class ProgressStore:
    """Durable child registry: one JSONL log per child under data_dir/children."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.children_dir = self.data_dir / "children"
        self.children_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._child_locks: dict[str, threading.Lock] = {}
        self.profiles: dict[str, ChildProfile] = {}
        self.records: dict[str, dict[str, ProgressRecord]] = {}
        self._replay()

    def _replay(self):
        for path in sorted(self.children_dir.glob("*.jsonl")):
            with open(path) as fh:
                for line in fh:
                    if line.strip():
                        self._apply(json.loads(line))

    def _apply(self, event: dict):
        if event["type"] == "profile":
            profile = ChildProfile(
                child_id=event["child_id"],
                display_name=event["display_name"],
                age_years=event["age_years"],
                guardian_role=event["guardian_role"],
                gender=event.get("gender", "unspecified"),
            )
            self.profiles[profile.child_id] = profile
            self.records.setdefault(profile.child_id, {})
        elif event["type"] == "attempt":
            per_letter = self.records.setdefault(event["child_id"], {})
            record = per_letter.setdefault(
                event["letter"], ProgressRecord(event["child_id"], event["letter"])
            )
            record.history.append(
                Attempt(
                    timestamp=event["ts"],
                    letter_id=event["letter"],
                    label=Label(event["label"]),
                    score=event["score"],
                    model_kind=event.get("model_kind", ""),
                )
            )

    def _append(self, child_id: str, event: dict):
        path = self.children_dir / f"{child_id}.jsonl"
        with open(path, "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _lock_for(self, child_id: str) -> threading.Lock:
        with self._lock:
            return self._child_locks.setdefault(child_id, threading.Lock())

    def add_child(self, display_name: str, age_years: int, guardian_role: str, gender: str) -> str:
        with self._lock:
            for p in self.profiles.values():
                if p.guardian_role == guardian_role and p.display_name == display_name:
                    raise KeyError(display_name)
            child_id = uuid.uuid4().hex
            event = {
                "type": "profile",
                "child_id": child_id,
                "display_name": display_name,
                "age_years": age_years,
                "guardian_role": guardian_role,
                "gender": gender,
            }
            self._append(child_id, event)
            self._apply(event)
            return child_id

    def record_attempt(self, child_id: str, letter_id: str, label: Label, score: float, model_kind: str) -> int:
        """Append an attempt and return the letter's new level."""
        with self._lock_for(child_id):
            per_letter = self.records[child_id]
            last = per_letter.get(letter_id)
            last_ts = last.history[-1].timestamp if last and last.history else 0.0
            ts = max(time.time(), last_ts)  # history timestamps stay nondecreasing
            event = {
                "type": "attempt",
                "child_id": child_id,
                "letter": letter_id,
                "ts": ts,
                "label": label.value,
                "score": score,
                "model_kind": model_kind,
            }
            self._append(child_id, event)
            self._apply(event)
            return per_letter[letter_id].level

    def progress(self, child_id: str) -> list[ProgressRecord]:
        return [self.records[child_id][letter] for letter in sorted(self.records[child_id])]

    def write_snapshot(self):
        snapshot = {
            "children": {
                cid: {
                    "display_name": p.display_name,
                    "age_years": p.age_years,
                    "guardian_role": p.guardian_role,
                    "gender": p.gender,
                    "levels": {letter: rec.level for letter, rec in self.records.get(cid, {}).items()},
                }
                for cid, p in self.profiles.items()
            }
        }
        tmp = self.data_dir / "snapshot.json.tmp"
        with open(tmp, "w") as fh:
            json.dump(snapshot, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, self.data_dir / "snapshot.json")


def load_model_registry(model_dir) -> dict[str, TrainedModel]:
    """Letter -> model, from every loadable model file; corrupt files are
    logged and skipped."""
    registry: dict[str, TrainedModel] = {}
    model_dir = Path(model_dir)
    if not model_dir.is_dir():
        return registry
    for path in sorted(model_dir.glob("*.json")):
        try:
            model = load_model(path)
        except ArpaError as exc:
            log.warning("skipping model file %s: %s", path, exc)
            continue
        if model.letter_id:
            registry[model.letter_id] = model
        else:
            log.warning("skipping model file %s: no letter tag", path)
    return registry


def _error(status: int, detail: str, **extra) -> JSONResponse:
    return JSONResponse({"detail": detail, **extra}, status_code=status)


def child_report(store: ProgressStore, child_id: str) -> dict:
    """Deterministic per-letter report document (no generation timestamps)."""
    profile = store.profiles[child_id]
    letters = []
    for record in store.progress(child_id):
        trajectory = []
        level = 0
        for a in record.history:
            level += a.label is Label.CORRECT
            trajectory.append(level)
        window_rates = []
        for start in range(0, len(record.history), PROGRESS_WINDOW):
            chunk = record.history[start : start + PROGRESS_WINDOW]
            window_rates.append(sum(a.label is Label.CORRECT for a in chunk) / len(chunk))
        n_correct = sum(a.label is Label.CORRECT for a in record.history)
        letters.append(
            {
                "letter_id": record.letter_id,
                "level": record.level,
                "attempts": len(record.history),
                "correct": n_correct,
                "correct_rate": n_correct / len(record.history) if record.history else 0.0,
                "level_trajectory": trajectory,
                "window_rates": window_rates,
                "window_size": PROGRESS_WINDOW,
            }
        )
    return {
        "child_id": child_id,
        "display_name": profile.display_name,
        "age_years": profile.age_years,
        "letters": letters,
    }


def report_markdown(doc: dict) -> str:
    lines = [
        f"# Progress report: {doc['display_name']}",
        "",
        f"Age {doc['age_years']}.",
        "",
        "| Letter | Level | Attempts | Correct | Correct rate |",
        "|--------|-------|----------|---------|--------------|",
    ]
    for letter in doc["letters"]:
        lines.append(
            f"| {letter['letter_id']} | {letter['level']} | {letter['attempts']} "
            f"| {letter['correct']} | {letter['correct_rate'] * 100:.1f}% |"
        )
    if not doc["letters"]:
        lines.append("| (no attempts yet) | | | | |")
    lines.append("")
    return "\n".join(lines)


def create_app(cfg: ServiceConfig) -> FastAPI:
    registry = load_model_registry(cfg.model_dir)
    store = ProgressStore(cfg.data_dir)

    @asynccontextmanager
    async def lifespan(_app):
        yield
        store.write_snapshot()  # graceful shutdown compacts the event logs

    app = FastAPI(title="arpa diagnose service", lifespan=lifespan)
    app.state.registry = registry
    app.state.store = store
    app.state.cfg = cfg

    logging.basicConfig(stream=sys.stderr, level=logging.INFO)

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        start = time.monotonic()
        response = await call_next(request)
        log.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "ms": round((time.monotonic() - start) * 1000, 1),
                }
            )
        )
        return response

    def auth_failure(request: Request) -> JSONResponse | None:
        if not cfg.auth_tokens:
            return None
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip()
        if token and token in cfg.auth_tokens.values():
            return None
        return _error(401, "missing or invalid bearer token")

    @app.post("/api/v1/children", status_code=201)
    def create_child(request: Request, payload: dict = Body(...)):
        if denied := auth_failure(request):
            return denied
        display_name = payload.get("display_name")
        age = payload.get("age_years")
        role = payload.get("guardian_role")
        gender = payload.get("gender", "unspecified")
        if not isinstance(display_name, str) or not display_name.strip():
            return _error(400, "display_name must be a non-empty string")
        if not isinstance(age, int) or isinstance(age, bool) or not MIN_AGE <= age <= MAX_AGE:
            return _error(400, f"age_years must be an integer in [{MIN_AGE}, {MAX_AGE}]")
        if role not in GUARDIAN_ROLES:
            return _error(400, f"guardian_role must be one of {GUARDIAN_ROLES}")
        if gender not in GENDERS:
            return _error(400, f"gender must be one of {GENDERS}")
        try:
            child_id = store.add_child(display_name.strip(), age, role, gender)
        except KeyError:
            return _error(409, f"a child named {display_name!r} already exists for this guardian")
        return JSONResponse({"child_id": child_id}, status_code=201)

    @app.post("/api/v1/diagnose")
    def diagnose(
        request: Request,
        file: UploadFile = File(...),
        letter_id: str = Form(...),
        child_id: str | None = Form(None),
    ):
        if denied := auth_failure(request):
            return denied
        if letter_id not in registry:
            return _error(404, f"no model for letter {letter_id!r}")
        if child_id is not None and child_id not in store.profiles:
            return _error(404, f"unknown child {child_id!r}")
        raw = file.file.read()
        if len(raw) > cfg.max_upload_bytes:
            return _error(413, "upload exceeds size limit")
        try:
            clip = load_wav_bytes(raw)
        except (NotWavError, UnsupportedEncodingError, EmptyAudioError) as exc:
            return _error(400, f"bad audio: {exc}")
        if clip.duration_s > cfg.max_audio_seconds:
            return _error(413, f"audio longer than {cfg.max_audio_seconds} s")
        model = registry[letter_id]
        try:
            vector = clip_vector(clip, cfg.pipeline)
        except SilenceOnlyError:
            return _error(422, "could not hear any speech", reason="silence")
        except ClipTooShortError:
            return _error(422, "clip too short to analyze", reason="too-short")
        label, score = predict(model, vector)
        level = None
        if child_id is not None:
            level = store.record_attempt(child_id, letter_id, label, score, model.kind)
        return {
            "letter_id": letter_id,
            "label": label.value,
            "score": score,
            "model": {"kind": model.kind, "version": 1},
            "level": level,
        }

    @app.get("/api/v1/children/{child_id}/progress")
    def progress(child_id: str, request: Request):
        if denied := auth_failure(request):
            return denied
        if child_id not in store.profiles:
            return _error(404, f"unknown child {child_id!r}")
        return [
            {
                "letter_id": r.letter_id,
                "level": r.level,
                "history": [
                    {"timestamp": a.timestamp, "label": a.label.value, "score": a.score}
                    for a in r.history
                ],
            }
            for r in store.progress(child_id)
        ]

    @app.get("/api/v1/children/{child_id}/report")
    def report(child_id: str, request: Request, format: str = "json"):
        if denied := auth_failure(request):
            return denied
        if child_id not in store.profiles:
            return _error(404, f"unknown child {child_id!r}")
        doc = child_report(store, child_id)
        if format == "markdown":
            return PlainTextResponse(report_markdown(doc), media_type="text/markdown")
        if format != "json":
            return _error(400, "format must be json or markdown")
        return JSONResponse(json.loads(json.dumps(doc, sort_keys=True)))

    @app.get("/api/v1/letters")
    def letters(request: Request):
        if denied := auth_failure(request):
            return denied
        return {"letters": sorted(registry)}

    return app
