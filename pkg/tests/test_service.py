import json
import struct

import numpy as np
import pytest
from fastapi.testclient import TestClient

from arpa.audio_io import AudioClip
from arpa.classifiers import train_knn, save_model
from arpa.config import PipelineConfig, ServiceConfig
from arpa.dataset import Label
from arpa.evaluation import manifest_vectors
from arpa.service import ProgressStore, create_app, load_model_registry


def wav_payload(clip: AudioClip) -> bytes:
    import io

    buf = io.BytesIO()
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2").tobytes()
    buf.write(b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE")
    buf.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate_hz, clip.sample_rate_hz * 2, 2, 16))
    buf.write(b"data" + struct.pack("<I", len(pcm)) + pcm)
    return buf.getvalue()


@pytest.fixture(scope="module")
def trained_models(tmp_path_factory, small_corpus):
    model_dir = tmp_path_factory.mktemp("models")
    vectors = manifest_vectors(small_corpus, PipelineConfig())
    by_letter = {}
    for v in vectors:
        by_letter.setdefault(v.letter_id, []).append(v)
    for letter, group in by_letter.items():
        save_model(train_knn(group, k=5, letter_id=letter), model_dir / f"{letter}.knn.json")
    return model_dir


@pytest.fixture
def service(tmp_path, trained_models):
    cfg = ServiceConfig(model_dir=str(trained_models), data_dir=str(tmp_path / "data"))
    app = create_app(cfg)
    with TestClient(app) as client:
        yield client, cfg


def register(client, name="Sami", age=6, role="parent"):
    response = client.post(
        "/api/v1/children",
        json={"display_name": name, "age_years": age, "guardian_role": role},
    )
    return response


def correct_clip(letter="raa"):
    """A fresh clip drawn from the letter's correct template."""
    from arpa.dataset import _synth_clip, default_recipe

    rng = np.random.default_rng(777)
    return _synth_clip(default_recipe()[letter]["correct"], rng)


def incorrect_clip(letter="raa"):
    from arpa.dataset import _synth_clip, default_recipe

    rng = np.random.default_rng(778)
    return _synth_clip(default_recipe()[letter]["incorrect"], rng)


def diagnose(client, clip, letter="raa", child_id=None):
    data = {"letter_id": letter}
    if child_id:
        data["child_id"] = child_id
    return client.post(
        "/api/v1/diagnose",
        files={"file": ("clip.wav", wav_payload(clip), "audio/wav")},
        data=data,
    )


# --- children ---------------------------------------------------------------


def test_register_valid(service):
    client, _ = service
    response = register(client)
    assert response.status_code == 201
    assert response.json()["child_id"]


def test_register_bad_age(service):
    client, _ = service
    assert register(client, age=99).status_code == 400


def test_register_bad_role_and_name(service):
    client, _ = service
    assert register(client, role="stranger").status_code == 400
    assert register(client, name="  ").status_code == 400


def test_register_duplicate_same_guardian(service):
    client, _ = service
    assert register(client, name="Twin").status_code == 201
    assert register(client, name="Twin").status_code == 409
    assert register(client, name="Twin", role="therapist").status_code == 201


# --- diagnose ---------------------------------------------------------------


def test_diagnose_correct_fixture_increments_level(service):
    client, _ = service
    child_id = register(client).json()["child_id"]
    response = diagnose(client, correct_clip(), child_id=child_id)
    assert response.status_code == 200
    body = response.json()
    assert body["label"] == "correct"
    assert body["level"] == 1
    assert 0.0 <= body["score"] <= 1.0
    assert body["model"]["kind"] == "knn"


def test_diagnose_incorrect_fixture(service):
    client, _ = service
    response = diagnose(client, incorrect_clip())
    assert response.status_code == 200
    assert response.json()["label"] == "incorrect"
    assert response.json()["level"] is None


def test_diagnose_silence_422(service):
    client, _ = service
    silent = AudioClip(np.zeros(16000), 16000)
    response = diagnose(client, silent)
    assert response.status_code == 422
    assert response.json()["reason"] == "silence"


def test_diagnose_unknown_letter_404(service):
    client, _ = service
    assert diagnose(client, correct_clip(), letter="zz").status_code == 404


def test_diagnose_unknown_child_404(service):
    client, _ = service
    assert diagnose(client, correct_clip(), child_id="nope").status_code == 404


def test_diagnose_bad_audio_400(service):
    client, _ = service
    response = client.post(
        "/api/v1/diagnose",
        files={"file": ("x.wav", b"this is not audio", "audio/wav")},
        data={"letter_id": "raa"},
    )
    assert response.status_code == 400


def test_diagnose_oversize_413(service):
    client, cfg = service
    too_long = AudioClip(np.full(16000 * 31, 0.1), 16000)
    assert diagnose(client, too_long).status_code == 413


def test_diagnose_stateless_wrt_history(service):
    client, _ = service
    clip = correct_clip()
    first = diagnose(client, clip).json()
    child_id = register(client, name="Stateless").json()["child_id"]
    diagnose(client, incorrect_clip(), child_id=child_id)
    second = diagnose(client, clip).json()
    assert (first["label"], first["score"]) == (second["label"], second["score"])


# --- progress & report --------------------------------------------------------


def test_progress_empty_for_new_child(service):
    client, _ = service
    child_id = register(client, name="Nobody").json()["child_id"]
    response = client.get(f"/api/v1/children/{child_id}/progress")
    assert response.status_code == 200
    assert response.json() == []


def test_progress_level_rule(service):
    client, _ = service
    child_id = register(client, name="Counter").json()["child_id"]
    for _ in range(3):
        diagnose(client, correct_clip(), child_id=child_id)
    for _ in range(2):
        diagnose(client, incorrect_clip(), child_id=child_id)
    records = client.get(f"/api/v1/children/{child_id}/progress").json()
    assert len(records) == 1
    assert records[0]["level"] == 3
    assert len(records[0]["history"]) == 5
    timestamps = [a["timestamp"] for a in records[0]["history"]]
    assert timestamps == sorted(timestamps)


def test_progress_two_letters(service):
    client, _ = service
    child_id = register(client, name="Two").json()["child_id"]
    diagnose(client, correct_clip("raa"), "raa", child_id)
    diagnose(client, correct_clip("ghaa"), "ghaa", child_id)
    records = client.get(f"/api/v1/children/{child_id}/progress").json()
    assert [r["letter_id"] for r in records] == ["ghaa", "raa"]


def test_progress_unknown_child(service):
    client, _ = service
    assert client.get("/api/v1/children/missing/progress").status_code == 404


def test_report_empty(service):
    client, _ = service
    child_id = register(client, name="Fresh").json()["child_id"]
    doc = client.get(f"/api/v1/children/{child_id}/report").json()
    assert doc["letters"] == []


def test_report_deterministic_and_monotone(service):
    client, _ = service
    child_id = register(client, name="Mono").json()["child_id"]
    for i in range(6):
        clip = correct_clip() if i % 2 == 0 else incorrect_clip()
        diagnose(client, clip, child_id=child_id)
    first = client.get(f"/api/v1/children/{child_id}/report").content
    second = client.get(f"/api/v1/children/{child_id}/report").content
    assert first == second
    doc = json.loads(first)
    trajectory = doc["letters"][0]["level_trajectory"]
    assert all(b >= a for a, b in zip(trajectory, trajectory[1:]))
    assert trajectory[-1] == doc["letters"][0]["level"]


def test_report_markdown(service):
    client, _ = service
    child_id = register(client, name="Print").json()["child_id"]
    diagnose(client, correct_clip(), child_id=child_id)
    response = client.get(f"/api/v1/children/{child_id}/report", params={"format": "markdown"})
    assert response.headers["content-type"].startswith("text/markdown")
    assert "| raa |" in response.text


# --- letters -------------------------------------------------------------------


def test_letters_endpoint(service):
    client, _ = service
    assert client.get("/api/v1/letters").json() == {"letters": ["ghaa", "raa", "thaa"]}


def test_letters_empty_dir(tmp_path):
    cfg = ServiceConfig(model_dir=str(tmp_path / "none"), data_dir=str(tmp_path / "data"))
    with TestClient(create_app(cfg)) as client:
        assert client.get("/api/v1/letters").json() == {"letters": []}


def test_corrupt_model_skipped(tmp_path, trained_models):
    model_dir = tmp_path / "models"
    model_dir.mkdir()
    for src in trained_models.glob("*.json"):
        (model_dir / src.name).write_bytes(src.read_bytes())
    (model_dir / "broken.knn.json").write_text("{truncated")
    registry = load_model_registry(model_dir)
    assert sorted(registry) == ["ghaa", "raa", "thaa"]


# --- durability & auth ----------------------------------------------------------


def test_store_replay_matches_live_state(tmp_path):
    store = ProgressStore(tmp_path)
    child_id = store.add_child("Replay", 7, "therapist", "female")
    script = [Label.CORRECT, Label.INCORRECT, Label.CORRECT, Label.CORRECT, Label.INCORRECT]
    for label in script:
        store.record_attempt(child_id, "raa", label, 0.75, "knn")
    reborn = ProgressStore(tmp_path)
    assert reborn.profiles.keys() == store.profiles.keys()
    assert reborn.records[child_id]["raa"].level == 3
    original = [(a.timestamp, a.label, a.score) for a in store.records[child_id]["raa"].history]
    replayed = [(a.timestamp, a.label, a.score) for a in reborn.records[child_id]["raa"].history]
    assert original == replayed


def test_snapshot_written(tmp_path):
    store = ProgressStore(tmp_path)
    child_id = store.add_child("Snap", 5, "parent", "unspecified")
    store.record_attempt(child_id, "ghaa", Label.CORRECT, 0.9, "knn")
    store.write_snapshot()
    snapshot = json.loads((tmp_path / "snapshot.json").read_text())
    assert snapshot["children"][child_id]["levels"] == {"ghaa": 1}


def test_auth_required_when_configured(tmp_path, trained_models):
    cfg = ServiceConfig(
        model_dir=str(trained_models),
        data_dir=str(tmp_path / "data"),
        auth_tokens={"parent": "sekrit"},
    )
    with TestClient(create_app(cfg)) as client:
        assert client.get("/api/v1/letters").status_code == 401
        ok = client.get("/api/v1/letters", headers={"Authorization": "Bearer sekrit"})
        assert ok.status_code == 200
