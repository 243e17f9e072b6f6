import json
import math
import os
import pathlib
import random

import pytest

import facelift

SOURCE_DIR = pathlib.Path(os.environ.get("FACELIFT_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


def test_corpus_is_deterministic():
    a = facelift.generate_corpus(3, 16, 16, seed=7)
    b = facelift.generate_corpus(3, 16, 16, seed=7)
    assert [s.to_json() for s in a] == [s.to_json() for s in b]
    assert all(len(s.labels) == 256 for s in a)
    assert math.isclose(sum(a[0].histogram().values()), 1.0)


def test_scene_metrics():
    sky = facelift.Scene("sky", 4, 4, [facelift.ELEMENTS.index("sky")] * 16)
    assert facelift.complexity(sky) == 0.0
    assert facelift.sky_bin(sky) == 5
    with pytest.raises(facelift.InvalidScene):
        facelift.Scene("bad", 2, 2, [0, 1, 2])


def test_trueskill_fresh_players():
    (w_mu, _), (l_mu, _) = facelift.trueskill_update()
    assert abs(w_mu - 29.2) < 0.1
    assert math.isclose(w_mu - 25.0, 25.0 - l_mu)


def test_rotation_round_trip_and_explanation():
    s = facelift.generate_corpus(2, 32, 32, seed=1)[0]
    back = facelift.rotate(facelift.rotate(s, 30.0), -30.0)
    assert back.labels == s.labels
    deltas, added, removed = facelift.explain(s, s)
    assert len(deltas) == 12
    assert all(d == 0.0 for _, d in deltas)
    assert added == [] and removed == []


def test_logistic_fit_and_divide_by_four():
    rng = random.Random(3)
    x, y = [], []
    for _ in range(400):
        a, b = rng.uniform(-1, 1), rng.uniform(-1, 1)
        z = 0.2 + 1.5 * a - 1.0 * b + 0.5 * a * b
        x.append([1.0, a, b, a * b])
        y.append(1 if rng.random() < 1.0 / (1.0 + math.exp(-z)) else 0)
    beta, converged, _ = facelift.fit_logistic(x, y)
    assert converged
    assert beta[1] > 0 > beta[2]
    assert facelift.divide_by_four(-0.032) == -0.008


def test_feature_index():
    idx = facelift.FeatureIndex(["a", "b", "c"], [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    assert len(idx) == 3
    assert idx.query([0.9, 0.0], 2) == [("b", pytest.approx(0.1)), ("a", pytest.approx(0.9))]


def test_pipeline_stages(tmp_path):
    cfg = json.loads(facelift.default_config())
    cfg["taxonomy"] = str(SOURCE_DIR / "config" / "taxonomy.json")
    cfg["corpus"]["count"] = 60
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg))
    ws = tmp_path / "ws"
    with pytest.raises(facelift.MissingArtifact):
        facelift.run_stage("rate", path, ws)
    facelift.run_stage("gen", path, ws)
    facelift.run_stage("rate", path, ws)
    assert (ws / "ratings" / "judgments.ndjson").exists()
    with pytest.raises(facelift.FingerprintMismatch):
        facelift.run_stage("rate", path, ws, seed=5)
    assert len(facelift.config_fingerprint(path)) == 16
