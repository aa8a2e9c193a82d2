import pytest
from fastapi.testclient import TestClient

from ddipred.config import RunConfig
from ddipred.service import create_app
from ddipred.synthetic import SyntheticSpec, generate
from ddipred.train import train


@pytest.fixture(scope="module")
def client_and_dataset():
    ds, splits, _ = generate(
        SyntheticSpec(num_drugs=14, num_genes=30, num_hub_genes=1,
                      genes_per_drug=5, seed=11)
    )
    cfg = RunConfig(k=1, p=2, dim=8, layers=1, iterations=1, node_cap=16,
                    max_epochs=1, patience=2, dropout=0.0, batch_size=32,
                    seed=1, lr=0.02, gamma=0.02)
    res = train(ds, cfg)
    app = create_app(res.model, ds)
    return TestClient(app), ds


def _some_pair(ds):
    t = ds.splits.test[0]
    return ds.node_vocab.label(t.head), ds.node_vocab.label(t.tail)


def test_health(client_and_dataset):
    client, ds = client_and_dataset
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["task"] == "multiclass"
    assert body["num_nodes"] == ds.network.num_nodes


def test_predict_scores_and_top_relation(client_and_dataset):
    client, ds = client_and_dataset
    h, t = _some_pair(ds)
    r = client.post("/predict", json={"pairs": [{"head": h, "tail": t}]})
    assert r.status_code == 200
    body = r.json()
    assert body["task"] == "multiclass"
    (pred,) = body["predictions"]
    assert pred["head"] == h and pred["tail"] == t
    assert pred["relation"] in pred["scores"]
    total = sum(pred["scores"].values())
    assert abs(total - 1.0) < 1e-6
    assert pred["scores"][pred["relation"]] == max(pred["scores"].values())


def test_predict_batch(client_and_dataset):
    client, ds = client_and_dataset
    pairs = [
        {"head": ds.node_vocab.label(t.head), "tail": ds.node_vocab.label(t.tail)}
        for t in ds.splits.test[:3]
    ]
    r = client.post("/predict", json={"pairs": pairs})
    assert r.status_code == 200
    assert len(r.json()["predictions"]) == 3


def test_predict_unknown_node_404_with_suggestions(client_and_dataset):
    client, ds = client_and_dataset
    h, _ = _some_pair(ds)
    r = client.post("/predict", json={"pairs": [{"head": h, "tail": "drug9x"}]})
    assert r.status_code == 404
    assert "closest" in r.json()["detail"]


def test_predict_malformed_body_422(client_and_dataset):
    client, _ = client_and_dataset
    r = client.post("/predict", json={"pairs": [{"head": "a"}]})
    assert r.status_code == 422


def test_explain_paths_and_dot(client_and_dataset):
    client, ds = client_and_dataset
    h, t = _some_pair(ds)
    r = client.post("/explain", json={"head": h, "tail": t, "max_paths": 5})
    assert r.status_code == 200
    body = r.json()
    assert body["head"] == h and body["tail"] == t
    assert body["dot"].startswith("digraph")
    assert len(body["paths"]) <= 5
    for p in body["paths"]:
        assert p["hops"][0]["source"] == h
        assert p["hops"][-1]["target"] == t
        for hop in p["hops"]:
            assert 0.0 < hop["strength"] <= 1.0
