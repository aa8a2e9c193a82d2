"""FastAPI service wrapping a trained model for predict/explain queries."""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from ..encoder import generic_embeddings
from ..explain import enumerate_explaining_paths, export_dot
from ..graph import Dataset
from ..train import Model, SubgraphCache, UnknownNodeError, forward_pair, resolve_pair
from .schemas import (
    ExplainingPathModel,
    ExplainRequest,
    ExplainResponse,
    HealthResponse,
    PairPrediction,
    PathHop,
    PredictRequest,
    PredictResponse,
)


def create_app(model: Model, dataset: Dataset) -> FastAPI:
    app = FastAPI(title="ddipred", version="0.1.0")
    cache = SubgraphCache(dataset, model.config)
    generic = generic_embeddings(dataset.network, model.encoder_params, train=False)
    rel_labels = [dataset.rel_vocab.label(r) for r in model.class_rels]

    def _forward(head: str, tail: str):
        try:
            pair = resolve_pair(dataset, head, tail)
        except UnknownNodeError as e:
            raise HTTPException(status_code=404, detail=str(e)) from None
        return forward_pair(
            model, cache, generic, pair[0], pair[1], dataset.network.resemble_rel
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            status="ok",
            task=model.config.task,
            num_nodes=dataset.network.num_nodes,
            num_relations=dataset.network.num_relations,
        )

    @app.post("/predict", response_model=PredictResponse)
    def predict_pairs(req: PredictRequest):
        preds = []
        for pair in req.pairs:
            yhat, _ = _forward(pair.head, pair.tail)
            scores = {lab: float(s) for lab, s in zip(rel_labels, yhat.data)}
            top = rel_labels[int(np.argmax(yhat.data))] if model.config.task == "multiclass" else None
            preds.append(
                PairPrediction(head=pair.head, tail=pair.tail, relation=top, scores=scores)
            )
        return PredictResponse(task=model.config.task, predictions=preds)

    @app.post("/explain", response_model=ExplainResponse)
    def explain_pair(req: ExplainRequest):
        _, ks = _forward(req.head, req.tail)
        paths = enumerate_explaining_paths(ks, model.config.p, req.max_paths)
        out = []
        for p in paths:
            hops = [
                PathHop(
                    source=dataset.node_vocab.label(ks.base.nodes[u]),
                    relation=dataset.rel_vocab.label(rel),
                    target=dataset.node_vocab.label(ks.base.nodes[v]),
                    strength=strength,
                    is_new=is_new,
                )
                for (rel, strength, is_new), u, v in zip(p.hops, p.nodes[:-1], p.nodes[1:])
            ]
            out.append(ExplainingPathModel(avg_strength=p.avg_strength, hops=hops))
        return ExplainResponse(
            head=req.head,
            tail=req.tail,
            paths=out,
            dot=export_dot(ks, dataset.network, paths),
        )

    return app
