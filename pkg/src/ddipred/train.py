"""Losses, negative sampling, Adam, the training loop, and inference."""
from __future__ import annotations

import random
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import RunConfig
from .encoder import EncoderParams, generic_embeddings
from .graph import Dataset, FactTriplet
from .learner import (
    KnowledgeSubgraph,
    LearnerParams,
    Support,
    build_support,
    generate_knowledge_subgraph,
    predict,
)
from .subgraph import DrugFlowSubgraph, extract_for_mode

EPS = 1e-12


class NumericalError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# losses


def multiclass_loss(yhats: list[T.Tensor], classes: list[int], reduction: str = "sum") -> T.Tensor:
    """Sum over the batch of -y . log(yhat) with one-hot targets."""
    terms = [
        T.log(T.clip(T.gather_rows(yhat, [ci]), EPS, 1.0))
        for yhat, ci in zip(yhats, classes)
    ]
    total = T.mul(T.sum_all(T.concat_last(terms)), T.Tensor(-1.0))
    if reduction == "mean":
        total = T.mul(total, T.Tensor(1.0 / max(1, len(terms))))
    return total


def multilabel_loss(
    positives: list[tuple[T.Tensor, np.ndarray]],
    negatives: list[T.Tensor],
    reduction: str = "sum",
) -> T.Tensor:
    """Cross entropy over known relations plus -1 . log(1 - yhat) on negatives."""
    terms: list[T.Tensor] = []
    for yhat, y in positives:
        picked = T.mul(T.Tensor(y), T.log(T.clip(yhat, EPS, 1.0)))
        terms.append(T.reshape(T.sum_all(picked), (1,)))
    for yhat in negatives:
        comp = T.log(T.clip(T.sub(T.Tensor(1.0), yhat), EPS, 1.0))
        terms.append(T.reshape(T.sum_all(comp), (1,)))
    total = T.mul(T.sum_all(T.concat_last(terms)), T.Tensor(-1.0))
    if reduction == "mean":
        total = T.mul(total, T.Tensor(1.0 / max(1, len(positives) + len(negatives))))
    return total


# ---------------------------------------------------------------------------
# negative sampling


def sample_negatives(
    triples: list[FactTriplet],
    drug_ids: list[int],
    known: set[tuple[int, int, int]],
    seed: int,
) -> list[FactTriplet]:
    """One negative per positive: tail replaced by a random drug such that
    the corrupted triple is not a known DDI fact."""
    rng = random.Random(seed)
    out: list[FactTriplet] = []
    for t in triples:
        neg = None
        for _ in range(100):
            w = rng.choice(drug_ids)
            if w != t.head and (t.head, t.relation, w) not in known:
                neg = FactTriplet(t.head, t.relation, w)
                break
        if neg is None:
            # exhaustive fallback; a head covering every drug gets skipped
            candidates = [
                w for w in drug_ids if w != t.head and (t.head, t.relation, w) not in known
            ]
            if not candidates:
                warnings.warn(
                    f"no negative tail available for head={t.head}, relation={t.relation}; skipped"
                )
                continue
            neg = FactTriplet(t.head, t.relation, rng.choice(candidates))
        out.append(neg)
    return out


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Adam with decoupled weight decay."""

    def __init__(
        self,
        named_params: list[tuple[str, T.Tensor]],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = named_params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in named_params}
        self.v = {name: np.zeros_like(p.data) for name, p in named_params}

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


# ---------------------------------------------------------------------------
# model


@dataclass
class Model:
    config: RunConfig
    encoder_params: EncoderParams
    learner_params: LearnerParams
    class_rels: list[int]  # class index -> global DDI relation id

    @staticmethod
    def init(config: RunConfig, dataset: Dataset) -> "Model":
        rng = np.random.default_rng(config.seed)
        class_rels = dataset.ddi_relation_ids
        return Model(
            config=config,
            encoder_params=EncoderParams.init(
                rng, dataset.network.num_nodes, config.dim, config.layers
            ),
            learner_params=LearnerParams.init(
                rng, dataset.network.num_relations, config.dim, len(class_rels)
            ),
            class_rels=class_rels,
        )

    def named_tensors(self) -> list[tuple[str, T.Tensor]]:
        return self.encoder_params.named_tensors() + self.learner_params.named_tensors()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_tensors()}

    def restore(self, snap: dict[str, np.ndarray]):
        for name, p in self.named_tensors():
            p.data[...] = snap[name]

    def class_index(self) -> dict[int, int]:
        return {r: i for i, r in enumerate(self.class_rels)}


class SubgraphCache:
    """Per-pair drug-flow subgraphs and supports, extracted once per run."""

    def __init__(self, dataset: Dataset, config: RunConfig):
        self.dataset = dataset
        self.config = config
        self._cache: dict[tuple[int, int], tuple[DrugFlowSubgraph, Support]] = {}

    def _build(self, pair: tuple[int, int]) -> tuple[DrugFlowSubgraph, Support]:
        cfg = self.config
        dfs = extract_for_mode(
            self.dataset.network,
            pair[0],
            pair[1],
            cfg.subgraph_mode,
            cfg.k,
            cfg.p,
            cfg.node_cap,
            seed=cfg.seed,
        )
        support = build_support(
            dfs,
            self.dataset.network.resemble_rel,
            use_resemble=cfg.subgraph_mode == "knowledge",
        )
        return dfs, support

    def get(self, h: int, t: int) -> tuple[DrugFlowSubgraph, Support]:
        key = (h, t)
        if key not in self._cache:
            self._cache[key] = self._build(key)
        return self._cache[key]

    def prefetch(self, pairs: list[tuple[int, int]], threads: int = 1):
        todo = sorted({p for p in pairs if p not in self._cache})
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                built = list(pool.map(self._build, todo))
        else:
            built = [self._build(p) for p in todo]
        for pair, value in zip(todo, built):
            self._cache[pair] = value


def forward_pair(
    model: Model,
    cache: SubgraphCache,
    generic: T.Tensor,
    h: int,
    t: int,
    resemble_rel: int,
) -> tuple[T.Tensor, KnowledgeSubgraph]:
    cfg = model.config
    dfs, support = cache.get(h, t)
    ks = generate_knowledge_subgraph(
        dfs,
        generic,
        model.learner_params,
        resemble_rel,
        cfg.alpha,
        cfg.gamma,
        cfg.iterations,
        mode=cfg.subgraph_mode,
        support=support,
    )
    return predict(ks, cfg.task, model.learner_params), ks


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: Model
    history: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    epochs_run: int = 0


def _pair_labels(triples: list[FactTriplet], num_classes: int, class_index: dict[int, int]):
    by_pair: dict[tuple[int, int], np.ndarray] = {}
    for t in triples:
        vec = by_pair.setdefault((t.head, t.tail), np.zeros(num_classes))
        vec[class_index[t.relation]] = 1.0
    return by_pair


def _batch_loss(
    model: Model,
    dataset: Dataset,
    cache: SubgraphCache,
    triples: list[FactTriplet],
    negatives: list[FactTriplet],
    generic: T.Tensor,
    pair_labels: dict[tuple[int, int], np.ndarray] | None,
) -> T.Tensor:
    cfg = model.config
    cidx = model.class_index()
    resemble = dataset.network.resemble_rel
    if cfg.task == "multiclass":
        yhats, classes = [], []
        for t in triples:
            yhat, _ = forward_pair(model, cache, generic, t.head, t.tail, resemble)
            yhats.append(yhat)
            classes.append(cidx[t.relation])
        return multiclass_loss(yhats, classes, cfg.loss_reduction)
    pos, seen = [], set()
    for t in triples:
        pair = (t.head, t.tail)
        if pair in seen:
            continue  # one term per pair; the label vector covers all relations
        seen.add(pair)
        yhat, _ = forward_pair(model, cache, generic, *pair, resemble)
        pos.append((yhat, pair_labels[pair]))
    neg = []
    for t in negatives:
        yhat, _ = forward_pair(model, cache, generic, t.head, t.tail, resemble)
        neg.append(yhat)
    return multilabel_loss(pos, neg, cfg.loss_reduction)


def train(dataset: Dataset, config: RunConfig, log=None, diag_dir: str | Path | None = None) -> TrainResult:
    """Adam training with early stopping on validation loss."""
    config.validate()
    model = Model.init(config, dataset)
    cache = SubgraphCache(dataset, config)
    net = dataset.network
    cidx = model.class_index()
    num_classes = len(model.class_rels)
    known = {
        (t.head, t.relation, t.tail)
        for t in dataset.splits.train + dataset.splits.valid + dataset.splits.test
    }
    drug_ids = dataset.drug_node_ids

    train_triples = list(dataset.splits.train)
    valid_triples = list(dataset.splits.valid)
    cache.prefetch([(t.head, t.tail) for t in train_triples + valid_triples], config.threads)

    pair_labels = None
    valid_pair_labels = None
    if config.task == "multilabel":
        pair_labels = _pair_labels(train_triples, num_classes, cidx)
        valid_pair_labels = _pair_labels(valid_triples, num_classes, cidx)
        valid_negatives = sample_negatives(valid_triples, drug_ids, known, config.seed + 10_000)
        cache.prefetch([(t.head, t.tail) for t in valid_negatives], config.threads)
    else:
        valid_negatives = []

    opt = Adam(
        model.named_tensors(),
        lr=config.lr,
        weight_decay=config.weight_decay,
    )
    dropout_rng = np.random.default_rng(config.seed + 1)

    result = TrainResult(model=model)
    best_snapshot = model.snapshot()
    bad_epochs = 0
    base_negatives = None

    for epoch in range(config.max_epochs):
        order = list(range(len(train_triples)))
        random.Random(config.seed + 31 * epoch).shuffle(order)
        epoch_loss = 0.0
        if config.task == "multilabel":
            if config.resample_negatives or base_negatives is None:
                base_negatives = sample_negatives(
                    train_triples, drug_ids, known, config.seed + 101 * epoch
                )
                cache.prefetch([(t.head, t.tail) for t in base_negatives], config.threads)
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = [train_triples[i] for i in idx]
            negatives = [base_negatives[i] for i in idx] if config.task == "multilabel" else []
            opt.zero_grad()
            generic = generic_embeddings(
                net, model.encoder_params, train=True,
                dropout_rate=config.dropout, rng=dropout_rng,
            )
            loss = _batch_loss(model, dataset, cache, batch, negatives, generic, pair_labels)
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                _dump_bad_batch(diag_dir, epoch, batch, loss_val)
                raise NumericalError(
                    f"non-finite loss {loss_val} at epoch {epoch}; offending batch of "
                    f"{len(batch)} triples"
                    + (f" dumped under {diag_dir}" if diag_dir else "")
                )
            T.backward(loss)
            opt.step()
            epoch_loss += loss_val

        generic = generic_embeddings(net, model.encoder_params, train=False)
        val_loss = _batch_loss(
            model, dataset, cache, valid_triples, valid_negatives, generic, valid_pair_labels
        ).item()
        result.history.append((epoch, epoch_loss, val_loss))
        result.epochs_run = epoch + 1
        if log:
            log(f"epoch {epoch:3d}  train_loss {epoch_loss:.4f}  val_loss {val_loss:.4f}")
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best_snapshot = model.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    model.restore(best_snapshot)
    return result


def _dump_bad_batch(diag_dir, epoch, batch, loss_val):
    if diag_dir is None:
        return
    diag_dir = Path(diag_dir)
    diag_dir.mkdir(parents=True, exist_ok=True)
    with open(diag_dir / f"bad_batch_epoch{epoch}.txt", "w", encoding="utf-8") as f:
        f.write(f"loss={loss_val}\n")
        for t in batch:
            f.write(f"{t.head}\t{t.relation}\t{t.tail}\n")


# ---------------------------------------------------------------------------
# evaluation and inference


def predict_pairs(
    model: Model, dataset: Dataset, pairs: list[tuple[int, int]]
) -> dict[tuple[int, int], np.ndarray]:
    """Score vectors over DDI relations for each pair, eval mode."""
    cache = SubgraphCache(dataset, model.config)
    cache.prefetch(pairs, model.config.threads)
    generic = generic_embeddings(dataset.network, model.encoder_params, train=False)
    out = {}
    for pair in pairs:
        yhat, _ = forward_pair(
            model, cache, generic, pair[0], pair[1], dataset.network.resemble_rel
        )
        out[pair] = yhat.data.copy()
    return out


def evaluate_multiclass(model: Model, dataset: Dataset, triples: list[FactTriplet]):
    from .metrics import classification_metrics

    cidx = model.class_index()
    pairs = sorted({(t.head, t.tail) for t in triples})
    scores = predict_pairs(model, dataset, pairs)
    y_true = [cidx[t.relation] for t in triples]
    y_pred = [int(np.argmax(scores[(t.head, t.tail)])) for t in triples]
    return classification_metrics(y_true, y_pred, len(model.class_rels)), list(zip(y_true, y_pred))


def evaluate_multilabel(model: Model, dataset: Dataset, triples: list[FactTriplet], seed_offset: int = 20_000):
    from .metrics import ranking_metrics

    cidx = model.class_index()
    known = {
        (t.head, t.relation, t.tail)
        for t in dataset.splits.train + dataset.splits.valid + dataset.splits.test
    }
    negatives = sample_negatives(
        triples, dataset.drug_node_ids, known, model.config.seed + seed_offset
    )
    pairs = sorted(
        {(t.head, t.tail) for t in triples} | {(t.head, t.tail) for t in negatives}
    )
    scores = predict_pairs(model, dataset, pairs)
    by_rel: dict[int, tuple[list, list]] = {}
    for t, n in zip(triples, negatives):
        ci = cidx[t.relation]
        bucket = by_rel.setdefault(t.relation, ([], []))
        bucket[0].append(float(scores[(t.head, t.tail)][ci]))
        bucket[1].append(1)
        bucket[0].append(float(scores[(n.head, n.tail)][ci]))
        bucket[1].append(0)
    return ranking_metrics(by_rel)


def train_accuracy(model: Model, dataset: Dataset) -> float:
    cidx = model.class_index()
    triples = dataset.splits.train
    pairs = sorted({(t.head, t.tail) for t in triples})
    scores = predict_pairs(model, dataset, pairs)
    correct = sum(
        1
        for t in triples
        if int(np.argmax(scores[(t.head, t.tail)])) == cidx[t.relation]
    )
    return correct / len(triples)


class UnknownNodeError(ValueError):
    def __init__(self, label: str, suggestions: list[str]):
        super().__init__(
            f"unknown node label {label!r}; closest vocabulary entries: {suggestions}"
        )
        self.label = label
        self.suggestions = suggestions


def resolve_pair(dataset: Dataset, h_label: str, t_label: str) -> tuple[int, int]:
    vocab = dataset.node_vocab
    ids = []
    for lab in (h_label, t_label):
        if lab not in vocab:
            raise UnknownNodeError(lab, vocab.closest(lab))
        ids.append(vocab.id_of(lab))
    return ids[0], ids[1]


def infer(model: Model, dataset: Dataset, h_label: str, t_label: str):
    """Multiclass: (relation label, score vector); ties go to the lowest
    relation id. Multilabel: full per-relation score mapping."""
    pair = resolve_pair(dataset, h_label, t_label)
    scores = predict_pairs(model, dataset, [pair])[pair]
    if model.config.task == "multiclass":
        ci = int(np.argmax(scores))
        rel_label = dataset.rel_vocab.label(model.class_rels[ci])
        return rel_label, scores
    return {
        dataset.rel_vocab.label(r): float(scores[i])
        for i, r in enumerate(model.class_rels)
    }


# ---------------------------------------------------------------------------
# checkpoint integration


def save_model(path: str | Path, model: Model, dataset: Dataset, metadata: dict[str, str] | None = None):
    save_checkpoint(
        path,
        model.config,
        [(name, p.data) for name, p in model.named_tensors()],
        node_digest=dataset.node_vocab.digest(),
        relation_digest=dataset.rel_vocab.digest(),
        class_rels=model.class_rels,
        metadata=metadata,
    )


def load_model(path: str | Path, dataset: Dataset) -> Model:
    config, params, header = load_checkpoint(path)
    if header["node_digest"] != dataset.node_vocab.digest():
        raise CheckpointError("checkpoint node vocabulary does not match the data directory")
    if header["relation_digest"] != dataset.rel_vocab.digest():
        raise CheckpointError("checkpoint relation vocabulary does not match the data directory")
    class_rels = [int(x) for x in header["class_rels"].split(",") if x]
    model = Model.init(config, dataset)
    model.class_rels = class_rels
    # classifier width depends on class count; re-init if it differs
    for name, p in model.named_tensors():
        if name not in params:
            raise CheckpointError(f"checkpoint missing parameter {name}")
        if params[name].shape != p.data.shape:
            raise CheckpointError(
                f"parameter {name} shape mismatch: {params[name].shape} vs {p.data.shape}"
            )
        p.data[...] = params[name]
    return model
