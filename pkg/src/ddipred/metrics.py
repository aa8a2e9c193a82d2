"""Evaluation metrics: macro-F1 / accuracy / Cohen's kappa for multiclass,
AUROC / AUPRC / AP@50 averaged over relations for ranking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def classification_metrics(
    true_labels, pred_labels, num_classes: int
) -> dict[str, float]:
    """Macro-F1 over all ``num_classes`` classes (absent classes count as 0),
    accuracy (= micro-F1), and Cohen's kappa from marginal products."""
    y = np.asarray(true_labels, dtype=np.intp)
    p = np.asarray(pred_labels, dtype=np.intp)
    if y.size == 0:
        raise ValueError("no records to evaluate")
    conf = np.zeros((num_classes, num_classes))
    np.add.at(conf, (y, p), 1.0)
    n = y.size
    tp = np.diag(conf)
    support = conf.sum(axis=1)
    predicted = conf.sum(axis=0)
    f1 = np.zeros(num_classes)
    denom = support + predicted
    nz = denom > 0
    f1[nz] = 2.0 * tp[nz] / denom[nz]
    acc = tp.sum() / n
    pe = float((support / n) @ (predicted / n))
    kappa = 1.0 if pe == 1.0 else (acc - pe) / (1.0 - pe)
    return {"f1": float(f1.mean()), "acc": float(acc), "kappa": float(kappa)}


def auroc(scores, labels) -> float:
    """Rank-statistic AUROC with 0.5 credit for ties."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one positive and one negative")
    # midranks via argsort over the pooled scores
    pooled = np.concatenate([pos, neg])
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(pooled.size)
    sorted_scores = pooled[order]
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_pos = ranks[: pos.size].sum()
    return float((rank_pos - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size))


def _ranked_blocks(scores: np.ndarray, labels: np.ndarray):
    """Yield (num_pos, num_items) per distinct score, best score first."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[j + 1] == s[i]:
            j += 1
        yield int(y[i : j + 1].sum()), j - i + 1
        i = j + 1


def auprc(scores, labels) -> float:
    """Area under the precision-recall curve by step integration over
    distinct score thresholds."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    total_pos = int((y == 1).sum())
    if total_pos == 0 or int((y == 0).sum()) == 0:
        raise ValueError("need at least one positive and one negative")
    area = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    for block_pos, block_n in _ranked_blocks(s, y):
        tp += block_pos
        seen += block_n
        recall = tp / total_pos
        precision = tp / seen
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return float(area)


def average_precision_at_k(scores, labels, k: int = 50) -> float:
    """Truncated average precision; denominator is min(#positives, k).

    Items are ranked by (-score, original index) for determinism.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    order = np.argsort(-s, kind="stable")
    total_pos = int((y == 1).sum())
    if total_pos == 0:
        raise ValueError("need at least one positive")
    denom = min(total_pos, k)
    tp = 0
    acc = 0.0
    for rank, idx in enumerate(order[:k], start=1):
        if y[idx] == 1:
            tp += 1
            acc += tp / rank
    return float(acc / denom)


@dataclass
class RankingResult:
    auroc: float
    auprc: float
    ap50: float
    per_relation: dict[int, dict[str, float]]
    skipped_relations: list[int]


def ranking_metrics(records_by_relation: dict[int, tuple[list, list]]) -> RankingResult:
    """Unweighted mean of per-relation AUROC/AUPRC/AP@50.

    ``records_by_relation`` maps relation id -> (scores, labels). Relations
    lacking a positive or a negative are skipped and reported.
    """
    per_rel: dict[int, dict[str, float]] = {}
    skipped: list[int] = []
    for rel in sorted(records_by_relation):
        scores, labels = records_by_relation[rel]
        y = np.asarray(labels)
        if (y == 1).sum() == 0 or (y == 0).sum() == 0:
            skipped.append(rel)
            continue
        per_rel[rel] = {
            "auroc": auroc(scores, labels),
            "auprc": auprc(scores, labels),
            "ap50": average_precision_at_k(scores, labels, 50),
        }
    if not per_rel:
        raise ValueError("no relation had both positives and negatives")
    return RankingResult(
        auroc=float(np.mean([m["auroc"] for m in per_rel.values()])),
        auprc=float(np.mean([m["auprc"] for m in per_rel.values()])),
        ap50=float(np.mean([m["ap50"] for m in per_rel.values()])),
        per_relation=per_rel,
        skipped_relations=skipped,
    )


def format_report(metrics: dict[str, float], per_relation: dict | None = None) -> tuple[str, str]:
    """Human-readable text and machine-readable key=value forms."""
    human = "\n".join(f"{k:>8s}: {v:.4f}" for k, v in metrics.items()) + "\n"
    lines = [f"{k}={v:.10f}" for k, v in metrics.items()]
    for rel, vals in (per_relation or {}).items():
        for k, v in vals.items():
            lines.append(f"relation.{rel}.{k}={v:.10f}")
    return human, "\n".join(lines) + "\n"
