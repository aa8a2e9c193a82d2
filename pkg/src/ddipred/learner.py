"""Knowledge-subgraph learning: score, rebuild, and propagate for T rounds.

The subgraph structure lives in a flat "support" of candidate entries
(u, v, relation): every original edge, a similarity ("resemble") slot for
each ordered node pair with no original edge, and forced diagonal entries
that anchor the per-node softmax. Connection strengths are the edge-softmax
of merged scores, thresholded by gamma.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .subgraph import DrugFlowSubgraph


@dataclass
class LearnerParams:
    rel_embeds: T.Tensor  # (|R|, d), includes identity and resemble rows
    mlp_w1: T.Tensor  # (2d, d)
    mlp_b1: T.Tensor  # (d,)
    mlp_w2: T.Tensor  # (d, 1)
    mlp_b2: T.Tensor  # (1,)
    w_rel: list[T.Tensor]  # per global relation (d, d)
    w_cls: T.Tensor  # (3d, num_classes)

    @staticmethod
    def init(
        rng: np.random.Generator, num_relations: int, dim: int, num_classes: int
    ) -> "LearnerParams":
        scale = 1.0 / np.sqrt(dim)
        return LearnerParams(
            rel_embeds=T.uniform_init(rng, (num_relations, dim), scale),
            mlp_w1=T.uniform_init(rng, (2 * dim, dim), scale),
            mlp_b1=T.uniform_init(rng, (dim,), scale),
            mlp_w2=T.uniform_init(rng, (dim, 1), scale),
            mlp_b2=T.uniform_init(rng, (1,), scale),
            w_rel=[T.uniform_init(rng, (dim, dim), scale) for _ in range(num_relations)],
            w_cls=T.uniform_init(rng, (3 * dim, num_classes), scale),
        )

    def named_tensors(self) -> list[tuple[str, T.Tensor]]:
        out = [
            ("learner.rel_embeds", self.rel_embeds),
            ("learner.mlp_w1", self.mlp_w1),
            ("learner.mlp_b1", self.mlp_b1),
            ("learner.mlp_w2", self.mlp_w2),
            ("learner.mlp_b2", self.mlp_b2),
            ("learner.w_cls", self.w_cls),
        ]
        for i, w in enumerate(self.w_rel):
            out.append((f"learner.w_rel.{i}", w))
        return out


@dataclass
class Support:
    """Static candidate-entry arrays for one subgraph.

    Ordering: scored (off-diagonal) entries first, forced-diagonal entries
    last; ``num_scored`` marks the boundary.
    """

    rels: list[int]  # local relation list (global ids), resemble last if present
    u: np.ndarray  # local source index per entry
    v: np.ndarray  # local target index per entry
    rel_local: np.ndarray  # index into rels
    grel: np.ndarray  # global relation id per entry
    a0: np.ndarray  # binary original-adjacency value
    is_sim: np.ndarray  # resemble-candidate flag
    is_diag: np.ndarray  # forced-diagonal flag
    num_scored: int

    @property
    def size(self) -> int:
        return self.u.size


def build_support(dfs: DrugFlowSubgraph, resemble_rel: int, use_resemble: bool = True) -> Support:
    n = dfs.num_nodes
    rels = list(dfs.relations)
    if use_resemble:
        rels = rels + [resemble_rel]
    rel_pos = {r: i for i, r in enumerate(rels)}

    has_edge = np.zeros((n, n), dtype=bool)
    rows: list[tuple[int, int, int, int, float, bool, bool]] = []
    diag_orig: set[tuple[int, int]] = set()
    for u, r, v in dfs.edges:
        has_edge[u, v] = True
        if u == v:
            diag_orig.add((u, rel_pos[r]))
        rows.append((u, v, rel_pos[r], r, 1.0, False, u == v))
    if use_resemble:
        sim_local = rel_pos[resemble_rel]
        for u in range(n):
            for v in range(n):
                if u != v and not has_edge[u, v]:
                    rows.append((u, v, sim_local, resemble_rel, 0.0, True, False))
    # scored entries are the off-diagonal ones; diagonal entries get C = 1
    scored = [r for r in rows if r[0] != r[1]]
    diag = [r for r in rows if r[0] == r[1]]
    for v in range(n):
        for ri, grel in enumerate(rels):
            if (v, ri) not in diag_orig:
                diag.append((v, v, ri, grel, 0.0, False, True))
    ordered = scored + diag
    return Support(
        rels=rels,
        u=np.array([r[0] for r in ordered], dtype=np.intp),
        v=np.array([r[1] for r in ordered], dtype=np.intp),
        rel_local=np.array([r[2] for r in ordered], dtype=np.intp),
        grel=np.array([r[3] for r in ordered], dtype=np.intp),
        a0=np.array([r[4] for r in ordered]),
        is_sim=np.array([r[5] for r in ordered], dtype=bool),
        is_diag=np.array([r[6] for r in ordered], dtype=bool),
        num_scored=len(scored),
    )


def relevance_scores(
    h: T.Tensor,
    u_idx: np.ndarray,
    v_idx: np.ndarray,
    grel: np.ndarray,
    params: LearnerParams,
) -> T.Tensor:
    """MLP([exp(-|h_u - h_v|) || h_r]) -> sigmoid score per entry, in (0,1)."""
    hu = T.gather_rows(h, u_idx)
    hv = T.gather_rows(h, v_idx)
    feat = T.concat_last([T.neg_abs_diff(hu, hv), T.gather_rows(params.rel_embeds, grel)])
    hidden = T.relu(T.add(T.matmul(feat, params.mlp_w1), params.mlp_b1))
    score = T.sigmoid(T.add(T.matmul(hidden, params.mlp_w2), params.mlp_b2))
    return T.reshape(score, (u_idx.size,))


def merge_and_threshold(
    scores: T.Tensor,
    v_idx: np.ndarray,
    num_nodes: int,
    gamma: float,
) -> tuple[T.Tensor, T.Tensor]:
    """Edge-softmax per target node, then relu(. - gamma).

    Returns (post-threshold strengths, pre-threshold normalized weights);
    the latter sum to 1 over each node's incoming support entries.
    """
    pre = T.grouped_softmax(scores, v_idx, num_nodes)
    return T.relu(T.sub(pre, T.Tensor(gamma))), pre


def merged_scores(
    c_scored: T.Tensor, support: Support, alpha: float
) -> T.Tensor:
    """alpha * A0 + (1 - alpha) * C over the whole support (diagonal C = 1)."""
    scored = T.add(
        T.mul(c_scored, T.Tensor(1.0 - alpha)),
        T.Tensor(alpha * support.a0[: support.num_scored]),
    )
    diag_vals = alpha * support.a0[support.num_scored :] + (1.0 - alpha)
    return T.concat_last([scored, T.Tensor(diag_vals)])


def propagate(
    strengths: T.Tensor,
    support: Support,
    h: T.Tensor,
    params: LearnerParams,
) -> T.Tensor:
    """Per-relation weighted aggregation then mean over relation slices."""
    n = h.data.shape[0]
    dim = h.data.shape[1]
    slices: list[T.Tensor] = []
    for ri, grel in enumerate(support.rels):
        idx = np.nonzero(support.rel_local == ri)[0]
        if idx.size == 0:
            slices.append(T.Tensor(np.zeros((n, dim))))
            continue
        w = T.reshape(T.gather_rows(strengths, idx), (idx.size, 1))
        msgs = T.mul(w, T.gather_rows(h, support.u[idx]))
        agg = T.segment_sum(msgs, support.v[idx], n)
        slices.append(T.relu(T.matmul(agg, params.w_rel[grel])))
    return T.mean_stack(slices)


@dataclass
class KnowledgeSubgraph:
    """Learned structure + refined embeddings for one drug pair."""

    base: DrugFlowSubgraph
    support: Support
    strengths: T.Tensor  # final per-entry connection strengths, in [0, 1]
    pre_threshold: np.ndarray  # last iteration's normalized weights
    h: T.Tensor  # (n, d) refined node embeddings
    h_graph: T.Tensor  # pooled subgraph embedding (d,)

    def edge_list(self) -> list[tuple[int, int, int, float, bool]]:
        """Surviving edges as (local u, local v, global relation, strength, is_new).

        Kept edges are original entries with positive strength; new edges are
        resemble candidates with positive strength. Forced diagonal anchors
        are bookkeeping only and are not part of the edge set.
        """
        vals = self.strengths.data
        out = []
        for i in range(self.support.size):
            if vals[i] <= 0.0:
                continue
            if self.support.a0[i] == 1.0:
                out.append(
                    (
                        int(self.support.u[i]),
                        int(self.support.v[i]),
                        int(self.support.grel[i]),
                        float(vals[i]),
                        False,
                    )
                )
            elif self.support.is_sim[i]:
                out.append(
                    (
                        int(self.support.u[i]),
                        int(self.support.v[i]),
                        int(self.support.grel[i]),
                        float(vals[i]),
                        True,
                    )
                )
        return out


def generate_knowledge_subgraph(
    dfs: DrugFlowSubgraph,
    generic: T.Tensor,
    params: LearnerParams,
    resemble_rel: int,
    alpha: float,
    gamma: float,
    iterations: int,
    mode: str = "knowledge",
    support: Support | None = None,
) -> KnowledgeSubgraph:
    """Alternate scoring / structure rebuild / propagation for T iterations.

    Modes: "knowledge" learns the structure; "knowledge-no-resemble" learns
    it without resemble candidates; any other mode fixes the structure to
    the normalized original adjacency (alpha = 1, gamma = 0, no resemble).
    """
    learned = mode in ("knowledge", "knowledge-no-resemble")
    if support is None:
        support = build_support(
            dfs, resemble_rel, use_resemble=learned and mode == "knowledge"
        )
    if learned:
        eff_alpha, eff_gamma = alpha, gamma
    else:
        eff_alpha, eff_gamma = 1.0, 0.0

    h = T.gather_rows(generic, dfs.nodes)
    n = dfs.num_nodes
    strengths = None
    pre = None
    for _ in range(max(1, iterations)):
        if learned:
            c = relevance_scores(
                h,
                support.u[: support.num_scored],
                support.v[: support.num_scored],
                support.grel[: support.num_scored],
                params,
            )
        else:
            c = T.Tensor(np.zeros(support.num_scored))
        scores = merged_scores(c, support, eff_alpha)
        strengths, pre = merge_and_threshold(scores, support.v, n, eff_gamma)
        h = propagate(strengths, support, h, params)
    return KnowledgeSubgraph(
        base=dfs,
        support=support,
        strengths=strengths,
        pre_threshold=pre.data.copy(),
        h=h,
        h_graph=T.mean_rows(h),
    )


def predict(ks: KnowledgeSubgraph, task: str, params: LearnerParams) -> T.Tensor:
    """Class scores over DDI relations: softmax (multiclass) or sigmoid."""
    pair = T.reshape(T.gather_rows(ks.h, [0, 1]), (2 * ks.h.data.shape[1],))
    feats = T.concat_last([ks.h_graph, pair])
    logits = T.reshape(
        T.matmul(T.reshape(feats, (1, feats.data.shape[0])), params.w_cls),
        (params.w_cls.data.shape[1],),
    )
    if task == "multiclass":
        return T.grouped_softmax(logits, np.zeros(logits.data.shape[0], dtype=np.intp), 1)
    if task == "multilabel":
        return T.sigmoid(logits)
    raise ValueError(f"unknown task: {task}")
