import numpy as np
import pytest

from ddipred import tensor as T
from ddipred.learner import (
    LearnerParams,
    build_support,
    generate_knowledge_subgraph,
    merge_and_threshold,
    merged_scores,
    predict,
    propagate,
    relevance_scores,
)
from ddipred.subgraph import DrugFlowSubgraph

IDENT, RESEM = 90, 91  # arbitrary global relation ids for the reserved slots


def _dfs(n, edges, relations):
    return DrugFlowSubgraph(
        pair=(100, 101),
        nodes=list(range(100, 100 + n)),
        edges=edges,
        relations=sorted(set(relations) | {IDENT}),
    )


def _params(dim=4, num_classes=3, seed=0):
    return LearnerParams.init(np.random.default_rng(seed), 100, dim, num_classes)


def test_support_counts():
    # 3 nodes, edges 0->1 and 1->2, rels {5, IDENT}; resemble adds the
    # remaining ordered off-diagonal pairs, diagonals forced for all rels
    dfs = _dfs(3, [(0, 5, 1), (1, 5, 2)], [5])
    sup = build_support(dfs, RESEM, use_resemble=True)
    rels = sup.rels
    assert rels[-1] == RESEM and set(rels) == {5, IDENT, RESEM}
    # off-diagonal pairs: 6 total, 2 with original edges, 4 resemble slots
    assert sup.num_scored == 6
    # forced diagonals: 3 nodes x 3 relations
    assert sup.size - sup.num_scored == 3 * 3
    assert np.all(sup.a0[: sup.num_scored][~sup.is_sim[: sup.num_scored]] == 1.0)
    assert np.all(sup.a0[sup.is_sim] == 0.0)
    assert np.all(sup.is_diag[sup.num_scored :])


def test_support_no_resemble():
    dfs = _dfs(3, [(0, 5, 1)], [5])
    sup = build_support(dfs, RESEM, use_resemble=False)
    assert RESEM not in sup.rels
    assert sup.num_scored == 1


def test_support_original_self_loop_is_diagonal_with_a0():
    dfs = _dfs(2, [(0, 5, 1), (1, IDENT, 1)], [5])
    sup = build_support(dfs, RESEM, use_resemble=False)
    diag = np.nonzero((sup.u == 1) & (sup.v == 1) & (sup.grel == IDENT))[0]
    assert diag.size == 1
    assert sup.a0[diag[0]] == 1.0  # original loop keeps its adjacency value


def test_relevance_scores_in_unit_interval_and_symmetric_feature():
    params = _params()
    h = T.Tensor(np.random.default_rng(1).normal(size=(4, 4)))
    u = np.array([0, 1])
    v = np.array([1, 0])
    r = np.array([5, 5])
    s = relevance_scores(h, u, v, r, params).data
    assert np.all((s > 0) & (s < 1))
    # |h_u - h_v| is symmetric, so swapped pairs score identically
    np.testing.assert_allclose(s[0], s[1], atol=1e-15)


def test_merge_and_threshold_two_equal_edges():
    """Two identically-scored entries into one node normalize to 0.5 each."""
    scores = T.Tensor([0.7, 0.7])
    post, pre = merge_and_threshold(scores, np.array([0, 0]), 1, gamma=0.2)
    np.testing.assert_allclose(pre.data, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(post.data, [0.3, 0.3], atol=1e-12)


def test_merge_and_threshold_large_gamma_zeroes_everything():
    scores = T.Tensor([0.1, 0.9, 0.4])
    post, pre = merge_and_threshold(scores, np.array([0, 0, 0]), 1, gamma=1.0)
    assert np.all(post.data == 0.0)
    np.testing.assert_allclose(pre.data.sum(), 1.0, atol=1e-12)


def test_merged_scores_alpha_blend():
    dfs = _dfs(2, [(0, 5, 1)], [5])
    sup = build_support(dfs, RESEM, use_resemble=True)
    c = T.Tensor(np.full(sup.num_scored, 0.25))
    merged = merged_scores(c, sup, alpha=0.6).data
    for i in range(sup.num_scored):
        np.testing.assert_allclose(merged[i], 0.6 * sup.a0[i] + 0.4 * 0.25)
    # diagonal entries: alpha * a0 + (1 - alpha) * 1
    for i in range(sup.num_scored, sup.size):
        np.testing.assert_allclose(merged[i], 0.6 * sup.a0[i] + 0.4)


def test_propagate_matches_dense_oracle():
    dfs = _dfs(3, [(0, 5, 1), (1, 5, 2), (2, 6, 0)], [5, 6])
    sup = build_support(dfs, RESEM, use_resemble=False)
    params = _params()
    rng = np.random.default_rng(2)
    h = T.Tensor(rng.normal(size=(3, 4)))
    w = T.Tensor(rng.uniform(0, 1, size=sup.size))
    got = propagate(w, sup, h, params).data

    slices = []
    for ri, grel in enumerate(sup.rels):
        acc = np.zeros((3, 4))
        for i in range(sup.size):
            if sup.rel_local[i] == ri:
                acc[sup.v[i]] += w.data[i] * h.data[sup.u[i]]
        slices.append(np.maximum(acc @ params.w_rel[grel].data, 0.0))
    np.testing.assert_allclose(got, np.mean(slices, axis=0), atol=1e-12)


def test_pre_threshold_sums_to_one_per_node():
    dfs = _dfs(4, [(0, 5, 1), (0, 5, 2), (1, 5, 3), (2, 6, 3)], [5, 6])
    generic = T.Tensor(np.random.default_rng(3).normal(size=(200, 4)))
    ks = generate_knowledge_subgraph(
        dfs, generic, _params(), RESEM, alpha=0.5, gamma=0.1, iterations=3
    )
    sums = np.zeros(4)
    np.add.at(sums, ks.support.v, ks.pre_threshold)
    np.testing.assert_allclose(sums, 1.0, atol=1e-9)


def test_edge_list_dichotomy():
    """Every surviving edge is either an original kept edge or a new
    resemble edge; forced diagonal anchors never appear."""
    dfs = _dfs(4, [(0, 5, 1), (1, 5, 2), (2, 5, 3)], [5])
    generic = T.Tensor(np.random.default_rng(4).normal(size=(200, 4)))
    ks = generate_knowledge_subgraph(
        dfs, generic, _params(), RESEM, alpha=0.5, gamma=0.01, iterations=2
    )
    orig = {(u, v, r) for u, r, v in dfs.edges}
    for u, v, r, strength, is_new in ks.edge_list():
        assert strength > 0.0
        if is_new:
            assert r == RESEM and (u, v, r) not in orig
        else:
            assert (u, v, r) in orig


def test_fixed_structure_modes_use_normalized_adjacency():
    """Non-learned modes pin strengths to softmax of alpha=1 merged scores,
    independent of alpha/gamma arguments."""
    dfs = _dfs(3, [(0, 5, 1), (2, 5, 1)], [5])
    generic = T.Tensor(np.random.default_rng(5).normal(size=(200, 4)))
    ks = generate_knowledge_subgraph(
        dfs, generic, _params(), RESEM, alpha=0.3, gamma=0.5, iterations=2,
        mode="drugflow",
    )
    # node 1 has two incoming original entries plus its forced diagonals;
    # all original edges survive (gamma forced to 0)
    kept = {(u, v) for u, v, r, s, new in ks.edge_list()}
    assert kept == {(0, 1), (2, 1)}
    assert all(not new for _, _, _, _, new in ks.edge_list())


def test_iterations_change_embeddings():
    dfs = _dfs(3, [(0, 5, 1), (1, 5, 2)], [5])
    generic = T.Tensor(np.random.default_rng(6).normal(size=(200, 4)))
    k1 = generate_knowledge_subgraph(dfs, generic, _params(), RESEM, 0.5, 0.05, 1)
    k3 = generate_knowledge_subgraph(dfs, generic, _params(), RESEM, 0.5, 0.05, 3)
    assert not np.allclose(k1.h.data, k3.h.data)


def test_forward_bit_stable():
    dfs = _dfs(3, [(0, 5, 1), (1, 5, 2)], [5])
    generic = T.Tensor(np.random.default_rng(7).normal(size=(200, 4)))
    a = generate_knowledge_subgraph(dfs, generic, _params(), RESEM, 0.5, 0.05, 2)
    b = generate_knowledge_subgraph(dfs, generic, _params(), RESEM, 0.5, 0.05, 2)
    np.testing.assert_array_equal(a.h.data, b.h.data)
    np.testing.assert_array_equal(a.strengths.data, b.strengths.data)


def test_predict_multiclass_sums_to_one():
    dfs = _dfs(3, [(0, 5, 1), (1, 5, 2)], [5])
    generic = T.Tensor(np.random.default_rng(8).normal(size=(200, 4)))
    params = _params()
    ks = generate_knowledge_subgraph(dfs, generic, params, RESEM, 0.5, 0.05, 2)
    y = predict(ks, "multiclass", params).data
    np.testing.assert_allclose(y.sum(), 1.0, atol=1e-12)
    assert np.all(y > 0)
    y2 = predict(ks, "multilabel", params).data
    assert np.all((y2 > 0) & (y2 < 1))
    with pytest.raises(ValueError):
        predict(ks, "ranking", params)


def test_end_to_end_gradients_finite_diff():
    dfs = _dfs(3, [(0, 5, 1), (1, 5, 2)], [5])
    rng = np.random.default_rng(9)
    generic = T.Tensor(rng.normal(size=(200, 4)), requires_grad=True)
    params = _params()
    tensors = [generic] + [t for _, t in params.named_tensors()]

    def scalar_f():
        ks = generate_knowledge_subgraph(dfs, generic, params, RESEM, 0.5, 0.05, 2)
        y = predict(ks, "multiclass", params)
        picked = T.gather_rows(T.reshape(y, (y.data.size, 1)), [1])
        return T.sub(T.Tensor(0.0), T.sum_all(T.log(T.clip(picked, 1e-12, 1.0))))

    assert T.finite_diff_check(scalar_f, tensors, max_coords_per_tensor=4) < 1e-4
