"""Per-pair subgraph extraction: K-hop enclosing then directional pruning."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import CombinedNetwork

INF = float("inf")


@dataclass
class DrugFlowSubgraph:
    """Pruned per-pair subgraph with local indexing (head at 0, tail at 1)."""

    pair: tuple[int, int]
    nodes: list[int]  # global ids; position = local index
    edges: list[tuple[int, int, int]]  # (local u, global relation, local v)
    relations: list[int]  # global relation ids present, identity always included

    local_index: dict[int, int] = field(init=False)

    def __post_init__(self):
        self.local_index = {g: i for i, g in enumerate(self.nodes)}

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def adjacency_tensor(self) -> np.ndarray:
        """Binary (u, v, r) tensor over local nodes and local relations."""
        rel_pos = {r: i for i, r in enumerate(self.relations)}
        a = np.zeros((self.num_nodes, self.num_nodes, len(self.relations)))
        for u, r, v in self.edges:
            a[u, v, rel_pos[r]] = 1.0
        return a

    def dump(self, net: CombinedNetwork) -> str:
        lines = [
            f"pair\t{net.node_vocab.label(self.pair[0])}\t{net.node_vocab.label(self.pair[1])}"
        ]
        for g in self.nodes:
            lines.append(f"node\t{net.node_vocab.label(g)}")
        for u, r, v in self.edges:
            lines.append(
                f"edge\t{net.node_vocab.label(self.nodes[u])}"
                f"\t{net.rel_vocab.label(r)}\t{net.node_vocab.label(self.nodes[v])}"
            )
        return "\n".join(lines) + "\n"


def k_hop_neighborhood(net: CombinedNetwork, node: int, k: int) -> set[int]:
    """Nodes reachable within k steps, edges treated as undirected."""
    if not 0 <= node < net.num_nodes:
        raise ValueError(f"invalid node id {node}")
    if k < 1:
        raise ValueError("k must be >= 1")
    visited = {node}
    frontier = {node}
    for _ in range(k):
        nxt = set()
        for u in frontier:
            nxt |= net.undirected_neighbors(u)
        frontier = nxt - visited
        visited |= frontier
        if not frontier:
            break
    return visited


def enclosing_subgraph(
    net: CombinedNetwork, h: int, t: int, k: int
) -> tuple[list[int], list[tuple[int, int, int]]]:
    """Intersection of both K-hop neighborhoods plus {h, t}, with induced edges."""
    if h == t:
        raise ValueError("self-pairs are undefined")
    nodes = (k_hop_neighborhood(net, h, k) & k_hop_neighborhood(net, t, k)) | {h, t}
    node_list = sorted(nodes)
    edges = [
        (u, r, v)
        for u in node_list
        for v, r in net.neighbors(u, "out")
        if v in nodes
    ]
    return node_list, sorted(edges)


def _bfs_distances(
    start: int, adj: dict[int, list[tuple[int, int]]], nodes: set[int]
) -> dict[int, float]:
    dist = {n: INF for n in nodes}
    dist[start] = 0
    q = deque([start])
    while q:
        u = q.popleft()
        for v, _ in adj.get(u, ()):
            if dist[v] == INF:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def directional_prune(
    nodes: list[int],
    edges: list[tuple[int, int, int]],
    h: int,
    t: int,
    p: int,
    identity_rel: int,
    node_cap: int | None = None,
) -> DrugFlowSubgraph:
    """Keep exactly the nodes/edges on directed h->t walks of length <= p.

    A node survives iff dist(h->v) + dist(v->t) <= p, an edge (u,r,v) iff
    dist(h->u) + 1 + dist(v->t) <= p. If any surviving walk is shorter than
    p, a single identity self-loop is placed on t as path padding. With no
    h->t walk at all the degenerate {h, t} subgraph is returned.
    """
    node_set = set(nodes) | {h, t}
    fwd_adj: dict[int, list[tuple[int, int]]] = {}
    bwd_adj: dict[int, list[tuple[int, int]]] = {}
    for u, r, v in edges:
        fwd_adj.setdefault(u, []).append((v, r))
        bwd_adj.setdefault(v, []).append((u, r))
    df = _bfs_distances(h, fwd_adj, node_set)
    db = _bfs_distances(t, bwd_adj, node_set)

    if df[t] > p:
        relations = sorted({identity_rel})
        return DrugFlowSubgraph((h, t), [h, t], [], relations)

    kept = {v for v in node_set if df[v] + db[v] <= p}
    kept |= {h, t}
    if node_cap is not None and len(kept) > node_cap:
        ordered = sorted(kept, key=lambda v: (df[v] + db[v], v))
        protected = [h, t] + [v for v in ordered if v not in (h, t)]
        kept = set(protected[:node_cap]) | {h, t}

    local_nodes = [h, t] + sorted(v for v in kept if v not in (h, t))
    idx = {g: i for i, g in enumerate(local_nodes)}
    kept_edges = sorted(
        (idx[u], r, idx[v])
        for u, r, v in edges
        if u in kept and v in kept and df[u] + 1 + db[v] <= p
    )
    rel_ids = {r for _, r, _ in kept_edges} | {identity_rel}
    if df[t] < p:
        loop = (idx[t], identity_rel, idx[t])
        if loop not in kept_edges:
            kept_edges.append(loop)
    return DrugFlowSubgraph((h, t), local_nodes, sorted(kept_edges), sorted(rel_ids))


def extract_drug_flow(
    net: CombinedNetwork,
    h: int,
    t: int,
    k: int,
    p: int,
    node_cap: int | None = 256,
) -> DrugFlowSubgraph:
    nodes, edges = enclosing_subgraph(net, h, t, k)
    return directional_prune(nodes, edges, h, t, p, net.identity_rel, node_cap)


def extract_enclosing(
    net: CombinedNetwork, h: int, t: int, k: int, node_cap: int | None = 256
) -> DrugFlowSubgraph:
    """Ablation: the unpruned enclosing subgraph in the same container."""
    nodes, edges = enclosing_subgraph(net, h, t, k)
    if node_cap is not None and len(nodes) > node_cap:
        keep = {h, t} | set(sorted(set(nodes) - {h, t})[: node_cap - 2])
        nodes = sorted(keep)
        edges = [(u, r, v) for u, r, v in edges if u in keep and v in keep]
    local_nodes = [h, t] + sorted(v for v in nodes if v not in (h, t))
    idx = {g: i for i, g in enumerate(local_nodes)}
    local_edges = sorted((idx[u], r, idx[v]) for u, r, v in edges)
    rel_ids = {r for _, r, _ in local_edges} | {net.identity_rel}
    return DrugFlowSubgraph((h, t), local_nodes, local_edges, sorted(rel_ids))


def extract_random(
    net: CombinedNetwork,
    h: int,
    t: int,
    k: int,
    sample_size: int,
    seed: int,
) -> DrugFlowSubgraph:
    """Ablation: {h, t} plus nodes sampled uniformly from both neighborhoods."""
    if h == t:
        raise ValueError("self-pairs are undefined")
    pool = sorted(
        (k_hop_neighborhood(net, h, k) | k_hop_neighborhood(net, t, k)) - {h, t}
    )
    rng = random.Random(f"{seed}:{h}:{t}")
    chosen = rng.sample(pool, min(sample_size, len(pool))) if pool else []
    keep = {h, t} | set(chosen)
    local_nodes = [h, t] + sorted(keep - {h, t})
    idx = {g: i for i, g in enumerate(local_nodes)}
    local_edges = sorted(
        (idx[u], r, idx[v])
        for u in local_nodes
        for v, r in net.neighbors(u, "out")
        if v in keep
    )
    rel_ids = {r for _, r, _ in local_edges} | {net.identity_rel}
    return DrugFlowSubgraph((h, t), local_nodes, local_edges, sorted(rel_ids))


def extract_for_mode(
    net: CombinedNetwork,
    h: int,
    t: int,
    mode: str,
    k: int,
    p: int,
    node_cap: int | None,
    seed: int = 0,
) -> DrugFlowSubgraph:
    if mode == "random":
        size = (node_cap or 256) - 2
        return extract_random(net, h, t, k, size, seed)
    if mode == "enclosing":
        return extract_enclosing(net, h, t, k, node_cap)
    if mode in ("drugflow", "knowledge", "knowledge-no-resemble"):
        return extract_drug_flow(net, h, t, k, p, node_cap)
    raise ValueError(f"unknown subgraph mode: {mode}")
