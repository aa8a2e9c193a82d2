"""Explaining paths over a learned knowledge subgraph, plus DOT export."""
from __future__ import annotations

from dataclasses import dataclass

from .graph import CombinedNetwork
from .learner import KnowledgeSubgraph


@dataclass
class ExplainingPath:
    nodes: list[int]  # local indices, head first, tail last
    hops: list[tuple[int, float, bool]]  # (global relation, strength, is_new)
    avg_strength: float

    @property
    def length(self) -> int:
        return len(self.hops)


def enumerate_explaining_paths(
    ks: KnowledgeSubgraph,
    max_length: int,
    max_paths: int = 20,
) -> list[ExplainingPath]:
    """All simple directed head->tail paths of length <= max_length over
    positive-strength edges, ranked by average hop strength (descending;
    ties: shorter first, then node sequence).

    Identity self-loops are padding artifacts and are never traversed.
    """
    n = ks.base.num_nodes
    adj: dict[int, list[tuple[int, int, float, bool]]] = {i: [] for i in range(n)}
    for u, v, rel, strength, is_new in ks.edge_list():
        if u == v:
            continue
        adj[u].append((v, rel, strength, is_new))
    for lst in adj.values():
        lst.sort()

    head, tail = 0, 1
    results: list[ExplainingPath] = []

    def dfs(node: int, visited: list[int], hops: list[tuple[int, float, bool]]):
        if node == tail and hops:
            weights = [s for _, s, _ in hops]
            results.append(
                ExplainingPath(list(visited), list(hops), sum(weights) / len(weights))
            )
            return
        if len(hops) >= max_length:
            return
        for v, rel, strength, is_new in adj[node]:
            if v in visited:
                continue
            visited.append(v)
            hops.append((rel, strength, is_new))
            dfs(v, visited, hops)
            visited.pop()
            hops.pop()

    dfs(head, [head], [])
    results.sort(key=lambda p: (-p.avg_strength, p.length, p.nodes))
    return results[:max_paths]


def format_paths(
    paths: list[ExplainingPath], ks: KnowledgeSubgraph, net: CombinedNetwork
) -> str:
    """Tab-separated report: rank, avg_strength, node/relation labels."""
    lines = []
    for rank, p in enumerate(paths, start=1):
        parts = [net.node_vocab.label(ks.base.nodes[p.nodes[0]])]
        for (rel, strength, is_new), node in zip(p.hops, p.nodes[1:]):
            label = net.rel_vocab.label(rel) + ("(new)" if is_new else "")
            parts.append(f"-[{label}:{strength:.4f}]->")
            parts.append(net.node_vocab.label(ks.base.nodes[node]))
        lines.append(f"{rank}\t{p.avg_strength:.6f}\t" + " ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


PEN_MIN, PEN_MAX = 0.5, 4.0


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(
    ks: KnowledgeSubgraph,
    net: CombinedNetwork,
    paths: list[ExplainingPath] | None = None,
) -> str:
    """DOT digraph of the knowledge subgraph; resemble edges dotted, edge
    pen-width proportional to connection strength, pair nodes marked."""
    on_path: set[tuple[int, int, int]] = set()
    for p in paths or []:
        for (rel, _, _), u, v in zip(p.hops, p.nodes[:-1], p.nodes[1:]):
            on_path.add((u, v, rel))
    lines = ["digraph knowledge_subgraph {"]
    for i, g in enumerate(ks.base.nodes):
        attrs = [f"label={_quote(net.node_vocab.label(g))}"]
        if i == 0:
            attrs.append('shape="doublecircle"')
            attrs.append('color="blue"')
        elif i == 1:
            attrs.append('shape="doublecircle"')
            attrs.append('color="red"')
        lines.append(f"  n{i} [{', '.join(attrs)}];")
    for u, v, rel, strength, is_new in ks.edge_list():
        width = PEN_MIN + (PEN_MAX - PEN_MIN) * min(1.0, strength)
        attrs = [
            f"label={_quote(net.rel_vocab.label(rel))}",
            f'penwidth="{width:.3f}"',
        ]
        if is_new:
            attrs.append('style="dotted"')
        if (u, v, rel) in on_path:
            attrs.append('color="red"')
        lines.append(f"  n{u} -> n{v} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
