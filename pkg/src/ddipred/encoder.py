"""Generic node embeddings via mean-aggregate / concat-transform layers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph import CombinedNetwork


@dataclass
class EncoderParams:
    features: T.Tensor  # (|V|, d) learnable initial embeddings
    w_agg: list[T.Tensor]  # per layer (d, d)
    w_comb: list[T.Tensor]  # per layer (2d, d), applied to [agg || prev]

    @staticmethod
    def init(rng: np.random.Generator, num_nodes: int, dim: int, layers: int) -> "EncoderParams":
        scale = 1.0 / np.sqrt(dim)
        return EncoderParams(
            features=T.uniform_init(rng, (num_nodes, dim), scale),
            w_agg=[T.uniform_init(rng, (dim, dim), scale) for _ in range(layers)],
            w_comb=[T.uniform_init(rng, (2 * dim, dim), scale) for _ in range(layers)],
        )

    def named_tensors(self) -> list[tuple[str, T.Tensor]]:
        out = [("encoder.features", self.features)]
        for i, w in enumerate(self.w_agg):
            out.append((f"encoder.w_agg.{i}", w))
        for i, w in enumerate(self.w_comb):
            out.append((f"encoder.w_comb.{i}", w))
        return out


def edge_arrays(net: CombinedNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Source/destination arrays over all edges, multi-edges included."""
    src = np.fromiter((e.head for e in net.edges), dtype=np.intp, count=len(net.edges))
    dst = np.fromiter((e.tail for e in net.edges), dtype=np.intp, count=len(net.edges))
    return src, dst


def generic_embeddings(
    net: CombinedNetwork,
    params: EncoderParams,
    train: bool = False,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> T.Tensor:
    """Run all layers over the whole network; returns the (|V|, d) table.

    Per layer: a_v = mean over incoming edges of relu(e_u W_a), then
    e_v = [a_v || e_v] W_c. Relation types are ignored here; nodes with no
    incoming edges get a zero aggregate.
    """
    src, dst = edge_arrays(net)
    emb = params.features
    n = net.num_nodes
    for w_agg, w_comb in zip(params.w_agg, params.w_comb):
        msgs = T.relu(T.matmul(T.gather_rows(emb, src), w_agg))
        agg = T.segment_mean(msgs, dst, n)
        emb = T.matmul(T.concat_last([agg, emb]), w_comb)
        if train and dropout_rate > 0.0:
            emb = T.dropout(emb, dropout_rate, rng)
    return emb
