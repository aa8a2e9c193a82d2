"""Triple files, vocabularies, and the combined drug/knowledge network."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from pathlib import Path

IDENTITY_RELATION = "__identity__"
RESEMBLE_RELATION = "__resemble__"


class TripleParseError(ValueError):
    pass


class Vocab:
    """Bidirectional label <-> dense-id map, ids in first-seen order."""

    def __init__(self):
        self._to_id: dict[str, int] = {}
        self._labels: list[str] = []

    def intern(self, label: str) -> int:
        idx = self._to_id.get(label)
        if idx is None:
            idx = len(self._labels)
            self._to_id[label] = idx
            self._labels.append(label)
        return idx

    def id_of(self, label: str) -> int:
        if label not in self._to_id:
            raise KeyError(label)
        return self._to_id[label]

    def __contains__(self, label: str) -> bool:
        return label in self._to_id

    def label(self, idx: int) -> str:
        return self._labels[idx]

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def labels(self) -> list[str]:
        return list(self._labels)

    def digest(self) -> str:
        h = hashlib.sha256()
        for lab in self._labels:
            h.update(lab.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def closest(self, label: str, k: int = 3) -> list[str]:
        """Cheap nearest-miss suggestions for error messages."""
        low = label.lower()
        scored = sorted(
            self._labels,
            key=lambda lab: (0 if low in lab.lower() or lab.lower() in low else 1, lab),
        )
        return scored[:k]


@dataclass(frozen=True)
class FactTriplet:
    head: int
    relation: int
    tail: int


def parse_triple_line(line: str) -> tuple[str, str, str]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3 or not all(parts):
        raise TripleParseError("expected head<TAB>relation<TAB>tail")
    return parts[0], parts[1], parts[2]


def load_triples(path: str | Path, node_vocab: Vocab, rel_vocab: Vocab) -> list[FactTriplet]:
    """Parse a tab-separated triple file, interning labels into the vocabs.

    Duplicate lines are dropped; otherwise order is preserved. Lines
    starting with '#' are comments.
    """
    triples: list[FactTriplet] = []
    seen: set[tuple[int, int, int]] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                h, r, t = parse_triple_line(line)
            except TripleParseError as e:
                raise TripleParseError(f"{path}:{lineno}: {e}") from None
            key = (node_vocab.intern(h), rel_vocab.intern(r), node_vocab.intern(t))
            if key in seen:
                continue
            seen.add(key)
            triples.append(FactTriplet(*key))
    return triples


@dataclass
class SplitSet:
    train: list[FactTriplet]
    valid: list[FactTriplet]
    test: list[FactTriplet]


def split_ddi(triples: list[FactTriplet], ratios: tuple[int, int, int], seed: int) -> SplitSet:
    """Deterministic shuffle then floor-partition; remainder goes to train."""
    if len(triples) < 3:
        raise ValueError("need at least 3 triples to split")
    if any(r <= 0 for r in ratios):
        raise ValueError("ratios must be positive")
    order = list(triples)
    random.Random(seed).shuffle(order)
    total = sum(ratios)
    n = len(order)
    n_valid = n * ratios[1] // total
    n_test = n * ratios[2] // total
    n_train = n - n_valid - n_test
    return SplitSet(
        train=order[:n_train],
        valid=order[n_train : n_train + n_valid],
        test=order[n_train + n_valid :],
    )


class CombinedNetwork:
    """Immutable union of DDI-train edges and leakage-filtered KG edges."""

    def __init__(
        self,
        node_vocab: Vocab,
        rel_vocab: Vocab,
        ddi_train: list[FactTriplet],
        kg: list[FactTriplet],
        drug_node_ids: set[int],
        ddi_relation_ids: set[int],
    ):
        self.node_vocab = node_vocab
        self.rel_vocab = rel_vocab
        self.identity_rel = rel_vocab.intern(IDENTITY_RELATION)
        self.resemble_rel = rel_vocab.intern(RESEMBLE_RELATION)
        self.drug_node_ids = frozenset(drug_node_ids)
        self.ddi_relation_ids = frozenset(ddi_relation_ids)

        kept_kg = [
            t
            for t in kg
            if not (t.head in self.drug_node_ids and t.tail in self.drug_node_ids)
        ]
        self.edges: list[FactTriplet] = list(ddi_train) + kept_kg
        n = len(node_vocab)
        self._out: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        self._in: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for t in self.edges:
            self._out[t.head].append((t.tail, t.relation))
            self._in[t.tail].append((t.head, t.relation))
        for adj in (self._out, self._in):
            for lst in adj:
                lst.sort()

    @property
    def num_nodes(self) -> int:
        return len(self.node_vocab)

    @property
    def num_relations(self) -> int:
        return len(self.rel_vocab)

    def neighbors(self, node: int, direction: str) -> list[tuple[int, int]]:
        if not 0 <= node < self.num_nodes:
            raise ValueError(f"invalid node id {node}")
        if direction == "out":
            return list(self._out[node])
        if direction == "in":
            return list(self._in[node])
        raise ValueError("direction must be 'in' or 'out'")

    def undirected_neighbors(self, node: int) -> set[int]:
        return {v for v, _ in self._out[node]} | {u for u, _ in self._in[node]}

    def canonical_digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.node_vocab.digest().encode())
        h.update(self.rel_vocab.digest().encode())
        for t in sorted((t.head, t.relation, t.tail) for t in self.edges):
            h.update(f"{t[0]},{t[1]},{t[2]}\n".encode())
        return h.hexdigest()


def build_combined_network(
    node_vocab: Vocab,
    rel_vocab: Vocab,
    ddi_train: list[FactTriplet],
    kg: list[FactTriplet],
    all_ddi: list[FactTriplet],
) -> CombinedNetwork:
    """Assemble the network from DDI training edges plus the external KG.

    ``all_ddi`` (train+valid+test) determines the drug node/relation sets so
    that KG edges between any two drugs are removed, not just those seen in
    training.
    """
    drug_nodes = {t.head for t in all_ddi} | {t.tail for t in all_ddi}
    ddi_rels = {t.relation for t in all_ddi}
    return CombinedNetwork(node_vocab, rel_vocab, ddi_train, kg, drug_nodes, ddi_rels)


# ---------------------------------------------------------------------------
# data directory layout: train/valid/test/kg triple files plus a manifest

SPLIT_FILES = {"train": "train.tsv", "valid": "valid.tsv", "test": "test.tsv"}
KG_FILE = "kg.tsv"
MANIFEST_FILE = "manifest.txt"


def write_triples(path: Path, triples: list[FactTriplet], node_vocab: Vocab, rel_vocab: Vocab):
    with open(path, "w", encoding="utf-8") as f:
        for t in triples:
            f.write(
                f"{node_vocab.label(t.head)}\t{rel_vocab.label(t.relation)}\t{node_vocab.label(t.tail)}\n"
            )


def write_data_dir(
    out_dir: Path,
    splits: SplitSet,
    kg: list[FactTriplet],
    node_vocab: Vocab,
    rel_vocab: Vocab,
    seed: int,
    ratios: tuple[int, int, int],
    extra_manifest: dict[str, str] | None = None,
):
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, fname in SPLIT_FILES.items():
        write_triples(out_dir / fname, getattr(splits, name), node_vocab, rel_vocab)
    write_triples(out_dir / KG_FILE, kg, node_vocab, rel_vocab)
    with open(out_dir / MANIFEST_FILE, "w", encoding="utf-8") as f:
        f.write(f"seed={seed}\n")
        f.write(f"ratios={ratios[0]}:{ratios[1]}:{ratios[2]}\n")
        for k, v in (extra_manifest or {}).items():
            f.write(f"{k}={v}\n")


@dataclass
class Dataset:
    """Everything loaded from a data directory, ready for training."""

    node_vocab: Vocab
    rel_vocab: Vocab
    splits: SplitSet
    kg: list[FactTriplet]
    network: CombinedNetwork = field(init=False)

    def __post_init__(self):
        all_ddi = self.splits.train + self.splits.valid + self.splits.test
        self.network = build_combined_network(
            self.node_vocab, self.rel_vocab, self.splits.train, self.kg, all_ddi
        )

    @property
    def ddi_relation_ids(self) -> list[int]:
        return sorted(self.network.ddi_relation_ids)

    @property
    def drug_node_ids(self) -> list[int]:
        return sorted(self.network.drug_node_ids)


def load_data_dir(data_dir: str | Path, kg_fraction: float = 1.0, kg_seed: int = 0) -> Dataset:
    """Load split + KG files. ``kg_fraction`` subsamples KG triples (ablation)."""
    data_dir = Path(data_dir)
    node_vocab, rel_vocab = Vocab(), Vocab()
    splits = SplitSet(
        train=load_triples(data_dir / SPLIT_FILES["train"], node_vocab, rel_vocab),
        valid=load_triples(data_dir / SPLIT_FILES["valid"], node_vocab, rel_vocab),
        test=load_triples(data_dir / SPLIT_FILES["test"], node_vocab, rel_vocab),
    )
    kg = load_triples(data_dir / KG_FILE, node_vocab, rel_vocab)
    if kg_fraction < 1.0:
        keep = max(0, int(round(len(kg) * kg_fraction)))
        order = list(kg)
        random.Random(kg_seed).shuffle(order)
        kg = sorted(order[:keep], key=lambda t: (t.head, t.relation, t.tail))
    return Dataset(node_vocab, rel_vocab, splits, kg)


# ---------------------------------------------------------------------------
# raw preprocessing: relation filtering rules before splitting


def filter_one_relation_per_pair(triples: list[FactTriplet]) -> list[FactTriplet]:
    """Keep only drug-pairs associated with exactly one relation type."""
    by_pair: dict[tuple[int, int], set[int]] = {}
    for t in triples:
        by_pair.setdefault((t.head, t.tail), set()).add(t.relation)
    return [t for t in triples if len(by_pair[(t.head, t.tail)]) == 1]


def filter_relations_by_rank(
    triples: list[FactTriplet], rank_lo: int, rank_hi: int
) -> list[FactTriplet]:
    """Keep relations ranked [rank_lo, rank_hi) by decreasing triple count.

    Ties broken by relation id for determinism.
    """
    counts: dict[int, int] = {}
    for t in triples:
        counts[t.relation] = counts.get(t.relation, 0) + 1
    ranked = sorted(counts, key=lambda r: (-counts[r], r))
    kept = set(ranked[rank_lo:rank_hi])
    return [t for t in triples if t.relation in kept]
