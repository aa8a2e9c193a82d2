"""Command-line entry points tying the pipeline together."""
from __future__ import annotations

import argparse
import itertools
import random
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import CheckpointError
from .config import RunConfig
from .explain import enumerate_explaining_paths, export_dot, format_paths
from .graph import (
    Dataset,
    TripleParseError,
    Vocab,
    filter_one_relation_per_pair,
    filter_relations_by_rank,
    load_data_dir,
    load_triples,
    split_ddi,
    write_data_dir,
)
from .metrics import auroc, format_report
from .train import (
    NumericalError,
    SubgraphCache,
    UnknownNodeError,
    evaluate_multiclass,
    evaluate_multilabel,
    forward_pair,
    infer,
    load_model,
    save_model,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--data-dir", type=Path)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--task", choices=["multiclass", "multilabel"])
    p.add_argument("--threads", type=int)
    p.add_argument("--kg-fraction", type=float)
    p.add_argument(
        "--subgraph-mode",
        choices=["random", "enclosing", "drugflow", "knowledge", "knowledge-no-resemble"],
    )
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field")


def _effective_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        "seed": args.seed,
        "task": args.task,
        "threads": args.threads,
        "kg_fraction": args.kg_fraction,
        "subgraph_mode": args.subgraph_mode,
    }
    names = {f.name for f in fields(RunConfig)}
    for item in args.set:
        key, _, value = item.partition("=")
        if key not in names:
            raise UsageError(f"unknown config key {key!r}")
        text = "\n".join(
            f"{k}={v}" for k, v in {**{f.name: getattr(cfg, f.name) for f in fields(RunConfig)}, key: value}.items()
        )
        cfg = RunConfig.from_text(text)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _load_dataset(args, cfg: RunConfig) -> Dataset:
    if not args.data_dir:
        raise UsageError("--data-dir is required")
    return load_data_dir(args.data_dir, kg_fraction=cfg.kg_fraction, kg_seed=cfg.seed)


def build_parser() -> _Parser:
    parser = _Parser(prog="ddipred", description="Drug interaction prediction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="filter, split, and write a data directory")
    _add_common(p)
    p.add_argument("--ddi-file", type=Path)
    p.add_argument("--kg-file", type=Path)
    p.add_argument("--synthetic", action="store_true", help="generate the planted-rule dataset")
    p.add_argument("--one-relation-filter", action="store_true",
                   help="keep only pairs with a single relation type")
    p.add_argument("--relation-rank-window", metavar="LO:HI",
                   help="keep relations ranked [LO, HI) by triple count")
    p.add_argument("--ratios", default="7:1:2")

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--split", choices=["train", "valid", "test"], default="test")

    p = sub.add_parser("predict", help="predict interaction type(s) for pairs")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--pair", help="HEAD,TAIL node labels")
    p.add_argument("--pair-file", type=Path, help="file of HEAD<TAB>TAIL lines")

    p = sub.add_parser("explain", help="ranked explaining paths for a pair")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--pair", required=True, help="HEAD,TAIL node labels")
    p.add_argument("--max-paths", type=int, default=20)
    p.add_argument("--dot-out", type=Path)

    p = sub.add_parser("selftest", help="run built-in oracle and gradient suites")
    _add_common(p)

    p = sub.add_parser("serve", help="serve predict/explain over HTTP")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


# ---------------------------------------------------------------------------
# commands


def cmd_preprocess(args, cfg: RunConfig) -> int:
    if not args.out_dir:
        raise UsageError("--out-dir is required")
    ratios = tuple(int(x) for x in args.ratios.split(":"))
    if len(ratios) != 3:
        raise UsageError("--ratios must be A:B:C")
    if args.synthetic:
        from .synthetic import SyntheticSpec, write_synthetic

        spec = SyntheticSpec(seed=cfg.seed, task=cfg.task, ratios=ratios)
        write_synthetic(args.out_dir, spec)
        print(f"synthetic dataset written to {args.out_dir}")
        return EXIT_OK
    if not args.ddi_file or not args.kg_file:
        raise UsageError("--ddi-file and --kg-file are required (or --synthetic)")
    node_vocab, rel_vocab = Vocab(), Vocab()
    ddi = load_triples(args.ddi_file, node_vocab, rel_vocab)
    kg = load_triples(args.kg_file, node_vocab, rel_vocab)
    if args.one_relation_filter:
        ddi = filter_one_relation_per_pair(ddi)
    if args.relation_rank_window:
        lo, _, hi = args.relation_rank_window.partition(":")
        ddi = filter_relations_by_rank(ddi, int(lo), int(hi))
    splits = split_ddi(ddi, ratios, cfg.seed)
    write_data_dir(args.out_dir, splits, kg, node_vocab, rel_vocab, cfg.seed, ratios)
    print(
        f"wrote {len(splits.train)}/{len(splits.valid)}/{len(splits.test)} "
        f"train/valid/test triples to {args.out_dir}"
    )
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    if not args.out_dir:
        raise UsageError("--out-dir is required")
    dataset = _load_dataset(args, cfg)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    cfg.write(args.out_dir / "config.txt")
    log_lines: list[str] = []

    def log(msg):
        print(msg)
        log_lines.append(msg)

    result = train(dataset, cfg, log=log, diag_dir=args.out_dir)
    meta = {
        "epochs_run": str(result.epochs_run),
        "best_epoch": str(result.best_epoch),
        "best_val_loss": f"{result.best_val_loss:.9f}",
    }
    save_model(args.out_dir / "checkpoint.ckpt", result.model, dataset, metadata=meta)
    (args.out_dir / "train_log.txt").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    print(f"checkpoint written to {args.out_dir / 'checkpoint.ckpt'}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    dataset = _load_dataset(args, cfg)
    model = load_model(args.checkpoint, dataset)
    triples = getattr(dataset.splits, args.split)
    if model.config.task == "multiclass":
        metrics, _ = evaluate_multiclass(model, dataset, triples)
        per_rel = None
    else:
        res = evaluate_multilabel(model, dataset, triples)
        metrics = {"auroc": res.auroc, "auprc": res.auprc, "ap50": res.ap50}
        per_rel = res.per_relation
    human, machine = format_report(metrics, per_rel)
    print(human, end="")
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "metrics.txt").write_text(human, encoding="utf-8")
        (args.out_dir / "metrics.kv").write_text(machine, encoding="utf-8")
        cfg.write(args.out_dir / "config.txt")
    return EXIT_OK


def _iter_pairs(args):
    if args.pair:
        head, _, tail = args.pair.partition(",")
        if not head or not tail:
            raise UsageError("--pair must be HEAD,TAIL")
        yield head.strip(), tail.strip()
    elif args.pair_file:
        for line in args.pair_file.read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TripleParseError(f"pair file line {line!r}: expected HEAD<TAB>TAIL")
            yield parts[0], parts[1]
    else:
        raise UsageError("one of --pair or --pair-file is required")


def cmd_predict(args, cfg: RunConfig) -> int:
    dataset = _load_dataset(args, cfg)
    model = load_model(args.checkpoint, dataset)
    for head, tail in _iter_pairs(args):
        result = infer(model, dataset, head, tail)
        if model.config.task == "multiclass":
            rel_label, scores = result
            print(f"{head}\t{tail}\t{rel_label}\t{np.max(scores):.6f}")
        else:
            ranked = sorted(result.items(), key=lambda kv: -kv[1])
            top = " ".join(f"{r}:{s:.4f}" for r, s in ranked)
            print(f"{head}\t{tail}\t{top}")
    return EXIT_OK


def cmd_explain(args, cfg: RunConfig) -> int:
    dataset = _load_dataset(args, cfg)
    model = load_model(args.checkpoint, dataset)
    from .encoder import generic_embeddings
    from .train import resolve_pair

    pair = resolve_pair(dataset, *next(_iter_pairs(args)))
    cache = SubgraphCache(dataset, model.config)
    generic = generic_embeddings(dataset.network, model.encoder_params, train=False)
    _, ks = forward_pair(model, cache, generic, pair[0], pair[1], dataset.network.resemble_rel)
    paths = enumerate_explaining_paths(ks, model.config.p, args.max_paths)
    report = format_paths(paths, ks, dataset.network)
    print(report, end="")
    dot = export_dot(ks, dataset.network, paths)
    if args.dot_out:
        args.dot_out.write_text(dot, encoding="utf-8")
    elif not paths:
        print("# no explaining paths")
    return EXIT_OK


def cmd_selftest(args, cfg: RunConfig) -> int:
    failures = []

    def check(name, ok):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    # gradients of a composite of all primitives vs finite differences
    rng = np.random.default_rng(0)
    x = T.Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    w = T.Tensor(rng.normal(size=(3, 3)), requires_grad=True)

    def f():
        y = T.relu(T.matmul(x, w))
        z = T.sigmoid(T.mean_rows(T.neg_abs_diff(y, x)))
        s = T.grouped_softmax(T.reshape(z, (3,)), [0, 0, 0], 1)
        return T.sum_all(T.log(T.clip(s, 1e-12, 1.0)))

    err = T.finite_diff_check(f, [x, w])
    check(f"gradient check (max rel err {err:.2e})", err < 1e-4)

    # subgraph extraction vs exhaustive walk enumeration
    from .subgraph import directional_prune

    ok = True
    for trial in range(20):
        trial_rng = random.Random(trial)
        n = trial_rng.randint(4, 10)
        edges = sorted(
            {
                (trial_rng.randrange(n), trial_rng.randrange(3), trial_rng.randrange(n))
                for _ in range(2 * n)
            }
        )
        edges = [(u, r, v) for u, r, v in edges if u != v]
        h, t, p = 0, 1, 3
        dfs = directional_prune(list(range(n)), edges, h, t, p, identity_rel=99)
        nodes_on_walks = {h, t}
        adj = {}
        for u, r, v in edges:
            adj.setdefault(u, []).append((v, r))
        stack = [(h, (h,))]
        while stack:
            node, path = stack.pop()
            if node == t and len(path) > 1:
                nodes_on_walks.update(path)
            if len(path) <= p:
                for v, _ in adj.get(node, ()):
                    stack.append((v, path + (v,)))
        if set(dfs.nodes) != nodes_on_walks:
            ok = False
            break
    check("subgraph pruning vs walk-enumeration oracle", ok)

    # AUROC vs O(n^2) pairwise comparison
    scores = rng.random(60)
    labels = (rng.random(60) > 0.5).astype(int)
    if labels.sum() in (0, 60):
        labels[0], labels[1] = 0, 1
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    brute = float(
        np.mean([(1.0 if a > b else 0.5 if a == b else 0.0) for a, b in itertools.product(pos, neg)])
    )
    check("AUROC vs pairwise oracle", abs(auroc(scores, labels) - brute) < 1e-9)

    if failures:
        print(f"{len(failures)} selftest failure(s)")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_serve(args, cfg: RunConfig) -> int:
    import uvicorn

    from .service import create_app

    dataset = _load_dataset(args, cfg)
    model = load_model(args.checkpoint, dataset)
    app = create_app(model, dataset)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "explain": cmd_explain,
    "selftest": cmd_selftest,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _effective_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TripleParseError, FileNotFoundError, CheckpointError, UnknownNodeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
