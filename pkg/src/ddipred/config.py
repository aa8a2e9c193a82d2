"""Run configuration: every hyperparameter plus task mode, file round-trip."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class RunConfig:
    k: int = 2  # neighborhood hops for the enclosing stage
    p: int = 4  # max relational path length
    layers: int = 2  # encoder depth
    dim: int = 32  # embedding width
    iterations: int = 3  # structure/embedding refinement rounds
    alpha: float = 0.5  # original-adjacency vs learned-score mix
    gamma: float = 0.1  # strength pruning threshold
    lr: float = 5e-3
    weight_decay: float = 1e-5
    max_epochs: int = 50
    patience: int = 10
    dropout: float = 0.2
    batch_size: int = 256
    task: str = "multiclass"  # or "multilabel"
    seed: int = 0
    node_cap: int = 256
    subgraph_mode: str = "knowledge"
    loss_reduction: str = "sum"  # or "mean"
    resample_negatives: bool = True
    threads: int = 1
    kg_fraction: float = 1.0

    def validate(self):
        if self.task not in ("multiclass", "multilabel"):
            raise ValueError(f"unknown task: {self.task}")
        for name in ("k", "p", "layers", "dim", "iterations", "max_epochs",
                     "patience", "batch_size", "node_cap", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in known:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            kwargs[key] = _coerce(cls, key, value)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def write(self, path: str | Path):
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _coerce(cls, key: str, value: str):
    default = getattr(cls(), key)
    if isinstance(default, bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean for {key}: {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value
