"""Versioned binary checkpoint container.

Layout (all integers little-endian):
    magic          8 bytes  b"DDIPCKPT"
    version        uint32
    header_len     uint64, then UTF-8 header text of key=value lines
                   (node_digest, relation_digest, class_rels, metadata)
    config_len     uint64, then UTF-8 RunConfig text block
    num_params     uint32
    per parameter:
        name_len   uint16, name bytes
        ndim       uint8
        dims       ndim * uint64
        buffer     float64 little-endian, row-major
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .config import RunConfig

MAGIC = b"DDIPCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(
    path: str | Path,
    config: RunConfig,
    params: list[tuple[str, np.ndarray]],
    node_digest: str,
    relation_digest: str,
    class_rels: list[int],
    metadata: dict[str, str] | None = None,
):
    header = {
        "node_digest": node_digest,
        "relation_digest": relation_digest,
        "class_rels": ",".join(str(r) for r in class_rels),
    }
    header.update(metadata or {})
    header_text = "\n".join(f"{k}={v}" for k, v in header.items()).encode("utf-8")
    config_text = config.to_text().encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header_text)))
        f.write(header_text)
        f.write(struct.pack("<Q", len(config_text)))
        f.write(config_text)
        f.write(struct.pack("<I", len(params)))
        for name, arr in params:
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path):
    """Returns (config, params dict, header dict)."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    off = 8
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    header_text = data[off : off + hlen].decode("utf-8")
    off += hlen
    (clen,) = struct.unpack_from("<Q", data, off)
    off += 8
    config = RunConfig.from_text(data[off : off + clen].decode("utf-8"))
    off += clen
    (nparams,) = struct.unpack_from("<I", data, off)
    off += 4
    params: dict[str, np.ndarray] = {}
    for _ in range(nparams):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape)
        params[name] = arr.astype(np.float64)
        off += 8 * size
    header = {}
    for line in header_text.splitlines():
        k, _, v = line.partition("=")
        header[k] = v
    return config, params, header
