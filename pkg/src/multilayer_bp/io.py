"""CSV/TSV readers and writers for networks, partitions and marginals.

Files are UTF-8 with LF line endings and a mandatory header row.  Lines
starting with ``#`` are comments; a ``# n_nodes=N n_layers=L`` comment pins
the network size so isolated nodes and empty layers survive a round trip.
"""
from __future__ import annotations

import csv
import io
import re
from pathlib import Path

import numpy as np

from .graph import MultilayerNetwork, NetworkError, build_network
from .metrics import Partition

INTRA_HEADER = ("layer", "u", "v", "weight")
INTER_HEADER = ("node", "layer_a", "layer_b", "weight")
PARTITION_HEADER = ("node", "layer", "community")
_SIZE_RE = re.compile(r"n_nodes\s*=\s*(\d+).*?n_layers\s*=\s*(\d+)")


def _open_write(path):
    return open(path, "w", encoding="utf-8", newline="")


def _read_table(path):
    """``(header, rows, size_hint)`` from a comma- or tab-separated file."""
    text = Path(path).read_text(encoding="utf-8")
    size = None
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            m = _SIZE_RE.search(stripped)
            if m:
                size = (int(m.group(1)), int(m.group(2)))
            continue
        body.append(line)
    if not body:
        raise NetworkError(f"{path}: missing header row")
    delim = "\t" if "\t" in body[0] else ","
    rows = list(csv.reader(io.StringIO("\n".join(body)), delimiter=delim))
    header = [h.strip() for h in rows[0]]
    return header, rows[1:], size


def read_size_hint(path):
    """``(n_nodes, n_layers)`` from the size comment, or ``None``."""
    return _read_table(path)[2]


def _columns(path, header, rows, required, optional=()):
    missing = [c for c in required if c not in header]
    if missing:
        raise NetworkError(f"{path}: header lacks column(s) {', '.join(missing)}")
    out = {}
    for name in (*required, *optional):
        if name in header:
            k = header.index(name)
            try:
                out[name] = np.array([float(r[k]) for r in rows], dtype=float)
            except (ValueError, IndexError) as exc:
                raise NetworkError(f"{path}: bad value in column {name!r}: {exc}") from exc
    return out


def read_network(intra_path, inter=None, coupling: str | None = None,
                 n_nodes: int | None = None, n_layers: int | None = None) -> MultilayerNetwork:
    """Load a network from an intralayer edge file plus a coupling file or preset."""
    if inter is not None and coupling is not None:
        raise ValueError("give either an interlayer file or a coupling preset, not both")
    header, rows, size = _read_table(intra_path)
    cols = _columns(intra_path, header, rows, ("layer", "u", "v"), ("weight",))
    weight = cols.get("weight", np.ones(len(rows)))
    intra = np.column_stack([cols["layer"], cols["u"], cols["v"], weight]) if rows \
        else np.zeros((0, 4))
    if size is not None:
        n_nodes = n_nodes if n_nodes is not None else size[0]
        n_layers = n_layers if n_layers is not None else size[1]
    if inter is not None:
        h2, r2, size2 = _read_table(inter)
        c2 = _columns(inter, h2, r2, ("node", "layer_a", "layer_b"), ("weight",))
        w2 = c2.get("weight", np.ones(len(r2)))
        inter_rows = np.column_stack([c2["node"], c2["layer_a"], c2["layer_b"], w2]) if r2 \
            else np.zeros((0, 4))
        if size2 is not None and n_nodes is None:
            n_nodes, n_layers = size2
        return build_network(intra, inter_rows, n_nodes, n_layers)
    return build_network(intra, coupling or "none", n_nodes, n_layers)


def _size_comment(net):
    return f"# n_nodes={net.n_nodes} n_layers={net.n_layers}\n"


def write_network(net: MultilayerNetwork, intra_path, inter_path=None):
    """Write the intralayer edge list and, optionally, the interlayer coupling list."""
    i, j, w = net.intra_edges()
    with _open_write(intra_path) as fh:
        fh.write(_size_comment(net))
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(INTRA_HEADER)
        for a, b, x in zip(i, j, w):
            out.writerow((int(net.layer_of[a]), int(net.node_of[a]), int(net.node_of[b]), repr(float(x))))
    if inter_path is not None:
        ci, cj, cw = net.inter_edges()
        with _open_write(inter_path) as fh:
            fh.write(_size_comment(net))
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(INTER_HEADER)
            for a, b, x in zip(ci, cj, cw):
                out.writerow((int(net.node_of[a]), int(net.layer_of[a]), int(net.layer_of[b]),
                              repr(float(x))))


def write_partition(path, net: MultilayerNetwork, part):
    labels = np.asarray(part, dtype=np.int64)
    with _open_write(path) as fh:
        fh.write(_size_comment(net))
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(PARTITION_HEADER)
        for i, c in enumerate(labels):
            out.writerow((int(net.node_of[i]), int(net.layer_of[i]), int(c)))


def read_partition(path, n_nodes: int | None = None, n_layers: int | None = None) -> Partition:
    """Labels ordered by node-layer index ``node + n_nodes * layer``."""
    header, rows, size = _read_table(path)
    cols = _columns(path, header, rows, PARTITION_HEADER)
    node = cols["node"].astype(np.int64)
    layer = cols["layer"].astype(np.int64)
    if size is not None:
        n_nodes = n_nodes or size[0]
        n_layers = n_layers or size[1]
    n_nodes = n_nodes or int(node.max()) + 1
    n_layers = n_layers or int(layer.max()) + 1
    idx = node + n_nodes * layer
    if len(idx) != n_nodes * n_layers or len(np.unique(idx)) != len(idx):
        raise NetworkError(f"{path}: partition must list every node-layer exactly once")
    labels = np.empty(n_nodes * n_layers, dtype=np.int64)
    labels[idx] = cols["community"].astype(np.int64)
    return Partition(labels)


def write_marginals(path, net: MultilayerNetwork, marginals: np.ndarray):
    q = marginals.shape[1]
    with _open_write(path) as fh:
        fh.write(_size_comment(net))
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("node", "layer", *[f"p{t}" for t in range(q)]))
        for i, row in enumerate(marginals):
            out.writerow((int(net.node_of[i]), int(net.layer_of[i]), *[repr(float(x)) for x in row]))


def write_table(path, records: list[dict]):
    if not records:
        raise ValueError("no records to write")
    with _open_write(path) as fh:
        out = csv.DictWriter(fh, fieldnames=list(records[0]), lineterminator="\n")
        out.writeheader()
        out.writerows(records)
