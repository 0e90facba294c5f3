"""Directed communication graphs and the packet-drop model."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Digraph",
    "PacketLossModel",
    "complete_graph",
    "cycle_graph",
    "from_edges",
    "build_radius_graph",
    "out_laplacian",
    "strongly_connected",
    "sample_delivery",
    "parse_topology",
    "write_edges_csv",
]


@dataclass
class Digraph:
    """``adj[i, j]`` is True when robot ``i`` sends to robot ``j``."""

    adj: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(np.diag(adj)):
            raise ValueError("self-loops are not allowed")
        self.adj = adj

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def out_degree(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    @property
    def in_degree(self) -> np.ndarray:
        return self.adj.sum(axis=0)

    def edges(self) -> list[tuple[int, int]]:
        src, dst = np.nonzero(self.adj)
        return list(zip(src.tolist(), dst.tolist()))

    def in_neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[:, i])

    def out_neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i])


def complete_graph(n: int) -> Digraph:
    return Digraph(~np.eye(n, dtype=bool))


def cycle_graph(n: int) -> Digraph:
    adj = np.zeros((n, n), dtype=bool)
    if n > 1:
        adj[np.arange(n), (np.arange(n) + 1) % n] = True
    return Digraph(adj)


def from_edges(n: int, edges) -> Digraph:
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for {n} vertices")
        adj[i, j] = True
    return Digraph(adj)


def build_radius_graph(positions, radius: float) -> Digraph:
    """Symmetric disk graph: ``i -> j`` iff ``i != j`` and ``|s_i - s_j| <= radius``."""
    if radius <= 0:
        raise ValueError("communication radius must be positive")
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    adj = dist <= radius
    np.fill_diagonal(adj, False)
    return Digraph(adj)


def out_laplacian(g: Digraph) -> np.ndarray:
    """``D_out - A`` with ``A[i, j] = 1`` for each edge ``i -> j``."""
    a = g.adj.astype(float)
    return np.diag(a.sum(axis=1)) - a


def strongly_connected(g: Digraph) -> bool:
    if g.n <= 1:
        return True
    count, _ = connected_components(g.adj.astype(np.int8), directed=True, connection="strong")
    return count == 1


@dataclass
class PacketLossModel:
    """Each directed message is dropped independently with probability ``drop_rate``."""

    drop_rate: float = 0.0
    seed: int | None = None
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.drop_rate < 1.0:
            raise ValueError(f"drop rate must lie in [0, 1), got {self.drop_rate}")
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)


def sample_delivery(g: Digraph, loss: PacketLossModel) -> np.ndarray:
    """Boolean mask of the edges whose message gets through this step.

    A full ``n x n`` uniform draw is consumed every call, even when nothing is
    dropped, so the random stream does not depend on the loss rate.
    """
    draws = loss.rng.random(g.adj.shape)
    return g.adj & (draws >= loss.drop_rate)


def parse_topology(spec: str | list) -> tuple[str, object]:
    """Topology config -> ``("all_to_all", None)``, ``("radius", r)`` or ``("edges", [...])``."""
    if isinstance(spec, (list, tuple)):
        return "edges", [tuple(int(v) for v in e) for e in spec]
    text = str(spec).strip()
    if text == "all_to_all":
        return "all_to_all", None
    if text.startswith("radius:"):
        radius = float(text.split(":", 1)[1])
        if radius <= 0:
            raise ValueError("communication radius must be positive")
        return "radius", radius
    raise ValueError(f"unknown topology {spec!r}; use 'all_to_all', 'radius:<r>' or an edge list")


def write_edges_csv(g: Digraph, path, ids=None):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for i, j in g.edges():
            if ids is not None:
                i, j = ids[i], ids[j]
            writer.writerow([i, j])
