"""Reserve-price instances built from graphs.

The reduction maps a densest-k-subgraph question to an instance whose optimal
linear policy encodes the chosen vertex set: a heavily weighted all-ones
impression pays off exactly when the selected coordinates sum to at most k,
and one impression per edge pays a bonus when both endpoints are selected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AuctionSample, Box, Dataset, LinearModel

__all__ = [
    "Graph",
    "reduce_densest_subgraph",
    "subgraph_indicator",
    "reduction_reward_formula",
    "recover_subgraph",
]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0 .. num_vertices - 1``."""

    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.num_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        norm = []
        seen = set()
        for e in self.edges:
            u, v = int(e[0]), int(e[1])
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(norm))

    @classmethod
    def from_edge_list(cls, text: str, num_vertices: int | None = None) -> "Graph":
        """Parse a ``u v`` pair per line (0-indexed); blank lines and ``#``
        comments are skipped.  Vertex count defaults to one past the largest
        endpoint."""
        edges = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'u v', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
        if num_vertices is None:
            if not edges:
                raise ValueError("empty edge list needs an explicit vertex count")
            num_vertices = max(max(e) for e in edges) + 1
        return cls(num_vertices, tuple(edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)


def reduce_densest_subgraph(g: Graph, k: int) -> tuple[Dataset, Box]:
    """Instance whose optimal policy selects a densest k-vertex subgraph.

    The all-ones impression (top bid ``k``, second bid 0) is replicated
    ``|V|^2`` times via a single weighted row; each edge contributes one
    impression with top bid 2 and second bid 1.5 on its endpoint indicator.
    The box is the unit hypercube with no offset.
    """
    if not 1 <= k <= g.num_vertices:
        raise ValueError(f"k must be in [1, {g.num_vertices}], got {k}")
    d = g.num_vertices
    samples = [AuctionSample(np.ones(d), float(k), 0.0)]
    weights = [float(d * d)]
    for u, v in g.edges:
        w = np.zeros(d)
        w[u] = 1.0
        w[v] = 1.0
        samples.append(AuctionSample(w, 2.0, 1.5))
        weights.append(1.0)
    box = Box(np.zeros(d), np.ones(d))
    return Dataset(tuple(samples), np.array(weights)), box


def subgraph_indicator(vertex_set, d: int) -> LinearModel:
    """Indicator policy of a vertex set: coefficient 1 on members, else 0."""
    beta = np.zeros(d)
    for v in vertex_set:
        v = int(v)
        if not 0 <= v < d:
            raise ValueError(f"vertex {v} out of range for dimension {d}")
        beta[v] = 1.0
    return LinearModel(beta, 0.0)


def reduction_reward_formula(g: Graph, subgraph_vertices, k: int) -> float:
    """Closed-form average reward of a k-set indicator on the reduced instance.

    Equals ``(k |V|^2 + 1.5 |E| + 0.5 |E_H|) / n`` where ``E_H`` are the edges
    inside the set and ``n = |V|^2 + |E|``: every all-ones impression pays
    ``k``, every edge pays at least its second bid 1.5, and edges inside the
    set pay 2 instead.
    """
    chosen = {int(v) for v in subgraph_vertices}
    if len(chosen) != k:
        raise ValueError(f"subgraph must have exactly k={k} vertices, got {len(chosen)}")
    for v in chosen:
        if not 0 <= v < g.num_vertices:
            raise ValueError(f"vertex {v} out of range")
    e_h = sum(1 for u, v in g.edges if u in chosen and v in chosen)
    n = g.num_vertices**2 + g.num_edges
    return (k * g.num_vertices**2 + 1.5 * g.num_edges + 0.5 * e_h) / n


def recover_subgraph(model: LinearModel, threshold: float = 0.5) -> set[int]:
    """Vertices whose coefficient clears the threshold."""
    return {int(v) for v in np.flatnonzero(model.beta >= threshold)}
