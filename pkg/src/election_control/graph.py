"""Directed social graphs with per-edge propagation probabilities.

Edges are stored sorted by ``(source, target)``; an edge's position in that
order is its *edge index*, which is what scenarios refer to.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateEdgeError, ParseError, ValidationError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable directed graph on nodes ``0..n-1``.

    Build instances with :meth:`from_edges` or :func:`load_edge_list`; the
    constructor expects already-sorted, validated arrays.
    """

    n: int
    sources: np.ndarray
    targets: np.ndarray
    probs: np.ndarray
    labels: tuple[str, ...]
    indptr: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int, float]],
        labels: Sequence[str] | None = None,
    ) -> DirectedGraph:
        if n < 0:
            raise ValidationError(f"node count must be nonnegative, got {n}")
        triples = [(int(u), int(v), float(p)) for u, v, p in edges]
        seen: set[tuple[int, int]] = set()
        for u, v, p in triples:
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) references a node outside 0..{n - 1}")
            if u == v:
                raise ValidationError(f"self-loop on node {u}")
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"edge ({u}, {v}) has probability {p} outside [0, 1]")
            if (u, v) in seen:
                raise DuplicateEdgeError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        triples.sort()
        sources = np.array([t[0] for t in triples], dtype=np.int64)
        targets = np.array([t[1] for t in triples], dtype=np.int64)
        probs = np.array([t[2] for t in triples], dtype=np.float64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, sources + 1, 1)
        np.cumsum(indptr, out=indptr)
        if labels is None:
            labels = [str(i) for i in range(n)]
        if len(labels) != n:
            raise ValidationError(f"{len(labels)} labels for {n} nodes")
        return cls(
            n=n,
            sources=_frozen(sources),
            targets=_frozen(targets),
            probs=_frozen(probs),
            labels=tuple(str(x) for x in labels),
            indptr=_frozen(indptr),
        )

    @property
    def m(self) -> int:
        """Number of edges."""
        return int(self.sources.shape[0])

    def edges(self) -> list[tuple[int, int, float]]:
        return [
            (int(u), int(v), float(p))
            for u, v, p in zip(self.sources, self.targets, self.probs)
        ]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def out_neighbors(self, v: int) -> list[tuple[int, float]]:
        return out_neighbors(self, v)

    def with_uniform_probability(self, p: float) -> DirectedGraph:
        """Copy of this graph with every edge probability replaced by ``p``."""
        return DirectedGraph.from_edges(
            self.n, ((u, v, p) for u, v, _ in self.edges()), self.labels
        )

    def symmetrized(self) -> DirectedGraph:
        """Add the reverse of every edge that lacks one (reverse gets the same p)."""
        have = {(u, v) for u, v, _ in self.edges()}
        extra = [(v, u, p) for u, v, p in self.edges() if (v, u) not in have]
        return DirectedGraph.from_edges(self.n, self.edges() + extra, self.labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.sources, other.sources)
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None  # type: ignore[assignment]


def out_neighbors(g: DirectedGraph, v: int) -> list[tuple[int, float]]:
    """Out-edges of ``v`` as ``(target, p)`` pairs in ascending target order."""
    if not 0 <= v < g.n:
        raise IndexError(f"node {v} out of range for graph with {g.n} nodes")
    lo, hi = g.indptr[v], g.indptr[v + 1]
    return [(int(t), float(p)) for t, p in zip(g.targets[lo:hi], g.probs[lo:hi])]


def load_edge_list(
    path: str | Path,
    default_p: float | None = None,
    symmetrize: bool = False,
) -> DirectedGraph:
    """Read a whitespace-separated ``u v [p]`` edge list.

    Node tokens are arbitrary strings, remapped to dense ids in order of first
    appearance; the original tokens are kept in ``graph.labels``. Lines
    starting with ``#`` and blank lines are skipped.

    With ``symmetrize`` each line contributes both ``u->v`` and ``v->u``; a
    line whose unordered pair was already seen is then a duplicate.
    """
    path = Path(path)
    ids: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    seen: dict[tuple[int, int], int] = {}

    def node(tok: str) -> int:
        if tok not in ids:
            ids[tok] = len(ids)
        return ids[tok]

    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'u v [p]', got {line!r}", lineno, str(path))
            if len(parts) == 3:
                try:
                    p = float(parts[2])
                except ValueError:
                    raise ParseError(f"bad probability {parts[2]!r}", lineno, str(path)) from None
            elif default_p is None:
                raise ParseError("edge has no probability and no default was given", lineno, str(path))
            else:
                p = float(default_p)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{path}:{lineno}: probability {p} outside [0, 1]")
            u, v = node(parts[0]), node(parts[1])
            if u == v:
                raise ValidationError(f"{path}:{lineno}: self-loop on {parts[0]!r}")
            key = (min(u, v), max(u, v)) if symmetrize else (u, v)
            if key in seen:
                raise DuplicateEdgeError(
                    f"duplicate edge {parts[0]} {parts[1]} (first seen on line {seen[key]})",
                    lineno,
                    str(path),
                )
            seen[key] = lineno
            edges.append((u, v, p))
            if symmetrize:
                edges.append((v, u, p))

    labels = [None] * len(ids)
    for tok, i in ids.items():
        labels[i] = tok
    return DirectedGraph.from_edges(len(ids), edges, labels)


def write_edge_list(g: DirectedGraph, path: str | Path) -> None:
    """Write ``g`` as ``label_u label_v p`` lines; ``repr`` keeps p exact."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"# {g.n} nodes, {g.m} edges\n")
        for u, v, p in g.edges():
            fh.write(f"{g.labels[u]} {g.labels[v]} {p!r}\n")
