"""Live-edge scenarios of the independent cascade model and reachability.

A scenario keeps each edge independently with its propagation probability;
a node is influenced iff it is reachable from a seed along kept edges.

Two reachability paths exist. The per-query functions (:func:`reach_count`,
:func:`reach_indicator`, :func:`reverse_reach_sets`) run a breadth-first
search on one scenario. :class:`ReachIndex` precomputes, for every scenario
and node, the descendant set as a packed ``uint64`` bitset (via the SCC
condensation of the live graph) so that batch evaluations are vectorised.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .graph import DirectedGraph

DEFAULT_SCENARIOS = 1000
# Bytes allowed for one ReachIndex (r * n * words * 8).
REACH_INDEX_BYTES = 2 << 30


# ---------------------------------------------------------------- bitsets

def n_words(n: int) -> int:
    return max(1, (n + 63) // 64)


def mask_from_bool(flags: np.ndarray) -> np.ndarray:
    """Pack a boolean node vector into a ``(words,)`` uint64 bitset."""
    flags = np.asarray(flags, dtype=bool)
    w = n_words(flags.shape[0])
    packed = np.packbits(flags, bitorder="little")
    buf = np.zeros(8 * w, dtype=np.uint8)
    buf[: packed.shape[0]] = packed
    return buf.view("<u8").astype(np.uint64)


def mask_from_nodes(nodes: Iterable[int], n: int) -> np.ndarray:
    flags = np.zeros(n, dtype=bool)
    idx = list(nodes)
    if idx:
        flags[idx] = True
    return mask_from_bool(flags)


def popcount(bits: np.ndarray) -> np.ndarray:
    """Number of set bits along the last axis."""
    return np.bitwise_count(bits).sum(axis=-1, dtype=np.int64)


def _ints_to_words(values: list[int], w: int) -> np.ndarray:
    raw = b"".join(x.to_bytes(8 * w, "little") for x in values)
    return np.frombuffer(raw, dtype="<u8").astype(np.uint64).reshape(len(values), w)


# ---------------------------------------------------------------- scenarios

@dataclass(frozen=True, eq=False)
class Scenario:
    """One live-edge realisation of ``graph``.

    ``seed`` records ``(master_seed, index)`` for sampled scenarios and is
    ``None`` for enumerated ones.
    """

    graph: DirectedGraph
    index: int
    live: np.ndarray
    seed: tuple[int, int] | None = None

    def live_edges(self) -> np.ndarray:
        return np.nonzero(self.live)[0]

    @cached_property
    def adjacency(self) -> list[list[int]]:
        g = self.graph
        adj: list[list[int]] = [[] for _ in range(g.n)]
        for e in self.live_edges():
            adj[g.sources[e]].append(int(g.targets[e]))
        return adj

    @cached_property
    def reverse_adjacency(self) -> list[list[int]]:
        g = self.graph
        radj: list[list[int]] = [[] for _ in range(g.n)]
        for e in self.live_edges():
            radj[g.targets[e]].append(int(g.sources[e]))
        return radj


@dataclass(frozen=True, eq=False)
class ScenarioBatch:
    """Scenarios ``0..r-1`` with nonnegative weights.

    Sampled batches have unit integer weights, so every sum over the batch
    is an exact integer. Enumerated batches carry scenario probabilities.
    """

    graph: DirectedGraph
    scenarios: tuple[Scenario, ...]
    master_seed: int | None
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.scenarios:
            raise ValidationError("a scenario batch needs at least one scenario")
        if [s.index for s in self.scenarios] != list(range(len(self.scenarios))):
            raise ValidationError("scenario indices must be 0..r-1 without gaps")
        if self.weights.shape != (len(self.scenarios),):
            raise ValidationError("one weight per scenario is required")

    @property
    def r(self) -> int:
        return len(self.scenarios)

    @property
    def is_uniform(self) -> bool:
        return self.weights.dtype.kind == "i"

    @property
    def total_weight(self):
        return self.weights.sum()

    def live_matrix(self) -> np.ndarray:
        return np.stack([s.live for s in self.scenarios])

    @cached_property
    def reach(self) -> ReachIndex:
        return ReachIndex.build(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScenarioBatch):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.master_seed == other.master_seed
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.live_matrix(), other.live_matrix())
        )

    __hash__ = None  # type: ignore[assignment]


def _scenario_live(probs: np.ndarray, master_seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))
    return rng.random(probs.shape[0]) < probs


def _live_chunk(args) -> list[np.ndarray]:
    probs, master_seed, indices = args
    return [_scenario_live(probs, master_seed, i) for i in indices]


def sample_batch(
    g: DirectedGraph,
    r: int = DEFAULT_SCENARIOS,
    master_seed: int = 0,
    workers: int | None = None,
) -> ScenarioBatch:
    """Sample ``r`` scenarios; scenario ``i`` depends only on ``(master_seed, i)``."""
    if r < 1:
        raise ValidationError(f"need at least one scenario, got r={r}")
    if master_seed < 0:
        raise ValidationError("master_seed must be nonnegative")
    probs = np.asarray(g.probs)
    if workers and workers > 1 and r > 1:
        chunks = [range(lo, min(r, lo + -(-r // workers))) for lo in range(0, r, -(-r // workers))]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            lives = [x for part in pool.map(_live_chunk, [(probs, master_seed, c) for c in chunks]) for x in part]
    else:
        lives = [_scenario_live(probs, master_seed, i) for i in range(r)]
    scenarios = tuple(Scenario(g, i, live, (master_seed, i)) for i, live in enumerate(lives))
    return ScenarioBatch(g, scenarios, master_seed, np.ones(r, dtype=np.int64))


def exhaustive_batch(g: DirectedGraph, max_edges: int = 20) -> ScenarioBatch:
    """Every scenario with nonzero probability, weighted by that probability.

    Edges with p in {0, 1} are fixed rather than enumerated. When all the
    enumerated scenarios are equally likely the batch gets unit weights.
    """
    probs = np.asarray(g.probs)
    free = np.nonzero((probs > 0) & (probs < 1))[0]
    if free.shape[0] > max_edges:
        raise ValidationError(f"{free.shape[0]} uncertain edges exceed the limit of {max_edges}")
    base = probs >= 1
    lives, weights = [], []
    for bits in itertools.product((False, True), repeat=free.shape[0]):
        live = base.copy()
        live[free] = bits
        pf = probs[free]
        w = float(np.prod(np.where(bits, pf, 1 - pf))) if free.shape[0] else 1.0
        lives.append(live)
        weights.append(w)
    scenarios = tuple(Scenario(g, i, live) for i, live in enumerate(lives))
    if np.allclose(probs[free], 0.5):
        wa = np.ones(len(lives), dtype=np.int64)
    else:
        wa = np.array(weights, dtype=np.float64)
    return ScenarioBatch(g, scenarios, None, wa)


def batch_from_live(g: DirectedGraph, live: np.ndarray, master_seed: int | None = None) -> ScenarioBatch:
    """Uniform batch from an explicit ``(r, m)`` boolean live-edge matrix."""
    live = np.asarray(live, dtype=bool)
    if live.ndim == 1:
        live = live[None, :]
    if live.ndim != 2 or live.shape[1] != g.m:
        raise ValidationError(f"live matrix must have shape (r, {g.m}), got {live.shape}")
    scenarios = tuple(
        Scenario(g, i, row.copy(), None if master_seed is None else (master_seed, i))
        for i, row in enumerate(live)
    )
    return ScenarioBatch(g, scenarios, master_seed, np.ones(len(scenarios), dtype=np.int64))


# ---------------------------------------------------------------- BFS queries

def _forward_closure(y: Scenario, seeds: Iterable[int]) -> set[int]:
    adj = y.adjacency
    seen = set(int(s) for s in seeds)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def influenced(S: Iterable[int], y: Scenario) -> frozenset[int]:
    """All nodes reachable from ``S`` in ``y`` (seeds included)."""
    return frozenset(_forward_closure(y, S))


def reach_count(S: Iterable[int], y: Scenario, A: Iterable[int] | None = None) -> int:
    """Number of nodes of ``A`` (default: all nodes) reachable from ``S``."""
    reached = _forward_closure(y, S)
    if A is None:
        return len(reached)
    return sum(1 for v in set(A) if v in reached)


def reach_indicator(v: int, S: Iterable[int], y: Scenario) -> int:
    if not 0 <= v < y.graph.n:
        raise IndexError(f"node {v} out of range")
    return int(v in _forward_closure(y, S))


@dataclass(frozen=True)
class ReverseReachSets:
    """``sets[v]`` holds every node with a live path to ``v`` (``v`` included)."""

    sets: tuple[frozenset[int], ...]

    def __getitem__(self, v: int) -> frozenset[int]:
        return self.sets[v]

    def __len__(self) -> int:
        return len(self.sets)


def reverse_reach_sets(y: Scenario) -> ReverseReachSets:
    radj = y.reverse_adjacency
    out = []
    for v in range(y.graph.n):
        seen = {v}
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for w in radj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        out.append(frozenset(seen))
    return ReverseReachSets(tuple(out))


# ---------------------------------------------------------------- reach index

def _descendant_ints(n: int, adj: list[list[int]]) -> list[int]:
    """Descendant bitsets (as ints) per node, via iterative Tarjan SCC.

    Tarjan emits components sink-first, so each component's successors are
    finished by the time it is closed.
    """
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    comp_bits: list[int] = []
    stack: list[int] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, i = work[-1]
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            nbrs = adj[v]
            descended = False
            while i < len(nbrs):
                w = nbrs[i]
                i += 1
                if index[w] == -1:
                    work[-1] = (v, i)
                    work.append((w, 0))
                    descended = True
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            if descended:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                cid = len(comp_bits)
                members = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = cid
                    members.append(w)
                    if w == v:
                        break
                bits = 0
                for u in members:
                    bits |= 1 << u
                for u in members:
                    for w in adj[u]:
                        c = comp[w]
                        if c != cid:
                            bits |= comp_bits[c]
                comp_bits.append(bits)
    return [comp_bits[comp[v]] for v in range(n)]


class ReachIndex:
    """Per-scenario descendant bitsets: ``bits[y, v]`` is the set reached from v."""

    def __init__(self, bits: np.ndarray, n: int):
        self.bits = bits
        self.n = n
        self.words = bits.shape[-1]

    @classmethod
    def build(cls, batch: ScenarioBatch) -> ReachIndex:
        n = batch.graph.n
        w = n_words(n)
        need = batch.r * n * w * 8
        if need > REACH_INDEX_BYTES:
            raise ValidationError(
                f"reach index would need {need / 2**30:.1f} GiB; use fewer scenarios"
            )
        bits = np.zeros((batch.r, n, w), dtype=np.uint64)
        for y in batch.scenarios:
            if n:
                bits[y.index] = _ints_to_words(_descendant_ints(n, y.adjacency), w)
        bits.setflags(write=False)
        return cls(bits, n)

    @property
    def r(self) -> int:
        return self.bits.shape[0]

    def covered(self, seeds: Iterable[int]) -> np.ndarray:
        """``(r, words)`` bitsets of nodes influenced by ``seeds`` per scenario."""
        idx = sorted(set(int(s) for s in seeds))
        if not idx:
            return np.zeros((self.r, self.words), dtype=np.uint64)
        if len(idx) == 1:
            return self.bits[:, idx[0], :].copy()
        return np.bitwise_or.reduce(self.bits[:, idx, :], axis=1)


# ---------------------------------------------------------------- dump / load

def dump_batch(batch: ScenarioBatch, path: str | Path) -> None:
    """JSON lines: a header record, then one ``{"index", "live"}`` per scenario."""
    header = {
        "format": "scenario-batch",
        "version": 1,
        "n": batch.graph.n,
        "m": batch.graph.m,
        "master_seed": batch.master_seed,
        "r": batch.r,
        "weights": None if batch.is_uniform else [float(w) for w in batch.weights],
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for y in batch.scenarios:
            fh.write(json.dumps({"index": y.index, "live": [int(e) for e in y.live_edges()]}) + "\n")


def load_batch(path: str | Path, g: DirectedGraph) -> ScenarioBatch:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty scenario file", None, str(path))
    header = json.loads(lines[0])
    if header.get("format") != "scenario-batch":
        raise ParseError("not a scenario-batch file", 1, str(path))
    if header["m"] != g.m or header["n"] != g.n:
        raise ValidationError(
            f"scenario file is for a graph with n={header['n']}, m={header['m']}; got n={g.n}, m={g.m}"
        )
    scenarios = []
    seed = header.get("master_seed")
    for lineno, ln in enumerate(lines[1:], start=2):
        rec = json.loads(ln)
        live = np.zeros(g.m, dtype=bool)
        edges = rec["live"]
        if edges and (min(edges) < 0 or max(edges) >= g.m):
            raise ParseError("live edge index out of range", lineno, str(path))
        live[edges] = True
        i = int(rec["index"])
        scenarios.append(Scenario(g, i, live, None if seed is None else (seed, i)))
    if len(scenarios) != header["r"]:
        raise ParseError(f"header says r={header['r']} but {len(scenarios)} records follow", None, str(path))
    if header.get("weights") is None:
        weights = np.ones(len(scenarios), dtype=np.int64)
    else:
        weights = np.array(header["weights"], dtype=np.float64)
    return ScenarioBatch(g, tuple(scenarios), seed, weights)
