"""Synthetic instances and the two experiment drivers.

``run_ratio_study`` compares each approximation algorithm with the exact
optimum on the same scenario batch, cell by cell. ``run_pov_sweep`` records
approximate and exact POV against the starting margin of random electorates.
Both are deterministic functions of their config, independent of ``workers``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np

from .cascade import sample_batch
from .election import ControlProblem, Mode, Objective, PreferenceProfile, margin_threshold
from .errors import EnumerationLimitError, ValidationError
from .exact import DEFAULT_ENUMERATION_CAP, branch_and_bound, brute_force, subset_count
from .graph import DirectedGraph, load_edge_list
from .greedy import enumerate_threshold, make_schedule, optimize_mov
from .objectives import estimate, objective_total


def generate_profile(n: int, num_candidates: int, seed: int) -> PreferenceProfile:
    """Independent uniformly random rankings, one per voter."""
    if num_candidates < 2:
        raise ValidationError("need at least two candidates")
    rng = np.random.default_rng(seed)
    rankings = np.argsort(rng.random((n, num_candidates)), axis=1)
    return PreferenceProfile(rankings.reshape(n, num_candidates), num_candidates)


def erdos_renyi(n: int, avg_degree: float, p: float, seed: int) -> DirectedGraph:
    """Directed G(n, q) with expected out-degree ``avg_degree``."""
    q = min(1.0, avg_degree / max(n - 1, 1))
    G = nx.gnp_random_graph(n, q, seed=seed, directed=True)
    return DirectedGraph.from_edges(n, ((u, v, p) for u, v in G.edges()))


def preferential_attachment(n: int, m: int, p: float, seed: int) -> DirectedGraph:
    """Barabasi-Albert graph with every undirected edge in both directions."""
    G = nx.barabasi_albert_graph(n, m, seed=seed)
    edges = [(u, v, p) for u, v in G.edges()] + [(v, u, p) for u, v in G.edges()]
    return DirectedGraph.from_edges(n, edges)


def make_graph(spec: str, p: float, seed: int = 0, symmetrize: bool = False) -> DirectedGraph:
    """Build a graph from ``er:N:DEGREE``, ``ba:N:M`` or an edge-list path.

    Edge-list probabilities are replaced by ``p``.
    """
    kind, _, rest = spec.partition(":")
    if kind == "er" and rest:
        n, deg = rest.split(":")
        return erdos_renyi(int(n), float(deg), p, seed)
    if kind == "ba" and rest:
        n, m = rest.split(":")
        return preferential_attachment(int(n), int(m), p, seed)
    g = load_edge_list(spec, default_p=p, symmetrize=symmetrize)
    return g.with_uniform_probability(p)


def derive_seed(master_seed: int, *key: int) -> int:
    """Independent 32-bit seed for the stream named by ``key``."""
    return int(np.random.SeedSequence(master_seed, spawn_key=key).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str = "er:100:5"
    p: float = 0.1
    ks: tuple[int, ...] = (3, 5)
    candidates: tuple[int, ...] = (2, 5)
    trials: int = 30
    r: int = 300
    master_seed: int = 0
    modes: tuple[str, ...] = ("constructive", "destructive")
    objectives: tuple[str, ...] = ("mov",)
    thresholds: str = "auto"
    eval_scenarios: int = 0
    symmetrize: bool = False
    cap: int = DEFAULT_ENUMERATION_CAP
    brute_force_limit: int = 20_000
    node_limit: int | None = 20_000_000
    workers: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"p={self.p} outside [0, 1]")
        if self.r < 1:
            raise ValidationError("r must be at least 1")
        for c in self.candidates:
            if c < 2:
                raise ValidationError("every cell needs at least two candidates")
        for m in self.modes:
            Mode(m)
        for o in self.objectives:
            Objective(o)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return d


RECORD_FIELDS = [
    "k", "num_candidates", "mode", "objective", "trial",
    "approx_value", "exact_value", "ratio_percent", "exact_method",
    "approx_fresh", "exact_fresh",
]
CELL_FIELDS = [
    "k", "num_candidates", "mode", "objective", "trials", "degenerate", "infeasible",
    "mean_ratio_percent", "std_ratio_percent",
]


@dataclass
class RatioRecord:
    """One trial of one cell. Values are means over the shared batch."""

    k: int
    num_candidates: int
    mode: str
    objective: str
    trial: int
    approx_value: float
    exact_value: float | None
    ratio_percent: float | None
    exact_method: str
    approx_fresh: float | None = None
    exact_fresh: float | None = None

    @property
    def degenerate(self) -> bool:
        return self.exact_value is not None and self.exact_value <= 0

    @property
    def cell(self) -> tuple:
        return (self.k, self.num_candidates, self.mode, self.objective)


@dataclass
class RatioStudy:
    config: ExperimentConfig
    records: list[RatioRecord]
    cells: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "config": self.config.to_dict(),
            "cells": self.cells,
            "records": [asdict(r) for r in self.records],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def cells_csv(self) -> str:
        return _csv(CELL_FIELDS, self.cells)

    def records_csv(self) -> str:
        return _csv(RECORD_FIELDS, [asdict(r) for r in self.records])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(fields: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row[f]) for f in fields])
    return buf.getvalue()


def _exact(problem, batch, k, objective, cfg: ExperimentConfig):
    # branch and bound is far faster once the enumeration gets large
    if subset_count(problem.n, k) <= min(cfg.cap, cfg.brute_force_limit):
        return brute_force(problem, batch, k, objective, cfg.cap), "brute_force"
    return branch_and_bound(problem, batch, k, objective, cfg.node_limit), "branch_and_bound"


def _approx(problem, batch, k, objective, cfg: ExperimentConfig, seed: int):
    if Objective(objective) is Objective.MOV:
        return tuple(sorted(optimize_mov(problem, batch, k).chosen))
    schedule = make_schedule(problem, cfg.thresholds, seed)
    return enumerate_threshold(problem, batch, k, schedule).seeds


def _trial(args) -> list[RatioRecord]:
    cfg, g, trial = args
    out = []
    batch = sample_batch(g, cfg.r, derive_seed(cfg.master_seed, 1, trial))
    fresh = None
    if cfg.eval_scenarios:
        fresh = sample_batch(g, cfg.eval_scenarios, derive_seed(cfg.master_seed, 2, trial))
    total = batch.total_weight.item()
    for c in cfg.candidates:
        profile = generate_profile(g.n, c, derive_seed(cfg.master_seed, 0, trial, c))
        for mode in cfg.modes:
            for k in cfg.ks:
                problem = ControlProblem(g, profile, Mode(mode), k)
                for obj in cfg.objectives:
                    seeds = _approx(problem, batch, k, obj, cfg, derive_seed(cfg.master_seed, 3, trial, c))
                    approx = objective_total(problem, seeds, batch, obj).item() / total
                    try:
                        res, method = _exact(problem, batch, k, obj, cfg)
                        exact = res.best_value
                        ratio = 100.0 * approx / exact if exact > 0 else None
                    except EnumerationLimitError:
                        res, method, exact, ratio = None, "infeasible", None, None
                    rec = RatioRecord(k, c, mode, obj, trial, approx, exact, ratio, method)
                    if fresh is not None:
                        rec.approx_fresh = estimate(problem, seeds, fresh, obj).mean
                        if res is not None:
                            rec.exact_fresh = estimate(problem, res.best_set, fresh, obj).mean
                    out.append(rec)
    return out


def _summarise(records: list[RatioRecord]) -> list[dict]:
    cells: dict[tuple, list[RatioRecord]] = {}
    for rec in records:
        cells.setdefault(rec.cell, []).append(rec)
    rows = []
    for key in sorted(cells):
        recs = cells[key]
        ratios = [r.ratio_percent for r in recs if r.ratio_percent is not None]
        rows.append({
            "k": key[0],
            "num_candidates": key[1],
            "mode": key[2],
            "objective": key[3],
            "trials": len(recs),
            "degenerate": sum(r.degenerate for r in recs),
            "infeasible": sum(r.exact_method == "infeasible" for r in recs),
            "mean_ratio_percent": float(np.mean(ratios)) if ratios else None,
            "std_ratio_percent": float(np.std(ratios, ddof=1)) if len(ratios) > 1 else (0.0 if ratios else None),
        })
    return rows


def _map_trials(fn, cfg: ExperimentConfig, g: DirectedGraph) -> list:
    jobs = [(cfg, g, t) for t in range(cfg.trials)]
    if cfg.workers and cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_ratio_study(cfg: ExperimentConfig) -> RatioStudy:
    g = make_graph(cfg.graph, cfg.p, derive_seed(cfg.master_seed, 9), cfg.symmetrize)
    for k in cfg.ks:
        if not 1 <= k <= g.n:
            raise ValidationError(f"k={k} outside 1..{g.n}")
    records = [rec for part in _map_trials(_trial, cfg, g) for rec in part]
    records.sort(key=lambda r: (r.cell, r.trial))
    return RatioStudy(cfg, records, _summarise(records))


# ---------------------------------------------------------------- POV sweep

SWEEP_FIELDS = ["margin", "trial", "approx_pov", "exact_pov", "exact_method"]


@dataclass
class SweepRecord:
    margin: int
    trial: int
    approx_pov: float
    exact_pov: float | None
    exact_method: str


@dataclass
class PovSweep:
    config: ExperimentConfig
    records: list[SweepRecord]

    def to_csv(self) -> str:
        return _csv(SWEEP_FIELDS, [asdict(r) for r in self.records])

    def to_json(self) -> str:
        doc = {"config": self.config.to_dict(), "records": [asdict(r) for r in self.records]}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def deciles(self) -> list[tuple[float, float]]:
        """Mean (approx, exact) POV in ten margin-ordered buckets."""
        recs = self.records
        out = []
        for b in range(10):
            part = recs[b * len(recs) // 10:(b + 1) * len(recs) // 10]
            if not part:
                out.append((math.nan, math.nan))
                continue
            exact = [r.exact_pov for r in part if r.exact_pov is not None]
            out.append((float(np.mean([r.approx_pov for r in part])), float(np.mean(exact)) if exact else math.nan))
        return out


def _sweep_trial(args) -> SweepRecord:
    cfg, g, trial = args
    c, mode, k = cfg.candidates[0], Mode(cfg.modes[0]), cfg.ks[0]
    profile = generate_profile(g.n, c, derive_seed(cfg.master_seed, 0, trial, c))
    problem = ControlProblem(g, profile, mode, k)
    batch = sample_batch(g, cfg.r, derive_seed(cfg.master_seed, 1, trial))
    seeds = _approx(problem, batch, k, Objective.POV, cfg, derive_seed(cfg.master_seed, 3, trial, c))
    approx = objective_total(problem, seeds, batch, Objective.POV).item() / batch.total_weight.item()
    try:
        res, method = _exact(problem, batch, k, Objective.POV, cfg)
        exact = res.best_value
    except EnumerationLimitError:
        exact, method = None, "infeasible"
    return SweepRecord(margin_threshold(problem), trial, approx, exact, method)


def run_pov_sweep(cfg: ExperimentConfig) -> PovSweep:
    """One random electorate per trial (first k, candidate count and mode of ``cfg``)."""
    g = make_graph(cfg.graph, cfg.p, derive_seed(cfg.master_seed, 9), cfg.symmetrize)
    records = _map_trials(_sweep_trial, cfg, g)
    records.sort(key=lambda r: (r.margin, r.trial))
    return PovSweep(cfg, records)
