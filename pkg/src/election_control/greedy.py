"""Greedy seed selection for the MOV objectives and threshold enumeration for POV.

The MOV algorithms greedily maximise expected coverage of the voter set
whose coverage drives the margin (``V2*`` constructive, ``V1*``
destructive). The POV algorithm runs the same greedy on the capped
coverage ``sum_y w_y * min(beta, f(S, y, A))`` for a schedule of caps and
keeps whichever seed set has the highest success probability on the batch.

All surrogate values are weighted *sums* over the batch, so on sampled
batches they are exact integers and greedy tie-breaking is exact.
"""

from __future__ import annotations

import heapq
import math
from collections import OrderedDict
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cascade import ScenarioBatch, popcount
from .election import ControlProblem, Mode
from .errors import ValidationError
from .objectives import MarginModel, margin_model

DEFAULT_SAMPLED_CAPS = 150
EXHAUSTIVE_CAP_LIMIT = 200

SetFunction = Callable[[frozenset], float]


@dataclass
class GreedyTrace:
    """Selection order, per-step marginal gains and oracle call count.

    ``value`` is ``h(chosen)`` in the oracle's own units.
    """

    chosen: list[int]
    marginal_gains: list
    evaluations: int
    value: float = 0

    @property
    def seeds(self) -> frozenset[int]:
        return frozenset(self.chosen)


def naive_greedy(h: SetFunction, ground: Iterable[int], k: int) -> GreedyTrace:
    """Textbook greedy: rescan every remaining element each step."""
    pool = sorted(set(ground))
    S: frozenset[int] = frozenset()
    base = h(S)
    evals = 1
    chosen, gains = [], []
    for _ in range(min(k, len(pool))):
        best_v, best_gain, best_val = None, None, None
        for v in pool:
            if v in S:
                continue
            val = h(S | {v})
            evals += 1
            gain = val - base
            if best_gain is None or gain > best_gain:
                best_v, best_gain, best_val = v, gain, val
        S = S | {best_v}
        chosen.append(best_v)
        gains.append(best_gain)
        base = best_val
    return GreedyTrace(chosen, gains, evals, base)


def lazy_greedy(h: SetFunction, ground: Iterable[int], k: int) -> GreedyTrace:
    """Greedy with stale upper bounds kept in a heap.

    For submodular ``h`` this returns exactly what :func:`naive_greedy`
    returns: heap keys are ``(-gain, node)``, so among equal gains the
    smallest node id surfaces first.
    """
    pool = sorted(set(ground))
    S: frozenset[int] = frozenset()
    base = h(S)
    evals = 1
    chosen, gains = [], []
    if k <= 0 or not pool:
        return GreedyTrace(chosen, gains, evals, base)
    heap = []
    for v in pool:
        val = h(S | {v})
        evals += 1
        heap.append((-(val - base), v, 0, val))
    heapq.heapify(heap)
    step = 0
    while len(chosen) < min(k, len(pool)):
        neg_gain, v, stamp, val = heapq.heappop(heap)
        if stamp == step:
            S = S | {v}
            chosen.append(v)
            gains.append(-neg_gain)
            base = val
            step += 1
        else:
            val = h(S | {v})
            evals += 1
            heapq.heappush(heap, (-(val - base), v, step, val))
    return GreedyTrace(chosen, gains, evals, base)


# ---------------------------------------------------------------- coverage oracles

class CoverageCounter:
    """Per-scenario ``f(S, y, A)`` for one batch and node set ``A``.

    Covered bitsets are memoised for recently seen sets so that evaluating
    ``S | {v}`` costs one OR with the parent's bitset.
    """

    def __init__(self, batch: ScenarioBatch, mask: np.ndarray, memo_size: int = 8):
        self.reach = batch.reach
        self.mask = mask
        self.weights = batch.weights
        self._covered: OrderedDict[frozenset, np.ndarray] = OrderedDict()
        self._counts: OrderedDict[frozenset, np.ndarray] = OrderedDict()
        self._memo_size = memo_size

    def covered(self, S: frozenset) -> np.ndarray:
        memo = self._covered
        if S in memo:
            memo.move_to_end(S)
            return memo[S]
        cov = None
        for x in S:
            parent = S - {x}
            if parent in memo:
                memo.move_to_end(parent)
                cov = memo[parent] | self.reach.bits[:, x, :]
                break
        if cov is None:
            cov = self.reach.covered(S)
        memo[S] = cov
        if len(memo) > self._memo_size:
            memo.popitem(last=False)
        return cov

    def counts(self, S: frozenset) -> np.ndarray:
        memo = self._counts
        if S in memo:
            return memo[S]
        c = popcount(self.covered(S) & self.mask)
        memo[S] = c
        if len(memo) > 4096:
            memo.popitem(last=False)
        return c


class CoverageObjective:
    """``h(S) = sum_y w_y * min(cap, f(S, y, A))`` (no cap when ``cap`` is None)."""

    def __init__(self, counter: CoverageCounter, cap: int | None = None):
        self.counter = counter
        self.cap = cap

    def __call__(self, S: frozenset):
        c = self.counter.counts(frozenset(S))
        if self.cap is not None:
            c = np.minimum(c, self.cap)
        return np.dot(self.counter.weights, c).item()


def surrogate(problem: ControlProblem, batch: ScenarioBatch, cap: int | None = None) -> CoverageObjective:
    """Coverage surrogate of ``problem``'s mode on ``batch``."""
    return CoverageObjective(CoverageCounter(batch, margin_model(problem).primary), cap)


# ---------------------------------------------------------------- MOV

def _budget(problem: ControlProblem, k: int | None) -> int:
    k = problem.k if k is None else k
    if k < 0:
        raise ValidationError(f"budget must be nonnegative, got {k}")
    return k


def _require_mode(problem: ControlProblem, mode: Mode) -> None:
    if problem.mode is not mode:
        raise ValidationError(f"problem is {problem.mode.value}, algorithm needs {mode.value}")


def mov_constructive(problem: ControlProblem, batch: ScenarioBatch, k: int | None = None) -> GreedyTrace:
    """Greedy on expected coverage of voters ranking the target second."""
    _require_mode(problem, Mode.CONSTRUCTIVE)
    return lazy_greedy(surrogate(problem, batch), range(problem.n), _budget(problem, k))


def mov_destructive(problem: ControlProblem, batch: ScenarioBatch, k: int | None = None) -> GreedyTrace:
    """Greedy on expected coverage of voters ranking the target first."""
    _require_mode(problem, Mode.DESTRUCTIVE)
    return lazy_greedy(surrogate(problem, batch), range(problem.n), _budget(problem, k))


def optimize_mov(problem: ControlProblem, batch: ScenarioBatch, k: int | None = None) -> GreedyTrace:
    if problem.mode is Mode.CONSTRUCTIVE:
        return mov_constructive(problem, batch, k)
    return mov_destructive(problem, batch, k)


# ---------------------------------------------------------------- POV

@dataclass(frozen=True)
class ThresholdSchedule:
    mode: str
    values: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in ("exhaustive", "sampled"):
            raise ValidationError(f"unknown schedule mode {self.mode!r}")
        if not self.values:
            raise ValidationError("a threshold schedule needs at least one cap")

    @classmethod
    def exhaustive(cls, lo: int, hi: int) -> ThresholdSchedule:
        return cls("exhaustive", tuple(range(lo, hi + 1)))

    @classmethod
    def sampled(cls, lo: int, hi: int, count: int = DEFAULT_SAMPLED_CAPS, seed: int = 0) -> ThresholdSchedule:
        pool = np.arange(lo, hi + 1)
        if count >= pool.shape[0]:
            return cls("sampled", tuple(int(x) for x in pool))
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(pool, size=count, replace=False))
        return cls("sampled", tuple(int(x) for x in picked))

    def describe(self) -> dict:
        return {
            "mode": self.mode,
            "count": len(self.values),
            "min": min(self.values),
            "max": max(self.values),
        }


def cap_range(problem: ControlProblem) -> tuple[int, int]:
    """Smallest and largest useful coverage caps.

    The margin lies between ``f`` and ``2 f`` (``f`` = coverage of the
    primary set), so caps below ``ceil(delta / 2)`` cannot reach the
    threshold and caps above ``|A|`` never bind.
    """
    model = margin_model(problem)
    lo = max(1, math.ceil(model.threshold / 2))
    hi = model.primary_size
    if hi < lo:
        return max(hi, 1), max(hi, 1)
    return lo, hi


def make_schedule(problem: ControlProblem, policy: str = "auto", seed: int = 0) -> ThresholdSchedule:
    """Resolve ``auto`` / ``exhaustive`` / ``sampled`` / ``sampled:N`` against a problem."""
    lo, hi = cap_range(problem)
    if policy == "auto":
        policy = "exhaustive" if margin_model(problem).primary_size <= EXHAUSTIVE_CAP_LIMIT else "sampled"
    if policy == "exhaustive":
        return ThresholdSchedule.exhaustive(lo, hi)
    if policy.startswith("sampled"):
        count = DEFAULT_SAMPLED_CAPS
        if ":" in policy:
            count = int(policy.split(":", 1)[1])
            if count < 1:
                raise ValidationError("sampled schedules need a positive count")
        return ThresholdSchedule.sampled(lo, hi, count, seed)
    raise ValidationError(f"unknown threshold policy {policy!r}")


@dataclass
class CapRun:
    cap: int
    trace: GreedyTrace
    successes: float


@dataclass
class ThresholdResult:
    """Outcome of threshold enumeration.

    ``successes`` is the weighted count of winning scenarios for ``seeds``
    and ``pov`` that count divided by the batch weight.
    """

    seeds: tuple[int, ...]
    pov: float
    successes: float
    best_cap: int | None
    schedule: ThresholdSchedule | None
    runs: list[CapRun] = field(default_factory=list)


def _run_cap(problem, batch, model: MarginModel, k: int, cap: int) -> CapRun:
    counter = CoverageCounter(batch, model.primary)
    trace = lazy_greedy(CoverageObjective(counter, cap), range(problem.n), k)
    margins = model.margins(counter.covered(trace.seeds))
    wins = np.dot(batch.weights, (margins >= model.threshold).astype(np.int64)).item()
    return CapRun(cap, trace, wins)


def enumerate_threshold(
    problem: ControlProblem,
    batch: ScenarioBatch,
    k: int | None = None,
    schedule: ThresholdSchedule | None = None,
    workers: int | None = None,
) -> ThresholdResult:
    """Greedy on the capped surrogate for every cap; keep the best true POV.

    Ties in POV go to the smaller cap.
    """
    k = _budget(problem, k)
    model = margin_model(problem)
    total = batch.total_weight
    if model.threshold <= 0:
        return ThresholdResult((), 1.0, total.item(), None, schedule)
    if schedule is None:
        schedule = make_schedule(problem)
    caps = list(schedule.values)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda c: _run_cap(problem, batch, model, k, c), caps))
    else:
        runs = [_run_cap(problem, batch, model, k, c) for c in caps]
    best = None
    for run in sorted(runs, key=lambda r: r.cap):
        if best is None or run.successes > best.successes:
            best = run
    seeds = tuple(sorted(best.trace.chosen))
    return ThresholdResult(seeds, best.successes / total, best.successes, best.cap, schedule, runs)


def pov_constructive(problem, batch, k=None, schedule=None, workers=None) -> ThresholdResult:
    _require_mode(problem, Mode.CONSTRUCTIVE)
    return enumerate_threshold(problem, batch, k, schedule, workers)


def pov_destructive(problem, batch, k=None, schedule=None, workers=None) -> ThresholdResult:
    _require_mode(problem, Mode.DESTRUCTIVE)
    return enumerate_threshold(problem, batch, k, schedule, workers)


def optimize_pov(problem, batch, k=None, schedule=None, workers=None) -> ThresholdResult:
    if problem.mode is Mode.CONSTRUCTIVE:
        return pov_constructive(problem, batch, k, schedule, workers)
    return pov_destructive(problem, batch, k, schedule, workers)
