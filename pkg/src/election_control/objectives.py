"""Margin-of-victory and probability-of-victory objectives.

Per scenario ``y`` and seed set ``S`` the change in margin is

* constructive: ``f(S,y,V2*) + min_j (f(S,y,V2* & V1_j) + maxT - T_j)``
* destructive:  ``f(S,y,V1*) + max_j (f(S,y,V1* & V2_j) + T_j) - maxT``

where ``V2*`` (``V1*``) are voters ranking the target second (first),
``V1_j`` (``V2_j``) voters ranking rival ``j`` first (second), ``T`` the
initial tally and all maxima/minima range over rivals.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .cascade import Scenario, ScenarioBatch, mask_from_bool, popcount, reach_count, reach_indicator
from .election import (
    TARGET,
    ControlProblem,
    Mode,
    Objective,
    initial_tally,
    margin_threshold,
    post_influence_tally,
    voter_mask,
)
from .errors import ValidationError


@dataclass(frozen=True)
class ObjectiveEstimate:
    kind: str
    mean: float
    std_error: float
    r: int
    seed_set: tuple[int, ...]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed_set"] = list(self.seed_set)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def objective_kind(objective: Objective | str, mode: Mode | str) -> str:
    return f"{Objective(objective).value}_{Mode(mode).value}"


# ---------------------------------------------------------------- voter sets

class MarginModel:
    """Bitset form of the voter sets a problem's margin depends on.

    ``primary`` is the set whose coverage the greedy surrogates count
    (``V2*`` or ``V1*``); ``rival_masks[j-1]`` and ``offsets[j-1]`` are the
    per-rival term of the margin formula.
    """

    def __init__(self, problem: ControlProblem):
        profile = problem.profile
        if profile.num_candidates < 2:
            raise ValidationError("an election needs at least two candidates")
        self.mode = problem.mode
        self.n = problem.n
        tally = initial_tally(profile)
        self.tally = tally
        best = int(tally[1:].max())
        rivals = range(1, profile.num_candidates)
        if self.mode is Mode.CONSTRUCTIVE:
            primary = voter_mask(profile, TARGET, 2)
            rival_sets = [primary & voter_mask(profile, j, 1) for j in rivals]
            self.offsets = np.array([best - tally[j] for j in rivals], dtype=np.int64)
        else:
            primary = voter_mask(profile, TARGET, 1)
            rival_sets = [primary & voter_mask(profile, j, 2) for j in rivals]
            self.offsets = np.array([tally[j] - best for j in rivals], dtype=np.int64)
        self.primary_flags = primary
        self.primary = mask_from_bool(primary)
        self.rival_masks = np.stack([mask_from_bool(s) for s in rival_sets])
        self.threshold = margin_threshold(problem)

    @property
    def primary_size(self) -> int:
        return int(self.primary_flags.sum())

    def primary_nodes(self) -> frozenset[int]:
        return frozenset(int(v) for v in np.nonzero(self.primary_flags)[0])

    def counts(self, covered: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coverage of the primary set ``(...)`` and of each rival set ``(..., l)``."""
        f_primary = popcount(covered & self.primary)
        f_rivals = popcount(covered[..., None, :] & self.rival_masks)
        return f_primary, f_rivals

    def combine(self, f_primary: np.ndarray, f_rivals: np.ndarray) -> np.ndarray:
        terms = f_rivals + self.offsets
        if self.mode is Mode.CONSTRUCTIVE:
            return f_primary + terms.min(axis=-1)
        return f_primary + terms.max(axis=-1)

    def margins(self, covered: np.ndarray) -> np.ndarray:
        return self.combine(*self.counts(covered))


@lru_cache(maxsize=64)
def _model_cached(problem: ControlProblem) -> MarginModel:
    return MarginModel(problem)


def margin_model(problem: ControlProblem) -> MarginModel:
    return _model_cached(problem)


# ---------------------------------------------------------------- per scenario

def _check_rival(problem: ControlProblem, rival: int) -> None:
    if rival == TARGET:
        raise ValidationError("the target candidate is not a rival")
    if not 1 <= rival < problem.num_candidates:
        raise ValidationError(f"rival {rival} outside 1..{problem.num_candidates - 1}")


def _nodes(flags: np.ndarray) -> list[int]:
    return [int(v) for v in np.nonzero(flags)[0]]


def g_constructive(problem: ControlProblem, S: Iterable[int], y: Scenario, rival: int) -> int:
    """Margin gained against ``rival``: ``f(S,y,V2*) + f(S,y,V2* & V1_rival)``."""
    _check_rival(problem, rival)
    S = list(S)
    second = voter_mask(problem.profile, TARGET, 2)
    both = second & voter_mask(problem.profile, rival, 1)
    return reach_count(S, y, _nodes(second)) + reach_count(S, y, _nodes(both))


def g_constructive_chi(problem: ControlProblem, S: Iterable[int], y: Scenario, rival: int) -> int:
    """Same value as :func:`g_constructive`, summed voter by voter."""
    _check_rival(problem, rival)
    S = list(S)
    total = 0
    for v in range(problem.n):
        ranking = problem.profile.rankings[v]
        if ranking[1] != TARGET:
            continue
        weight = 2 if ranking[0] == rival else 1
        total += weight * reach_indicator(v, S, y)
    return total


def g_destructive(problem: ControlProblem, S: Iterable[int], y: Scenario, rival: int) -> int:
    """Margin lost against ``rival``: ``f(S,y,V1*) + f(S,y,V1* & V2_rival)``."""
    _check_rival(problem, rival)
    S = list(S)
    first = voter_mask(problem.profile, TARGET, 1)
    both = first & voter_mask(problem.profile, rival, 2)
    return reach_count(S, y, _nodes(first)) + reach_count(S, y, _nodes(both))


def g_destructive_chi(problem: ControlProblem, S: Iterable[int], y: Scenario, rival: int) -> int:
    _check_rival(problem, rival)
    S = list(S)
    total = 0
    for v in range(problem.n):
        ranking = problem.profile.rankings[v]
        if ranking[0] != TARGET:
            continue
        weight = 2 if ranking[1] == rival else 1
        total += weight * reach_indicator(v, S, y)
    return total


def margin_constructive(problem: ControlProblem, S: Iterable[int], y: Scenario) -> int:
    S = list(S)
    tally = initial_tally(problem.profile)
    best = int(tally[1:].max())
    return min(
        g_constructive(problem, S, y, j) + best - int(tally[j])
        for j in range(1, problem.num_candidates)
    )


def margin_destructive(problem: ControlProblem, S: Iterable[int], y: Scenario) -> int:
    S = list(S)
    tally = initial_tally(problem.profile)
    best = int(tally[1:].max())
    return max(
        g_destructive(problem, S, y, j) + int(tally[j])
        for j in range(1, problem.num_candidates)
    ) - best


def margin(problem: ControlProblem, S: Iterable[int], y: Scenario) -> int:
    if problem.mode is Mode.CONSTRUCTIVE:
        return margin_constructive(problem, S, y)
    return margin_destructive(problem, S, y)


def margin_by_simulation(problem: ControlProblem, reached: Iterable[int]) -> int:
    """Margin change obtained by re-running the plurality vote.

    ``reached`` is the set of influenced voters. The margin here is
    ``best rival - target``; constructive control decreases it, destructive
    control increases it.
    """
    before = initial_tally(problem.profile)
    after = post_influence_tally(problem.profile, reached, problem.mode)
    gap_before = int(before[1:].max() - before[TARGET])
    gap_after = int(after[1:].max() - after[TARGET])
    if problem.mode is Mode.CONSTRUCTIVE:
        return gap_before - gap_after
    return gap_after - gap_before


# ---------------------------------------------------------------- batch

def margin_samples(problem: ControlProblem, S: Iterable[int], batch: ScenarioBatch) -> np.ndarray:
    """``m(S, y)`` for every scenario of ``batch`` (int array of length r)."""
    return margin_model(problem).margins(batch.reach.covered(S))


def success_samples(problem: ControlProblem, S: Iterable[int], batch: ScenarioBatch) -> np.ndarray:
    return margin_samples(problem, S, batch) >= margin_threshold(problem)


def _summarise(kind: str, values: np.ndarray, batch: ScenarioBatch, S) -> ObjectiveEstimate:
    seeds = tuple(sorted(int(s) for s in S))
    w = batch.weights
    total = w.sum()
    mean = float(np.dot(w, values) / total)
    if batch.is_uniform and batch.r > 1:
        se = float(math.sqrt(np.var(values.astype(np.float64), ddof=1) / batch.r))
    else:
        se = 0.0
    return ObjectiveEstimate(kind, mean, se, batch.r, seeds)


def estimate_mov(problem: ControlProblem, S: Iterable[int], batch: ScenarioBatch) -> ObjectiveEstimate:
    S = list(S)
    values = margin_samples(problem, S, batch)
    return _summarise(objective_kind(Objective.MOV, problem.mode), values, batch, S)


def estimate_pov(problem: ControlProblem, S: Iterable[int], batch: ScenarioBatch) -> ObjectiveEstimate:
    S = list(S)
    kind = objective_kind(Objective.POV, problem.mode)
    if margin_threshold(problem) <= 0:
        return ObjectiveEstimate(kind, 1.0, 0.0, batch.r, tuple(sorted(int(s) for s in S)))
    values = success_samples(problem, S, batch).astype(np.int64)
    return _summarise(kind, values, batch, S)


def estimate(problem: ControlProblem, S: Iterable[int], batch: ScenarioBatch, objective: Objective | str) -> ObjectiveEstimate:
    if Objective(objective) is Objective.MOV:
        return estimate_mov(problem, S, batch)
    return estimate_pov(problem, S, batch)


def objective_total(problem: ControlProblem, S: Iterable[int], batch: ScenarioBatch, objective: Objective | str):
    """Weighted sum (not mean) of the objective over the batch.

    For sampled batches this is an exact integer, which is what the
    optimisers and oracles compare.
    """
    m = margin_samples(problem, S, batch)
    if Objective(objective) is Objective.POV:
        m = (m >= margin_threshold(problem)).astype(np.int64)
    return np.dot(batch.weights, m)
