"""Candidates, preference profiles and the plurality election being attacked.

Candidate ``0`` is always the target candidate; ``1..l`` are the rivals. A
voter's ranking lists candidate ids best first.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .graph import DirectedGraph

TARGET = 0


class Mode(str, Enum):
    CONSTRUCTIVE = "constructive"
    DESTRUCTIVE = "destructive"

    def __str__(self) -> str:
        return self.value


class Objective(str, Enum):
    MOV = "mov"
    POV = "pov"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class PreferenceProfile:
    """Strict rankings, one row per voter (``rankings[v, 0]`` is v's vote)."""

    rankings: np.ndarray
    num_candidates: int

    def __post_init__(self):
        r = np.asarray(self.rankings, dtype=np.int64)
        if r.ndim != 2 or r.shape[1] != self.num_candidates:
            raise ValidationError(
                f"rankings must have shape (n, {self.num_candidates}), got {r.shape}"
            )
        if self.num_candidates < 1:
            raise ValidationError("a profile needs at least one candidate")
        expected = np.arange(self.num_candidates)
        if r.shape[0] and not np.array_equal(np.sort(r, axis=1), np.broadcast_to(expected, r.shape)):
            bad = int(np.nonzero((np.sort(r, axis=1) != expected).any(axis=1))[0][0])
            raise ValidationError(f"ranking of voter {bad} is not a permutation of 0..{self.num_candidates - 1}")
        r.setflags(write=False)
        object.__setattr__(self, "rankings", r)

    @classmethod
    def from_rankings(cls, rankings: Sequence[Sequence[int]], num_candidates: int | None = None) -> PreferenceProfile:
        rows = [list(x) for x in rankings]
        if num_candidates is None:
            if not rows:
                raise ValidationError("num_candidates is required for an empty electorate")
            num_candidates = len(rows[0])
        arr = np.array(rows, dtype=np.int64).reshape(len(rows), num_candidates)
        return cls(arr, num_candidates)

    @property
    def n(self) -> int:
        return int(self.rankings.shape[0])

    @property
    def num_rivals(self) -> int:
        return self.num_candidates - 1

    def position_of_target(self) -> np.ndarray:
        """0-based rank of the target candidate for every voter."""
        return np.argmax(self.rankings == TARGET, axis=1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PreferenceProfile):
            return NotImplemented
        return self.num_candidates == other.num_candidates and np.array_equal(self.rankings, other.rankings)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class ControlProblem:
    graph: DirectedGraph
    profile: PreferenceProfile
    mode: Mode
    k: int

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.graph.n != self.profile.n:
            raise ValidationError(
                f"graph has {self.graph.n} nodes but profile has {self.profile.n} voters"
            )
        if self.k < 1:
            raise ValidationError(f"budget must be positive, got {self.k}")
        if self.k > self.graph.n:
            raise ValidationError(f"budget {self.k} exceeds node count {self.graph.n}")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def num_candidates(self) -> int:
        return self.profile.num_candidates

    def with_mode(self, mode: Mode | str) -> ControlProblem:
        return ControlProblem(self.graph, self.profile, Mode(mode), self.k)

    def with_budget(self, k: int) -> ControlProblem:
        return ControlProblem(self.graph, self.profile, self.mode, k)


def voter_set(profile: PreferenceProfile, c: int, j: int) -> frozenset[int]:
    """Voters ranking candidate ``c`` at (1-based) position ``j``."""
    if not 1 <= j <= profile.num_candidates:
        raise IndexError(f"rank position {j} outside 1..{profile.num_candidates}")
    if not 0 <= c < profile.num_candidates:
        raise IndexError(f"candidate {c} outside 0..{profile.num_candidates - 1}")
    return frozenset(int(v) for v in np.nonzero(profile.rankings[:, j - 1] == c)[0])


def voter_mask(profile: PreferenceProfile, c: int, j: int) -> np.ndarray:
    """Boolean-array form of :func:`voter_set`."""
    if not 1 <= j <= profile.num_candidates:
        raise IndexError(f"rank position {j} outside 1..{profile.num_candidates}")
    return profile.rankings[:, j - 1] == c


def initial_tally(profile: PreferenceProfile) -> np.ndarray:
    """Plurality vote counts indexed by candidate id."""
    return np.bincount(profile.rankings[:, 0], minlength=profile.num_candidates).astype(np.int64)


def apply_message(ranking: Sequence[int], mode: Mode | str) -> tuple[int, ...]:
    """Move the target one place up (constructive) or down (destructive).

    A ranking with the target already first (constructive) or last
    (destructive) is returned unchanged.
    """
    mode = Mode(mode)
    out = list(ranking)
    i = out.index(TARGET)
    if mode is Mode.CONSTRUCTIVE and i > 0:
        out[i - 1], out[i] = out[i], out[i - 1]
    elif mode is Mode.DESTRUCTIVE and i < len(out) - 1:
        out[i + 1], out[i] = out[i], out[i + 1]
    return tuple(out)


def post_influence_tally(profile: PreferenceProfile, influenced, mode: Mode | str) -> np.ndarray:
    """Tally after every voter in ``influenced`` receives one message."""
    hit = set(int(v) for v in influenced)
    tally = np.zeros(profile.num_candidates, dtype=np.int64)
    for v in range(profile.n):
        ranking = profile.rankings[v]
        if v in hit:
            ranking = apply_message(ranking, mode)
        tally[ranking[0]] += 1
    return tally


def _require_contest(profile: PreferenceProfile) -> None:
    if profile.num_candidates < 2:
        raise ValidationError("an election needs at least two candidates")


def margin_threshold(problem: ControlProblem) -> int:
    """Required margin change for success, in margin units.

    Constructive: ``max_rival - target + 1``; destructive:
    ``target - max_rival + 1``. Rivals only enter the maxima. Values <= 0
    mean the attacker has already succeeded.
    """
    _require_contest(problem.profile)
    tally = initial_tally(problem.profile)
    best_rival = int(tally[1:].max())
    if problem.mode is Mode.CONSTRUCTIVE:
        return best_rival - int(tally[TARGET]) + 1
    return int(tally[TARGET]) - best_rival + 1


def threshold(problem: ControlProblem) -> int:
    """Success threshold in the units the objective is stated in.

    With two candidates this is the number of voters that must be reached
    (``floor(gap / 2) + 1``); otherwise it is :func:`margin_threshold`.
    """
    _require_contest(problem.profile)
    if problem.num_candidates == 2:
        tally = initial_tally(problem.profile)
        gap = int(tally[1] - tally[TARGET])
        if problem.mode is Mode.DESTRUCTIVE:
            gap = -gap
        return gap // 2 + 1
    return margin_threshold(problem)


def load_preferences(path: str | Path, num_candidates: int | None = None) -> PreferenceProfile:
    """Read one ranking per line (integer candidate ids, best first)."""
    path = Path(path)
    rows: list[list[int]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                row = [int(tok) for tok in line.split()]
            except ValueError:
                raise ParseError(f"non-integer candidate id in {line!r}", lineno, str(path)) from None
            if rows and len(row) != len(rows[0]):
                raise ParseError(f"expected {len(rows[0])} candidates, got {len(row)}", lineno, str(path))
            if sorted(row) != list(range(len(row))):
                raise ParseError(f"ranking {row} is not a permutation of 0..{len(row) - 1}", lineno, str(path))
            rows.append(row)
    if num_candidates is None and not rows:
        raise ParseError("preference file is empty", None, str(path))
    return PreferenceProfile.from_rankings(rows, num_candidates)


def write_preferences(profile: PreferenceProfile, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in profile.rankings:
            fh.write(" ".join(str(int(c)) for c in row) + "\n")
