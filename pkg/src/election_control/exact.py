"""Exact optima on a fixed scenario batch.

Three routes to the same number:

* :func:`brute_force` enumerates every seed set of size at most ``k``;
* :func:`branch_and_bound` searches seed sets with a submodular upper
  bound, for instances whose subset count exceeds the brute-force cap;
* :func:`build_milp` writes the sample-average problem as a MILP, which
  :func:`solve_enumerative` solves by enumerating the seed variables and
  completing every other variable to its tight value.

The MILP can be exported as CPLEX-style LP or fixed-form MPS for external
solvers; nothing here calls one.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cascade import ScenarioBatch, popcount, reverse_reach_sets
from .election import TARGET, ControlProblem, Mode, Objective, initial_tally, voter_mask
from .errors import EnumerationLimitError, ParseError, ValidationError
from .greedy import lazy_greedy
from .objectives import MarginModel, margin_model, objective_kind

DEFAULT_ENUMERATION_CAP = 2_000_000


@dataclass(frozen=True)
class OracleResult:
    """Best seed set, its objective value (mean over the batch) and search size.

    ``total`` is the same value as a weighted sum, exact for sampled batches.
    """

    best_set: tuple[int, ...]
    best_value: float
    enumerated: int
    total: float | int | None = None


def subset_count(n: int, k: int) -> int:
    """Number of seed sets of size 0..k on n nodes."""
    return sum(math.comb(n, j) for j in range(min(k, n) + 1))


# ---------------------------------------------------------------- vectorised evaluation

class _Evaluator:
    """Weighted objective totals for stacks of covered bitsets."""

    def __init__(self, problem: ControlProblem, batch: ScenarioBatch, objective: Objective):
        self.model: MarginModel = margin_model(problem)
        self.bits = batch.reach.bits
        self.weights = batch.weights
        self.pov = objective is Objective.POV
        self.delta = self.model.threshold

    def score(self, margins: np.ndarray) -> np.ndarray:
        """Weighted totals over the leading scenario axis."""
        vals = (margins >= self.delta).astype(np.int64) if self.pov else margins
        return np.tensordot(self.weights, vals, axes=(0, 0))

    def totals(self, combos: np.ndarray) -> np.ndarray:
        """Totals for each row of ``combos`` (shape ``(c, size)``)."""
        r, _, w = self.bits.shape
        if combos.shape[1] == 0:
            cov = np.zeros((r, combos.shape[0], w), dtype=np.uint64)
        else:
            cov = np.bitwise_or.reduce(self.bits[:, combos, :], axis=2)
        return self.score(self.model.margins(cov))


def _better(value, best) -> bool:
    return best is None or value > best


def brute_force(
    problem: ControlProblem,
    batch: ScenarioBatch,
    k: int | None = None,
    objective: Objective | str = Objective.MOV,
    cap: int = DEFAULT_ENUMERATION_CAP,
    workers: int | None = None,
) -> OracleResult:
    """Exact maximiser over all seed sets of size <= k.

    Among equal values the lexicographically smallest sorted tuple wins, so
    the empty set beats everything it ties with.
    """
    objective = Objective(objective)
    k = problem.k if k is None else k
    n = problem.n
    need = subset_count(n, k)
    if need > cap:
        raise EnumerationLimitError(need, cap)
    ev = _Evaluator(problem, batch, objective)
    r, _, w = ev.bits.shape
    ell = ev.model.rival_masks.shape[0]

    jobs = []
    for size in range(min(k, n) + 1):
        chunk = max(1, (1 << 22) // (r * w * max(size, ell + 1)))
        it = itertools.combinations(range(n), size)
        while True:
            block = list(itertools.islice(it, chunk))
            if not block:
                break
            jobs.append(np.array(block, dtype=np.int64).reshape(len(block), size))

    def best_of(combos: np.ndarray):
        vals = ev.totals(combos)
        top = vals.max()
        rows = combos[vals == top]
        cand = min(tuple(int(x) for x in row) for row in rows)
        return top.item(), cand

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(best_of, jobs))
    else:
        partial = [best_of(c) for c in jobs]

    best_val, best_set = None, None
    for val, s in partial:
        if _better(val, best_val) or (val == best_val and s < best_set):
            best_val, best_set = val, s
    return OracleResult(best_set, best_val / batch.total_weight.item(), need, best_val)


def branch_and_bound(
    problem: ControlProblem,
    batch: ScenarioBatch,
    k: int | None = None,
    objective: Objective | str = Objective.MOV,
    node_limit: int | None = None,
) -> OracleResult:
    """Depth-first search with a coverage bound; returns an optimal set.

    For a set ``S`` and additions ``T`` the per-scenario margin satisfies
    ``m(S | T) <= m(S) + sum_{t in T} w_S(t)``, where ``w_S(t)`` is t's
    marginal coverage of the primary voters plus its marginal coverage of
    the rival set that is binding at ``S`` (constructive) or the largest
    marginal over rival sets (destructive). Both follow from submodularity
    of coverage. The POV bound applies the same inequality per scenario.

    Ties are not resolved lexicographically; only the value is canonical.
    """
    objective = Objective(objective)
    k = problem.k if k is None else k
    ev = _Evaluator(problem, batch, objective)
    model = ev.model
    bits, weights = ev.bits, ev.weights
    r, n, w = bits.shape
    q = min(k, n)
    empty = np.zeros((r, w), dtype=np.uint64)
    root_val = ev.score(model.margins(empty)).item()
    total_w = batch.total_weight.item()
    if q == 0 or (ev.pov and ev.delta <= 0):
        return OracleResult((), root_val / total_w, 1, root_val)

    constructive = model.mode is Mode.CONSTRUCTIVE
    # nodes that never reach a primary voter cannot change any margin
    touches = popcount(bits & model.primary[None, None, :]).sum(axis=0)
    useful = np.nonzero(touches > 0)[0]
    if useful.size == 0:
        return OracleResult((), root_val / total_w, 1, root_val)

    def expand(cov_S: np.ndarray, cand: np.ndarray):
        fa, fr = model.counts(cov_S)
        cov_C = cov_S[:, None, :] | bits[:, cand, :]
        fa_c, fr_c = model.counts(cov_C)
        da = fa_c - fa[:, None]
        dr = fr_c - fr[:, None, :]
        if constructive:
            j = np.argmin(fr + model.offsets, axis=1)
            gain = da + np.take_along_axis(dr, j[:, None, None], axis=2)[:, :, 0]
        else:
            gain = da + dr.max(axis=2)
        margins_S = model.combine(fa, fr)
        margins_C = model.combine(fa_c, fr_c)
        return cov_C, margins_S, margins_C, gain

    # order candidates by root bound, largest first
    g0 = expand(empty, useful)[3]
    root_w = np.tensordot(weights, g0, axes=(0, 0))
    order = useful[np.lexsort((useful, -root_w))]

    best_val = root_val
    best_set: tuple[int, ...] = ()

    def consider(seeds: Iterable[int]):
        nonlocal best_val, best_set
        s = tuple(sorted(seeds))
        val = ev.totals(np.array([s], dtype=np.int64).reshape(1, len(s)))[0].item()
        if val > best_val:
            best_val, best_set = val, s

    # incumbents: greedy on the true objective and on plain coverage
    def true_obj(S):
        return ev.totals(np.array([sorted(S)], dtype=np.int64).reshape(1, len(S)))[0].item()

    consider(lazy_greedy(true_obj, order.tolist(), q).chosen)
    cover = model.primary[None, :]

    def coverage(S):
        cov = np.bitwise_or.reduce(bits[:, sorted(S), :], axis=1) if S else empty
        return np.dot(weights, popcount(cov & cover)).item()

    consider(lazy_greedy(coverage, order.tolist(), q).chosen)

    visited = 0

    def suffix_top(values: np.ndarray, t: int) -> np.ndarray:
        """``out[..., a]`` = sum of the ``t`` largest entries of ``values[..., a+1:]``."""
        c = values.shape[-1]
        out = np.zeros(values.shape, dtype=values.dtype)
        if t <= 0 or c == 0:
            return out
        top = np.full(values.shape[:-1] + (t,), 0, dtype=values.dtype)
        for a in range(c - 1, -1, -1):
            out[..., a] = top.sum(axis=-1)
            merged = np.concatenate([top, values[..., a:a + 1]], axis=-1)
            top = -np.sort(-merged, axis=-1)[..., :t]
        return out

    def search(chosen: list[int], cov_S: np.ndarray, start: int, left: int):
        nonlocal visited, best_val, best_set
        cand = order[start:]
        if cand.size == 0:
            return
        cov_C, m_S, m_C, gain = expand(cov_S, cand)
        visited += cand.size
        child_vals = ev.score(m_C)
        for a in np.nonzero(child_vals > best_val)[0]:
            val = child_vals[a].item()
            if val > best_val:
                best_val, best_set = val, tuple(sorted(chosen + [int(cand[a])]))
        if left <= 1:
            return
        if ev.pov:
            extra = suffix_top(gain, left - 1)
            reach_ok = (m_S[:, None] + gain + extra) >= ev.delta
            bounds = np.tensordot(weights, reach_ok.astype(np.int64), axes=(0, 0))
        else:
            gw = np.tensordot(weights, gain, axes=(0, 0))
            bounds = ev.score(m_S) + gw + suffix_top(gw, left - 1)
        for a in range(cand.size):
            if node_limit is not None and visited > node_limit:
                raise EnumerationLimitError(visited, node_limit)
            if bounds[a] <= best_val:
                continue
            search(chosen + [int(cand[a])], cov_C[:, a, :], start + a + 1, left - 1)

    search([], empty, 0, q)
    return OracleResult(best_set, best_val / total_w, visited, best_val)


def solve_exact(
    problem: ControlProblem,
    batch: ScenarioBatch,
    k: int | None = None,
    objective: Objective | str = Objective.MOV,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> OracleResult:
    """Brute force when it fits under ``cap``, branch and bound otherwise."""
    k = problem.k if k is None else k
    if subset_count(problem.n, k) <= cap:
        return brute_force(problem, batch, k, objective, cap)
    return branch_and_bound(problem, batch, k, objective)


# ---------------------------------------------------------------- MILP model

@dataclass
class Variable:
    name: str
    kind: str  # "binary" or "continuous"
    lb: float = 0.0
    ub: float = math.inf


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass
class MilpModel:
    """A maximisation MILP with named variables and rows."""

    variables: dict[str, Variable] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    big_M: int = 0
    meta: dict = field(default_factory=dict)

    def add_var(self, name: str, kind: str = "continuous", lb: float = 0.0, ub: float = math.inf) -> str:
        if name in self.variables:
            raise ValidationError(f"variable {name} declared twice")
        self.variables[name] = Variable(name, kind, lb, ub)
        return name

    def add_constraint(self, name: str, coeffs: dict[str, float], sense: str, rhs: float) -> None:
        for v in coeffs:
            if v not in self.variables:
                raise ValidationError(f"constraint {name} uses undeclared variable {v}")
        self.constraints.append(Constraint(name, dict(coeffs), sense, float(rhs)))

    def names(self, prefix: str) -> list[str]:
        return [v for v in self.variables if v.split("_", 1)[0] == prefix]

    def matrix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Dense ``(c, A, lo, hi, lb, ub)`` with rows ``lo <= A x <= hi``."""
        cols = {v: i for i, v in enumerate(self.variables)}
        c = np.zeros(len(cols))
        for v, a in self.objective.items():
            c[cols[v]] = a
        A = np.zeros((len(self.constraints), len(cols)))
        lo = np.full(len(self.constraints), -np.inf)
        hi = np.full(len(self.constraints), np.inf)
        for i, con in enumerate(self.constraints):
            for v, a in con.coeffs.items():
                A[i, cols[v]] = a
            if con.sense in ("<=", "="):
                hi[i] = con.rhs
            if con.sense in (">=", "="):
                lo[i] = con.rhs
        lb = np.array([v.lb for v in self.variables.values()])
        ub = np.array([v.ub for v in self.variables.values()])
        return c, A, lo, hi, lb, ub

    def integrality(self) -> np.ndarray:
        return np.array([1 if v.kind == "binary" else 0 for v in self.variables.values()])


def big_m(n: int) -> int:
    return 4 * n + 4


def build_milp(
    problem: ControlProblem,
    batch: ScenarioBatch,
    k: int | None = None,
    objective: Objective | str = Objective.MOV,
) -> MilpModel:
    """Sample-average MILP for one of the four objective kinds.

    Variables: ``s_v`` seeds, ``x_i_v`` influence of v in scenario i,
    ``g_i_j`` margin term against rival j, ``m_i`` margin, ``u_i`` success
    indicator (POV), ``z_i_j`` binding-rival selector (destructive).
    """
    objective = Objective(objective)
    k = problem.k if k is None else k
    profile = problem.profile
    n, r = problem.n, batch.r
    mode = problem.mode
    tally = initial_tally(profile)
    rivals = list(range(1, problem.num_candidates))
    best = int(tally[1:].max())
    delta = margin_model(problem).threshold
    M = big_m(n)
    weights = batch.weights / batch.total_weight

    if mode is Mode.CONSTRUCTIVE:
        primary = voter_mask(profile, TARGET, 2)
        extra = {j: primary & voter_mask(profile, j, 1) for j in rivals}
    else:
        primary = voter_mask(profile, TARGET, 1)
        extra = {j: primary & voter_mask(profile, j, 2) for j in rivals}

    mdl = MilpModel(
        big_M=M,
        meta={
            "kind": objective_kind(objective, mode),
            "n": n,
            "r": r,
            "k": k,
            "rivals": rivals,
            "threshold": delta,
        },
    )
    for v in range(n):
        mdl.add_var(f"s_{v}", "binary", 0.0, 1.0)
    for i in range(r):
        for v in range(n):
            mdl.add_var(f"x_{i}_{v}", "continuous", 0.0, 1.0)
    for i in range(r):
        for j in rivals:
            mdl.add_var(f"g_{i}_{j}", "continuous", -math.inf, math.inf)
    for i in range(r):
        mdl.add_var(f"m_{i}", "continuous", -math.inf, math.inf)
    if objective is Objective.POV:
        for i in range(r):
            mdl.add_var(f"u_{i}", "binary", 0.0, 1.0)
    if mode is Mode.DESTRUCTIVE:
        for i in range(r):
            for j in rivals:
                mdl.add_var(f"z_{i}_{j}", "binary", 0.0, 1.0)

    mdl.add_constraint("budget", {f"s_{v}": 1.0 for v in range(n)}, "<=", k)
    for i, y in enumerate(batch.scenarios):
        rr = reverse_reach_sets(y)
        for v in range(n):
            coeffs = {f"x_{i}_{v}": 1.0}
            for u in sorted(rr[v]):
                coeffs[f"s_{u}"] = -1.0
            mdl.add_constraint(f"reach_{i}_{v}", coeffs, "<=", 0)
        for j in rivals:
            coeffs = {f"g_{i}_{j}": 1.0}
            for v in range(n):
                c = int(primary[v]) + int(extra[j][v])
                if c:
                    coeffs[f"x_{i}_{v}"] = -float(c)
            mdl.add_constraint(f"gain_{i}_{j}", coeffs, "<=", 0)
        for j in rivals:
            if mode is Mode.CONSTRUCTIVE:
                mdl.add_constraint(
                    f"margin_{i}_{j}", {f"m_{i}": 1.0, f"g_{i}_{j}": -1.0}, "<=", best - int(tally[j])
                )
            else:
                # m_i <= g_ij + T_j - maxT + M (1 - z_ij)
                mdl.add_constraint(
                    f"margin_{i}_{j}",
                    {f"m_{i}": 1.0, f"g_{i}_{j}": -1.0, f"z_{i}_{j}": float(M)},
                    "<=",
                    int(tally[j]) - best + M,
                )
        if mode is Mode.DESTRUCTIVE:
            mdl.add_constraint(f"select_{i}", {f"z_{i}_{j}": 1.0 for j in rivals}, ">=", 1)
        if objective is Objective.POV:
            # -M (1 - u_i) + delta - m_i <= 0
            mdl.add_constraint(f"success_{i}", {f"u_{i}": float(M), f"m_{i}": -1.0}, "<=", M - delta)

    target = "u" if objective is Objective.POV else "m"
    mdl.objective = {f"{target}_{i}": float(weights[i]) for i in range(r)}
    return mdl


# ---------------------------------------------------------------- enumerative solve

class _Completion:
    """Tight values of the non-seed variables for a fixed seed assignment."""

    def __init__(self, model: MilpModel):
        self.model = model
        self.upper: dict[str, list[Constraint]] = {v: [] for v in model.variables}
        for con in model.constraints:
            if con.sense != "<=":
                continue
            for v, a in con.coeffs.items():
                if a > 0:
                    self.upper[v].append(con)
        self.selectors: dict[int, list[str]] = {}
        for v in model.names("z"):
            _, i, _ = v.split("_")
            self.selectors.setdefault(int(i), []).append(v)

    def _bound(self, var: str, values: dict[str, float]) -> float:
        vb = self.model.variables[var]
        bound = vb.ub
        for con in self.upper[var]:
            rest = 0.0
            usable = True
            for v, a in con.coeffs.items():
                if v == var:
                    continue
                if v not in values:
                    usable = False
                    break
                rest += a * values[v]
            if usable:
                bound = min(bound, (con.rhs - rest) / con.coeffs[var])
        return bound

    def _set(self, var: str, values: dict[str, float]) -> None:
        b = self._bound(var, values)
        if self.model.variables[var].kind == "binary":
            values[var] = 1.0 if b >= 1 - 1e-9 else 0.0
        else:
            values[var] = b

    def complete(self, seeds: Iterable[int]) -> dict[str, float]:
        chosen = {int(s) for s in seeds}
        values = {v: float(int(v.split("_")[1]) in chosen) for v in self.model.names("s")}
        for v in self.model.names("x"):
            self._set(v, values)
        for v in self.model.names("g"):
            self._set(v, values)
        for m in self.model.names("m"):
            i = int(m.split("_")[1])
            zs = self.selectors.get(i)
            if not zs:
                self._set(m, values)
                continue
            # try each one-hot selector, keep the largest margin (first on ties)
            best, best_z = None, None
            for z in zs:
                trial = dict(values)
                for other in zs:
                    trial[other] = 1.0 if other == z else 0.0
                b = self._bound(m, trial)
                if best is None or b > best:
                    best, best_z = b, z
            for other in zs:
                values[other] = 1.0 if other == best_z else 0.0
            values[m] = best
        for v in self.model.names("u"):
            self._set(v, values)
        return values

    def objective(self, values: dict[str, float]) -> float:
        return sum(a * values[v] for v, a in self.model.objective.items())


def is_feasible(model: MilpModel, values: dict[str, float], tol: float = 1e-9) -> bool:
    for v in model.variables.values():
        x = values[v.name]
        if x < v.lb - tol or x > v.ub + tol:
            return False
        if v.kind == "binary" and x not in (0.0, 1.0):
            return False
    for con in model.constraints:
        lhs = sum(a * values[v] for v, a in con.coeffs.items())
        if con.sense == "<=" and lhs > con.rhs + tol:
            return False
        if con.sense == ">=" and lhs < con.rhs - tol:
            return False
        if con.sense == "=" and abs(lhs - con.rhs) > tol:
            return False
    return True


def complete_assignment(model: MilpModel, seeds: Iterable[int]) -> dict[str, float]:
    """All variable values implied by choosing ``seeds``."""
    return _Completion(model).complete(seeds)


def _budget_of(model: MilpModel) -> int:
    for con in model.constraints:
        if con.name == "budget":
            return int(math.floor(con.rhs + 1e-9))
    raise ValidationError("model has no budget row")


def solve_enumerative(model: MilpModel, cap: int = DEFAULT_ENUMERATION_CAP) -> OracleResult:
    """Optimal value of ``model`` by enumerating every feasible seed vector."""
    seeds = [int(v.split("_")[1]) for v in model.names("s")]
    k = _budget_of(model)
    need = subset_count(len(seeds), k)
    if need > cap:
        raise EnumerationLimitError(need, cap)
    comp = _Completion(model)
    best_val, best_set = None, None
    for size in range(min(k, len(seeds)) + 1):
        for S in itertools.combinations(seeds, size):
            values = comp.complete(S)
            if not is_feasible(model, values):
                raise ValidationError(f"tight completion of {S} violates the model")
            val = comp.objective(values)
            if _better(val, best_val):
                best_val, best_set = val, S
    return OracleResult(tuple(best_set), best_val, need)


# ---------------------------------------------------------------- LP format

def _num(x: float) -> str:
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(coeffs: dict[str, float]) -> list[str]:
    out: list[str] = []
    for i, (v, a) in enumerate(coeffs.items()):
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        if i == 0 and sign == "+":
            out.append(v if mag == 1 else f"{_num(mag)} {v}")
        else:
            out.append(f"{sign} {v}" if mag == 1 else f"{sign} {_num(mag)} {v}")
    return out or ["0 s_0"]


def _wrap(head: str, parts: list[str], width: int = 250) -> list[str]:
    lines, cur = [], head
    for p in parts:
        if not cur.strip():
            cur += p
        elif len(cur) + 1 + len(p) > width:
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}"
    lines.append(cur)
    return lines


def lp_text(model: MilpModel) -> str:
    out = [f"\\ meta {json.dumps(model.meta, sort_keys=True)}", f"\\ big_M {model.big_M}", "Maximize"]
    out += _wrap(" obj:", _expr(model.objective))
    out.append("Subject To")
    for con in model.constraints:
        out += _wrap(f" {con.name}:", _expr(con.coeffs) + [con.sense, _num(con.rhs)])
    out.append("Bounds")
    for v in model.variables.values():
        if v.kind == "binary":
            continue
        if v.lb == -math.inf and v.ub == math.inf:
            out.append(f" {v.name} free")
        elif v.ub == math.inf:
            if v.lb != 0:
                out.append(f" {v.name} >= {_num(v.lb)}")
        else:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    binaries = [v.name for v in model.variables.values() if v.kind == "binary"]
    if binaries:
        out.append("Binaries")
        out += _wrap(" ", binaries)
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: MilpModel, path: str | Path) -> None:
    Path(path).write_text(lp_text(model), encoding="ascii")


_SECTIONS = {
    "maximize": "obj", "maximise": "obj", "max": "obj",
    "subject to": "rows", "such that": "rows", "st": "rows", "s.t.": "rows",
    "bounds": "bounds", "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "end": "end",
}
_SENSES = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}


def _parse_terms(tokens: list[str], lineno: int, path: str) -> dict[str, float]:
    coeffs: dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = 1.0 if tok == "+" else -1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        if not re.match(r"^[A-Za-z_][\w.]*$", tok):
            raise ParseError(f"bad token {tok!r}", lineno, path)
        coeffs[tok] = coeffs.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
        sign, coef = 1.0, None
    return coeffs


def read_lp(path: str | Path) -> MilpModel:
    """Parse the LP dialect written by :func:`export_lp` (maximisation only)."""
    path = Path(path)
    model = MilpModel()
    section = None
    statements: dict[str, list[tuple[int, str]]] = {"obj": [], "rows": [], "bounds": [], "bin": [], "gen": []}
    for lineno, raw in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        line = raw.strip()
        if line.startswith("\\"):
            if line.startswith("\\ meta "):
                model.meta = json.loads(line[len("\\ meta "):])
            elif line.startswith("\\ big_M "):
                model.big_M = int(line.split()[2])
            continue
        if not line:
            continue
        key = line.lower()
        if key in ("minimize", "minimise", "min"):
            raise ParseError("only maximisation models are supported", lineno, str(path))
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise ParseError(f"content before any section: {line!r}", lineno, str(path))
        if raw.startswith("   ") and statements[section]:
            prev_no, prev = statements[section][-1]
            statements[section][-1] = (prev_no, prev + " " + line)
        else:
            statements[section].append((lineno, line))

    declared: dict[str, Variable] = {}

    def var(name: str) -> Variable:
        if name not in declared:
            declared[name] = Variable(name, "continuous")
        return declared[name]

    for lineno, stmt in statements["obj"]:
        toks = stmt.split()
        if toks and toks[0].endswith(":"):
            toks = toks[1:]
        model.objective = _parse_terms(toks, lineno, str(path))
        for v in model.objective:
            var(v)
    rows = []
    for lineno, stmt in statements["rows"]:
        toks = stmt.split()
        name = f"r{len(rows)}"
        if toks and toks[0].endswith(":"):
            name, toks = toks[0][:-1], toks[1:]
        idx = next((i for i, t in enumerate(toks) if t in _SENSES), None)
        if idx is None or idx != len(toks) - 2:
            raise ParseError(f"constraint {name} lacks 'sense rhs'", lineno, str(path))
        coeffs = _parse_terms(toks[:idx], lineno, str(path))
        for v in coeffs:
            var(v)
        rows.append(Constraint(name, coeffs, _SENSES[toks[idx]], float(toks[idx + 1])))
    for lineno, stmt in statements["bounds"]:
        toks = stmt.split()
        if len(toks) == 2 and toks[1].lower() == "free":
            v = var(toks[0])
            v.lb, v.ub = -math.inf, math.inf
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            v = var(toks[2])
            v.lb, v.ub = float(toks[0]), float(toks[4])
        elif len(toks) == 3 and toks[1] in (">=", "<="):
            v = var(toks[0])
            if toks[1] == ">=":
                v.lb = float(toks[2])
            else:
                v.ub = float(toks[2])
        else:
            raise ParseError(f"unsupported bound {stmt!r}", lineno, str(path))
    for _, stmt in statements["bin"]:
        for name in stmt.split():
            v = var(name)
            v.kind, v.lb, v.ub = "binary", 0.0, 1.0
    if statements["gen"]:
        raise ParseError("general integer variables are not supported", statements["gen"][0][0], str(path))

    model.variables = {v: declared[v] for v in _canonical_order(declared)}
    model.constraints = rows
    return model


def _canonical_order(names: Iterable[str]) -> list[str]:
    """Variable order used by :func:`build_milp`: s, x, g, m, u, z then by index."""
    rank = {p: i for i, p in enumerate(("s", "x", "g", "m", "u", "z"))}

    def key(name: str):
        head, *idx = name.split("_")
        nums = tuple(int(x) if x.isdigit() else 0 for x in idx)
        return (rank.get(head, len(rank)), nums, name)

    return sorted(names, key=key)


# ---------------------------------------------------------------- MPS format

def _mps_num(x: float) -> str:
    s = _num(x)
    if len(s) <= 12:
        return s
    for digits in range(12, 0, -1):
        s = format(x, f".{digits}g")
        if len(s) <= 12:
            return s
    raise ValidationError(f"cannot fit {x} in an MPS field")


def _mps_line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}"
    return line.rstrip()


def mps_text(model: MilpModel, name: str = "ELECTION") -> str:
    """Fixed-form MPS. Names are aliased to 8 characters; comments map them back."""
    col_alias = {v: f"C{i:07d}" for i, v in enumerate(model.variables)}
    row_alias = {c.name: f"R{i:07d}" for i, c in enumerate(model.constraints)}
    out = ["* columns"]
    out += [f"* {a} {v}" for v, a in col_alias.items()]
    out.append("* rows")
    out += [f"* {a} {c}" for c, a in row_alias.items()]
    out += [f"NAME          {name[:8]}", "OBJSENSE", "    MAX", "ROWS", " N  OBJ"]
    kind = {"<=": "L", ">=": "G", "=": "E"}
    for c in model.constraints:
        out.append(_mps_line(kind[c.sense], row_alias[c.name]))
    out.append("COLUMNS")
    entries: dict[str, list[tuple[str, float]]] = {v: [] for v in model.variables}
    for v, a in model.objective.items():
        entries[v].append(("OBJ", a))
    for c in model.constraints:
        for v, a in c.coeffs.items():
            entries[v].append((row_alias[c.name], a))
    in_int = False
    for v, var in model.variables.items():
        is_int = var.kind == "binary"
        if is_int != in_int:
            out.append(_mps_line("", "MARKER", "'MARKER'", "", "'INTORG'" if is_int else "'INTEND'"))
            in_int = is_int
        items = entries[v] or [("OBJ", 0.0)]
        for a in range(0, len(items), 2):
            pair = items[a:a + 2]
            f5, f6 = (pair[1][0], _mps_num(pair[1][1])) if len(pair) > 1 else ("", "")
            out.append(_mps_line("", col_alias[v], pair[0][0], _mps_num(pair[0][1]), f5, f6))
    if in_int:
        out.append(_mps_line("", "MARKER", "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    for c in model.constraints:
        if c.rhs != 0:
            out.append(_mps_line("", "RHS", row_alias[c.name], _mps_num(c.rhs)))
    out.append("BOUNDS")
    for v, var in model.variables.items():
        a = col_alias[v]
        if var.kind == "binary":
            out.append(_mps_line("BV", "BND", a))
        elif var.lb == -math.inf and var.ub == math.inf:
            out.append(_mps_line("FR", "BND", a))
        else:
            if var.lb != 0:
                out.append(_mps_line("LO", "BND", a, _mps_num(var.lb)))
            if var.ub != math.inf:
                out.append(_mps_line("UP", "BND", a, _mps_num(var.ub)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def export_mps(model: MilpModel, path: str | Path) -> None:
    Path(path).write_text(mps_text(model), encoding="ascii")
