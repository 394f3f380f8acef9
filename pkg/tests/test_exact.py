import itertools
import math

import numpy as np
import pytest

from election_control import ControlProblem, DirectedGraph
from election_control.cascade import sample_batch
from election_control.errors import EnumerationLimitError
from election_control.exact import (
    big_m,
    branch_and_bound,
    brute_force,
    build_milp,
    complete_assignment,
    export_lp,
    export_mps,
    is_feasible,
    lp_text,
    read_lp,
    solve_enumerative,
    solve_exact,
    subset_count,
)
from election_control.objectives import margin, margin_model, objective_total

from conftest import profile, random_instance

KINDS = [("constructive", "mov"), ("constructive", "pov"), ("destructive", "mov"), ("destructive", "pov")]


def test_brute_force_star(tiny_star):
    b = sample_batch(tiny_star.graph, 5, 0)
    res = brute_force(tiny_star, b, 1, "mov")
    assert res.best_set == (0,) and res.best_value == 6
    assert res.enumerated == 6
    zero = brute_force(tiny_star, b, 0, "mov")
    assert zero.best_set == () and zero.best_value == 0


def test_brute_force_path_pov_tie_break(tiny_path):
    b = sample_batch(tiny_path.graph, 2, 0)
    res = brute_force(tiny_path, b, 1, "pov")
    assert res.best_value == 1 and res.best_set == (0,)
    assert objective_total(tiny_path, {1}, b, "pov") == 2


def test_cap_refusal(tiny_star):
    with pytest.raises(EnumerationLimitError) as err:
        brute_force(tiny_star, sample_batch(tiny_star.graph, 1, 0), 2, "mov", cap=10)
    assert err.value.required == subset_count(5, 2) == 16


def test_oracle_value_recomputes():
    rng = np.random.default_rng(3)
    for _ in range(40):
        problem, batch = random_instance(rng)
        for obj in ("mov", "pov"):
            res = brute_force(problem, batch, problem.k, obj)
            assert res.total == pytest.approx(objective_total(problem, res.best_set, batch, obj), abs=1e-9)
            assert len(res.best_set) <= problem.k


def test_brute_force_workers_agree():
    rng = np.random.default_rng(4)
    problem, batch = random_instance(rng, n_max=10)
    a = brute_force(problem, batch, 3, "mov")
    b = brute_force(problem, batch, 3, "mov", workers=4)
    assert a == b


def test_branch_and_bound_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(150):
        problem, batch = random_instance(rng, n_max=12, k_max=4)
        for obj in ("mov", "pov"):
            bf = brute_force(problem, batch, problem.k, obj)
            bb = branch_and_bound(problem, batch, problem.k, obj)
            assert bb.total == pytest.approx(bf.total, abs=1e-9)
            assert objective_total(problem, bb.best_set, batch, obj) == pytest.approx(bb.total, abs=1e-9)


def test_solve_exact_switches_route():
    rng = np.random.default_rng(6)
    problem, batch = random_instance(rng, n_max=10)
    a = solve_exact(problem, batch, 2, "mov", cap=10**6)
    b = solve_exact(problem, batch, 2, "mov", cap=1)
    assert a.total == pytest.approx(b.total, abs=1e-9)


# ---------------------------------------------------------------- MILP

def counts(model):
    return {p: len(model.names(p)) for p in "sxgmuz"}


def test_path_model_shape_and_value(tiny_path):
    b = sample_batch(tiny_path.graph, 1, 0)
    model = build_milp(tiny_path, b, 1, "mov")
    assert counts(model) == {"s": 3, "x": 3, "g": 1, "m": 1, "u": 0, "z": 0}
    res = solve_enumerative(model)
    assert res.best_value == 6 and res.best_set == (0,)
    assert model.big_M == big_m(3) == 16


def test_pov_model_degenerate_threshold():
    g = DirectedGraph.from_edges(2, [])
    p = ControlProblem(g, profile([[0, 1], [0, 1]]), "constructive", 1)
    model = build_milp(p, sample_batch(g, 1, 0), 1, "pov")
    values = complete_assignment(model, [])
    assert values["u_0"] == 1 and is_feasible(model, values)
    assert solve_enumerative(model).best_value == 1


def test_destructive_selector_rows(multi3):
    p = multi3.with_mode("destructive")
    model = build_milp(p, sample_batch(p.graph, 1, 0), 1, "mov")
    assert counts(model)["z"] == 2
    select = [c for c in model.constraints if c.name.startswith("select_")]
    assert len(select) == 1
    assert select[0].coeffs == {"z_0_1": 1.0, "z_0_2": 1.0} and select[0].sense == ">=" and select[0].rhs == 1


def test_unreachable_pov_model_is_zero():
    g = DirectedGraph.from_edges(4, [])
    p = ControlProblem(g, profile([[0, 1, 2]] * 4), "destructive", 1)
    assert solve_enumerative(build_milp(p, sample_batch(g, 2, 0), 1, "pov")).best_value == 0


def test_lp_export_declares_binaries(tmp_path, tiny_path):
    model = build_milp(tiny_path, sample_batch(tiny_path.graph, 1, 0), 1, "mov")
    export_lp(model, tmp_path / "m.lp")
    text = (tmp_path / "m.lp").read_text()
    lines = text.splitlines()
    assert lines[lines.index("Binaries") + 1].split() == ["s_0", "s_1", "s_2"]
    assert text.endswith("End\n")


def test_edgeless_reach_rows():
    g = DirectedGraph.from_edges(3, [])
    p = ControlProblem(g, profile([[1, 0]] * 3), "constructive", 1)
    model = build_milp(p, sample_batch(g, 2, 0), 1, "mov")
    for c in model.constraints:
        if c.name.startswith("reach_"):
            _, i, v = c.name.split("_")
            assert c.coeffs == {f"x_{i}_{v}": 1.0, f"s_{v}": -1.0} and c.rhs == 0


def assert_same_model(a, b):
    ca, Aa, loa, hia, lba, uba = a.matrix()
    cb, Ab, lob, hib, lbb, ubb = b.matrix()
    assert list(a.variables) == list(b.variables)
    assert np.array_equal(ca, cb) and np.array_equal(lba, lbb) and np.array_equal(uba, ubb)
    rows = lambda A, lo, hi: sorted(map(tuple, np.column_stack([A, lo, hi]).tolist()))
    assert rows(Aa, loa, hia) == rows(Ab, lob, hib)
    assert [v.kind for v in a.variables.values()] == [v.kind for v in b.variables.values()]


def test_lp_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    for t in range(12):
        problem, batch = random_instance(rng, n_max=7)
        for mode, obj in KINDS:
            model = build_milp(problem.with_mode(mode), batch, problem.k, obj)
            path = tmp_path / f"m{t}.lp"
            export_lp(model, path)
            back = read_lp(path)
            assert_same_model(model, back)
            assert back.meta == model.meta and back.big_M == model.big_M
            assert lp_text(back) == lp_text(model)


def test_long_rows_wrap_and_parse(tmp_path):
    g = DirectedGraph.from_edges(80, [])
    p = ControlProblem(g, profile([[1, 0]] * 80), "constructive", 2)
    model = build_milp(p, sample_batch(g, 1, 0), 2, "mov")
    text = lp_text(model)
    assert max(len(line) for line in text.splitlines()) <= 260
    (tmp_path / "w.lp").write_text(text)
    assert_same_model(model, read_lp(tmp_path / "w.lp"))


def test_mps_layout(tmp_path, tiny_path):
    model = build_milp(tiny_path, sample_batch(tiny_path.graph, 1, 0), 1, "pov")
    export_mps(model, tmp_path / "m.mps")
    lines = (tmp_path / "m.mps").read_text().splitlines()
    assert "OBJSENSE" in lines and lines[-1] == "ENDATA"
    body = [ln for ln in lines if not ln.startswith("*")]
    assert all(len(ln) <= 61 for ln in body)
    assert any("'INTORG'" in ln for ln in body) and any("'INTEND'" in ln for ln in body)
    assert sum(ln.startswith(" BV BND") for ln in body) == 3 + 1


def test_milp_semantics_and_oracle_equivalence():
    rng = np.random.default_rng(8)
    for _ in range(60):
        problem, batch = random_instance(rng, n_max=8, k_max=2, r_max=4)
        for mode, obj in KINDS:
            p = problem.with_mode(mode)
            model = build_milp(p, batch, p.k, obj)
            delta = margin_model(p).threshold
            for size in range(p.k + 1):
                for S in itertools.combinations(range(p.n), size):
                    values = complete_assignment(model, S)
                    assert is_feasible(model, values)
                    for y in batch.scenarios:
                        m = margin(p, S, y)
                        assert values[f"m_{y.index}"] == m
                        if obj == "pov":
                            assert values[f"u_{y.index}"] == (1.0 if m >= delta else 0.0)
            res = solve_enumerative(model)
            assert math.isclose(res.best_value, brute_force(p, batch, p.k, obj).best_value, abs_tol=1e-9)


def test_big_m_forces_threshold():
    """u_i = 1 admits a feasible completion exactly when the margin reaches the threshold."""
    rng = np.random.default_rng(9)
    for _ in range(30):
        problem, batch = random_instance(rng, n_max=7, k_max=2, r_max=3)
        for mode in ("constructive", "destructive"):
            p = problem.with_mode(mode)
            model = build_milp(p, batch, p.k, "pov")
            delta = margin_model(p).threshold
            for S in itertools.combinations(range(p.n), min(p.k, p.n)):
                values = complete_assignment(model, S)
                for y in batch.scenarios:
                    forced = dict(values)
                    forced[f"u_{y.index}"] = 1.0
                    assert is_feasible(model, forced) == (margin(p, S, y) >= delta)


def highs_value(path):
    highspy = pytest.importorskip("highspy")
    h = highspy.Highs()
    h.silent()
    h.readModel(str(path))
    h.run()
    return h.getInfo().objective_function_value


def test_external_solver_agrees(tmp_path):
    rng = np.random.default_rng(10)
    for t in range(25):
        problem, batch = random_instance(rng, n_max=8, k_max=3, r_max=4)
        for mode, obj in KINDS:
            p = problem.with_mode(mode)
            model = build_milp(p, batch, p.k, obj)
            export_lp(model, tmp_path / "a.lp")
            export_mps(model, tmp_path / "a.mps")
            want = brute_force(p, batch, p.k, obj).best_value
            assert highs_value(tmp_path / "a.lp") == pytest.approx(want, abs=1e-6)
            assert highs_value(tmp_path / "a.mps") == pytest.approx(want, abs=1e-6)


def test_scipy_milp_agrees():
    opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(11)
    for _ in range(15):
        problem, batch = random_instance(rng, n_max=7, k_max=2, r_max=3)
        for mode, obj in KINDS:
            p = problem.with_mode(mode)
            model = build_milp(p, batch, p.k, obj)
            c, A, lo, hi, lb, ub = model.matrix()
            res = opt.milp(
                -c,
                constraints=opt.LinearConstraint(A, lo, hi),
                bounds=opt.Bounds(lb, ub),
                integrality=model.integrality(),
            )
            assert res.success
            assert -res.fun == pytest.approx(brute_force(p, batch, p.k, obj).best_value, abs=1e-6)

