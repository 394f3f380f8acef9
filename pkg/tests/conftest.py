import numpy as np
import pytest

from election_control import ControlProblem, DirectedGraph, PreferenceProfile
from election_control.cascade import exhaustive_batch, sample_batch


def path_graph(p=1.0):
    return DirectedGraph.from_edges(3, [(0, 1, p), (1, 2, p)])


def star_graph():
    return DirectedGraph.from_edges(5, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])


def profile(rows, c=None):
    return PreferenceProfile.from_rankings(rows, c)


@pytest.fixture
def tiny_path():
    # every voter ranks c1 over the target: tallies 0 vs 3
    return ControlProblem(path_graph(), profile([[1, 0]] * 3), "constructive", 1)


@pytest.fixture
def tiny_star():
    prefs = profile([[0, 1], [1, 0], [1, 0], [1, 0], [0, 1]])
    return ControlProblem(star_graph(), prefs, "constructive", 1)


@pytest.fixture
def multi3():
    g = DirectedGraph.from_edges(3, [])
    prefs = profile([[1, 0, 2], [2, 0, 1], [0, 1, 2]])
    return ControlProblem(g, prefs, "constructive", 1)


def random_graph(rng, n, edge_prob=0.3, probs=(0.3, 0.5, 1.0)):
    edges = [
        (u, v, float(rng.choice(probs)))
        for u in range(n)
        for v in range(n)
        if u != v and rng.random() < edge_prob
    ]
    return DirectedGraph.from_edges(n, edges)


def random_profile(rng, n, c):
    return PreferenceProfile(np.array([rng.permutation(c) for _ in range(n)]).reshape(n, c), c)


def random_instance(rng, n_max=10, c_range=(2, 5), k_max=3, mode=None, r_max=8):
    """Small problem plus a shared batch: exhaustive when cheap, else sampled."""
    n = int(rng.integers(3, n_max + 1))
    c = int(rng.integers(c_range[0], c_range[1] + 1))
    uncertain = rng.random() < 0.5
    g = random_graph(rng, n, edge_prob=0.2, probs=(0.5,) if uncertain else (0.2, 0.5, 1.0))
    mode = mode or str(rng.choice(["constructive", "destructive"]))
    k = int(rng.integers(1, min(k_max, n) + 1))
    problem = ControlProblem(g, random_profile(rng, n, c), mode, k)
    free = int(((g.probs > 0) & (g.probs < 1)).sum())
    if free <= 3:
        batch = exhaustive_batch(g)
    else:
        batch = sample_batch(g, int(rng.integers(1, r_max + 1)), int(rng.integers(0, 2**31)))
    return problem, batch
