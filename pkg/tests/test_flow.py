import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from oracles import enumerate_vertices, hoffman_feasible
from online_apportionment.flow import (Arc, CapacitatedNetwork, Flow, Infeasible,
                                       decompose_integral, feasible_flow, flow_violations,
                                       hypersimplex_decompose, recombine_sets)


def single_arc(lo=0, hi=1):
    return CapacitatedNetwork(("o", "d"), (Arc("o", "d", lo, hi),))


def test_arc_bounds_validated():
    with pytest.raises(ValueError):
        Arc("o", "d", 2, 1)
    with pytest.raises(ValueError):
        Arc("o", "d", -1, 1)


def test_single_arc_flow():
    f = feasible_flow(single_arc(), 1)
    assert isinstance(f, Flow) and f[("o", "d")] == 1 and f.value == 1


def test_infeasible_value_gives_cut_certificate():
    res = feasible_flow(single_arc(0, F(1, 2)), 1)
    assert isinstance(res, Infeasible)
    assert res.demand > res.capacity
    assert "o" in res.source_side and "d" not in res.source_side


def test_lower_bounds_can_block_small_values():
    net = CapacitatedNetwork(("o", "a", "d"), (Arc("o", "a", 0, 2), Arc("a", "d", 1, 2)))
    assert isinstance(feasible_flow(net, F(1, 2)), Infeasible)
    assert feasible_flow(net, F(3, 2))[("a", "d")] == F(3, 2)


def test_network_json_round_trip():
    net = CapacitatedNetwork(("o", ("u", (0, 1)), ("p", 0), "d"),
                             (Arc("o", ("u", (0, 1)), 0, F(1, 3)),
                              Arc(("u", (0, 1)), ("p", 0), 0, F(1, 3)),
                              Arc(("p", 0), "d", 0, 1)))
    again = CapacitatedNetwork.from_json(net.to_json())
    assert again.nodes == net.nodes and again.arcs == net.arcs


def test_parallel_arcs_rejected():
    with pytest.raises(ValueError):
        CapacitatedNetwork(("o", "d"), (Arc("o", "d", 0, 1), Arc("o", "d", 0, 1)))


def test_hypersimplex_examples():
    parts = hypersimplex_decompose([F(3, 5), F(3, 10), F(1, 10)], 1)
    assert sorted((sorted(S), w) for w, S in parts) == [([0], F(3, 5)), ([1], F(3, 10)),
                                                         ([2], F(1, 10))]
    parts = hypersimplex_decompose([F(1, 2)] * 4, 2)
    assert recombine_sets(parts, 4) == [F(1, 2)] * 4
    assert hypersimplex_decompose([1, 0, 1], 2) == [(1, frozenset({0, 2}))]
    with pytest.raises(ValueError):
        hypersimplex_decompose([F(1, 2), F(1, 3)], 1)
    with pytest.raises(ValueError):
        hypersimplex_decompose([F(3, 2), F(1, 2)], 2)


@st.composite
def hypersimplex_points(draw):
    n = draw(st.integers(1, 7))
    q = draw(st.sampled_from([2, 3, 4, 5, 6, 12]))
    H = draw(st.integers(0, n))
    # start from an integral point with H ones and move mass in 1/q steps
    units = [q] * H + [0] * (n - H)
    for _ in range(draw(st.integers(0, 3 * n))):
        i = draw(st.integers(0, n - 1))
        j = draw(st.integers(0, n - 1))
        if units[i] > 0 and units[j] < q and i != j:
            units[i] -= 1
            units[j] += 1
    return [F(u, q) for u in units], H


@settings(max_examples=300, deadline=None)
@given(hypersimplex_points())
def test_hypersimplex_recombines_with_few_components(point):
    v, H = point
    parts = hypersimplex_decompose(v, H)
    assert recombine_sets(parts, len(v)) == v
    assert sum(w for w, _ in parts) == 1 and all(w > 0 for w, _ in parts)
    assert all(len(S) == H for _, S in parts)
    assert len(parts) <= max(1, len(v))


def random_network(rng: random.Random, n_nodes: int, n_arcs: int, q: int):
    nodes = ["o"] + [f"x{k}" for k in range(n_nodes)] + ["d"]
    pairs = set()
    arcs = []
    available = sum(1 for a in nodes for b in nodes if a != b and a != "d" and b != "o")
    n_arcs = min(n_arcs, available)
    while len(arcs) < n_arcs:
        a, b = rng.sample(nodes, 2)
        if (a, b) in pairs or a == "d" or b == "o":
            continue
        pairs.add((a, b))
        hi = F(rng.randrange(0, 2 * q + 1), q)
        lo = F(rng.randrange(0, q + 1), q) if rng.random() < 0.3 else F(0)
        lo = min(lo, hi)
        arcs.append(Arc(a, b, lo, hi))
    return CapacitatedNetwork(tuple(nodes), tuple(arcs))


@pytest.mark.parametrize("seed", range(60))
def test_feasibility_matches_cut_and_vertex_oracles(seed):
    rng = random.Random(seed)
    net = random_network(rng, rng.randint(1, 4), rng.randint(3, 8), rng.choice([1, 2, 3, 4]))
    value = F(rng.randrange(0, 7), rng.choice([1, 2, 3]))
    res = feasible_flow(net, value)
    feasible = not isinstance(res, Infeasible)
    assert feasible == hoffman_feasible(net, value)
    assert feasible == bool(enumerate_vertices(net, value, stop_at_first=True))
    if feasible:
        assert flow_violations(net, res, value) == []
    else:
        # the certificate is a genuine violated cut
        assert res.demand > res.capacity


def integral_network(rng: random.Random):
    nodes = ["o", "a", "b", "c", "d"]
    arcs = [Arc("o", "a", 0, rng.randint(1, 3)), Arc("o", "b", 0, rng.randint(1, 3)),
            Arc("a", "c", 0, rng.randint(1, 3)), Arc("b", "c", 0, rng.randint(1, 3)),
            Arc("a", "d", rng.randint(0, 1), rng.randint(1, 3)), Arc("c", "d", 0, rng.randint(1, 4))]
    return CapacitatedNetwork(tuple(nodes), tuple(arcs))


@pytest.mark.parametrize("seed", range(40))
def test_decompose_integral_recombines(seed):
    rng = random.Random(seed)
    net = integral_network(rng)
    # pick the value with the most vertices; value 0 always has the zero flow
    vertices = max((enumerate_vertices(net, val) for val in range(4)), key=len)
    weights = [F(rng.randint(1, 5)) for _ in vertices]
    total = sum(weights)
    values = tuple(sum(w * f[k] for w, f in zip(weights, vertices)) / total
                   for k in range(len(net.arcs)))
    flow = Flow(net, values)
    parts = decompose_integral(net, flow)
    assert sum(w for w, _ in parts) == 1 and all(w > 0 for w, _ in parts)
    assert len(parts) <= len(net.arcs) + 1
    for w, g in parts:
        assert g.is_integral() and flow_violations(net, g) == []
    for k in range(len(net.arcs)):
        assert sum(w * g[k] for w, g in parts) == flow[k]


def test_decompose_integral_of_integral_flow_is_trivial():
    net = single_arc(0, 2)
    f = feasible_flow(net, 1)
    assert decompose_integral(net, f) == [(1, f)]


def test_decompose_integral_needs_integer_bounds():
    net = single_arc(0, F(1, 2))
    with pytest.raises(ValueError):
        decompose_integral(net, Flow(net, (F(1, 2),)))
