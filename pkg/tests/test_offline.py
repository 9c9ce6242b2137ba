import random
from fractions import Fraction as F

from hypothesis import given, settings

from generators import instances, random_instance
from oracles import enumerate_vertices
from online_apportionment.core import Instance
from online_apportionment.flow import flow_violations
from online_apportionment.offline import (OfflineLottery, build_offline_network, offline_lottery,
                                          party_node, step_node)
from online_apportionment.randmethod import step_marginals, track

HALVES = Instance.from_rows([["1/2", "1/2"]] * 2)


def test_network_size_for_five_steps_three_parties():
    inst = random_instance(random.Random(1), 3, 5)
    net = build_offline_network(inst)
    assert len(net.nodes) == 1 + 5 + 15 + 1
    seat_arcs = sum(1 for a in net.arcs if a.tail != "o" and a.tail[0] == "u")
    positive = sum(1 for v in inst.votes for x in v if x > 0)
    assert seat_arcs == positive
    assert len(net.arcs) == 5 + positive + 15


def test_single_step_is_bipartite():
    inst = Instance.from_rows([["3/5", "3/10", "1/10"]])
    net = build_offline_network(inst)
    assert {(a.tail, a.head) for a in net.arcs} == (
        {("o", step_node(1))} | {(step_node(1), party_node(1, i)) for i in range(3)}
        | {(party_node(1, i), "d") for i in range(3)})
    lot = offline_lottery(inst)
    assert sorted((w, tuple(sorted(s[0]))) for w, s in lot.components) == [
        (F(1, 10), (2,)), (F(3, 10), (1,)), (F(3, 5), (0,))]


def test_zero_votes_have_no_seat_arc():
    inst = Instance.from_rows([["1/2", "1/2", "0"], ["0", "1/3", "2/3"]])
    net = build_offline_network(inst)
    assert not net.has_arc(step_node(1), party_node(1, 2))
    assert not net.has_arc(step_node(2), party_node(2, 0))
    assert net.arc(party_node(1, 0), party_node(2, 0)).lower == 0
    assert net.arc(party_node(2, 2), "d").upper == 1


def test_two_halves_lottery_and_flow_enumeration():
    lot = offline_lottery(HALVES)
    assert sorted(lot.to_json(), key=lambda c: c["sets"]) == [
        {"weight": "1/2", "sets": [[0], [1]]}, {"weight": "1/2", "sets": [[1], [0]]}]
    # exactly two integral flows exist, so this is the only possible lottery
    net = build_offline_network(HALVES)
    integral = enumerate_vertices(net, 2)
    assert len(integral) == 2


def test_lottery_json_round_trip():
    lot = offline_lottery(HALVES)
    again = OfflineLottery.from_json(2, lot.to_json())
    assert sorted(again.components, key=repr) == sorted(lot.components, key=repr)


@settings(max_examples=60, deadline=None)
@given(instances(min_n=1, max_n=5, min_T=1, max_T=6))
def test_lottery_invariants(inst):
    lot, (net, fstar, parts) = offline_lottery(inst, with_flows=True)
    assert lot.violations(inst) == []
    assert flow_violations(net, fstar) == []
    assert len(parts) <= len(net.arcs) + 1
    for k in range(len(net.arcs)):
        assert sum(w * f[k] for w, f in parts) == fstar[k]


def test_random_five_party_ten_step_instance():
    inst = random_instance(random.Random(9), 5, 10)
    assert offline_lottery(inst).violations(inst) == []


@settings(max_examples=30, deadline=None)
@given(instances(min_n=1, max_n=3, min_T=1, max_T=6))
def test_offline_and_online_marginals_agree(inst):
    dists = track(inst)
    lot = offline_lottery(inst)
    marg = lot.marginals()
    for t in range(1, inst.T + 1):
        online = step_marginals(dists[t - 1], dists[t])
        assert tuple(marg[t - 1]) == online == inst.votes[t - 1].entries
