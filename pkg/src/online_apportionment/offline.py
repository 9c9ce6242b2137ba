"""Offline lottery over deterministic global-quota allocations.

When the whole vote sequence is known up front, a single flow network over
the horizon captures every global-quota allocation as an integral flow.
Sending v^t_i along each seat arc gives a fractional flow; decomposing it into
integral flows yields a lottery whose per-step marginals are exactly v^t.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import Instance, TrajectoryState, check_global_quota, format_rational, parse_rational
from .flow import Arc, CapacitatedNetwork, Flow, decompose_integral, flow_violations


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def step_node(t: int):
    return ("u", t)


def party_node(t: int, i: int):
    return ("w", t, i)


def build_offline_network(inst: Instance) -> CapacitatedNetwork:
    """Nodes o, u^t, w^t_i, d (steps 1-based).  Seat arcs u^t -> w^t_i exist
    only for parties with positive votes; carry-over arcs bound the cumulative
    seat count between floor and ceil of the cumulative votes."""
    n, T = inst.n, inst.T
    nodes = ["o"] + [step_node(t) for t in range(1, T + 1)]
    nodes += [party_node(t, i) for t in range(1, T + 1) for i in range(n)] + ["d"]
    arcs = []
    for t, v in enumerate(inst.votes, start=1):
        arcs.append(Arc("o", step_node(t), 0, v.house))
        for i in range(n):
            if v[i] > 0:
                arcs.append(Arc(step_node(t), party_node(t, i), 0, 1))
    for t in range(1, T + 1):
        V = inst.cumulative(t)
        for i in range(n):
            head = party_node(t + 1, i) if t < T else "d"
            arcs.append(Arc(party_node(t, i), head, _floor(V[i]), _ceil(V[i])))
    return CapacitatedNetwork(tuple(nodes), tuple(arcs))


def proportional_flow(net: CapacitatedNetwork, inst: Instance) -> Flow:
    """The fractional flow sending v^t_i on each seat arc."""
    values = []
    cumulative = {t: inst.cumulative(t) for t in range(1, inst.T + 1)}
    for a in net.arcs:
        if a.tail == "o":
            values.append(Fraction(inst.votes[a.head[1] - 1].house))
        elif a.tail[0] == "u":
            _, t, i = a.head
            values.append(inst.votes[t - 1][i])
        else:
            _, t, i = a.tail
            values.append(cumulative[t][i])
    return Flow(net, tuple(values))


@dataclass(frozen=True)
class OfflineLottery:
    n: int
    components: tuple[tuple[Fraction, tuple[frozenset[int], ...]], ...]

    def marginals(self) -> list[list[Fraction]]:
        T = len(self.components[0][1]) if self.components else 0
        out = [[Fraction(0)] * self.n for _ in range(T)]
        for w, sets in self.components:
            for t, X in enumerate(sets):
                for i in X:
                    out[t][i] += w
        return out

    def trajectories(self, inst: Instance) -> list[tuple[Fraction, TrajectoryState]]:
        out = []
        for w, sets in self.components:
            state = TrajectoryState.initial(self.n)
            for v, X in zip(inst.votes, sets):
                state = state.extend(v, X)
            out.append((w, state))
        return out

    def violations(self, inst: Instance) -> list[str]:
        out = []
        if any(w <= 0 for w, _ in self.components):
            out.append("non-positive weight")
        total = sum((w for w, _ in self.components), Fraction(0))
        if total != 1:
            out.append(f"weights sum to {total}")
        for k, (_, state) in enumerate(self.trajectories(inst)):
            bad = check_global_quota(state)
            if bad is not None or state.consistency_violations():
                out.append(f"component {k} breaks quota or feasibility at {bad}")
        for t, row in enumerate(self.marginals(), start=1):
            for i, m in enumerate(row):
                if m != inst.votes[t - 1][i]:
                    out.append(f"marginal {m} != {inst.votes[t - 1][i]} at t={t}, i={i}")
        return out

    def to_json(self) -> list[dict]:
        return [{"weight": format_rational(w), "sets": [sorted(X) for X in sets]}
                for w, sets in self.components]

    @classmethod
    def from_json(cls, n: int, data: list[dict]) -> "OfflineLottery":
        return cls(n, tuple((parse_rational(c["weight"]), tuple(frozenset(X) for X in c["sets"]))
                            for c in data))


def offline_lottery(inst: Instance, with_flows: bool = False):
    """Lottery over global-quota allocations with marginals v^t.

    With ``with_flows`` also returns (network, f*, [(weight, integral flow)])
    so callers can audit the arc-wise recombination.
    """
    net = build_offline_network(inst)
    fstar = proportional_flow(net, inst)
    bad = flow_violations(net, fstar)
    if bad:
        raise AssertionError("proportional flow infeasible: " + "; ".join(bad[:3]))
    parts = decompose_integral(net, fstar)
    comps = []
    for w, f in parts:
        sets = []
        for t in range(1, inst.T + 1):
            sets.append(frozenset(i for i in range(inst.n)
                                  if f.get(step_node(t), party_node(t, i)) == 1))
        comps.append((w, tuple(sets)))
    lottery = OfflineLottery(inst.n, tuple(comps))
    if with_flows:
        return lottery, (net, fstar, parts)
    return lottery
