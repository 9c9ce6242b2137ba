"""Exact flows with lower and upper bounds.

Rational networks are scaled to a common denominator and solved as integer
max-flow problems (Dinic).  A lower/upper bounded (o, d)-flow of a given value
is found as a circulation: add a return arc d -> o pinned to that value, move
lower bounds into node excesses, and saturate a super source/sink.  When that
fails, the residual reachability set is a Hoffman cut proving infeasibility.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

from .core import format_rational, parse_rational

Node = Hashable


@dataclass(frozen=True)
class Arc:
    tail: Node
    head: Node
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lower", Fraction(self.lower))
        object.__setattr__(self, "upper", Fraction(self.upper))
        if not (0 <= self.lower <= self.upper):
            raise ValueError(f"bad bounds [{self.lower}, {self.upper}] on {self.tail}->{self.head}")


@dataclass(frozen=True)
class CapacitatedNetwork:
    nodes: tuple
    arcs: tuple[Arc, ...]
    origin: Node = "o"
    destination: Node = "d"
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        known = set(self.nodes)
        index = {}
        for k, a in enumerate(self.arcs):
            if a.tail not in known or a.head not in known:
                raise ValueError(f"arc {a.tail}->{a.head} references an unknown node")
            if (a.tail, a.head) in index:
                raise ValueError(f"parallel arc {a.tail}->{a.head}")
            index[(a.tail, a.head)] = k
        if self.origin not in known or self.destination not in known:
            raise ValueError("origin and destination must be nodes")
        object.__setattr__(self, "_index", index)

    def arc_index(self, tail: Node, head: Node) -> int:
        return self._index[(tail, head)]

    def has_arc(self, tail: Node, head: Node) -> bool:
        return (tail, head) in self._index

    def arc(self, tail: Node, head: Node) -> Arc:
        return self.arcs[self._index[(tail, head)]]

    def to_json(self) -> dict:
        return {
            "origin": _node_json(self.origin),
            "destination": _node_json(self.destination),
            "nodes": [_node_json(x) for x in self.nodes],
            "arcs": [{"tail": _node_json(a.tail), "head": _node_json(a.head),
                      "lower": format_rational(a.lower), "upper": format_rational(a.upper)}
                     for a in self.arcs],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CapacitatedNetwork":
        return cls(
            nodes=tuple(_node_from_json(x) for x in data["nodes"]),
            arcs=tuple(Arc(_node_from_json(a["tail"]), _node_from_json(a["head"]),
                           parse_rational(a.get("lower", "0")), parse_rational(a["upper"]))
                       for a in data["arcs"]),
            origin=_node_from_json(data.get("origin", "o")),
            destination=_node_from_json(data.get("destination", "d")),
        )


def _node_json(x):
    if isinstance(x, (tuple, frozenset)):
        return [_node_json(y) for y in (sorted(x, key=repr) if isinstance(x, frozenset) else x)]
    return x


def _node_from_json(x):
    if isinstance(x, list):
        return tuple(_node_from_json(y) for y in x)
    return x


@dataclass(frozen=True)
class Flow:
    network: CapacitatedNetwork
    values: tuple[Fraction, ...]

    def __getitem__(self, key) -> Fraction:
        if isinstance(key, int):
            return self.values[key]
        return self.values[self.network.arc_index(*key)]

    def get(self, tail: Node, head: Node, default=Fraction(0)) -> Fraction:
        if self.network.has_arc(tail, head):
            return self[(tail, head)]
        return default

    @property
    def value(self) -> Fraction:
        net = self.network
        out = Fraction(0)
        for a, f in zip(net.arcs, self.values):
            if a.tail == net.origin:
                out += f
            if a.head == net.origin:
                out -= f
        return out

    def is_integral(self) -> bool:
        return all(f.denominator == 1 for f in self.values)

    def to_json(self) -> list[dict]:
        return [{"tail": _node_json(a.tail), "head": _node_json(a.head), "flow": format_rational(f)}
                for a, f in zip(self.network.arcs, self.values)]


@dataclass(frozen=True)
class Infeasible:
    """Hoffman certificate: lower bounds forced into ``source_side`` exceed the
    upper capacity leaving it (the return arc d -> o carries the requested value)."""

    source_side: frozenset
    demand: Fraction
    capacity: Fraction

    def to_json(self) -> dict:
        return {"source_side": sorted((_node_json(x) for x in self.source_side), key=repr),
                "forced_in": format_rational(self.demand),
                "capacity_out": format_rational(self.capacity)}


def flow_violations(net: CapacitatedNetwork, flow: Flow, value: Fraction | None = None) -> list[str]:
    """Exact capacity/conservation audit; empty list means feasible."""
    out = []
    balance = {x: Fraction(0) for x in net.nodes}
    for a, f in zip(net.arcs, flow.values):
        if not (a.lower <= f <= a.upper):
            out.append(f"arc {a.tail}->{a.head}: {f} outside [{a.lower}, {a.upper}]")
        balance[a.tail] -= f
        balance[a.head] += f
    for x, b in balance.items():
        if x in (net.origin, net.destination):
            continue
        if b != 0:
            out.append(f"node {x}: imbalance {b}")
    if value is not None:
        if -balance[net.origin] != value or balance[net.destination] != value:
            out.append(f"flow value {-balance[net.origin]} != {value}")
    return out


# --------------------------------------------------------------------------
# integer max-flow

class _Dinic:
    def __init__(self, size: int):
        self.size = size
        self.adj: list[list[list]] = [[] for _ in range(size)]

    def add(self, u: int, v: int, cap: int) -> tuple[int, int]:
        self.adj[u].append([v, cap, len(self.adj[v])])
        self.adj[v].append([u, 0, len(self.adj[u]) - 1])
        return u, len(self.adj[u]) - 1

    def _levels(self, s: int, t: int):
        level = [-1] * self.size
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v, cap, _ in self.adj[u]:
                if cap > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _push(self, u, t, pushed, level, it):
        if u == t:
            return pushed
        edges = self.adj[u]
        while it[u] < len(edges):
            e = edges[it[u]]
            v, cap, rev = e
            if cap > 0 and level[v] == level[u] + 1:
                got = self._push(v, t, min(pushed, cap), level, it)
                if got:
                    e[1] -= got
                    self.adj[v][rev][1] += got
                    return got
            it[u] += 1
        return 0

    def run(self, s: int, t: int) -> int:
        total = 0
        while True:
            level = self._levels(s, t)
            if level is None:
                return total
            it = [0] * self.size
            while True:
                got = self._push(s, t, math.inf, level, it)
                if not got:
                    break
                total += got

    def reachable(self, s: int) -> set[int]:
        seen = {s}
        q = deque([s])
        while q:
            u = q.popleft()
            for v, cap, _ in self.adj[u]:
                if cap > 0 and v not in seen:
                    seen.add(v)
                    q.append(v)
        return seen


def _integer_circulation(size: int, arcs: Sequence[tuple[int, int, int, int]]):
    """Integral circulation with lo <= f <= hi on each (u, v, lo, hi), or the
    violated Hoffman set (as node indices) if none exists."""
    excess = [0] * size
    solver = _Dinic(size + 2)
    S, T = size, size + 1
    handles = []
    for u, v, lo, hi in arcs:
        handles.append(solver.add(u, v, hi - lo))
        excess[v] += lo
        excess[u] -= lo
    need = 0
    for x in range(size):
        if excess[x] > 0:
            solver.add(S, x, excess[x])
            need += excess[x]
        elif excess[x] < 0:
            solver.add(x, T, -excess[x])
    if solver.run(S, T) != need:
        return None, solver.reachable(S) - {S}
    values = []
    for (u, v, lo, hi), (x, k) in zip(arcs, handles):
        values.append(lo + (hi - lo) - solver.adj[x][k][1])
    return values, None


def _hoffman_sums(net: CapacitatedNetwork, side: frozenset, value: Fraction):
    demand = Fraction(0)
    capacity = Fraction(0)
    arcs = list(net.arcs) + [Arc(net.destination, net.origin, value, value)]
    for a in arcs:
        if a.head in side and a.tail not in side:
            demand += a.lower
        elif a.tail in side and a.head not in side:
            capacity += a.upper
    return demand, capacity


def feasible_flow(net: CapacitatedNetwork, value) -> Flow | Infeasible:
    """A flow of exactly ``value`` respecting every bound, or a cut certificate."""
    value = Fraction(value)
    if value < 0:
        raise ValueError("flow value must be non-negative")
    scale = 1
    for a in net.arcs:
        scale = math.lcm(scale, a.lower.denominator, a.upper.denominator)
    scale = math.lcm(scale, value.denominator)
    pos = {x: k for k, x in enumerate(net.nodes)}
    int_arcs = [(pos[a.tail], pos[a.head], int(a.lower * scale), int(a.upper * scale))
                for a in net.arcs]
    v = int(value * scale)
    int_arcs.append((pos[net.destination], pos[net.origin], v, v))
    values, cut = _integer_circulation(len(net.nodes), int_arcs)
    if values is None:
        side = frozenset(net.nodes[k] for k in cut)
        demand, capacity = _hoffman_sums(net, side, value)
        return Infeasible(side, demand, capacity)
    return Flow(net, tuple(Fraction(x, scale) for x in values[:-1]))


# --------------------------------------------------------------------------
# decompositions

def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def decompose_integral(net: CapacitatedNetwork, flow: Flow) -> list[tuple[Fraction, Flow]]:
    """Write a feasible flow on an integer-bounded network as a convex
    combination of integral feasible flows (at most |arcs| + 1 of them).

    Each round rounds the normalized residual g/mu to an integral point h of
    its floor/ceil box and peels off the largest multiple of h that keeps the
    remainder inside the same box; at least one fractional coordinate becomes
    integral per round.
    """
    for a in net.arcs:
        if a.lower.denominator != 1 or a.upper.denominator != 1:
            raise ValueError("decompose_integral needs integral bounds")
    bad = flow_violations(net, flow)
    if bad:
        raise ValueError("flow is not feasible: " + "; ".join(bad[:3]))
    pos = {x: k for k, x in enumerate(net.nodes)}
    ends = [(pos[a.tail], pos[a.head]) for a in net.arcs]
    ends.append((pos[net.destination], pos[net.origin]))
    residual = list(flow.values) + [flow.value]
    mass = Fraction(1)
    out: list[tuple[Fraction, Flow]] = []
    while mass > 0:
        ratio = [g / mass for g in residual]
        box = [(_floor(r), _ceil(r)) for r in ratio]
        values, _ = _integer_circulation(len(net.nodes),
                                         [(u, v, lo, hi) for (u, v), (lo, hi) in zip(ends, box)])
        if values is None:
            raise AssertionError("rounded box lost its integral point")
        step = mass
        for g, (lo, hi), h in zip(residual, box, values):
            if lo == hi:
                continue
            if h == lo:
                step = min(step, mass * hi - g)
            else:
                step = min(step, g - mass * lo)
        if step <= 0:
            raise AssertionError("decomposition stalled")
        out.append((step, Flow(net, tuple(Fraction(h) for h in values[:-1]))))
        residual = [g - step * h for g, h in zip(residual, values)]
        mass -= step
    return out


def hypersimplex_decompose(v: Sequence, house: int) -> list[tuple[Fraction, frozenset[int]]]:
    """Convex decomposition of v in [0,1]^n with sum ``house`` into sets of size ``house``.

    Repeatedly take the ``house`` largest residual coordinates (ties to the
    lower index) with the largest weight that keeps the residual inside the
    scaled hypersimplex.
    """
    v = [Fraction(x) for x in v]
    n = len(v)
    if any(x < 0 or x > 1 for x in v):
        raise ValueError("entries must lie in [0, 1]")
    if sum(v, Fraction(0)) != house or not (0 <= house <= n):
        raise ValueError(f"entries sum to {sum(v, Fraction(0))}, expected house {house}")
    residual = list(v)
    mass = Fraction(1)
    out = []
    while mass > 0:
        order = sorted(range(n), key=lambda i: (-residual[i], i))
        chosen, rest = order[:house], order[house:]
        weight = mass
        if chosen:
            weight = min(weight, min(residual[i] for i in chosen))
        if rest:
            weight = min(weight, mass - max(residual[j] for j in rest))
        if weight <= 0:
            raise AssertionError("hypersimplex decomposition stalled")
        for i in chosen:
            residual[i] -= weight
        mass -= weight
        out.append((weight, frozenset(chosen)))
    return out


def recombine_sets(parts: Iterable[tuple[Fraction, Iterable[int]]], n: int) -> list[Fraction]:
    out = [Fraction(0)] * n
    for w, S in parts:
        for i in S:
            out[i] += w
    return out
