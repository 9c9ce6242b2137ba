"""Online rounding for multi-stage hypergraph covering with several resources.

Each vertex u holds capacity C(u, t) per step, split fractionally over n
resources by an LP solution y*.  Every hyperedge must accumulate D(i, t) units
of resource i by step t.  Per vertex, the fractional parts of y* form an
apportionment stream (parties = resources, house = leftover capacity), so an
online apportionment method rounds y* while keeping cumulative totals close.

Two modes:

* near-feasible: greedy per vertex; capacity is met exactly and coverage is
  violated by at most d(n-1)/2 (d - 1 for three resources).
* min-cost: scale y* by a resource-augmentation factor alpha and round with the
  randomized network-flow method; coverage always holds and the expected cost
  is alpha times the fractional cost.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import Instance, VoteVector, format_rational, max_deviation, parse_rational
from .greedy import Greedy, run_method
from .randmethod import (QuotaDistribution, advance, draw, step_marginals, substream,
                         upper_quota_set)


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


class CoveringInputError(ValueError):
    """Instance or fractional solution rejected before rounding."""


@dataclass(frozen=True)
class CoveringInstance:
    """Arrays are indexed [vertex][...] by vertex position and 0-based step;
    D is indexed [resource][step]."""

    d: int
    n: int
    T: int
    vertices: tuple[str, ...]
    hyperedges: tuple[tuple[int, ...], ...]
    C: tuple[tuple[int, ...], ...]
    D: tuple[tuple[Fraction, ...], ...]
    cost: tuple[tuple[tuple[Fraction, ...], ...], ...] | None = None

    def problems(self) -> list[str]:
        out = []
        if self.d < 1 or self.n < 1 or self.T < 0:
            out.append("d and n must be positive, T non-negative")
        nv = len(self.vertices)
        for k, e in enumerate(self.hyperedges):
            if len(e) != self.d or len(set(e)) != self.d:
                out.append(f"hyperedge {k} does not have {self.d} distinct vertices")
            if any(not (0 <= u < nv) for u in e):
                out.append(f"hyperedge {k} references an unknown vertex")
        if len(self.C) != nv or any(len(row) != self.T for row in self.C):
            out.append("C must give one value per vertex and step")
        elif any(c < 0 for row in self.C for c in row):
            out.append("capacities must be non-negative")
        if len(self.D) != self.n or any(len(row) != self.T for row in self.D):
            out.append("D must give one value per resource and step")
        else:
            for i, row in enumerate(self.D):
                if any(x < 0 for x in row):
                    out.append(f"negative demand for resource {i}")
                if any(a > b for a, b in zip(row, row[1:])):
                    out.append(f"demand of resource {i} decreases over time")
        if self.cost is not None:
            if len(self.cost) != nv or any(len(r) != self.n or any(len(x) != self.T for x in r)
                                           for r in self.cost):
                out.append("cost must give one value per vertex, resource and step")
        return out


@dataclass(frozen=True)
class FractionalSolution:
    y: tuple[tuple[tuple[Fraction, ...], ...], ...]   # [vertex][resource][step]

    def __getitem__(self, key):
        u, i, t = key
        return self.y[u][i][t]


def solution_problems(ci: CoveringInstance, ys: FractionalSolution) -> list[str]:
    """Shape, non-negativity, covering (1) and binding capacity (2) checks."""
    out = []
    nv = len(ci.vertices)
    if len(ys.y) != nv or any(len(r) != ci.n or any(len(x) != ci.T for x in r) for r in ys.y):
        return ["y* must give one value per vertex, resource and step"]
    for u in range(nv):
        for t in range(ci.T):
            col = [ys.y[u][i][t] for i in range(ci.n)]
            if any(x < 0 for x in col):
                out.append(f"negative y* at vertex {ci.vertices[u]}, step {t + 1}")
            if sum(col, Fraction(0)) != ci.C[u][t]:
                out.append(f"capacity not binding at vertex {ci.vertices[u]}, step {t + 1}: "
                           f"{sum(col, Fraction(0))} != {ci.C[u][t]}")
    slack = covering_slack(ci, ys.y)
    if slack < 0:
        out.append(f"y* violates covering by {-slack}")
    return out


def covering_slack(ci: CoveringInstance, Y) -> Fraction:
    """min over (e, i, t) of cumulative coverage minus D(i, t); +inf-like 0 if empty."""
    best = None
    for e in ci.hyperedges:
        for i in range(ci.n):
            acc = 0    # stays an int for integral Y
            for t in range(ci.T):
                acc += sum(Y[u][i][t] for u in e)
                gap = acc - ci.D[i][t]
                if best is None or gap < best:
                    best = gap
    return Fraction(0) if best is None else Fraction(best)


def _fraction_streams(ci: CoveringInstance, y) -> tuple[list[list[list[int]]], list[Instance]]:
    """Split y into floors plus one apportionment instance per vertex."""
    floors = []
    streams = []
    for u in range(len(ci.vertices)):
        fl = [[_floor(y[u][i][t]) for t in range(ci.T)] for i in range(ci.n)]
        rows = []
        for t in range(ci.T):
            row = tuple(y[u][i][t] - fl[i][t] for i in range(ci.n))
            if sum(row, Fraction(0)).denominator != 1:
                raise CoveringInputError(
                    f"leftover capacity at vertex {ci.vertices[u]}, step {t + 1} is not integral")
            rows.append(VoteVector(row))
        floors.append(fl)
        streams.append(Instance(ci.n, tuple(rows)))
    return floors, streams


def _assemble(ci: CoveringInstance, floors, states) -> list[list[list[int]]]:
    Y = []
    for u, st in enumerate(states):
        Y.append([[floors[u][i][t] + (1 if i in st.steps[t] else 0) for t in range(ci.T)]
                  for i in range(ci.n)])
    return Y


def cost_of(ci: CoveringInstance, Y) -> Fraction | None:
    if ci.cost is None:
        return None
    return sum((ci.cost[u][i][t] * Y[u][i][t] for u in range(len(ci.vertices))
                for i in range(ci.n) for t in range(ci.T)), Fraction(0))


@dataclass
class RoundingResult:
    Y: list[list[list[int]]]
    audit: dict = field(default_factory=dict)

    def to_json(self, ci: CoveringInstance) -> dict:
        return {
            "Y": {ci.vertices[u]: self.Y[u] for u in range(len(ci.vertices))},
            "audit": self.audit,
        }


def round_near_feasible(ci: CoveringInstance, ys: FractionalSolution) -> RoundingResult:
    bad = ci.problems() + solution_problems(ci, ys)
    if bad:
        raise CoveringInputError("; ".join(bad))
    floors, streams = _fraction_streams(ci, ys.y)
    states = [run_method(Greedy(), s) for s in streams]
    Y = _assemble(ci, floors, states)
    excess = max((abs(sum(Y[u][i][t] for i in range(ci.n)) - ci.C[u][t])
                  for u in range(len(ci.vertices)) for t in range(ci.T)), default=0)
    slack = covering_slack(ci, Y)
    bound = Fraction(ci.d * (ci.n - 1), 2) if ci.n != 3 else Fraction(ci.d - 1)
    violation = max(Fraction(0), -slack)
    audit = {
        "mode": "near-feasible",
        "capacity_equal": excess == 0,
        "max_capacity_gap": excess,
        "max_covering_violation": format_rational(violation),
        "violation_bound": format_rational(bound),
        "within_bound": violation <= bound,
        "max_vertex_deviation": format_rational(max((max_deviation(s) for s in states),
                                                    default=Fraction(0))),
    }
    c = cost_of(ci, Y)
    if c is not None:
        audit["cost"] = format_rational(c)
    return RoundingResult(Y, audit)


# --------------------------------------------------------------------------
# min-cost mode

def augmentation_factor(ci: CoveringInstance) -> Fraction:
    """alpha = max (d + D - 1) / D over cells with positive demand."""
    cells = [x for row in ci.D for x in row if x > 0]
    if not cells:
        raise CoveringInputError("no positive demand; augmentation factor undefined")
    return max(Fraction(ci.d) / x + 1 - 1 / x for x in cells)


@dataclass
class MinCostPlan:
    """Precomputed per-vertex method states; sampling is then cheap."""

    ci: CoveringInstance
    alpha: Fraction
    scaled: list
    floors: list
    streams: list[Instance]
    tracks: list[list[QuotaDistribution]]
    _expected: Fraction | None = field(default=None, repr=False)
    _fractional: Fraction | None = field(default=None, repr=False)

    def expected_cost(self) -> Fraction | None:
        """sum c * (floor(alpha y*) + E[a]) with the exact per-step marginals."""
        ci = self.ci
        if ci.cost is None:
            return None
        if self._expected is not None:
            return self._expected
        total = Fraction(0)
        for u, dists in enumerate(self.tracks):
            for t in range(ci.T):
                marg = step_marginals(dists[t], dists[t + 1])
                for i in range(ci.n):
                    total += ci.cost[u][i][t] * (self.floors[u][i][t] + marg[i])
        self._expected = total
        return total

    def fractional_cost(self) -> Fraction | None:
        """Cost of alpha * y*, i.e. alpha times the fractional cost."""
        if self.ci.cost is None:
            return None
        if self._fractional is None:
            self._fractional = cost_of(self.ci, self.scaled)
        return self._fractional

    def sample(self, rng_for_vertex) -> RoundingResult:
        """One rounding; ``rng_for_vertex(u)`` supplies each vertex's stream.

        Vertices advance in lockstep: at step t every vertex draws from the
        lottery of its current upper-quota set.
        """
        ci = self.ci
        nv = len(ci.vertices)
        rngs = [rng_for_vertex(u) for u in range(nv)]
        A = [[0] * ci.n for _ in range(nv)]
        Y = [[[0] * ci.T for _ in range(ci.n)] for _ in range(nv)]
        for t in range(ci.T):
            for u in range(nv):
                dists = self.tracks[u]
                S = draw(dists[t + 1].lottery[upper_quota_set(dists[t].V, A[u])], rngs[u])
                for i in range(ci.n):
                    a = 1 if i in S else 0
                    A[u][i] += a
                    Y[u][i][t] = self.floors[u][i][t] + a
        return RoundingResult(Y, self.audit(Y))

    def audit(self, Y) -> dict:
        ci = self.ci
        cap_ok = all(sum(Y[u][i][t] for i in range(ci.n)) <= _ceil(self.alpha * ci.C[u][t])
                     for u in range(len(ci.vertices)) for t in range(ci.T))
        slack = covering_slack(ci, Y)
        out = {
            "mode": "min-cost",
            "alpha": format_rational(self.alpha),
            "capacity_within_augmented": cap_ok,
            "min_covering_slack": format_rational(slack),
            "covering_ok": slack >= 0,
        }
        c = cost_of(ci, Y)
        if c is not None:
            out["cost"] = format_rational(c)
            out["expected_cost"] = format_rational(self.expected_cost())
            out["alpha_times_fractional_cost"] = format_rational(self.fractional_cost())
        return out


def plan_min_cost(ci: CoveringInstance, ys: FractionalSolution) -> MinCostPlan:
    bad = ci.problems() + solution_problems(ci, ys)
    if bad:
        raise CoveringInputError("; ".join(bad))
    if ci.n > 3:
        raise CoveringInputError("min-cost rounding needs at most three resources")
    if any(x.denominator != 1 for row in ci.D for x in row):
        raise CoveringInputError("min-cost rounding needs integral demands")
    alpha = augmentation_factor(ci)
    for u in range(len(ci.vertices)):
        for t in range(ci.T):
            if (alpha * ci.C[u][t]).denominator != 1:
                raise CoveringInputError(
                    f"alpha*C is not integral at vertex {ci.vertices[u]}, step {t + 1}")
    scaled = [[[alpha * x for x in row] for row in ys.y[u]] for u in range(len(ci.vertices))]
    floors, streams = _fraction_streams(ci, scaled)
    tracks = []
    for s in streams:
        dists = [QuotaDistribution.initial(ci.n)]
        for v in s.votes:
            dists.append(advance(dists[-1], v))
        tracks.append(dists)
    return MinCostPlan(ci, alpha, scaled, floors, streams, tracks)


def round_min_cost(ci: CoveringInstance, ys: FractionalSolution, seed: int = 0,
                   trial: int = 0) -> RoundingResult:
    plan = plan_min_cost(ci, ys)
    return plan.sample(lambda u: substream(seed, trial * max(1, len(ci.vertices)) + u))


# --------------------------------------------------------------------------
# JSON

def _rat_matrix(rows) -> tuple:
    return tuple(tuple(parse_rational(x) for x in row) for row in rows)


def load_covering(data: dict) -> tuple[CoveringInstance, FractionalSolution]:
    """Read {d, n, T, vertices, hyperedges, C, D, cost?, y_star}.

    C, cost and y_star are keyed by vertex name; cost and y_star hold an
    n x T matrix per vertex, C a length-T list, D an n x T matrix.
    """
    try:
        names = tuple(str(x) for x in data["vertices"])
        pos = {x: k for k, x in enumerate(names)}
        edges = tuple(tuple(pos[str(x)] for x in e) for e in data["hyperedges"])
        C = tuple(tuple(int(c) for c in data["C"][x]) for x in names)
        D = _rat_matrix(data["D"])
        cost = None
        if data.get("cost") is not None:
            cost = tuple(_rat_matrix(data["cost"][x]) for x in names)
        y = tuple(_rat_matrix(data["y_star"][x]) for x in names)
        ci = CoveringInstance(int(data["d"]), int(data["n"]), int(data["T"]), names, edges,
                              C, D, cost)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise CoveringInputError(f"malformed covering instance: {exc!r}") from exc
    return ci, FractionalSolution(y)


def dump_covering(ci: CoveringInstance, ys: FractionalSolution) -> dict:
    def mat(m):
        return [[format_rational(x) for x in row] for row in m]

    out = {
        "d": ci.d, "n": ci.n, "T": ci.T,
        "vertices": list(ci.vertices),
        "hyperedges": [[ci.vertices[u] for u in e] for e in ci.hyperedges],
        "C": {ci.vertices[u]: list(ci.C[u]) for u in range(len(ci.vertices))},
        "D": mat(ci.D),
        "y_star": {ci.vertices[u]: mat(ys.y[u]) for u in range(len(ci.vertices))},
    }
    if ci.cost is not None:
        out["cost"] = {ci.vertices[u]: mat(ci.cost[u]) for u in range(len(ci.vertices))}
    return out


# --------------------------------------------------------------------------
# random instances with binding capacities and integral, monotone demands

def random_covering(rng: random.Random, nv: int, d: int, n: int, T: int, n_edges: int,
                    max_cap: int = 3, with_cost: bool = True,
                    denominators: Sequence[int] = (2, 3, 4, 6)) -> tuple[CoveringInstance, FractionalSolution]:
    """Random instance whose y* is binding and feasible by construction.

    Demands are the floor of the worst cumulative hyperedge coverage, so they
    are integral and non-decreasing; at least one positive demand is 1, which
    keeps alpha = d.
    """
    names = tuple(f"v{k}" for k in range(nv))
    edges = set()
    while len(edges) < n_edges:
        edges.add(tuple(sorted(rng.sample(range(nv), d))))
    edges = tuple(sorted(edges))
    C = tuple(tuple(rng.randint(1, max_cap) for _ in range(T)) for _ in range(nv))
    y = []
    for u in range(nv):
        per = [[Fraction(0)] * T for _ in range(n)]
        for t in range(T):
            q = rng.choice(denominators)
            units = C[u][t] * q
            cuts = sorted(rng.randint(0, units) for _ in range(n - 1))
            parts = [b - a for a, b in zip([0] + cuts, cuts + [units])]
            for i in range(n):
                per[i][t] = Fraction(parts[i], q)
        y.append(tuple(tuple(row) for row in per))
    y = tuple(y)
    D = []
    for i in range(n):
        row = []
        for t in range(T):
            worst = min(sum(y[u][i][s] for u in e for s in range(t + 1)) for e in edges)
            row.append(Fraction(_floor(worst)))
        D.append(tuple(row))
    # pin the smallest positive demand to 1 so alpha = d
    positives = [(i, t) for i in range(n) for t in range(T) if D[i][t] > 0]
    if positives:
        i0 = min(range(n), key=lambda i: next((t for t in range(T) if D[i][t] > 0), T))
        t0 = next((t for t in range(T) if D[i0][t] > 0), None)
        if t0 is not None:
            D[i0] = tuple(Fraction(1) if t == t0 else x for t, x in enumerate(D[i0]))
    cost = None
    if with_cost:
        cost = tuple(tuple(tuple(Fraction(rng.randint(1, 9)) for _ in range(T)) for _ in range(n))
                     for _ in range(nv))
    return (CoveringInstance(d, n, T, names, edges, C, tuple(D), cost), FractionalSolution(y))
