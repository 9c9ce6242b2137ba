"""Randomized online apportionment with global quota and exact ex-ante marginals.

The method state is a distribution over *upper-quota sets*: the parties that
currently hold the ceiling of their cumulative votes.  Given the next vote
vector, a small flow network over (upper-quota set, party) pairs encodes which
seat assignments keep every party within quota; a feasible flow of value 1
yields per-set seat probabilities, and a hypersimplex decomposition turns those
into a lottery over seat sets.  Feasibility is guaranteed for up to three
parties; with four or more the network can be empty of flows and the step is
reported as infeasible together with a cut certificate.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .core import (Instance, TrajectoryState, VoteVector, format_rational)
from .flow import (Arc, CapacitatedNetwork, Flow, Infeasible, feasible_flow,
                   flow_violations, hypersimplex_decompose)

Lottery = tuple[tuple[Fraction, frozenset[int]], ...]


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def upper_quota_set(V: Sequence[Fraction], A: Sequence[int]) -> frozenset[int]:
    """Parties whose seat count equals the ceiling of their cumulative votes
    (parties with integral V are always included)."""
    return frozenset(i for i, (x, a) in enumerate(zip(V, A)) if a == _ceil(x))


def allocation_of(u: frozenset[int], V: Sequence[Fraction]) -> tuple[int, ...]:
    """The quota-respecting seat vector summarized by upper-quota set ``u``."""
    return tuple(_ceil(x) if i in u else _floor(x) for i, x in enumerate(V))


def _key(u: frozenset[int]):
    return (len(u), tuple(sorted(u)))


class InfeasibleStep(RuntimeError):
    def __init__(self, step: int, witness: Infeasible, distributions=None):
        super().__init__(f"no feasible flow of value 1 at step {step}")
        self.step = step
        self.witness = witness
        self.distributions = distributions or []


@dataclass(frozen=True, eq=False)
class StepNetwork:
    network: CapacitatedNetwork
    house: int

    @staticmethod
    def set_node(u: frozenset[int]):
        return ("u", tuple(sorted(u)))

    @staticmethod
    def party_node(i: int):
        return ("p", i)


@dataclass(frozen=True, eq=False)
class QuotaDistribution:
    """State after step ``t``: cumulative votes and P[upper-quota set = u].

    ``lottery`` and ``assignment`` hold the step-t conditional seat lottery
    and fractional assignment z(u), keyed by the *previous* upper-quota set.
    """

    t: int
    V: tuple[Fraction, ...]
    pi: dict
    lottery: dict = field(default_factory=dict)
    assignment: dict = field(default_factory=dict)
    network: StepNetwork | None = None
    flow: Flow | None = None

    @classmethod
    def initial(cls, n: int) -> "QuotaDistribution":
        return cls(0, (Fraction(0),) * n, {frozenset(range(n)): Fraction(1)})

    @property
    def n(self) -> int:
        return len(self.V)

    def support(self) -> list[frozenset[int]]:
        return sorted(self.pi, key=_key)

    def total_mass(self) -> Fraction:
        return sum(self.pi.values(), Fraction(0))


def build_step_network(dist: QuotaDistribution, v: VoteVector) -> StepNetwork:
    house = v.house
    if house <= 0:
        raise ValueError("step network needs a positive house size")
    V = dist.V
    n = dist.n
    nodes = ["o"]
    arcs = []
    support = dist.support()
    for u in support:
        nodes.append(StepNetwork.set_node(u))
    nodes += [StepNetwork.party_node(i) for i in range(n)] + ["d"]
    for u in support:
        p = dist.pi[u]
        U = StepNetwork.set_node(u)
        arcs.append(Arc("o", U, 0, p))
        for i in range(n):
            blocked = (i in u and _ceil(V[i]) == _ceil(V[i] + v[i])) or v[i] == 0
            forced = i not in u and _floor(V[i]) + 1 == _floor(V[i] + v[i])
            cap = Fraction(0) if blocked else p / house
            low = p / house if forced else Fraction(0)
            arcs.append(Arc(U, StepNetwork.party_node(i), low, cap))
    for i in range(n):
        arcs.append(Arc(StepNetwork.party_node(i), "d", 0, v[i] / house))
    return StepNetwork(CapacitatedNetwork(tuple(nodes), tuple(arcs)), house)


def advance(dist: QuotaDistribution, v: VoteVector, flow: Flow | None = None) -> QuotaDistribution:
    """One step of the network-flow method.

    ``flow`` lets a caller pick among several feasible flows (any method with
    global quota and exact marginals arises this way); by default the solver's
    deterministic flow is used.  Raises :class:`InfeasibleStep` when no flow of
    value 1 exists.
    """
    n = dist.n
    if len(v) != n:
        raise ValueError("vote vector length does not match the distribution")
    V_next = tuple(a + b for a, b in zip(dist.V, v))
    house = v.house
    lottery: dict = {}
    assignment: dict = {}
    network = None
    if house == 0:
        for u in dist.pi:
            lottery[u] = ((Fraction(1), frozenset()),)
            assignment[u] = (Fraction(0),) * n
    else:
        network = build_step_network(dist, v)
        if flow is None:
            flow = feasible_flow(network.network, 1)
            if isinstance(flow, Infeasible):
                raise InfeasibleStep(dist.t + 1, flow)
        else:
            bad = flow_violations(network.network, flow, Fraction(1))
            if bad:
                raise ValueError("injected flow is not feasible: " + "; ".join(bad[:3]))
        for u in dist.support():
            p = dist.pi[u]
            U = StepNetwork.set_node(u)
            z = tuple(flow[(U, StepNetwork.party_node(i))] * house / p for i in range(n))
            assignment[u] = z
            lottery[u] = tuple(hypersimplex_decompose(z, house))
    pi_next: dict = {}
    for u in dist.support():
        A = allocation_of(u, dist.V)
        for w, S in lottery[u]:
            A_next = tuple(a + (1 if i in S else 0) for i, a in enumerate(A))
            u_next = upper_quota_set(V_next, A_next)
            pi_next[u_next] = pi_next.get(u_next, Fraction(0)) + dist.pi[u] * w
    return QuotaDistribution(dist.t + 1, V_next, pi_next, lottery, assignment, network, flow)


def step_marginals(prev: QuotaDistribution, nxt: QuotaDistribution) -> tuple[Fraction, ...]:
    """sum_u pi(u) z_i(u) for the step leading from ``prev`` to ``nxt``."""
    out = [Fraction(0)] * prev.n
    for u, p in prev.pi.items():
        for i, z in enumerate(nxt.assignment[u]):
            out[i] += p * z
    return tuple(out)


def exact_step_marginals(dist: QuotaDistribution, v: VoteVector) -> tuple[Fraction, ...]:
    return step_marginals(dist, advance(dist, v))


def track(inst: Instance) -> list[QuotaDistribution]:
    """Exact method state after every step: [state_0, ..., state_T]."""
    out = [QuotaDistribution.initial(inst.n)]
    for v in inst.votes:
        try:
            out.append(advance(out[-1], v))
        except InfeasibleStep as exc:
            exc.distributions = out
            raise
    return out


def quota_profile_violations(dist: QuotaDistribution) -> list[str]:
    """Check that P[i holds its upper quota] equals frac(V_i), plus the two
    three-party forms: pi({i}) = frac(V_i) when all sets are singletons, and
    pi(u) >= ceil(V_i) - V_i for |u| = 2, i not in u."""
    out = []
    V = dist.V
    for i, x in enumerate(V):
        p_in = sum((p for u, p in dist.pi.items() if i in u), Fraction(0))
        expect = Fraction(1) if x.denominator == 1 else x - _floor(x)
        if p_in != expect:
            out.append(f"P[{i} at upper quota] = {p_in}, expected {expect}")
    if dist.n == 3:
        sizes = {len(u) for u in dist.pi}
        if sizes == {1}:
            for u, p in dist.pi.items():
                (i,) = tuple(u)
                if p != V[i] - _floor(V[i]):
                    out.append(f"pi({{{i}}}) = {p} != frac(V_{i})")
        for u, p in dist.pi.items():
            if len(u) == 2:
                (i,) = tuple(set(range(3)) - u)
                if p < _ceil(V[i]) - V[i]:
                    out.append(f"pi({sorted(u)}) = {p} < ceil(V_{i}) - V_{i}")
    if any(p <= 0 for p in dist.pi.values()):
        out.append("non-positive probability stored")
    if dist.total_mass() != 1:
        out.append(f"total mass {dist.total_mass()}")
    return out


# --------------------------------------------------------------------------
# sampling

def draw(lottery: Lottery, rng: random.Random) -> frozenset[int]:
    """Exact draw from a rational lottery."""
    scale = 1
    for w, _ in lottery:
        scale = math.lcm(scale, w.denominator)
    r = rng.randrange(scale)
    acc = 0
    for w, S in lottery:
        acc += w.numerator * (scale // w.denominator)
        if r < acc:
            return S
    raise AssertionError("lottery weights do not sum to one")


def substream(seed: int, index: int) -> random.Random:
    """Independent deterministic generator for trial ``index`` under ``seed``."""
    return random.Random(f"{seed}:{index}")


def sample_trajectory(dists: Sequence[QuotaDistribution], inst: Instance,
                      rng: random.Random) -> TrajectoryState:
    """Sample one realized allocation sequence from a tracked method state."""
    state = TrajectoryState.initial(inst.n)
    u = frozenset(range(inst.n))
    for t, v in enumerate(inst.votes, start=1):
        S = draw(dists[t].lottery[u], rng)
        state = state.extend(v, S)
        u = upper_quota_set(state.V, state.A)
    return state


class NetworkFlowMethod:
    """Online form: advances the exact state as votes arrive, then samples
    from the lottery of the realized upper-quota set."""

    name = "netflow"

    def __init__(self, n: int, rng: random.Random):
        self.dist = QuotaDistribution.initial(n)
        self.rng = rng
        self.history: list[QuotaDistribution] = [self.dist]

    def select(self, V_prev, A_prev, v):
        if tuple(V_prev) != self.dist.V:
            raise ValueError("method state is out of sync with the history")
        nxt = advance(self.dist, v)
        S = draw(nxt.lottery[upper_quota_set(V_prev, A_prev)], self.rng)
        self.dist = nxt
        self.history.append(nxt)
        return S


def trajectory_distribution(dists: Sequence[QuotaDistribution]) -> dict[tuple, Fraction]:
    """Exact distribution over realized seat-set sequences."""
    n = dists[0].n
    frontier = {((), frozenset(range(n))): Fraction(1)}
    for t in range(1, len(dists)):
        V = dists[t].V
        nxt: dict = {}
        for (hist, u), p in frontier.items():
            A = allocation_of(u, dists[t - 1].V)
            for w, S in dists[t].lottery[u]:
                A2 = tuple(a + (1 if i in S else 0) for i, a in enumerate(A))
                key = (hist + (S,), upper_quota_set(V, A2))
                nxt[key] = nxt.get(key, Fraction(0)) + p * w
        frontier = nxt
    out: dict = {}
    for (hist, _), p in frontier.items():
        out[hist] = out.get(hist, Fraction(0)) + p
    return out


# --------------------------------------------------------------------------
# two parties: systematic sampling

class Grimmett:
    """Seat party 0 at step t iff floor(V^{t-1}_0 + lam) < floor(V^t_0 + lam)."""

    name = "grimmett"

    def __init__(self, lam):
        lam = Fraction(lam)
        if not (0 <= lam < 1):
            raise ValueError("lambda must lie in [0, 1)")
        self.lam = lam

    def select(self, V_prev, A_prev, v):
        if len(v) > 2:
            raise ValueError("systematic sampling handles at most two parties")
        if v.house == 0:
            return frozenset()
        before = _floor(V_prev[0] + self.lam)
        after = _floor(V_prev[0] + v[0] + self.lam)
        return frozenset({0}) if before < after else frozenset({1})


def grimmett_sample(inst: Instance, lam) -> TrajectoryState:
    if inst.n > 2:
        raise ValueError("systematic sampling handles at most two parties")
    from .greedy import run_method

    return run_method(Grimmett(lam), inst)


def grimmett_breakpoints(inst: Instance) -> list[Fraction]:
    """Offsets in [0, 1) where some step's decision flips, sorted, starting at 0."""
    points = {Fraction(0)}
    V = Fraction(0)
    for v in inst.votes:
        V += v[0]
        points.add((_ceil(V) - V) % 1)
    return sorted(points)


def grimmett_distribution(inst: Instance) -> dict[tuple, Fraction]:
    """Exact trajectory distribution of systematic sampling with lam ~ U[0, 1)."""
    pts = grimmett_breakpoints(inst) + [Fraction(1)]
    out: dict = {}
    for a, b in zip(pts, pts[1:]):
        traj = grimmett_sample(inst, a).steps
        out[traj] = out.get(traj, Fraction(0)) + (b - a)
    return out


# --------------------------------------------------------------------------

class UndefinedConditional(ZeroDivisionError):
    pass


def seat_probability(traj_dist: dict, party: int, t: int) -> Fraction:
    return sum((p for h, p in traj_dist.items() if party in h[t - 1]), Fraction(0))


def check_negative_correlation(traj_dist: dict, party: int, t: int, t_cond: int,
                               cond_value: int = 1) -> tuple[Fraction, Fraction]:
    """(P[a^t_i = 1 | a^{t_cond}_i = cond_value], P[a^t_i = 1]) computed exactly."""
    cond = Fraction(0)
    joint = Fraction(0)
    for h, p in traj_dist.items():
        if (party in h[t_cond - 1]) == bool(cond_value):
            cond += p
            if party in h[t - 1]:
                joint += p
    if cond == 0:
        raise UndefinedConditional(f"P[a^{t_cond}_{party} = {cond_value}] = 0")
    return joint / cond, seat_probability(traj_dist, party, t)


def method_state_json(dists: Sequence[QuotaDistribution]) -> list[dict]:
    """Per-step dump: the upper-quota distribution after step t and, for each
    set, the lottery applied from it at step t + 1."""
    out = []
    for k, d in enumerate(dists):
        nxt = dists[k + 1] if k + 1 < len(dists) else None
        entries = []
        for u in d.support():
            lot = nxt.lottery.get(u, ()) if nxt is not None else ()
            entries.append({
                "u": sorted(u),
                "prob": format_rational(d.pi[u]),
                "lottery": [{"set": sorted(S), "weight": format_rational(w)} for w, S in lot],
            })
        out.append({"t": d.t, "V": [format_rational(x) for x in d.V], "pi": entries})
    return out
