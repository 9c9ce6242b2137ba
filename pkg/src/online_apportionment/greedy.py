"""Deterministic greedy apportionment and the online-method interface."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Protocol, Sequence

from .core import Instance, TrajectoryState, VoteVector


class InfeasibleStep(ValueError):
    """Fewer parties with positive votes than seats to hand out."""


class OnlineMethod(Protocol):
    def select(self, V_prev: Sequence[Fraction], A_prev: Sequence[int],
               v: VoteVector) -> frozenset[int]:
        ...


def greedy_step(V_prev: Sequence[Fraction], A_prev: Sequence[int], v: VoteVector) -> frozenset[int]:
    """Give the H seats to the parties minimizing s_i - v_i, ties to the lowest index."""
    house = v.house
    candidates = [i for i in range(len(v)) if v[i] > 0]
    if len(candidates) < house:
        raise InfeasibleStep(f"{house} seats but only {len(candidates)} parties with votes")
    keyed = sorted(candidates, key=lambda i: ((A_prev[i] - V_prev[i]) - v[i], i))
    return frozenset(keyed[:house])


class Greedy:
    name = "greedy"

    def select(self, V_prev, A_prev, v):
        return greedy_step(V_prev, A_prev, v)


def run_method(method: OnlineMethod, inst: Instance,
               state: TrajectoryState | None = None) -> TrajectoryState:
    """Feed the votes of ``inst`` to ``method`` one step at a time."""
    if state is None:
        state = TrajectoryState.initial(inst.n)
    for v in inst.votes:
        chosen = method.select(state.V, state.A, v)
        if len(chosen) != v.house or any(v[i] <= 0 for i in chosen):
            raise InfeasibleStep(f"method returned {sorted(chosen)} for votes {v.entries}")
        state = state.extend(v, chosen)
    return state


def hamilton_allocation(v: Sequence[Fraction], house: int) -> list[int]:
    """Largest-remainder (Hamilton) apportionment of ``house`` seats.

    Quotas are ``house * v_i / sum(v)``; residue ties go to the lower index.
    """
    v = [Fraction(x) for x in v]
    total = sum(v, Fraction(0))
    if total <= 0:
        raise ValueError("votes must have a positive total")
    quotas = [house * x / total for x in v]
    seats = [q.numerator // q.denominator for q in quotas]
    left = house - sum(seats)
    order = sorted(range(len(v)), key=lambda i: (-(quotas[i] - seats[i]), i))
    for i in order[:left]:
        seats[i] += 1
    return seats


def run_greedy(inst: Instance) -> TrajectoryState:
    """Greedy over a whole instance on a common integer denominator.

    Same choices as ``run_method(Greedy(), inst)``, several times faster since
    no Fraction is created inside the loop.
    """
    L = 1
    for v in inst.votes:
        for x in v:
            L = math.lcm(L, x.denominator)
    n = inst.n
    V = [0] * n
    S = [0] * n          # scaled surplus A*L - V
    steps = []
    for v in inst.votes:
        w = [x.numerator * (L // x.denominator) for x in v]
        house = sum(w) // L
        pool = [i for i in range(n) if w[i] > 0]
        if len(pool) < house:
            raise InfeasibleStep(f"{house} seats but only {len(pool)} parties with votes")
        pool.sort(key=lambda i: (S[i] - w[i], i))
        chosen = frozenset(pool[:house])
        for i in range(n):
            V[i] += w[i]
            S[i] += (L if i in chosen else 0) - w[i]
        steps.append(chosen)
    A = tuple((S[i] + V[i]) // L for i in range(n))
    return TrajectoryState(n, inst.votes, tuple(steps),
                           tuple(Fraction(x, L) for x in V), A)
