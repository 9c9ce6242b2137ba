"""Adaptive vote streams that push any online method toward large deviation.

The basic move is the splitter: a two-party election whose vote shares make
both candidates equally attractive to *every* method, so whichever party gets
the seat ends exactly one unit of surplus above the other.  Boosters stack
splitters recursively to drive some party's |surplus| to (k-1)/2 - eps for a
group of k parties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import TrajectoryState, VoteVector, surplus
from .greedy import OnlineMethod


class SplitterDomainError(ValueError):
    pass


class AdversaryTimeout(RuntimeError):
    """Step cap exceeded; termination is guaranteed, so this means a bug."""


@dataclass(frozen=True)
class AdversaryConfig:
    party_subset: tuple[int, ...]
    epsilon: Fraction
    max_steps: int | None = 100_000

    def __post_init__(self):
        object.__setattr__(self, "party_subset", tuple(self.party_subset))
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not self.party_subset or len(set(self.party_subset)) != len(self.party_subset):
            raise ValueError("party subset must be non-empty with distinct indices")


def splitter(state: TrajectoryState, i: int, j: int) -> VoteVector:
    """Vote vector giving i and j shares (1 + d)/2 and (1 - d)/2 with d = s_i - s_j."""
    s = surplus(state)
    d = s[i] - s[j]
    if i == j or not (0 <= d < 1):
        raise SplitterDomainError(f"need 0 <= s_i - s_j < 1, got {d} for ({i}, {j})")
    entries = [Fraction(0)] * state.n
    entries[i] = (1 + d) / 2
    entries[j] = (1 - d) / 2
    return VoteVector(tuple(entries))


def _ranked(state: TrajectoryState, parties: Sequence[int]) -> list[int]:
    s = surplus(state)
    return sorted(parties, key=lambda p: (-s[p], p))


@dataclass
class Adversary:
    """Plays vote vectors against ``method`` and records what happened."""

    method: OnlineMethod
    state: TrajectoryState
    max_steps: int | None = 100_000
    transcript: list[dict] = field(default_factory=list)
    type_one_log: list[tuple[int, Fraction]] = field(default_factory=list)
    type_two_log: list[tuple[int, Fraction]] = field(default_factory=list)
    _steps: int = 0

    def play(self, v: VoteVector, rule: str, pair: tuple[int, int], depth: int = 0) -> None:
        if self.max_steps is not None and self._steps >= self.max_steps:
            raise AdversaryTimeout(f"exceeded {self.max_steps} steps")
        chosen = self.method.select(self.state.V, self.state.A, v)
        if len(chosen) != v.house or any(v[k] <= 0 for k in chosen):
            raise ValueError(f"method returned an infeasible set {sorted(chosen)}")
        self.state = self.state.extend(v, chosen)
        self._steps += 1
        self.transcript.append({
            "step": self.state.t,
            "rule": rule,
            "pair": list(pair),
            "depth": depth,
            "vote_vector": [str(x) for x in v.entries],
            "allocation": sorted(chosen),
        })

    def split(self, i: int, j: int, rule: str = "splitter", depth: int = 0) -> None:
        self.play(splitter(self.state, i, j), rule, (i, j), depth)

    # ------------------------------------------------------------------

    def boost(self, parties: Sequence[int], eps: Fraction, depth: int = 0) -> None:
        """Extend the trajectory until some party in ``parties`` has |s| >= (k-1)/2 - eps."""
        k = len(parties)
        target = Fraction(k - 1, 2) - eps
        rule = "splitter" if depth == 0 else "booster-descend"
        if _reached(self.state, parties, target):
            return
        if k == 1:
            return
        if k == 2:
            p1, p2 = _ranked(self.state, parties)
            self.split(p1, p2, rule, depth)
            return

        inner_eps = eps / 2
        inner_target = Fraction(k - 3, 2) - inner_eps

        def middle_ready() -> bool:
            r = _ranked(self.state, parties)
            s = surplus(self.state)
            return s[r[1]] >= inner_target or s[r[-2]] <= -inner_target

        # at most three inner boosts put a second party near an extreme end
        for _ in range(3):
            if middle_ready():
                break
            self.boost(_ranked(self.state, parties)[1:-1], inner_eps, depth + 1)
        if not middle_ready():
            raise AssertionError("inner boosters failed to prepare a splitter")

        while True:
            r = _ranked(self.state, parties)
            s = surplus(self.state)
            if s[r[0]] >= target or s[r[-1]] <= -target:
                return
            if s[r[1]] >= inner_target:
                if depth == 0:
                    self.type_one_log.append((len(self.transcript), s[r[0]]))
                self.split(r[0], r[1], rule, depth)
            elif s[r[-2]] <= -inner_target:
                if depth == 0:
                    self.type_two_log.append((len(self.transcript), s[r[-1]]))
                self.split(r[-2], r[-1], rule, depth)
            else:
                raise AssertionError("invariant lost between splitter iterations")
            self.boost(_ranked(self.state, parties)[1:-1], inner_eps, depth + 1)


def _reached(state: TrajectoryState, parties: Sequence[int], target: Fraction) -> bool:
    s = surplus(state)
    return any(abs(s[p]) >= target for p in parties)


@dataclass
class BoostResult:
    state: TrajectoryState
    witness: int
    deviation: Fraction
    transcript: list[dict]
    type_one_log: list[tuple[int, Fraction]]
    type_two_log: list[tuple[int, Fraction]]


def booster(method: OnlineMethod, state: TrajectoryState, cfg: AdversaryConfig) -> BoostResult:
    adv = Adversary(method, state, cfg.max_steps)
    adv.boost(list(cfg.party_subset), cfg.epsilon)
    s = surplus(adv.state)
    witness = max(cfg.party_subset, key=lambda p: (abs(s[p]), -p))
    return BoostResult(adv.state, witness, abs(s[witness]), adv.transcript,
                       adv.type_one_log, adv.type_two_log)


def outer_iteration_bound(epsilon: Fraction) -> int:
    """Smallest even L with L >= -2 log2(eps/2), plus the two warm-up iterations."""
    L = math.ceil(-2 * math.log2(float(epsilon) / 2))
    L += L % 2
    return L + 2


# rank pairs (0-based, by descending surplus); the first step is always the top pair
_FIGURE3_CYCLES = {
    3: [(0, 1), (1, 2)],
    4: [(1, 2), (0, 1), (2, 3)],
}
_FIGURE3_LENGTH = {3: 7, 4: 10}


def figure3_schedule(method: OnlineMethod, n: int) -> tuple[TrajectoryState, list[dict]]:
    """Fixed splitter schedule reaching surplus/deficit close to (n-1)/2 for n in {3, 4}."""
    if n not in _FIGURE3_CYCLES:
        raise ValueError("figure-3 schedule is defined for n = 3 or 4 only")
    adv = Adversary(method, TrajectoryState.initial(n))
    cycle = _FIGURE3_CYCLES[n]
    for step in range(_FIGURE3_LENGTH[n]):
        a, b = (0, 1) if step == 0 else cycle[(step - 1) % len(cycle)]
        r = _ranked(adv.state, range(n))
        adv.split(r[a], r[b])
    return adv.state, adv.transcript
