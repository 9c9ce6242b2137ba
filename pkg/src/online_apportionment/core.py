"""Exact domain types for online apportionment and the predicates built on them.

Every vote, surplus and capacity is a :class:`fractions.Fraction`; nothing in a
decision path touches floating point.  Parties are 0-based, steps are 1-based
(step 0 is the empty initial state).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

Rational = Fraction


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"p/q"``, an integer or an exact decimal string such as ``"0.6"``."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise TypeError("floats are not accepted; pass a string like '3/5' or '0.6'")
    return Fraction(text.strip())


def format_rational(value: Fraction) -> str:
    return str(Fraction(value))


def _lcm_denominators(values: Iterable[Fraction]) -> int:
    out = 1
    for x in values:
        out = math.lcm(out, x.denominator)
    return out


@dataclass(frozen=True)
class VoteVector:
    entries: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(parse_rational(x) for x in self.entries))

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def total(self) -> Fraction:
        return sum(self.entries, Fraction(0))

    @property
    def house(self) -> int:
        total = self.total
        if total.denominator != 1:
            raise ValueError(f"row sum {total} is not integral")
        return int(total)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, x in enumerate(self.entries) if x > 0)

    def __getitem__(self, i: int) -> Fraction:
        return self.entries[i]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class Violation:
    step: int
    party: int | None
    message: str


@dataclass(frozen=True)
class Instance:
    n: int
    votes: tuple[VoteVector, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "votes",
            tuple(v if isinstance(v, VoteVector) else VoteVector(tuple(v)) for v in self.votes),
        )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], n: int | None = None) -> "Instance":
        rows = [tuple(parse_rational(x) for x in row) for row in rows]
        if n is None:
            if not rows:
                raise ValueError("cannot infer n from an empty instance")
            n = len(rows[0])
        return cls(n, tuple(VoteVector(r) for r in rows))

    @property
    def T(self) -> int:
        return len(self.votes)

    def cumulative(self, t: int) -> tuple[Fraction, ...]:
        """V^t, the cumulative votes after step t."""
        out = [Fraction(0)] * self.n
        for v in self.votes[:t]:
            for i, x in enumerate(v):
                out[i] += x
        return tuple(out)

    def prefix(self, t: int) -> "Instance":
        return Instance(self.n, self.votes[:t])

    def extend(self, v: VoteVector) -> "Instance":
        return Instance(self.n, self.votes + (v,))

    def to_json(self) -> dict:
        return {"n": self.n, "votes": [[format_rational(x) for x in v] for v in self.votes]}

    @classmethod
    def from_json(cls, data: dict) -> "Instance":
        return cls(int(data["n"]), tuple(VoteVector(tuple(parse_rational(x) for x in row))
                                         for row in data["votes"]))

    def digest(self) -> str:
        import hashlib

        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def validate_instance(inst: Instance) -> list[Violation]:
    """Return every invariant violation of ``inst``; an empty list means valid."""
    out: list[Violation] = []
    if inst.n < 1:
        out.append(Violation(0, None, f"party count {inst.n} must be positive"))
    for t, v in enumerate(inst.votes, start=1):
        if len(v) != inst.n:
            out.append(Violation(t, None, f"length {len(v)} does not match n={inst.n}"))
        for i, x in enumerate(v):
            if not (0 <= x < 1):
                out.append(Violation(t, i, f"entry {x} outside [0, 1)"))
        total = v.total
        if total.denominator != 1:
            out.append(Violation(t, None, f"row sum {total} not integral"))
    return out


@dataclass(frozen=True)
class TrajectoryState:
    """Votes seen so far plus the 0/1 allocation chosen at every step."""

    n: int
    votes: tuple[VoteVector, ...] = ()
    steps: tuple[frozenset[int], ...] = ()
    V: tuple[Fraction, ...] = field(default=None)
    A: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        if len(self.votes) != len(self.steps):
            raise ValueError("votes and steps must have equal length")
        if self.V is None:
            V = [Fraction(0)] * self.n
            A = [0] * self.n
            for v, X in zip(self.votes, self.steps):
                for i in range(self.n):
                    V[i] += v[i]
                for i in X:
                    A[i] += 1
            object.__setattr__(self, "V", tuple(V))
            object.__setattr__(self, "A", tuple(A))

    @classmethod
    def initial(cls, n: int) -> "TrajectoryState":
        return cls(n)

    @property
    def t(self) -> int:
        return len(self.steps)

    @property
    def instance(self) -> Instance:
        return Instance(self.n, self.votes)

    def extend(self, v: VoteVector, chosen: Iterable[int]) -> "TrajectoryState":
        chosen = frozenset(chosen)
        V = tuple(a + b for a, b in zip(self.V, v))
        A = tuple(a + (1 if i in chosen else 0) for i, a in enumerate(self.A))
        return TrajectoryState(self.n, self.votes + (v,), self.steps + (chosen,), V, A)

    def allocation(self, t: int) -> tuple[int, ...]:
        """a^t as a 0/1 vector."""
        X = self.steps[t - 1]
        return tuple(1 if i in X else 0 for i in range(self.n))

    def prefixes(self):
        """Yield (t, v^t, a^t, V^t, A^t) for t = 1..T."""
        V = [Fraction(0)] * self.n
        A = [0] * self.n
        for t, (v, X) in enumerate(zip(self.votes, self.steps), start=1):
            for i in range(self.n):
                V[i] += v[i]
                if i in X:
                    A[i] += 1
            yield t, v, X, tuple(V), tuple(A)

    def consistency_violations(self) -> list[Violation]:
        out = []
        for t, (v, X) in enumerate(zip(self.votes, self.steps), start=1):
            if len(X) != v.total:
                out.append(Violation(t, None, f"{len(X)} seats allocated, house is {v.total}"))
            for i in X:
                if not (0 <= i < self.n):
                    out.append(Violation(t, i, "party index out of range"))
                elif v[i] <= 0:
                    out.append(Violation(t, i, "seat given to a party with zero votes"))
        return out


def surplus(state: TrajectoryState) -> tuple[Fraction, ...]:
    """s^t_i = A^t_i - V^t_i for the latest step of ``state``."""
    return tuple(a - x for a, x in zip(state.A, state.V))


def _scaled_prefixes(state: TrajectoryState):
    # integer arithmetic over a common denominator; much faster than Fraction
    L = _lcm_denominators(x for v in state.votes for x in v)
    V = [0] * state.n
    A = [0] * state.n
    for t, (v, X) in enumerate(zip(state.votes, state.steps), start=1):
        for i in range(state.n):
            x = v[i]
            V[i] += x.numerator * (L // x.denominator)
            if i in X:
                A[i] += L
        yield t, L, V, A


def check_global_quota(state: TrajectoryState) -> tuple[int, int] | None:
    """Return the first (t, party) with A^t_i outside {floor V^t_i, ceil V^t_i}, else None."""
    for t, L, V, A in _scaled_prefixes(state):
        for i in range(state.n):
            lo = (V[i] // L) * L
            hi = -((-V[i]) // L) * L
            if A[i] != lo and A[i] != hi:
                return t, i
    return None


def max_deviation(state: TrajectoryState) -> Fraction:
    """max over prefixes t and parties i of |A^t_i - V^t_i|."""
    best = 0
    L = 1
    for t, L, V, A in _scaled_prefixes(state):
        for i in range(state.n):
            d = abs(A[i] - V[i])
            if d > best:
                best = d
    return Fraction(best, L)


def is_alpha_proportional(state: TrajectoryState, alpha: Fraction) -> bool:
    return max_deviation(state) <= alpha


# --------------------------------------------------------------------------
# trajectory CSV: one row per (t, i)

CSV_COLUMNS = ("t", "i", "v", "V", "a", "A", "s")


def trajectory_rows(state: TrajectoryState) -> list[dict]:
    rows = []
    for t, v, X, V, A in state.prefixes():
        for i in range(state.n):
            rows.append({
                "t": t, "i": i, "v": v[i], "V": V[i],
                "a": 1 if i in X else 0, "A": A[i], "s": A[i] - V[i],
            })
    return rows


def write_trajectory_csv(state: TrajectoryState, fh=None, float_report: bool = False) -> str:
    buf = io.StringIO() if fh is None else fh
    cols = CSV_COLUMNS + (("s_float",) if float_report else ())
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in trajectory_rows(state):
        out = [row["t"], row["i"], format_rational(row["v"]), format_rational(row["V"]),
               row["a"], row["A"], format_rational(row["s"])]
        if float_report:
            out.append(f"{float(row['s']):.6f}")
        writer.writerow(out)
    return buf.getvalue() if fh is None else ""


class TrajectoryFormatError(ValueError):
    pass


def read_trajectory_csv(text: str) -> tuple[TrajectoryState, list[Violation]]:
    """Parse a trajectory CSV.

    Returns the state rebuilt from the (v, a) columns plus any disagreement
    between the stored cumulative columns (V, A, s) and the recomputed ones.
    """
    reader = csv.DictReader(io.StringIO(text))
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise TrajectoryFormatError(f"missing columns: {sorted(missing)}")
    by_step: dict[int, dict[int, dict]] = {}
    try:
        for row in reader:
            by_step.setdefault(int(row["t"]), {})[int(row["i"])] = row
    except (ValueError, TypeError) as exc:
        raise TrajectoryFormatError(str(exc)) from exc
    if not by_step:
        return TrajectoryState.initial(0), []
    steps = sorted(by_step)
    if steps != list(range(1, len(steps) + 1)):
        raise TrajectoryFormatError("steps must be numbered 1..T without gaps")
    n = len(by_step[1])
    state = TrajectoryState.initial(n)
    problems: list[Violation] = []
    try:
        for t in steps:
            rows = by_step[t]
            if sorted(rows) != list(range(n)):
                raise TrajectoryFormatError(f"step {t} does not list parties 0..{n - 1}")
            v = VoteVector(tuple(parse_rational(rows[i]["v"]) for i in range(n)))
            chosen = set()
            for i in range(n):
                a = int(rows[i]["a"])
                if a not in (0, 1):
                    problems.append(Violation(t, i, f"allocation {a} is not 0/1"))
                if a:
                    chosen.add(i)
            state = state.extend(v, chosen)
            for i in range(n):
                V = parse_rational(rows[i]["V"])
                A = int(rows[i]["A"])
                s = parse_rational(rows[i]["s"])
                if V != state.V[i] or A != state.A[i] or s != state.A[i] - state.V[i]:
                    problems.append(Violation(t, i, "cumulative columns inconsistent with v/a"))
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, TrajectoryFormatError):
            raise
        raise TrajectoryFormatError(str(exc)) from exc
    return state, problems
