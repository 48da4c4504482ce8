"""Two-state Kleinberg burst detection over a per-bucket count stream.

Counts are modelled as Poisson arrivals.  The base state emits at the
series mean rate ``lam0``; the burst state emits at ``s * lam0``.  Entering
the burst state costs ``gamma * ln(n)``; leaving it is free.  The optimal
state sequence minimises emission cost plus transition cost, starting in
the base state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

# Costs this close are treated as equal, and the tie goes to the base state.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class Burst:
    start: int
    end: int  # inclusive
    weight: float

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class BurstSet:
    bursts: tuple[Burst, ...]
    series_len: int

    def __len__(self) -> int:
        return len(self.bursts)


def emission_costs(counts, s: float = 2.0) -> np.ndarray | None:
    """Per-bucket costs, shape (n, 2); ``None`` for an all-zero stream.

    Cost is the negative Poisson log-likelihood without the ``ln(x!)`` term,
    which is identical in both states.
    """
    x = np.asarray(counts, dtype=np.float64)
    lam0 = x.mean()
    if lam0 <= 0:
        return None
    lam1 = s * lam0
    c0 = lam0 - x * math.log(lam0)
    c1 = lam1 - x * math.log(lam1)
    return np.column_stack([c0, c1])


def optimal_states(counts, s: float = 2.0, gamma: float = 1.0) -> list[int]:
    """Lexicographically smallest minimum-cost state sequence.

    Costs-to-go are computed backwards, then states are chosen forwards,
    preferring the base state whenever it stays optimal.
    """
    n = len(counts)
    cost = emission_costs(counts, s)
    if cost is None:
        return [0] * n
    up = gamma * math.log(n) if n > 1 else 0.0
    trans = ((0.0, up), (0.0, 0.0))  # trans[prev][next]
    cost = cost.tolist()
    # togo[t][q] = cheapest cost of buckets t..n-1 given state q at bucket t
    togo = [[0.0, 0.0] for _ in range(n)]
    for t in range(n - 1, -1, -1):
        for q in (0, 1):
            nxt = 0.0 if t == n - 1 else min(trans[q][r] + togo[t + 1][r] for r in (0, 1))
            togo[t][q] = cost[t][q] + nxt
    states = []
    prev = 0
    for t in range(n):
        opt0 = trans[prev][0] + togo[t][0]
        opt1 = trans[prev][1] + togo[t][1]
        prev = 0 if opt0 <= opt1 + TIE_TOL else 1
        states.append(prev)
    return states


def sequence_cost(states, cost: np.ndarray, up: float) -> float:
    total, prev = 0.0, 0
    for t, q in enumerate(states):
        if q > prev:
            total += up
        total += cost[t][q]
        prev = q
    return total


def brute_force_states(counts, s: float = 2.0, gamma: float = 1.0) -> list[int]:
    """Exhaustive 2**n search with the same tie rule as ``optimal_states``."""
    n = len(counts)
    cost = emission_costs(counts, s)
    if cost is None:
        return [0] * n
    up = gamma * math.log(n) if n > 1 else 0.0
    seqs = list(itertools.product((0, 1), repeat=n))  # lexicographic order
    totals = [sequence_cost(q, cost, up) for q in seqs]
    best = min(totals)
    for q, total in zip(seqs, totals):
        if total <= best + TIE_TOL:
            return list(q)
    raise AssertionError("unreachable")


def detect_bursts(counts, s: float = 2.0, gamma: float = 1.0) -> BurstSet:
    counts = tuple(counts)
    n = len(counts)
    if n < 1:
        raise ValueError("burst detection needs at least one bucket")
    cost = emission_costs(counts, s)
    if cost is None:
        return BurstSet((), n)
    states = optimal_states(counts, s, gamma)
    saving = cost[:, 0] - cost[:, 1]
    bursts = []
    t = 0
    while t < n:
        if states[t] == 1:
            start = t
            while t + 1 < n and states[t + 1] == 1:
                t += 1
            weight = float(saving[start:t + 1].sum())
            bursts.append(Burst(start, t, max(weight, 0.0)))
        t += 1
    return BurstSet(tuple(bursts), n)


def burst_summary(bs: BurstSet, hit_index: int) -> tuple[float, float, float, float, float]:
    """(burstLength, burstWeight, noOfBursts, burstDistM, burstDistL).

    Distances are signed bucket offsets from the end of a burst to the hit
    index, 0 when the hit falls inside it, and ``series_len`` with no bursts.
    """
    if not bs.bursts:
        return 0.0, 0.0, 0.0, float(bs.series_len), float(bs.series_len)

    def dist(b: Burst) -> float:
        if b.start <= hit_index <= b.end:
            return 0.0
        return float(hit_index - b.end)

    # first maximum wins on ties
    strongest = max(bs.bursts, key=lambda b: b.weight)
    longest = max(bs.bursts, key=lambda b: b.length)
    return (
        float(longest.length),
        float(strongest.weight),
        float(len(bs.bursts)),
        dist(strongest),
        dist(longest),
    )
