"""Deadlock-freeness reducibility over abstracted endpoint collections.

A pool abstracts to one endpoint set per thread.  Reducing a channel
merges the sets holding its endpoints (one endpoint per set required) and
deletes the cohort; the pool stays deadlock-free as long as every
reduction order drives the collection to all-empty sets.  The counting
condition ``relaxed`` is necessary for that, and a relaxed nonempty
collection always admits a step.

Two interchangeable deciders: the literal recursive search (memoized on a
canonical relabeling) and a linear-time check that the set/channel
incidence graph is a forest with each cohort spread over distinct sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

Endpoint = tuple[int, tuple[int, ...]]  # (channel, roles)
EndpointSet = frozenset  # of Endpoint


class UnknownChannel(Exception):
    pass


class InconsistentPool(Exception):
    pass


@dataclass(frozen=True)
class Collection:
    sets: tuple[EndpointSet, ...]
    channel_universes: dict[int, tuple[int, ...]] = field(
        default_factory=dict, compare=False, hash=False)

    def nonempty(self) -> tuple[EndpointSet, ...]:
        return tuple(s for s in self.sets if s)

    def endpoints(self) -> list[Endpoint]:
        return [ep for s in self.sets for ep in s]

    def channels(self) -> set[int]:
        return {c for (c, _) in self.endpoints()}

    def drop_empty(self) -> "Collection":
        kept = self.nonempty()
        return Collection(kept if kept else (frozenset(),), self.channel_universes)


def abstract_pool(pool) -> Collection:
    """One endpoint set per thread; requires consistent resources."""
    from .runtime import consistent, pool_rho, rho

    if not consistent(pool_rho(pool.threads), pool.universes()):
        raise InconsistentPool("pool resources are not consistent")
    sets = []
    for tid in sorted(pool.threads):
        sets.append(frozenset(rho(pool.threads[tid]).keys()))
    return Collection(tuple(sets), pool.universes())


# ---------------------------------------------------------------------------
# One reduction
# ---------------------------------------------------------------------------


def df_step(col: Collection, channel: int) -> Optional[Collection]:
    """Merge the sets holding the channel's endpoints and delete the cohort.

    Returns None when the step does not apply because two of the
    channel's endpoints share one set.
    """
    holders: list[int] = []
    cohort: set[Endpoint] = set()
    for idx, s in enumerate(col.sets):
        mine = {ep for ep in s if ep[0] == channel}
        if len(mine) > 1:
            return None
        if mine:
            holders.append(idx)
            cohort |= mine
    if not cohort:
        raise UnknownChannel(f"channel #{channel} not present")
    merged = frozenset().union(*(col.sets[i] for i in holders)) - cohort
    rest = tuple(s for i, s in enumerate(col.sets) if i not in holders)
    return Collection(rest + (merged,), col.channel_universes)


def df_steppable(col: Collection) -> list[int]:
    return [c for c in sorted(col.channels()) if df_step(col, c) is not None]


# ---------------------------------------------------------------------------
# Reducibility
# ---------------------------------------------------------------------------


def _canon(sets: tuple[EndpointSet, ...]):
    """Relabel channels by first occurrence over a sorted presentation."""
    pre = sorted(tuple(sorted(s)) for s in sets if s)
    relabel: dict[int, int] = {}
    for s in pre:
        for (c, _) in s:
            if c not in relabel:
                relabel[c] = len(relabel)
    return tuple(tuple(sorted((relabel[c], roles) for (c, roles) in s))
                 for s in pre)


def df_reducible(col: Collection) -> bool:
    """Literal recursive definition with memoization."""
    memo: dict = {}

    def go(sets: tuple[EndpointSet, ...]) -> bool:
        live = tuple(s for s in sets if s)
        if not live:
            return True
        key = _canon(live)
        if key in memo:
            return memo[key]
        chans = {c for s in live for (c, _) in s}
        successors = []
        for c in sorted(chans):
            nxt = df_step(Collection(live), c)
            if nxt is not None:
                successors.append(nxt.sets)
        if not successors:
            memo[key] = False
            return False
        result = all(go(n) for n in successors)
        memo[key] = result
        return result

    return go(col.sets)


def df_reducible_fast(col: Collection) -> bool:
    """Equivalent decision via acyclicity of the set/channel incidence graph.

    Each reduction contracts one channel's incidences; every order reaches
    all-empty exactly when no cohort doubles up in a set and the bipartite
    incidence graph has no cycle.
    """
    live = [s for s in col.sets if s]
    if not live:
        return True
    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y) -> bool:
        rx, ry = find(x), find(y)
        if rx == ry:
            return False
        parent[rx] = ry
        return True

    incidences: list[tuple[int, int]] = []  # (set index, channel)
    for idx, s in enumerate(live):
        seen_here: set[int] = set()
        parent[("s", idx)] = ("s", idx)
        for (c, _) in s:
            if c in seen_here:
                return False  # two endpoints of one channel share a set
            seen_here.add(c)
            incidences.append((idx, c))
            parent.setdefault(("c", c), ("c", c))
    for idx, c in incidences:
        if not union(("s", idx), ("c", c)):
            return False  # cycle
    return True


def relaxed(col: Collection) -> bool:
    """Counting condition: #nonempty sets >= #endpoints - #channels + 1."""
    ne = col.nonempty()
    if not ne:
        return True
    eps = sum(len(s) for s in ne)
    chans = len({c for s in ne for (c, _) in s})
    return len(ne) >= eps - chans + 1


def relaxed_slack(col: Collection) -> int:
    ne = col.nonempty()
    if not ne:
        return 0
    eps = sum(len(s) for s in ne)
    chans = len({c for s in ne for (c, _) in s})
    return len(ne) - (eps - chans + 1)


# ---------------------------------------------------------------------------
# Blocked-cohort matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchReport:
    channel: int
    threads: tuple[int, ...]
    kind: str


def find_blocked_match(pool) -> Optional[MatchReport]:
    """The channel whose whole cohort is blocked on matching operations."""
    from .runtime import _cohort_for, classify

    states = classify(pool)
    for channel in sorted(pool.sig):
        got = _cohort_for(pool, states, channel)
        if got is not None:
            kind, members = got
            return MatchReport(channel, tuple(sorted(members)), kind)
    return None


def analyze(col: Collection, step: int = 0) -> dict:
    return {
        "step": step,
        "relaxed": relaxed(col),
        "slack": relaxed_slack(col),
        "df_reducible": df_reducible_fast(col),
        "sets": [sorted(f"#{c}^{list(r)}" for (c, r) in s)
                 for s in col.sets],
        "channels": sorted(col.channels()),
    }
