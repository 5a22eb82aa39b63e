"""Edge-removal policies, from benign to worst-case, plus bounded exhaustive
schedule exploration.

Every policy maps the full pre-round world state to at most one missing edge.
Policies are deterministic given (state, seed), so any run can be replayed
from its exported schedule.
"""

from __future__ import annotations

import random

from .kernel import TERMINATE, advance_round
from .ring import ALL_PRESENT, RoundEdgeSet


class BudgetExceeded(Exception):
    def __init__(self, count):
        super().__init__(f"exploration budget exceeded: {count} expansions")
        self.count = count


class Adversary:
    name = "adversary"
    permanent_edge_of = staticmethod(lambda world: None)

    def choose(self, world) -> RoundEdgeSet:
        raise NotImplementedError

    def permanent(self, world):
        """The edge this policy will remove on every future round, if that is
        statically known; None otherwise. Drives blocked-forever verdicts."""
        return None


class StaticAdversary(Adversary):
    """Never removes anything: the static-ring degenerate schedule."""

    name = "static"

    def choose(self, world):
        return ALL_PRESENT


class ReplayAdversary(Adversary):
    """Oblivious: plays back an explicit schedule, all-present past its end."""

    name = "replay"

    def __init__(self, schedule):
        self.schedule = list(schedule)

    def choose(self, world):
        if world.round < len(self.schedule):
            return RoundEdgeSet(self.schedule[world.round])
        return ALL_PRESENT


class FixedChoice(Adversary):
    """One predetermined choice for exactly one round (exploration helper)."""

    name = "fixed"

    def __init__(self, missing):
        self.missing = missing

    def choose(self, world):
        return RoundEdgeSet(self.missing)


class FrontierBlocker(Adversary):
    """Removes the clockwise boundary edge of the region the alive agents
    have explored, so progress toward the black hole's counter-clockwise
    side is cut off; with `release_period` set, the edge is restored for one
    round every that-many rounds so liveness bounds stay testable."""

    name = "frontier_blocker"

    def __init__(self, release_period=None):
        self.release_period = release_period

    def choose(self, world):
        if self.release_period and world.round % self.release_period == self.release_period - 1:
            return ALL_PRESENT
        e = self._boundary(world)
        return RoundEdgeSet(e) if e is not None else ALL_PRESENT

    @staticmethod
    def _boundary(world):
        n = world.cfg.n
        bh = world.cfg.bh
        best = None
        best_d = n + 1
        for ag in world.agents:
            if not ag.alive or ag.terminated:
                continue
            c = ag.c
            for off in range(-c.ccw_ext, c.cw_ext + 1):
                v = (ag.start + off) % n
                d = (bh - v) % n
                if 0 < d < best_d:
                    best_d = d
                    best = v
        return best  # edge index == its ccw endpoint

    def permanent(self, world):
        if self.release_period:
            return None
        return self._boundary(world)


class PendulumStaller(Adversary):
    """Holds the leader's clockwise edge down and releases it for exactly one
    round each time the runner completes a swing, which is the schedule that
    drives the pendulum to its quadratic cost."""

    name = "pendulum_staller"

    def choose(self, world):
        leader = None
        for ag in world.agents:
            if ag.active and ag.role in ("Leader", "MLeader"):
                if leader is None or ag.id < leader.id:
                    leader = ag
        if leader is None:
            return ALL_PRESENT
        for ag in world.agents:
            if (ag.active and ag.role == "Retroguard"
                    and ag.pos == leader.pos and ag.prev_pos != ag.pos):
                return ALL_PRESENT  # swing just completed: one-round release
        return RoundEdgeSet(world.cfg.crossing_edge(leader.pos, "right"))


class RandomAdversary(Adversary):
    """Each round, with probability p_block, removes one random edge; the
    biased mode aims at edges incident to current agent positions."""

    name = "random"

    def __init__(self, seed, p_block, biased=False):
        if not 0.0 <= p_block <= 1.0:
            raise ValueError(f"p_block must be in [0, 1], got {p_block}")
        self.seed = seed
        self.p_block = p_block
        self.biased = biased
        self.rng = random.Random(seed)

    def choose(self, world):
        if self.p_block == 0.0 or self.rng.random() >= self.p_block:
            return ALL_PRESENT
        n = world.cfg.n
        if self.biased:
            cand = sorted({world.cfg.crossing_edge(a.pos, d)
                           for a in world.agents if a.active
                           for d in ("right", "left")})
            if cand:
                return RoundEdgeSet(cand[self.rng.randrange(len(cand))])
        return RoundEdgeSet(self.rng.randrange(n))


def make_adversary(name, seed=0, p_block=0.5, release_period=None,
                   biased=False, schedule=None):
    if name == "static":
        return StaticAdversary()
    if name == "frontier_blocker":
        return FrontierBlocker(release_period=release_period)
    if name == "pendulum_staller":
        return PendulumStaller()
    if name == "random":
        return RandomAdversary(seed, p_block, biased=biased)
    if name == "replay":
        return ReplayAdversary(schedule or [])
    raise ValueError(f"unknown adversary {name!r}")


# -- bounded exhaustive exploration -------------------------------------------

def schedule_count(n, depth):
    return (n + 1) ** depth


def enumerate_schedules(n, depth, budget=10_000_000):
    """Every length-`depth` schedule of per-round missing edges (None or an
    edge index). Refuses up front when the count exceeds the budget."""
    count = schedule_count(n, depth)
    if count > budget:
        raise BudgetExceeded(count)
    choices = [None] + list(range(n))

    def rec(prefix, d):
        if d == depth:
            yield tuple(prefix)
            return
        for c in choices:
            prefix.append(c)
            yield from rec(prefix, d + 1)
            prefix.pop()

    yield from rec([], 0)


def explore_all_schedules(world0, depth, check, budget=5_000_000, prune=True):
    """Breadth-first walk of every adversary schedule to `depth` rounds.

    `check(world, round_events)` returns a list of violation dicts for the
    state just reached; violations are collected (with the schedule prefix
    that produced them), not raised. With `prune`, worlds that coincide as
    full states (round index aside) are expanded once; since safety
    violations are prefix-closed properties of states, pruning loses nothing.
    Returns (violations, stats).
    """
    frontier = [world0]
    seen = {world0.state_key()} if prune else None
    violations = []
    expansions = 0
    layer_sizes = [1]
    choices = [None] + list(range(world0.cfg.n))
    for _ in range(depth):
        nxt = []
        for w in frontier:
            for choice in choices:
                expansions += 1
                if expansions > budget:
                    raise BudgetExceeded(expansions)
                w2 = w.clone()
                ev = advance_round(w2, FixedChoice(choice))
                for v in check(w2, ev):
                    v = dict(v)
                    v["schedule"] = list(w2.schedule)
                    violations.append(v)
                if prune:
                    k = w2.state_key()
                    if k in seen:
                        continue
                    seen.add(k)
                nxt.append(w2)
        frontier = nxt
        layer_sizes.append(len(frontier))
    return violations, {"expansions": expansions, "layer_sizes": layer_sizes,
                        "distinct_states": len(seen) if prune else None}


def basic_safety_check(world, round_events):
    """Safety properties checked at every explored state: sound reports,
    pebble conservation, and the black hole staying silent."""
    out = []
    bh = world.cfg.bh
    for r, a, k, p in round_events:
        if k == TERMINATE and p["claim"] != bh:
            out.append({"invariant": "soundness", "round": r, "agent": a,
                        "detail": f"report {p['claim']} != bh {bh}"})
    if world.pebble_census() != len(world.agents):
        out.append({"invariant": "pebble_conservation", "round": world.round - 1,
                    "agent": None, "detail": f"census {world.pebble_census()}"})
    for ag in world.agents:
        if ag.alive and ag.terminated and ag.pos == bh:
            out.append({"invariant": "alive_on_bh", "round": world.round - 1,
                        "agent": ag.id, "detail": "terminated agent on the black hole"})
    return out
