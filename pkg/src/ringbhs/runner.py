"""Drive whole simulations from a RunConfig: build the world, loop rounds,
and package the result as a Trace.

A run stops when every agent is terminated or dead, at the horizon, or once
a correct terminator exists and nothing but blocked retries has happened for
5*n^2 rounds (every protocol timeout fires within 4*n^2, so a lull that long
is final)."""

from __future__ import annotations

from .adversaries import make_adversary
from .kernel import (
    BLOCKED, MEET, TERMINATE, Trace, advance_round, make_world,
)
from .protocols import PROGRAM, gather_and_locate_start, setup_cautious_pendulum

_QUIET_KINDS = {BLOCKED, MEET, "Edges"}


def build_world(config):
    config.validate()
    starts = config.resolved_starts()
    options = {"reference": config.reference}
    if config.protocol == "gather_and_locate":
        world = make_world_from(config, starts, gather_and_locate_start(), options)
    else:
        world = make_world_from(config, starts, gather_and_locate_start(), options)
        setup_cautious_pendulum(world)
    adversary = make_adversary(
        config.adversary, seed=config.seed, p_block=config.p_block,
        release_period=config.release_period, biased=config.biased,
        schedule=config.schedule)
    return world, adversary


def make_world_from(config, starts, roles_states, options):
    from .ring import RingConfig
    cfg = RingConfig(config.n, config.bh)
    return make_world(cfg, starts, PROGRAM, roles_states, options)


def simulate(config):
    """Run to completion; returns (Trace, final world)."""
    world, adversary = build_world(config)
    horizon = config.resolved_horizon()
    bh = world.cfg.bh
    quiet_limit = 5 * config.n * config.n
    quiet = 0
    have_correct_term = False
    while world.round < horizon:
        ev = advance_round(world, adversary)
        busy = False
        for _, _, k, p in ev:
            if k not in _QUIET_KINDS:
                busy = True
            if k == TERMINATE and p["claim"] == bh:
                have_correct_term = True
        quiet = 0 if busy else quiet + 1
        if all(not a.active for a in world.agents):
            break
        if have_correct_term and quiet >= quiet_limit:
            break
    trace = Trace(config.to_dict(), list(world.schedule), list(world.events))
    return trace, world


def run(config):
    """Simulate and verify in one go; returns (Trace, Verdict)."""
    from .verify import check_solved
    trace, world = simulate(config)
    verdict = check_solved(trace, permanent_edge=_permanent_edge(config, world))
    return trace, verdict


def _permanent_edge(config, world):
    if config.adversary == "frontier_blocker" and not config.release_period:
        from .adversaries import FrontierBlocker
        return FrontierBlocker._boundary(world)
    return None


def replay(trace_or_config):
    """Re-run a trace's config against its exported schedule; the result must
    be byte-identical to the original (round-trip determinism)."""
    from .config import RunConfig
    if isinstance(trace_or_config, Trace):
        d = dict(trace_or_config.config)
        d["adversary"] = "replay"
        d["schedule"] = list(trace_or_config.schedule)
        cfg = RunConfig.from_dict(d)
    else:
        cfg = trace_or_config
    return simulate(cfg)[0]
