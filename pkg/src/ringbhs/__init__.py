"""Round-synchronous simulator and verifier for black hole search by three
scattered pebble-carrying agents on 1-interval connected dynamic rings."""

from .ring import LEFT, RIGHT, RingConfig, RoundEdgeSet
from .kernel import Agent, Snapshot, Trace, World, advance_round, make_world
from .config import RunConfig, load_config, parse_config_text
from .runner import build_world, replay, run, simulate
from .verify import Verdict, check_bounds, check_phase1, check_solved
from .adversaries import (
    BudgetExceeded, FrontierBlocker, PendulumStaller, RandomAdversary,
    ReplayAdversary, StaticAdversary, basic_safety_check,
    enumerate_schedules, explore_all_schedules, make_adversary,
)

__version__ = "0.1.0"
