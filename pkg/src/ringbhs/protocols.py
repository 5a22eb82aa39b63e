"""Protocol state machines for locating the black hole.

Two protocols share one program table:

* the scattered three-agent protocol: a first phase of cautious clockwise
  walks with role merging (budget 9n rounds), then a second phase built
  around a leader/runner pendulum with 4n^2 timeouts;
* the colocated three-agent pendulum: leader and vanguard advance clockwise
  by witness probing while the runner sweeps counter-clockwise one new node
  per swing and reports back.

Every state is one guarded procedure call; guards are listed in the order
they are checked. Termination reports come in two shapes: "the black hole is
the next node clockwise", and "the black hole lies pendulum_meets+1 nodes
counter-clockwise of the reference node" (the reference-node convention is a
run option, see `REFERENCE_READINGS`).
"""

from __future__ import annotations

from .kernel import (
    EVENT, STANDING, TIMEOUT,
    ActionState, CautiousState, CustomState, ExploreState, Guard,
    SimulationError, TerminalState,
    is_marked, meeting_ids, owner_returned, set_role,
)
from .ring import LEFT, RIGHT

START = "Start"
EXPLORER = "Explorer"
FOLLOWER = "Follower"
MLEADER = "MLeader"
RETROGUARD = "Retroguard"
LEADER = "Leader"
AVANGUARD = "Avanguard"

REFERENCE_READINGS = ("assignment", "last_meeting")

# states in which an agent is still running the first phase
PHASE1_STATES = frozenset({
    "Init", "Wait", "Two", "Copy", "Explorer", "ExplorerProbe",
    "ExplorerHold", "Back", "MoveForward", "WaitFollower", "Follow",
    "EndPhase1",
})


# -- predicates ---------------------------------------------------------------

def _t9n(world, ag, snap):
    return ag.c.ttime == 9 * world.cfg.n


def _a3(world, ag, snap):
    return snap.count >= 3


def _marked(world, ag, snap):
    return is_marked(ag, snap)


def _next_unsafe(world, ag, snap):
    # the clockwise edge was up for a full round of this wait and the agent
    # that marked the node never came back for its pebble
    return ag.c.etime > ag.c.emtime_c and is_marked(ag, snap)


def _next_safe(world, ag, snap):
    return owner_returned(ag, snap)


def _not_marked(world, ag, snap):
    return not is_marked(ag, snap)


def _enodes(world, ag, snap):
    return ag.c.enodes > 0


def _meet_start(world, ag, snap):
    return meeting_ids(snap, role=START) or None


def _meet_fol_exp(world, ag, snap):
    return meeting_ids(snap, role=(FOLLOWER, EXPLORER)) or None


def _meet_back(world, ag, snap):
    return meeting_ids(snap, state="Back") or None


def _meet_mleader(world, ag, snap):
    return meeting_ids(snap, role=MLEADER) or None


def _p2_timeout(world, ag, snap):
    return (ag.c.ttime - ag.p2_base) > 4 * world.cfg.n ** 2


def _marked_new(world, ag, snap):
    return ag.c.enodes > 0 and is_marked(ag, snap)


def _failed_report(world, ag, snap):
    # runner had time to explore one more node and come back, counted only
    # over rounds in which this agent's clockwise edge was missing
    return ag.rg_missing_cw > 2 * ((ag.pendulum_meets + 1) + ag.c.tnodes)


def _lead_ready(world, ag, snap):
    if not snap.cw_present:
        return False
    return any(oid == ag.av_id for oid, _, _ in snap.others)


def _meet_av(world, ag, snap):
    # the vanguard leaves the round this wait begins and is physically two
    # rounds away from returning; its arrival flag on the entry round is the
    # stale echo of the move that brought it here
    if ag.av_id is None or ag.c.etime < 2:
        return None
    return meeting_ids(snap, ids=(ag.av_id,)) or None


def _witness_unsafe(world, ag, snap):
    # two present-edge rounds since the vanguard left (the first is its
    # outbound move) with no return: it cannot be alive on the next node
    if any(oid == ag.av_id for oid, _, _ in snap.others):
        return False
    return (ag.c.etime - ag.c.emtime_c) >= 2


def _av_probe(world, ag, snap):
    return snap.cw_present and any(
        oid == ag.leader_id for oid, _, _ in snap.others)


# -- entry effects ------------------------------------------------------------

def _take_if_yours(world, ag, ev):
    world.reclaim_if_here(ag, ev)


def _unmark(world, ag, ev):
    world.take_pebble(ag, ev)


# -- action states ------------------------------------------------------------

def act_two(world, ag, snap, ev):
    world.reclaim_if_here(ag, ev)
    met = ag.payload or meeting_ids(snap, role=START)
    if not met:
        others = sorted(o[0] for o in snap.others)
        if not others:
            raise SimulationError(
                f"agent {ag.id} entered Two with nobody to pair with")
        met = others[:1]
    partner = min(met)
    if ag.id < partner:
        set_role(world, ag, EXPLORER, ev)
        return "Explorer", None
    set_role(world, ag, FOLLOWER, ev)
    return "WaitFollower", None


def act_copy(world, ag, snap, ev):
    world.reclaim_if_here(ag, ev)
    set_role(world, ag, FOLLOWER, ev)
    return "WaitFollower", None


def act_end_phase1(world, ag, snap, ev):
    set_role(world, ag, START, ev)
    ag.p2_base = ag.c.ttime
    return "InitP2", None


def act_explorer(world, ag, snap, ev):
    if is_marked(ag, snap):
        # someone else's unattended mark: wait until it resolves
        return "ExplorerHold", None
    if ag.holds_pebble:
        world.place_pebble(ag, ev)
    elif ag.pebble_node != ag.pos:
        raise SimulationError(
            f"agent {ag.id} in Explorer without its pebble at hand")
    return "ExplorerProbe", None


def act_init_p2(world, ag, snap, ev):
    if snap.count > 1:
        return "AssignRoles", None
    if not ag.holds_pebble and ag.pebble_node != ag.pos:
        # interrupted mid-walk: the pebble sits one node counter-clockwise
        return "RecoverPebble", None
    if (not ag.holds_pebble and ag.pebble_node == ag.pos) \
            or is_marked(ag, snap):
        return "MarkedWait", None
    return "Forward", None


def _start_pendulum(ag, rg, leader, av=None):
    ag.ml_rg_id = rg
    ag.leader_id = leader
    ag.av_id = av
    ag.home = ag.pos
    ag.home_off = 0
    ag.reference_node = ag.pos
    ag.pendulum_meets = 0
    ag.rg_missing_cw = 0


def act_assign_roles(world, ag, snap, ev):
    # Role assignment is a joint decision of everyone standing here; the
    # exchange is instantaneous, so every participant computes the same
    # id-sorted map even if snapshot roles lag one round behind.
    world.reclaim_if_here(ag, ev)
    here = sorted([ag.id] + [oid for oid, _, _ in snap.others])
    if not snap.others:
        return "Forward", None
    if len(here) >= 3:
        rg, ld, av = here[:3]
        _start_pendulum(ag, rg, ld, av)
        if ag.id == rg:
            set_role(world, ag, RETROGUARD, ev)
            return "PendulumOut", None
        if ag.id == ld:
            set_role(world, ag, LEADER, ev)
            return "LeadWait", None
        set_role(world, ag, AVANGUARD, ev)
        return "AvCycle", None
    pair = here
    _start_pendulum(ag, pair[0], pair[1])
    if ag.id == pair[0]:
        set_role(world, ag, RETROGUARD, ev)
        return "PendulumOut", None
    set_role(world, ag, MLEADER, ev)
    return "Go", None


def act_be_avanguard(world, ag, snap, ev):
    world.reclaim_if_here(ag, ev)
    set_role(world, ag, AVANGUARD, ev)
    leaders = sorted(oid for oid, orole, _ in snap.others
                     if orole in (MLEADER, LEADER))
    if leaders:
        ag.leader_id = leaders[0]
    return "AvCycle", None


def act_start_cp(world, ag, snap, ev):
    # promotion keeps the pendulum bookkeeping (meets count, home, runner id)
    set_role(world, ag, LEADER, ev)
    met = ag.payload or meeting_ids(snap, role=START)
    if met:
        ag.av_id = min(met)
    return "LeadWait", None


# -- pendulum runner ----------------------------------------------------------

def step_pendulum_out(world, ag, snap, ev):
    target = -(ag.pendulum_meets + 1)
    if ag.home_off > target:
        return ("move", LEFT)
    return ("goto", "PendulumBack", None)


def step_pendulum_back(world, ag, snap, ev):
    if any(oid == ag.leader_id for oid, _, _ in snap.others):
        return ("goto", "PendulumOut", None)
    return ("move", RIGHT)


# -- reports ------------------------------------------------------------------

def report_next_cw(world, ag):
    return {"mode": "next_cw", "base": ag.pos,
            "claim": (ag.pos + 1) % world.cfg.n}


def report_retro(world, ag):
    reading = world.options.get("reference", "assignment")
    ref = ag.reference_node if reading == "last_meeting" else ag.home
    d = ag.pendulum_meets + 1
    return {"mode": "retro", "base": ref, "ccw_distance": d,
            "reading": reading, "claim": (ref - d) % world.cfg.n}


# -- the program --------------------------------------------------------------

PROGRAM = {
    # phase 1, role Start
    "Init": CautiousState(RIGHT, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(STANDING, _marked, "Wait"),
        Guard(EVENT, _meet_start, "Two"),
        Guard(EVENT, _meet_fol_exp, "Copy"),
    ]),
    "Wait": ExploreState(None, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(STANDING, _next_unsafe, "Terminate"),
        Guard(STANDING, _next_safe, "Init"),
    ]),
    "Two": ActionState(act_two),
    "Copy": ActionState(act_copy),
    "EndPhase1": ActionState(act_end_phase1),
    "Terminate": TerminalState(report_next_cw),

    # phase 1, role Explorer
    "Explorer": ActionState(act_explorer),
    "ExplorerProbe": ExploreState(RIGHT, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(STANDING, _enodes, "Back"),
    ]),
    "ExplorerHold": ExploreState(None, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(STANDING, _next_unsafe, "Terminate"),
        Guard(STANDING, _not_marked, "Explorer"),
    ]),
    "Back": ExploreState(LEFT, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(STANDING, _enodes, "MoveForward"),
    ]),
    "MoveForward": ExploreState(RIGHT, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(STANDING, _enodes, "Explorer"),
    ], on_enter=_unmark),

    # phase 1, role Follower
    "WaitFollower": ExploreState(None, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(EVENT, _meet_back, "Follow"),
    ]),
    "Follow": ExploreState(RIGHT, [
        Guard(TIMEOUT, _t9n, "EndPhase1"),
        Guard(EVENT, _a3, "EndPhase1"),
        Guard(STANDING, _enodes, "WaitFollower"),
    ]),

    # phase 2 entry
    "InitP2": ActionState(act_init_p2),
    "RecoverPebble": ExploreState(LEFT, [
        Guard(EVENT, _meet_start, "AssignRoles"),
        Guard(EVENT, _meet_mleader, "BeAvanguard"),
        Guard(STANDING, _enodes, "Forward"),
        Guard(TIMEOUT, _p2_timeout, "Forward"),
    ]),
    "MarkedWait": ExploreState(None, [
        Guard(EVENT, _meet_start, "AssignRoles"),
        Guard(TIMEOUT, _p2_timeout, "Forward"),
    ], on_enter=_take_if_yours),
    "Forward": ExploreState(RIGHT, [
        Guard(STANDING, _marked_new, "Terminate"),
        Guard(EVENT, _meet_start, "AssignRoles"),
        Guard(EVENT, _meet_mleader, "BeAvanguard"),
    ], on_enter=_take_if_yours),
    "AssignRoles": ActionState(act_assign_roles),
    "BeAvanguard": ActionState(act_be_avanguard),

    # phase 2, the marching leader
    "Go": ExploreState(RIGHT, [
        Guard(STANDING, _marked, "Cautious"),
        Guard(EVENT, _meet_start, "StartCP"),
        Guard(STANDING, _failed_report, "TerminateR"),
    ]),
    "Cautious": ExploreState(None, [
        Guard(EVENT, _meet_start, "StartCP"),
        Guard(STANDING, _next_unsafe, "Terminate"),
        Guard(STANDING, _failed_report, "TerminateR"),
    ]),
    "StartCP": ActionState(act_start_cp),
    "TerminateR": TerminalState(report_retro),

    # the colocated pendulum
    "LeadWait": ExploreState(None, [
        Guard(STANDING, _failed_report, "TerminateR"),
        Guard(STANDING, _lead_ready, "LeadAwait"),
    ]),
    "LeadAwait": ExploreState(None, [
        Guard(EVENT, _meet_av, "LeadAdvance"),
        Guard(STANDING, _witness_unsafe, "Terminate"),
        Guard(STANDING, _failed_report, "TerminateR"),
    ]),
    "LeadAdvance": ExploreState(RIGHT, [
        Guard(STANDING, _enodes, "LeadWait"),
        Guard(STANDING, _failed_report, "TerminateR"),
    ]),
    "AvCycle": CautiousState(RIGHT, (), use_pebble=False,
                             probe_cond=_av_probe),
    "PendulumOut": CustomState(step_pendulum_out),
    "PendulumBack": CustomState(step_pendulum_back),
}


def gather_and_locate_start():
    """(role, state) per agent for the scattered protocol."""
    return [(START, "Init")] * 3


def setup_cautious_pendulum(world):
    """Wire the three colocated agents into pendulum roles by ascending id."""
    trio = sorted(a.id for a in world.agents)
    rg, ld, av = trio
    for a in world.agents:
        _start_pendulum(a, rg, ld, av)
        if a.id == rg:
            a.role, a.state = RETROGUARD, "PendulumOut"
        elif a.id == ld:
            a.role, a.state = LEADER, "LeadWait"
        else:
            a.role, a.state = AVANGUARD, "AvCycle"
