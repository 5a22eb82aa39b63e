"""Synchronous round engine for mobile agents on a dynamic ring.

One round runs fixed sub-phases:

  1. the adversary picks this round's edge set from the full current state;
  2. agents standing on the black hole are destroyed before any snapshot;
  3. every alive, non-terminated agent takes a local snapshot of its node;
  4. colocated agents exchange information instantaneously (meeting counters
     and pendulum bookkeeping update here, before any decision);
  5. each agent evaluates its current procedure's guards in listed order and
     may transition through several states within the round (a transition is
     instantaneous; the round's action comes from the state the chain lands
     in);
  6. pebble place/take requests execute in ascending agent id (agents only
     ever touch their own pebble, so the order is a formality);
  7. move attempts: a move over a present edge lands next round, a move over
     the missing edge leaves the agent in place with a Blocked record;
  8. counters tick (Ttime, per-call Etime/EMtime, node extents on arrival).

Procedures come in two flavors. A plain guarded walk evaluates its guards
every round and otherwise moves in its direction (or stays for nil). A
cautious walk drives a three-round cycle per new node: place the pebble and
advance; go back; take the pebble and advance again. While the pebble is
deployed away from the agent, guards that observe other agents are queued
and only take effect once the cycle completes with the pebble reclaimed;
pure timeout guards fire immediately even mid-cycle.
"""

from __future__ import annotations

import json

from .ring import LEFT, RIGHT, RingConfig, RoundEdgeSet

# trace event kinds
MOVE = "Move"
BLOCKED = "Blocked"
WAIT = "Wait"
PLACE = "PlacePebble"
TAKE = "TakePebble"
MEET = "Meet"
ENTER_BH = "EnterBH"
TERMINATE = "Terminate"
STATE_CHANGE = "StateChange"
ROLE_CHANGE = "RoleChange"

# guard kinds
TIMEOUT = "timeout"      # fires even while a cautious cycle is mid-flight
EVENT = "event"          # arrival-gated (meetings): observed but ineffective
                         # mid-cycle; re-fires on the completion re-arrival
PRESENCE = "presence"    # queued while mid-flight, applied at cycle end
STANDING = "standing"    # re-evaluated fresh; never queued

# cautious cycle phases
IDLE = 0          # at cycle anchor, pebble in hand
ADVANCING = 1     # pebble placed, advancing to (or stuck before) the new node
RETURNING = 2     # heading back to the pebble
RESUMING = 3      # pebble reclaimed, re-advancing to the new node

CHAIN_LIMIT = 16

K_AGENTS = 3


class SimulationError(Exception):
    """Internal engine invariant broke; always a bug, never a protocol event."""


class Guard:
    __slots__ = ("kind", "pred", "target")

    def __init__(self, kind, pred, target):
        self.kind = kind
        self.pred = pred        # pred(world, agent, snap) -> falsy | payload
        self.target = target


class ExploreState:
    """Guarded walk: evaluate guards in order, else move in `direction`."""

    kind = "explore"
    __slots__ = ("direction", "guards", "on_enter")

    def __init__(self, direction, guards, on_enter=None):
        self.direction = direction  # RIGHT | LEFT | None (stay)
        self.guards = tuple(guards)
        self.on_enter = on_enter


class CautiousState:
    """Guarded cautious walk (the pebble cycle, or the witness variant).

    `probe_cond(world, agent, snap)` gates the start of each cycle; the
    pebbled walk probes unconditionally, the witness variant only when the
    forward edge is up and its leader is present.
    """

    kind = "cautious"
    __slots__ = ("direction", "guards", "use_pebble", "probe_cond")

    def __init__(self, direction, guards, use_pebble=True, probe_cond=None):
        self.direction = direction
        self.guards = tuple(guards)
        self.use_pebble = use_pebble
        self.probe_cond = probe_cond


class ActionState:
    """Instantaneous effects; handler returns the next state name."""

    kind = "action"
    __slots__ = ("handler",)

    def __init__(self, handler):
        self.handler = handler


class CustomState:
    """One step function per round: returns ('move', dir) / ('stay',) /
    ('goto', state, payload)."""

    kind = "custom"
    __slots__ = ("step",)

    def __init__(self, step):
        self.step = step


class TerminalState:
    kind = "terminal"
    __slots__ = ("report",)

    def __init__(self, report):
        self.report = report    # report(world, agent) -> payload dict with "claim"


class Counters:
    """Per-agent counters; E* reset on every fresh procedure call."""

    __slots__ = ("ttime", "tnodes", "etime", "enodes", "emtime_c", "emtime_cc",
                 "meets", "rlastmet", "cw_ext", "ccw_ext", "off",
                 "call_off", "call_min", "call_max")

    def __init__(self):
        self.ttime = 0
        self.tnodes = 1
        self.etime = 0
        self.enodes = 0
        self.emtime_c = 0
        self.emtime_cc = 0
        self.meets = {}
        self.rlastmet = {}
        self.cw_ext = 0     # lifetime clockwise reach from the start node
        self.ccw_ext = 0
        self.off = 0        # signed displacement from the start node
        self.call_off = 0   # same, relative to the current call's entry node
        self.call_min = 0
        self.call_max = 0

    def reset_call(self):
        self.etime = 0
        self.enodes = 0
        self.emtime_c = 0
        self.emtime_cc = 0
        self.call_off = 0
        self.call_min = 0
        self.call_max = 0


class Agent:
    __slots__ = (
        "id", "role", "state", "pos", "start", "prev_pos", "alive",
        "terminated", "bh_report", "holds_pebble", "pebble_node",
        "cphase", "c_anchor", "c_target", "pending", "payload", "c",
        "p2_base", "home", "home_off", "reference_node",
        "pendulum_meets", "rg_missing_cw", "ml_rg_id", "av_id", "leader_id",
    )

    def __init__(self, aid, pos, role, state):
        self.id = aid
        self.role = role
        self.state = state
        self.pos = pos
        self.start = pos
        self.prev_pos = None      # None => counts as "arrived" at round 0
        self.alive = True
        self.terminated = False
        self.bh_report = None
        self.holds_pebble = True
        self.pebble_node = None
        self.cphase = IDLE
        self.c_anchor = pos
        self.c_target = None
        self.pending = {}         # guard index -> payload
        self.payload = None       # payload of the transition that entered the state
        self.c = Counters()
        self.p2_base = 0
        self.home = pos
        self.home_off = 0
        self.reference_node = pos
        self.pendulum_meets = 0
        self.rg_missing_cw = 0
        self.ml_rg_id = None
        self.av_id = None
        self.leader_id = None

    @property
    def active(self):
        return self.alive and not self.terminated

    def clone(self):
        a = Agent.__new__(Agent)
        for f in Agent.__slots__:
            setattr(a, f, getattr(self, f))
        a.pending = dict(self.pending)
        c = Counters.__new__(Counters)
        for f in Counters.__slots__:
            setattr(c, f, getattr(self.c, f))
        c.meets = dict(self.c.meets)
        c.rlastmet = dict(self.c.rlastmet)
        a.c = c
        return a

    def state_key(self):
        """Canonical tuple for state-hash pruning (round index excluded)."""
        c = self.c
        return (self.id, self.role, self.state, self.pos, self.alive,
                self.terminated, self.holds_pebble, self.pebble_node,
                self.cphase, self.c_anchor, self.c_target,
                tuple(sorted(self.pending.items())),
                c.ttime, c.etime, c.enodes, c.emtime_c, c.emtime_cc,
                c.off, c.cw_ext, c.ccw_ext, c.call_off, c.call_min, c.call_max,
                tuple(sorted(c.meets.items())),
                self.p2_base, self.home, self.home_off, self.reference_node,
                self.pendulum_meets, self.rg_missing_cw,
                self.ml_rg_id, self.av_id, self.leader_id)


class Snapshot:
    """What an agent perceives at its node at the top of a round."""

    __slots__ = ("node", "round", "others", "arrivals", "self_arrived",
                 "pebbles", "cw_present", "ccw_present", "count")

    def __init__(self, node, rnd, others, arrivals, self_arrived, pebbles,
                 cw_present, ccw_present):
        self.node = node
        self.round = rnd
        self.others = others            # tuple of (id, role, state)
        self.arrivals = arrivals        # ids of *other* agents that arrived
        self.self_arrived = self_arrived
        self.pebbles = pebbles          # owner ids of pebbles on this node
        self.cw_present = cw_present
        self.ccw_present = ccw_present
        self.count = len(others) + 1


def meeting_ids(snap, role=None, state=None, ids=None):
    """Ids satisfying the meeting predicate: a matching agent arrived here,
    or this agent arrived and a matching agent is here."""
    out = []
    for oid, orole, ostate in snap.others:
        if role is not None and orole != role and not (isinstance(role, tuple) and orole in role):
            continue
        if state is not None and ostate != state:
            continue
        if ids is not None and oid not in ids:
            continue
        if snap.self_arrived or oid in snap.arrivals:
            out.append(oid)
    return out


def is_marked(agent, snap):
    """A node is marked for an agent when a pebble owned by someone else lies
    here with its owner absent; an attended pebble is not a mark."""
    if not snap.pebbles:
        return False
    here = {o[0] for o in snap.others}
    for owner in snap.pebbles:
        if owner != agent.id and owner not in here:
            return True
    return False


def owner_returned(agent, snap):
    """Some other agent's pebble lies here and its owner is colocated."""
    if not snap.pebbles:
        return False
    here = {o[0] for o in snap.others}
    for owner in snap.pebbles:
        if owner != agent.id and owner in here:
            return True
    return False


class World:
    __slots__ = ("cfg", "round", "edges", "agents", "pebbles", "events",
                 "schedule", "program", "options", "destroyed_pebbles")

    def __init__(self, cfg: RingConfig, agents, program, options=None):
        self.cfg = cfg
        self.round = 0
        self.edges = RoundEdgeSet(None)
        self.agents = agents
        self.pebbles = {}           # node -> set of owner ids
        self.events = []            # (round, agent_id|None, kind, payload|None)
        self.schedule = []          # missing edge per executed round
        self.program = program
        self.options = options or {}
        self.destroyed_pebbles = 0

    # -- pebble primitives (fair mutual exclusion is ascending-id processing;
    #    agents only handle their own pebble, so ops never contend) --

    def place_pebble(self, agent, ev):
        if not agent.holds_pebble:
            if agent.pebble_node == agent.pos:
                return  # already marking this node
            raise SimulationError(
                f"agent {agent.id} placing without pebble (round {self.round})")
        agent.holds_pebble = False
        agent.pebble_node = agent.pos
        self.pebbles.setdefault(agent.pos, set()).add(agent.id)
        ev.append((self.round, agent.id, PLACE, {"node": agent.pos}))

    def take_pebble(self, agent, ev):
        owners = self.pebbles.get(agent.pos)
        if owners and agent.id in owners:
            owners.discard(agent.id)
            if not owners:
                del self.pebbles[agent.pos]
            agent.holds_pebble = True
            agent.pebble_node = None
            ev.append((self.round, agent.id, TAKE, {"node": agent.pos}))
            return True
        ev.append((self.round, agent.id, WAIT,
                   {"node": agent.pos, "why": "own pebble absent"}))
        return False

    def reclaim_if_here(self, agent, ev):
        if not agent.holds_pebble and agent.pebble_node == agent.pos:
            self.take_pebble(agent, ev)

    def clone(self):
        """Branch copy for schedule exploration; event history is not carried
        across branches (the executed schedule prefix is)."""
        w = World.__new__(World)
        w.cfg = self.cfg
        w.round = self.round
        w.edges = self.edges
        w.agents = [a.clone() for a in self.agents]
        w.pebbles = {n: set(s) for n, s in self.pebbles.items() if s}
        w.events = []
        w.schedule = list(self.schedule)
        w.program = self.program
        w.options = self.options
        w.destroyed_pebbles = self.destroyed_pebbles
        return w

    def state_key(self):
        return (tuple(a.state_key() for a in self.agents),
                tuple(sorted((n, tuple(sorted(s)))
                             for n, s in self.pebbles.items() if s)),
                self.destroyed_pebbles)

    def pebble_census(self):
        held = sum(1 for a in self.agents if a.alive and a.holds_pebble)
        held_dead = sum(1 for a in self.agents if not a.alive and a.holds_pebble)
        on_nodes = sum(len(s) for s in self.pebbles.values())
        return held + held_dead + on_nodes


def make_world(cfg, starts, program, roles_states, options=None):
    """Build a fresh world; `roles_states[i]` is the (role, state) of agent i."""
    agents = []
    for i, pos in enumerate(starts):
        if pos == cfg.bh:
            raise ValueError(f"agent {i} placed on the black hole")
        role, state = roles_states[i]
        agents.append(Agent(i, pos, role, state))
    return World(cfg, agents, program, options)


# -- state machinery --------------------------------------------------------

def enter_state(world, agent, target, payload, ev):
    ev.append((world.round, agent.id, STATE_CHANGE,
               {"frm": agent.state, "to": target}))
    agent.state = target
    agent.payload = payload
    agent.pending.clear()
    agent.c.reset_call()
    sd = world.program[target]
    if sd.kind == "cautious":
        agent.cphase = IDLE
        agent.c_anchor = agent.pos
        agent.c_target = None
    elif sd.kind == "explore" and sd.on_enter is not None:
        sd.on_enter(world, agent, ev)


def set_role(world, agent, role, ev):
    if agent.role != role:
        ev.append((world.round, agent.id, ROLE_CHANGE,
                   {"frm": agent.role, "to": role}))
        agent.role = role


def _eval_guards(world, agent, snap, guards, mode):
    """mode: 'full' consults pending flags, 'fresh' does not, 'defer' fires
    only timeouts and queues satisfied presence guards."""
    pending = agent.pending
    if mode == "defer":
        for i, g in enumerate(guards):
            if g.kind == TIMEOUT:
                p = g.pred(world, agent, snap)
                if p:
                    return i, g, p
            elif g.kind == PRESENCE and i not in pending:
                p = g.pred(world, agent, snap)
                if p:
                    pending[i] = p
        return None
    for i, g in enumerate(guards):
        if mode == "full" and i in pending:
            return i, g, pending[i]
        p = g.pred(world, agent, snap)
        if p:
            return i, g, p
    return None


def _cautious_step(world, agent, snap, sd, ev):
    """One activation of a cautious walk. Returns ('goto', target, payload)
    or ('move', dir) or ('stay',)."""
    pos = agent.pos
    phase = agent.cphase

    # normalize arrivals
    if phase == RESUMING and pos == agent.c_target:
        agent.cphase = phase = IDLE
        agent.c_anchor = pos
        agent.c_target = None

    if phase == IDLE:
        mode = "full"
    elif phase == ADVANCING:
        mode = "fresh" if pos == agent.c_anchor else "defer"
    elif phase == RETURNING:
        mode = "fresh" if pos == agent.c_anchor else "defer"
    else:  # RESUMING, still at anchor (blocked re-advance)
        mode = "fresh"

    hit = _eval_guards(world, agent, snap, sd.guards, mode)
    if hit:
        _, g, payload = hit
        # leaving the walk: the pebble never stays behind on the current node
        # (Phase-2 entry keeps it in place; its recovery branch owns that case)
        if sd.use_pebble and g.target != "EndPhase1":
            world.reclaim_if_here(agent, ev)
        return ("goto", g.target, payload)

    if phase == IDLE:
        if sd.probe_cond is not None and not sd.probe_cond(world, agent, snap):
            return ("stay",)
        if sd.use_pebble:
            world.place_pebble(agent, ev)
        agent.c_target = world.cfg.neighbor(pos, sd.direction)
        agent.cphase = ADVANCING
        return ("move", sd.direction)
    if phase == ADVANCING:
        if pos == agent.c_anchor:
            return ("move", sd.direction)     # retry the blocked probe
        agent.cphase = RETURNING
        return ("move", LEFT if sd.direction == RIGHT else RIGHT)
    if phase == RETURNING:
        if pos == agent.c_anchor:
            if sd.use_pebble:
                world.take_pebble(agent, ev)
            agent.cphase = RESUMING
            return ("move", sd.direction)
        return ("move", LEFT if sd.direction == RIGHT else RIGHT)
    # RESUMING blocked at anchor
    return ("move", sd.direction)


def step_agent(world, agent, snap, ev):
    """Run the agent's chain of procedures for this round; returns the move
    direction or None for staying put."""
    for _ in range(CHAIN_LIMIT):
        sd = world.program[agent.state]
        kind = sd.kind
        if kind == "terminal":
            payload = sd.report(world, agent)
            agent.terminated = True
            agent.bh_report = payload
            ev.append((world.round, agent.id, TERMINATE, payload))
            return None
        if kind == "action":
            nxt, payload = sd.handler(world, agent, snap, ev)
            enter_state(world, agent, nxt, payload, ev)
            continue
        if kind == "custom":
            out = sd.step(world, agent, snap, ev)
            if out[0] == "goto":
                enter_state(world, agent, out[1],
                            out[2] if len(out) > 2 else None, ev)
                continue
            return out[1] if out[0] == "move" else None
        if kind == "explore":
            hit = _eval_guards(world, agent, snap, sd.guards, "fresh")
            if hit:
                _, g, payload = hit
                enter_state(world, agent, g.target, payload, ev)
                continue
            return sd.direction
        if kind == "cautious":
            out = _cautious_step(world, agent, snap, sd, ev)
            if out[0] == "goto":
                enter_state(world, agent, out[1], out[2], ev)
                continue
            return out[1] if out[0] == "move" else None
        raise SimulationError(f"unknown state kind {kind!r}")
    raise SimulationError(
        f"round {world.round}: agent {agent.id} exceeded the transition "
        f"chain limit in state {agent.state}")


# -- the round ---------------------------------------------------------------

def advance_round(world, adversary):
    """Execute one synchronous round; returns the trace events it produced."""
    cfg = world.cfg
    rnd = world.round
    ev = []

    # 1. adversary commits this round's edge set
    edges = adversary.choose(world)
    if not isinstance(edges, RoundEdgeSet):
        raise SimulationError("adversary must return a RoundEdgeSet")
    edges.validate(cfg.n)
    world.edges = edges
    world.schedule.append(edges.missing)
    ev.append((rnd, None, "Edges", {"missing": edges.missing}))

    # 2. the black hole eats arrivals before anything is observed
    for ag in world.agents:
        if ag.alive and ag.pos == cfg.bh:
            ag.alive = False
            if ag.holds_pebble:
                ag.holds_pebble = False
                world.destroyed_pebbles += 1
            ev.append((rnd, ag.id, ENTER_BH,
                       {"node": cfg.bh, "state": ag.state, "role": ag.role}))

    # 3. snapshots
    occupants = {}
    for ag in world.agents:
        if ag.active:
            occupants.setdefault(ag.pos, []).append(ag)
    snaps = {}
    for node, group in occupants.items():
        cw_p = edges.edge_present(cfg.crossing_edge(node, RIGHT))
        ccw_p = edges.edge_present(cfg.crossing_edge(node, LEFT))
        pebs = frozenset(world.pebbles.get(node, ()))
        for ag in group:
            others = tuple((o.id, o.role, o.state)
                           for o in group if o is not ag)
            arrivals = frozenset(o.id for o in group
                                 if o is not ag and o.prev_pos != o.pos)
            snaps[ag.id] = Snapshot(node, rnd, others, arrivals,
                                    ag.prev_pos != ag.pos, pebs, cw_p, ccw_p)

    # 4. instantaneous colocated exchange: meeting counters and the pendulum
    # report clock (a returning runner resets its leader's deadline)
    for node, group in occupants.items():
        if len(group) < 2:
            continue
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                if a.prev_pos == a.pos and b.prev_pos == b.pos:
                    continue  # standing together is not a meeting
                a.c.meets[b.id] = a.c.meets.get(b.id, 0) + 1
                b.c.meets[a.id] = b.c.meets.get(a.id, 0) + 1
                a.c.rlastmet[b.id] = 0
                b.c.rlastmet[a.id] = 0
                _pendulum_meet(world, a, b, node)
                _pendulum_meet(world, b, a, node)
                lo, hi = (a, b) if a.id < b.id else (b, a)
                ev.append((rnd, lo.id, MEET, {"other": hi.id, "node": node}))

    # 5. decisions (pebble ops apply immediately; ascending id keeps the
    # mutual exclusion deterministic and decisions only read snapshots)
    moves = []
    pre_pos = {}
    for ag in world.agents:
        if not ag.active:
            continue
        pre_pos[ag.id] = ag.pos
        d = step_agent(world, ag, snaps[ag.id], ev)
        if d is not None and ag.active:
            moves.append((ag, d))

    # 7. moves
    for ag in world.agents:
        if ag.active:
            ag.prev_pos = ag.pos
    for ag, d in moves:
        e = cfg.crossing_edge(ag.pos, d)
        if edges.edge_present(e):
            frm = ag.pos
            ag.pos = cfg.neighbor(frm, d)
            step = 1 if d == RIGHT else -1
            ag.c.off += step
            ag.home_off += step
            ag.c.call_off += step
            ev.append((rnd, ag.id, MOVE, {"frm": frm, "to": ag.pos, "dir": d}))
        else:
            ev.append((rnd, ag.id, BLOCKED, {"at": ag.pos, "dir": d, "edge": e}))

    # 8. counters
    n = cfg.n
    for ag in world.agents:
        if ag.id not in pre_pos or not ag.alive or ag.terminated:
            continue
        c = ag.c
        c.ttime += 1
        c.etime += 1
        p = pre_pos[ag.id]
        if not edges.edge_present(cfg.crossing_edge(p, RIGHT)):
            c.emtime_c += 1
            if ag.role in ("MLeader", "Leader"):
                ag.rg_missing_cw += 1
        if not edges.edge_present(cfg.crossing_edge(p, LEFT)):
            c.emtime_cc += 1
        if ag.pos != p:
            if c.off > c.cw_ext:
                c.cw_ext = c.off
                c.tnodes = min(n, c.cw_ext + c.ccw_ext + 1)
            elif -c.off > c.ccw_ext:
                c.ccw_ext = -c.off
                c.tnodes = min(n, c.cw_ext + c.ccw_ext + 1)
            if c.call_off > c.call_max:
                c.call_max = c.call_off
                c.enodes = min(n, c.call_max - c.call_min)
            elif c.call_off < c.call_min:
                c.call_min = c.call_off
                c.enodes = min(n, c.call_max - c.call_min)
        for k in c.rlastmet:
            c.rlastmet[k] += 1

    world.events.extend(ev)
    world.round += 1
    return ev


def _swing_complete(rg):
    """The runner has finished exploring this swing's node: it is heading
    back, or it stands on the swing target itself (the leader may walk onto
    it before the turnaround)."""
    if rg.state == "PendulumBack":
        return True
    return (rg.state == "PendulumOut"
            and rg.home_off == -(rg.pendulum_meets + 1))


def _pendulum_meet(world, me, other, node):
    """Leader-side and runner-side bookkeeping for a pendulum meeting.
    A meeting with the outbound runner resets the report deadline but only a
    completed swing advances the meet count the location report is built on."""
    if me.role in ("MLeader", "Leader") and other.id == me.ml_rg_id:
        me.rg_missing_cw = 0
        if _swing_complete(other):
            me.pendulum_meets += 1
            me.reference_node = node
    elif me.role == "Retroguard" and other.id == me.leader_id:
        if _swing_complete(me):
            me.pendulum_meets += 1


# -- trace container ---------------------------------------------------------

class Trace:
    """Full record of one run: config, the executed schedule, and the event
    log, serializable to deterministic JSON lines."""

    def __init__(self, config, schedule, events):
        self.config = config        # plain dict
        self.schedule = schedule    # missing edge (or None) per round
        self.events = events        # list of (round, agent|None, kind, payload)

    def to_jsonl(self):
        lines = [json.dumps({"config": self.config}, sort_keys=True,
                            separators=(",", ":"))]
        for r, a, k, p in self.events:
            lines.append(json.dumps({"r": r, "a": a, "k": k, "p": p},
                                    sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        config = head["config"]
        events = []
        schedule = []
        for ln in lines[1:]:
            d = json.loads(ln)
            ev = (d["r"], d["a"], d["k"], d["p"])
            events.append(ev)
            if d["k"] == "Edges":
                schedule.append(d["p"]["missing"])
        return cls(config, schedule, events)

    def moves_total(self):
        return sum(1 for e in self.events if e[2] == MOVE)

    def rounds(self):
        return len(self.schedule)
