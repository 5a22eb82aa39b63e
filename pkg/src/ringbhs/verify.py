"""Trace verification: the solved-condition, the first-phase guarantees, and
desk-scale complexity bound checks.

The verifier is pure over the trace: it replays positions and the pebble
board from the event log and never consults the engine, so it doubles as an
independent oracle for the protocol implementation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .protocols import PHASE1_STATES


@dataclass
class Verdict:
    solved: bool
    violations: list = field(default_factory=list)   # (invariant, round, detail)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.violations

    def add(self, invariant, rnd, detail):
        self.violations.append((invariant, rnd, detail))


class TraceView:
    """Replayed per-agent facts extracted from one trace."""

    def __init__(self, trace):
        self.trace = trace
        cfg = trace.config
        self.n = cfg["n"]
        self.bh = cfg["bh"]
        self.starts = list(cfg["starts"])
        self.rounds = len(trace.schedule)
        self.deaths = {}          # agent -> (round, state, role)
        self.terms = {}           # agent -> (round, payload)
        self.phase1_end = {}      # agent -> round it left phase 1 (alive)
        self.moves = {a: [] for a in range(3)}        # (round, frm, to)
        self.pebble_spans = []    # (owner, node, placed_round, taken_round|None)
        open_pebbles = {}
        self.per_agent_moves = {a: 0 for a in range(3)}
        for r, a, k, p in trace.events:
            if k == "Move":
                self.moves[a].append((r, p["frm"], p["to"]))
                self.per_agent_moves[a] += 1
            elif k == "EnterBH":
                self.deaths[a] = (r, p["state"], p["role"])
            elif k == "Terminate":
                self.terms[a] = (r, p)
            elif k == "StateChange" and p["to"] == "InitP2" and a not in self.phase1_end:
                self.phase1_end[a] = r
            elif k == "PlacePebble":
                open_pebbles[a] = (p["node"], r)
            elif k == "TakePebble":
                node, r0 = open_pebbles.pop(a)
                self.pebble_spans.append((a, node, r0, r))
        for a, (node, r0) in open_pebbles.items():
            self.pebble_spans.append((a, node, r0, None))

    def position(self, agent, rnd):
        """Position at the top of round `rnd` (after the move of rnd-1)."""
        pos = self.starts[agent]
        for r, frm, to in self.moves[agent]:
            if r >= rnd:
                break
            pos = to
        return pos

    def pebble_at(self, node, rnd, owner=None):
        """Is a pebble lying on `node` at the top of round `rnd`?

        A pebble placed in round r is on the board for snapshots of rounds
        r+1 .. take-round (takes execute after that round's snapshot)."""
        for a, v, r0, r1 in self.pebble_spans:
            if v != node or (owner is not None and a != owner):
                continue
            if r0 < rnd and (r1 is None or rnd <= r1):
                return True
        return False

    def phase1_death(self, agent):
        d = self.deaths.get(agent)
        return d is not None and d[1] in PHASE1_STATES

    def phase1_exit_round(self, agent):
        """Round the agent stopped being a phase-1 participant, or None if it
        never did (still walking at the end of the trace)."""
        cands = []
        if agent in self.phase1_end:
            cands.append(self.phase1_end[agent])
        if agent in self.terms and agent not in self.phase1_end:
            cands.append(self.terms[agent][0])
        if agent in self.deaths and self.deaths[agent][1] in PHASE1_STATES:
            cands.append(self.deaths[agent][0])
        return min(cands) if cands else None


def check_solved(trace, permanent_edge=None):
    """The solved-condition: someone alive terminated knowing the footprint,
    and nobody who terminated got it wrong."""
    view = TraceView(trace)
    v = Verdict(solved=False)
    correct = []
    for a, (r, p) in view.terms.items():
        if p["claim"] == view.bh:
            correct.append(a)
        else:
            v.add("soundness", r,
                  f"agent {a} reported {p['claim']}, black hole is {view.bh}")
    v.solved = bool(correct) and not v.violations
    classifications = {}
    for a in range(3):
        if a in view.deaths:
            classifications[a] = "dead"
        elif a in view.terms:
            classifications[a] = "terminated"
        elif permanent_edge is not None and _last_block_on(trace, a, permanent_edge):
            classifications[a] = "blocked_forever"
        else:
            classifications[a] = "timed_out"
    v.stats = {
        "rounds": view.rounds,
        "moves": trace.moves_total(),
        "per_agent_moves": view.per_agent_moves,
        "deaths": sorted(view.deaths),
        "first_correct_term": min((view.terms[a][0] for a in correct),
                                  default=None),
        "classifications": classifications,
    }
    # the black hole is silent: after moving in, an agent only ever dies
    for a in range(3):
        for r, frm, to in view.moves[a]:
            if to == view.bh:
                d = view.deaths.get(a)
                if d is None or d[0] != r + 1:
                    v.add("bh_silence", r,
                          f"agent {a} moved into the black hole without dying next round")
                break
    v.solved = v.solved and not v.violations
    return v


def _last_block_on(trace, agent, edge):
    last = None
    for r, a, k, p in trace.events:
        if a != agent:
            continue
        if k in ("Move", "Blocked", "StateChange", "Terminate"):
            last = (k, p)
    return last is not None and last[0] == "Blocked" and last[1]["edge"] == edge


def check_phase1(trace):
    """First-phase guarantees: at most one death with the black hole's
    counter-clockwise neighbor left marked, a 9n end bound, and the
    three-way outcome classification at the moment the phase first ends."""
    view = TraceView(trace)
    v = Verdict(solved=True)
    n, bh = view.n, view.bh
    marker_node = (bh - 1) % n

    p1_deaths = [a for a in range(3) if view.phase1_death(a)]
    if len(p1_deaths) > 1:
        v.add("phase1_deaths", view.deaths[p1_deaths[1]][0],
              f"{len(p1_deaths)} agents died during phase 1")

    # (b) on a phase-1 death the marker stays on bh-1 through each
    # survivor's phase-1 end
    if p1_deaths:
        death_round = view.deaths[p1_deaths[0]][0]
        ends = [view.phase1_exit_round(a) for a in range(3) if a not in view.deaths]
        until = max([e for e in ends if e is not None], default=view.rounds)
        until = min(until, view.rounds)
        for r in range(death_round, until + 1):
            if not view.pebble_at(marker_node, r):
                v.add("phase1_marker", r,
                      f"node {marker_node} unmarked after the phase-1 death")
                break

    # (c) nobody is still in phase 1 past round 9n
    bound = 9 * n
    for a in range(3):
        e = view.phase1_exit_round(a)
        if e is None and view.rounds > bound:
            v.add("phase1_end_bound", bound, f"agent {a} never left phase 1")
        elif e is not None and e > bound:
            v.add("phase1_end_bound", e, f"agent {a} left phase 1 at round {e}")

    # (d) outcome trichotomy at the round phase 1 first ends for a survivor
    exits = [view.phase1_exit_round(a) for a in range(3)
             if not view.phase1_death(a)]
    exits = [e for e in exits if e is not None]
    if exits:
        t0 = min(exits)
        term1 = [a for a in range(3)
                 if a in view.terms and view.terms[a][0] <= t0
                 and a not in view.phase1_end]
        dead1 = [a for a in p1_deaths if view.deaths[a][0] <= t0]
        rest = [a for a in range(3) if a not in term1 and a not in dead1]
        if term1 and not dead1:
            v.add("phase1_trichotomy", t0,
                  "an agent terminated in phase 1 with nobody dead")
        elif not dead1:
            if not _gathered(view, rest, t0):
                v.add("phase1_trichotomy", t0,
                      f"no death but agents not gathered at round {t0}")
        else:
            if not view.pebble_at(marker_node, t0):
                v.add("phase1_trichotomy", t0,
                      f"death occurred but {marker_node} is unmarked at round {t0}")
            elif not term1 and not _gathered(view, rest, t0):
                v.add("phase1_trichotomy", t0,
                      f"one death, no terminator, survivors not gathered at round {t0}")
    v.solved = not v.violations
    return v


def _gathered(view, agents, rnd):
    """Same node, or all but one on v with the straggler on v+1 having
    marked v with its own pebble."""
    if len(agents) <= 1:
        return True
    pos = {a: view.position(a, rnd) for a in agents}
    groups = {}
    for a, p in pos.items():
        groups.setdefault(p, []).append(a)
    if len(groups) == 1:
        return True
    if len(groups) != 2:
        return False
    for s_node, g in groups.items():
        if len(g) != 1:
            continue
        straggler = g[0]
        v_node = (s_node - 1) % view.n
        if v_node in groups and view.pebble_at(v_node, rnd, owner=straggler):
            return True
    return False


def fit_loglog_slope(ns, ys):
    """Least-squares slope of log(y) against log(n)."""
    import math
    xs = [math.log(x) for x in ns]
    ws = [math.log(max(y, 1)) for y in ys]
    mx = sum(xs) / len(xs)
    my = sum(ws) / len(ws)
    num = sum((x - mx) * (w - my) for x, w in zip(xs, ws))
    den = sum((x - mx) ** 2 for x in xs)
    return num / den


def check_bounds(results, c=50, staller_min_slope=1.7, static_max_slope=1.3):
    """`results`: {family: [(n, rounds, moves), ...]}. Asserts the quadratic
    envelope per run and the qualitative log-log slopes per family."""
    v = Verdict(solved=True)
    slopes = {}
    for family, rows in results.items():
        for n, rounds, moves in rows:
            if rounds > c * n * n:
                v.add("round_bound", rounds, f"{family}: n={n} ran {rounds} rounds")
            if moves > c * n * n:
                v.add("move_bound", rounds, f"{family}: n={n} made {moves} moves")
        if len(rows) >= 2:
            ns = [r[0] for r in rows]
            slopes[family] = fit_loglog_slope(ns, [r[1] for r in rows])
    if "pendulum_staller" in slopes and slopes["pendulum_staller"] < staller_min_slope:
        v.add("staller_slope", 0,
              f"slope {slopes['pendulum_staller']:.2f} < {staller_min_slope}")
    if "static" in slopes and slopes["static"] > static_max_slope:
        v.add("static_slope", 0,
              f"slope {slopes['static']:.2f} > {static_max_slope}")
    v.stats["slopes"] = slopes
    v.solved = not v.violations
    return v
