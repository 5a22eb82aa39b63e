"""Run configuration: a flat, human-editable key=value document.

Every field has a default; unknown keys are rejected. Example::

    n = 8
    bh = 5
    starts = 0,2,6          # or: colocated:0   or: random:42
    protocol = gather_and_locate
    adversary = random
    p_block = 0.5
    seed = 7
    horizon = 3200          # defaults to 50*n^2
    reference = assignment  # retro-report reference node reading
"""

from __future__ import annotations

import random as _random
from dataclasses import dataclass, field

from .protocols import REFERENCE_READINGS

PROTOCOLS = ("gather_and_locate", "cautious_pendulum")
ADVERSARIES = ("static", "frontier_blocker", "pendulum_staller", "random",
               "replay")

# Shipped default for the retro-report reference node. Both readings are
# implemented; the acceptance sweep is what picked this one (the
# last-meeting reading mislocates whenever the leader advanced between
# runner visits).
DEFAULT_REFERENCE = "assignment"


@dataclass
class RunConfig:
    n: int = 8
    bh: int = 0
    starts: object = "random:0"      # list of 3 ints, "colocated:v", "random:s"
    protocol: str = "gather_and_locate"
    adversary: str = "static"
    seed: int = 0
    p_block: float = 0.5
    biased: bool = False
    release_period: int | None = None
    schedule: list = field(default_factory=list)
    horizon: int | None = None       # None -> 50 * n^2
    reference: str = DEFAULT_REFERENCE

    def resolved_horizon(self):
        return self.horizon if self.horizon is not None else 50 * self.n * self.n

    def resolved_starts(self):
        s = self.starts
        if isinstance(s, (list, tuple)):
            starts = [int(x) for x in s]
        elif isinstance(s, str) and s.startswith("colocated"):
            v = int(s.split(":", 1)[1]) if ":" in s else 0
            starts = [v, v, v]
        elif isinstance(s, str) and s.startswith("random"):
            seed = int(s.split(":", 1)[1]) if ":" in s else 0
            rng = _random.Random(seed)
            nodes = [v for v in range(self.n) if v != self.bh]
            starts = rng.sample(nodes, 3)
        else:
            raise ValueError(f"bad starts spec {s!r}")
        return starts

    def validate(self):
        if self.n < 4:
            raise ValueError(f"n must be >= 4, got {self.n}")
        if not 0 <= self.bh < self.n:
            raise ValueError(f"bh {self.bh} out of range for n={self.n}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"unknown adversary {self.adversary!r}")
        if self.reference not in REFERENCE_READINGS:
            raise ValueError(f"unknown reference reading {self.reference!r}")
        starts = self.resolved_starts()
        if len(starts) != 3:
            raise ValueError("exactly three agents are supported")
        for v in starts:
            if not 0 <= v < self.n:
                raise ValueError(f"start {v} out of range")
            if v == self.bh:
                raise ValueError(f"start {v} coincides with the black hole")
        colocated = len(set(starts)) == 1
        if not colocated and len(set(starts)) != 3:
            raise ValueError("starts must be three distinct nodes (or colocated)")
        if self.protocol == "cautious_pendulum" and not colocated:
            raise ValueError("cautious_pendulum requires colocated starts")
        return self

    def to_dict(self):
        return {
            "n": self.n, "bh": self.bh, "starts": self.resolved_starts(),
            "protocol": self.protocol, "adversary": self.adversary,
            "seed": self.seed, "p_block": self.p_block, "biased": self.biased,
            "release_period": self.release_period,
            "schedule": list(self.schedule) if self.schedule else [],
            "horizon": self.resolved_horizon(), "reference": self.reference,
        }

    @classmethod
    def from_dict(cls, d):
        cfg = cls()
        for k, v in d.items():
            if not hasattr(cfg, k):
                raise ValueError(f"unknown config key {k!r}")
            setattr(cfg, k, v)
        return cfg


_BOOLS = {"true": True, "yes": True, "1": True,
          "false": False, "no": False, "0": False}


def _coerce(key, raw):
    raw = raw.strip()
    if key in ("n", "bh", "seed", "horizon", "release_period"):
        return None if raw.lower() == "none" else int(raw)
    if key == "p_block":
        return float(raw)
    if key == "biased":
        return _BOOLS[raw.lower()]
    if key == "starts":
        if raw.startswith(("colocated", "random")):
            return raw
        return [int(x) for x in raw.replace(" ", "").split(",") if x]
    if key == "schedule":
        return [None if x == "-" else int(x)
                for x in raw.replace(" ", "").split(",") if x]
    return raw


def parse_config_text(text):
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        key = key.strip()
        if not hasattr(cfg, key):
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, raw))
    return cfg


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())
