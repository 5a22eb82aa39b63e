"""Oriented dynamic ring footprint with one black hole and at most one
missing edge per round.

Node indices are simulator-internal bookkeeping; agents only ever reason in
relative displacements. "right" is clockwise (index +1 mod n), "left" is
counter-clockwise (index -1 mod n), fixed globally.

Edge ``i`` connects node ``i`` and node ``(i+1) % n``.
"""

from dataclasses import dataclass

RIGHT = "right"
LEFT = "left"


@dataclass(frozen=True)
class RingConfig:
    """Ring footprint: ``n`` nodes, one black hole at ``bh``."""

    n: int
    bh: int

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"ring size must be >= 4, got {self.n}")
        if not 0 <= self.bh < self.n:
            raise ValueError(f"black hole index {self.bh} out of range for n={self.n}")

    def neighbor(self, v: int, direction: str) -> int:
        if direction == RIGHT:
            return (v + 1) % self.n
        if direction == LEFT:
            return (v - 1) % self.n
        raise ValueError(f"bad direction {direction!r}")

    def ccw_bh_neighbor(self) -> int:
        """The counter-clockwise neighbor of the black hole, (bh - 1) mod n."""
        return (self.bh - 1) % self.n

    def crossing_edge(self, v: int, direction: str) -> int:
        """Edge crossed when leaving node ``v`` in ``direction``."""
        if direction == RIGHT:
            return v
        if direction == LEFT:
            return (v - 1) % self.n
        raise ValueError(f"bad direction {direction!r}")


@dataclass(frozen=True)
class RoundEdgeSet:
    """Edges present in one round.

    A single optional field: the type cannot represent two missing edges,
    which is how the one-missing-edge bound is enforced by construction.
    """

    missing: int | None = None

    def edge_present(self, e: int) -> bool:
        return e != self.missing

    def validate(self, n: int) -> "RoundEdgeSet":
        if self.missing is not None and not 0 <= self.missing < n:
            raise ValueError(f"missing edge {self.missing} out of range for n={n}")
        return self


ALL_PRESENT = RoundEdgeSet(None)
