"""Series-parallel two-terminal networks with exact rational resistance.

The reduction laws (series adds, parallel adds conductance) are evaluated in
Fraction arithmetic, giving an exact oracle the numeric solver is checked
against. Every leaf is a unit-conductance edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError
from .graphs import Graph
from .rng import RngStream

EDGE, SERIES, PARALLEL = "edge", "series", "parallel"


@dataclass(frozen=True)
class SPNetwork:
    kind: str
    left: "SPNetwork | None" = None
    right: "SPNetwork | None" = None

    def __post_init__(self):
        if self.kind not in (EDGE, SERIES, PARALLEL):
            raise DomainError(f"unknown composition kind {self.kind!r}")
        if (self.kind == EDGE) != (self.left is None and self.right is None):
            raise DomainError("edge leaves take no children; compositions take two")

    def resistance(self) -> Fraction:
        if self.kind == EDGE:
            return Fraction(1)
        rl, rr = self.left.resistance(), self.right.resistance()
        if self.kind == SERIES:
            return rl + rr
        return 1 / (1 / rl + 1 / rr)

    def leaves(self) -> int:
        if self.kind == EDGE:
            return 1
        return self.left.leaves() + self.right.leaves()


def sp_edge() -> SPNetwork:
    return SPNetwork(EDGE)


def sp_series(a: SPNetwork, b: SPNetwork) -> SPNetwork:
    return SPNetwork(SERIES, a, b)


def sp_parallel(a: SPNetwork, b: SPNetwork) -> SPNetwork:
    return SPNetwork(PARALLEL, a, b)


def random_sp_network(leaves: int, rng: RngStream) -> SPNetwork:
    """Uniformly shaped random composition tree with the given leaf count."""
    if leaves < 1:
        raise DomainError("need at least one leaf edge")
    gen = rng.generator()

    def build(k: int) -> SPNetwork:
        if k == 1:
            return sp_edge()
        split = int(gen.integers(1, k))
        kind = SERIES if gen.integers(0, 2) == 0 else PARALLEL
        return SPNetwork(kind, build(split), build(k - split))

    return build(leaves)


def materialize(net: SPNetwork) -> tuple[Graph, int, int]:
    """Build the multigraph of a network; terminals are vertices 0 and 1."""
    edges: list[tuple[int, int]] = []
    counter = [2]

    def walk(node: SPNetwork, s: int, t: int) -> None:
        if node.kind == EDGE:
            edges.append((s, t))
        elif node.kind == PARALLEL:
            walk(node.left, s, t)
            walk(node.right, s, t)
        else:
            mid = counter[0]
            counter[0] += 1
            walk(node.left, s, mid)
            walk(node.right, mid, t)

    walk(net, 0, 1)
    return Graph(counter[0], edges), 0, 1
