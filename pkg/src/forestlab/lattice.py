"""Box geometry on Z^d and the canonical vertex/edge numbering.

A box of radius r is the vertex set [-r, r]^d. Internally coordinates are
shifted to [0, L) with L = 2r+1; vertex ids are mixed-radix with axis 0 the
fastest stride, and the origin sits at the exact center. The wired variant has
one extra vertex with id L^d that stands for everything outside the box; each
box-leaving unit edge becomes its own parallel edge to that vertex.

Edge ids are canonical so that code which never materializes the graph (the
lattice jit kernels) and code which does (build_lattice_box) agree exactly:

  - interior edges come first, grouped by axis; within axis a the edges
    (v, v + stride_a) are ranked by the mixed-radix index of v where axis a
    has radix L-1 and every other axis radix L;
  - wired boundary edges follow, grouped by (axis, side) with side 0 the low
    face; within a face, edges are ranked by the mixed-radix index of the
    remaining d-1 coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class LatticeBoxSpec:
    d: int
    radius: int
    boundary: str = "wired"  # "wired" | "free"

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"dimension must be >= 1, got {self.d}")
        if self.radius < 1:
            raise DomainError(f"radius must be >= 1, got {self.radius}")
        if self.boundary not in ("wired", "free"):
            raise DomainError(f"boundary must be 'wired' or 'free', got {self.boundary!r}")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def box_vertex_count(self) -> int:
        return self.side ** self.d

    @property
    def vertex_count(self) -> int:
        """Vertices of the graph (box plus the wired vertex if wired)."""
        n = self.box_vertex_count
        return n + 1 if self.boundary == "wired" else n

    @property
    def wired_vertex(self) -> int | None:
        return self.box_vertex_count if self.boundary == "wired" else None

    @property
    def interior_edge_count(self) -> int:
        L = self.side
        return self.d * (L - 1) * L ** (self.d - 1)

    @property
    def boundary_edge_count(self) -> int:
        if self.boundary != "wired":
            return 0
        return 2 * self.d * self.side ** (self.d - 1)

    @property
    def edge_count(self) -> int:
        return self.interior_edge_count + self.boundary_edge_count


def strides(spec: LatticeBoxSpec) -> np.ndarray:
    L = spec.side
    return L ** np.arange(spec.d, dtype=np.int64)


def vertex_id(spec: LatticeBoxSpec, coords) -> int:
    """Id of the vertex at user coordinates (each in [-r, r])."""
    c = np.asarray(coords, dtype=np.int64)
    if c.shape != (spec.d,) or np.any(np.abs(c) > spec.radius):
        raise DomainError(f"coordinates {coords} outside the radius-{spec.radius} box in d={spec.d}")
    return int(((c + spec.radius) * strides(spec)).sum())


def vertex_coords(spec: LatticeBoxSpec, v: int) -> np.ndarray:
    """User coordinates in [-r, r]^d of a box vertex id."""
    if not 0 <= v < spec.box_vertex_count:
        raise DomainError(f"vertex id {v} outside box of {spec.box_vertex_count} vertices")
    L = spec.side
    out = np.empty(spec.d, dtype=np.int64)
    for i in range(spec.d):
        out[i] = v % L - spec.radius
        v //= L
    return out


def origin_id(spec: LatticeBoxSpec) -> int:
    return vertex_id(spec, np.zeros(spec.d, dtype=np.int64))


def all_coords(spec: LatticeBoxSpec) -> np.ndarray:
    """(n, d) internal coordinates in [0, L) for every box vertex, id order."""
    L, d, n = spec.side, spec.d, spec.box_vertex_count
    ids = np.arange(n, dtype=np.int64)
    out = np.empty((n, d), dtype=np.int64)
    for i in range(d):
        out[:, i] = ids % L
        ids //= L
    return out


def interior_edge_id(spec: LatticeBoxSpec, v: int, axis: int) -> int:
    """Id of the interior edge from box vertex v toward +axis."""
    L, d = spec.side, spec.d
    per_axis = (L - 1) * L ** (d - 1)
    rank = 0
    radix_prod = 1
    w = v
    for i in range(d):
        c = w % L
        w //= L
        if i == axis:
            if c >= L - 1:
                raise DomainError(f"vertex {v} has no +axis{axis} interior edge")
            rank += c * radix_prod
            radix_prod *= L - 1
        else:
            rank += c * radix_prod
            radix_prod *= L
    return axis * per_axis + rank


def boundary_edge_id(spec: LatticeBoxSpec, v: int, axis: int, high: bool) -> int:
    """Id of the wired edge leaving box vertex v through the given face."""
    if spec.boundary != "wired":
        raise DomainError("free boxes have no boundary edges")
    L, d = spec.side, spec.d
    face = L ** (d - 1)
    rank = 0
    radix_prod = 1
    w = v
    for i in range(d):
        c = w % L
        w //= L
        if i == axis:
            if c != (L - 1 if high else 0):
                raise DomainError(f"vertex {v} not on face (axis={axis}, high={high})")
        else:
            rank += c * radix_prod
            radix_prod *= L
    base = spec.interior_edge_count + (2 * axis + (1 if high else 0)) * face
    return base + rank


def lattice_ball(spec: LatticeBoxSpec, radius: int, center=None) -> np.ndarray:
    """Box vertex ids at graph distance <= radius from center (default origin).

    Graph distance inside a box equals L1 distance, since coordinatewise
    monotone paths never leave the box.
    """
    if center is None:
        center = np.zeros(spec.d, dtype=np.int64)
    center = np.asarray(center, dtype=np.int64)
    coords = all_coords(spec) - spec.radius
    dist = np.abs(coords - center).sum(axis=1)
    return np.flatnonzero(dist <= radius).astype(np.int64)
