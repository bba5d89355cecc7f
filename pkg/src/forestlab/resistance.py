"""Effective resistance, unit flows, and the two-sided resistance bounds.

Potentials come from a grounded-Laplacian solve: dense Cholesky below a size
cutoff, Jacobi-preconditioned conjugate gradient above it, with the residual
re-verified either way since resistance values feed inequality tests. All
conductances are 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import DomainError, SolverError
from .graphs import Graph, build_lattice_box, components
from .lattice import LatticeBoxSpec, vertex_id

DENSE_SOLVE_CUTOFF = 2000
DEFAULT_RTOL = 1e-10


@dataclass(frozen=True)
class PotentialField:
    """Solved Dirichlet potential: 1 on boundary_A, 0 on boundary_B."""

    values: np.ndarray
    boundary_A: frozenset
    boundary_B: frozenset


@dataclass(frozen=True)
class CutSetFamily:
    """Ordered cut sets C_1..C_n as edge-id tuples; overlaps allowed."""

    cuts: tuple

    def __len__(self) -> int:
        return len(self.cuts)

    def multiplicities(self, m: int) -> np.ndarray:
        """j(e) = number of cuts containing edge e."""
        j = np.zeros(m, dtype=np.int64)
        for cut in self.cuts:
            ids = np.asarray(list(cut), dtype=np.int64)
            if ids.size and (ids.min() < 0 or ids.max() >= m):
                raise DomainError("cut set contains an edge id outside the graph")
            j[ids] += 1
        return j


@dataclass(frozen=True)
class UnitFlow:
    """Signed flow per edge, oriented edge_u -> edge_v."""

    flow: np.ndarray


def _vertex_set(label: str, vs, n: int) -> np.ndarray:
    out = np.unique(np.atleast_1d(np.asarray(vs, dtype=np.int64)))
    if out.size == 0:
        raise DomainError(f"{label} must be nonempty")
    if out.min() < 0 or out.max() >= n:
        raise DomainError(f"{label} contains a vertex outside the graph")
    return out


def energy(f, G: Graph) -> float:
    """Dirichlet energy: sum over undirected edges of the squared gap."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (G.n,):
        raise DomainError("potential must assign a value to every vertex")
    d = f[G.edge_u] - f[G.edge_v]
    return float(d @ d)


def _laplacian(G: Graph) -> sp.csr_matrix:
    keep = G.edge_u != G.edge_v
    u, v = G.edge_u[keep], G.edge_v[keep]
    ones = np.ones(len(u))
    i = np.concatenate([u, v, u, v])
    j = np.concatenate([v, u, u, v])
    data = np.concatenate([-ones, -ones, ones, ones])
    return sp.coo_matrix((data, (i, j)), shape=(G.n, G.n)).tocsr()


def _solve_spd(Lff: sp.csr_matrix, rhs: np.ndarray, rtol: float) -> np.ndarray:
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros(len(rhs))
    k = Lff.shape[0]
    if k <= DENSE_SOLVE_CUTOFF:
        x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Lff.toarray()), rhs)
    else:
        M = sp.diags(1.0 / Lff.diagonal())
        try:
            x, _ = cg(Lff, rhs, M=M, rtol=rtol / 10, atol=0.0, maxiter=20 * k + 1000)
        except TypeError:  # older scipy spells the kwarg tol
            x, _ = cg(Lff, rhs, M=M, tol=rtol / 10, atol=0.0, maxiter=20 * k + 1000)
    residual = float(np.linalg.norm(Lff @ x - rhs))
    if residual > rtol * rhs_norm:
        raise SolverError(f"linear solve residual {residual:.3e} above {rtol:.1e} * ||rhs||")
    return x


def solve_potential(G: Graph, A, B, rtol: float = DEFAULT_RTOL) -> PotentialField:
    """Harmonic potential with f = 1 on A and f = 0 on B.

    Components touching neither A nor B carry no constraint; their vertices
    are set to 0, which adds no energy.
    """
    A = _vertex_set("A", A, G.n)
    B = _vertex_set("B", B, G.n)
    if np.intersect1d(A, B).size:
        raise DomainError("A and B overlap")
    comp = components(G)
    fixed = np.concatenate([A, B])
    anchored = np.unique(comp.labels[fixed])
    is_fixed = np.zeros(G.n, dtype=bool)
    is_fixed[fixed] = True
    free = np.flatnonzero(~is_fixed & np.isin(comp.labels, anchored))
    f = np.zeros(G.n)
    f[A] = 1.0
    if free.size:
        L = _laplacian(G)
        Lff = L[free][:, free].tocsr()
        rhs = -np.asarray(L[free][:, A].sum(axis=1)).ravel()
        f[free] = _solve_spd(Lff, rhs, rtol)
    return PotentialField(f, frozenset(A.tolist()), frozenset(B.tolist()))


def harmonic_violation(G: Graph, field: PotentialField) -> float:
    """max |(L f)(v)| / deg(v) over free vertices; solver quality gauge."""
    L = _laplacian(G)
    resid = np.abs(L @ field.values)
    fixed = np.zeros(G.n, dtype=bool)
    fixed[list(field.boundary_A | field.boundary_B)] = True
    deg = np.maximum(G.degrees(), 1)
    vals = resid[~fixed] / deg[~fixed]
    return float(vals.max()) if vals.size else 0.0


def effective_resistance(G: Graph, A, B, rtol: float = DEFAULT_RTOL) -> float:
    """1 / min Dirichlet energy; +inf when no component holds both sides."""
    A = _vertex_set("A", A, G.n)
    B = _vertex_set("B", B, G.n)
    if np.intersect1d(A, B).size:
        raise DomainError("A and B overlap")
    comp = components(G)
    if not np.intersect1d(comp.labels[A], comp.labels[B]).size:
        return math.inf
    field = solve_potential(G, A, B, rtol)
    e = energy(field.values, G)
    if e <= 0:
        raise SolverError("zero Dirichlet energy on a connected pair")
    return 1.0 / e


def unit_current_flow(G: Graph, field: PotentialField) -> UnitFlow:
    """Current of the potential, rescaled to push unit flow from A to B."""
    f = field.values
    e = energy(f, G)
    if e <= 0:
        raise DomainError("potential carries no current")
    return UnitFlow((f[G.edge_u] - f[G.edge_v]) / e)


def flow_divergence(G: Graph, flow: np.ndarray) -> np.ndarray:
    """Net outflow per vertex under the edge_u -> edge_v orientation."""
    div = np.zeros(G.n)
    np.add.at(div, G.edge_u, flow)
    np.add.at(div, G.edge_v, -flow)
    return div


def validate_unit_flow(G: Graph, flow: np.ndarray, A, B, tol: float = 1e-6) -> None:
    A = _vertex_set("A", A, G.n)
    B = _vertex_set("B", B, G.n)
    flow = np.asarray(flow, dtype=np.float64)
    if flow.shape != (G.m,):
        raise DomainError("flow must assign a value to every edge")
    div = flow_divergence(G, flow)
    interior = np.ones(G.n, dtype=bool)
    interior[A] = False
    interior[B] = False
    worst = float(np.abs(div[interior]).max()) if interior.any() else 0.0
    if worst > tol:
        v = int(np.flatnonzero(interior)[np.abs(div[interior]).argmax()])
        raise DomainError(f"flow conservation violated by {worst:.3e} at vertex {v}")
    src, snk = float(div[A].sum()), float(div[B].sum())
    if abs(src - 1.0) > tol or abs(snk + 1.0) > tol:
        raise DomainError(f"flow is not a unit A->B flow: source {src:.6f}, sink {snk:.6f}")


def thomson_upper_bound(G: Graph, A, B, flow, tol: float = 1e-6) -> float:
    """Energy of any validated unit flow; an upper bound for the resistance."""
    if isinstance(flow, UnitFlow):
        flow = flow.flow
    flow = np.asarray(flow, dtype=np.float64)
    validate_unit_flow(G, flow, A, B, tol)
    return float(flow @ flow)


def validate_cut_family(G: Graph, A, B, family: CutSetFamily) -> None:
    """Deleting each C_k must disconnect every a in A from every b in B."""
    A = _vertex_set("A", A, G.n)
    B = _vertex_set("B", B, G.n)
    family.multiplicities(G.m)  # range check
    for k, cut in enumerate(family.cuts):
        mask = np.ones(G.m, dtype=bool)
        mask[np.asarray(list(cut), dtype=np.int64)] = False
        comp = components(G, mask)
        if np.intersect1d(comp.labels[A], comp.labels[B]).size:
            raise DomainError(f"cut set {k} does not separate A from B")


def nash_williams_lower_bound(G: Graph, A, B, family: CutSetFamily) -> float:
    """Sum over cuts of 1 / (multiplicity-weighted cut size).

    Overlapping cuts are priced by j(e), the number of cuts an edge belongs
    to, which keeps the sum a true lower bound for the resistance.
    """
    validate_cut_family(G, A, B, family)
    j = family.multiplicities(G.m)
    total = 0.0
    for cut in family.cuts:
        ids = np.asarray(list(cut), dtype=np.int64)
        total += 1.0 / float(j[ids].sum())
    return total


def wired_effective_resistance(specs, x, y, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Resistance between two lattice points across a family of wired boxes.

    x and y are lattice coordinates, valid in every box. The wired vertex is
    an ordinary vertex of each solve; the values increase with the radius and
    their limit is the wired resistance on the infinite lattice.
    """
    specs = list(specs)
    if not specs:
        raise DomainError("empty box family")
    for spec in specs:
        if spec.boundary != "wired":
            raise DomainError("wired_effective_resistance needs wired boxes")
    if any(s.d != specs[0].d for s in specs):
        raise DomainError("box family mixes dimensions")
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if np.array_equal(x, y):
        raise DomainError("x and y must differ")
    out = np.empty(len(specs))
    for i, spec in enumerate(specs):
        G = build_lattice_box(spec)
        out[i] = effective_resistance(G, [vertex_id(spec, x)], [vertex_id(spec, y)], rtol)
    return out


def local_modification_gap(H: Graph, H2: Graph, probes, rtol: float = DEFAULT_RTOL) -> float:
    """max over probe pairs of R_eff in H minus R_eff in the modified H2."""
    probes = list(probes)
    if not probes:
        raise DomainError("no probe pairs")
    gap = -math.inf
    for u, v in probes:
        if not (0 <= u < min(H.n, H2.n) and 0 <= v < min(H.n, H2.n)):
            raise DomainError(f"probe ({u}, {v}) outside one of the graphs")
        gap = max(gap, effective_resistance(H, [u], [v], rtol)
                  - effective_resistance(H2, [u], [v], rtol))
    return gap
