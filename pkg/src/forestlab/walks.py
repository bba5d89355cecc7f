"""Random walks, loop erasure, and walk-derived estimators.

Paths on finite graphs are vertex-id sequences; paths on Z^d are coordinate
arrays. Both carry an origin offset so two-sided objects can index negative
times. Loop erasure is chronological: each closed loop is removed the moment
it closes, which coincides with the last-exit definition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .errors import BudgetError, ContractError, DomainError, StatisticalError
from .graphs import Graph
from .rng import RngStream

DEFAULT_STEP_BUDGET = 1 << 26
HEAT_KERNEL_DP_BUDGET = 2 * 10 ** 9  # cost metric d * (t+1)^2


# ---------------------------------------------------------------------------
# path types and stop rules

@dataclass(frozen=True)
class Path:
    """Finite walk on a graph: vertex ids, with vertices[origin_offset] = time 0."""

    vertices: np.ndarray
    origin_offset: int = 0

    def __len__(self):
        return len(self.vertices)

    def times(self) -> np.ndarray:
        return np.arange(len(self.vertices)) - self.origin_offset


@dataclass(frozen=True)
class LatticePath:
    """Finite walk on Z^d: (length, d) coordinate rows, row origin_offset = time 0."""

    coords: np.ndarray
    origin_offset: int = 0

    def __len__(self):
        return len(self.coords)

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    def times(self) -> np.ndarray:
        return np.arange(len(self.coords)) - self.origin_offset


@dataclass(frozen=True)
class MarkedLoop:
    """Closed lattice loop with one marked time (length+1 choices) or step (length)."""

    coords: np.ndarray
    mark: int
    kind: str = "time"

    def __post_init__(self):
        if self.kind not in ("time", "step"):
            raise DomainError(f"mark kind must be 'time' or 'step', got {self.kind!r}")
        if len(self.coords) < 1 or not np.array_equal(self.coords[0], self.coords[-1]):
            raise DomainError("loop must start and end at the same point")
        if not 0 <= self.mark < self.mark_count():
            raise DomainError("mark outside its range")

    def length(self) -> int:
        return len(self.coords) - 1

    def mark_count(self) -> int:
        return self.length() + 1 if self.kind == "time" else max(self.length(), 1)

    def walk_weight(self, d: int) -> float:
        return float((2 * d)) ** (-self.length())


@dataclass(frozen=True)
class HitSet:
    targets: frozenset


@dataclass(frozen=True)
class FixedSteps:
    steps: int


@dataclass(frozen=True)
class HitWired:
    pass


def run_srw(G: Graph, start: int, stop, rng: RngStream,
            step_budget: int | None = None) -> Path:
    """Simple random walk on G from start under the given stop rule."""
    if not 0 <= start < G.n:
        raise DomainError(f"start vertex {start} outside graph")
    budget = DEFAULT_STEP_BUDGET if step_budget is None else step_budget
    mask = np.zeros(G.n, dtype=np.bool_)
    if isinstance(stop, FixedSteps):
        if stop.steps < 0:
            raise DomainError("step count must be >= 0")
        fixed = stop.steps
    elif isinstance(stop, HitSet):
        if not stop.targets:
            raise DomainError("empty target set")
        mask[np.fromiter(stop.targets, dtype=np.int64)] = True
        fixed = -1
    elif isinstance(stop, HitWired):
        if G.wired_vertex is None:
            raise DomainError("graph has no wired vertex")
        mask[G.wired_vertex] = True
        fixed = -1
    else:
        raise DomainError(f"unknown stop rule {stop!r}")
    path, status = _kernels.walk_csr_record(
        G.adj_start, G.adj_vertex, start, mask, budget, fixed, rng.generator())
    if status == _kernels.STATUS_STEP_BUDGET:
        raise BudgetError("walk-step", f"> {budget}", budget)
    if status == _kernels.STATUS_STUCK:
        raise DomainError(f"walk stuck at isolated vertex {path[-1]}")
    return Path(path)


# ---------------------------------------------------------------------------
# loop erasure

def reference_loop_erase(seq):
    """Textbook inductive loop erasure (last-exit rule); quadratic, for checking."""
    vs = list(seq)
    if not vs:
        raise DomainError("cannot loop-erase an empty path")
    out = [vs[0]]
    while True:
        u = out[-1]
        k = max(i for i, v in enumerate(vs) if v == u)
        if k == len(vs) - 1:
            return out
        out.append(vs[k + 1])


def _compact_ids(values: np.ndarray):
    """Map rows (or scalars) to dense ids. Returns (ids, count)."""
    if values.ndim == 1:
        uniq, inv = np.unique(values, return_inverse=True)
        return inv.astype(np.int64), len(uniq)
    # pack coordinates into int64 when the bounding box allows, else row-unique
    lo = values.min(axis=0)
    shifted = values - lo
    ranges = shifted.max(axis=0).astype(np.int64) + 1
    if np.log2(np.maximum(ranges, 1)).sum() < 62:
        strides = np.ones(len(ranges), dtype=np.int64)
        strides[1:] = np.cumprod(ranges[:-1])
        packed = shifted @ strides
        uniq, inv = np.unique(packed, return_inverse=True)
        return inv.astype(np.int64), len(uniq)
    uniq, inv = np.unique(values, axis=0, return_inverse=True)
    return inv.astype(np.int64), len(uniq)


def loop_erase(path):
    """Chronological loop erasure, preserving the input container type."""
    if isinstance(path, Path):
        return Path(loop_erase(path.vertices))
    if isinstance(path, LatticePath):
        ids, n = _compact_ids(path.coords)
        erased = _kernels.loop_erase_ids(ids, np.full(n, -1, dtype=np.int64))
        keep = _first_occurrence_rows(ids, erased, len(path.coords))
        return LatticePath(path.coords[keep])
    if isinstance(path, np.ndarray):
        ids, n = _compact_ids(path)
        erased_ids = _kernels.loop_erase_ids(ids, np.full(n, -1, dtype=np.int64))
        keep = _first_occurrence_rows(ids, erased_ids, len(path))
        return path[keep]
    if isinstance(path, (list, tuple)):
        # hashable-friendly stack erasure
        if not path:
            raise DomainError("cannot loop-erase an empty path")
        pos: dict = {}
        stack = []
        for v in path:
            if v in pos:
                for w in stack[pos[v] + 1:]:
                    del pos[w]
                del stack[pos[v] + 1:]
            else:
                pos[v] = len(stack)
                stack.append(v)
        return type(path)(stack)
    raise DomainError(f"cannot loop-erase {type(path).__name__}")


def _first_occurrence_rows(ids: np.ndarray, erased_ids: np.ndarray, length: int) -> np.ndarray:
    """Row indices realizing the erased id sequence (first occurrence of each id)."""
    first = np.full(erased_ids.max() + 1 if len(erased_ids) else 1, -1, dtype=np.int64)
    seen = np.full(ids.max() + 1, -1, dtype=np.int64)
    for i in range(length - 1, -1, -1):
        seen[ids[i]] = i
    return seen[erased_ids]


# ---------------------------------------------------------------------------
# cut times

def cut_times(path) -> np.ndarray:
    """Times t such that no site is visited both strictly before and after t.

    Window-relative: only visits inside the path count. Returned in walk time
    (index minus origin offset), sorted.
    """
    if isinstance(path, Path):
        ids, n = _compact_ids(path.vertices)
        off = path.origin_offset
    elif isinstance(path, LatticePath):
        ids, n = _compact_ids(path.coords)
        off = path.origin_offset
    else:
        arr = np.asarray(path)
        ids, n = _compact_ids(arr)
        off = 0
    T = len(ids)
    first = np.full(n, T, dtype=np.int64)
    last = np.full(n, -1, dtype=np.int64)
    idx = np.arange(T, dtype=np.int64)
    np.minimum.at(first, ids, idx)
    np.maximum.at(last, ids, idx)
    diff = np.zeros(T + 1, dtype=np.int64)
    span = last - first >= 2
    np.add.at(diff, first[span] + 1, 1)
    np.add.at(diff, last[span], -1)
    covered = np.cumsum(diff[:T]) > 0
    return np.flatnonzero(~covered).astype(np.int64) - off


# ---------------------------------------------------------------------------
# lattice walks

def lattice_srw(d: int, steps: int, rng: RngStream) -> LatticePath:
    """Simple random walk on Z^d from the origin; coords has steps+1 rows."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    gen = rng.generator()
    axes = gen.integers(0, d, size=steps)
    signs = gen.integers(0, 2, size=steps).astype(np.int64) * 2 - 1
    inc = np.zeros((steps + 1, d), dtype=np.int64)
    inc[np.arange(1, steps + 1), axes] = signs
    return LatticePath(np.cumsum(inc, axis=0))


@dataclass(frozen=True)
class TwoSidedLerw:
    """Two-sided loop-erased walk accepted on the non-intersection event.

    trunk row origin_offset is walk time 0; negative times are the reversed
    loop erasure of the second walk. Certification is window-relative:
    separation_ok records the bounding-box certificate (second halves of the
    two raw walks disjoint), attempts the rejection count.
    """

    trunk: LatticePath
    attempts: int
    separation_ok: bool


def two_sided_lerw(d: int, horizon: int, rng: RngStream,
                   max_attempts: int = 10000) -> TwoSidedLerw:
    """Rejection-sample the two-sided LERW at a finite horizon.

    Event checked: the loop erasure of the forward walk avoids the backward
    walk at all backward times >= 1, within the horizon window.
    """
    if d < 5:
        raise DomainError(f"two-sided construction needs d >= 5, got d={d}")
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    for attempt in range(1, max_attempts + 1):
        sub = rng.substream(attempt)
        fwd = lattice_srw(d, horizon, sub.substream(0))
        bwd = lattice_srw(d, horizon, sub.substream(1))
        le_fwd = loop_erase(fwd).coords
        both = np.concatenate([le_fwd, bwd.coords[1:]])
        ids, _ = _compact_ids(both)
        if np.intersect1d(ids[:len(le_fwd)], ids[len(le_fwd):]).size:
            continue
        le_bwd = loop_erase(bwd).coords
        trunk = np.concatenate([le_bwd[::-1][:-1], le_fwd])
        half = horizon // 2
        fhalf, bhalf = fwd.coords[half:], bwd.coords[half:]
        gap = np.maximum(fhalf.min(0) - bhalf.max(0), bhalf.min(0) - fhalf.max(0))
        return TwoSidedLerw(
            trunk=LatticePath(trunk, origin_offset=len(le_bwd) - 1),
            attempts=attempt,
            separation_ok=bool((gap > 0).any()),
        )
    raise StatisticalError(f"no two-sided acceptance in {max_attempts} attempts (d={d}, horizon={horizon})")


# ---------------------------------------------------------------------------
# return probabilities and their weighted sums

def _log_factorials(T: int) -> np.ndarray:
    # lf[k] = log k!; gammaln(k + 1) keeps k = 0 finite
    return gammaln(np.arange(T + 2, dtype=np.float64) + 1.0)


@lru_cache(maxsize=8)
def _heat_kernel_table_cached(d: int, T: int) -> np.ndarray:
    lf = _log_factorials(T)
    r1 = np.zeros(T + 1)
    even = np.arange(0, T + 1, 2)
    r1[even] = np.exp(lf[even] - 2 * lf[even // 2] - even * math.log(2.0))
    f = r1
    for j in range(2, d + 1):
        g = np.zeros(T + 1)
        logp, logq = math.log(1.0 / j), math.log((j - 1) / j)
        for t in range(0, T + 1, 2):
            ks = np.arange(0, t + 1, 2)
            logw = lf[t] - lf[ks] - lf[t - ks] + ks * logp + (t - ks) * logq
            g[t] = float(np.exp(logw) @ (r1[ks] * f[t - ks]))
        f = g
    return f


def heat_kernel_table(d: int, T: int, budget: int | None = None) -> np.ndarray:
    """Exact p_t(o,o) on Z^d for all t = 0..T.

    Conditioning on how many steps land in the last axis splits the count into
    a binomial mixture of a 1-D return probability and a (d-1)-dim walk, so a
    single O(d T^2) float recursion gives the whole table. All terms are
    nonnegative, so accumulated relative error stays near machine epsilon.
    """
    if d < 1 or T < 0:
        raise DomainError(f"need d >= 1 and T >= 0, got d={d}, T={T}")
    allowed = HEAT_KERNEL_DP_BUDGET if budget is None else budget
    cost = d * (T + 1) ** 2
    if cost > allowed:
        raise BudgetError("heat-kernel-dp", cost, allowed)
    return _heat_kernel_table_cached(d, T)


@dataclass(frozen=True)
class HeatKernelValue:
    value: float
    half_width: float  # 0 for exact mode
    mode: str          # "exact" | "mc"


def heat_kernel(d: int, t: int, mode: str = "auto", rng: RngStream | None = None,
                samples: int = 200_000, budget: int | None = None) -> HeatKernelValue:
    """Return probability p_t(o,o); exact DP within budget, else Monte Carlo."""
    if mode not in ("auto", "exact", "mc"):
        raise DomainError(f"unknown heat kernel mode {mode!r}")
    allowed = HEAT_KERNEL_DP_BUDGET if budget is None else budget
    cost = d * (t + 1) ** 2
    if mode == "exact" or (mode == "auto" and cost <= allowed):
        table = heat_kernel_table(d, t, budget=budget)
        return HeatKernelValue(float(table[t]), 0.0, "exact")
    if rng is None:
        raise DomainError("Monte Carlo heat kernel needs an rng stream")
    if t % 2 == 1:
        return HeatKernelValue(0.0, 0.0, "mc")
    gen = rng.generator()
    hits = 0
    done = 0
    batch = max(1, min(samples, 10 ** 7 // max(t, 1)))
    while done < samples:
        b = min(batch, samples - done)
        axes = gen.integers(0, d, size=(b, t))
        signs = gen.integers(0, 2, size=(b, t)).astype(np.int64) * 2 - 1
        at_origin = np.ones(b, dtype=bool)
        for a in range(d):
            disp = np.where(axes == a, signs, 0).sum(axis=1)
            at_origin &= disp == 0
        hits += int(at_origin.sum())
        done += b
    p = hits / samples
    half = 3.29 * math.sqrt(max(p * (1 - p), 1e-300) / samples)
    return HeatKernelValue(p, half, "mc")


@dataclass(frozen=True)
class ZValues:
    """Truncated sums Z_i = sum_t (t+1)^i p_t(o,o) with analytic tail bounds.

    Tail bound: p_t(o,o) <= C t^{-d/2}, with C = 1.25 * max(observed max of
    p_t t^{d/2} over 1 <= t <= T, asymptotic constant 2 (d / 4 pi)^{d/2}); then
    sum_{t>T} (t+1)^i t^{-d/2} <= (1 + 1/(T+1))^i T^{i+1-d/2} / (d/2 - i - 1).
    Convergence needs d >= 5 for i=1 and d >= 7 for i=2.
    """

    d: int
    T: int
    z1_truncated: float
    z2_truncated: float
    z1_tail: float
    z2_tail: float
    tail_constant: float

    @property
    def z1_upper(self) -> float:
        return self.z1_truncated + self.z1_tail

    @property
    def z2_upper(self) -> float:
        return self.z2_truncated + self.z2_tail


def z_truncated(d: int, T: int, order: int) -> float:
    """Truncation-only sum_(t<=T) (t+1)^order p_t(o,o); defined for every d."""
    if order < 0:
        raise DomainError("order must be >= 0")
    table = heat_kernel_table(d, T)
    t = np.arange(T + 1, dtype=np.float64)
    return float(((t + 1) ** order * table).sum())


def z_values(d: int, T: int) -> ZValues:
    if d < 7:
        raise DomainError(
            f"z_values needs d >= 7 (Z_1 tail converges from d=5, Z_2 from d=7); got d={d}")
    table = heat_kernel_table(d, T)
    t = np.arange(T + 1, dtype=np.float64)
    z1 = float(((t + 1) * table).sum())
    z2 = float(((t + 1) ** 2 * table).sum())
    tpos = t[1:]
    observed = float((table[1:] * tpos ** (d / 2)).max())
    asymptotic = 2.0 * (d / (4 * math.pi)) ** (d / 2)
    C = 1.25 * max(observed, asymptotic)
    infl = 1.0 + 1.0 / (T + 1)
    z1_tail = C * infl * T ** (2 - d / 2) / (d / 2 - 2)
    z2_tail = C * infl ** 2 * T ** (3 - d / 2) / (d / 2 - 3)
    return ZValues(d=d, T=T, z1_truncated=z1, z2_truncated=z2,
                   z1_tail=z1_tail, z2_tail=z2_tail, tail_constant=C)


# ---------------------------------------------------------------------------
# two-sided cut-time statistics

@dataclass(frozen=True)
class CutTimeSample:
    """One two-sided walk's T_0 and subsequent window-certified cut times."""

    t0: int
    cut_times_after: np.ndarray  # ascending walk times > t0
    horizon: int

    def t_n(self, n: int, margin: float = 0.9):
        """(value, censored) for the n-th cut time after T_0; n=0 is T_0 itself."""
        limit = margin * self.horizon
        if n == 0:
            return self.t0, self.t0 > limit
        if len(self.cut_times_after) < n:
            return None, True
        val = int(self.cut_times_after[n - 1])
        return val, val > limit


def sample_cut_times(d: int, horizon: int, rng: RngStream) -> CutTimeSample:
    """Sample S(-horizon..horizon), compute T_0 and cut times after it.

    T_0 is the last forward time whose site appears in the backward trace;
    cut times are window-relative over the full two-sided trace.
    """
    if d < 5:
        raise DomainError(f"cut-time statistics need a transient walk with d >= 5, got d={d}")
    fwd = lattice_srw(d, horizon, rng.substream(0))
    bwd = lattice_srw(d, horizon, rng.substream(1))
    full = np.concatenate([bwd.coords[::-1][:-1], fwd.coords])
    ids, n = _compact_ids(full)
    H = horizon
    bwd_mask = np.zeros(n, dtype=bool)
    bwd_mask[ids[:H + 1]] = True
    hits = np.flatnonzero(bwd_mask[ids[H:]])
    t0 = int(hits.max())  # time 0 is always a hit
    cuts = cut_times(LatticePath(full, origin_offset=H))
    return CutTimeSample(t0=t0, cut_times_after=cuts[cuts > t0], horizon=H)


def lerw_visit_profile(d: int, horizon: int, rng: RngStream) -> np.ndarray:
    """profile[k] = number of vertices of LE(S[0,k]) for one walk, k = 0..horizon."""
    walk = lattice_srw(d, horizon, rng)
    ids, n = _compact_ids(walk.coords)
    return _kernels.lerw_length_profile(ids, np.full(n, -1, dtype=np.int64))


def l_n_count(profile: np.ndarray, n: int) -> tuple[int, bool]:
    """L_n = #{k : |LE(S[0,k])| <= n} from a prefix-length profile, with a
    censoring flag when the count is still growing near the window end."""
    sizes = profile - 1  # path length in steps; a single point has size 0
    qualifying = np.flatnonzero(sizes <= n)
    count = int(len(qualifying))
    censored = bool(len(qualifying) and qualifying[-1] > 0.9 * (len(profile) - 1))
    return count, censored


# ---------------------------------------------------------------------------
# Kac return-time check

@dataclass(frozen=True)
class KacReport:
    mean_return: float
    half_width: float
    inverse_probability: float
    samples: int
    within_ci: bool


def kac_check(transition: np.ndarray, event, samples: int, rng: RngStream,
              step_cap: int = 10 ** 6) -> KacReport:
    """Empirical E[return time to E | start in E under pi] vs 1/pi(E).

    The chain must be finite, irreducible, and given by a row-stochastic
    matrix. Start states are drawn from the stationary law conditioned on E;
    the CI half-width is 3.29 standard errors (the 1e-3 significance used by
    every Monte Carlo harness here).
    """
    P = np.asarray(transition, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DomainError("transition matrix must be square")
    k = P.shape[0]
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise DomainError("transition matrix must be row-stochastic")
    event = np.asarray(sorted(set(int(e) for e in event)), dtype=np.int64)
    if event.size == 0 or event.min() < 0 or event.max() >= k:
        raise DomainError("event must be a nonempty subset of the state space")
    from scipy.sparse.csgraph import connected_components
    ncomp, _ = connected_components(P > 0, directed=True, connection="strong")
    if ncomp != 1:
        raise DomainError("chain is not irreducible; Kac identity needs ergodicity")
    # stationary law: left eigenvector for eigenvalue 1
    w, vecs = np.linalg.eig(P.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(vecs[:, i])
    pi = np.abs(pi) / np.abs(pi).sum()
    p_event = float(pi[event].sum())
    gen = rng.generator()
    pi_e = pi[event] / p_event
    states = event[gen.choice(len(event), size=samples, p=pi_e)]
    cum = np.cumsum(P, axis=1)
    in_event = np.zeros(k, dtype=bool)
    in_event[event] = True
    tau = np.zeros(samples, dtype=np.int64)
    active = np.ones(samples, dtype=bool)
    for _ in range(step_cap):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        u = gen.random(idx.size)
        nxt = np.minimum((cum[states[idx]] <= u[:, None]).sum(axis=1), k - 1)
        states[idx] = nxt
        tau[idx] += 1
        active[idx] = ~in_event[nxt]
    else:
        raise ContractError("Kac simulation exceeded its step cap")
    mean = float(tau.mean())
    half = 3.29 * float(tau.std(ddof=1)) / math.sqrt(samples)
    inv = 1.0 / p_event
    # a deterministic return time has a zero-width band, but the stationary
    # law comes from an eigensolve; give the comparison rounding headroom
    slack = 1e-9 * (1.0 + inv)
    return KacReport(mean_return=mean, half_width=half, inverse_probability=inv,
                     samples=samples, within_ci=bool(abs(mean - inv) <= half + slack))
