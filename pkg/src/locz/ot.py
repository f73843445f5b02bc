"""Exact discrete optimal transport on the bipartite transport polytope.

The solver is a primal network simplex: the basis is a spanning tree of the
complete bipartite graph between source and target atoms, potentials are
maintained on the tree, and arcs enter by block pricing. Long runs of
degenerate pivots switch pricing and ratio tests to Bland's smallest-index
rule, which cannot cycle.

Cost matrices are produced in row blocks by a :class:`CostKernel`, so no
global matrix is held unless it is small.
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .density import GridDensity1D, MaskedGrid2D, format_float
from .errors import BudgetExceededError, ConvergenceError, ParameterError

__all__ = [
    "DiscreteMeasure", "CostKernel", "TransportPlan", "atomize", "solve_exact",
    "reduced_costs", "separable_cost_value", "mask_boundary_segments",
    "distance_to_segments", "distance_to_boundary_field", "two_bump_2d",
    "write_plan_csv", "uniform_measure_like", "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 4096 * 4096
PRUNE_WEIGHT = 1e-15
# cost matrices up to this many entries are cached for the whole solve
_CACHE_ENTRIES = 1 << 23
_BLOCK_ENTRIES = 1 << 16
_BLAND_AFTER = 50


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms ``locations[k]`` carrying ``weights[k]``; weights sum to one.

    ``index`` optionally records which grid cell each atom came from.
    """

    locations: np.ndarray
    weights: np.ndarray
    index: np.ndarray | None = None

    def __post_init__(self):
        loc = np.array(self.locations, dtype=float)
        if loc.ndim == 1:
            loc = loc[:, None]
        w = np.array(self.weights, dtype=float).ravel()
        if loc.ndim != 2 or loc.shape[0] != w.size or w.size == 0:
            raise ParameterError("need one location per weight and at least one atom")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(w))):
            raise ParameterError("locations and weights must be finite")
        if np.any(w < 0):
            raise ParameterError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ParameterError(f"weights sum to {w.sum():.15g}, expected 1")
        loc.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.locations.shape[1]


def distance_to_segments(points, segments, block: int = 4096) -> np.ndarray:
    """Euclidean distance from each point to the nearest of the segments.

    ``segments`` has shape ``(s, 2, 2)``: start and end point of each segment.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    S = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    A, D = S[:, 0, :], S[:, 1, :] - S[:, 0, :]
    dd = np.einsum("ij,ij->i", D, D)
    out = np.empty(P.shape[0])
    for k0 in range(0, P.shape[0], block):
        Q = P[k0:k0 + block, None, :] - A[None, :, :]
        t = np.clip(np.einsum("psj,sj->ps", Q, D) / dd, 0.0, 1.0)
        R = Q - t[..., None] * D[None, :, :]
        out[k0:k0 + block] = np.sqrt(np.min(np.einsum("psj,psj->ps", R, R), axis=1))
    return out


@dataclass(frozen=True, eq=False)
class CostKernel:
    """Transport cost ``c(x, y)``.

    Use the constructors :meth:`squared_euclidean`, :meth:`periodized_1d` and
    :meth:`distance_to_boundary` rather than building one directly.
    """

    tag: str
    period: float = 1.0
    segments: np.ndarray | None = None

    @classmethod
    def squared_euclidean(cls) -> "CostKernel":
        return cls("squared_euclidean")

    @classmethod
    def periodized_1d(cls, period: float = 1.0) -> "CostKernel":
        if not period > 0:
            raise ParameterError(f"period must be positive, got {period}")
        return cls("periodized_1d", period=float(period))

    @classmethod
    def distance_to_boundary(cls, segments) -> "CostKernel":
        seg = np.array(segments, dtype=float).reshape(-1, 2, 2)
        if seg.shape[0] == 0:
            raise ParameterError("boundary needs at least one segment")
        seg.setflags(write=False)
        return cls("distance_to_boundary", segments=seg)

    @property
    def separable(self) -> bool:
        return self.tag == "distance_to_boundary"

    def parts(self, X, Y):
        """Per-point parts ``f(x)``, ``g(y)`` of a separable cost."""
        if not self.separable:
            raise ParameterError(f"kernel {self.tag} is not separable")
        return distance_to_segments(X, self.segments), distance_to_segments(Y, self.segments)

    def __call__(self, X, Y) -> np.ndarray:
        """Cost matrix between the rows of ``X`` and the rows of ``Y``."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if self.tag == "squared_euclidean":
            diff = X[:, None, :] - Y[None, :, :]
            return np.einsum("ijk,ijk->ij", diff, diff)
        if self.tag == "periodized_1d":
            if X.shape[1] != 1 or Y.shape[1] != 1:
                raise ParameterError("periodized kernel is defined in one dimension only")
            gap = np.abs(X[:, 0][:, None] - Y[:, 0][None, :])
            return np.minimum(gap, self.period - gap) ** 2
        if self.tag == "distance_to_boundary":
            f, g = self.parts(X, Y)
            return f[:, None] + g[None, :]
        raise ParameterError(f"unknown cost kernel tag {self.tag!r}")

    def pairs(self, X, Y) -> np.ndarray:
        """Cost of each aligned pair ``(X[k], Y[k])``."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if self.tag == "squared_euclidean":
            return np.sum((X - Y) ** 2, axis=1)
        if self.tag == "periodized_1d":
            gap = np.abs(X[:, 0] - Y[:, 0])
            return np.minimum(gap, self.period - gap) ** 2
        f, g = self.parts(X, Y)
        return f + g


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Basic optimal coupling in sparse form, with its dual certificate.

    ``rows``, ``cols``, ``mass`` list the basic arcs (degenerate ones carry
    zero mass). ``u`` and ``v`` are potentials with ``u[i] + v[j] = c[i, j]``
    on every basic arc.
    """

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    cost: float
    u: np.ndarray
    v: np.ndarray
    iterations: int
    basis_size: int
    degenerate_pivots: int

    @property
    def shape(self):
        return self.u.size, self.v.size

    def to_dense(self) -> np.ndarray:
        P = np.zeros(self.shape)
        np.add.at(P, (self.rows, self.cols), self.mass)
        return P

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.mass > 0))


def atomize(u, prune: float = PRUNE_WEIGHT) -> DiscreteMeasure:
    """One atom per cell center with weight ``value * cell measure``.

    Atoms lighter than ``prune`` are dropped and the rest renormalized.
    """
    if isinstance(u, GridDensity1D):
        locs = u.centers[:, None]
        cells = np.arange(u.n)
    elif isinstance(u, MaskedGrid2D):
        locs = u.cell_centers()
        cells = np.flatnonzero(u.mask.ravel())
    else:
        raise TypeError(f"cannot atomize {type(u).__name__}")
    w = u.cell_values() * u.cell_measure
    if abs(w.sum() - 1.0) > 1e-10:
        raise ParameterError(f"atomize needs unit mass, got {w.sum():.15g}")
    keep = w > prune
    w = w[keep]
    return DiscreteMeasure(locs[keep], w / w.sum(), cells[keep])


class _CostSource:
    def __init__(self, X, Y, kernel):
        self.X, self.Y, self.kernel = X, Y, kernel
        self.m, self.n = X.shape[0], Y.shape[0]
        self.rows_per_block = max(1, _BLOCK_ENTRIES // self.n)
        self.C = kernel(X, Y) if self.m * self.n <= _CACHE_ENTRIES else None

    def block(self, r0, r1):
        if self.C is not None:
            return self.C[r0:r1]
        return self.kernel(self.X[r0:r1], self.Y)

    def arc(self, i, j):
        if self.C is not None:
            return float(self.C[i, j])
        return float(self.kernel.pairs(self.X[i:i + 1], self.Y[j:j + 1])[0])


class _NetworkSimplex:
    """Spanning-tree basis over nodes ``0..m-1`` (sources) and ``m..m+n-1`` (sinks).

    Each non-root node stores the flow on the tree edge to its parent.
    """

    def __init__(self, a, b, costs: _CostSource):
        self.a, self.b, self.costs = a, b, costs
        self.m, self.n = a.size, b.size
        N = self.m + self.n
        self.parent = np.full(N, -1, dtype=np.int64)
        self.depth = np.zeros(N, dtype=np.int64)
        self.pflow = np.zeros(N)
        self.pot = np.zeros(N)
        self.adj = [set() for _ in range(N)]
        self.iterations = 0
        self.degenerate = 0
        self._rebuild_tree(self._northwest_corner())
        c = costs.block(0, min(self.m, costs.rows_per_block))
        self.tol = 1e-12 * max(1.0, float(np.max(np.abs(c))))

    def _northwest_corner(self):
        ra, rb = self.a.copy(), self.b.copy()
        flows = {}
        i = j = 0
        m, n = self.m, self.n
        while True:
            f = min(ra[i], rb[j])
            flows[(i, j)] = f
            self.adj[i].add(m + j)
            self.adj[m + j].add(i)
            ra[i] -= f
            rb[j] -= f
            if i == m - 1 and j == n - 1:
                return flows
            if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
                i += 1
            else:
                j += 1

    def arc_of(self, child):
        p = self.parent[child]
        return (child, p - self.m) if child < self.m else (p, child - self.m)

    def tree_flows(self):
        return {self.arc_of(c): self.pflow[c] for c in np.flatnonzero(self.parent >= 0)}

    def _rebuild_tree(self, flows):
        """Set parents, depths, edge flows and potentials by BFS from node 0."""
        m = self.m
        self.parent[:] = -1
        self.parent[0] = 0
        self.depth[0] = 0
        self.pot[0] = 0.0
        queue = deque([0])
        seen = 1
        while queue:
            node = queue.popleft()
            for nb in self.adj[node]:
                if self.parent[nb] != -1:
                    continue
                self.parent[nb] = node
                self.depth[nb] = self.depth[node] + 1
                i, j = (nb, node - m) if nb < m else (node, nb - m)
                self.pflow[nb] = flows[(i, j)]
                c = self.costs.arc(i, j)
                self.pot[nb] = c - self.pot[node]
                queue.append(nb)
                seen += 1
        self.parent[0] = -1
        if seen != m + self.n:
            raise ConvergenceError("basis is not a spanning tree")

    def _price(self, start_block, bland):
        """Return an entering arc ``(i, j, reduced_cost)`` or None at optimality."""
        m, n = self.m, self.n
        rpb = self.costs.rows_per_block
        nblocks = -(-m // rpb)
        v = self.pot[m:]
        order = range(nblocks) if bland else [(start_block + k) % nblocks for k in range(nblocks)]
        for blk in order:
            r0, r1 = blk * rpb, min(m, (blk + 1) * rpb)
            rc = self.costs.block(r0, r1) - self.pot[r0:r1, None] - v[None, :]
            if bland:
                hits = np.flatnonzero(rc.ravel() < -self.tol)
                if hits.size:
                    k = hits[0]
                    return r0 + k // n, k % n, float(rc.flat[k]), blk
            else:
                k = int(np.argmin(rc))
                if rc.flat[k] < -self.tol:
                    return r0 + k // n, k % n, float(rc.flat[k]), blk
        return None

    def _pivot(self, i, j, rc, bland):
        m, n = self.m, self.n
        parent, depth = self.parent, self.depth
        si, sj = i, m + j
        path_i, path_j = [si], [sj]
        x, y = si, sj
        while x != y:
            if depth[x] >= depth[y]:
                x = parent[x]
                path_i.append(x)
            else:
                y = parent[y]
                path_j.append(y)
        edges = path_j[:-1] + path_i[-2::-1]
        minus = edges[0::2]
        theta = min(self.pflow[c] for c in minus)
        candidates = [c for c in minus if self.pflow[c] <= theta]
        if bland:
            def arc_index(c):
                ai, aj = self.arc_of(c)
                return ai * n + aj
            leave = min(candidates, key=arc_index)
        else:
            leave = candidates[-1]
        for k, c in enumerate(edges):
            self.pflow[c] += theta if k % 2 else -theta
        if theta <= 0:
            self.degenerate += 1
        on_i_side = leave in set(path_i[:-1])
        q, e = (si, sj) if on_i_side else (sj, si)

        # reverse parent pointers along q -> leave
        chain = [q]
        while chain[-1] != leave:
            chain.append(parent[chain[-1]])
        old_parent_leave = parent[leave]
        old_flows = [self.pflow[c] for c in chain]
        self.adj[leave].discard(old_parent_leave)
        self.adj[old_parent_leave].discard(leave)
        self.adj[q].add(e)
        self.adj[e].add(q)
        for t in range(len(chain) - 1, 0, -1):
            parent[chain[t]] = chain[t - 1]
            self.pflow[chain[t]] = old_flows[t - 1]
        parent[q] = e
        self.pflow[q] = theta

        # subtree under q: new depths, potentials shifted by the reduced cost
        src_shift = rc if on_i_side else -rc
        depth[q] = depth[e] + 1
        stack = [q]
        while stack:
            node = stack.pop()
            self.pot[node] += src_shift if node < m else -src_shift
            for nb in self.adj[node]:
                if nb != parent[node]:
                    depth[nb] = depth[node] + 1
                    stack.append(nb)
        return theta > 0

    def run(self, max_iter):
        block = 0
        streak = 0
        while True:
            bland = streak >= _BLAND_AFTER
            entering = self._price(block, bland)
            if entering is None:
                break
            i, j, rc, block = entering
            if self.iterations >= max_iter:
                raise ConvergenceError(
                    f"network simplex not optimal after {max_iter} pivots "
                    f"(last reduced cost {rc:.3e})")
            progressed = self._pivot(i, j, rc, bland)
            streak = 0 if progressed else streak + 1
            self.iterations += 1
        # fresh potentials from the final tree remove accumulated drift
        self._rebuild_tree(self.tree_flows())

    def plan(self) -> TransportPlan:
        m = self.m
        kids = np.flatnonzero(self.parent >= 0)
        rows = np.empty(kids.size, dtype=np.int64)
        cols = np.empty(kids.size, dtype=np.int64)
        for k, c in enumerate(kids):
            rows[k], cols[k] = self.arc_of(c)
        mass = np.maximum(self.pflow[kids], 0.0)
        arc_cost = self.costs.kernel.pairs(self.costs.X[rows], self.costs.Y[cols])
        return TransportPlan(
            rows=rows, cols=cols, mass=mass, cost=float(np.dot(mass, arc_cost)),
            u=self.pot[:m].copy(), v=self.pot[m:].copy(), iterations=self.iterations,
            basis_size=int(kids.size), degenerate_pivots=self.degenerate)


def solve_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, kernel: CostKernel,
                budget: int = DEFAULT_BUDGET, max_iter: int | None = None) -> TransportPlan:
    """Optimal coupling between ``mu`` and ``nu`` for the cost ``kernel``.

    Atoms lighter than the pruning threshold are removed first; the returned
    plan indexes the atoms of the original measures.
    """
    if mu.dim != nu.dim:
        raise ParameterError(f"measures live in dimensions {mu.dim} and {nu.dim}")
    m_all, n_all = len(mu), len(nu)
    if m_all * n_all > budget:
        raise BudgetExceededError(
            f"{m_all} x {n_all} transport problem exceeds the budget of {budget} arcs; "
            "coarsen the grids or use separable_cost_value for separable costs")
    ki = np.flatnonzero(mu.weights > PRUNE_WEIGHT)
    kj = np.flatnonzero(nu.weights > PRUNE_WEIGHT)
    a = mu.weights[ki] / mu.weights[ki].sum()
    b = nu.weights[kj] / nu.weights[kj].sum()
    costs = _CostSource(mu.locations[ki], nu.locations[kj], kernel)
    solver = _NetworkSimplex(a, b, costs)
    if max_iter is None:
        max_iter = 200 * (a.size + b.size) + 10000
    solver.run(max_iter)
    p = solver.plan()
    u = np.zeros(m_all)
    v = np.zeros(n_all)
    u[ki], v[kj] = p.u, p.v
    if ki.size < m_all or kj.size < n_all:
        # pruned atoms get the tightest feasible potential
        if ki.size < m_all:
            drop = np.setdiff1d(np.arange(m_all), ki)
            u[drop] = np.min(kernel(mu.locations[drop], nu.locations[kj]) - v[kj][None, :], axis=1)
        if kj.size < n_all:
            drop = np.setdiff1d(np.arange(n_all), kj)
            v[drop] = np.min(kernel(mu.locations, nu.locations[drop]) - u[:, None], axis=0)
    return TransportPlan(rows=ki[p.rows], cols=kj[p.cols], mass=p.mass, cost=p.cost, u=u, v=v,
                         iterations=p.iterations, basis_size=p.basis_size,
                         degenerate_pivots=p.degenerate_pivots)


def reduced_costs(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure,
                  kernel: CostKernel) -> np.ndarray:
    """Dense matrix ``c[i, j] - u[i] - v[j]``; nonnegative at optimality."""
    return kernel(mu.locations, nu.locations) - plan.u[:, None] - plan.v[None, :]


def separable_cost_value(mu: DiscreteMeasure, nu: DiscreteMeasure, f, g) -> float:
    """Transport cost of ``c(x, y) = f(x) + g(y)``, identical for every coupling.

    ``f`` and ``g`` are per-atom arrays or callables on atom locations.
    """
    fv = np.asarray(f(mu.locations) if callable(f) else f, dtype=float)
    gv = np.asarray(g(nu.locations) if callable(g) else g, dtype=float)
    return float(np.dot(fv, mu.weights) + np.dot(gv, nu.weights))


def mask_boundary_segments(grid: MaskedGrid2D) -> np.ndarray:
    """Cell edges separating masked cells from unmasked cells or the outside."""
    mask = grid.mask
    padded = np.pad(mask, 1, constant_values=False)
    xe = grid.xint.x0 + grid.hx * np.arange(grid.nx + 1)
    ye = grid.yint.x0 + grid.hy * np.arange(grid.ny + 1)
    segs = []
    core = padded[1:-1, 1:-1]
    # (neighbor offset, segment endpoints as functions of the cell index)
    sides = [
        ((-1, 0), lambda i, j: ((xe[i], ye[j]), (xe[i], ye[j + 1]))),
        ((1, 0), lambda i, j: ((xe[i + 1], ye[j]), (xe[i + 1], ye[j + 1]))),
        ((0, -1), lambda i, j: ((xe[i], ye[j]), (xe[i + 1], ye[j]))),
        ((0, 1), lambda i, j: ((xe[i], ye[j + 1]), (xe[i + 1], ye[j + 1]))),
    ]
    for (di, dj), seg in sides:
        nb = padded[1 + di:1 + di + grid.nx, 1 + dj:1 + dj + grid.ny]
        for i, j in zip(*np.nonzero(core & ~nb)):
            segs.append(seg(i, j))
    return np.array(segs, dtype=float)


def distance_to_boundary_field(grid: MaskedGrid2D) -> np.ndarray:
    """Distance from each masked cell center (C order) to the mask boundary."""
    from .hm1 import check_mask_topology

    if not grid.mask.any():
        raise ParameterError("empty mask")
    check_mask_topology(grid.mask)
    return distance_to_segments(grid.cell_centers(), mask_boundary_segments(grid))


def _inside_mask(grid: MaskedGrid2D, point) -> bool:
    i = int(np.floor((point[0] - grid.xint.x0) / grid.hx))
    j = int(np.floor((point[1] - grid.yint.x0) / grid.hy))
    return 0 <= i < grid.nx and 0 <= j < grid.ny and bool(grid.mask[i, j])


def two_bump_2d(grid: MaskedGrid2D, d: float, width: float, center=None,
                angle: float = 0.0) -> MaskedGrid2D:
    """Two isotropic Gaussian bumps with peaks ``d`` apart, masked and normalized.

    The peaks sit at ``center +- (d/2) e`` with ``e`` the unit vector at
    ``angle``; ``center`` defaults to the bounding-box center.
    """
    if not width > 0:
        raise ParameterError(f"width must be positive, got {width}")
    if center is None:
        center = (0.5 * (grid.xint.x0 + grid.xint.x1), 0.5 * (grid.yint.x0 + grid.yint.x1))
    c = np.asarray(center, dtype=float)
    e = np.array([np.cos(angle), np.sin(angle)])
    peaks = [c - 0.5 * d * e, c + 0.5 * d * e]
    for pk in peaks:
        if not _inside_mask(grid, pk):
            raise ParameterError(f"bump center {tuple(pk)} lies outside the mask")
    X, Y = np.meshgrid(grid.xc, grid.yc, indexing="ij")
    vals = sum(np.exp(-((X - pk[0]) ** 2 + (Y - pk[1]) ** 2) / width ** 2) for pk in peaks)
    return grid.with_values(np.where(grid.mask, vals, 0.0)).normalized()


def write_plan_csv(plan: TransportPlan, path) -> int:
    """Write the positive-mass arcs as ``i,j,mass``; return the row count."""
    keep = plan.mass > 0
    order = np.lexsort((plan.cols[keep], plan.rows[keep]))
    rows, cols, mass = plan.rows[keep][order], plan.cols[keep][order], plan.mass[keep][order]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "mass"])
        for i, j, x in zip(rows, cols, mass):
            w.writerow([int(i), int(j), format_float(x)])
    return int(keep.sum())


def uniform_measure_like(u) -> DiscreteMeasure:
    """Atomized uniform density on the same grid as ``u``."""
    if isinstance(u, GridDensity1D):
        return atomize(GridDensity1D(u.interval, np.full(u.n, 1.0 / u.measure)))
    return atomize(u.with_values(np.where(u.mask, 1.0 / u.measure, 0.0)))
