"""Clusterings of a grid domain, universe membership checkers and generators."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .domain import DiscreteDistribution, DomainError, MetricSpace

UNIVERSES = ("C", "CC", "B", "CV", "BV", "Intervals", "RandomPathCycle")


class Clustering:
    """A partition of ``space`` with one representative point per cell."""

    space: MetricSpace

    @property
    def num_cells(self) -> int:
        raise NotImplementedError

    @property
    def rep_coords(self) -> np.ndarray:
        raise NotImplementedError

    def cell_of(self, coords) -> np.ndarray:
        raise NotImplementedError

    @property
    def rep_index(self) -> np.ndarray:
        return self.space.index(self.rep_coords)

    def rep_of(self, coords) -> np.ndarray:
        """Flat index of rep(gamma(x)) for each point."""
        return self.rep_index[self.cell_of(coords)]

    @property
    def gamma(self) -> np.ndarray:
        if self.space.size > 5_000_000:
            raise DomainError("domain too large to materialize the cell map")
        return self.cell_of(self.space.coords(np.arange(self.space.size)))

    def cell_points(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.gamma == i)

    def cells(self) -> list[np.ndarray]:
        g = self.gamma
        order = np.argsort(g, kind="stable")
        bounds = np.searchsorted(g[order], np.arange(self.num_cells + 1))
        return [order[bounds[i] : bounds[i + 1]] for i in range(self.num_cells)]


class GridClustering(Clustering):
    """Clustering given by an explicit cell-index array over the domain."""

    def __init__(self, space: MetricSpace, gamma, reps=None, rng: np.random.Generator | None = None):
        g = np.asarray(gamma, dtype=np.int64).ravel()
        if g.size != space.size:
            raise DomainError("cell map does not cover the domain")
        # relabel cells 0..k-1 in order of first appearance
        _, first, inv = np.unique(g, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        relabel = np.empty_like(order)
        relabel[order] = np.arange(order.size)
        g = relabel[inv.ravel()]
        self.space = space
        self._gamma = g
        self._gamma.setflags(write=False)
        k = order.size
        if reps is None:
            if rng is None:
                # lexicographically smallest point: first occurrence in row-major order
                reps = np.sort(first)
            else:
                srt = np.argsort(g, kind="stable")
                bounds = np.searchsorted(g[srt], np.arange(k + 1))
                pick = bounds[:-1] + np.floor(rng.random(k) * np.diff(bounds)).astype(np.int64)
                reps = srt[pick]
        reps = np.asarray(reps, dtype=np.int64)
        if reps.size != k or np.any(g[reps] != np.arange(k)):
            raise DomainError("each representative must lie in its own cell")
        self._reps = reps

    @property
    def num_cells(self) -> int:
        return self._reps.size

    @property
    def gamma(self) -> np.ndarray:
        return self._gamma

    @property
    def rep_index(self) -> np.ndarray:
        return self._reps

    @property
    def rep_coords(self) -> np.ndarray:
        return self.space.coords(self._reps)

    def cell_of(self, coords) -> np.ndarray:
        return self._gamma[self.space.index(coords)]

    def breakpoints(self) -> list[int]:
        """Interval form on [n]: starts of all cells but the first."""
        return [int(i) for i in np.flatnonzero(np.diff(self._gamma)) + 1]


class VoronoiClustering(Clustering):
    """Nearest-seed cells under squared Euclidean lattice distance.

    Ties go to the lowest seed index, which keeps every cell an intersection
    of half-spaces (so lattice-convex).  The seeds are the representatives.
    """

    def __init__(self, space: MetricSpace, seeds):
        s = np.asarray(seeds, dtype=np.int64)
        space.check(s)
        if len({tuple(x) for x in s}) != len(s):
            raise DomainError("seeds must be distinct")
        self.space = space
        self.seeds = s

    @property
    def num_cells(self) -> int:
        return len(self.seeds)

    @property
    def rep_coords(self) -> np.ndarray:
        return self.seeds

    def cell_of(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64)
        self.space.check(c)
        flat = c.reshape(-1, self.space.d)
        out = np.empty(len(flat), dtype=np.int64)
        step = max(1, 2_000_000 // max(1, self.num_cells))
        for a in range(0, len(flat), step):
            diff = flat[a : a + step, None, :] - self.seeds[None, :, :]
            out[a : a + step] = np.argmin((diff * diff).sum(axis=-1), axis=1)
        return out.reshape(c.shape[:-1])

    def halfplanes(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer constraints a.x < b (strict) or a.x <= b describing cell i."""
        si = self.seeds[i]
        a, b, strict = [], [], []
        for j, sj in enumerate(self.seeds):
            if j == i:
                continue
            # |x-si|^2 vs |x-sj|^2  <=>  2(sj-si).x vs |sj|^2-|si|^2
            a.append(2 * (sj - si))
            b.append(int(sj @ sj - si @ si))
            strict.append(j < i)
        return np.array(a).reshape(-1, self.space.d), np.array(b), np.array(strict, dtype=bool)

    def lattice_extents_2d(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Exact lo/hi lattice coordinates of cell i on a 2-D grid, column by column."""
        if self.space.d != 2:
            raise DomainError("exact extents are implemented for d = 2")
        n = self.space.n
        A, B, strict = self.halfplanes(i)
        x = np.arange(n, dtype=np.int64)
        ylo = np.zeros(n, dtype=np.int64)
        yhi = np.full(n, n - 1, dtype=np.int64)
        alive = np.ones(n, dtype=bool)
        for (ax, ay), b, st in zip(A, B, strict):
            rhs = b - ax * x  # ay * y (<|<=) rhs
            if ay == 0:
                ok = (0 < rhs) if st else (0 <= rhs)
                alive &= ok
                continue
            if ay > 0:
                bound = np.floor_divide(rhs, ay)
                if st:
                    bound = np.where(rhs % ay == 0, bound - 1, bound)
                yhi = np.minimum(yhi, bound)
            else:
                # y (>|>=) rhs / ay
                num, den = -rhs, -ay
                bound = -np.floor_divide(-num, den)
                if st:
                    bound = np.where(num % den == 0, bound + 1, bound)
                ylo = np.maximum(ylo, bound)
        alive &= ylo <= yhi
        cols = np.flatnonzero(alive)
        if cols.size == 0:
            raise DomainError("empty cell")
        lo = np.array([cols[0], ylo[alive].min()])
        hi = np.array([cols[-1], yhi[alive].max()])
        return lo, hi


# ---------------------------------------------------------------------------
# membership checkers


def _neighbors(space: MetricSpace, idx: int):
    c = np.unravel_index(idx, space.shape)
    for ax in range(space.d):
        for s in (-1, 1):
            v = c[ax] + s
            if 0 <= v < space.n:
                cc = list(c)
                cc[ax] = v
                yield int(np.ravel_multi_index(tuple(cc), space.shape))


def is_connected_set(space: MetricSpace, idx) -> bool:
    """BFS over the grid graph (unit l1 steps) restricted to the set."""
    members = set(int(i) for i in np.asarray(idx).ravel())
    if not members:
        return False
    start = next(iter(members))
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        for v in _neighbors(space, u):
            if v in members and v not in seen:
                seen.add(v)
                todo.append(v)
    return len(seen) == len(members)


def _hull_2d(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counterclockwise, exact integer arithmetic."""
    p = sorted({(int(a), int(b)) for a, b in pts})
    if len(p) <= 2:
        return np.array(p)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for q in p:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list = []
    for q in reversed(p):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.array(lower[:-1] + upper[:-1])


def hull_lattice_points_2d(pts: np.ndarray) -> np.ndarray:
    """All lattice points of conv(pts), as coordinates."""
    hull = _hull_2d(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    xs, ys = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    cand = np.stack([xs.ravel(), ys.ravel()], axis=1)
    if len(hull) == 1:
        return hull
    inside = np.ones(len(cand), dtype=bool)
    m = len(hull)
    for k in range(m):
        a, b = hull[k], hull[(k + 1) % m]
        cr = (b[0] - a[0]) * (cand[:, 1] - a[1]) - (b[1] - a[1]) * (cand[:, 0] - a[0])
        inside &= cr >= 0
    return cand[inside]


def is_lattice_convex(space: MetricSpace, idx) -> bool:
    """Does the set equal the lattice points of its convex hull?"""
    idx = np.unique(np.asarray(idx).ravel())
    if idx.size <= 1:
        return idx.size == 1
    c = space.coords(idx)
    if space.d == 1:
        return int(c.max() - c.min() + 1) == idx.size
    if space.d == 2:
        return len(hull_lattice_points_2d(c)) == idx.size
    raise DomainError("lattice convexity check implemented for d <= 2")


def is_box_set(space: MetricSpace, idx) -> bool:
    idx = np.unique(np.asarray(idx).ravel())
    c = space.coords(idx)
    return idx.size > 0 and int(np.prod(c.max(axis=0) - c.min(axis=0) + 1)) == idx.size


def ball_lattice_points(space: MetricSpace, center, radius_units: float) -> np.ndarray:
    """Lattice points within Euclidean distance radius_units (lattice steps) of center."""
    r = int(np.floor(radius_units))
    axes = [np.arange(max(0, c - r), min(space.n, c + r + 1)) for c in center]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, space.d)
    d2 = ((grid - np.asarray(center)) ** 2).sum(axis=1)
    return grid[d2 <= radius_units**2 + 1e-9]


def inner_ball_ok(clustering: Clustering, i: int, delta: float) -> bool:
    """Lattice points of the Euclidean ball B(rep_i, delta) all lie in cell i.

    delta is measured in cube units (the whole side has length 1).
    """
    sp = clustering.space
    units = delta * (sp.n - 1)
    h = clustering.rep_coords[i]
    ball = ball_lattice_points(sp, h, units)
    if ball.shape[0] == 0:
        return False
    # the ball must also fit inside the domain
    if np.any(h - units < 0) or np.any(h + units > sp.n - 1):
        return False
    return bool(np.all(clustering.cell_of(ball) == i))


def check_universe(clustering: Clustering, tag: str, delta: float | None = None) -> bool:
    """Does every cell satisfy the shape constraints of the universe?"""
    sp = clustering.space
    if tag in ("CV", "BV"):
        if delta is None:
            raise DomainError("inner-ball universes need delta")
        if not all(inner_ball_ok(clustering, i, delta) for i in range(clustering.num_cells)):
            return False
        if tag == "BV":
            return all(is_box_set(sp, c) for c in clustering.cells())
        if isinstance(clustering, VoronoiClustering):
            return True  # half-space intersections by construction
        return all(is_lattice_convex(sp, c) for c in clustering.cells())
    cells = clustering.cells()
    if tag in ("Intervals", "RandomPathCycle") and sp.d != 1:
        return False
    if tag == "Intervals":
        return all(is_lattice_convex(sp, c) for c in cells)
    if tag == "RandomPathCycle":
        return True
    if tag == "C":
        return all(is_connected_set(sp, c) for c in cells)
    if tag == "CC":
        return all(is_connected_set(sp, c) and is_lattice_convex(sp, c) for c in cells)
    if tag == "B":
        return all(is_box_set(sp, c) for c in cells)
    raise DomainError(f"unknown universe {tag!r}")


# ---------------------------------------------------------------------------
# generators


def interval_clustering(n: int, breakpoints) -> GridClustering:
    g = np.zeros(n, dtype=np.int64)
    for b in sorted(breakpoints):
        if not 0 < b < n:
            raise DomainError("breakpoints must lie in 1..n-1")
        g[b:] += 1
    return GridClustering(MetricSpace(n), g)


def random_intervals(n: int, rng: np.random.Generator, cells: int | None = None) -> GridClustering:
    k = int(rng.integers(1, n + 1)) if cells is None else cells
    cuts = rng.choice(np.arange(1, n), size=k - 1, replace=False) if k > 1 else []
    return interval_clustering(n, cuts)


def box_grid(space: MetricSpace, side: int | tuple[int, ...]) -> GridClustering:
    sides = (side,) * space.d if isinstance(side, int) else tuple(side)
    c = space.coords(np.arange(space.size))
    blocks = c // np.array(sides)
    per = [-(-space.n // s) for s in sides]
    return GridClustering(space, np.ravel_multi_index(tuple(blocks.T), per))


def kd_split(space: MetricSpace, rng: np.random.Generator, leaves: int, min_side: int = 1) -> GridClustering:
    """Random axis-aligned recursive splits (a decision-tree clustering)."""
    boxes = [(np.zeros(space.d, dtype=np.int64), np.full(space.d, space.n - 1, dtype=np.int64))]
    tries = 0
    while len(boxes) < leaves and tries < 50 * leaves:
        tries += 1
        j = int(rng.integers(len(boxes)))
        lo, hi = boxes[j]
        ax = int(rng.integers(space.d))
        if hi[ax] - lo[ax] + 1 < 2 * min_side:
            continue
        cut = int(rng.integers(lo[ax] + min_side, hi[ax] - min_side + 2))
        a_hi, b_lo = hi.copy(), lo.copy()
        a_hi[ax], b_lo[ax] = cut - 1, cut
        boxes[j] = (lo, a_hi)
        boxes.append((b_lo, hi))
    shape = space.shape
    g = np.zeros(shape, dtype=np.int64)
    for k, (lo, hi) in enumerate(boxes):
        g[tuple(slice(a, b + 1) for a, b in zip(lo, hi))] = k
    return GridClustering(space, g.ravel())


def connected_blobs(space: MetricSpace, rng: np.random.Generator, cells: int) -> GridClustering:
    """Random multi-source region growing; every cell is connected, rarely convex."""
    seeds = rng.choice(space.size, size=cells, replace=False)
    g = np.full(space.size, -1, dtype=np.int64)
    g[seeds] = np.arange(cells)
    frontier = [(int(s), k) for k, s in enumerate(seeds)]
    while frontier:
        j = int(rng.integers(len(frontier)))
        frontier[j], frontier[-1] = frontier[-1], frontier[j]
        u, k = frontier.pop()
        for v in _neighbors(space, u):
            if g[v] < 0:
                g[v] = k
                frontier.append((v, k))
    return GridClustering(space, g)


def _spread_seeds(space: MetricSpace, rng, cells: int, min_gap: float, margin: float, attempts=20000):
    seeds: list = []
    for _ in range(attempts):
        if len(seeds) == cells:
            break
        s = rng.integers(int(np.ceil(margin)), int(space.n - 1 - np.ceil(margin)) + 1, size=space.d)
        if all(((s - t) ** 2).sum() > min_gap**2 for t in seeds):
            seeds.append(s)
    if len(seeds) < cells:
        raise DomainError("could not place seeds with the requested spacing")
    return np.array(seeds)


def convex_grid_cells(space: MetricSpace, rng: np.random.Generator, cells: int, attempts: int = 50) -> GridClustering:
    """Lattice Voronoi cells materialized on the grid, kept only if all are connected."""
    for _ in range(attempts):
        seeds = rng.choice(space.size, size=cells, replace=False)
        vor = VoronoiClustering(space, space.coords(seeds))
        g = GridClustering(space, vor.gamma)
        if check_universe(g, "CC"):
            return g
    raise DomainError("failed to generate a connected convex clustering")


def inner_ball_cells(space: MetricSpace, rng: np.random.Generator, cells: int, delta: float) -> VoronoiClustering:
    """Voronoi cells of well-separated seeds; each contains the delta-ball of its seed."""
    units = delta * (space.n - 1)
    seeds = _spread_seeds(space, rng, cells, min_gap=2 * units + 2, margin=units + 1)
    return VoronoiClustering(space, seeds)


def generate_adversarial_clustering(tag: str, params: dict, seed: int) -> Clustering:
    rng = np.random.default_rng(seed)
    d = int(params.get("d", 1))
    n = int(params.get("n", 0))
    if tag == "Intervals":
        if "breakpoints" in params:
            c = interval_clustering(n, params["breakpoints"])
        else:
            c = random_intervals(n, rng, params.get("cells"))
        if "R" in params:
            c = GridClustering(MetricSpace(n, 1, kind="threshold", R=int(params["R"])), c.gamma)
        return c
    if tag in ("CV", "BV"):
        bits = int(params.get("bits", 12))
        cube = MetricSpace.cube(d, bits, p=float(params.get("p", 2.0)))
        delta = float(params["delta"])
        if tag == "CV":
            return inner_ball_cells(cube, rng, int(params.get("cells", 8)), delta)
        per_axis = int(params.get("per_axis", 2))
        side = -(-cube.n // per_axis)
        if side / 2 < delta * (cube.n - 1) + 1:
            raise DomainError("boxes too small for the inner ball")
        g = box_grid(cube, side)
        # put each representative at its box center
        reps = []
        for cell in g.cells():
            c = cube.coords(cell)
            reps.append(cube.index((c.min(axis=0) + c.max(axis=0)) // 2))
        return GridClustering(cube, g.gamma, reps=np.array(reps))
    space = MetricSpace(n, d, p=float(params.get("p", 1.0)))
    if tag == "B":
        if "side" in params:
            return box_grid(space, params["side"])
        return kd_split(space, rng, int(params.get("cells", 8)), int(params.get("min_side", 1)))
    if tag == "C":
        return connected_blobs(space, rng, int(params.get("cells", 8)))
    if tag == "CC":
        return convex_grid_cells(space, rng, int(params.get("cells", 8)))
    raise DomainError(f"no generator for universe {tag!r}")


# ---------------------------------------------------------------------------
# random path / cycle clusterings


@dataclass(frozen=True)
class RandomClusterDraw:
    kind: str
    n: int
    rho: float
    kept: np.ndarray = field(repr=False)  # kept[i]: edge (i, i+1 mod n) survives
    labels: np.ndarray = field(repr=False)
    clustering: GridClustering = field(repr=False)

    @property
    def num_cells(self) -> int:
        return self.clustering.num_cells


def components_from_kept(kept: np.ndarray, cyclic: bool) -> np.ndarray:
    """Component labels of the path/cycle subgraph with the given surviving edges."""
    kept = np.asarray(kept, dtype=bool)
    n = kept.size
    start = np.ones(n, dtype=bool)
    start[1:] = ~kept[:-1]
    labels = np.cumsum(start) - 1
    if cyclic and kept[-1] and labels[-1] != 0:
        labels[labels == labels[-1]] = 0
    return labels


def draw_random_clustering(
    kind: str, n: int, rho: float, seed: int, kept: np.ndarray | None = None
) -> RandomClusterDraw:
    if kind not in ("path", "cycle"):
        raise DomainError("kind must be 'path' or 'cycle'")
    if n < 2 or not 0 < rho <= 1:
        raise DomainError("need n >= 2 and rho in (0, 1]")
    rng = np.random.default_rng(seed)
    draws = rng.random(n)
    if kept is None:
        kept = draws >= rho
    kept = np.asarray(kept, dtype=bool).copy()
    if kind == "path":
        kept[n - 1] = False
    labels = components_from_kept(kept, kind == "cycle")
    g = GridClustering(MetricSpace(n), labels, rng=rng)
    kept.setflags(write=False)
    return RandomClusterDraw(kind, n, rho, kept, g.gamma, g)


def induced_distribution(mu: DiscreteDistribution, clustering: Clustering) -> DiscreteDistribution:
    w = np.bincount(clustering.gamma, weights=mu.weights, minlength=clustering.num_cells)
    return DiscreteDistribution(w / w.sum())
