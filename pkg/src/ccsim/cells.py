"""Cell discovery and cell rejection procedures driven by LABEL queries."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .clustering import hull_lattice_points_2d
from .domain import DomainError, MetricSpace
from .oracle import OracleSession

ACCEPT, REJECT, BOT = "accept", "reject", "bot"


class Outcome(str, Enum):
    CONTAINER = "container"
    CLUSTER_REJECT = "cluster_reject"


@dataclass
class DiscoveryResult:
    outcome: Outcome
    queries_used: int
    box: tuple[np.ndarray, np.ndarray] | None = None  # inclusive lattice lo/hi
    points: np.ndarray | None = None  # flat indices, when not a box

    def container(self, space: MetricSpace) -> np.ndarray:
        if self.outcome is not Outcome.CONTAINER:
            raise DomainError("no container on cluster_reject")
        if self.points is not None:
            return self.points
        lo, hi = self.box
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, space.d)
        return space.index(grid)


@dataclass
class RejectVerdict:
    outcome: str  # ACCEPT, REJECT or BOT
    queries_used: int


@dataclass
class BoundingBoxPair:
    """B and B' as real lo/hi vectors in lattice units."""

    inner_lo: np.ndarray
    inner_hi: np.ndarray
    outer_lo: np.ndarray
    outer_hi: np.ndarray
    extents: np.ndarray  # shape (d, 2): estimated distance from h to the far side, (-, +)
    queries_used: int


class BoundingBoxFailure(Exception):
    def __init__(self, queries_used: int, reason: str):
        super().__init__(reason)
        self.queries_used = queries_used


def _coords(session: OracleSession, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.int64)
    if h.ndim == 0:
        return session.space.coords(int(h))
    return h


def _rep(session: OracleSession, h_c: np.ndarray) -> int:
    return int(session.space.index(h_c))


def _last_inside(session: OracleSession, h_c, h_rep: int, axis: int, step: int) -> int:
    """Binary search along one axis line through h for the last coordinate in the cell.

    Assumes the cell meets the line in a contiguous run containing h.
    """
    n = session.space.n
    inside = int(h_c[axis])
    outside = n if step > 0 else -1
    x = np.array(h_c, dtype=np.int64)
    while abs(outside - inside) > 1:
        mid = (inside + outside) // 2
        x[axis] = mid
        if session.label(x) == h_rep:
            inside = mid
        else:
            outside = mid
    return inside


def discover_interval_cell(session: OracleSession, h) -> DiscoveryResult:
    if session.space.d != 1:
        raise DomainError("interval discovery needs a 1-d domain")
    return discover_box_cell(session, h)


def discover_box_cell(session: OracleSession, h, d: int | None = None, n: int | None = None) -> DiscoveryResult:
    start = session.label_count
    h_c = _coords(session, h)
    h_rep = _rep(session, h_c)
    lo = np.empty(session.space.d, dtype=np.int64)
    hi = np.empty(session.space.d, dtype=np.int64)
    for ax in range(session.space.d):
        lo[ax] = _last_inside(session, h_c, h_rep, ax, -1)
        hi[ax] = _last_inside(session, h_c, h_rep, ax, +1)
    return DiscoveryResult(Outcome.CONTAINER, session.label_count - start, box=(lo, hi))


def interval_query_cap(n: int) -> int:
    return 2 * math.ceil(math.log2(n)) + 2


def box_query_cap(n: int, d: int) -> int:
    return 2 * d * math.ceil(math.log2(n)) + 2 * d


def shell_radius(space: MetricSpace, eps2: float) -> int:
    """Shell radius k = ceil(eps2 * (n-1) / 2) in lattice steps."""
    return math.ceil(eps2 * (space.n - 1) / 2 - 1e-12)


def shell_points(space: MetricSpace, h_c, k: int) -> np.ndarray:
    """Points of the domain at l_inf distance exactly k from h, in row-major order."""
    axes = [np.arange(max(0, c - k), min(space.n, c + k + 1)) for c in h_c]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, space.d)
    on = np.abs(grid - np.asarray(h_c)).max(axis=1) == k
    return grid[on]


def reject_connected_cell(session: OracleSession, h, eps1: float, eps2: float, p: float | None = None) -> RejectVerdict:
    sp = session.space
    p = sp.p if p is None else p
    if not eps2 > 2 * sp.d ** (1.0 / p) * eps1:
        raise DomainError("need eps2 > 2 d^{1/p} eps1")
    start = session.label_count
    h_c = _coords(session, h)
    h_rep = _rep(session, h_c)
    k = shell_radius(sp, eps2)
    for x in shell_points(sp, h_c, k):
        if session.label(x) == h_rep:
            return RejectVerdict(REJECT, session.label_count - start)
    return RejectVerdict(ACCEPT, session.label_count - start)


def shell_query_cap(d: int, k: int) -> int:
    # the full l_inf sphere of radius k has (2k+1)^d - (2k-1)^d <= 2d(2k+1)^{d-1} points
    return 2 * d * (2 * k + 1) ** (d - 1)


_N8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
_N4 = [(-1, 0), (1, 0), (0, -1), (0, 1)]


def discover_convex_grid_cell_2d(session: OracleSession, h, n: int | None = None) -> DiscoveryResult:
    """Exact discovery of a connected lattice-convex cell on [n]^2.

    Binary search along the row through h finds a boundary point; a BFS over
    boundary points (8-adjacency) then walks the whole boundary, and the
    container is the set of lattice points of its convex hull.  Points outside
    the domain count as outside the cell.
    """
    sp = session.space
    if sp.d != 2:
        raise DomainError("convex-grid discovery is implemented for d = 2")
    start = session.label_count
    h_c = _coords(session, h)
    h_rep = _rep(session, h_c)
    known: dict[tuple[int, int], bool] = {tuple(int(v) for v in h_c): True}

    def inside(pt) -> bool:
        if not (0 <= pt[0] < sp.n and 0 <= pt[1] < sp.n):
            return False
        if pt not in known:
            known[pt] = session.label(np.array(pt)) == h_rep
        return known[pt]

    def on_boundary(pt) -> bool:
        return inside(pt) and any(not inside((pt[0] + a, pt[1] + b)) for a, b in _N4)

    right = _last_inside(session, h_c, h_rep, 0, +1)
    b0 = (right, int(h_c[1]))
    known[b0] = True
    seen = {b0}
    todo = deque([b0])
    while todo:
        u = todo.popleft()
        for a, b in _N8:
            v = (u[0] + a, u[1] + b)
            if v not in seen and on_boundary(v):
                seen.add(v)
                todo.append(v)
    pts = hull_lattice_points_2d(np.array(sorted(seen)))
    return DiscoveryResult(Outcome.CONTAINER, session.label_count - start, points=np.sort(sp.index(pts)))


def cc_vs_box_reject_2d(session: OracleSession, h, t1: float, t2: float, n: int | None = None) -> RejectVerdict:
    """Reject large connected convex cells; never output bot on box cells."""
    sp = session.space
    if sp.d != 2:
        raise DomainError("this procedure works on [n]^2")
    margin = float(sp.dist(np.zeros(2), np.full(2, 4.0)))
    if not t1 < t2 - margin:
        raise DomainError(f"need t1 < t2 - {margin:.4g}")
    start = session.label_count
    h_c = _coords(session, h)
    h_rep = _rep(session, h_c)

    def used() -> int:
        return session.label_count - start

    # step 1
    a1 = _last_inside(session, h_c, h_rep, 0, -1)
    b1 = _last_inside(session, h_c, h_rep, 0, +1)
    a2 = _last_inside(session, h_c, h_rep, 1, -1)
    b2 = _last_inside(session, h_c, h_rep, 1, +1)

    def in_cell(x, y) -> bool:
        if not (0 <= x < sp.n and 0 <= y < sp.n):
            return False  # outside the domain, so outside the cell; no query needed
        return session.label(np.array([x, y])) == h_rep

    # step 2
    for x, y in ((a1, a2), (a1, b2), (b1, a2), (b1, b2)):
        if not in_cell(x, y):
            return RejectVerdict(BOT, used())
    outside = [
        (a1 - 1, a2), (a1, a2 - 1), (a1 - 1, b2), (a1, b2 + 1),
        (b1 + 1, a2), (b1, a2 - 1), (b1 + 1, b2), (b1, b2 + 1),
    ]
    for x, y in outside:
        if in_cell(x, y):
            return RejectVerdict(BOT, used())

    # step 3: outside neighbours of the side midpoints
    mids1 = sorted({(a1 + b1) // 2, (a1 + b1 + 1) // 2})
    mids2 = sorted({(a2 + b2) // 2, (a2 + b2 + 1) // 2})
    probes = [(a1 - 1, y) for y in mids2] + [(b1 + 1, y) for y in mids2]
    probes += [(x, a2 - 1) for x in mids1] + [(x, b2 + 1) for x in mids1]
    for x, y in probes:
        if in_cell(x, y):
            return RejectVerdict(BOT, used())

    diam_r = float(sp.dist(np.array([a1, a2]), np.array([b1, b2])))
    return RejectVerdict(ACCEPT if diam_r <= t1 else REJECT, used())


# ---------------------------------------------------------------------------
# bounding boxes of convex cells with an inner ball


def _ray_exits(session: OracleSession, h_c, h_rep: int, thetas: np.ndarray, r_in: float, tol: float = 0.5):
    """Batch binary search for the last in-cell lattice point on each ray from h.

    Ray points are rounded to the nearest lattice point.  Returns the exit
    points as an integer array of shape (len(thetas), 2).
    """
    n = session.space.n
    u = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    with np.errstate(divide="ignore"):
        lim = np.where(u > 1e-15, (n - 1 - h_c) / u, np.where(u < -1e-15, -h_c / u, np.inf))
    r_max = lim.min(axis=1)
    lo = np.minimum(np.full(len(thetas), r_in), r_max)
    hi = r_max + 1.0  # treated as outside without a query
    best = np.rint(h_c + lo[:, None] * u).astype(np.int64)
    active = hi - lo > tol
    while np.any(active):
        idx = np.flatnonzero(active)
        mid = 0.5 * (lo[idx] + hi[idx])
        pts = np.rint(h_c + mid[:, None] * u[idx]).astype(np.int64)
        pts = np.clip(pts, 0, n - 1)
        ok = session.member(pts, h_rep)
        lo[idx[ok]] = mid[ok]
        best[idx[ok]] = pts[ok]
        hi[idx[~ok]] = mid[~ok]
        active = hi - lo > tol
    return best


def _max_extent(
    session: OracleSession,
    h_c: np.ndarray,
    h_rep: int,
    axis: int,
    sign: int,
    delta_u: float,
    target_u: float,
    rng: np.random.Generator,
    coarse: int = 33,
    fan: int = 9,
    max_rounds: int = 40,
) -> tuple[float, bool]:
    """Estimate max over the cell of sign*(x_axis - h_axis), in lattice units.

    Linear functionals are unimodal along the boundary of a convex body as
    seen from an interior point, so a coarse fan of rays followed by repeated
    zooming around the best ray converges to the extreme direction.  The
    certificate: with the inner ball of radius delta_u, a ray within angle phi
    of the extreme point y falls short by at most |y-h|^2 phi / delta_u.
    Every returned value is attained by a queried in-cell point, so the
    estimate never exceeds the truth.
    """
    phi0 = (0.0 if axis == 0 else np.pi / 2) + (0.0 if sign > 0 else np.pi)
    half = np.pi / 2
    r_in = max(0.0, delta_u - 1.0)

    def score(pts):
        return sign * (pts[:, axis] - h_c[axis])

    offset = rng.random()
    thetas = phi0 - half + (np.arange(coarse) + offset) * (2 * half / coarse)
    pts = _ray_exits(session, h_c, h_rep, thetas, r_in)
    s = score(pts)
    b = int(np.argmax(s))
    best = float(s[b])
    best_pt = pts[b]
    lo_t = thetas[max(b - 1, 0)] if b > 0 else phi0 - half
    hi_t = thetas[min(b + 1, coarse - 1)] if b < coarse - 1 else phi0 + half
    for _ in range(max_rounds):
        spacing = (hi_t - lo_t) / (fan - 1)
        L = float(np.hypot(*(best_pt - h_c))) + target_u
        if L * L * (spacing / 2) / delta_u + 1.0 <= target_u:
            return best, True
        thetas = np.linspace(lo_t, hi_t, fan)
        pts = _ray_exits(session, h_c, h_rep, thetas, r_in)
        s = score(pts)
        b = int(np.argmax(s))
        if s[b] > best:
            best, best_pt = float(s[b]), pts[b]
        lo_t, hi_t = thetas[max(b - 1, 0)], thetas[min(b + 1, fan - 1)]
    return best, False


def bounding_box_repetitions(rho_fail: float) -> int:
    """Odd number of median repetitions used for failure probability rho_fail."""
    r = max(5, math.ceil(2 * math.log(1 / rho_fail)))
    return r + (r % 2 == 0)


def bounding_box(
    session: OracleSession,
    h,
    delta: float,
    rho_fail: float = 0.01,
    repetitions: int | None = None,
    seed: int | None = None,
) -> BoundingBoxPair:
    """Inner/outer axis-aligned boxes around a convex cell with an inner delta-ball.

    delta is in cube units; the returned boxes are in lattice units.  Raises
    BoundingBoxFailure when fewer than half of the repetitions certify the
    target accuracy delta/8 for some extent.
    """
    sp = session.space
    if sp.d != 2:
        raise DomainError("bounding boxes are implemented for d = 2")
    start = session.label_count
    h_c = _coords(session, h).astype(float)
    h_rep = _rep(session, h_c.astype(np.int64))
    units = sp.n - 1
    delta_u = delta * units
    dprime = delta_u / 8
    rng = session.rng if seed is None else np.random.default_rng(seed)
    if repetitions is None:
        repetitions = bounding_box_repetitions(rho_fail)
    ext = np.zeros((sp.d, 2))
    for ax in range(sp.d):
        for j, sign in enumerate((-1, +1)):
            vals = []
            for _ in range(repetitions):
                v, ok = _max_extent(session, h_c, h_rep, ax, sign, delta_u, dprime, rng)
                if ok:
                    vals.append(v)
            if 2 * len(vals) <= repetitions:
                raise BoundingBoxFailure(session.label_count - start, "optimizer did not certify accuracy")
            ext[ax, j] = float(np.median(vals))
    return BoundingBoxPair(
        inner_lo=h_c - ext[:, 0] + 2 * dprime,
        inner_hi=h_c + ext[:, 1] - 2 * dprime,
        outer_lo=h_c - ext[:, 0] - 2 * dprime,
        outer_hi=h_c + ext[:, 1] + 2 * dprime,
        extents=ext,
        queries_used=session.label_count - start,
    )


def _box_diam(space: MetricSpace, lo, hi) -> float:
    return float(space.dist(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)))


def qreject_conv_conv(session: OracleSession, h, eps: float, delta: float, rho_fail: float = 0.01) -> RejectVerdict:
    start = session.label_count
    try:
        bb = bounding_box(session, h, delta, rho_fail)
    except BoundingBoxFailure:
        # this procedure never outputs bot; an uncertified box is treated as large
        return RejectVerdict(REJECT, session.label_count - start)
    d = _box_diam(session.space, bb.inner_lo, bb.inner_hi)
    return RejectVerdict(ACCEPT if d <= eps else REJECT, session.label_count - start)


def qreject_conv_box(session: OracleSession, h, eps: float, delta: float, rho_fail: float = 0.01) -> RejectVerdict:
    start = session.label_count
    try:
        bb = bounding_box(session, h, delta, rho_fail)
    except BoundingBoxFailure:
        return RejectVerdict(BOT, session.label_count - start)
    lo = np.ceil(bb.inner_lo - 1e-9).astype(np.int64)
    hi = np.floor(bb.inner_hi + 1e-9).astype(np.int64)
    h_rep = _rep(session, _coords(session, h))
    if not np.all(session.member(np.stack([lo, hi]), h_rep)):
        return RejectVerdict(BOT, session.label_count - start)
    d = _box_diam(session.space, lo, hi)
    return RejectVerdict(ACCEPT if d <= eps else REJECT, session.label_count - start)


def qcell_conv_box(session: OracleSession, h, delta: float, rho_fail: float = 0.01) -> DiscoveryResult:
    start = session.label_count
    try:
        bb = bounding_box(session, h, delta, rho_fail)
    except BoundingBoxFailure:
        return DiscoveryResult(Outcome.CLUSTER_REJECT, session.label_count - start)
    n = session.space.n
    lo = np.clip(np.ceil(bb.outer_lo - 1e-9), 0, n - 1).astype(np.int64)
    hi = np.clip(np.floor(bb.outer_hi + 1e-9), 0, n - 1).astype(np.int64)
    return DiscoveryResult(Outcome.CONTAINER, session.label_count - start, box=(lo, hi))
