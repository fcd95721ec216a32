"""Diameter-guarded testers for adversarial clusterings."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cells
from .cells import ACCEPT, BOT, REJECT, DiscoveryResult, Outcome, RejectVerdict
from .clustering import Clustering
from .domain import DiscreteDistribution, DomainError, MetricSpace, cell_diameters
from .oracle import OracleSession
from .subtests import (
    DEFAULT_CONSTANTS,
    SubtestConstants,
    equivalence_budget,
    identity_budget,
    tv_equivalence_subtest,
    tv_identity_subtest,
)

LN24 = math.log(24)


class Verdict:
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"
    CLUSTER_REJECT = "CLUSTER_REJECT"


@dataclass(frozen=True)
class GuardParams:
    eps: float
    Delta: float
    delta: float = 1 / 6
    beta: float = 0.25
    b: float = 1 / 24

    def __post_init__(self):
        if not 0 < 2 * self.Delta < self.eps < 0.5:
            raise DomainError("need 0 < 2 Delta < eps < 1/2")
        if self.Delta > self.beta * self.eps / 2 + 1e-15:
            raise DomainError("need Delta <= beta eps / 2")

    @property
    def c_beta(self) -> float:
        return self.beta / (96 * LN24)

    @property
    def c(self) -> float:
        return 1 / (384 * LN24)

    @property
    def k(self) -> float:
        return (2 / self.beta) * LN24

    @property
    def s(self) -> int:
        return math.ceil(self.k / self.eps)

    @property
    def t1(self) -> float:
        return self.Delta

    @property
    def t2(self) -> float:
        return self.beta * self.eps / 2


@dataclass
class TesterVerdict:
    verdict: str
    samples: list[int]
    labels: int
    stage: str = ""

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "samples": self.samples, "labels": self.labels, "stage": self.stage}


RejectProc = Callable[[OracleSession, int], RejectVerdict]
DiscoverProc = Callable[[OracleSession, int], DiscoveryResult]


def hpld_mass(mu: DiscreteDistribution, clustering: Clustering, Delta: float) -> float:
    """Pr_{x ~ mu}[diam(cell of x) > Delta]."""
    diam = cell_diameters(clustering.space, clustering.gamma)
    return float(mu.weights[diam[clustering.gamma] > Delta + 1e-12].sum())


def expected_diameter(mu: DiscreteDistribution, clustering: Clustering) -> float:
    diam = cell_diameters(clustering.space, clustering.gamma)
    return float((mu.weights * diam[clustering.gamma]).sum())


# ---------------------------------------------------------------------------
# clustering test and container sampling


def test_clustering(
    session: OracleSession, gp: GuardParams, reject_proc: RejectProc, which: int = 0, memo: bool = True
) -> str:
    """Draw s representatives; reject if any cell is rejected or gets bot."""
    reps = session.samp_many(which, gp.s)
    seen: dict[int, str] = {}
    for h in reps.tolist():
        if memo and h in seen:
            out = seen[h]
        else:
            out = reject_proc(session, h).outcome
            seen[h] = out
        if out != ACCEPT:
            return REJECT
    return ACCEPT


test_clustering.__test__ = False  # not a pytest test despite the name


@dataclass
class ContainerSampleResult:
    outcome: str  # "samples", REJECT or "cluster_reject"
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    failures: int = 0


def container_sample(
    session: OracleSession,
    m: int,
    alpha: float,
    nu: DiscreteDistribution,
    discover_proc: DiscoverProc,
    which: int = 0,
    memo: bool = True,
) -> ContainerSampleResult:
    """Draw m samples of mu-bullet: resample each clustered sample from nu inside its container.

    Rejection-sampling failures share one global counter with limit 24m/alpha.
    Inner loops run in lockstep rounds over the pending samples; this changes
    only how many label calls are spent after the counter has already
    overflowed, never the outcome.
    """
    space = session.space
    limit = 24 * m / alpha
    reps = session.samp_many(which, m)
    containers: dict[int, np.ndarray] = {}
    stop_at, stop_outcome = m, None
    for i, h in enumerate(reps.tolist()):
        if h in containers and memo:
            continue
        res = discover_proc(session, h)
        if res.outcome is Outcome.CLUSTER_REJECT:
            stop_at, stop_outcome = i, "cluster_reject"
            break
        pts = res.container(space)
        if nu.weights[pts].sum() <= 0:
            stop_at, stop_outcome = i, REJECT
            break
        containers[h] = pts

    active = reps[:stop_at]
    out = np.full(stop_at, -1, dtype=np.int64)
    failures = 0
    pending = np.arange(stop_at)
    cond = {}
    for h, pts in containers.items():
        w = nu.weights[pts]
        cond[h] = (pts, np.cumsum(w / w.sum()))
    while pending.size:
        hs = active[pending]
        cand = np.empty(pending.size, dtype=np.int64)
        for h in np.unique(hs):
            sel = hs == h
            pts, cdf = cond[int(h)]
            u = session.rng.random(int(sel.sum()))
            cand[sel] = pts[np.minimum(np.searchsorted(cdf, u, side="right"), len(pts) - 1)]
        ok = session.label_many(space.coords(cand)) == hs
        out[pending[ok]] = cand[ok]
        failures += int((~ok).sum())
        if failures > limit:
            return ContainerSampleResult("cluster_reject", failures=failures)
        pending = pending[~ok]
    if stop_outcome is not None:
        return ContainerSampleResult(stop_outcome, failures=failures)
    return ContainerSampleResult("samples", samples=out, failures=failures)


# ---------------------------------------------------------------------------
# EMD testers via a hierarchy of dyadic partitions


@dataclass
class HierarchicalClustering:
    """Dyadic box partitions at levels 1..t, evaluated lazily on sample points."""

    space: MetricSpace
    eps: float
    deltas: list[float] = field(init=False)

    def __post_init__(self):
        max_level = max(1, math.ceil(math.log2(self.space.n)))
        deltas = []
        for i in range(1, max_level + 1):
            deltas.append(self._block_diameter(i))
            if deltas[-1] <= self.eps / 2:
                break
        self.deltas = deltas

    def _block_diameter(self, i: int) -> float:
        n = self.space.n
        edges = -(-np.arange(self.per_axis(i) + 1) * n // 2**i)  # ceil(b n / 2^i)
        width = int(np.diff(edges).max())
        return float(self.space.dist(np.zeros(self.space.d), np.full(self.space.d, width - 1)))

    def per_axis(self, i: int) -> int:
        return min(2**i, self.space.n)

    @property
    def t(self) -> int:
        return len(self.deltas)

    def num_cells(self, i: int) -> int:
        return self.per_axis(i) ** self.space.d

    def cells_of(self, i: int, flat_idx) -> np.ndarray:
        c = self.space.coords(np.asarray(flat_idx, dtype=np.int64)).astype(np.int64)
        blocks = (c * 2**i) // self.space.n
        shape = (self.per_axis(i),) * self.space.d
        return np.ravel_multi_index(tuple(np.moveaxis(blocks, -1, 0)), shape)

    def induced(self, i: int, weights: np.ndarray) -> np.ndarray:
        g = self.cells_of(i, np.arange(self.space.size))
        return np.bincount(g, weights=weights, minlength=self.num_cells(i))

    def level_eps(self, i: int) -> float:
        """TV proximity for level i (1-based): eps / (2 t delta_{i-1}), delta_0 = diameter."""
        prev = 1.0 if i == 1 else self.deltas[i - 2]
        if prev == 0:
            return math.inf
        return self.eps / (2 * self.t * prev)


_HIER_CACHE: dict[tuple, HierarchicalClustering] = {}


def hierarchy(space: MetricSpace, eps: float) -> HierarchicalClustering:
    key = (space, round(eps, 15))
    if key not in _HIER_CACHE:
        _HIER_CACHE[key] = HierarchicalClustering(space, eps)
    return _HIER_CACHE[key]


def emd_identity_budget(space: MetricSpace, eps: float, consts: SubtestConstants = DEFAULT_CONSTANTS) -> int:
    hc = hierarchy(space, eps)
    fail = 1 / (3 * hc.t)
    return sum(identity_budget(hc.num_cells(i), hc.level_eps(i), fail, consts) for i in range(1, hc.t + 1))


def emd_equivalence_budget(space: MetricSpace, eps: float, consts: SubtestConstants = DEFAULT_CONSTANTS) -> int:
    hc = hierarchy(space, eps)
    fail = 1 / (3 * hc.t)
    return sum(equivalence_budget(hc.num_cells(i), hc.level_eps(i), fail, consts) for i in range(1, hc.t + 1))


def emd_identity_tester_hypergrid(
    samples: np.ndarray,
    nu: DiscreteDistribution,
    eps: float,
    space: MetricSpace,
    consts: SubtestConstants = DEFAULT_CONSTANTS,
) -> str:
    """Reject when any level's induced-law identity test rejects.

    ``samples`` are flat domain indices; level i consumes its own fresh block.
    """
    hc = hierarchy(space, eps)
    fail = 1 / (3 * hc.t)
    samples = np.asarray(samples, dtype=np.int64)
    pos = 0
    for i in range(1, hc.t + 1):
        k, e = hc.num_cells(i), hc.level_eps(i)
        need = identity_budget(k, e, fail, consts)
        if need == 0:
            continue
        p = hc.induced(i, nu.weights)
        block = samples[pos : pos + need]
        pos += need
        if tv_identity_subtest(hc.cells_of(i, block), p, e, fail, consts) == REJECT:
            return REJECT
    return ACCEPT


def emd_equivalence_tester_hypergrid(
    samples_a: np.ndarray,
    samples_b: np.ndarray,
    eps: float,
    space: MetricSpace,
    consts: SubtestConstants = DEFAULT_CONSTANTS,
) -> str:
    hc = hierarchy(space, eps)
    fail = 1 / (3 * hc.t)
    a, b = np.asarray(samples_a, dtype=np.int64), np.asarray(samples_b, dtype=np.int64)
    pos = 0
    for i in range(1, hc.t + 1):
        k, e = hc.num_cells(i), hc.level_eps(i)
        need = equivalence_budget(k, e, fail, consts)
        if need == 0:
            continue
        res = tv_equivalence_subtest(
            hc.cells_of(i, a[pos : pos + need]), hc.cells_of(i, b[pos : pos + need]), k, e, fail, consts
        )
        pos += need
        if res == REJECT:
            return REJECT
    return ACCEPT


# ---------------------------------------------------------------------------
# universe bindings


@dataclass
class UniverseBinding:
    """Named (universe, good family) preset with its cell procedures.

    ``make_reject(gp)`` builds the rejection procedure (failure b*eps) and
    ``make_discover(gp, m)`` the discovery procedure (failure b/m); the latter
    is None when identity goes through the equivalence reduction.
    """

    name: str
    universe: str
    good: str
    make_reject: Callable[[GuardParams], RejectProc]
    make_discover: Callable[[GuardParams, int], DiscoverProc] | None
    alpha: float | None = 1.0  # None: 2^-d
    deterministic: bool = True


def _fixed(discover: DiscoverProc) -> Callable[[GuardParams, int], DiscoverProc]:
    return lambda gp, m: discover


def _reject_from_discovery(discover: DiscoverProc) -> Callable[[GuardParams], RejectProc]:
    """Exact discovery gives exact rejection: accept iff the discovered cell is small."""

    def make(gp: GuardParams) -> RejectProc:
        def proc(session: OracleSession, h: int) -> RejectVerdict:
            res = discover(session, h)
            if res.outcome is not Outcome.CONTAINER:
                return RejectVerdict(BOT, res.queries_used)
            sp = session.space
            if res.box is not None:
                diam = float(sp.dist(res.box[0], res.box[1]))
            else:
                diam = sp.set_diameter(res.points)
            return RejectVerdict(ACCEPT if diam <= gp.t1 + 1e-12 else REJECT, res.queries_used)

        return proc

    return make


def _reject_connected(gp: GuardParams) -> RejectProc:
    return lambda s, h: cells.reject_connected_cell(s, h, gp.t1, gp.t2)


def _reject_cc_box(gp: GuardParams) -> RejectProc:
    return lambda s, h: cells.cc_vs_box_reject_2d(s, h, gp.t1, gp.t2)


def make_binding(name: str, inner_delta: float = 1 / 32) -> UniverseBinding:
    """Look up a preset; ``inner_delta`` is the inner-ball radius for the CV universes."""
    exact = {
        "b-b": ("B", "B", cells.discover_box_cell),
        "intervals-threshold": ("Intervals", "Intervals", cells.discover_interval_cell),
        "cc-cc": ("CC", "CC", cells.discover_convex_grid_cell_2d),
    }
    if name in exact:
        u, g, disc = exact[name]
        return UniverseBinding(name, u, g, _reject_from_discovery(disc), _fixed(disc))
    if name == "c-c":
        return UniverseBinding(name, "C", "C", _reject_connected, None)
    if name == "cc-b-2d":
        return UniverseBinding(name, "CC", "B", _reject_cc_box, None)
    if name == "cv-b-cube":

        def make_reject(gp: GuardParams) -> RejectProc:
            if 2 * gp.t1 > gp.t2:
                raise DomainError("cv-b-cube needs 2 Delta <= beta eps / 2")
            return lambda s, h: cells.qreject_conv_box(s, h, gp.t1, inner_delta, gp.b * gp.eps)

        def make_discover(gp: GuardParams, m: int) -> DiscoverProc:
            return lambda s, h: cells.qcell_conv_box(s, h, inner_delta, gp.b / max(m, 1))

        return UniverseBinding(name, "CV", "BV", make_reject, make_discover, alpha=None, deterministic=False)
    if name == "cv-cv-cube":

        def make_reject_cv(gp: GuardParams) -> RejectProc:
            def proc(s: OracleSession, h: int) -> RejectVerdict:
                root = s.space.d ** (1 / s.space.p)
                if 2 * root * gp.t1 > gp.t2:
                    raise DomainError("cv-cv-cube needs 2 d^{1/p} Delta <= beta eps / 2")
                return cells.qreject_conv_conv(s, h, root * gp.t1, inner_delta, gp.b * gp.eps)

            return proc

        return UniverseBinding(name, "CV", "CV", make_reject_cv, None, deterministic=False)
    raise DomainError(f"unknown binding {name!r}")


BINDINGS = ("c-c", "cc-cc", "b-b", "cc-b-2d", "cv-b-cube", "cv-cv-cube", "intervals-threshold")


# ---------------------------------------------------------------------------
# end-to-end testers


def _majority(verdicts: list[str]) -> str:
    counts = Counter(verdicts)
    top = max(counts.values())
    for v in (Verdict.CLUSTER_REJECT, Verdict.REJECT, Verdict.ACCEPT):
        if counts.get(v, 0) == top:
            return v
    raise AssertionError


def boost_runs(delta: float) -> int:
    """Runs of the 1/6-error base tester needed for error delta."""
    if delta >= 1 / 6:
        return 1
    return math.ceil(18 * math.log(1 / delta))


def _simulated_nu_samples(session: OracleSession, nu: DiscreteDistribution, k: int) -> np.ndarray:
    """Clustered samples of nu made locally: draw x ~ nu, then one LABEL call each."""
    x = nu.sample(session.rng, k)
    return session.label_many(session.space.coords(x))


def _identity_once(session, nu, gp, binding, consts) -> TesterVerdict:
    space = session.space
    reject_proc = binding.make_reject(gp)

    def done(v: str, stage: str) -> TesterVerdict:
        return TesterVerdict(v, list(session.samp_count), session.label_count, stage)

    if test_clustering(session, gp, reject_proc, 0, memo=binding.deterministic) == REJECT:
        return done(Verdict.CLUSTER_REJECT, "test_clustering")
    if binding.make_discover is None:
        # identity through equivalence: nu's clustered samples are simulated with LABEL calls
        m = emd_equivalence_budget(space, gp.eps, consts)
        a = session.samp_many(0, m)
        b = _simulated_nu_samples(session, nu, m)
        v = emd_equivalence_tester_hypergrid(a, b, gp.eps, space, consts)
        return done(Verdict.REJECT if v == REJECT else Verdict.ACCEPT, "emd_equivalence")
    m = emd_identity_budget(space, gp.eps / 2, consts)
    discover = binding.make_discover(gp, m)
    alpha = binding.alpha if binding.alpha is not None else 2.0**-space.d
    res = container_sample(session, m, alpha, nu, discover, 0, memo=binding.deterministic)
    if res.outcome == "cluster_reject":
        return done(Verdict.CLUSTER_REJECT, "container_sample")
    if res.outcome == REJECT:
        return done(Verdict.REJECT, "container_sample")
    v = emd_identity_tester_hypergrid(res.samples, nu, gp.eps / 2, space, consts)
    return done(Verdict.REJECT if v == REJECT else Verdict.ACCEPT, "emd_identity")


def diameter_guarded_identity(
    session: OracleSession,
    nu: DiscreteDistribution,
    gp: GuardParams,
    binding: UniverseBinding,
    consts: SubtestConstants = DEFAULT_CONSTANTS,
) -> TesterVerdict:
    runs = [_identity_once(session, nu, gp, binding, consts) for _ in range(boost_runs(gp.delta))]
    v = _majority([r.verdict for r in runs])
    return TesterVerdict(v, list(session.samp_count), session.label_count, runs[-1].stage if len(runs) == 1 else "majority")


def _equivalence_once(session, gp, binding, consts) -> TesterVerdict:
    space = session.space
    reject_proc = binding.make_reject(gp)

    def done(v: str, stage: str) -> TesterVerdict:
        return TesterVerdict(v, list(session.samp_count), session.label_count, stage)

    for which in (0, 1):
        if test_clustering(session, gp, reject_proc, which, memo=binding.deterministic) == REJECT:
            return done(Verdict.CLUSTER_REJECT, f"test_clustering[{which}]")
    m = emd_equivalence_budget(space, gp.eps, consts)
    a, b = session.samp_many(0, m), session.samp_many(1, m)
    v = emd_equivalence_tester_hypergrid(a, b, gp.eps, space, consts)
    return done(Verdict.REJECT if v == REJECT else Verdict.ACCEPT, "emd_equivalence")


def diameter_guarded_equivalence(
    session: OracleSession,
    gp: GuardParams,
    binding: UniverseBinding,
    consts: SubtestConstants = DEFAULT_CONSTANTS,
) -> TesterVerdict:
    if len(session.inputs) < 2:
        raise DomainError("equivalence needs two input distributions")
    runs = [_equivalence_once(session, gp, binding, consts) for _ in range(boost_runs(gp.delta))]
    v = _majority([r.verdict for r in runs])
    return TesterVerdict(v, list(session.samp_count), session.label_count, runs[-1].stage if len(runs) == 1 else "majority")
