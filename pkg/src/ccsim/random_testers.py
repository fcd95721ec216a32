"""Uniformity testers for random path/cycle clusterings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .clustering import RandomClusterDraw
from .domain import DiscreteDistribution, DomainError
from .oracle import OracleSession
from .random_analysis import ExpectedJoinMatrix
from .subtests import (
    ACCEPT,
    DEFAULT_CONSTANTS,
    REJECT,
    SubtestConstants,
    instance_optimal_identity,
    instance_optimal_sample_size,
)


# ---------------------------------------------------------------------------
# Poissonized clustered counts


@dataclass
class ClusteredSampleCounts:
    X: np.ndarray  # per-cell counts
    total: int
    T: np.ndarray | None = field(default=None, repr=False)  # per-element counts (test mode)


def clustered_poisson_counts(mu: DiscreteDistribution, draw: RandomClusterDraw, m: float, seed: int) -> ClusteredSampleCounts:
    rng = np.random.default_rng(seed)
    t = rng.poisson(m * mu.weights)
    x = np.bincount(draw.labels, weights=t, minlength=draw.num_cells).astype(np.int64)
    return ClusteredSampleCounts(x, int(t.sum()), t)


def collision_statistic(x: np.ndarray, m: float) -> float:
    x = np.asarray(x, dtype=np.int64)
    return float((x * (x - 1)).sum()) / (m * m)


def collision_from_elements(t: np.ndarray, labels: np.ndarray) -> int:
    """T^T Phi T - ||T||_1 in exact integers, Phi being the join matrix of labels."""
    t = np.asarray(t, dtype=np.int64)
    x = np.bincount(labels, weights=t).astype(np.int64)
    return int((x * x).sum() - t.sum())


# ---------------------------------------------------------------------------
# zero-query tester


@dataclass(frozen=True)
class Alg1Config:
    n: int
    eps: float
    rho: float
    kind: str = "cycle"
    alpha: float = 24.0
    beta: float = 0.25
    c: float = 1.0
    L: float = 0.1
    enforce: bool = True

    def __post_init__(self):
        if self.beta > 1 / 3:
            raise DomainError("beta must be at most 1/3")
        if not 0 < self.eps <= 1 or not 0 < self.rho <= 1:
            raise DomainError("need eps, rho in (0, 1]")
        if self.enforce and self.rho < self.rho_floor:
            raise DomainError(f"rho={self.rho} below the required {self.rho_floor:.4g}")

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def rho_floor(self) -> float:
        return self.L * self.log_n**0.8 / (self.n**0.2 * self.eps**0.8)

    @property
    def m(self) -> float:
        return self.c * math.sqrt(self.n) / self.eps**2 * self.log_n**2 / self.rho**1.5

    @property
    def cutoff(self) -> float:
        return self.alpha * self.log_n

    def threshold(self) -> float:
        phi = ExpectedJoinMatrix(self.kind, self.n, self.rho)
        return phi.total() / self.n**2 + self.beta * self.eps**2 * self.rho / self.n


@dataclass
class Alg1Result:
    verdict: str
    step: int  # 1: concentration test, 2: collision test
    Y: float
    threshold: float
    max_count: int
    samples: int
    labels: int


def algorithm1(session: OracleSession, cfg: Alg1Config) -> Alg1Result:
    if session.label_count != 0:
        raise DomainError("the zero-query tester needs a fresh session")
    if session.space.n != cfg.n or session.space.d != 1:
        raise DomainError("session domain does not match the configuration")
    _, x = session.samp_poisson(0, cfg.m)
    thr = cfg.threshold()
    y = collision_statistic(x, cfg.m)
    mx = int(x.max()) if x.size else 0
    assert session.label_count == 0
    if mx >= cfg.cutoff:
        return Alg1Result(REJECT, 1, y, thr, mx, session.samp_count[0], 0)
    verdict = REJECT if y >= thr else ACCEPT
    return Alg1Result(verdict, 2, y, thr, mx, session.samp_count[0], 0)


# ---------------------------------------------------------------------------
# query-based tester


@dataclass
class LearnedCells:
    starts: np.ndarray
    ends: np.ndarray
    rejected: bool
    queries: int

    def sizes(self, n: int) -> np.ndarray:
        return (self.ends - self.starts) % n + 1


def learn_cells_by_binary_search(session: OracleSession, cap: int, kind: str, compiled: bool = True) -> LearnedCells:
    """Walk the line cell by cell, binary-searching each right end with LABEL calls.

    ``compiled=True`` runs the walk in the kernel against the same oracle answers
    and charges the session for every answer it read; ``False`` issues the
    LABEL calls one at a time through the session.
    """
    n = session.space.n
    if compiled:
        ans = session.clustering.rep_index[session.clustering.gamma]
        s, e, q, rej = kernels.walk_cells(ans, kind == "cycle", int(cap))
        session.charge_labels(q)
        return LearnedCells(s, e, bool(rej), int(q))
    start = session.label_count
    oracle = _LabelView(session)
    s, e, _, rej = _walk_via(oracle, n, kind == "cycle", int(cap))
    return LearnedCells(s, e, bool(rej), session.label_count - start)


class _LabelView:
    """Sequence-like view whose item access is a LABEL call."""

    def __init__(self, session: OracleSession):
        self.session = session
        self.size = session.space.n

    def __getitem__(self, x: int) -> int:
        return self.session.label(np.array([int(x)]))


def _walk_via(view: _LabelView, n: int, cyclic: bool, cap: int):
    from ._pykernels import walk_cells

    return walk_cells(view, cyclic, cap)


@dataclass(frozen=True)
class SingletonTesterConfig:
    n: int
    eps: float
    rho: float
    kind: str = "cycle"
    c1: float = 200.0
    c2: float = 0.5
    L: float = 1.0
    enforce: bool = True
    consts: SubtestConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if not 0 < self.eps <= 1 or not 0 < self.rho <= 1:
            raise DomainError("need eps, rho in (0, 1]")
        if self.enforce and self.rho < self.L * (self.n * self.eps) ** -0.25:
            raise DomainError("rho below the required L (n eps)^{-1/4}")

    @property
    def cell_cap(self) -> int:
        return math.ceil(self.c1 * self.rho * self.n)

    @property
    def singleton_cap(self) -> float:
        return 3 * self.rho**2 * self.n

    @property
    def proximity(self) -> float:
        return self.c2 * self.rho**2 * self.eps

    def label_budget(self) -> float:
        return self.rho * self.n * math.log(self.n)

    def sample_budget(self) -> float:
        return math.sqrt(self.n) / (self.rho * self.eps**2)


@dataclass
class SingletonResult:
    verdict: str
    stage: str
    cells: int
    singletons: int
    m: float
    samples: int
    labels: int


def singleton_tester(session: OracleSession, cfg: SingletonTesterConfig, compiled: bool = True) -> SingletonResult:
    n = cfg.n
    if session.space.n != n or session.space.d != 1:
        raise DomainError("session domain does not match the configuration")
    learned = learn_cells_by_binary_search(session, cfg.cell_cap, cfg.kind, compiled)

    def done(v: str, stage: str, singles: int = 0, m: float = 0.0) -> SingletonResult:
        return SingletonResult(v, stage, len(learned.starts), singles, m, session.samp_count[0], session.label_count)

    if learned.rejected:
        return done(REJECT, "cell_cap")
    sizes = learned.sizes(n)
    single = sizes == 1
    k = int(single.sum())
    if k > cfg.singleton_cap:
        return done(REJECT, "singleton_cap", k)
    # coarsened clustering: each singleton alone, everything else merged
    p = np.append(np.full(k, 1.0 / n), (n - k) / n)
    if n - k == 0:
        p = p[:-1]
    m = instance_optimal_sample_size(p, cfg.proximity, cfg.consts)
    reps, per_cell = session.samp_poisson(0, m)
    # map true cells to the learned coarsening through their representatives
    counts_by_rep = dict(zip(reps.tolist(), per_cell.tolist()))
    single_pts = learned.starts[single]
    counts = np.array([counts_by_rep.get(int(x), 0) for x in single_pts], dtype=np.int64)
    if n - k:
        counts = np.append(counts, int(per_cell.sum()) - int(counts.sum()))
    verdict = instance_optimal_identity(counts, p, cfg.proximity, m, cfg.consts)
    return done(verdict, "identity", k, m)
