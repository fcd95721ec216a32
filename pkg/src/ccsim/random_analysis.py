"""Exact analysis objects for random path/cycle clusterings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .clustering import RandomClusterDraw, components_from_kept
from .domain import DiscreteDistribution, DomainError

KINDS = ("path", "cycle")


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise DomainError("kind must be 'path' or 'cycle'")


# ---------------------------------------------------------------------------
# circular intervals


@dataclass(frozen=True)
class CircularInterval:
    """<<start, length>> on Z_n; negative length runs counter-clockwise."""

    start: int
    length: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        object.__setattr__(self, "start", self.start % self.n)

    def elements(self) -> np.ndarray:
        """Element multiset, in walking order."""
        d = self.length
        if d >= 0:
            return (self.start + np.arange(d)) % self.n
        return (self.start - np.arange(-d)) % self.n

    def __len__(self) -> int:
        return abs(self.length)

    @property
    def endpoints(self) -> tuple[int, int]:
        d = self.length
        if d >= 0:
            return self.start, self.start + d - 1
        return self.start + d + 1, self.start

    def edges(self) -> "CircularInterval":
        """I*: the edges (edge e joins e and e+1) between consecutive elements."""
        d = self.length
        if d == 0:
            return CircularInterval(self.start, 0, self.n)
        if d >= 1:
            return CircularInterval(self.start, d - 1, self.n)
        return CircularInterval(self.start - 1, 1 - abs(d), self.n)

    def crosses(self, s: int) -> bool:
        return bool(np.any(self.edges().elements() == s % self.n))

    def mass(self, u) -> float:
        return float(np.asarray(u)[self.elements()].sum())

    def joined(self, kept: np.ndarray) -> bool:
        """Join function J: every edge of I* survives in H."""
        return bool(np.all(np.asarray(kept)[self.edges().elements()]))


def in_family(interval: CircularInterval, kind: str) -> bool:
    """Path intervals may not cross edge n-1."""
    _check_kind(kind)
    return kind == "cycle" or not interval.crosses(interval.n - 1)


def join_probability(interval: CircularInterval, kind: str, rho: float) -> float:
    if not in_family(interval, kind):
        return 0.0
    return (1 - rho) ** len(interval.edges())


def small_large_intervals(i: int, j: int, n: int, kind: str, rho: float) -> tuple[CircularInterval, CircularInterval]:
    """The two ways to join i and j; ties go to the interval with the smaller start."""
    if i > j:
        i, j = j, i
    a = CircularInterval(i, j - i + 1, n)
    b = CircularInterval(j, n - (j - i) + 1, n)
    pa, pb = join_probability(a, kind, rho), join_probability(b, kind, rho)
    if pa > pb or (pa == pb and a.start <= b.start):
        return a, b
    return b, a


def zeta(kind: str, n: int, rho: float) -> float:
    """max over pairs of E[J[largeinterval(i, j)]], from the closed form."""
    _check_kind(kind)
    eta = 1 - rho
    if kind == "path":
        return 0.0
    gaps = np.arange(n)
    return float((eta ** np.maximum(gaps, n - gaps)).max())


def zeta_bound_check(kind: str, n: int, rho: float) -> bool:
    z = zeta(kind, n, rho)
    if kind == "path":
        return z == 0.0
    return z <= (1 - rho) ** (n / 2) + 1e-15


# ---------------------------------------------------------------------------
# join matrices


@dataclass(frozen=True)
class JoinMatrix:
    phi: np.ndarray = field(repr=False)
    kept: np.ndarray = field(repr=False)

    def quadratic(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(u @ self.phi @ u)


def join_matrix(draw: RandomClusterDraw) -> JoinMatrix:
    lab = draw.labels
    return JoinMatrix((lab[:, None] == lab[None, :]).astype(np.int8), draw.kept)


@dataclass(frozen=True)
class ExpectedJoinMatrix:
    kind: str
    n: int
    rho: float

    def __post_init__(self):
        _check_kind(self.kind)
        if self.n < 2 or not 0 < self.rho <= 1:
            raise DomainError("need n >= 2 and rho in (0, 1]")

    @property
    def eta(self) -> float:
        return 1.0 - self.rho

    def by_gap(self) -> np.ndarray:
        """Entry value as a function of |i - j| = 0..n-1."""
        k = np.arange(self.n, dtype=float)
        eta = self.eta
        if self.kind == "path":
            return eta**k
        return eta**k + eta ** (self.n - k) - eta**self.n

    @property
    def entries(self) -> np.ndarray:
        g = self.by_gap()
        idx = np.arange(self.n)
        return g[np.abs(idx[:, None] - idx[None, :])]

    def total(self) -> float:
        """Sum of all entries in O(n): gap k occurs 2(n-k) times, gap 0 n times."""
        g = self.by_gap()
        k = np.arange(1, self.n)
        return float(self.n * g[0] + 2 * ((self.n - k) * g[1:]).sum())

    def quadratic(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(u @ self.entries @ u)


def expected_join_matrix(kind: str, n: int, rho: float) -> ExpectedJoinMatrix:
    return ExpectedJoinMatrix(kind, n, rho)


def empirical_join_probability(kind: str, n: int, rho: float, draws: int, seed: int, chunk: int = 20000) -> np.ndarray:
    """Monte-Carlo estimate of Pr[gamma(i) = gamma(j)] from fresh edge draws."""
    _check_kind(kind)
    rng = np.random.default_rng(seed)
    acc = np.zeros((n, n))
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        kept = rng.random((b, n)) >= rho
        if kind == "path":
            kept[:, n - 1] = False
        start = np.ones((b, n), dtype=bool)
        start[:, 1:] = ~kept[:, :-1]
        lab = np.cumsum(start, axis=1) - 1
        if kind == "cycle":
            wrap = kept[:, -1] & (lab[:, -1] != 0)
            lab = np.where(wrap[:, None] & (lab == lab[:, -1:]), 0, lab)
        acc += (lab[:, :, None] == lab[:, None, :]).sum(axis=0)
        done += b
    return acc / draws


def draw_components(kind: str, kept: np.ndarray) -> np.ndarray:
    return components_from_kept(kept, kind == "cycle")


# ---------------------------------------------------------------------------
# spectra


def circulant_eigenvalues(first_row: np.ndarray) -> np.ndarray:
    """Eigenvalues sum_k c_k w^{lk} of a symmetric circulant matrix (real)."""
    return np.real(np.fft.fft(first_row))


def min_eigenvalue(phi: ExpectedJoinMatrix, crosscheck: bool = False, tol: float = 1e-8) -> float:
    if phi.kind == "cycle":
        val = float(circulant_eigenvalues(phi.by_gap()).min())
        if crosscheck:
            dense = float(np.linalg.eigvalsh(phi.entries).min())
            if abs(dense - val) > tol:
                raise AssertionError(f"circulant {val} vs dense {dense}")
        return val
    if phi.n > 4096:
        raise DomainError("dense eigensolve limited to n <= 4096")
    return float(np.linalg.eigvalsh(phi.entries).min())


def eigen_bound(kind: str, rho: float) -> float:
    return rho / 2 if kind == "path" else rho / 4


def cycle_bound_onset(rho: float, ns) -> int | None:
    """Smallest n in the grid from which lambda_min(phi^cycle) > rho/4 holds for every larger grid n."""
    ok = [min_eigenvalue(ExpectedJoinMatrix("cycle", n, rho)) > rho / 4 for n in ns]
    onset = None
    for n, good in zip(reversed(list(ns)), reversed(ok)):
        if not good:
            break
        onset = n
    return onset


# ---------------------------------------------------------------------------
# cross term


def cross_term_max(phi: ExpectedJoinMatrix, delta_inf: float) -> tuple[float, np.ndarray]:
    """Exact max of |nu^T phi z| over {sum z = 0, |z_i| <= delta_inf}, nu uniform.

    The objective is linear with coefficients S_j = (phi^T nu)_j; the optimum puts
    +delta on the floor(n/2) largest S_j and -delta on the floor(n/2) smallest.
    """
    n = phi.n
    s = phi.entries.sum(axis=0) / n
    if phi.kind == "cycle":
        # phi^T nu is constant, so the objective vanishes on the hyperplane
        return 0.0, np.zeros(n)
    order = np.argsort(-s, kind="stable")
    z = np.zeros(n)
    h = n // 2
    z[order[:h]] = delta_inf
    z[order[n - h :]] = -delta_inf
    return float(abs(s @ z)), z


def cross_term_bound(n: int, rho: float, delta_inf: float) -> float:
    return 2 * delta_inf / (n * rho**2)


def quadratic_decomposition(mu: DiscreteDistribution | np.ndarray, phi: ExpectedJoinMatrix) -> dict:
    """mu^T phi mu together with the nu/z split, nu uniform and z = mu - nu."""
    w = mu.weights if isinstance(mu, DiscreteDistribution) else np.asarray(mu, dtype=float)
    e = phi.entries
    nu = np.full(phi.n, 1.0 / phi.n)
    z = w - nu
    parts = {"nu_nu": float(nu @ e @ nu), "cross": float(2 * nu @ e @ z), "z_z": float(z @ e @ z)}
    parts["total"] = float(w @ e @ w)
    parts["sum"] = parts["nu_nu"] + parts["cross"] + parts["z_z"]
    return parts


# ---------------------------------------------------------------------------
# relative concentration


@dataclass(frozen=True)
class RelativeConcentration:
    value: float
    t: float
    rho: float
    interval: CircularInterval


def relative_concentration(mu, rho: float, t: float, kind: str = "cycle") -> RelativeConcentration:
    """Lambda_t(mu) by exhaustive scan over intervals of size 1..n."""
    _check_kind(kind)
    w = mu.weights if isinstance(mu, DiscreteDistribution) else np.asarray(mu, dtype=float)
    n = w.size
    if n > 4096:
        raise DomainError("exhaustive scan limited to n <= 4096")
    val, i, d = kernels.lambda_scan(w, float(rho), float(t), kind == "cycle")
    return RelativeConcentration(float(val), t, rho, CircularInterval(int(i), int(d), n))


def structural_witness(mu, rho: float, t: float, kind: str = "cycle") -> tuple[CircularInterval, float, float]:
    """Heaviest interval with rho |I*| <= t; returns (interval, mu[I], Lambda_t)."""
    w = mu.weights if isinstance(mu, DiscreteDistribution) else np.asarray(mu, dtype=float)
    n = w.size
    max_len = min(n, int(math.floor(t / rho + 1e-12)) + 1)
    mass, i, d = kernels.window_max(w, max_len, kind == "cycle")
    lam = relative_concentration(w, rho, t, kind).value
    return CircularInterval(int(i), int(d), n), float(mass), lam


def default_t(n: int) -> float:
    return 1 / math.log(n)
