from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import linprog

from ccsim.clustering import draw_random_clustering
from ccsim.domain import DiscreteDistribution
from ccsim.families import zigzag
from ccsim.random_analysis import (
    CircularInterval,
    ExpectedJoinMatrix,
    circulant_eigenvalues,
    cross_term_bound,
    cross_term_max,
    cycle_bound_onset,
    empirical_join_probability,
    in_family,
    join_matrix,
    join_probability,
    min_eigenvalue,
    quadratic_decomposition,
    relative_concentration,
    small_large_intervals,
    structural_witness,
    zeta,
    zeta_bound_check,
)
from ccsim.random_testers import clustered_poisson_counts, collision_statistic


def test_circular_interval_cases():
    a = CircularInterval(3, 4, 10)
    assert a.elements().tolist() == [3, 4, 5, 6]
    assert a.edges().elements().tolist() == [3, 4, 5]
    assert a.endpoints == (3, 6)
    b = CircularInterval(1, -3, 10)
    assert b.elements().tolist() == [1, 0, 9]
    # edges of a counter-clockwise run: <<i-1, 1-|d|>> = {0, 9}
    assert sorted(b.edges().elements().tolist()) == [0, 9]
    assert len(CircularInterval(5, 0, 10).edges()) == 0
    assert len(CircularInterval(5, 1, 10).edges()) == 0
    assert b.crosses(9) and not in_family(b, "path") and in_family(b, "cycle")
    assert join_probability(CircularInterval(0, 3, 10), "path", 0.5) == 0.25


def test_join_matrix_examples():
    d = draw_random_clustering("path", 3, 0.5, 0, kept=np.array([True, False, False]))
    assert join_matrix(d).phi.tolist() == [[1, 1, 0], [1, 1, 0], [0, 0, 1]]
    d = draw_random_clustering("cycle", 5, 0.5, 0, kept=np.ones(5, dtype=bool))
    assert np.all(join_matrix(d).phi == 1)
    d = draw_random_clustering("cycle", 5, 0.5, 0, kept=np.zeros(5, dtype=bool))
    assert np.array_equal(join_matrix(d).phi, np.eye(5))


def test_join_matrix_is_an_equivalence():
    d = draw_random_clustering("cycle", 30, 0.3, 4)
    phi = join_matrix(d).phi.astype(bool)
    assert np.array_equal(phi, phi.T) and np.all(np.diag(phi))
    assert np.array_equal((phi.astype(int) @ phi.astype(int)) > 0, phi)


def test_expected_join_matrix_closed_forms():
    assert np.allclose(ExpectedJoinMatrix("path", 3, 0.5).entries, [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])
    assert np.array_equal(ExpectedJoinMatrix("cycle", 7, 1.0).entries, np.eye(7))
    phi = ExpectedJoinMatrix("cycle", 9, 0.4)
    e = phi.entries
    assert np.allclose(np.diag(e), 1) and np.allclose(e, e.T)
    eta = 0.6
    assert e[0, 3] == pytest.approx(eta**3 + eta**6 - eta**9)
    assert phi.total() == pytest.approx(e.sum())


def test_expected_join_matrix_monte_carlo():
    est = empirical_join_probability("cycle", 10, 0.3, 20000, 1)
    phi = ExpectedJoinMatrix("cycle", 10, 0.3).entries
    se = np.sqrt(phi * (1 - phi) / 20000) + 1e-12
    assert np.all(np.abs(est - phi) <= 4 * se)


def test_eigen_examples():
    assert min_eigenvalue(ExpectedJoinMatrix("path", 8, 0.5)) > 0.25
    assert min_eigenvalue(ExpectedJoinMatrix("cycle", 64, 0.4), crosscheck=True) > 0.10
    assert min_eigenvalue(ExpectedJoinMatrix("cycle", 16, 1.0)) == pytest.approx(1.0)
    row = ExpectedJoinMatrix("cycle", 12, 0.3).by_gap()
    assert np.allclose(np.sort(circulant_eigenvalues(row)), np.linalg.eigvalsh(ExpectedJoinMatrix("cycle", 12, 0.3).entries))
    assert cycle_bound_onset(0.5, [8, 16, 32, 64]) == 8


def lp_cross_term(phi: ExpectedJoinMatrix, delta: float) -> float:
    """Independent LP for max |S . z| over the box-hyperplane polytope."""
    n = phi.n
    s = phi.entries.sum(axis=0) / n
    best = 0.0
    for sign in (1, -1):
        res = linprog(-sign * s, A_eq=np.ones((1, n)), b_eq=[0], bounds=[(-delta, delta)] * n, method="highs")
        best = max(best, -res.fun)
    return best


@pytest.mark.parametrize("n,rho,delta", [(50, 0.2, 0.01), (51, 0.5, 0.001), (100, 0.3, 0.01)])
def test_cross_term_matches_lp(n, rho, delta):
    phi = ExpectedJoinMatrix("path", n, rho)
    val, z = cross_term_max(phi, delta)
    # the LP solver may stop slightly short; the dual bound at the median is tight
    assert lp_cross_term(phi, delta) <= val * (1 + 1e-9)
    s = phi.entries.sum(axis=0) / n
    assert val == pytest.approx(delta * np.abs(s - np.median(s)).sum(), abs=1e-15)
    assert abs(z.sum()) < 1e-15 and np.abs(z).max() <= delta
    assert val <= cross_term_bound(n, rho, delta)


def test_cross_term_trivial_cases():
    assert cross_term_max(ExpectedJoinMatrix("cycle", 40, 0.3), 0.01)[0] == 0.0
    assert cross_term_max(ExpectedJoinMatrix("path", 40, 0.3), 0.0)[0] == 0.0


def test_zeta_examples():
    assert zeta("path", 10, 0.5) == 0.0
    assert zeta("cycle", 10, 1.0) == 0.0
    assert zeta("cycle", 10, 0.5) <= 0.5**5
    assert zeta_bound_check("cycle", 10, 0.5) and zeta_bound_check("path", 10, 0.5)


def test_small_large_tie_break():
    small, large = small_large_intervals(0, 5, 10, "cycle", 0.3)
    # both arcs have 5 edges; the smaller start wins
    assert small.start == 0 and large.start == 5
    small, large = small_large_intervals(2, 3, 10, "cycle", 0.3)
    assert len(small) == 2


def test_decomposition_exact():
    rng = np.random.default_rng(2)
    for kind in ("path", "cycle"):
        phi = ExpectedJoinMatrix(kind, 40, 0.3)
        parts = quadratic_decomposition(rng.dirichlet(np.ones(40)), phi)
        assert parts["sum"] == pytest.approx(parts["total"], abs=1e-10)
    u = quadratic_decomposition(np.full(40, 1 / 40), phi)
    assert u["total"] == pytest.approx(phi.total() / 40**2)


@pytest.mark.parametrize("kind,mu", [("cycle", "uniform"), ("path", "zigzag")])
def test_expected_collision_statistic(kind, mu):
    n, rho, m = 20, 0.4, 60.0
    w = DiscreteDistribution.uniform(n) if mu == "uniform" else zigzag(n, 0.3)
    ys = []
    for s in range(4000):
        d = draw_random_clustering(kind, n, rho, s)
        ys.append(collision_statistic(clustered_poisson_counts(w, d, m, 10**6 + s).X, m))
    target = ExpectedJoinMatrix(kind, n, rho).quadratic(w.weights)
    assert abs(np.mean(ys) - target) <= 3.5 * np.std(ys) / math.sqrt(len(ys))


def brute_lambda(w, rho, t, kind):
    n = len(w)
    best = 0.0
    for i in range(n):
        for d in range(1, n + 1):
            iv = CircularInterval(i, d, n)
            if not in_family(iv, kind):
                continue
            best = max(best, iv.mass(w) / max(rho * (d - 1), t))
    return best


@pytest.mark.parametrize("kind", ["path", "cycle"])
def test_lambda_scan_matches_brute_force(kind):
    rng = np.random.default_rng(5)
    for _ in range(5):
        w = rng.dirichlet(np.full(25, 0.3))
        rc = relative_concentration(w, 0.2, 0.3, kind)
        assert rc.value == pytest.approx(brute_lambda(w, 0.2, 0.3, kind), rel=1e-12)
        assert rc.interval.mass(w) / max(0.2 * len(rc.interval.edges()), 0.3) == pytest.approx(rc.value)


def test_lambda_examples():
    n, t = 64, 1 / math.log(64)
    assert relative_concentration(np.eye(n)[0], 0.3, t).value == pytest.approx(1 / t)
    u = np.full(n, 1 / n)
    direct = max((d / n) / max(0.3 * (d - 1), t) for d in range(1, n + 1))
    assert relative_concentration(u, 0.3, t).value == pytest.approx(direct)
    assert relative_concentration(u, 0.3, t).value >= 1 / (n * t)


def test_structural_witness():
    rng = np.random.default_rng(8)
    t, rho = 0.2, 0.05
    for _ in range(10):
        w = rng.dirichlet(np.full(128, 0.2))
        iv, mass, lam = structural_witness(w, rho, t)
        assert rho * len(iv.edges()) <= t + 1e-12
        assert mass == pytest.approx(iv.mass(w))
        assert mass >= t / 2 * lam
