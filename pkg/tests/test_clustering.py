from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccsim.clustering import (
    GridClustering,
    VoronoiClustering,
    box_grid,
    check_universe,
    components_from_kept,
    draw_random_clustering,
    generate_adversarial_clustering,
    hull_lattice_points_2d,
    induced_distribution,
    interval_clustering,
    is_connected_set,
    is_lattice_convex,
)
from ccsim.domain import DiscreteDistribution, DomainError, MetricSpace


def test_grid_clustering_reps_live_in_their_cells():
    sp = MetricSpace(10, 2)
    g = box_grid(sp, 3)
    assert np.all(g.gamma[g.rep_index] == np.arange(g.num_cells))
    r = GridClustering(sp, g.gamma, rng=np.random.default_rng(0))
    assert np.all(r.gamma[r.rep_index] == np.arange(r.num_cells))


def test_rep_of_is_the_cell_representative():
    sp = MetricSpace(8, 2)
    g = box_grid(sp, (2, 4))
    pts = sp.coords(np.arange(sp.size))
    assert np.array_equal(g.rep_of(pts), g.rep_index[g.gamma])


def test_interval_clustering_breakpoints():
    c = interval_clustering(10, [3, 7])
    assert c.num_cells == 3
    assert c.breakpoints() == [3, 7]
    with pytest.raises(DomainError):
        interval_clustering(10, [0])


@pytest.mark.parametrize(
    "tag,params",
    [
        ("Intervals", {"n": 40, "cells": 6}),
        ("B", {"n": 12, "d": 2, "cells": 7}),
        ("C", {"n": 10, "d": 2, "cells": 5}),
        ("CC", {"n": 14, "d": 2, "cells": 4}),
        ("BV", {"d": 2, "bits": 6, "delta": 1 / 16, "per_axis": 2}),
    ],
)
def test_generators_land_in_their_universe(tag, params):
    for seed in range(3):
        c = generate_adversarial_clustering(tag, params, seed)
        assert check_universe(c, tag, params.get("delta"))


def test_cv_generator_inner_balls():
    c = generate_adversarial_clustering("CV", {"d": 2, "bits": 6, "delta": 1 / 16, "cells": 4}, 0)
    assert isinstance(c, VoronoiClustering)
    assert check_universe(c, "CV", 1 / 16)


def test_voronoi_extents_match_brute_force():
    sp = MetricSpace(33, 2)
    rng = np.random.default_rng(5)
    for _ in range(5):
        seeds = sp.coords(rng.choice(sp.size, size=6, replace=False))
        v = VoronoiClustering(sp, seeds)
        gamma = v.gamma
        for i in range(v.num_cells):
            pts = sp.coords(np.flatnonzero(gamma == i))
            lo, hi = v.lattice_extents_2d(i)
            assert np.array_equal(lo, pts.min(axis=0))
            assert np.array_equal(hi, pts.max(axis=0))
            assert is_lattice_convex(sp, np.flatnonzero(gamma == i))


def test_connectivity_and_convexity_checkers():
    sp = MetricSpace(5, 2)
    line = sp.index(np.array([[0, 0], [0, 1], [0, 2]]))
    gap = sp.index(np.array([[0, 0], [0, 2]]))
    ell = sp.index(np.array([[0, 0], [0, 1], [0, 2], [1, 2], [2, 2]]))
    assert is_connected_set(sp, line) and is_lattice_convex(sp, line)
    assert not is_connected_set(sp, gap) and not is_lattice_convex(sp, gap)
    # the L shape is connected but its hull also contains (1, 1)
    assert is_connected_set(sp, ell) and not is_lattice_convex(sp, ell)
    assert len(hull_lattice_points_2d(sp.coords(ell))) == 6


def test_components_examples():
    assert components_from_kept(np.array([True, False, False]), cyclic=False).tolist() == [0, 0, 1]
    assert components_from_kept(np.array([True, True, True]), cyclic=True).tolist() == [0, 0, 0]
    # edges (1,2) and (2,0) survive, so the wrap joins everything
    assert components_from_kept(np.array([False, True, True]), cyclic=True).tolist() == [0, 0, 0]
    assert components_from_kept(np.array([False, True, False]), cyclic=True).tolist() == [0, 1, 1]


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 40), st.sampled_from(["path", "cycle"]), st.floats(0.05, 1.0), st.integers(0, 10**6))
def test_random_draw_components_are_edge_components(n, kind, rho, seed):
    d = draw_random_clustering(kind, n, rho, seed)
    lab, kept = d.labels, d.kept
    for i in range(n - 1):
        if kept[i]:
            assert lab[i] == lab[i + 1]
    if kind == "path":
        assert not kept[n - 1]
        assert d.num_cells == n - int(kept.sum())
    else:
        assert d.num_cells == max(1, n - int(kept.sum()))
    assert check_universe(d.clustering, "RandomPathCycle")
    assert np.all(lab[d.clustering.rep_index] == np.arange(d.num_cells))


def test_induced_distribution():
    c = interval_clustering(4, [2])
    mu = DiscreteDistribution(np.array([0.1, 0.2, 0.3, 0.4]))
    assert np.allclose(induced_distribution(mu, c).weights, [0.3, 0.7])
