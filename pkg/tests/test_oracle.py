from __future__ import annotations

import json

import numpy as np
import pytest
from scipy import stats

from ccsim.clustering import box_grid, interval_clustering
from ccsim.domain import DiscreteDistribution, DomainError, MetricSpace
from ccsim.oracle import OracleSession


def make_session(trace=False, seed=0):
    c = interval_clustering(8, [3, 6])
    mu = DiscreteDistribution.normalized(np.arange(1, 9, dtype=float))
    return c, OracleSession(c, [mu, DiscreteDistribution.uniform(8)], seed=seed, trace=trace)


def test_counters_are_exact():
    c, s = make_session()
    s.samp(0)
    s.samp_many(1, 7)
    s.label(np.array([2]))
    s.label_many(np.arange(8))
    s.member(np.array([0, 1, 5]), int(c.rep_index[0]))
    s.charge_labels(4)
    assert s.resources() == {"samples": [1, 7], "labels": 1 + 8 + 3 + 4}


def test_answers_are_representatives():
    c, s = make_session()
    reps = s.samp_many(0, 500)
    assert set(reps.tolist()) <= set(c.rep_index.tolist())
    assert np.array_equal(s.label_many(np.arange(8)), c.rep_index[c.gamma])


def test_unknown_input_and_domain_mismatch():
    c, s = make_session()
    with pytest.raises(DomainError):
        s.samp(2)
    with pytest.raises(DomainError):
        OracleSession(c, [DiscreteDistribution.uniform(5)])


def test_samp_poisson_counts_and_law():
    c = interval_clustering(6, [2])
    mu = DiscreteDistribution(np.array([0.1, 0.1, 0.2, 0.2, 0.2, 0.2]))
    s = OracleSession(c, [mu], seed=3)
    totals = []
    cell0 = []
    for _ in range(2000):
        reps, counts = s.samp_poisson(0, 50.0)
        assert np.array_equal(reps, c.rep_index)
        totals.append(counts.sum())
        cell0.append(counts[0])
    assert s.samp_count[0] == sum(totals)
    # per-cell counts are Poisson with mean m * mu(cell)
    edges = np.array([0, 6, 8, 10, 12, 14, 10**6])
    obs = np.histogram(cell0, bins=edges)[0]
    pois = stats.poisson(10.0)
    exp = np.diff(pois.cdf(edges - 1)) * len(cell0)
    assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 1e-3
    assert np.mean(totals) == pytest.approx(50.0, rel=0.02)


def test_sessions_are_seeded():
    _, a = make_session(seed=11)
    _, b = make_session(seed=11)
    assert np.array_equal(a.samp_many(0, 100), b.samp_many(0, 100))


def test_trace_records_each_label_call():
    c, s = make_session(trace=True)
    s.label_many(np.array([0, 4, 7]))
    rows = [json.loads(x) for x in s.trace_jsonl().splitlines()]
    assert [r["q"] for r in rows] == [[0], [4], [7]]
    assert [r["a"] for r in rows] == c.rep_index[c.gamma[[0, 4, 7]]].tolist()
    _, quiet = make_session()
    quiet.label(np.array([1]))
    assert quiet.trace_jsonl() == ""


def test_label_on_grid_domain():
    sp = MetricSpace(6, 2)
    g = box_grid(sp, 2)
    s = OracleSession(g)
    assert s.label(np.array([5, 5])) == int(g.rep_index[g.gamma[sp.index(np.array([5, 5]))]])
    with pytest.raises(DomainError):
        s.label(np.array([6, 0]))
