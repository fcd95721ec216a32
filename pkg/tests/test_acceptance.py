"""Acceptance suite: one PASS/FAIL line per criterion.

Run with pytest (lines are printed in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from ccsim import experiments as ex
from ccsim.cells import (
    ACCEPT,
    REJECT,
    BoundingBoxFailure,
    bounding_box,
    box_query_cap,
    cc_vs_box_reject_2d,
    discover_box_cell,
    discover_interval_cell,
    interval_query_cap,
    reject_connected_cell,
)
from ccsim.clustering import (
    GridClustering,
    draw_random_clustering,
    generate_adversarial_clustering,
    is_connected_set,
    is_lattice_convex,
    kd_split,
    random_intervals,
)
from ccsim.domain import (
    DiscreteDistribution,
    MetricSpace,
    emd_hierarchical_bound,
    emd_tv_diameter_bound,
)
from ccsim.families import zigzag
from ccsim.oracle import OracleSession
from ccsim.random_analysis import (
    ExpectedJoinMatrix,
    cross_term_bound,
    cross_term_max,
    cycle_bound_onset,
    empirical_join_probability,
    min_eigenvalue,
    quadratic_decomposition,
    structural_witness,
)
from ccsim.random_testers import SingletonTesterConfig, clustered_poisson_counts, collision_statistic

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
REPORT: dict[int, str] = {}

# fitted resource constants for the query-based tester (measured maxima 1.44 and 14.6)
LABEL_FIT = 2.0
SAMPLE_FIT = 20.0


def record(num: int, ok: bool, detail: str) -> None:
    REPORT[num] = f"{'PASS' if ok else 'FAIL'} criterion {num:>2}: {detail}"
    print(REPORT[num])


@pytest.fixture(scope="module", autouse=True)
def _print_report(request):
    yield
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    if tr is not None:
        tr.write_line("")
        for k in sorted(REPORT):
            tr.write_line(REPORT[k])


def one_cell(space: MetricSpace, idx) -> GridClustering:
    g = np.arange(1, space.size + 1)
    g[np.asarray(idx)] = 0
    return GridClustering(space, np.unique(g, return_inverse=True)[1])


def rep_of_cell(c, idx) -> int:
    return int(c.rep_index[c.gamma[int(np.asarray(idx)[0])]])


def convex_diameter(space: MetricSpace, idx) -> float:
    pts = space.coords(np.asarray(idx))
    if len(pts) >= 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    return max(float(space.dist(a, b)) for a in pts for b in pts)


def csv_body(path: Path) -> str:
    return "".join(ln for ln in path.read_text().splitlines(keepends=True) if not ln.startswith("#"))


def rates(records, key="verdict") -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for r in records:
        fam = r.values["family"]
        out.setdefault(fam, {})
        v = r.values[key]
        out[fam][v] = out[fam].get(v, 0) + 1
    return {f: {v: c / sum(d.values()) for v, c in d.items()} for f, d in out.items()}


# ---------------------------------------------------------------------------


def test_c01_closed_form_phi():
    t0 = time.perf_counter()
    worst, compared = 0.0, 0
    for kind in ("path", "cycle"):
        for n in (8, 16):
            for rho in (0.3, 0.7):
                draws = 10**5
                est = empirical_join_probability(kind, n, rho, draws, seed=1)
                phi = ExpectedJoinMatrix(kind, n, rho).entries
                se = np.sqrt(phi * (1 - phi) / draws)
                off = np.abs(est - phi)
                z = np.where(se > 0, off / np.where(se > 0, se, 1), np.where(off > 0, np.inf, 0))
                worst = max(worst, float(z.max()))
                compared += int(np.triu(se > 0, 1).sum())
    dt = time.perf_counter() - t0
    ok = worst <= 3 and dt < 60
    record(1, ok, f"max |MC - phi| = {worst:.2f} standard errors over {compared} distinct entries in 8 configs, {dt:.1f}s")
    assert ok


def test_c02_spectra():
    ns = (8, 16, 32, 64, 128)
    rhos = [round(0.1 * k, 1) for k in range(1, 10)]
    path_ok = all(min_eigenvalue(ExpectedJoinMatrix("path", n, r)) > r / 2 for n in ns for r in rhos)
    onsets = {r: cycle_bound_onset(r, ns) for r in rhos if r >= 0.2}
    cyc_ok = True
    for r, onset in onsets.items():
        for n in ns:
            lam = min_eigenvalue(ExpectedJoinMatrix("cycle", n, r), crosscheck=True, tol=1e-8)
            if onset is not None and n >= onset:
                cyc_ok &= lam > r / 4
        cyc_ok &= onset is not None
    ok = path_ok and cyc_ok
    record(2, ok, f"path > rho/2 on grid: {path_ok}; cycle > rho/4 onset per rho: {sorted(set(onsets.values()))}")
    assert ok


def test_c03_expectation_identities():
    trials = 10**4
    configs = [
        ("cycle", 64, 0.3, "uniform", 200.0),
        ("cycle", 64, 0.3, "zigzag", 200.0),
        ("path", 64, 0.5, "uniform", 150.0),
        ("path", 48, 0.2, "zigzag", 300.0),
        ("cycle", 40, 0.6, "dirichlet", 100.0),
    ]
    worst_z, worst_dec = 0.0, 0.0
    for j, (kind, n, rho, fam, m) in enumerate(configs):
        if fam == "uniform":
            mu = DiscreteDistribution.uniform(n)
        elif fam == "zigzag":
            mu = zigzag(n, 0.3)
        else:
            mu = DiscreteDistribution.normalized(np.random.default_rng(j).dirichlet(np.ones(n)))
        ys = np.empty(trials)
        for s in range(trials):
            d = draw_random_clustering(kind, n, rho, 7_000_000 + 100_000 * j + s)
            ys[s] = collision_statistic(clustered_poisson_counts(mu, d, m, 9_000_000 + 100_000 * j + s).X, m)
        phi = ExpectedJoinMatrix(kind, n, rho)
        target = phi.quadratic(mu.weights)
        worst_z = max(worst_z, abs(ys.mean() - target) / (ys.std(ddof=1) / math.sqrt(trials)))
        parts = quadratic_decomposition(mu, phi)
        worst_dec = max(worst_dec, abs(parts["sum"] - parts["total"]))
    ok = worst_z <= 3 and worst_dec <= 1e-10
    record(3, ok, f"E[Y] within {worst_z:.2f} standard errors on 5 configs; decomposition error {worst_dec:.1e}")
    assert ok


def test_c04_cross_term():
    ok, detail = True, []
    for n in (50, 100, 200):
        for rho in (0.2, 0.5):
            phi = ExpectedJoinMatrix("path", n, rho)
            s = phi.entries.sum(axis=0) / n
            for delta in (0.001, 0.01):
                val, z = cross_term_max(phi, delta)
                # feasible point attaining val, and a matching dual bound: for any lam,
                # s.z = (s - lam).z <= delta * sum|s - lam| on the polytope
                attained = abs(float(s @ z)) == val and abs(z.sum()) < 1e-15 and np.abs(z).max() <= delta
                dual = delta * float(np.abs(s - np.median(s)).sum())
                lp = max(
                    -linprog(-sg * s, A_eq=np.ones((1, n)), b_eq=[0], bounds=[(-delta, delta)] * n, method="highs").fun
                    for sg in (1, -1)
                )
                ok &= attained and abs(dual - val) <= 1e-12 and lp <= val * (1 + 1e-9)
                ok &= val <= cross_term_bound(n, rho, delta)
                detail.append(val / cross_term_bound(n, rho, delta))
    cyc = 0.0
    for n in (50, 100, 200):
        for rho in (0.2, 0.5):
            phi = ExpectedJoinMatrix("cycle", n, rho)
            s = phi.entries.sum(axis=0) / n
            # independent value: the sort construction applied to the actual cycle coefficients
            order = np.argsort(-s)
            z = np.zeros(n)
            z[order[: n // 2]], z[order[n - n // 2 :]] = 0.01, -0.01
            cyc = max(cyc, abs(float(s @ z)), cross_term_max(phi, 0.01)[0])
    ok &= cyc <= 1e-12
    record(4, ok, f"path max / bound <= {max(detail):.3f} (dual-certified, LP never exceeds it); cycle max {cyc:.1e}")
    assert ok


def test_c05_zero_query_tester(tmp_path):
    t0 = time.perf_counter()
    cfg = ex.ExperimentConfig.load(CONFIGS / "part2_zeroq.yaml")
    recs = ex.run_experiment(cfg, out=tmp_path / "zeroq.csv")
    assert all(r.values["labels"] == 0 for r in recs)
    r = rates(recs)
    acc_u = r["uniform"].get("accept", 0.0)
    rej_z = r["zigzag"].get("reject", 0.0)
    rej_p = r["point-mass"].get("reject", 0.0)
    dt = time.perf_counter() - t0
    ok = acc_u >= 0.9 and rej_z >= 0.9 and rej_p >= 0.99 and dt < 300
    record(
        5, ok,
        f"uniform accept {acc_u:.2f}, zigzag reject {rej_z:.2f}, point-mass reject {rej_p:.2f}, "
        f"label_count 0 in all {len(recs)} trials, {dt:.1f}s",
    )
    assert ok


def test_c06_query_tester(tmp_path):
    cfg = ex.ExperimentConfig.load(CONFIGS / "part2_query.yaml")
    recs = ex.run_experiment(cfg, out=tmp_path / "query.csv")
    st = SingletonTesterConfig(5000, 0.3, 0.3)
    lab = max(r.values["labels"] for r in recs) / st.label_budget()
    smp = max(r.values["samples"] for r in recs) / st.sample_budget()
    r = rates(recs)
    acc_u = r["uniform"].get("accept", 0.0)
    rej_z = r["zigzag"].get("reject", 0.0)
    ok = acc_u >= 0.8 and rej_z >= 0.8 and lab <= LABEL_FIT and smp <= SAMPLE_FIT
    record(
        6, ok,
        f"uniform accept {acc_u:.2f}, zigzag reject {rej_z:.2f}; max labels {lab:.2f} rho n ln n (fit {LABEL_FIT}), "
        f"max samples {smp:.1f} sqrt(n)/(rho eps^2) (fit {SAMPLE_FIT})",
    )
    assert ok


def test_c07_emd_tv_inequalities():
    sp = MetricSpace(8, 2)
    rng = np.random.default_rng(707)
    slack, worst = [], -math.inf
    for _ in range(200):
        a = DiscreteDistribution.normalized(rng.dirichlet(np.full(sp.size, 0.5)))
        b = DiscreteDistribution.normalized(rng.dirichlet(np.full(sp.size, 0.5)))
        g = kd_split(sp, rng, int(rng.integers(1, 40))).gamma if rng.random() < 0.5 else rng.integers(0, 12, size=sp.size)
        emd, rhs = emd_tv_diameter_bound(a, b, g, sp)
        worst = max(worst, emd - rhs)
    for _ in range(50):
        a = DiscreteDistribution.normalized(rng.dirichlet(np.full(sp.size, 0.5)))
        b = DiscreteDistribution.normalized(rng.dirichlet(np.full(sp.size, 0.5)))
        emd, rhs = emd_hierarchical_bound(a, b, sp, int(rng.integers(1, 4)))
        slack.append(emd - rhs)
    ok = worst <= 1e-9 and max(slack) <= 1e-9
    record(7, ok, f"max EMD - bound: {worst:.2e} (200 triples), {max(slack):.2e} (50 hierarchical)")
    assert ok


def _blob(sp: MetricSpace, rng, size: int) -> np.ndarray:
    start = sp.coords(int(rng.integers(sp.size)))
    cell = {tuple(start)}
    frontier = [tuple(start)]
    while len(cell) < size and frontier:
        x = frontier[int(rng.integers(len(frontier)))]
        ax, s = int(rng.integers(2)), int(rng.choice([-1, 1]))
        y = list(x)
        y[ax] += s
        y = tuple(y)
        if 0 <= y[ax] < sp.n and y not in cell:
            cell.add(y)
            frontier.append(y)
    return np.sort(sp.index(np.array(sorted(cell))))


def test_c08_cell_procedures():
    rng = np.random.default_rng(808)
    iv_err = box_err = 0
    for _ in range(200):
        n = int(rng.integers(2, 3000))
        c = random_intervals(n, rng)
        h = int(c.rep_index[c.gamma[rng.integers(n)]])
        s = OracleSession(c)
        res = discover_interval_cell(s, h)
        iv_err += not (np.array_equal(res.container(c.space), c.cell_points(int(c.gamma[h]))) and s.label_count <= interval_query_cap(n))
    for _ in range(200):
        d = int(rng.integers(2, 4))
        sp = MetricSpace(int(rng.integers(3, 64 if d == 2 else 16)), d)
        c = kd_split(sp, rng, int(rng.integers(1, 30)))
        h = int(c.rep_index[c.gamma[rng.integers(sp.size)]])
        s = OracleSession(c)
        res = discover_box_cell(s, h)
        box_err += not (np.array_equal(res.container(sp), c.cell_points(int(c.gamma[h]))) and s.label_count <= box_query_cap(sp.n, d))

    sp = MetricSpace(41, 2)
    eps1, eps2 = 0.05, 0.21  # eps2 > 2 d^{1/p} eps1 = 0.2
    rc_err = rc_n = 0
    while rc_n < 200:
        cell = _blob(sp, rng, int(rng.choice([1, 2, 3, 4, 40, 80, 150])))
        diam = sp.set_diameter(cell)
        if eps1 < diam < eps2:
            continue
        c = one_cell(sp, cell)
        v = reject_connected_cell(OracleSession(c), rep_of_cell(c, cell), eps1, eps2)
        rc_err += v.outcome != (ACCEPT if diam <= eps1 else REJECT)
        rc_n += 1

    sp = MetricSpace(128, 2)
    t1, t2 = 0.1, 0.15
    grid = sp.coords(np.arange(sp.size))
    cc_err = cc_box = cc_conv = 0
    while cc_box + cc_conv < 200:
        if cc_box < 100:
            lo = rng.integers(0, 110, size=2)
            hi = lo + rng.integers(0, 128 - lo.max(), size=2)
            mask = np.all((grid >= lo) & (grid <= hi), axis=1)
            cell = np.flatnonzero(mask)
            c = one_cell(sp, cell)
            v = cc_vs_box_reject_2d(OracleSession(c), rep_of_cell(c, cell), t1, t2)
            cc_err += v.outcome != (ACCEPT if sp.dist(lo, hi) <= t1 else REJECT)
            cc_box += 1
            continue
        ctr = rng.integers(15, 113, size=2)
        r = int(rng.integers(1, 26))
        if rng.random() < 0.5:
            mask = np.abs(grid - ctr).sum(axis=1) <= r
        else:
            w = rng.normal(size=2)
            mask = (np.abs(grid - ctr).max(axis=1) <= r) & ((grid - ctr) @ w <= rng.uniform(0, r) * np.abs(w).sum())
        cell = np.flatnonzero(mask)
        if cell.size == 0 or not is_connected_set(sp, cell) or not is_lattice_convex(sp, cell):
            continue
        diam = convex_diameter(sp, cell)
        if t1 < diam < t2:
            continue
        c = one_cell(sp, cell)
        v = cc_vs_box_reject_2d(OracleSession(c), rep_of_cell(c, cell), t1, t2)
        cc_err += (diam <= t1 and v.outcome == REJECT) or (diam >= t2 and v.outcome == ACCEPT)
        cc_conv += 1
    ok = iv_err == box_err == rc_err == cc_err == 0
    record(
        8, ok,
        f"errors: interval {iv_err}/200, box {box_err}/200, reject_connected {rc_err}/200, "
        f"cc_vs_box {cc_err}/200 ({cc_box} boxes, {cc_conv} convex)",
    )
    assert ok


def test_c09_bounding_box():
    delta = 1 / 32
    good = declared = bad = 0
    for s in range(30):
        c = generate_adversarial_clustering("CV", {"d": 2, "bits": 12, "delta": delta, "cells": 10}, s)
        for i in range(c.num_cells):
            lo, hi = c.lattice_extents_2d(i)
            try:
                bb = bounding_box(OracleSession(c, seed=1000 * s + i), c.seeds[i], delta)
            except BoundingBoxFailure:
                declared += 1
                continue
            inner = np.all(bb.inner_lo > lo) and np.all(bb.inner_hi < hi)
            outer = np.all(bb.outer_lo < lo) and np.all(bb.outer_hi > hi)
            ratio = np.all(bb.outer_hi - bb.outer_lo < 2 * (bb.inner_hi - bb.inner_lo))
            if inner and outer and ratio:
                good += 1
            else:
                bad += 1
    total = good + declared + bad
    ok = total == 300 and good >= 0.99 * total and bad == 0
    record(9, ok, f"invariants hold on {good}/{total} bodies; declared failures {declared}, silent violations {bad}")
    assert ok


def _part1_cfg(clustering: str, families: list[str], trials: int = 60) -> ex.ExperimentConfig:
    return ex.ExperimentConfig(
        name=f"bb-{clustering}",
        op="part1-identity",
        grid={
            "n": [16], "d": [2], "eps": [0.3], "Delta_ratio": [0.125], "universe": ["b-b"],
            "clustering": [clustering], "side": [[1, 2]], "family": families, "target": ["uniform"],
        },
        trials=trials,
    )


def test_c10_guarded_identity(tmp_path):
    good = ex.run_experiment(_part1_cfg("boxes", ["uniform", "corner-mass"]), out=tmp_path / "good.csv")
    single = ex.run_experiment(_part1_cfg("single-cell", ["uniform"]), out=tmp_path / "single.csv")
    r = rates(good)
    acc = r["uniform"].get("ACCEPT", 0.0)
    far = 1 - r["corner-mass"].get("ACCEPT", 0.0)
    cr = rates(single)["uniform"].get("CLUSTER_REJECT", 0.0)
    ok = acc >= 5 / 6 and far >= 5 / 6 and cr >= 5 / 6
    record(10, ok, f"HPLD boxes + mu=nu ACCEPT {acc:.2f}; EMD-far non-ACCEPT {far:.2f}; single cell CLUSTER_REJECT {cr:.2f}")
    assert ok


def test_c11_structural_witness():
    n, rho = 512, 0.05
    t = 1 / math.log(n)
    rng = np.random.default_rng(1111)
    fails = 0
    worst = math.inf
    for k in range(100):
        conc = [0.05, 0.3, 1.0, 5.0][k % 4]
        mu = rng.dirichlet(np.full(n, conc))
        iv, mass, lam = structural_witness(mu, rho, t)
        okk = rho * len(iv.edges()) <= t + 1e-12 and mass >= 0.5 * t * lam - 1e-12
        fails += not okk
        worst = min(worst, mass / (0.5 * t * lam))
    ok = fails == 0
    record(11, ok, f"witness found for {100 - fails}/100 random mu at n=512; min mu[I] / (t Lambda / 2) = {worst:.3f}")
    assert ok


def test_c12_determinism(tmp_path):
    cfgs = [
        ex.ExperimentConfig.load(CONFIGS / "part2_zeroq.yaml"),
        _part1_cfg("boxes", ["uniform", "corner-mass"], trials=10),
        ex.ExperimentConfig.load(CONFIGS / "spectrum.yaml"),
    ]
    same = True
    for j, cfg in enumerate(cfgs):
        a, b, c = (tmp_path / f"{j}{x}.csv" for x in "abc")
        ex.run_experiment(cfg, out=a)
        ex.run_experiment(cfg, out=b)
        ex.run_experiment(cfg, out=c, jobs=2)
        same &= csv_body(a) == csv_body(b) == csv_body(c)
    record(12, same, "repeated runs (serial twice, parallel once) give byte-identical CSV bodies on 3 configs")
    assert same


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
