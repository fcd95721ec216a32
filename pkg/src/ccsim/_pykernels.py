"""Reference implementations of the hot loops (used when the extension is absent)."""

from __future__ import annotations

import numpy as np


def lambda_scan(mu: np.ndarray, rho: float, t: float, cyclic: bool) -> tuple[float, int, int]:
    """Exhaustive max over intervals <<i, d>> (1 <= d <= n) of mu[I] / max(rho (d-1), t).

    Returns (value, start, length); ties keep the shortest, then leftmost interval.
    Path intervals may not cross edge n-1.
    """
    mu = np.asarray(mu, dtype=np.float64)
    n = mu.size
    pre = np.concatenate(([0.0], np.cumsum(np.concatenate((mu, mu)))))
    best, bi, bd = -1.0, 0, 1
    for d in range(1, n + 1):
        starts = n if cyclic else n - d + 1
        sums = pre[d : d + starts] - pre[:starts]
        vals = sums / max(rho * (d - 1), t)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, bi, bd = float(vals[i]), i, d
    return best, bi, bd


def window_max(mu: np.ndarray, max_len: int, cyclic: bool) -> tuple[float, int, int]:
    """Heaviest interval of at most max_len elements: (mass, start, length)."""
    mu = np.asarray(mu, dtype=np.float64)
    n = mu.size
    pre = np.concatenate(([0.0], np.cumsum(np.concatenate((mu, mu)))))
    best, bi, bd = -1.0, 0, 1
    for d in range(1, min(max_len, n) + 1):
        starts = n if cyclic else n - d + 1
        sums = pre[d : d + starts] - pre[:starts]
        i = int(np.argmax(sums))
        if sums[i] > best:
            best, bi, bd = float(sums[i]), i, d
    return best, bi, bd


def dyadic_probe_order(n: int):
    """Interior positions of [0, n) in van der Corput order: n/2, n/4, 3n/4, ..."""
    seen = {0, n - 1}
    k = 1
    while len(seen) < n:
        for j in range(1, 2**k, 2):
            x = (j * n) >> k
            if x not in seen:
                seen.add(x)
                yield x
        k += 1


def walk_cells(ans: np.ndarray, cyclic: bool, cap: int) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Learn the interval cells of a path/cycle clustering from label answers.

    ``ans[x]`` is what LABEL(x) returns.  Returns (starts, ends, queries, rejected);
    ends are inclusive, and a wrapped cycle cell has end < start.  Stops with
    rejected=True once more than ``cap`` cells have been found.
    """
    n = ans.size
    starts: list[int] = []
    ends: list[int] = []
    queries = 0

    def last_same(lo: int, hi: int, r) -> int:
        # ans[lo] == r and everything from the first mismatch up to hi differs
        nonlocal queries
        while hi - lo > 1:
            mid = (lo + hi) // 2
            queries += 1
            if ans[mid] == r:
                lo = mid
            else:
                hi = mid
        return lo

    def first_same(lo: int, hi: int, r) -> int:
        nonlocal queries
        while hi - lo > 1:
            mid = (lo + hi) // 2
            queries += 1
            if ans[mid] == r:
                hi = mid
            else:
                lo = mid
        return hi

    def out(rejected: bool):
        return np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64), queries, rejected

    pos, end = 0, n
    r = ans[0]
    queries += 1
    if cyclic and n > 1:
        queries += 1
        if ans[n - 1] == r:
            # the cell of 0 may wrap: find a point outside it to split head from tail
            gap = -1
            for x in dyadic_probe_order(n):
                queries += 1
                if ans[x] != r:
                    gap = x
                    break
            if gap < 0:
                starts.append(0)
                ends.append(n - 1)
                return out(cap < 1)
            head = last_same(0, gap, r)
            tail = first_same(gap, n - 1, r)
            starts.append(tail)
            ends.append(head)
            if len(starts) > cap:
                return out(True)
            pos, end = head + 1, tail
            r = ans[pos]
            queries += 1
    while True:
        b = last_same(pos, end, r)
        starts.append(pos)
        ends.append(b)
        if len(starts) > cap:
            return out(True)
        pos = b + 1
        if pos >= end:
            return out(False)
        r = ans[pos]
        queries += 1
