"""Standard TV identity / closeness testers used as building blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

ACCEPT, REJECT = "accept", "reject"


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class SubtestConstants:
    """Leading constants of the sample-size formulas (set by calibration).

    Each base run is sized to err with probability at most ``base_error``;
    majority votes then drive the error to the requested failure probability.
    """

    identity_c: float = 4.0
    identity_tau: float = 1.0
    equivalence_c: float = 4.0
    equivalence_tau: float = 1.0
    instance_c: float = 3.0
    base_error: float = 0.125


DEFAULT_CONSTANTS = SubtestConstants()


def majority_repetitions(base_error: float, fail_prob: float) -> int:
    """Smallest odd r with Pr[Bin(r, base_error) >= (r+1)/2] <= fail_prob."""
    if fail_prob >= base_error:
        return 1
    r = 1
    while binom.sf((r + 1) // 2 - 1, r, base_error) > fail_prob:
        r += 2
    return r


def identity_sample_size(k: int, eps: float, consts: SubtestConstants = DEFAULT_CONSTANTS) -> int:
    if k <= 1:
        return 0
    return math.ceil(consts.identity_c * math.sqrt(k) / eps**2)


def equivalence_sample_size(k: int, eps: float, consts: SubtestConstants = DEFAULT_CONSTANTS) -> int:
    if k <= 1:
        return 0
    return math.ceil(consts.equivalence_c * max(math.sqrt(k) / eps**2, k ** (2 / 3) / eps ** (4 / 3)))


def _split(samples: np.ndarray, r: int, m: int) -> list[np.ndarray]:
    if len(samples) < r * m:
        raise InsufficientSamples(f"need {r * m} samples, got {len(samples)}")
    return [samples[j * m : (j + 1) * m] for j in range(r)]


def chi2_identity_statistic(counts: np.ndarray, p: np.ndarray, m: int, eps: float) -> tuple[float, bool]:
    """Sum over non-negligible elements of ((N - mp)^2 - N) / (mp).

    Also reports whether any sample hit a zero-probability element.
    """
    heavy = p >= eps / (50 * len(p))
    mp = m * p[heavy]
    n = counts[heavy]
    z = float((((n - mp) ** 2 - n) / mp).sum())
    return z, bool(np.any(counts[p == 0] > 0))


def tv_identity_subtest(
    samples: np.ndarray,
    p: np.ndarray,
    eps_tv: float,
    fail_prob: float,
    consts: SubtestConstants = DEFAULT_CONSTANTS,
) -> str:
    """Test q = p vs TV(q, p) > eps_tv from i.i.d. category samples of q."""
    p = np.asarray(p, dtype=float)
    k = len(p)
    if eps_tv >= 1 or k <= 1:
        return ACCEPT
    m = identity_sample_size(k, eps_tv, consts)
    r = majority_repetitions(consts.base_error, fail_prob)
    rejects = 0
    for chunk in _split(np.asarray(samples), r, m):
        counts = np.bincount(chunk, minlength=k)
        z, off_support = chi2_identity_statistic(counts, p, m, eps_tv)
        rejects += off_support or z > consts.identity_tau * m * eps_tv**2
    return REJECT if 2 * rejects > r else ACCEPT


def identity_budget(k: int, eps_tv: float, fail_prob: float, consts: SubtestConstants = DEFAULT_CONSTANTS) -> int:
    if eps_tv >= 1 or k <= 1:
        return 0
    return majority_repetitions(consts.base_error, fail_prob) * identity_sample_size(k, eps_tv, consts)


def closeness_statistic(x: np.ndarray, y: np.ndarray) -> float:
    s = x + y
    nz = s > 0
    return float((((x[nz] - y[nz]) ** 2 - s[nz]) / s[nz]).sum())


def tv_equivalence_subtest(
    samples_a: np.ndarray,
    samples_b: np.ndarray,
    k: int,
    eps_tv: float,
    fail_prob: float,
    consts: SubtestConstants = DEFAULT_CONSTANTS,
) -> str:
    if eps_tv >= 1 or k <= 1:
        return ACCEPT
    m = equivalence_sample_size(k, eps_tv, consts)
    r = majority_repetitions(consts.base_error, fail_prob)
    rejects = 0
    for ca, cb in zip(_split(np.asarray(samples_a), r, m), _split(np.asarray(samples_b), r, m)):
        z = closeness_statistic(np.bincount(ca, minlength=k), np.bincount(cb, minlength=k))
        rejects += z > consts.equivalence_tau * m * eps_tv**2
    return REJECT if 2 * rejects > r else ACCEPT


def equivalence_budget(k: int, eps_tv: float, fail_prob: float, consts: SubtestConstants = DEFAULT_CONSTANTS) -> int:
    if eps_tv >= 1 or k <= 1:
        return 0
    return majority_repetitions(consts.base_error, fail_prob) * equivalence_sample_size(k, eps_tv, consts)


# ---------------------------------------------------------------------------
# identity testing sized by the 2/3-quasinorm of the target


def _split_target(p: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices tested by the weighted statistic, and the rest (max element + light tail)."""
    order = np.argsort(p, kind="stable")
    body = np.ones(len(p), dtype=bool)
    body[order[-1]] = False
    # drop the lightest elements carrying at most delta/8 of the mass
    tail = np.cumsum(p[order]) <= delta / 8
    body[order[tail]] = False
    return np.flatnonzero(body), np.flatnonzero(~body)


def two_thirds_norm(p: np.ndarray) -> float:
    return float((np.asarray(p) ** (2 / 3)).sum() ** 1.5)


def instance_optimal_sample_size(p: np.ndarray, delta: float, consts: SubtestConstants = DEFAULT_CONSTANTS) -> int:
    p = np.asarray(p, dtype=float)
    if len(p) <= 1:
        return 0
    body, _ = _split_target(p, delta)
    norm = two_thirds_norm(p[body]) if body.size else 0.0
    return math.ceil(consts.instance_c * max(1 / delta, norm / delta**2))


def instance_optimal_identity(
    counts: np.ndarray,
    p: np.ndarray,
    delta: float,
    m: float,
    consts: SubtestConstants = DEFAULT_CONSTANTS,
) -> str:
    """Identity test from (Poissonized) counts with mean m*q.

    Two checks: the weighted statistic sum((X - mp)^2 - X) / p^{2/3} on the
    body of p, and a count test on the excluded heavy element and tail.
    """
    p = np.asarray(p, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if len(p) <= 1:
        return ACCEPT
    if np.any(counts[p == 0] > 0):
        return REJECT
    body, rest = _split_target(p, delta)
    if body.size:
        w = p[body] ** (2 / 3)
        x = counts[body]
        stat = float((((x - m * p[body]) ** 2 - x) / w).sum())
        if stat > 2 * m * m * delta**2 / w.sum():
            return REJECT
    if rest.size:
        xr, pr = counts[rest].sum(), p[rest].sum()
        if abs(xr - m * pr) > m * delta / 2 + 3 * math.sqrt(m * pr):
            return REJECT
    return ACCEPT
