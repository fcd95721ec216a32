"""Named distribution families used by experiments and tests."""

from __future__ import annotations

import numpy as np

from .domain import DiscreteDistribution, DomainError, MetricSpace

FAMILIES = ("uniform", "zigzag", "point-mass", "block-shift", "random-dirichlet", "corner-mass")


def zigzag(n: int, eps: float) -> DiscreteDistribution:
    """Uniform with +-2 eps/n alternating on consecutive elements; TV exactly eps for even n."""
    if n % 2:
        raise DomainError("zigzag needs an even domain size")
    if not 0 <= eps <= 0.5:
        raise DomainError("zigzag needs eps in [0, 1/2]")
    w = np.full(n, 1.0 / n)
    w[1::2] += 2 * eps / n
    w[0::2] -= 2 * eps / n
    return DiscreteDistribution(w)


def block_shift(n: int, eps: float, width: int) -> DiscreteDistribution:
    """Move eps mass from the first `width` elements onto the next `width`."""
    if width < 1 or 2 * width > n:
        raise DomainError("block-shift needs 1 <= width <= n/2")
    if eps > width / n:
        raise DomainError("block-shift cannot move more mass than the block holds")
    w = np.full(n, 1.0 / n)
    w[:width] -= eps / width
    w[width : 2 * width] += eps / width
    return DiscreteDistribution(w)


def random_dirichlet(n: int, seed: int, concentration: float = 1.0) -> DiscreteDistribution:
    rng = np.random.default_rng(seed)
    return DiscreteDistribution.normalized(rng.dirichlet(np.full(n, concentration)))


def corner_mass(space: MetricSpace, frac: float = 1.0) -> DiscreteDistribution:
    """Mixture of frac on the origin corner and 1-frac uniform."""
    w = np.full(space.size, (1 - frac) / space.size)
    w[0] += frac
    return DiscreteDistribution(w)


def make_family(name: str, size: int, params: dict | None = None, space: MetricSpace | None = None) -> DiscreteDistribution:
    params = params or {}
    if name == "uniform":
        return DiscreteDistribution.uniform(size)
    if name == "zigzag":
        return zigzag(size, float(params["eps"]))
    if name == "point-mass":
        return DiscreteDistribution.point_mass(size, int(params.get("at", 0)))
    if name == "block-shift":
        return block_shift(size, float(params["eps"]), int(params.get("width", max(1, size // 4))))
    if name == "random-dirichlet":
        return random_dirichlet(size, int(params.get("seed", 0)), float(params.get("concentration", 1.0)))
    if name == "corner-mass":
        if space is None:
            raise DomainError("corner-mass needs a grid")
        return corner_mass(space, float(params.get("frac", 1.0)))
    raise DomainError(f"unknown distribution family {name!r}")
