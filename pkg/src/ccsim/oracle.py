"""SAMP / LABEL access to a hidden clustering, with exact resource accounting."""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from .clustering import Clustering
from .domain import DiscreteDistribution, DomainError


class OracleSession:
    """Single-owner access point to (clustering, inputs).

    Every answer is a representative, reported as a flat domain index.  The
    counters are incremented by exactly the number of oracle calls made,
    including calls issued in bulk.
    """

    def __init__(
        self,
        clustering: Clustering,
        inputs: Sequence[DiscreteDistribution] = (),
        seed: int = 0,
        trace: bool = False,
    ):
        for mu in inputs:
            if mu.size != clustering.space.size:
                raise DomainError("input distribution does not live on the clustering's domain")
        self.clustering = clustering
        self.space = clustering.space
        self.inputs = list(inputs)
        self.rng = np.random.default_rng(seed)
        self.samp_count = [0] * len(self.inputs)
        self.label_count = 0
        self._trace: list[dict] | None = [] if trace else None

    # -- SAMP -------------------------------------------------------------
    def _check_which(self, which: int) -> DiscreteDistribution:
        if not 0 <= which < len(self.inputs):
            raise DomainError(f"no input distribution with id {which}")
        return self.inputs[which]

    def samp(self, which: int = 0) -> int:
        return int(self.samp_many(which, 1)[0])

    def samp_many(self, which: int, k: int) -> np.ndarray:
        mu = self._check_which(which)
        x = mu.sample(self.rng, k)
        self.samp_count[which] += int(k)
        return self.clustering.rep_index[self.clustering.gamma[x]]

    def samp_poisson(self, which: int, m: float) -> tuple[np.ndarray, np.ndarray]:
        """Poissonized batch: T_j ~ Poi(m mu_j) hidden draws, returned as (reps, counts)."""
        mu = self._check_which(which)
        t = self.rng.poisson(m * mu.weights)
        self.samp_count[which] += int(t.sum())
        per_cell = np.bincount(self.clustering.gamma, weights=t, minlength=self.clustering.num_cells)
        return self.clustering.rep_index, per_cell.astype(np.int64)

    # -- LABEL ------------------------------------------------------------
    def label(self, x) -> int:
        return int(self.label_many(np.asarray(x)[None, :])[0])

    def label_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[:, None]
        reps = self.clustering.rep_of(pts)
        self.label_count += len(pts)
        if self._trace is not None:
            for p, r in zip(pts.tolist(), reps.tolist()):
                self._trace.append({"q": p, "a": r})
        return reps

    def member(self, points, h_rep: int) -> np.ndarray:
        """LABEL each point and compare with the representative h_rep."""
        return self.label_many(points) == h_rep

    def charge_labels(self, k: int) -> None:
        """Account for label calls answered by a compiled kernel over the same oracle."""
        self.label_count += int(k)

    def trace_jsonl(self) -> str:
        if self._trace is None:
            return ""
        return "".join(json.dumps(r) + "\n" for r in self._trace)

    def resources(self) -> dict:
        return {"samples": list(self.samp_count), "labels": self.label_count}
