"""Partition-agreement metrics for clustering performance assessment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContingencyTable:
    """Cross-tabulation of two label vectors; entries sum to n."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or np.any(counts < 0):
            raise ValueError("counts must be a 2-D nonnegative integer matrix")
        if int(counts.sum()) != self.n:
            raise ValueError("contingency entries must sum to n")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)


def contingency(a, b) -> ContingencyTable:
    """Build the contingency table of two equal-length label vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValueError(f"label vectors must match in length, got {a.shape} vs {b.shape}")
    if a.shape[0] == 0:
        raise ValueError("label vectors must be nonempty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    counts = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(counts, (ai, bi), 1)
    return ContingencyTable(counts, a.shape[0])


def _comb2(x: np.ndarray) -> np.ndarray:
    return x * (x - 1) // 2


def _same_partition(a, b) -> bool:
    """True if the two label vectors induce identical partitions."""
    canon = {}

    def encode(v):
        canon.clear()
        return tuple(canon.setdefault(x, len(canon)) for x in v)

    return encode(np.asarray(a).tolist()) == encode(np.asarray(b).tolist())


def ari(a, b) -> float:
    """Adjusted Rand index between two labelings, via pair counting.

    Equals 1 for identical partitions (up to relabeling), has expectation 0
    under random assignment, and can be negative for worse-than-chance
    agreement. The degenerate 0/0 denominator (e.g. both partitions are
    all-singletons) is defined to be 1 when the partitions are equal and 0
    otherwise.
    """
    table = contingency(a, b)
    if table.n < 2:
        raise ValueError("ari requires at least 2 observations")
    counts = table.counts
    # All pair counts as exact integers; only the final ratio is a float.
    index = int(_comb2(counts).sum())
    sum_a = int(_comb2(counts.sum(axis=1)).sum())
    sum_b = int(_comb2(counts.sum(axis=0)).sum())
    total = table.n * (table.n - 1) // 2
    expected_times_total = sum_a * sum_b
    max_times_total = (sum_a + sum_b) * total
    denom = max_times_total - 2 * expected_times_total
    if denom == 0:
        return 1.0 if _same_partition(a, b) else 0.0
    return (2 * (index * total - expected_times_total)) / denom
