"""Shared generators for randomized tests.

Everything is driven by explicit ``numpy`` generators so each test is
deterministic; the helpers mirror the scale assumptions used throughout
(weights in [-1, 1], variances in (0, 1], zero-mean disturbances).
"""

from __future__ import annotations

import numpy as np
import pytest

from seminv.interventions import Intervention
from seminv.sem import GaussianNoise, SemModel


def random_sem(
    rng: np.random.Generator,
    n_max: int = 8,
    *,
    edge_prob: float = 0.5,
    var_low: float = 0.05,
    var_high: float = 1.0,
    target_has_descendants: bool | None = None,
) -> SemModel:
    """Random DAG over 3..n_max features plus a target, weights in [-1, 1]."""
    p = int(rng.integers(3, n_max + 1)) + 1
    order = [int(i) for i in rng.permutation(p)]
    if target_has_descendants is None:
        target = int(rng.integers(0, p))
    elif target_has_descendants:
        target = order[int(rng.integers(0, p - 1))]
    else:
        target = order[-1]
    weights = np.zeros((p, p))
    for a in range(p):
        for b in range(a + 1, p):
            if rng.random() < edge_prob:
                weights[order[b], order[a]] = rng.uniform(-1.0, 1.0)
    noise = tuple(GaussianNoise(float(rng.uniform(var_low, var_high))) for _ in range(p))
    return SemModel(weights=weights, topo_order=tuple(order), target=target, noise=noise)


def random_intervention(rng: np.random.Generator, sem: SemModel) -> Intervention:
    """Random hard and/or soft intervention on non-target variables."""
    candidates = list(sem.feature_indices)
    rng.shuffle(candidates)
    n_hard = int(rng.integers(0, len(candidates) // 2 + 1))
    hard = {i: float(rng.normal()) for i in candidates[:n_hard]}
    soft = {}
    for i in candidates[n_hard:]:
        if rng.random() < 0.5:
            for j in sem.parents(i):
                soft[(j, i)] = float(rng.uniform(-1.0, 1.0))
    return Intervention(hard=hard, soft=soft)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
