"""Reference SEMs used by the test suite, the CLI docs, and the experiment.

``faithfulness_sem`` and ``chain_sem`` are the two small models whose
invariant-subset structure is known exactly; ``experiment_sem`` is the
representative 7-node benchmark the generalization study runs on.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .experiment import ExperimentConfig
from .interventions import (
    CHAIN_DISCONNECT,
    HARD_GAUSSIAN,
    RADEMACHER_FLIP,
    SOFT_GAUSSIAN,
    Intervention,
    InterventionDistribution,
)
from .sem import GaussianNoise, SemModel, build_sem


def two_chain(weight: float = 1.0, variance: float = 1.0) -> SemModel:
    """Smallest valid model: one feature feeding the target."""
    return build_sem(
        edges=[(0, 1, weight)],
        noise=(GaussianNoise(variance), GaussianNoise(variance)),
        target=1,
    )


def faithfulness_sem(a: float = 1.0, b: float = -1.0, copy_noise: float = 0.0) -> SemModel:
    """Four-variable model with a cancelling path pair (faithfulness violation).

    x0 is a root, x1 copies x0 (disturbance variance ``copy_noise``; the
    default 0 makes the copy exact), x2 = a x0 + b x1 + noise, and the target
    is x1 + x2 + noise. When a = -b the two x0 -> x2 routes cancel, so x2
    decouples from the root and the single-parent subset {x1} carries an
    environment-independent head; any a != -b variant breaks that.
    """
    return build_sem(
        edges=[(0, 1, 1.0), (0, 2, a), (1, 2, b), (1, 3, 1.0), (2, 3, 1.0)],
        noise=(
            GaussianNoise(1.0),
            GaussianNoise(copy_noise),
            GaussianNoise(1.0),
            GaussianNoise(1.0),
        ),
        target=3,
    )


def cancelling_soft_variants(count: int, seed: int, scale: float = 1.0) -> list[Intervention]:
    """Soft redraws of the (a, b) pair that keep the cancellation a = -b."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = float(rng.normal(0.0, scale))
        out.append(Intervention(soft={(0, 2): a, (1, 2): -a}))
    return out


def broken_cancellation_variant(a: float = 1.0, b: float = 1.0) -> Intervention:
    """A soft variant with a != -b, outside the cancelling family."""
    if a == -b:
        raise ValidationError("this variant must break the cancellation")
    return Intervention(soft={(0, 2): a, (1, 2): b})


def chain_sem(
    n_chain: int = 6,
    root_variance: float = 1.0,
    chain_variance: float = 0.0,
    target_variance: float = 1.0,
) -> SemModel:
    """Chain x0 -> x1 -> ... -> x_{n-1} with target parents {x0, x_{n-1}}.

    ``chain_variance`` is the disturbance variance of every chain node past the
    root; 0 gives the deterministic relay whose population invariances are
    exact.
    """
    if n_chain < 3:
        raise ValidationError("chain needs at least 3 chain nodes")
    edges = [(i, i + 1, 1.0) for i in range(n_chain - 1)]
    edges += [(0, n_chain, 1.0), (n_chain - 1, n_chain, 1.0)]
    noise = [GaussianNoise(root_variance)]
    noise += [GaussianNoise(chain_variance)] * (n_chain - 1)
    noise += [GaussianNoise(target_variance)]
    return build_sem(edges=edges, noise=tuple(noise), target=n_chain)


def chain_interior(n_chain: int = 6) -> tuple[int, ...]:
    """Chain nodes eligible for disconnection: everything strictly between the
    root and the last chain node."""
    return tuple(range(1, n_chain - 1))


def chain_disconnect_dist(n_chain: int = 6) -> InterventionDistribution:
    return InterventionDistribution(kind=CHAIN_DISCONNECT, sites=chain_interior(n_chain))


def disconnect_patterns(n_chain: int = 6) -> list[Intervention]:
    """All 2^(n-2) interior disconnect patterns, the empty one first."""
    interior = chain_interior(n_chain)
    patterns = []
    for mask in range(2 ** len(interior)):
        hard = {site: 0.0 for bit, site in enumerate(interior) if mask >> bit & 1}
        patterns.append(Intervention(hard=hard))
    return patterns


# ---------------------------------------------------------------------------
# the 7-node benchmark for the generalization study
# ---------------------------------------------------------------------------

EXPERIMENT_NAMES = ("v1", "v2", "v3", "v4", "v5", "v6", "xt")
EXPERIMENT_SITES = (2, 3, 4)  # v3, v4, v5
EXPERIMENT_TARGET = 6


def experiment_sem(noise_variance: float = 0.02, child_variance: float = 1.0) -> SemModel:
    """Representative 7-node benchmark with unit edge weights.

    Layout (indices into EXPERIMENT_NAMES): v2 is a root feeding the
    intervention-site chain v3 -> v4 -> v5; v5 and v6 are the target's
    parents, with v6 reading v5 so the co-parent correlation rides on an
    ordinary (flippable) edge; v1 is a child of the target, which keeps the
    pooled ERM head environment-dependent. The child carries its own, larger
    disturbance so that subsets containing it have strongly
    environment-dependent heads and never sit on the discovery threshold.
    """
    edges = [
        (1, 2, 1.0),
        (2, 3, 1.0),
        (3, 4, 1.0),
        (4, 5, 1.0),
        (4, 6, 1.0),
        (5, 6, 1.0),
        (6, 0, 1.0),
    ]
    noise = (GaussianNoise(child_variance),) + tuple(
        GaussianNoise(noise_variance) for _ in range(6)
    )
    return build_sem(edges=edges, noise=noise, target=EXPERIMENT_TARGET)


def experiment_dist(kind: str, flip_prob: float = 0.5, scale: float = 1.0) -> InterventionDistribution:
    """Train/test families of the study, keyed by short name."""
    if kind == "hard":
        return InterventionDistribution(kind=HARD_GAUSSIAN, sites=EXPERIMENT_SITES, scale=scale)
    if kind == "soft":
        return InterventionDistribution(kind=SOFT_GAUSSIAN, sites=EXPERIMENT_SITES, scale=scale)
    if kind == "rad":
        return InterventionDistribution(kind=RADEMACHER_FLIP, flip_prob=flip_prob)
    raise ValidationError(f"unknown family {kind!r} (expected hard, soft, or rad)")


def experiment_config(
    train: str = "hard",
    test: str = "hard",
    *,
    n_samples: int = 30_000,
    repeats: int = 5,
    m_train_range: tuple[int, ...] = tuple(range(3, 21)),
    m_test: int = 100,
    noise_variance: float = 0.02,
    master_seed: int = 0,
) -> ExperimentConfig:
    return ExperimentConfig(
        sem=experiment_sem(noise_variance),
        train_dist=experiment_dist(train),
        test_dist=experiment_dist(test),
        m_train_range=m_train_range,
        m_test=m_test,
        n_samples=n_samples,
        repeats=repeats,
        master_seed=master_seed,
    )
