"""Linear structural equation models: construction, exact moments, sampling.

A model over ``p = n + 1`` variables (n features plus one target) is

    X_i = sum_j B[i, j] * X_j + eta_i

with ``B[i, j]`` the weight of the edge ``j -> i`` (rows index the child
equation, so permuting by a topological order makes ``B`` strictly lower
triangular) and ``eta_i`` either an independent Gaussian disturbance or a
constant left behind by a hard assignment.

All moments here are uncentered second moments (about zero): the regression
heads downstream carry no intercept, so ``E[X X^T]`` rather than the centered
covariance is the object every formula needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import CycleDetected, InsufficientSamples, InvalidNoiseSpec


@dataclass(frozen=True)
class GaussianNoise:
    """Exogenous Gaussian disturbance with the given variance and mean."""

    variance: float
    mean: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.variance) or self.variance < 0:
            raise InvalidNoiseSpec(f"variance must be finite and >= 0, got {self.variance}")
        if not np.isfinite(self.mean):
            raise InvalidNoiseSpec(f"mean must be finite, got {self.mean}")


@dataclass(frozen=True)
class ConstantNoise:
    """Disturbance pinned to a constant, as produced by a hard assignment."""

    value: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise InvalidNoiseSpec(f"constant must be finite, got {self.value}")


NoiseSpec = Union[GaussianNoise, ConstantNoise]


def _topological_order(weights: np.ndarray) -> tuple[int, ...]:
    """Kahn's algorithm on the nonzero pattern of ``weights`` (edge j->i at [i, j])."""
    p = weights.shape[0]
    indeg = [int(np.count_nonzero(weights[i])) for i in range(p)]
    ready = [i for i in range(p) if indeg[i] == 0]
    order: list[int] = []
    while ready:
        j = ready.pop()
        order.append(j)
        for i in range(p):
            if weights[i, j] != 0.0:
                indeg[i] -= 1
                if indeg[i] == 0:
                    ready.append(i)
    if len(order) != p:
        raise CycleDetected("edge set contains a directed cycle")
    return tuple(order)


@dataclass(frozen=True)
class SemModel:
    """Immutable linear SEM.

    Attributes:
        weights: (p, p) matrix, ``weights[i, j]`` is the weight of edge j -> i.
        topo_order: permutation of range(p) witnessing acyclicity.
        target: index of the predicted variable.
        noise: per-variable disturbance specs; the target's is always Gaussian.
    """

    weights: np.ndarray
    topo_order: tuple[int, ...]
    target: int
    noise: tuple[NoiseSpec, ...]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        p = w.shape[0]
        if w.shape != (p, p):
            raise ValueError(f"weights must be square, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if len(self.noise) != p:
            raise InvalidNoiseSpec(f"expected {p} noise entries, got {len(self.noise)}")
        if not 0 <= self.target < p:
            raise ValueError(f"target index {self.target} out of range")
        if isinstance(self.noise[self.target], ConstantNoise):
            raise InvalidNoiseSpec("the target's disturbance must stay exogenous")
        if sorted(self.topo_order) != list(range(p)):
            raise ValueError("topo_order must be a permutation of the variable indices")
        perm = np.asarray(self.topo_order)
        permuted = w[np.ix_(perm, perm)]
        if np.any(np.triu(permuted) != 0.0):
            raise CycleDetected("weights are not strictly lower triangular under topo_order")

    @property
    def num_vars(self) -> int:
        """Total variable count p = n + 1."""
        return self.weights.shape[0]

    @property
    def num_features(self) -> int:
        """Number of non-target variables n."""
        return self.num_vars - 1

    @property
    def feature_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.num_vars) if i != self.target)

    @property
    def target_weights(self) -> np.ndarray:
        """The target's parent weights over the non-target coordinates (zero-padded)."""
        return self.weights[self.target, list(self.feature_indices)].copy()

    def parents(self, i: int) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.weights[i]))


def build_sem(
    edges: Iterable[tuple[int, int, float]],
    noise: Sequence[NoiseSpec],
    target: int,
) -> SemModel:
    """Assemble a validated SemModel from an edge list and per-variable noise.

    Args:
        edges: triples ``(from, to, weight)``.
        noise: one spec per variable; its length fixes the variable count.
        target: index of the predicted variable.

    Raises:
        CycleDetected: the edges do not form a DAG.
        InvalidNoiseSpec: malformed noise, or constant noise on the target.
    """
    p = len(noise)
    weights = np.zeros((p, p))
    for src, dst, w in edges:
        if not (0 <= src < p and 0 <= dst < p):
            raise ValueError(f"edge ({src}, {dst}) out of range for {p} variables")
        if src == dst:
            raise CycleDetected(f"self-loop on variable {src}")
        if not np.isfinite(w):
            raise ValueError(f"edge ({src}, {dst}) has non-finite weight")
        weights[dst, src] = w
    order = _topological_order(weights)
    return SemModel(weights=weights, topo_order=order, target=target, noise=tuple(noise))


def fundamental_matrix(sem: SemModel) -> np.ndarray:
    """(I - B)^{-1} via the nilpotent power sum sum_k B^k.

    Exact for DAGs: entry (i, j) accumulates the total path weight from j to i.
    """
    p = sem.num_vars
    total = np.eye(p)
    power = np.eye(p)
    for _ in range(p - 1):
        power = power @ sem.weights
        if not power.any():
            break
        total += power
    return total


def noise_second_moment(sem: SemModel) -> np.ndarray:
    """Xi = E[eta eta^T] for independent disturbances (constants included)."""
    var = np.array(
        [s.variance if isinstance(s, GaussianNoise) else 0.0 for s in sem.noise]
    )
    mu = np.array(
        [s.mean if isinstance(s, GaussianNoise) else s.value for s in sem.noise]
    )
    return np.diag(var) + np.outer(mu, mu)


def full_second_moment(sem: SemModel) -> np.ndarray:
    """E[X X^T] over all p variables: M Xi M^T with M the fundamental matrix."""
    m = fundamental_matrix(sem)
    second = m @ noise_second_moment(sem) @ m.T
    return 0.5 * (second + second.T)


def population_covariance(sem: SemModel) -> np.ndarray:
    """Sigma = E[X_{-t} X_{-t}^T]: the full second moment with the target deleted."""
    idx = list(sem.feature_indices)
    return full_second_moment(sem)[np.ix_(idx, idx)]


def cross_moment(sem: SemModel) -> np.ndarray:
    """E[X_{-t} X_t] from first principles.

    Expanding X_t through its structural equation,

        E[X_{-t} X_t] = Sigma beta_t + J (I - B)^{-1} E[eta eta_t],

    where the second term carries the anti-causal contribution of the target's
    own disturbance flowing into its descendants.
    """
    idx = list(sem.feature_indices)
    beta = sem.target_weights
    sigma = population_covariance(sem)
    m = fundamental_matrix(sem)
    eta_corr = m @ noise_second_moment(sem)[:, sem.target]
    return sigma @ beta + eta_corr[idx]


@dataclass(frozen=True)
class Dataset:
    """Samples from one interventional distribution, with provenance.

    ``second_moment`` caches ``samples^T samples / N`` so that per-subset
    least-squares fits downstream never rescan the rows.
    """

    samples: np.ndarray
    target: int
    intervention_id: str
    seed: int
    second_moment: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        if s.shape[0] < 2:
            raise InsufficientSamples("a dataset needs at least 2 rows")
        if not 0 <= self.target < s.shape[1]:
            raise ValueError(f"target index {self.target} out of range")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "second_moment", s.T @ s / s.shape[0])

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_vars(self) -> int:
        return self.samples.shape[1]

    @property
    def feature_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.num_vars) if i != self.target)


def sample_dataset(sem: SemModel, n_samples: int, seed: int, intervention_id: str = "") -> Dataset:
    """Ancestral sampling in topological order; deterministic given ``seed``."""
    if n_samples < 2:
        raise InsufficientSamples("n_samples must be >= 2")
    rng = np.random.default_rng(seed)
    x = np.zeros((n_samples, sem.num_vars))
    for i in sem.topo_order:
        spec = sem.noise[i]
        if isinstance(spec, ConstantNoise):
            eta = np.full(n_samples, spec.value)
        else:
            eta = rng.normal(spec.mean, np.sqrt(spec.variance), size=n_samples)
        x[:, i] = x @ sem.weights[i] + eta
    return Dataset(samples=x, target=sem.target, intervention_id=intervention_id, seed=seed)
