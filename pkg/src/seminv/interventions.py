"""Interventions, intervention families, and sampling from families.

A hard intervention pins a variable to a value (its incoming edges are cut and
its disturbance becomes that constant); a soft intervention rewrites incoming
edge weights while leaving the disturbance alone. The target variable may
never be touched.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import CycleDetected, TargetIntervened, ValidationError
from .sem import ConstantNoise, SemModel, _topological_order

Edge = tuple[int, int]  # (from, to)


def _content_id(hard: Mapping[int, float], soft: Mapping[Edge, float]) -> str:
    h = hashlib.sha256()
    for i, v in sorted(hard.items()):
        h.update(f"h:{i}:{float(v)!r};".encode())
    for (j, i), w in sorted(soft.items()):
        h.update(f"s:{j}->{i}:{float(w)!r};".encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class Intervention:
    """One environment: hard assignments plus soft weight overrides.

    ``id`` is a stable content hash so datasets and reports can reference the
    environment across runs; both maps empty means the observational
    environment.
    """

    hard: Mapping[int, float] = field(default_factory=dict)
    soft: Mapping[Edge, float] = field(default_factory=dict)
    id: str = ""

    def __post_init__(self) -> None:
        hard = {int(i): float(v) for i, v in self.hard.items()}
        soft = {(int(j), int(i)): float(w) for (j, i), w in self.soft.items()}
        clash = set(hard) & {i for (_, i) in soft}
        if clash:
            raise ValidationError(
                f"variables {sorted(clash)} are both hard-assigned and soft-overridden"
            )
        object.__setattr__(self, "hard", hard)
        object.__setattr__(self, "soft", soft)
        if not self.id:
            object.__setattr__(self, "id", _content_id(hard, soft))

    @property
    def is_observational(self) -> bool:
        return not self.hard and not self.soft


def observational() -> Intervention:
    return Intervention()


def apply(base: SemModel, iv: Intervention) -> SemModel:
    """Produce the environment SEM ``base`` + ``iv``.

    Hard site i: every incoming edge of i is zeroed and eta_i becomes the
    assigned constant. Soft override (j, i): the j -> i weight is replaced
    (new edges are allowed as long as the graph stays acyclic). The target's
    equation and disturbance are untouched, bit for bit.

    Raises:
        TargetIntervened: the intervention names the target.
        CycleDetected: a soft override introduced a cycle.
    """
    p = base.num_vars
    for i in iv.hard:
        if not 0 <= i < p:
            raise ValidationError(f"hard site {i} out of range")
        if i == base.target:
            raise TargetIntervened("hard assignment on the target")
    for j, i in iv.soft:
        if not (0 <= j < p and 0 <= i < p) or j == i:
            raise ValidationError(f"soft override ({j}, {i}) is not a valid edge")
        if i == base.target:
            raise TargetIntervened("soft override on an edge into the target")

    if iv.is_observational:
        return base

    weights = base.weights.copy()
    noise = list(base.noise)
    for i, value in iv.hard.items():
        weights[i, :] = 0.0
        noise[i] = ConstantNoise(value)
    for (j, i), w in iv.soft.items():
        weights[i, j] = w
    order = _topological_order(weights)  # raises CycleDetected if broken
    return SemModel(weights=weights, topo_order=order, target=base.target, noise=tuple(noise))


HARD_GAUSSIAN = "hard_gaussian"
SOFT_GAUSSIAN = "soft_gaussian"
RADEMACHER_FLIP = "rademacher_flip"
CHAIN_DISCONNECT = "chain_disconnect"
CUSTOM_MIXTURE = "custom_mixture"
KINDS = (HARD_GAUSSIAN, SOFT_GAUSSIAN, RADEMACHER_FLIP, CHAIN_DISCONNECT, CUSTOM_MIXTURE)


@dataclass(frozen=True)
class InterventionDistribution:
    """A parameterized family of interventions.

    kinds:
        hard_gaussian    hard[i] ~ N(0, scale^2) independently for i in sites.
        soft_gaussian    every existing in-edge weight of each site redrawn
                         ~ N(0, scale^2).
        rademacher_flip  each edge not entering the target negated
                         independently with probability flip_prob.
        chain_disconnect each site independently hard-assigned 0 with
                         probability 1/2, else left connected.
        custom_mixture   one of ``components`` drawn by weight, then sampled.
    """

    kind: str
    sites: tuple[int, ...] = ()
    flip_prob: float = 0.5
    scale: float = 1.0
    components: tuple[tuple[float, "InterventionDistribution"], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown intervention kind {self.kind!r}")
        object.__setattr__(self, "sites", tuple(sorted(int(i) for i in self.sites)))
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValidationError("flip_prob must lie in [0, 1]")
        if self.scale < 0:
            raise ValidationError("scale must be >= 0")
        if self.kind == CUSTOM_MIXTURE:
            if not self.components:
                raise ValidationError("custom_mixture needs at least one component")
            if any(w <= 0 for w, _ in self.components):
                raise ValidationError("mixture weights must be positive")


def _check_sites(dist: InterventionDistribution, base: SemModel) -> None:
    for i in dist.sites:
        if not 0 <= i < base.num_vars:
            raise ValidationError(f"site {i} out of range")
        if i == base.target:
            raise TargetIntervened("intervention sites must exclude the target")


def sample_intervention(
    dist: InterventionDistribution, base: SemModel, seed: int
) -> Intervention:
    """Draw one intervention from the family; deterministic given ``seed``."""
    _check_sites(dist, base)
    rng = np.random.default_rng(seed)

    if dist.kind == HARD_GAUSSIAN:
        values = rng.normal(0.0, dist.scale, size=len(dist.sites))
        return Intervention(hard=dict(zip(dist.sites, values)))

    if dist.kind == SOFT_GAUSSIAN:
        soft: dict[Edge, float] = {}
        for i in dist.sites:
            for j in base.parents(i):
                soft[(j, i)] = rng.normal(0.0, dist.scale)
        return Intervention(soft=soft)

    if dist.kind == RADEMACHER_FLIP:
        soft = {}
        for i in range(base.num_vars):
            if i == base.target:
                continue
            for j in base.parents(i):
                if rng.random() < dist.flip_prob:
                    soft[(j, i)] = -base.weights[i, j]
        return Intervention(soft=soft)

    if dist.kind == CHAIN_DISCONNECT:
        hard = {i: 0.0 for i in dist.sites if rng.random() < 0.5}
        return Intervention(hard=hard)

    weights = np.array([w for w, _ in dist.components])
    pick = rng.choice(len(dist.components), p=weights / weights.sum())
    child_seed = int(rng.integers(0, 2**63 - 1))
    return sample_intervention(dist.components[pick][1], base, child_seed)
