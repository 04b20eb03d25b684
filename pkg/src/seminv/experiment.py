"""Generalization study: discover approximately invariant subsets from training
datasets, measure how often they keep their least-squares head on fresh test
datasets, and compare against the pooled ERM baseline.

Subsets are scored with the head-dispersion ratio

    rho_S = sum_{j1 < j2} ||f_j1 - f_j2|| / ((m - 1) ||sum_j f_j||)

over the per-dataset least-squares heads f_j; small rho_S means the subset's
head barely moves across training environments. The pair sum runs over
unordered distinct pairs, and the reference thresholds are tied to that
convention.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyBin, TooManyVariables, ValidationError, ZeroMeanHead
from .interventions import InterventionDistribution, apply, sample_intervention
from .invariance import Head, Representation, head_for_moments
from .sem import Dataset, SemModel, sample_dataset

_ROLES = {"train_iv": 1, "train_data": 2, "test_iv": 3, "test_data": 4}


def child_seed(master_seed: int, role: str, m: int, repeat: int, index: int) -> int:
    """Stable 64-bit child seed for one sampling role inside one (m, repeat) cell."""
    ss = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(_ROLES[role], m, repeat, index)
    )
    w = ss.generate_state(2, dtype=np.uint64)
    return int(w[0] ^ (w[1] << 1)) % (2**63)


def rho_statistic(heads: Sequence[np.ndarray]) -> float:
    """Dispersion of a family of heads; +inf when the mean head vanishes."""
    m = len(heads)
    if m < 2:
        raise ValidationError("rho needs at least 2 heads")
    stacked = np.asarray(heads, dtype=float)
    total = stacked.sum(axis=0)
    denom = (m - 1) * float(np.linalg.norm(total))
    if denom == 0.0:
        return math.inf
    num = sum(
        float(np.linalg.norm(stacked[i] - stacked[j]))
        for i, j in itertools.combinations(range(m), 2)
    )
    return num / denom


def _subset_head(m2: np.ndarray, target: int, subset: Sequence[int], feature_indices: Sequence[int]) -> np.ndarray:
    """Minimum-norm least-squares head for a 0/1 subset, padded to n coordinates.

    Works on the variable-index submatrix of the cached second moment; equal to
    ``least_squares_head`` with the corresponding 0/1 representation.
    """
    cols = [feature_indices[s] for s in subset]
    gram = m2[np.ix_(cols, cols)]
    rhs = m2[cols, target]
    coeffs = np.linalg.pinv(gram, rcond=1e-10, hermitian=True) @ rhs
    head = np.zeros(len(feature_indices))
    head[list(subset)] = coeffs
    return head


@dataclass(frozen=True)
class DiscoveredSubset:
    subset: tuple[int, ...]
    rho: float
    mean_head: np.ndarray


def discover_invariant_subsets(
    datasets: Sequence[Dataset], threshold: float
) -> list[DiscoveredSubset]:
    """Enumerate every nonempty feature subset and keep those with rho below threshold.

    Raises:
        TooManyVariables: more than 20 features (power-set blowup guard).
    """
    if len(datasets) < 2:
        raise ValidationError("discovery needs at least 2 datasets")
    if threshold <= 0:
        raise ValidationError("threshold must be > 0")
    feats = datasets[0].feature_indices
    n = len(feats)
    if n > 20:
        raise TooManyVariables(f"{n} features is past the enumeration guard of 20")
    if any(d.feature_indices != feats or d.target != datasets[0].target for d in datasets):
        raise ValidationError("datasets disagree on layout")

    out: list[DiscoveredSubset] = []
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            heads = [_subset_head(d.second_moment, d.target, subset, feats) for d in datasets]
            rho = rho_statistic(heads)
            if rho < threshold:
                out.append(
                    DiscoveredSubset(
                        subset=subset, rho=rho, mean_head=np.mean(heads, axis=0)
                    )
                )
    return out


def _generalizes(f_test: np.ndarray, mean_head: np.ndarray, threshold: float) -> bool:
    ref = float(np.linalg.norm(mean_head))
    if ref == 0.0:
        raise ZeroMeanHead("generalization needs a nonzero training mean head")
    return float(np.linalg.norm(f_test - mean_head)) / ref < threshold


def generalization_percentage(
    subset: Sequence[int],
    mean_head: np.ndarray,
    test_datasets: Sequence[Dataset],
    threshold: float,
) -> float:
    """Percent of test datasets whose subset head stays near the training mean head."""
    if not test_datasets:
        raise ValidationError("need at least one test dataset")
    subset = tuple(int(s) for s in subset)
    hits = 0
    for ds in test_datasets:
        f_test = _subset_head(ds.second_moment, ds.target, subset, ds.feature_indices)
        if _generalizes(f_test, np.asarray(mean_head, dtype=float), threshold):
            hits += 1
    return 100.0 * hits / len(test_datasets)


def _pooled_full_head(datasets: Sequence[Dataset]) -> np.ndarray:
    weights = np.array([d.num_samples for d in datasets], dtype=float)
    m2 = sum(w * d.second_moment for w, d in zip(weights, datasets)) / weights.sum()
    feats = datasets[0].feature_indices
    return _subset_head(m2, datasets[0].target, range(len(feats)), feats)


def erm_baseline(
    train_datasets: Sequence[Dataset],
    test_datasets: Sequence[Dataset],
    threshold: float,
) -> float:
    """Pool the training rows, fit the all-features head, score it on the test heads."""
    if not train_datasets or not test_datasets:
        raise ValidationError("need nonempty train and test dataset lists")
    pooled = _pooled_full_head(train_datasets)
    n = len(train_datasets[0].feature_indices)
    return generalization_percentage(range(n), pooled, test_datasets, threshold)


def conditional_subsample(
    data: Dataset, rule_var_set: Iterable[int], num_bins: int
) -> list[Dataset]:
    """Split one observational dataset into pseudo-environments.

    Rows are ordered by the first rule variable and cut into ``num_bins``
    equal-frequency bins, each inheriting the parent's provenance.
    """
    rule_vars = sorted(int(v) for v in rule_var_set)
    if not rule_vars:
        raise ValidationError("rule variable set must be nonempty")
    if data.target in rule_vars:
        raise ValidationError("rule variables must exclude the target")
    if num_bins < 1:
        raise ValidationError("num_bins must be >= 1")
    order = np.argsort(data.samples[:, rule_vars[0]], kind="stable")
    chunks = np.array_split(order, num_bins)
    if any(len(c) < 2 for c in chunks):
        raise EmptyBin(f"{num_bins} bins over {data.num_samples} rows leaves a bin with < 2 rows")
    return [
        Dataset(
            samples=data.samples[c],
            target=data.target,
            intervention_id=f"{data.intervention_id}#bin{k}",
            seed=data.seed,
        )
        for k, c in enumerate(chunks)
    ]


# ---------------------------------------------------------------------------
# end-to-end harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    sem: SemModel
    train_dist: InterventionDistribution
    test_dist: InterventionDistribution
    m_train_range: tuple[int, ...] = tuple(range(3, 21))
    m_test: int = 100
    n_samples: int = 30_000
    rho_threshold: float = 0.02
    gen_threshold: float = 0.02
    repeats: int = 5
    master_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "m_train_range", tuple(int(m) for m in self.m_train_range))
        if self.rho_threshold <= 0 or self.gen_threshold <= 0:
            raise ValidationError("thresholds must be > 0")
        if self.m_test < 1:
            raise ValidationError("m_test must be >= 1")
        if any(m < 2 for m in self.m_train_range):
            raise ValidationError("every m in m_train_range must be >= 2 (rho needs 2 heads)")
        if self.repeats < 1 or self.n_samples < 2:
            raise ValidationError("repeats must be >= 1 and n_samples >= 2")


@dataclass(frozen=True)
class SubsetResult:
    subset: tuple[int, ...]
    rho: float
    generalization_pct: float


@dataclass(frozen=True)
class RepeatResult:
    m: int
    repeat: int
    subsets: tuple[SubsetResult, ...]
    erm_generalization_pct: float
    train_intervention_ids: tuple[str, ...]


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    results: tuple[RepeatResult, ...]

    def for_m(self, m: int) -> list[RepeatResult]:
        return [r for r in self.results if r.m == m]

    def median_subset_generalization(self, m: int) -> float:
        vals = [s.generalization_pct for r in self.for_m(m) for s in r.subsets]
        if not vals:
            raise ValidationError(f"no discovered subsets at m={m}")
        return float(np.median(vals))

    def median_erm(self, m: int) -> float:
        vals = [r.erm_generalization_pct for r in self.for_m(m)]
        return float(np.median(vals))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "results": [
                {
                    "m": r.m,
                    "repeat": r.repeat,
                    "erm_generalization_pct": r.erm_generalization_pct,
                    "train_intervention_ids": list(r.train_intervention_ids),
                    "subsets": [
                        {
                            "subset": list(s.subset),
                            "rho": s.rho,
                            "generalization_pct": s.generalization_pct,
                        }
                        for s in r.subsets
                    ],
                }
                for r in self.results
            ],
        }


def _config_echo(config: ExperimentConfig) -> dict:
    return {
        "m_train_range": list(config.m_train_range),
        "m_test": config.m_test,
        "n_samples": config.n_samples,
        "rho_threshold": config.rho_threshold,
        "gen_threshold": config.gen_threshold,
        "repeats": config.repeats,
        "master_seed": config.master_seed,
        "train_dist_kind": config.train_dist.kind,
        "test_dist_kind": config.test_dist.kind,
        "seed_derivation": "SeedSequence(master, spawn_key=(role, m, repeat, index))",
    }


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Full study: for each m and repeat, draw training environments, discover
    invariant subsets, and score them plus the ERM baseline on fresh test
    environments. Fully deterministic given ``master_seed``."""
    sem = config.sem
    results: list[RepeatResult] = []
    for m in config.m_train_range:
        for rep in range(config.repeats):
            train: list[Dataset] = []
            ids: list[str] = []
            for i in range(m):
                iv = sample_intervention(
                    config.train_dist, sem, child_seed(config.master_seed, "train_iv", m, rep, i)
                )
                env = apply(sem, iv)
                train.append(
                    sample_dataset(
                        env,
                        config.n_samples,
                        child_seed(config.master_seed, "train_data", m, rep, i),
                        intervention_id=iv.id,
                    )
                )
                ids.append(iv.id)
            discovered = discover_invariant_subsets(train, config.rho_threshold)
            pooled_erm = _pooled_full_head(train)

            hits = np.zeros(len(discovered), dtype=int)
            erm_hits = 0
            feats = train[0].feature_indices
            for j in range(config.m_test):
                iv = sample_intervention(
                    config.test_dist, sem, child_seed(config.master_seed, "test_iv", m, rep, j)
                )
                ds = sample_dataset(
                    apply(sem, iv),
                    config.n_samples,
                    child_seed(config.master_seed, "test_data", m, rep, j),
                    intervention_id=iv.id,
                )
                for idx, disc in enumerate(discovered):
                    f_test = _subset_head(ds.second_moment, ds.target, disc.subset, feats)
                    if _generalizes(f_test, disc.mean_head, config.gen_threshold):
                        hits[idx] += 1
                f_full = _subset_head(ds.second_moment, ds.target, range(len(feats)), feats)
                if _generalizes(f_full, pooled_erm, config.gen_threshold):
                    erm_hits += 1

            results.append(
                RepeatResult(
                    m=m,
                    repeat=rep,
                    subsets=tuple(
                        SubsetResult(
                            subset=d.subset,
                            rho=d.rho,
                            generalization_pct=100.0 * h / config.m_test,
                        )
                        for d, h in zip(discovered, hits)
                    ),
                    erm_generalization_pct=100.0 * erm_hits / config.m_test,
                    train_intervention_ids=tuple(ids),
                )
            )
    return ExperimentReport(config=_config_echo(config), results=tuple(results))
