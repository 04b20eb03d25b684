"""Invariance certification for diagonal representations with linear heads.

The central quantity is the gradient of the squared-error risk at a head f on
top of a feature selector Phi = diag(phi):

    grad R(f) = 2 (Phi^T Sigma Phi f - Phi^T E[X_{-t} X_t])

computed either from population moments or from finite samples. A
representation is eps-approximately invariant in an environment when this
gradient has norm at most eps. The factor 2 is part of the convention here:
every eps threshold in the package refers to the 2-scaled gradient, and the
split-sample estimator is scaled to match.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientSamples,
    ValidationError,
    ZeroHead,
)
from .interventions import Intervention, apply
from .sem import (
    Dataset,
    SemModel,
    cross_moment,
    full_second_moment,
    population_covariance,
)

# Relative singular-value cutoff for every pseudoinverse in the package.
PINV_RCOND = 1e-10


@dataclass(frozen=True)
class Representation:
    """Diagonal feature selector over the non-target coordinates.

    Entries are capped at 1 in absolute value (the scale assumption the
    sample-complexity analysis relies on); 0/1 vectors encode plain subsets.
    """

    diag: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.diag, dtype=float)
        if d.ndim != 1:
            raise ValidationError("representation diagonal must be 1-D")
        if not np.all(np.isfinite(d)):
            raise ValidationError("representation entries must be finite")
        if np.max(np.abs(d), initial=0.0) > 1.0 + 1e-12:
            raise ValidationError("representation operator norm must be <= 1")
        d.setflags(write=False)
        object.__setattr__(self, "diag", d)

    @classmethod
    def from_subset(cls, subset: Sequence[int], n: int) -> "Representation":
        d = np.zeros(n)
        d[list(subset)] = 1.0
        return cls(diag=d)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.diag))


@dataclass(frozen=True)
class Head:
    """Linear predictor applied on top of a representation."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValidationError("head coefficients must be a finite 1-D vector")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


def canonical_head(n: int) -> Head:
    """The fixed head (1, 0, ..., 0) used by the PAC reduction."""
    c = np.zeros(n)
    c[0] = 1.0
    return Head(coeffs=c)


def realizable_representation(sem: SemModel) -> Representation:
    """diag of the target's parent weights: exactly invariant in every environment."""
    return Representation(diag=sem.target_weights)


@dataclass(frozen=True)
class ObservationMap:
    """Linear observation Z = S X of the latent SEM; one row of S is the target."""

    matrix: np.ndarray
    target_row: int

    def __post_init__(self) -> None:
        s = np.asarray(self.matrix, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1:
            raise DimensionMismatch("observation matrix must be 2-D with >= 1 row")
        if not 0 <= self.target_row < s.shape[0]:
            raise DimensionMismatch(f"target_row {self.target_row} out of range")
        s.setflags(write=False)
        object.__setattr__(self, "matrix", s)


# ---------------------------------------------------------------------------
# population quantities
# ---------------------------------------------------------------------------


def gradient_from_moments(
    cov: np.ndarray, cross: np.ndarray, phi: Representation, f: Head
) -> np.ndarray:
    d = phi.diag
    if cov.shape != (d.size, d.size) or cross.shape != (d.size,) or f.coeffs.size != d.size:
        raise DimensionMismatch("moment/representation/head dimensions disagree")
    return 2.0 * d * (cov @ (d * f.coeffs) - cross)


def population_gradient(sem_env: SemModel, phi: Representation, f: Head) -> np.ndarray:
    """Exact gradient of E[(f^T Phi^T X_{-t} - X_t)^2] at f, from closed-form moments."""
    return gradient_from_moments(population_covariance(sem_env), cross_moment(sem_env), phi, f)


def population_loss(sem_env: SemModel, phi: Representation, f: Head) -> float:
    """E[(f^T Phi^T X_{-t} - X_t)^2] from closed-form moments."""
    g = phi.diag * f.coeffs
    cov = population_covariance(sem_env)
    cross = cross_moment(sem_env)
    target_sq = full_second_moment(sem_env)[sem_env.target, sem_env.target]
    return float(g @ cov @ g - 2.0 * g @ cross + target_sq)


def is_eps_invariant(sem_env: SemModel, phi: Representation, f: Head, eps: float) -> bool:
    """Membership test for the eps-approximately invariant set at head f."""
    if eps <= 0:
        raise ValidationError("eps must be > 0")
    return float(np.linalg.norm(population_gradient(sem_env, phi, f))) <= eps


def _min_norm_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(gram, rcond=PINV_RCOND, hermitian=True) @ rhs


def population_least_squares_head(sem_env: SemModel, phi: Representation) -> Head:
    """Minimum-norm population least-squares head for phi in one environment."""
    d = phi.diag
    gram = d[:, None] * population_covariance(sem_env) * d[None, :]
    return Head(coeffs=_min_norm_solve(gram, d * cross_moment(sem_env)))


def head_for_moments(cov: np.ndarray, cross: np.ndarray, phi: Representation) -> Head:
    d = phi.diag
    gram = d[:, None] * cov * d[None, :]
    return Head(coeffs=_min_norm_solve(gram, d * cross))


# ---------------------------------------------------------------------------
# finite-sample quantities
# ---------------------------------------------------------------------------


def least_squares_head(data: Dataset, phi: Representation) -> Head:
    """Minimum-norm solution of min_f ||X_{-t} Phi f - X_t||^2.

    Solved through the cached second moment of the dataset; singular Gram
    directions (for instance coordinates where phi vanishes, or exactly
    collinear columns) are resolved by the pseudoinverse, so zeroed features
    receive zero head coefficients.
    """
    idx = list(data.feature_indices)
    if phi.diag.size != len(idx):
        raise DimensionMismatch("representation size does not match dataset width")
    m2 = data.second_moment
    cov = m2[np.ix_(idx, idx)]
    cross = m2[idx, data.target]
    return head_for_moments(cov, cross, phi)


def empirical_gradient_norm_split(data: Dataset, phi: Representation, f: Head) -> float:
    """Split-sample estimator of the population gradient norm.

    Rows are shuffled with a seed derived from the dataset's own seed, paired
    off even/odd, and the per-half sums of the single-sample gradients are
    combined as sqrt of their inner product. A negative inner product (pure
    sampling noise) truncates to 0. The result carries the same factor 2 as
    ``population_gradient``, so the two are directly comparable.
    """
    n_rows = data.num_samples
    if n_rows < 2:
        raise InsufficientSamples("the split estimator needs at least 2 rows")
    idx = list(data.feature_indices)
    if phi.diag.size != len(idx):
        raise DimensionMismatch("representation size does not match dataset width")

    rng = np.random.default_rng(np.random.SeedSequence(entropy=data.seed, spawn_key=(0x5E11,)))
    perm = rng.permutation(n_rows)
    m = n_rows // 2
    first, second = perm[: 2 * m : 2], perm[1 : 2 * m : 2]

    z = data.samples[:, idx] * phi.diag
    resid = z @ f.coeffs - data.samples[:, data.target]
    s1 = z[first].T @ resid[first]
    s2 = z[second].T @ resid[second]
    inner = float(s1 @ s2)
    return 2.0 * np.sqrt(max(inner, 0.0)) / m


# ---------------------------------------------------------------------------
# common-head certification over a set of environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certification:
    """Outcome of a common-head invariance check over a set of environments."""

    invariant: bool
    head: Head
    max_gradient_norm: float
    per_env_norms: tuple[float, ...]


def certify_invariant(
    envs: Sequence[SemModel], phi: Representation, eps: float
) -> Certification:
    """Does one head make phi eps-invariant in every environment simultaneously?

    The candidate head is fitted on the environment-averaged moments; any
    common zero-gradient head also solves the pooled problem, and singular
    pooled directions are annihilated by every per-environment gradient, so
    checking the pooled minimum-norm head is sound and complete for exact
    invariance.
    """
    if not envs:
        raise ValidationError("need at least one environment")
    if eps <= 0:
        raise ValidationError("eps must be > 0")
    moments = [(population_covariance(e), cross_moment(e)) for e in envs]
    cov_bar = np.mean([c for c, _ in moments], axis=0)
    cross_bar = np.mean([x for _, x in moments], axis=0)
    head = head_for_moments(cov_bar, cross_bar, phi)
    norms = tuple(
        float(np.linalg.norm(gradient_from_moments(cov, cross, phi, head)))
        for cov, cross in moments
    )
    worst = max(norms)
    return Certification(
        invariant=worst <= eps, head=head, max_gradient_norm=worst, per_env_norms=norms
    )


# ---------------------------------------------------------------------------
# head transfer to the canonical fixed head
# ---------------------------------------------------------------------------


def population_gradient_general(
    sem_env: SemModel, phi_matrix: np.ndarray, f: Head
) -> np.ndarray:
    """Gradient for a general (non-diagonal) representation matrix."""
    cov = population_covariance(sem_env)
    cross = cross_moment(sem_env)
    return 2.0 * (phi_matrix.T @ (cov @ (phi_matrix @ f.coeffs)) - phi_matrix.T @ cross)


def head_transfer(phi: Representation, f: Head) -> tuple[np.ndarray, np.ndarray]:
    """Fold the head f into the representation so the canonical head takes over.

    Returns (phi_prime, A) where A has first column f, the remaining columns
    complete it orthonormally (Gram-Schmidt against f), and
    phi_prime = diag(phi) @ A, so that phi_prime applied with the canonical
    head (1, 0, ..., 0) reproduces phi applied with f. Gradients transform as
    A^T grad: the zero set is preserved for any f, and the norm itself is
    preserved exactly when ||f|| = 1 (A is then orthogonal).

    Raises:
        ZeroHead: f is the zero vector.
    """
    v = f.coeffs
    n = v.size
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroHead("head_transfer requires a nonzero head")
    a = np.zeros((n, n))
    a[:, 0] = v
    basis = [v / norm]
    col = 1
    for k in range(n):
        cand = np.zeros(n)
        cand[k] = 1.0
        for b in basis:
            cand -= (cand @ b) * b
        cn = np.linalg.norm(cand)
        if cn > 1e-12:
            cand /= cn
            basis.append(cand)
            a[:, col] = cand
            col += 1
        if col == n:
            break
    phi_prime = np.diag(phi.diag) @ a
    return phi_prime, a


# ---------------------------------------------------------------------------
# lifted polynomial form of the gradient
# ---------------------------------------------------------------------------


def monomial_exponents(n: int) -> list[tuple[int, ...]]:
    """Canonical ordering of the degree <= 2 monomials in n diagonal entries:
    the constant, then each phi_i, then phi_i phi_j for i <= j."""
    exps: list[tuple[int, ...]] = [()]
    exps.extend((i,) for i in range(n))
    exps.extend((i, j) for i in range(n) for j in range(i, n))
    return exps


def diag_monomials(diag: np.ndarray, n: int) -> np.ndarray:
    """Evaluate the monomial vector for a diagonal representation."""
    vals = np.empty(1 + n + n * (n + 1) // 2)
    vals[0] = 1.0
    vals[1 : n + 1] = diag
    pos = n + 1
    for i in range(n):
        for j in range(i, n):
            vals[pos] = diag[i] * diag[j]
            pos += 1
    return vals


def lift_gradient_matrix(sem_env: SemModel, f0: Head) -> np.ndarray:
    """Matrix U with grad R(phi) = U @ diag_monomials(phi) for every diagonal phi.

    Row a collects 2 Sigma_{ak} f_k onto the phi_a phi_k monomial and
    -2 cross_a onto the linear phi_a monomial; the constant column is zero.
    """
    cov = population_covariance(sem_env)
    cross = cross_moment(sem_env)
    n = cov.shape[0]
    if f0.coeffs.size != n:
        raise DimensionMismatch("head size does not match environment width")
    exps = monomial_exponents(n)
    slot = {e: col for col, e in enumerate(exps)}
    u = np.zeros((n, len(exps)))
    for a in range(n):
        u[a, slot[(a,)]] -= 2.0 * cross[a]
        for k in range(n):
            key = (a, k) if a <= k else (k, a)
            u[a, slot[key]] += 2.0 * cov[a, k] * f0.coeffs[k]
    return u


# ---------------------------------------------------------------------------
# degree structure under simultaneous hard assignments
# ---------------------------------------------------------------------------


def _poly_features(points: np.ndarray, degree: int) -> np.ndarray:
    k = points.shape[1]
    combos = [
        c
        for total in range(degree + 1)
        for c in itertools.combinations_with_replacement(range(k), total)
    ]
    cols = [np.prod(points[:, list(c)], axis=1) if c else np.ones(len(points)) for c in combos]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class DegreeProbeReport:
    degree: int
    num_sites: int
    fit_residual: float
    holdout_residual: float


def atomic_degree_probe(
    base: SemModel,
    sites: Sequence[int],
    phi: Representation,
    f0: Head,
    fit_grid: np.ndarray,
    holdout_grid: np.ndarray,
    degree: int = 4,
) -> DegreeProbeReport:
    """Fit ||grad R(a)||^2 as a polynomial in the hard-assignment vector a.

    The squared gradient norm under simultaneous hard assignments at ``sites``
    is a polynomial of total degree at most 4 in the assigned values, so a
    degree-4 fit on a rich enough grid interpolates exactly and a degree-3 fit
    generically cannot.
    """
    sites = [int(s) for s in sites]
    if not sites:
        raise ValidationError("need at least one intervention site")
    fit_grid = np.atleast_2d(np.asarray(fit_grid, dtype=float))
    holdout_grid = np.atleast_2d(np.asarray(holdout_grid, dtype=float))

    def norm_sq(assignment: np.ndarray) -> float:
        iv = Intervention(hard={s: float(v) for s, v in zip(sites, assignment)})
        g = population_gradient(apply(base, iv), phi, f0)
        return float(g @ g)

    y_fit = np.array([norm_sq(a) for a in fit_grid])
    feats = _poly_features(fit_grid, degree)
    if feats.shape[0] < feats.shape[1]:
        raise ValidationError(
            f"grid has {feats.shape[0]} points but a degree-{degree} polynomial "
            f"in {len(sites)} variables has {feats.shape[1]} coefficients"
        )
    coeffs, *_ = np.linalg.lstsq(feats, y_fit, rcond=None)
    fit_resid = float(np.max(np.abs(feats @ coeffs - y_fit), initial=0.0))
    y_hold = np.array([norm_sq(a) for a in holdout_grid])
    pred = _poly_features(holdout_grid, degree) @ coeffs
    hold_resid = float(np.max(np.abs(pred - y_hold), initial=0.0))
    return DegreeProbeReport(
        degree=degree, num_sites=len(sites), fit_residual=fit_resid, holdout_residual=hold_resid
    )


# ---------------------------------------------------------------------------
# indirect observations Z = S X
# ---------------------------------------------------------------------------


def indirect_population_gradient(
    base: SemModel, obs: ObservationMap, phi: Representation, f: Head
) -> np.ndarray:
    """Gradient of E[(f^T Phi^T Z_{-t} - Z_t)^2] with Z = S X.

    Assembled as 2 Phi^T (E[Z_{-t} Z_{-t}^T] Phi f - E[Z_{-t} Z_t]) with the
    Z-moments pushed through S from the latent model's full second moment.
    """
    s = obs.matrix
    if s.shape[1] != base.num_vars:
        raise DimensionMismatch("observation map width does not match the SEM")
    rows = [r for r in range(s.shape[0]) if r != obs.target_row]
    if phi.diag.size != len(rows):
        raise DimensionMismatch("representation size does not match observed width")
    second = full_second_moment(base)
    z_second = s @ second @ s.T
    cov = z_second[np.ix_(rows, rows)]
    cross = z_second[rows, obs.target_row]
    return gradient_from_moments(cov, cross, phi, f)
