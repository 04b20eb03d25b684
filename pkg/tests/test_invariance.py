import numpy as np
import pytest

from seminv import fixtures
from seminv.errors import DimensionMismatch, ValidationError, ZeroHead
from seminv.interventions import Intervention, apply
from seminv.invariance import (
    Head,
    ObservationMap,
    Representation,
    atomic_degree_probe,
    canonical_head,
    certify_invariant,
    diag_monomials,
    empirical_gradient_norm_split,
    head_transfer,
    indirect_population_gradient,
    is_eps_invariant,
    least_squares_head,
    lift_gradient_matrix,
    population_gradient,
    population_gradient_general,
    population_least_squares_head,
    population_loss,
    realizable_representation,
)
from seminv.sem import GaussianNoise, build_sem, sample_dataset

from conftest import random_intervention, random_sem

UNIT = GaussianNoise(1.0)


def _random_pair(rng, n):
    phi = Representation(diag=rng.uniform(-1.0, 1.0, n))
    f = Head(coeffs=rng.normal(size=n))
    return phi, f


class TestPopulationGradient:
    def test_zero_representation_gives_zero(self, rng):
        sem = random_sem(rng)
        n = sem.num_features
        g = population_gradient(sem, Representation(diag=np.zeros(n)), Head(coeffs=rng.normal(size=n)))
        np.testing.assert_array_equal(g, np.zeros(n))

    def test_realizable_pair_is_invariant_everywhere(self, rng):
        for _ in range(15):
            sem = random_sem(rng)
            phi = realizable_representation(sem)
            ones = Head(coeffs=np.ones(sem.num_features))
            for _ in range(5):
                env = apply(sem, random_intervention(rng, sem))
                assert np.linalg.norm(population_gradient(env, phi, ones)) <= 1e-10

    def test_identity_representation_invariant_without_descendants(self, rng):
        for _ in range(10):
            sem = random_sem(rng, target_has_descendants=False)
            phi = Representation(diag=np.ones(sem.num_features))
            head = Head(coeffs=sem.target_weights)
            env = apply(sem, random_intervention(rng, sem))
            assert np.linalg.norm(population_gradient(env, phi, head)) <= 1e-10

    def test_matches_finite_differences_of_loss(self, rng):
        step = 1e-5
        for _ in range(100):
            sem = random_sem(rng, n_max=6)
            n = sem.num_features
            phi, f = _random_pair(rng, n)
            grad = population_gradient(sem, phi, f)
            fd = np.empty(n)
            for k in range(n):
                up, down = f.coeffs.copy(), f.coeffs.copy()
                up[k] += step
                down[k] -= step
                fd[k] = (
                    population_loss(sem, phi, Head(coeffs=up))
                    - population_loss(sem, phi, Head(coeffs=down))
                ) / (2 * step)
            np.testing.assert_allclose(grad, fd, atol=1e-6)

    def test_least_squares_head_is_a_gradient_zero(self, rng):
        for _ in range(20):
            sem = random_sem(rng)
            phi, _ = _random_pair(rng, sem.num_features)
            head = population_least_squares_head(sem, phi)
            assert np.linalg.norm(population_gradient(sem, phi, head)) <= 1e-8


class TestIsEpsInvariant:
    def test_realizable_true_for_any_eps(self, rng):
        sem = random_sem(rng)
        phi = realizable_representation(sem)
        ones = Head(coeffs=np.ones(sem.num_features))
        assert is_eps_invariant(sem, phi, ones, eps=1e-12)

    def test_cancelling_family_keeps_single_parent_invariant(self):
        base = fixtures.faithfulness_sem()
        phi = Representation.from_subset([1], 3)
        head = population_least_squares_head(base, phi)
        for iv in fixtures.cancelling_soft_variants(10, seed=21):
            assert is_eps_invariant(apply(base, iv), phi, head, eps=1e-8)

    def test_broken_cancellation_detected(self):
        # Hand expansion of the 4-node second moments with x1 an exact copy of
        # x0: E[x1^2] = 1 and E[x1 x2] = a + b, so the observational head is 1
        # and the (a, b) = (1, 1) environment has gradient 2(1 - (1 + 2)) = -4.
        base = fixtures.faithfulness_sem()
        phi = Representation.from_subset([1], 3)
        head = population_least_squares_head(base, phi)
        env = apply(base, fixtures.broken_cancellation_variant(1.0, 1.0))
        assert not is_eps_invariant(env, phi, head, eps=1e-3)
        np.testing.assert_allclose(
            np.linalg.norm(population_gradient(env, phi, head)), 4.0, atol=1e-10
        )


class TestLeastSquaresHead:
    def test_noiseless_chain_recovers_unit_weight(self):
        zero = GaussianNoise(0.0)
        sem = build_sem([(0, 1, 1.0)], (GaussianNoise(1.0), zero), target=1)
        ds = sample_dataset(sem, 500, seed=4)
        head = least_squares_head(ds, Representation.from_subset([0], 1))
        assert head.coeffs[0] == pytest.approx(1.0, abs=1e-12)

    def test_zero_representation_gives_zero_head(self, rng):
        sem = random_sem(rng)
        ds = sample_dataset(sem, 100, seed=7)
        head = least_squares_head(ds, Representation(diag=np.zeros(sem.num_features)))
        np.testing.assert_array_equal(head.coeffs, np.zeros(sem.num_features))

    def test_parent_pair_on_unit_noise_fixture(self):
        # population normal equations give exactly (1, 1) on the parent pair
        sem = fixtures.faithfulness_sem(a=1.0, b=-1.0, copy_noise=1.0)
        ds = sample_dataset(sem, 100_000, seed=17)
        head = least_squares_head(ds, Representation.from_subset([1, 2], 3))
        np.testing.assert_allclose(head.coeffs, [0.0, 1.0, 1.0], atol=2e-2)


class TestSplitEstimator:
    def test_zero_representation_gives_zero(self, rng):
        sem = random_sem(rng)
        ds = sample_dataset(sem, 1000, seed=2)
        phi = Representation(diag=np.zeros(sem.num_features))
        assert empirical_gradient_norm_split(ds, phi, Head(coeffs=np.ones(sem.num_features))) == 0.0

    def test_deterministic_data_equals_population_norm(self):
        sem = build_sem(
            [(0, 1, 0.7), (1, 2, 1.3)],
            (GaussianNoise(0.0, 2.0), GaussianNoise(0.0, -1.0), GaussianNoise(0.0)),
            target=2,
        )
        ds = sample_dataset(sem, 100, seed=5)
        phi = Representation(diag=np.array([0.5, -0.8]))
        f = Head(coeffs=np.array([0.3, 1.1]))
        emp = empirical_gradient_norm_split(ds, phi, f)
        pop = np.linalg.norm(population_gradient(sem, phi, f))
        assert emp == pytest.approx(pop, abs=1e-12)

    def test_realizable_pair_concentrates(self, rng):
        sem = random_sem(rng, n_max=6, var_low=0.02, var_high=0.02)
        phi = realizable_representation(sem)
        ones = Head(coeffs=np.ones(sem.num_features))
        ds = sample_dataset(sem, 100_000, seed=31)
        assert empirical_gradient_norm_split(ds, phi, ones) <= 0.05

    def test_deterministic_per_dataset(self, rng):
        sem = random_sem(rng)
        ds = sample_dataset(sem, 999, seed=8)  # odd row count: one row dropped
        phi, f = _random_pair(rng, sem.num_features)
        assert empirical_gradient_norm_split(ds, phi, f) == empirical_gradient_norm_split(ds, phi, f)


class TestHeadTransfer:
    def test_canonical_head_is_fixed_point(self, rng):
        n = 4
        phi = Representation(diag=rng.uniform(-1, 1, n))
        phi_prime, a = head_transfer(phi, canonical_head(n))
        np.testing.assert_allclose(a, np.eye(n), atol=1e-12)
        np.testing.assert_allclose(phi_prime, np.diag(phi.diag), atol=1e-12)

    def test_unit_norm_heads_preserve_gradient_norm(self, rng):
        for _ in range(100):
            sem = random_sem(rng)
            n = sem.num_features
            phi = Representation(diag=rng.uniform(-1, 1, n))
            vec = rng.normal(size=n)
            f = Head(coeffs=vec / np.linalg.norm(vec))
            phi_prime, a = head_transfer(phi, f)
            g_before = population_gradient(sem, phi, f)
            g_after = population_gradient_general(sem, phi_prime, canonical_head(n))
            assert abs(np.linalg.norm(g_before) - np.linalg.norm(g_after)) <= 1e-10
            np.testing.assert_allclose(g_after, a.T @ g_before, atol=1e-10)

    def test_scaled_canonical_head(self, rng):
        # f = 2 f0: A = diag(2, 1, ..., 1) up to orthonormal completion; the
        # gradient transforms by A^T, so zero gradients stay zero and the norm
        # identity ||g'||^2 = ||g||^2 + (1 - 1/||f||^2)(f.g)^2 holds.
        sem = random_sem(rng)
        n = sem.num_features
        f = Head(coeffs=2.0 * canonical_head(n).coeffs)
        phi = Representation(diag=rng.uniform(-1, 1, n))
        phi_prime, a = head_transfer(phi, f)
        np.testing.assert_allclose(a, np.diag([2.0] + [1.0] * (n - 1)), atol=1e-12)
        g = population_gradient(sem, phi, f)
        g_prime = population_gradient_general(sem, phi_prime, canonical_head(n))
        expected_sq = np.linalg.norm(g) ** 2 + (1 - 1 / 4) * float(f.coeffs @ g) ** 2
        assert np.linalg.norm(g_prime) ** 2 == pytest.approx(expected_sq, rel=1e-9)

    def test_zero_set_is_preserved(self, rng):
        sem = random_sem(rng)
        n = sem.num_features
        beta = sem.target_weights
        f = Head(coeffs=np.full(n, 2.0))
        phi = Representation(diag=beta / 2.0)  # phi * f reproduces the parents
        phi_prime, _ = head_transfer(phi, f)
        assert np.linalg.norm(population_gradient(sem, phi, f)) <= 1e-10
        g_after = population_gradient_general(sem, phi_prime, canonical_head(n))
        assert np.linalg.norm(g_after) <= 1e-10

    def test_zero_head_rejected(self):
        with pytest.raises(ZeroHead):
            head_transfer(Representation(diag=np.ones(3)), Head(coeffs=np.zeros(3)))


class TestLiftedForm:
    def test_matches_direct_gradient(self, rng):
        for _ in range(60):
            sem = random_sem(rng)
            env = apply(sem, random_intervention(rng, sem))
            n = sem.num_features
            phi, f0 = _random_pair(rng, n)
            u = lift_gradient_matrix(env, f0)
            lifted = u @ diag_monomials(phi.diag, n)
            np.testing.assert_allclose(lifted, population_gradient(env, phi, f0), atol=1e-10)

    def test_constant_block_is_zero(self, rng):
        sem = random_sem(rng)
        n = sem.num_features
        u = lift_gradient_matrix(sem, Head(coeffs=rng.normal(size=n)))
        np.testing.assert_array_equal(u[:, 0], np.zeros(n))
        np.testing.assert_array_equal(u @ diag_monomials(np.zeros(n), n), np.zeros(n))

    def test_single_edge_hand_expansion(self):
        # one feature feeding the target: gradient = 2 (v0 f0 phi^2 - beta v0 phi)
        beta, v0, f0 = 0.6, 1.3, 0.9
        sem = build_sem([(0, 1, beta)], (GaussianNoise(v0), UNIT), target=1)
        u = lift_gradient_matrix(sem, Head(coeffs=np.array([f0])))
        np.testing.assert_allclose(u, [[0.0, -2.0 * beta * v0, 2.0 * v0 * f0]], atol=1e-12)


class TestDegreeProbe:
    def test_single_site_degree_four_interpolates(self, rng):
        sem = random_sem(rng, n_max=6)
        n = sem.num_features
        phi, f0 = _random_pair(rng, n)
        site = sem.feature_indices[0]
        fit = np.linspace(-2, 2, 7).reshape(-1, 1)
        hold = np.array([[-1.71], [0.37], [1.93]])
        report = atomic_degree_probe(sem, [site], phi, f0, fit, hold)
        assert report.holdout_residual <= 1e-9

    def test_two_sites_degree_four_interpolates(self, rng):
        sem = random_sem(rng, n_max=6)
        n = sem.num_features
        phi, f0 = _random_pair(rng, n)
        sites = list(sem.feature_indices[:2])
        vals = np.linspace(-2, 2, 5)
        fit = np.array([[a, b] for a in vals for b in vals])
        hold = np.array([[-1.31, 0.77], [0.45, -1.9], [1.21, 1.05]])
        report = atomic_degree_probe(sem, sites, phi, f0, fit, hold)
        assert report.holdout_residual <= 1e-9

    def test_degree_three_cannot_fit_generic_instance(self, rng):
        sem = random_sem(rng, n_max=6)
        n = sem.num_features
        phi, f0 = _random_pair(rng, n)
        site = sem.feature_indices[0]
        fit = np.linspace(-2, 2, 7).reshape(-1, 1)
        hold = np.array([[-1.71], [0.37], [1.93]])
        report = atomic_degree_probe(sem, [site], phi, f0, fit, hold, degree=3)
        assert report.holdout_residual > 1e-6

    def test_insufficient_grid_rejected(self, rng):
        sem = random_sem(rng, n_max=6)
        n = sem.num_features
        phi, f0 = _random_pair(rng, n)
        with pytest.raises(ValidationError):
            atomic_degree_probe(
                sem, [sem.feature_indices[0]], phi, f0, np.zeros((3, 1)), np.zeros((1, 1))
            )


def _selection_map(sem):
    p = sem.num_vars
    s = np.zeros((p, p))
    for row, col in enumerate(sem.feature_indices):
        s[row, col] = 1.0
    s[p - 1, sem.target] = 1.0
    return ObservationMap(matrix=s, target_row=p - 1)


class TestIndirectObservations:
    def test_identity_selection_matches_direct(self, rng):
        for _ in range(20):
            sem = random_sem(rng)
            phi, f = _random_pair(rng, sem.num_features)
            gi = indirect_population_gradient(sem, _selection_map(sem), phi, f)
            np.testing.assert_allclose(gi, population_gradient(sem, phi, f), atol=1e-12)

    def test_dropped_latent_keeps_realizable_invariant(self):
        # x0 -> x1 -> t with an isolated latent x2; dropping x2 keeps every
        # target parent observed, so the realizable selector still certifies.
        base = build_sem(
            [(0, 1, 0.8), (1, 3, 0.6)], (UNIT, UNIT, UNIT, UNIT), target=3
        )
        s = np.zeros((3, 4))
        s[0, 0] = s[1, 1] = 1.0
        s[2, 3] = 1.0
        obs = ObservationMap(matrix=s, target_row=2)
        phi = Representation(diag=np.array([0.0, 0.6]))
        g = indirect_population_gradient(base, obs, phi, Head(coeffs=np.array([0.0, 1.0])))
        assert np.linalg.norm(g) <= 1e-8

    def test_zero_representation_gives_zero(self, rng):
        sem = random_sem(rng)
        phi = Representation(diag=np.zeros(sem.num_features))
        g = indirect_population_gradient(
            sem, _selection_map(sem), phi, Head(coeffs=np.ones(sem.num_features))
        )
        np.testing.assert_array_equal(g, np.zeros(sem.num_features))

    def test_dimension_mismatch_rejected(self, rng):
        sem = random_sem(rng)
        bad = ObservationMap(matrix=np.eye(sem.num_vars + 1), target_row=0)
        with pytest.raises(DimensionMismatch):
            indirect_population_gradient(
                sem, bad, Representation(diag=np.zeros(sem.num_vars)), Head(coeffs=np.zeros(sem.num_vars))
            )


class TestCertifyInvariant:
    def test_realizable_certifies_across_random_environments(self, rng):
        sem = random_sem(rng)
        envs = [apply(sem, random_intervention(rng, sem)) for _ in range(8)]
        cert = certify_invariant(envs, realizable_representation(sem), eps=1e-8)
        assert cert.invariant
        assert cert.max_gradient_norm <= 1e-10

    def test_reports_per_environment_norms(self):
        base = fixtures.faithfulness_sem()
        envs = [apply(base, iv) for iv in fixtures.cancelling_soft_variants(4, seed=2)]
        envs.append(apply(base, fixtures.broken_cancellation_variant()))
        cert = certify_invariant(envs, Representation.from_subset([1], 3), eps=1e-8)
        assert not cert.invariant
        assert len(cert.per_env_norms) == 5
        assert max(cert.per_env_norms) == cert.max_gradient_norm
