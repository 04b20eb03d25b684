"""Linear SEM interventions, invariance certification, PAC budgets, and the
generalization experiment harness."""

__version__ = "0.1.0"

from .sem import (
    ConstantNoise,
    Dataset,
    GaussianNoise,
    SemModel,
    build_sem,
    cross_moment,
    full_second_moment,
    fundamental_matrix,
    noise_second_moment,
    population_covariance,
    sample_dataset,
)
from .interventions import (
    Intervention,
    InterventionDistribution,
    apply,
    observational,
    sample_intervention,
)
from .invariance import (
    Certification,
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
    population_least_squares_head,
    population_loss,
    realizable_representation,
)
from .bounds import (
    PacBudget,
    covering_number_log,
    evaluate_budget,
    interventional_complexity,
    sample_complexity,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    conditional_subsample,
    discover_invariant_subsets,
    erm_baseline,
    generalization_percentage,
    rho_statistic,
    run_experiment,
)
from . import errors, fixtures

__all__ = [name for name in dir() if not name.startswith("_")]
