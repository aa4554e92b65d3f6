import numpy as np
import pytest
from scipy import linalg

from config import DETAILED_BALANCE_TOL, MC_MULTI_SIGMA_BAND, RATE_SUM_TOL
from core.dual import (
    DiscreteGammaMeasure,
    SectorDistribution,
    canonical_measure,
    check_theta,
    detailed_balance_check,
    discrete_gamma_pmf,
    discrete_gamma_pmf_vector,
    dual_generator_apply,
    dual_rate,
    empirical_sector_distribution,
    rate_sum,
    sector_row,
    sector_rows_equivalence,
    sector_transition_matrix,
    simulate_dual,
    simulate_dual_batch,
    stationary_by_nullspace,
    transient_distribution,
    transient_matrix,
    validate_occupation,
)
from core.errors import EXIT_THETA_DOMAIN, DomainError, ThetaDomainError
from core.graphs import cycle_kernel, two_vertex_kernel
from core.sectors import sector_size, sector_states
from core.specialfn import ModelParams, RngStream


def test_uniform_rates(uniform_params):
    for n, m in [(0, 0), (3, 2), (5, 5)]:
        for k in range(n + 1):
            for l in range(m + 1):
                assert dual_rate(uniform_params, n, m, k, l) == pytest.approx(1.0 / ((n + 1) * (m + 1)), rel=1e-13)


def test_rate_sum_is_one():
    assert abs(rate_sum(ModelParams(2.5, 0.7), 7, 4) - 1.0) <= RATE_SUM_TOL
    for n in range(0, 26, 5):
        for m in range(0, 26, 5):
            assert abs(rate_sum(ModelParams(0.5, 0.5), n, m) - 1.0) <= RATE_SUM_TOL


def test_rate_rejects_too_many_movers():
    with pytest.raises(DomainError):
        dual_rate(ModelParams(), 2, 2, 3, 0)


def test_empty_sector_is_identity(params):
    p = sector_transition_matrix(params, 0)
    np.testing.assert_array_equal(p.matrix, [[1.0]])


def test_two_particle_uniform_row(uniform_params):
    np.testing.assert_allclose(sector_row(uniform_params, 1, 2), [0.25, 0.5, 0.25], rtol=1e-14)


@pytest.mark.parametrize("total", [1, 5, 17, 40])
def test_sector_matrix_is_stochastic(params, total):
    p = sector_transition_matrix(params, total).matrix
    assert p.shape == (total + 1, total + 1)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(p) > 0)


def test_row_representations_agree(params):
    assert sector_rows_equivalence(params, 12) <= 1e-14


def test_generator_annihilates_constants(params):
    np.testing.assert_allclose(dual_generator_apply(params, 6, np.ones(7)), 0.0, atol=1e-13)
    with pytest.raises(DomainError):
        dual_generator_apply(params, 6, np.ones(6))


def test_transient_at_time_zero(params):
    dist = transient_distribution(params, 5, 2, 0.0)
    np.testing.assert_array_equal(dist.probs, [0, 0, 1, 0, 0, 0])
    with pytest.raises(DomainError):
        transient_distribution(params, 5, 6, 1.0)


def test_transient_matches_matrix_exponential():
    params = ModelParams(2.0, 3.0)
    p = sector_transition_matrix(params, 2).matrix
    exact = linalg.expm(p - np.eye(3))
    np.testing.assert_allclose(transient_matrix(params, 2, 1.0), exact, atol=1e-13)
    np.testing.assert_allclose(transient_distribution(params, 2, 2, 1.0).probs, exact[2], atol=1e-13)


def test_transient_converges_to_canonical(params):
    late = transient_distribution(params, 10, 0, 200.0)
    assert late.total_variation(canonical_measure(params, 10)) <= 1e-10


def test_canonical_measure_uniform_two_particles(uniform_params):
    measure = canonical_measure(uniform_params, 2)
    np.testing.assert_allclose(measure.probs, [0.3, 0.4, 0.3], rtol=1e-14)
    assert measure.partition == pytest.approx(10.0, rel=1e-13)


def test_canonical_measure_is_stationary(params):
    p = sector_transition_matrix(params, 8)
    pi = canonical_measure(params, 8).probs
    np.testing.assert_allclose(pi @ p.matrix, pi, atol=1e-12)
    np.testing.assert_allclose(stationary_by_nullspace(p), pi, atol=1e-11)


def test_sector_distribution_rejects_bad_input():
    with pytest.raises(DomainError):
        SectorDistribution(2, np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        SectorDistribution(1, np.array([0.7, 0.7]))


def test_detailed_balance(params):
    assert detailed_balance_check(params, 0.5, 12) <= DETAILED_BALANCE_TOL


def test_discrete_gamma_pmf_values(uniform_params):
    measure = DiscreteGammaMeasure(uniform_params, 0.5, 10)
    assert discrete_gamma_pmf(measure, 0) == pytest.approx(0.25, rel=1e-14)
    assert discrete_gamma_pmf(measure, 1) == pytest.approx(0.25, rel=1e-14)
    assert discrete_gamma_pmf(measure, 2) == pytest.approx(0.1875, rel=1e-14)
    assert measure.rho == pytest.approx(1.0)


def test_adaptive_truncation_covers_mass(params):
    for theta in (0.1, 0.5, 0.9):
        measure = DiscreteGammaMeasure.adaptive(params, theta)
        assert 1.0 - discrete_gamma_pmf_vector(measure).sum() <= 1e-12


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.2, 1.5])
def test_theta_domain(theta):
    with pytest.raises(ThetaDomainError) as excinfo:
        check_theta(theta)
    assert excinfo.value.exit_code == EXIT_THETA_DOMAIN
    with pytest.raises(ThetaDomainError):
        DiscreteGammaMeasure(ModelParams(), theta, 10)


def test_validate_occupation():
    np.testing.assert_array_equal(validate_occupation([3, 0, 2]), [3, 0, 2])
    with pytest.raises(DomainError):
        validate_occupation([1, -1])
    with pytest.raises(DomainError):
        validate_occupation([1.5, 2])


def test_dual_path_conserves_particles(params, rng):
    final = simulate_dual(params, cycle_kernel(5), [4, 0, 1, 0, 3], 5.0, rng)
    assert final.sum() == 8
    assert np.all(final >= 0)


def test_dual_batch_conserves_particles(params, rng):
    states = simulate_dual_batch(params, cycle_kernel(4), [5, 0, 2, 1], 3.0, 1_000, rng)
    assert states.shape == (1_000, 4)
    np.testing.assert_array_equal(states.sum(axis=1), 8)
    assert states.min() >= 0


@pytest.mark.slow
@pytest.mark.parametrize("s, t", [(1.0, 1.0), (2.5, 0.7)])
def test_two_vertex_dual_matches_transient(s, t):
    params = ModelParams(s, t)
    replicas = 100_000
    samples = simulate_dual_batch(params, two_vertex_kernel(), [3, 1], 1.0, replicas, RngStream(77))
    empirical = empirical_sector_distribution(samples, 4)
    exact = transient_distribution(params, 4, 3, 1.0).probs
    stderr = np.sqrt(exact * (1.0 - exact) / replicas)
    assert np.all(np.abs(empirical - exact) <= MC_MULTI_SIGMA_BAND * stderr + 1e-12)


def test_sector_states_enumeration():
    np.testing.assert_array_equal(sector_states(2), [[0, 2], [1, 1], [2, 0]])
    assert sector_states(0).shape == (1, 2)
    assert sector_size(-1) == 0
