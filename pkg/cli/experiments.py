"""實驗函數 -- 每個命令一個函數，把模組運算的結果寫進 ResultRecord

所有函數簽名一致：fn(config, record, rng) -> None
"""
import logging
import math
from typing import Callable, Dict, List

import numpy as np

from cli.config import ExperimentConfig, with_defaults
from cli.records import ResultRecord
from config import (
    ADJOINT_TOL,
    ADJOINT_TRUNCATION,
    CHEAP_DUALITY_SECTOR,
    CHEAP_DUALITY_TOL,
    COMMUTATION_TOL,
    DETAILED_BALANCE_TOL,
    DISCRETE_TRANSFORM_TOL,
    DUALITY_MAX_TOTAL,
    DUALITY_WEALTH_GRID,
    ERGODIC_HOLDING_TIMES,
    GAUSS_SUM_TOL,
    GENERATOR_DUALITY_TOL,
    HARMONICITY_TOL,
    INTERTWINING_TOL,
    MC_MULTI_SIGMA_BAND,
    MC_SIGMA_BAND,
    PARAM_GRID,
    PMF_SUM_TOL,
    RATE_SUM_MAX,
    RATE_SUM_TOL,
    REGENERATION_MAX_TOTAL,
    REGENERATION_TOL,
    SCALING_MEAN_GAP_TOL,
    SCALING_REDUCTION_FACTOR,
    SCALING_REFERENCE_K,
    SCALING_SAMPLES,
    SECTOR_STATIONARITY_TOL,
    SELF_DUALITY_TOL,
    STATIONARY_LONG_TIME,
    STATIONARY_TV_TOL,
    SU11_RELATION_TOL,
    SU11_TRUNCATION,
    SUM_IDENTITY_TOL,
)
from core.continuous import (
    ergodic_horizon,
    expected_wealth,
    gamma_invariance_check,
    simulate_graph_batch,
    simulate_graph_path,
    two_agent_ergodic_check,
    validate_wealth,
)
from core.dual import (
    DiscreteGammaMeasure,
    SectorDistribution,
    canonical_measure,
    detailed_balance_check,
    discrete_gamma_pmf_vector,
    empirical_sector_distribution,
    rate_sum,
    sector_rows_equivalence,
    sector_transition_matrix,
    simulate_dual,
    simulate_dual_batch,
    stationary_by_nullspace,
    transient_distribution,
    validate_occupation,
)
from core.duality import (
    DualityPolynomial,
    discrete_transform,
    eval_duality_batch,
    exact_scaling_gaps,
    gamma_transform,
    gauss_sum_check,
    harmonicity_check,
    polynomial_continuum_gap,
    scaling_limit_check,
    sum_identity_check,
    sum_identity_value,
    verify_generator_duality,
    verify_path_duality,
    verify_self_duality,
)
from core.errors import DomainError
from core.graphs import two_vertex_kernel
from core.replicas import concat_chunks, mean_and_stderr, run_replicas, standard_score
from core.specialfn import ModelParams, RngStream, sample_gamma
from core.su11 import (
    cheap_duality_consistency,
    verify_adjointness,
    verify_commutation,
    verify_continuous_su11_relations,
    verify_intertwining,
    verify_regeneration,
    verify_su11_relations,
)

logger = logging.getLogger(__name__)

Experiment = Callable[[ExperimentConfig, ResultRecord, RngStream], None]


def params_grid(config: ExperimentConfig) -> List[ModelParams]:
    """預設網格加上命令列指定的 (s, t)，去除重複、保留順序"""
    grid = [ModelParams(s, t) for s, t in PARAM_GRID]
    if config.params not in grid:
        grid.append(config.params)
    return grid


def _two_vertex_rate(config: ExperimentConfig) -> float:
    kernel = config.kernel
    if kernel.num_vertices != 2:
        raise DomainError(f"此實驗需要兩頂點圖: {config.graph}")
    return kernel.edges[0][2]


# ── 模擬 ──

def run_simulate(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    kernel = config.kernel
    init = validate_wealth(config.init) if config.init is not None else np.ones(kernel.num_vertices)
    path = simulate_graph_path(config.params, kernel, init, config.time, rng)
    final = path[-1]

    for i, value in enumerate(final.state):
        record.add_info(f"state[{i}]", float(value))
    record.add_info("jumps", final.jump_count)
    drift = abs(float(final.state.sum()) - float(init.sum()))
    record.add_check("conservation", drift, 1e-9 * max(1.0, float(init.sum())))

    if config.record_path:
        for j, sample in enumerate(path):
            record.add_info(f"path[{j}].time", sample.time)
            record.add_info(f"path[{j}].state", [float(v) for v in sample.state])


def run_simulate_dual(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    kernel = config.kernel
    if config.xi is not None:
        init = validate_occupation(config.xi)
    elif kernel.num_vertices == 2:
        init = validate_occupation([config.n, config.m])
    else:
        init = np.zeros(kernel.num_vertices, dtype=np.int64)
        init[0] = config.total if config.total is not None else config.n + config.m

    final = simulate_dual(config.params, kernel, init, config.time, rng.derive(0))
    for i, value in enumerate(final):
        record.add_info(f"state[{i}]", int(value))
    record.add_check("conservation", abs(int(final.sum()) - int(init.sum())), 0.0)

    if kernel.num_vertices != 2 or config.replicas < 2:
        return

    total = int(init.sum())
    exact = transient_distribution(config.params, total, int(init[0]), config.time * _two_vertex_rate(config))

    def task(count: int, stream: RngStream) -> np.ndarray:
        return simulate_dual_batch(config.params, kernel, init, config.time, count, stream)

    samples = concat_chunks(run_replicas(task, config.replicas, rng.derive(1), config.threads))
    empirical = empirical_sector_distribution(samples, total)

    worst = 0.0
    for k in range(total + 1):
        p = exact.probs[k]
        record.add_info(f"sector[{k}].empirical", float(empirical[k]))
        record.add_info(f"sector[{k}].exact", float(p))
        se = math.sqrt(p * (1.0 - p) / config.replicas)
        worst = max(worst, standard_score(empirical[k], p, se))
    record.add_check("sector_max_z", worst, MC_MULTI_SIGMA_BAND)


# ── 對偶 ──

def run_verify_duality(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, x=1.0, y=2.0)

    worst = 0.0
    for params in params_grid(config):
        for total in range(DUALITY_MAX_TOTAL + 1):
            for n in range(total + 1):
                for x in DUALITY_WEALTH_GRID:
                    for y in DUALITY_WEALTH_GRID:
                        worst = max(worst, verify_generator_duality(params, n, total - n, x, y))
    record.add_check("generator_duality.grid_max", worst, GENERATOR_DUALITY_TOL)
    record.add_check(
        "generator_duality.point",
        verify_generator_duality(config.params, config.n, config.m, config.x, config.y),
        GENERATOR_DUALITY_TOL,
    )

    sum_worst = max(sum_identity_check(config.params, total, config.x, config.y)
                    for total in range(DUALITY_MAX_TOTAL + 1))
    record.add_check("sum_identity.max", sum_worst, SUM_IDENTITY_TOL)
    swap_worst = 0.0
    for total in range(DUALITY_MAX_TOTAL + 1):
        forward = sum_identity_value(config.params, total, config.x, config.y)
        backward = sum_identity_value(config.params, total, config.y, config.x)
        swap_worst = max(swap_worst, abs(forward - backward) / max(abs(forward), 1e-300))
    record.add_check("sum_identity.swap", swap_worst, SUM_IDENTITY_TOL)

    if config.replicas < 2:
        return
    kernel = config.kernel
    xi = config.xi if config.xi is not None else (config.n, config.m)
    wealth = config.init if config.init is not None else (config.x, config.y)
    result = verify_path_duality(config.params, kernel, xi, wealth, config.time,
                                 config.replicas, rng, config.threads)
    record.add_info("path_duality.mc_mean", result.mc_mean)
    record.add_info("path_duality.mc_se", result.mc_se)
    record.add_info("path_duality.dual_value", result.dual_value)
    record.add_info("path_duality.dual_se", result.dual_se)
    record.add_check("path_duality.z", result.z_score, MC_SIGMA_BAND)


def run_verify_self_duality(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, n_max=DUALITY_MAX_TOTAL)
    times = sorted({0.5, 1.0, config.time})
    for time in times:
        worst = 0.0
        for params in params_grid(config):
            for left in range(config.n_max + 1):
                for right in range(config.n_max + 1):
                    worst = max(worst, verify_self_duality(params, left, right, None, time))
        record.add_check(f"self_duality.t={time:g}", worst, SELF_DUALITY_TOL)


def run_stationary(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, total=2, n_max=20)
    params = config.params

    measure = canonical_measure(params, config.total)
    for k, p in enumerate(measure.probs):
        record.add_info(f"probs[{k}]", float(p))
    record.add_info("partition", measure.partition)

    tv_worst = 0.0
    fixed_worst = 0.0
    for total in range(config.n_max + 1):
        operator = sector_transition_matrix(params, total)
        canonical = canonical_measure(params, total)
        solved_probs = np.clip(stationary_by_nullspace(operator), 0.0, None)
        solved = SectorDistribution(total, solved_probs / solved_probs.sum())
        tv_worst = max(tv_worst, canonical.total_variation(solved))
        fixed_worst = max(fixed_worst, float(np.abs(canonical.probs @ operator.matrix - canonical.probs).max()))
    record.add_check("nullspace_tv.max", tv_worst, STATIONARY_TV_TOL)
    record.add_check("fixed_point.max", fixed_worst, SECTOR_STATIONARITY_TOL)

    long_run = transient_distribution(params, config.total, config.total, STATIONARY_LONG_TIME)
    record.add_check("long_time_tv", long_run.total_variation(measure), STATIONARY_TV_TOL)

    rate_worst = 0.0
    for grid_params in params_grid(config):
        for n in range(RATE_SUM_MAX + 1):
            for m in range(RATE_SUM_MAX + 1):
                rate_worst = max(rate_worst, abs(rate_sum(grid_params, n, m) - 1.0))
    record.add_check("rate_sum.max", rate_worst, RATE_SUM_TOL)

    equivalence = max(sector_rows_equivalence(params, total) for total in range(config.n_max + 1))
    record.add_check("row_representations.max", equivalence, 1e-12)


def run_detailed_balance(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, n_max=12)
    candidates = [ModelParams(1.0, 1.0), ModelParams(2.0, 3.0)]
    if config.params not in candidates:
        candidates.append(config.params)
    for theta in sorted({0.3, 0.7, config.theta}):
        worst = max(detailed_balance_check(params, theta, config.n_max) for params in candidates)
        record.add_check(f"violation.theta={theta:g}", worst, DETAILED_BALANCE_TOL)

    measure = DiscreteGammaMeasure.adaptive(config.params, config.theta)
    pmf = discrete_gamma_pmf_vector(measure)
    record.add_info("truncation", measure.truncation)
    record.add_check("pmf_missing_mass", 1.0 - math.fsum(pmf), PMF_SUM_TOL)
    mean = math.fsum(np.arange(measure.truncation + 1) * pmf)
    expected = config.params.shape * measure.rho
    record.add_check("pmf_mean_rel", abs(mean - expected) / expected, DISCRETE_TRANSFORM_TOL)


# ── 連續模型的 Monte Carlo ──

def run_ergodic(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, x=3.0, y=0.0)
    kernel = two_vertex_kernel()
    horizon = max(config.time, ergodic_horizon(kernel, ERGODIC_HOLDING_TIMES))
    record.add_info("horizon", horizon)
    comparisons = two_agent_ergodic_check(config.params, config.x, config.y, horizon,
                                          config.replicas, rng, config.threads)
    for c in comparisons:
        record.add_info(f"moment[{c.order}].empirical", c.empirical)
        record.add_info(f"moment[{c.order}].exact", c.exact)
        record.add_check(f"moment[{c.order}].z", c.z_score, MC_MULTI_SIGMA_BAND)


def run_wealth_spread(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    kernel = config.kernel
    if config.init is not None:
        init = validate_wealth(config.init)
    else:
        init = np.arange(1.0, kernel.num_vertices + 1.0)
    if len(init) != kernel.num_vertices:
        raise DomainError(f"--init 長度 {len(init)} 與頂點數 {kernel.num_vertices} 不符")

    def task(count: int, stream: RngStream) -> np.ndarray:
        return simulate_graph_batch(config.params, kernel, init, config.time, count, stream)

    states = concat_chunks(run_replicas(task, config.replicas, rng, config.threads))
    mean, stderr = mean_and_stderr(states)
    exact = expected_wealth(config.params, kernel, init, config.time)
    for i in range(kernel.num_vertices):
        record.add_info(f"vertex[{i}].mc_mean", float(mean[i]))
        record.add_info(f"vertex[{i}].exact", float(exact[i]))
        record.add_check(f"vertex[{i}].z", standard_score(mean[i], exact[i], stderr[i]), MC_MULTI_SIGMA_BAND)


def run_invariance(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    comparisons = gamma_invariance_check(config.params, config.theta, config.kernel, config.time,
                                         config.replicas, rng, config.threads)
    for c in comparisons:
        record.add_info(f"moment[{c.order}].empirical", c.empirical)
        record.add_info(f"moment[{c.order}].exact", c.exact)
        record.add_check(f"moment[{c.order}].z", c.z_score, MC_MULTI_SIGMA_BAND)


def run_scaling_limit(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, x=1.0, y=1.0)
    gaps = scaling_limit_check(config.params, config.x, config.y, config.scale, rng,
                               SCALING_SAMPLES, config.threads)
    record.add_check("mean_gap", gaps.mean_gap, SCALING_MEAN_GAP_TOL)
    record.add_check("second_moment_gap", gaps.second_moment_gap, SCALING_MEAN_GAP_TOL)
    record.add_info("exact_mean_gap", gaps.exact_mean_gap)
    record.add_info("exact_variance_gap", gaps.exact_variance_gap)

    small_k, large_k = SCALING_REFERENCE_K
    _, small = exact_scaling_gaps(config.params, config.x, config.y, small_k)
    _, large = exact_scaling_gaps(config.params, config.x, config.y, large_k)
    record.add_info(f"exact_variance_gap.K={small_k}", small)
    record.add_info(f"exact_variance_gap.K={large_k}", large)
    if large > 0:
        record.add_check("variance_gap_reduction", small / large, SCALING_REDUCTION_FACTOR, comparison="ge")
    else:
        record.add_check("variance_gap_reduction.degenerate", small, 1e-15)


# ── 代數恆等式 ──

def run_su11(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, n_max=12)
    grid = params_grid(config)

    for kind in ("plus", "minus", "zero"):
        worst = max(verify_commutation(p, range(config.n_max + 1), (kind,)) for p in grid)
        record.add_check(f"commutation.{kind}", worst, COMMUTATION_TOL)

    relation_worst = 0.0
    excluded = 0
    for p in grid:
        residual, excluded = verify_su11_relations(p, SU11_TRUNCATION)
        relation_worst = max(relation_worst, residual)
    record.add_check("relations.discrete", relation_worst, SU11_RELATION_TOL)
    record.add_info("relations.excluded_rows", excluded)
    record.add_check(
        "relations.continuous",
        max(verify_continuous_su11_relations(p, config.n_max) for p in grid),
        SU11_RELATION_TOL,
    )

    record.add_check("adjointness", verify_adjointness(config.params, config.theta, ADJOINT_TRUNCATION), ADJOINT_TOL)
    record.add_check("intertwining", max(verify_intertwining(p, config.n_max) for p in grid), INTERTWINING_TOL)
    record.add_info("intertwining.multiplication_reading",
                    verify_intertwining(config.params, config.n_max, zero_reading="multiplication"))
    record.add_check("regeneration", max(verify_regeneration(p, REGENERATION_MAX_TOTAL) for p in grid),
                     REGENERATION_TOL)
    record.add_check(
        "cheap_duality",
        cheap_duality_consistency(config.params, config.theta, CHEAP_DUALITY_SECTOR, config.time),
        CHEAP_DUALITY_TOL,
    )


def run_gauss_sum(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, n_max=20)
    record.add_check("relative_residual.max", gauss_sum_check(params_grid(config), config.n_max), GAUSS_SUM_TOL)


def run_discrete_transform(config: ExperimentConfig, record: ResultRecord, rng: RngStream) -> None:
    config = with_defaults(config, n_max=10, x=1.0)
    params = config.params

    for theta in sorted({0.1, 0.5, 0.9, config.theta}):
        measure = DiscreteGammaMeasure.adaptive(params, theta)
        worst = 0.0
        for k in range(config.n_max + 1):
            expected = measure.rho ** k
            worst = max(worst, abs(discrete_transform(params, theta, k, measure) - expected) / expected)
        record.add_check(f"transform.theta={theta:g}", worst, DISCRETE_TRANSFORM_TOL)

    total = config.total if config.total is not None else config.n + config.m
    record.add_check(
        "harmonicity",
        harmonicity_check(params, config.theta, total, total, (0.0, 0.5, 1.0, config.time)),
        HARMONICITY_TOL,
    )

    gap_small = polynomial_continuum_gap(params, config.n, config.x, 1_000)
    gap_large = polynomial_continuum_gap(params, config.n, config.x, 10_000)
    record.add_info("continuum_gap.N=1000", gap_small)
    record.add_info("continuum_gap.N=10000", gap_large)
    if gap_large > 0:
        record.add_check("continuum_gap_reduction", gap_small / gap_large, SCALING_REDUCTION_FACTOR, comparison="ge")

    if config.replicas < 2:
        return
    xi = validate_occupation(config.xi if config.xi is not None else (config.n, config.m))
    poly = DualityPolynomial(params, xi)

    def task(count: int, stream: RngStream) -> np.ndarray:
        draws = sample_gamma(params.shape, config.theta, stream, size=(count, len(xi)))
        return eval_duality_batch(poly, draws)

    values = concat_chunks(run_replicas(task, config.replicas, rng, config.threads))
    mean, stderr = mean_and_stderr(values)
    exact = gamma_transform(params, config.theta, xi)
    record.add_info("gamma_transform.mc_mean", float(mean))
    record.add_info("gamma_transform.exact", exact)
    record.add_check("gamma_transform.z", standard_score(mean, exact, stderr), MC_SIGMA_BAND)


EXPERIMENTS: Dict[str, Experiment] = {
    "simulate": run_simulate,
    "simulate-dual": run_simulate_dual,
    "verify-duality": run_verify_duality,
    "verify-self-duality": run_verify_self_duality,
    "stationary": run_stationary,
    "detailed-balance": run_detailed_balance,
    "ergodic": run_ergodic,
    "scaling-limit": run_scaling_limit,
    "su11": run_su11,
    "wealth-spread": run_wealth_spread,
    "invariance": run_invariance,
    "gauss-sum": run_gauss_sum,
    "discrete-transform": run_discrete_transform,
}
