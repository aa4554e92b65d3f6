"""對偶多項式、自對偶多項式、測度變換與三種對偶驗證引擎

連續對偶多項式  d(k,x)   = x^k Γ(s+t) / Γ(s+t+k)
離散自對偶多項式 d(k,n) = n!/(n-k)! · Γ(s+t) / Γ(s+t+k)，k > n 時為 0

所有求值都先在 log 空間累加再取 exp，|ξ| 到數百也不會溢位。
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats

from config import DISCRETE_GAMMA_TAIL
from core.continuous import (
    BivariatePolynomial,
    WealthVector,
    apply_generator_quadrature,
    simulate_graph_batch,
    validate_wealth,
)
from core.dual import (
    DiscreteGammaMeasure,
    canonical_measure,
    check_theta,
    log_discrete_gamma_pmf,
    sector_row,
    simulate_dual_batch,
    transient_matrix,
    validate_occupation,
)
from core.errors import DomainError
from core.graphs import ExchangeKernel
from core.replicas import concat_chunks, mean_and_stderr, run_replicas
from core.sectors import sector_states
from core.specialfn import (
    ModelParams,
    RngStream,
    beta_binomial_pmf_vector,
    gauss_sum_closed_form,
    hyp2f1_terminating,
    sample_beta,
    sample_beta_binomial,
)

logger = logging.getLogger(__name__)


def log_duality_coefficient(params: ModelParams, k) -> np.ndarray:
    """ln c_k = ln Γ(s+t) - ln Γ(s+t+k)"""
    a = params.shape
    return special.gammaln(a) - special.gammaln(a + np.asarray(k, dtype=float))


def _log_duality_factors(params: ModelParams, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """逐頂點 ln d(ξ_i, x_i)；x_i = 0 且 ξ_i > 0 時為 -inf"""
    xi_f = np.asarray(xi, dtype=float)
    x_f = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pow = np.where(xi_f == 0, 0.0, xi_f * np.log(x_f))
    return log_pow + log_duality_coefficient(params, xi_f)


# ── 資料型別 ──

@dataclass(frozen=True)
class DualityPolynomial:
    """D(ξ, x) = Π_i d(ξ_i, x_i)"""
    params: ModelParams
    multi_index: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "multi_index", validate_occupation(self.multi_index))

    @property
    def total(self) -> int:
        return int(self.multi_index.sum())

    def __call__(self, x) -> float:
        return eval_duality(self, x)

    def as_bivariate(self) -> BivariatePolynomial:
        """兩頂點時轉為 c_n c_m x^n y^m，供求積生成元使用"""
        if len(self.multi_index) != 2:
            raise DomainError(f"只有兩頂點對偶多項式可以轉為二元多項式: {self.multi_index}")
        n, m = (int(v) for v in self.multi_index)
        coeff = float(np.exp(log_duality_coefficient(self.params, [n, m]).sum()))
        return BivariatePolynomial.monomial(n, m, coeff)


@dataclass(frozen=True)
class SelfDualityPolynomial:
    """n -> d(k, n)"""
    params: ModelParams
    order: int

    def __post_init__(self):
        if self.order < 0:
            raise DomainError(f"自對偶多項式階數必須非負: {self.order}")

    def __call__(self, n: int) -> float:
        return eval_self_duality(self.params, self.order, n)


@dataclass(frozen=True)
class PathDualityResult:
    """E_x D(ξ, x_t) 的 Monte Carlo 估計與對偶側的值"""
    mc_mean: float
    mc_se: float
    dual_value: float
    dual_se: float
    exact_dual: bool

    @property
    def z_score(self) -> float:
        gap = abs(self.mc_mean - self.dual_value)
        se = math.hypot(self.mc_se, self.dual_se)
        if se == 0:
            return 0.0 if gap <= 1e-12 * max(1.0, abs(self.dual_value)) else math.inf
        return gap / se


@dataclass(frozen=True)
class ScalingGaps:
    """一步更新的動差差距：Monte Carlo 與精確值"""
    mean_gap: float
    second_moment_gap: float
    exact_mean_gap: float
    exact_variance_gap: float


# ── 求值 ──

def eval_duality(poly: DualityPolynomial, x: WealthVector) -> float:
    arr = validate_wealth(x)
    if arr.shape != poly.multi_index.shape:
        raise DomainError(f"維度不符: ξ={poly.multi_index.shape}, x={arr.shape}")
    return float(np.exp(_log_duality_factors(poly.params, poly.multi_index, arr).sum()))


def eval_duality_batch(poly: DualityPolynomial, states: np.ndarray) -> np.ndarray:
    """對 (replicas × vertices) 的財富狀態逐列求 D(ξ, x)"""
    if states.shape[-1] != len(poly.multi_index):
        raise DomainError(f"維度不符: ξ={poly.multi_index.shape}, states={states.shape}")
    return np.exp(_log_duality_factors(poly.params, poly.multi_index, states).sum(axis=-1))


def eval_duality_dual_batch(params: ModelParams, configurations: np.ndarray, x: WealthVector) -> np.ndarray:
    """對 (replicas × vertices) 的粒子組態逐列求 D(ξ_t, x)，x 固定"""
    arr = validate_wealth(x)
    return np.exp(_log_duality_factors(params, configurations, arr).sum(axis=-1))


def eval_self_duality(params: ModelParams, k: int, n: int) -> float:
    if k < 0 or n < 0:
        raise DomainError(f"k, n 必須非負: k={k}, n={n}")
    if k > n:
        return 0.0
    log_falling = special.gammaln(n + 1.0) - special.gammaln(n - k + 1.0)
    return float(np.exp(log_falling + log_duality_coefficient(params, k)))


def self_duality_matrix(params: ModelParams, left_total: int, right_total: int) -> np.ndarray:
    """D(k, K-k; n, N-n) = d(k,n) d(K-k, N-n)，列為 k、行為 n"""
    out = np.zeros((left_total + 1, right_total + 1))
    for k in range(left_total + 1):
        for n in range(right_total + 1):
            out[k, n] = (eval_self_duality(params, k, n)
                         * eval_self_duality(params, left_total - k, right_total - n))
    return out


# ── 測度變換 ──

def gamma_transform(params: ModelParams, theta: float, xi) -> float:
    """∫ D(ξ, x) Π Gamma(s+t, θ)(dx_i) = θ^{|ξ|}"""
    if not theta > 0:
        raise DomainError(f"θ 必須為正: {theta}")
    return float(theta ** int(validate_occupation(xi).sum()))


def transform_truncation(params: ModelParams, theta: float, k: int, tail: float = DISCRETE_GAMMA_TAIL) -> int:
    """
    Σ_n d(k,n) ν_θ(n) 的截斷點，使相對截斷誤差 <= tail。

    d(k,n) ν^{s+t}_θ(n) = ρ^k ν^{s+t+k}_θ(n-k)，故尾端即形狀 s+t+k 的負二項尾端。
    """
    depth = int(stats.nbinom.isf(tail, params.shape + k, 1.0 - theta))
    while stats.nbinom.sf(depth, params.shape + k, 1.0 - theta) > tail:
        depth += 1
    return k + depth


def discrete_transform(
    params: ModelParams,
    theta: float,
    k: int,
    measure: Optional[DiscreteGammaMeasure] = None,
) -> float:
    """Σ_n d(k,n) ν^{s+t}_θ(n)，理論值 ρ(θ)^k"""
    check_theta(theta)
    if k < 0:
        raise DomainError(f"k 必須非負: {k}")
    if measure is None:
        measure = DiscreteGammaMeasure.adaptive(params, theta)
    elif measure.theta != theta or measure.params != params:
        raise DomainError("離散 Gamma 測度的參數與 (params, θ) 不一致")

    needed = transform_truncation(params, theta, k)
    n_max = max(measure.truncation, needed)
    if n_max > measure.truncation:
        logger.debug("k=%d 需要較深的截斷: %d -> %d", k, measure.truncation, n_max)

    n = np.arange(k, n_max + 1, dtype=float)
    log_terms = (special.gammaln(n + 1.0) - special.gammaln(n - k + 1.0)
                 + log_duality_coefficient(params, k)
                 + log_discrete_gamma_pmf(params, theta, n))
    return math.fsum(np.exp(log_terms))


# ── 生成元層級的對偶 ──

def verify_generator_duality(params: ModelParams, n: int, m: int, x: float, y: float) -> float:
    """
    左側：L 作用在 x ↦ D(n,m;x,y)，以 Gauss–Jacobi 求積精確計算；
    右側：Σ_{k,l} r(n,m;k,l) [D(n-k+l, m-l+k; x,y) - D(n,m;x,y)]。

    回傳 |LHS - RHS| / (1 + |RHS|)。
    """
    if not (x >= 0 and y >= 0):
        raise DomainError(f"x, y 必須非負: x={x}, y={y}")
    poly = DualityPolynomial(params, np.array([n, m]))
    lhs = apply_generator_quadrature(params, poly.as_bivariate(), x, y)

    rates = np.outer(beta_binomial_pmf_vector(params, n), beta_binomial_pmf_vector(params, m))
    k = np.arange(n + 1)[:, None]
    l = np.arange(m + 1)[None, :]
    targets = np.stack(np.broadcast_arrays(n - k + l, m - l + k), axis=-1)
    values = eval_duality_dual_batch(params, targets.reshape(-1, 2), [x, y]).reshape(rates.shape)
    rhs = math.fsum((rates * (values - poly([x, y]))).ravel())

    return abs(lhs - rhs) / (1.0 + abs(rhs))


# ── 路徑層級的對偶 ──

def _two_vertex_dual_expectation(params: ModelParams, kernel: ExchangeKernel, xi: np.ndarray, x: np.ndarray, time: float) -> float:
    """兩頂點對偶側的精確值：Σ_k P_ξ(ξ_t = (k, N-k)) D((k, N-k), x)"""
    total = int(xi.sum())
    edge_rate = kernel.edges[0][2] if kernel.edges else 0.0
    transient = transient_matrix(params, total, time * edge_rate)[int(xi[0])]
    states = sector_states(total)
    return math.fsum(transient * eval_duality_dual_batch(params, states, x))


def verify_path_duality(
    params: ModelParams,
    kernel: ExchangeKernel,
    xi,
    x: WealthVector,
    time: float,
    replicas: int,
    rng: RngStream,
    threads: Optional[int] = None,
) -> PathDualityResult:
    """
    E_x D(ξ, x_t) = Ê_ξ D(ξ_t, x)

    左側一律為連續過程的 Monte Carlo；兩頂點時右側以扇區均勻化精確計算，
    其他圖則以對偶過程的 Monte Carlo 估計。
    """
    if time < 0:
        raise DomainError(f"時間必須非負: {time}")
    poly = DualityPolynomial(params, xi)
    x_arr = validate_wealth(x)
    if len(x_arr) != kernel.num_vertices or len(poly.multi_index) != kernel.num_vertices:
        raise DomainError("ξ、x 與頂點數不一致")

    def continuous_task(count: int, stream: RngStream) -> np.ndarray:
        states = simulate_graph_batch(params, kernel, x_arr, time, count, stream)
        return eval_duality_batch(poly, states)

    values = concat_chunks(run_replicas(continuous_task, replicas, rng.derive(0), threads))
    mc_mean, mc_se = mean_and_stderr(values)

    if kernel.num_vertices == 2:
        dual_value = _two_vertex_dual_expectation(params, kernel, poly.multi_index, x_arr, time)
        result = PathDualityResult(float(mc_mean), float(mc_se), dual_value, 0.0, True)
    else:
        def dual_task(count: int, stream: RngStream) -> np.ndarray:
            configs = simulate_dual_batch(params, kernel, poly.multi_index, time, count, stream)
            return eval_duality_dual_batch(params, configs, x_arr)

        dual_values = concat_chunks(run_replicas(dual_task, replicas, rng.derive(1), threads))
        dual_mean, dual_se = mean_and_stderr(dual_values)
        result = PathDualityResult(float(mc_mean), float(mc_se), float(dual_mean), float(dual_se), False)

    logger.info(
        "路徑對偶: mc=%.6g ± %.2g, dual=%.6g ± %.2g (z=%.2f)",
        result.mc_mean, result.mc_se, result.dual_value, result.dual_se, result.z_score,
    )
    return result


# ── 自對偶 ──

def verify_self_duality(
    params: ModelParams,
    left_total: int,
    right_total: int,
    pairs: Optional[Iterable[Tuple[int, int]]] = None,
    time: float = 1.0,
) -> float:
    """
    Ê_{(n,m)} D(k,l; N_t, M_t) = Ê_{(k,l)} D(K_t, L_t; n, m)

    pairs 為 (k, n) 的列表（各自是左、右扇區中第一頂點的粒子數），None 代表全部組合。
    """
    if left_total < 0 or right_total < 0:
        raise DomainError(f"扇區總數必須非負: {left_total}, {right_total}")
    d_matrix = self_duality_matrix(params, left_total, right_total)
    t_left = transient_matrix(params, left_total, time)
    t_right = transient_matrix(params, right_total, time)

    lhs = d_matrix @ t_right.T
    rhs = t_left @ d_matrix
    residual = np.abs(lhs - rhs)

    if pairs is None:
        return float(residual.max())
    selected: List[float] = []
    for k, n in pairs:
        if not (0 <= k <= left_total and 0 <= n <= right_total):
            raise DomainError(f"配對 ({k}, {n}) 超出扇區範圍")
        selected.append(float(residual[k, n]))
    return max(selected) if selected else 0.0


# ── 其他恆等式 ──

def sum_identity_value(params: ModelParams, total: int, x: float, y: float) -> float:
    """Σ_{k+l=N} D(k,l;x,y) ν^{s+t}_N(k,l)"""
    measure = canonical_measure(params, total)
    states = sector_states(total)
    return math.fsum(measure.probs * eval_duality_dual_batch(params, states, [x, y]))


def sum_identity_check(params: ModelParams, total: int, x: float, y: float) -> float:
    """與 (x+y)^N / (N! Z_N) 的相對差"""
    if not (x >= 0 and y >= 0):
        raise DomainError(f"x, y 必須非負: x={x}, y={y}")
    partition = canonical_measure(params, total).partition
    expected = (x + y) ** total / (math.factorial(total) * partition)
    value = sum_identity_value(params, total, x, y)
    if expected == 0:
        return abs(value)
    return abs(value - expected) / abs(expected)


def harmonicity_check(params: ModelParams, theta: float, total: int, start: int, times: Sequence[float]) -> float:
    """max_t |Σ_state P_start(state at t) θ^{k+l} - θ^N|"""
    check_theta(theta)
    worst = 0.0
    for t in times:
        probs = transient_matrix(params, total, t)[start]
        k = np.arange(total + 1)
        value = math.fsum(probs * theta ** (k + (total - k)))
        worst = max(worst, abs(value - theta ** total))
    return worst


def polynomial_continuum_gap(params: ModelParams, k: int, x: float, scale: int) -> float:
    """|d(k, ⌊Nx⌋) / N^k - d(k, x)|"""
    if scale < 1 or x < 0:
        raise DomainError(f"需要 N >= 1 且 x >= 0: N={scale}, x={x}")
    n = math.floor(scale * x)
    discrete = eval_self_duality(params, k, n) / float(scale) ** k
    continuum = x ** k * math.exp(float(log_duality_coefficient(params, k)))
    return abs(discrete - continuum)


def gauss_sum_check(params_grid: Iterable[ModelParams], n_max: int) -> float:
    """₂F₁(-n, s; 1-n-t; 1) 與 Γ(t)Γ(n+s+t)/(Γ(s+t)Γ(n+t)) 的最大相對差"""
    worst = 0.0
    for params in params_grid:
        for n in range(n_max + 1):
            series = hyp2f1_terminating(n, params.s, 1.0 - n - params.t, 1.0)
            closed = gauss_sum_closed_form(params, n)
            worst = max(worst, abs(series - closed) / abs(closed))
    return worst


# ── 尺度極限 ──

def _check_scaling_inputs(x: float, y: float, scale: int) -> Tuple[int, int]:
    if scale < 100:
        raise DomainError(f"K 至少為 100: {scale}")
    if not (x >= 0 and y >= 0):
        raise DomainError(f"x, y 必須非負: x={x}, y={y}")
    return math.floor(scale * x), math.floor(scale * y)


def exact_scaling_gaps(params: ModelParams, x: float, y: float, scale: int) -> Tuple[float, float]:
    """
    (|平均差|, |變異數差|)：對偶側由 n_K - X₁ + X₂ 的精確法則求得，
    連續側為 E = x(1-μ) + yμ、Var = (x² + y²) μ(1-μ)/(s+t+1)，μ = s/(s+t)。
    """
    n, m = _check_scaling_inputs(x, y, scale)
    law = sector_row(params, n, n + m)
    values = np.arange(n + m + 1) / scale
    dual_mean = math.fsum(law * values)
    dual_var = math.fsum(law * (values - dual_mean) ** 2)

    mu = params.s / params.shape
    cont_mean = x * (1.0 - mu) + y * mu
    cont_var = (x * x + y * y) * mu * (1.0 - mu) / (params.shape + 1.0)
    return abs(dual_mean - cont_mean), abs(dual_var - cont_var)


def scaling_limit_check(
    params: ModelParams,
    x: float,
    y: float,
    scale: int,
    rng: RngStream,
    samples: int = 1_000_000,
    threads: Optional[int] = None,
) -> ScalingGaps:
    """
    n_K = ⌊Kx⌋、m_K = ⌊Ky⌋；比較 (n_K - X₁ + X₂)/K 與 x(1-U) + yV 的一步動差。

    Monte Carlo 差距為主要輸出，另附精確差距。
    """
    n, m = _check_scaling_inputs(x, y, scale)

    def task(count: int, stream: RngStream) -> np.ndarray:
        x1 = sample_beta_binomial(params, np.full(count, n), stream)
        x2 = sample_beta_binomial(params, np.full(count, m), stream)
        u = sample_beta(params, stream, size=count)
        v = sample_beta(params, stream, size=count)
        return np.stack([(n - x1 + x2) / scale, x * (1.0 - u) + y * v], axis=1)

    draws = concat_chunks(run_replicas(task, samples, rng, threads))
    mean_gap = abs(draws[:, 0].mean() - draws[:, 1].mean())
    second_gap = abs(np.mean(draws[:, 0] ** 2) - np.mean(draws[:, 1] ** 2))
    exact_mean, exact_var = exact_scaling_gaps(params, x, y, scale)

    gaps = ScalingGaps(
        mean_gap=float(mean_gap),
        second_moment_gap=float(second_gap),
        exact_mean_gap=exact_mean,
        exact_variance_gap=exact_var,
    )
    logger.info("尺度極限 K=%d: %s", scale, gaps)
    return gaps
