"""離散對偶過程 -- 速率、扇區轉移矩陣、均勻化暫態分佈、不變/可逆測度與路徑模擬

對偶過程在邊 {i,j} 觸發時，抽 X₁ ~ BetaBin(ξ_i,s,t)、X₂ ~ BetaBin(ξ_j,s,t)，
令 (ξ_i, ξ_j) <- (ξ_i - X₁ + X₂, ξ_j - X₂ + X₁)。k = l 的自迴圈保留在 P 中，
所以 P 的對角為正，且「速率總和為 1」逐字成立。
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import linalg, special, stats

from config import DISCRETE_GAMMA_TAIL, UNIFORMIZATION_TAIL
from core.continuous import run_edge_events
from core.errors import DomainError, ThetaDomainError
from core.graphs import ExchangeKernel
from core.sectors import SectorOperator, sector_size
from core.specialfn import (
    ModelParams,
    RngStream,
    beta_binomial_logpmf,
    beta_binomial_pmf_vector,
    sample_beta_binomial,
)

logger = logging.getLogger(__name__)

OccupationVector = np.ndarray


def validate_occupation(values) -> OccupationVector:
    """轉為 int 陣列並檢查每個分量為非負整數"""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise DomainError(f"粒子組態必須是一維: shape={arr.shape}")
    as_int = arr.astype(np.int64)
    if np.any(as_int != arr) or np.any(as_int < 0):
        raise DomainError(f"粒子數必須是非負整數: {values}")
    return as_int


def check_theta(theta: float) -> float:
    if not (0.0 < theta < 1.0):
        raise ThetaDomainError(f"θ 必須在 (0,1) 之間: {theta}")
    return float(theta)


# ── 資料型別 ──

@dataclass(frozen=True)
class SectorDistribution:
    """扇區 N 上的機率分佈，probs[k] 對應狀態 (k, N-k)"""
    total: int
    probs: np.ndarray
    partition: Optional[float] = None

    def __post_init__(self):
        if self.probs.shape != (sector_size(self.total),):
            raise DomainError(f"分佈長度 {self.probs.shape} 與扇區 {self.total} 不符")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise DomainError(f"不是機率分佈: sum={self.probs.sum():.17g}")

    def total_variation(self, other: "SectorDistribution") -> float:
        return 0.5 * float(np.abs(self.probs - other.probs).sum())


@dataclass(frozen=True)
class DiscreteGammaMeasure:
    """離散 Gamma 測度 ν^{s+t}_θ，截斷於 N_max（被忽略的尾端 <= DISCRETE_GAMMA_TAIL）"""
    params: ModelParams
    theta: float
    truncation: int

    def __post_init__(self):
        check_theta(self.theta)
        if self.truncation < 0:
            raise DomainError(f"截斷必須非負: {self.truncation}")

    @classmethod
    def adaptive(cls, params: ModelParams, theta: float, tail: float = DISCRETE_GAMMA_TAIL) -> "DiscreteGammaMeasure":
        """
        自適應選擇 N_max，使 P(n > N_max) <= tail。

        ν^{s+t}_θ 即負二項分佈 NB(r = s+t, p = 1-θ)。
        """
        check_theta(theta)
        n_max = int(stats.nbinom.isf(tail, params.shape, 1.0 - theta))
        n_max = max(n_max, 1)
        while stats.nbinom.sf(n_max, params.shape, 1.0 - theta) > tail:
            n_max += 1
        logger.info("離散 Gamma 截斷: θ=%.4g, s+t=%.4g -> N_max=%d", theta, params.shape, n_max)
        return cls(params, theta, n_max)

    @property
    def rho(self) -> float:
        """ρ(θ) = θ / (1-θ)"""
        return self.theta / (1.0 - self.theta)


# ── 速率 ──

def dual_rate(params: ModelParams, n: int, m: int, k: int, l: int) -> float:
    """r_{s,t}(n,m;k,l) = BetaBin(n)(k) · BetaBin(m)(l)"""
    if not (0 <= k <= n and 0 <= l <= m):
        raise DomainError(f"速率需要 0 <= k <= n, 0 <= l <= m: n={n}, m={m}, k={k}, l={l}")
    return math.exp(beta_binomial_logpmf(params, n, k) + beta_binomial_logpmf(params, m, l))


def rate_sum(params: ModelParams, n: int, m: int) -> float:
    """Σ_{k,l} r_{s,t}(n,m;k,l)，應為 1"""
    return float(np.outer(beta_binomial_pmf_vector(params, n), beta_binomial_pmf_vector(params, m)).sum())


# ── 扇區矩陣 ──

def sector_row(params: ModelParams, n: int, total: int) -> np.ndarray:
    """
    從 (n, N-n) 出發一步後第一頂點粒子數 n' 的分佈：n - X₁ + X₂ 的法則。

    np.convolve(w_m, w_n[::-1])[j] = Σ_l w_m[l] w_n[n - j + l]，即 j = n - k + l。
    """
    w_n = beta_binomial_pmf_vector(params, n)
    w_m = beta_binomial_pmf_vector(params, total - n)
    return np.convolve(w_m, w_n[::-1])


def sector_row_from_rates(params: ModelParams, n: int, total: int) -> np.ndarray:
    """同一列，但逐項加總顯式速率 r(n,m;k,l)（作為獨立對照）"""
    m = total - n
    row = np.zeros(sector_size(total))
    for k in range(n + 1):
        for l in range(m + 1):
            row[n - k + l] += dual_rate(params, n, m, k, l)
    return row


def sector_transition_matrix(params: ModelParams, total: int) -> SectorOperator:
    """扇區 N 上的隨機矩陣 P，列 = 出發狀態"""
    if total < 0:
        raise DomainError(f"扇區總數必須非負: {total}")
    matrix = np.stack([sector_row(params, n, total) for n in range(total + 1)])
    return SectorOperator(total, total, matrix)


def sector_generator(params: ModelParams, total: int) -> SectorOperator:
    """ℒ = P - I"""
    p = sector_transition_matrix(params, total)
    return p - p.identity_like()


def dual_generator_apply(params: ModelParams, total: int, f) -> np.ndarray:
    """(P - I) f"""
    arr = np.asarray(f, dtype=float)
    if arr.shape != (sector_size(total),):
        raise DomainError(f"函數長度 {arr.shape} 與扇區大小 {sector_size(total)} 不符")
    return sector_generator(params, total).apply(arr)


# ── 均勻化 ──

def _poisson_weights(time: float, tail: float) -> np.ndarray:
    """Poisson(time) 權重 j = 0..J，J 為尾端 <= tail 的最小截斷"""
    depth = int(stats.poisson.isf(tail, time))
    while stats.poisson.sf(depth, time) > tail:
        depth += 1
    return stats.poisson.pmf(np.arange(depth + 1), time)


def uniformize(matrix: np.ndarray, time: float, initial: np.ndarray, tail: float = UNIFORMIZATION_TAIL) -> np.ndarray:
    """
    initial · e^{t(P-I)} = e^{-t} Σ_j (t^j / j!) initial · P^j

    initial 的每一列是一個起始分佈；回傳同形狀的暫態分佈（逐列正規化）。
    """
    if time < 0:
        raise DomainError(f"時間必須非負: {time}")
    current = np.array(initial, dtype=float)
    if time == 0:
        return current

    weights = _poisson_weights(time, tail)
    logger.debug("均勻化: t=%.4g, 截斷深度=%d", time, len(weights) - 1)
    result = weights[0] * current
    for w in weights[1:]:
        current = current @ matrix
        result += w * current
    return result / result.sum(axis=-1, keepdims=True)


def transient_matrix(params: ModelParams, total: int, time: float) -> np.ndarray:
    """整個扇區的暫態轉移矩陣 T_t[a, b] = P_a(狀態 b 於時刻 t)"""
    p = sector_transition_matrix(params, total).matrix
    return uniformize(p, time, np.eye(sector_size(total)))


def transient_distribution(params: ModelParams, total: int, start: int, time: float) -> SectorDistribution:
    """從扇區索引 start = 第一頂點粒子數出發，時刻 time 的分佈"""
    if not 0 <= start <= total:
        raise DomainError(f"起點 {start} 不在扇區 {total} 內")
    initial = np.zeros(sector_size(total))
    initial[start] = 1.0
    p = sector_transition_matrix(params, total).matrix
    probs = uniformize(p, time, initial)
    return SectorDistribution(total, np.clip(probs, 0.0, None) / np.clip(probs, 0.0, None).sum())


# ── 不變 / 可逆測度 ──

def log_gamma_weight(params: ModelParams, k) -> np.ndarray:
    """ln(Γ(s+t+k) / (Γ(s+t) k!))"""
    kk = np.asarray(k, dtype=float)
    a = params.shape
    return special.gammaln(a + kk) - special.gammaln(a) - special.gammaln(kk + 1.0)


def canonical_measure(params: ModelParams, total: int) -> SectorDistribution:
    """ν^{s+t}_N(k,l) ∝ g(k) g(l)，附帶配分函數 Z^{s+t}_N"""
    if total < 0:
        raise DomainError(f"扇區總數必須非負: {total}")
    k = np.arange(total + 1)
    log_w = log_gamma_weight(params, k) + log_gamma_weight(params, total - k)
    log_z = special.logsumexp(log_w)
    probs = np.exp(log_w - log_z)
    return SectorDistribution(total, probs / probs.sum(), partition=float(np.exp(log_z)))


def stationary_by_nullspace(operator: SectorOperator) -> np.ndarray:
    """稠密求解 π(P - I) = 0 的左零空間向量（正規化為機率）"""
    generator = operator.matrix - np.eye(operator.matrix.shape[0])
    basis = linalg.null_space(generator.T)
    if basis.shape[1] != 1:
        raise DomainError(f"左零空間維度為 {basis.shape[1]}，鏈不可約性失敗")
    vec = basis[:, 0]
    return vec / vec.sum()


def log_discrete_gamma_pmf(params: ModelParams, theta: float, n) -> np.ndarray:
    """ln ν^{s+t}_θ(n) = n ln θ + ln(Γ(s+t+n)/(Γ(s+t) n!)) + (s+t) ln(1-θ)"""
    nn = np.asarray(n, dtype=float)
    return nn * math.log(theta) + log_gamma_weight(params, nn) + params.shape * math.log1p(-theta)


def discrete_gamma_pmf(measure: DiscreteGammaMeasure, n: int) -> float:
    if n < 0:
        raise DomainError(f"n 必須非負: {n}")
    return float(np.exp(log_discrete_gamma_pmf(measure.params, measure.theta, n)))


def discrete_gamma_pmf_vector(measure: DiscreteGammaMeasure) -> np.ndarray:
    """[ν(0), ..., ν(N_max)]"""
    return np.exp(log_discrete_gamma_pmf(measure.params, measure.theta, np.arange(measure.truncation + 1)))


def detailed_balance_check(params: ModelParams, theta: float, n_max: int) -> float:
    """
    max |r(n,m;k,l) ν(n)ν(m) - r(n',m';l,k) ν(n')ν(m')|，n' = n-k+l、m' = m+k-l，
    遍歷 n+m <= N_max 與所有合法 (k,l)。
    """
    check_theta(theta)

    def log_flux(n: int, m: int, k: int, l: int) -> float:
        return float(
            beta_binomial_logpmf(params, n, k) + beta_binomial_logpmf(params, m, l)
            + log_discrete_gamma_pmf(params, theta, n) + log_discrete_gamma_pmf(params, theta, m)
        )

    worst = 0.0
    for total in range(n_max + 1):
        for n in range(total + 1):
            m = total - n
            for k in range(n + 1):
                for l in range(m + 1):
                    if k == l:
                        continue
                    forward = math.exp(log_flux(n, m, k, l))
                    backward = math.exp(log_flux(n - k + l, m + k - l, l, k))
                    worst = max(worst, abs(forward - backward))
    return worst


# ── 路徑模擬 ──

def _redistribute(params: ModelParams, xi: np.ndarray, xj: np.ndarray, rng: RngStream):
    x1 = sample_beta_binomial(params, xi, rng)
    x2 = sample_beta_binomial(params, xj, rng)
    return xi - x1 + x2, xj - x2 + x1


def simulate_dual(
    params: ModelParams,
    kernel: ExchangeKernel,
    init: OccupationVector,
    horizon: float,
    rng: RngStream,
) -> OccupationVector:
    """單一路徑的 Gillespie 模擬（與連續模型相同的邊時鐘慣例）"""
    if horizon < 0:
        raise DomainError(f"horizon 必須非負: {horizon}")
    state = validate_occupation(init).copy()
    if len(state) != kernel.num_vertices:
        raise DomainError(f"組態長度 {len(state)} 與頂點數 {kernel.num_vertices} 不符")
    rate = kernel.total_rate
    if rate <= 0:
        return state

    i_arr, j_arr, probs = kernel.edge_arrays()
    clock = 0.0
    while True:
        clock += rng.generator.exponential(1.0 / rate)
        if clock > horizon:
            break
        e = rng.generator.choice(len(probs), p=probs)
        i, j = i_arr[e], j_arr[e]
        new_i, new_j = _redistribute(params, np.array(state[i]), np.array(state[j]), rng)
        state[i], state[j] = int(new_i), int(new_j)
    return state


def simulate_dual_batch(
    params: ModelParams,
    kernel: ExchangeKernel,
    init: OccupationVector,
    horizon: float,
    replicas: int,
    rng: RngStream,
) -> np.ndarray:
    """replicas 條獨立對偶路徑在 horizon 時刻的組態 (replicas × vertices)"""
    start = validate_occupation(init)
    if len(start) != kernel.num_vertices:
        raise DomainError(f"組態長度 {len(start)} 與頂點數 {kernel.num_vertices} 不符")
    states = np.broadcast_to(start, (replicas, kernel.num_vertices)).copy()

    def exchange(xi, xj, stream):
        return _redistribute(params, xi, xj, stream)

    return run_edge_events(kernel, states, horizon, rng, exchange)


def empirical_sector_distribution(samples: np.ndarray, total: int) -> np.ndarray:
    """兩頂點樣本中第一頂點粒子數的經驗分佈（長度 N+1）"""
    return np.bincount(samples[:, 0], minlength=total + 1) / samples.shape[0]


def sector_rows_equivalence(params: ModelParams, total: int) -> float:
    """卷積表示與顯式速率表示的最大逐項差"""
    diffs: List[float] = [
        float(np.max(np.abs(sector_row(params, n, total) - sector_row_from_rates(params, n, total))))
        for n in range(total + 1)
    ]
    return max(diffs)
