"""連續財富交換模型 -- 兩人交換、圖上 Gillespie 模擬、求積生成元與動差估計

時鐘慣例：每條無序邊 {i,j} 各自帶一個速率 p(i,j) 的指數時鐘，
觸發時對 (x_i, x_j) 做一次兩人交換。總速率 Λ = Σ p(i,j) 與狀態無關，
因此 [0,T] 內的事件數為 Poisson(ΛT)，事件為 i.i.d. 的類別分佈邊選取；
批次模擬直接利用這個性質在 replica 維度上向量化。
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import linalg
from scipy.special import roots_jacobi

from core.errors import DomainError
from core.graphs import ExchangeKernel, two_vertex_kernel
from core.replicas import concat_chunks, mean_and_stderr, run_replicas
from core.specialfn import ModelParams, RngStream, log_gamma, sample_beta, sample_gamma

logger = logging.getLogger(__name__)

WealthVector = np.ndarray
Observable = Callable[[np.ndarray], np.ndarray]


@dataclass
class ContinuousTrajectorySample:
    """路徑上的一個取樣點（每次跳躍後，以及終點時刻）"""
    time: float
    state: WealthVector
    jump_count: int


@dataclass(frozen=True)
class MomentComparison:
    """經驗動差與理論值的比較"""
    order: int
    empirical: float
    exact: float
    stderr: float

    @property
    def z_score(self) -> float:
        gap = abs(self.empirical - self.exact)
        if self.stderr == 0:
            return 0.0 if gap == 0 else math.inf
        return gap / self.stderr


@dataclass(frozen=True)
class BivariatePolynomial:
    """二元多項式 Σ c[i,j] x^i y^j"""
    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        nz = np.argwhere(self.coeffs != 0)
        if nz.size == 0:
            return 0
        return int(nz.sum(axis=1).max())

    def __call__(self, x, y):
        return npoly.polyval2d(x, y, self.coeffs)

    @classmethod
    def monomial(cls, i: int, j: int, coeff: float = 1.0) -> "BivariatePolynomial":
        c = np.zeros((i + 1, j + 1))
        c[i, j] = coeff
        return cls(c)


def validate_wealth(values) -> WealthVector:
    """轉為 float 陣列並檢查每個分量非負"""
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"財富向量必須是一維: shape={arr.shape}")
    if np.any(~(arr >= 0)):
        raise DomainError(f"財富必須非負: {values}")
    return arr


# ── 兩人交換 ──

def _exchange(params: ModelParams, x: np.ndarray, y: np.ndarray, rng: RngStream):
    """向量化的兩人更新；第二個座標以 (x+y) - 第一座標計算，總和精確守恆"""
    u = sample_beta(params, rng, size=np.shape(x))
    v = sample_beta(params, rng, size=np.shape(x))
    total = x + y
    first = np.minimum(x * (1.0 - u) + y * v, total)
    return first, total - first


def two_agent_step(params: ModelParams, x: float, y: float, rng: RngStream) -> Tuple[float, float]:
    """(x, y) -> (x(1-U) + yV, y(1-V) + xU)，U, V ~ Beta(s,t) 獨立"""
    if not (x >= 0 and y >= 0):
        raise DomainError(f"財富必須非負: x={x}, y={y}")
    first, second = _exchange(params, np.float64(x), np.float64(y), rng)
    return float(first), float(second)


# ── 圖上的 Gillespie 模擬 ──

def _pick_edges(kernel: ExchangeKernel, rng: RngStream, size):
    i_arr, j_arr, probs = kernel.edge_arrays()
    picks = rng.generator.choice(len(probs), size=size, p=probs)
    return i_arr[picks], j_arr[picks]


def simulate_graph_path(
    params: ModelParams,
    kernel: ExchangeKernel,
    init: WealthVector,
    horizon: float,
    rng: RngStream,
) -> List[ContinuousTrajectorySample]:
    """
    單一路徑的 Gillespie 模擬：總速率 Λ 的指數等待時間 + 類別分佈選邊。

    回傳每次跳躍後的取樣點，最後一筆固定為終點時刻 horizon。
    """
    if horizon < 0:
        raise DomainError(f"horizon 必須非負: {horizon}")
    state = validate_wealth(init)
    if len(state) != kernel.num_vertices:
        raise DomainError(f"財富向量長度 {len(state)} 與頂點數 {kernel.num_vertices} 不符")

    samples = [ContinuousTrajectorySample(0.0, state.copy(), 0)]
    rate = kernel.total_rate
    if rate <= 0:
        samples.append(ContinuousTrajectorySample(horizon, state.copy(), 0))
        return samples

    i_arr, j_arr, probs = kernel.edge_arrays()
    clock = 0.0
    jumps = 0
    while True:
        clock += rng.generator.exponential(1.0 / rate)
        if clock > horizon:
            break
        e = rng.generator.choice(len(probs), p=probs)
        i, j = i_arr[e], j_arr[e]
        state[i], state[j] = two_agent_step(params, state[i], state[j], rng)
        jumps += 1
        samples.append(ContinuousTrajectorySample(clock, state.copy(), jumps))

    samples.append(ContinuousTrajectorySample(horizon, state.copy(), jumps))
    logger.debug("路徑模擬完成: %d 次跳躍, horizon=%.4g", jumps, horizon)
    return samples


def simulate_graph(
    params: ModelParams,
    kernel: ExchangeKernel,
    init: WealthVector,
    horizon: float,
    rng: RngStream,
) -> WealthVector:
    """回傳 horizon 時刻的財富向量"""
    return simulate_graph_path(params, kernel, init, horizon, rng)[-1].state


def run_edge_events(
    kernel: ExchangeKernel,
    states: np.ndarray,
    horizon: float,
    rng: RngStream,
    exchange: Callable[[np.ndarray, np.ndarray, RngStream], Tuple[np.ndarray, np.ndarray]],
) -> np.ndarray:
    """
    在 replica 維度上向量化的事件驅動模擬（就地更新 states: replicas × vertices）。

    每個 replica 的事件數 ~ Poisson(ΛT)；第 k 輪只更新事件數 > k 的 replica。
    """
    if horizon < 0:
        raise DomainError(f"horizon 必須非負: {horizon}")
    replicas = states.shape[0]
    rate = kernel.total_rate
    if rate <= 0 or horizon == 0 or replicas == 0:
        return states

    counts = rng.generator.poisson(rate * horizon, size=replicas)
    rounds = int(counts.max()) if replicas else 0
    for k in range(rounds):
        active = np.nonzero(counts > k)[0]
        ei, ej = _pick_edges(kernel, rng, active.size)
        new_i, new_j = exchange(states[active, ei], states[active, ej], rng)
        states[active, ei] = new_i
        states[active, ej] = new_j
    logger.debug("批次事件模擬: %d replicas, %d 輪", replicas, rounds)
    return states


def simulate_graph_batch(
    params: ModelParams,
    kernel: ExchangeKernel,
    init: np.ndarray,
    horizon: float,
    replicas: int,
    rng: RngStream,
) -> np.ndarray:
    """
    replicas 條獨立路徑在 horizon 時刻的狀態 (replicas × vertices)。

    init 可為單一財富向量（所有 replica 共用）或 (replicas × vertices) 陣列。
    """
    init_arr = np.array(init, dtype=float)
    if np.any(~(init_arr >= 0)):
        raise DomainError("初始財富必須非負")
    if init_arr.shape[-1] != kernel.num_vertices:
        raise DomainError(f"財富向量長度 {init_arr.shape[-1]} 與頂點數 {kernel.num_vertices} 不符")
    states = np.broadcast_to(init_arr, (replicas, kernel.num_vertices)).copy()

    def exchange(xi, xj, stream):
        return _exchange(params, xi, xj, stream)

    return run_edge_events(kernel, states, horizon, rng, exchange)


# ── 生成元的 Gauss–Jacobi 求積 ──

def beta_quadrature(params: ModelParams, num_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Beta(s,t) 機率測度的 Gauss–Jacobi 節點與權重（權重和為 1）。

    [-1,1] 上的權重 (1-z)^α (1+z)^β，α = t-1、β = s-1，再以 u = (1+z)/2 映到 [0,1]。
    """
    z, w = roots_jacobi(num_nodes, params.t - 1.0, params.s - 1.0)
    return (1.0 + z) / 2.0, w / w.sum()


def apply_generator_quadrature(
    params: ModelParams,
    f: BivariatePolynomial,
    x: float,
    y: float,
) -> float:
    """
    (L_{s,t} f)(x,y) = ∬ (f(x(1-u)+yv, y(1-v)+xu) - f(x,y)) φ_{s,t}(u,v) du dv

    每軸 ⌈d/2⌉+1 個節點，對 d 次多項式精確（僅有捨入誤差）。
    """
    num_nodes = math.ceil(f.degree / 2) + 1
    nodes, weights = beta_quadrature(params, num_nodes)
    u, v = np.meshgrid(nodes, nodes, indexing="ij")
    w2 = np.outer(weights, weights)
    values = f(x * (1.0 - u) + y * v, y * (1.0 - v) + x * u)
    return float(np.sum(w2 * values) - f(x, y))


# ── 動差估計 ──

def total_wealth(states: np.ndarray) -> np.ndarray:
    return states.sum(axis=1)


def vertex_wealth(i: int) -> Observable:
    def observable(states: np.ndarray) -> np.ndarray:
        return states[:, i]
    return observable


def empirical_moment(
    params: ModelParams,
    kernel: ExchangeKernel,
    init: WealthVector,
    horizon: float,
    observable: Observable,
    replicas: int,
    rng: RngStream,
    threads: Optional[int] = None,
) -> Tuple[float, float]:
    """
    獨立 replica 的樣本平均與標準誤。

    observable 接收 (replicas × vertices) 的狀態陣列，回傳每個 replica 的值。
    """
    if replicas < 2:
        raise DomainError(f"replicas 至少為 2: {replicas}")
    init_arr = validate_wealth(init)

    def task(count: int, stream: RngStream) -> np.ndarray:
        states = simulate_graph_batch(params, kernel, init_arr, horizon, count, stream)
        return np.asarray(observable(states), dtype=float)

    values = concat_chunks(run_replicas(task, replicas, rng, threads))
    mean, stderr = mean_and_stderr(values)
    return float(mean), float(stderr)


def random_walk_transition(kernel: ExchangeKernel, t: float) -> np.ndarray:
    """單粒子隨機漫步的轉移矩陣 p_t = exp(tQ)（scaling-and-squaring）"""
    if t < 0:
        raise DomainError(f"時間必須非負: {t}")
    return linalg.expm(t * kernel.generator_matrix())


def expected_wealth(params: ModelParams, kernel: ExchangeKernel, init: WealthVector, t: float) -> np.ndarray:
    """
    E_x[x_i(t)] = Σ_j p_{μt}(i,j) x_j(0)，μ = s/(s+t)

    每次交換平均只把 μ 比例的財富移過邊，等同單一對偶粒子以速率 p(i,j)·μ 跳躍。
    """
    return random_walk_transition(kernel, t * params.s / params.shape) @ validate_wealth(init)


def ergodic_horizon(kernel: ExchangeKernel, holding_times: float) -> float:
    """「長時間」：holding_times 個平均停留時間 1/Λ"""
    return holding_times / kernel.total_rate


# ── 遍歷性與不變測度 ──

def beta_symmetric_moment(a: float, k: int) -> float:
    """Beta(a,a) 的 k 階動差 Π_{i<k} (a+i)/(2a+i)"""
    return math.prod((a + i) / (2.0 * a + i) for i in range(k))


def gamma_moment(shape: float, scale: float, k: int) -> float:
    """Gamma(shape, scale) 的 k 階動差 scale^k Γ(shape+k)/Γ(shape)"""
    return scale ** k * math.exp(log_gamma(shape + k) - log_gamma(shape))


def two_agent_ergodic_check(
    params: ModelParams,
    x: float,
    y: float,
    horizon: float,
    replicas: int,
    rng: RngStream,
    threads: Optional[int] = None,
    max_order: int = 4,
) -> List[MomentComparison]:
    """從 (x,y) 出發，X_T/(x+y) 的前幾階動差對照 Beta(s+t, s+t)"""
    total = x + y
    if not total > 0:
        raise DomainError(f"總財富必須為正: x+y={total}")
    kernel = two_vertex_kernel()
    init = validate_wealth([x, y])

    def task(count: int, stream: RngStream) -> np.ndarray:
        states = simulate_graph_batch(params, kernel, init, horizon, count, stream)
        return states[:, 0] / total

    split = concat_chunks(run_replicas(task, replicas, rng, threads))
    results = []
    for k in range(1, max_order + 1):
        mean, stderr = mean_and_stderr(split ** k)
        results.append(MomentComparison(k, float(mean), beta_symmetric_moment(params.shape, k), float(stderr)))
    return results


def gamma_invariance_check(
    params: ModelParams,
    theta: float,
    kernel: ExchangeKernel,
    horizon: float,
    replicas: int,
    rng: RngStream,
    threads: Optional[int] = None,
    max_order: int = 3,
) -> List[MomentComparison]:
    """
    初始每個頂點 i.i.d. Gamma(s+t, θ)，演化 horizon 後比較合併的逐頂點動差。

    同一 replica 內的頂點相關，因此先在 replica 內平均，再對 replica 求標準誤。
    """
    if not theta > 0:
        raise DomainError(f"θ 必須為正: {theta}")
    num_v = kernel.num_vertices

    def task(count: int, stream: RngStream) -> np.ndarray:
        init = sample_gamma(params.shape, theta, stream, size=(count, num_v))
        states = simulate_graph_batch(params, kernel, init, horizon, count, stream)
        return np.stack([np.mean(states ** k, axis=1) for k in range(1, max_order + 1)], axis=1)

    per_replica = concat_chunks(run_replicas(task, replicas, rng, threads))
    mean, stderr = mean_and_stderr(per_replica)
    return [
        MomentComparison(k, float(mean[k - 1]), gamma_moment(params.shape, theta, k), float(stderr[k - 1]))
        for k in range(1, max_order + 1)
    ]
