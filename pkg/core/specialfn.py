"""特殊函數模組 -- log-Gamma、Beta-binomial、終止型超幾何級數與亂數取樣

所有 Gamma 函數比值一律以 log 空間計算後再取 exp，避免 n >= 170 時階乘溢位。
Pochhammer 符號以 (正負號, log 絕對值) 表示，以處理 (-n)_k 的交錯符號。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy import special

from core.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


# ── 模型參數與亂數流 ──

@dataclass(frozen=True)
class ModelParams:
    """Beta 交換形狀參數 (s, t)；s = t = 1 為原始模型"""
    s: float = 1.0
    t: float = 1.0

    def __post_init__(self):
        if not (self.s > 0 and self.t > 0):
            raise DomainError(f"形狀參數必須為正: s={self.s}, t={self.t}")

    @property
    def shape(self) -> float:
        """s + t，也就是 Gamma 不變測度的形狀參數"""
        return self.s + self.t

    def swapped(self) -> "ModelParams":
        return ModelParams(self.t, self.s)


@dataclass
class RngStream:
    """
    可重現的亂數流。

    相同 (seed, stream_id, path) 產生相同序列；不同 stream_id 透過
    SeedSequence 的 spawn_key 得到統計上獨立的 PCG64 串流。
    一個 RngStream 只能由單一工作者使用，不可在並行任務間共享。
    """
    seed: int
    stream_id: int = 0
    path: Tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise DomainError(f"seed 與 stream_id 必須為非負整數: {self.seed}, {self.stream_id}")
        seq = np.random.SeedSequence(
            entropy=int(self.seed),
            spawn_key=(int(self.stream_id),) + tuple(int(p) for p in self.path),
        )
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def derive(self, index: int) -> "RngStream":
        """由本串流衍生第 index 個子串流（不消耗本串流的亂數）"""
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))


# ── Gamma / Beta 函數 ──

def log_gamma(x: ArrayLike) -> ArrayLike:
    """ln Γ(x)，x > 0"""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma 需要正引數: {x}")
    out = special.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def log_beta(s: ArrayLike, t: ArrayLike) -> ArrayLike:
    """ln B(s,t) = ln Γ(s) + ln Γ(t) - ln Γ(s+t)"""
    a = np.asarray(s, dtype=float)
    b = np.asarray(t, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError(f"log_beta 需要正引數: s={s}, t={t}")
    out = special.betaln(a, b)
    return float(out) if out.ndim == 0 else out


# ── Beta-binomial ──

def beta_binomial_logpmf(params: ModelParams, n: int, k: ArrayLike) -> ArrayLike:
    """
    ln w_{s,t}(n,k) = ln C(n,k) + ln B(k+s, n-k+t) - ln B(s,t)

    與 n!(k+s-1)!(n-k+t-1)! / (B(s,t)(s+t+n-1)! k!(n-k)!) 相同。
    """
    kk = np.asarray(k)
    if n < 0 or np.any(kk < 0) or np.any(kk > n):
        raise DomainError(f"Beta-binomial 需要 0 <= k <= n: n={n}, k={k}")
    kf = kk.astype(float)
    log_comb = special.gammaln(n + 1.0) - special.gammaln(kf + 1.0) - special.gammaln(n - kf + 1.0)
    out = log_comb + special.betaln(kf + params.s, n - kf + params.t) - special.betaln(params.s, params.t)
    return float(out) if np.ndim(out) == 0 else out


def beta_binomial_pmf(params: ModelParams, n: int, k: int) -> float:
    """w_{s,t}(n,k) = BetaBin(n,s,t)(k)"""
    return math.exp(beta_binomial_logpmf(params, n, k))


def beta_binomial_pmf_vector(params: ModelParams, n: int) -> np.ndarray:
    """整列 pmf [w(n,0), ..., w(n,n)]"""
    if n < 0:
        raise DomainError(f"n 必須為非負整數: {n}")
    return np.exp(beta_binomial_logpmf(params, n, np.arange(n + 1)))


# ── 取樣 ──

def sample_beta(params: ModelParams, rng: RngStream, size=None) -> ArrayLike:
    """Beta(s,t) 取樣；numpy 對 s,t < 1 使用 Jöhnk 演算法，任何 s,t > 0 皆有效"""
    return rng.generator.beta(params.s, params.t, size=size)


def sample_beta_binomial(params: ModelParams, n: ArrayLike, rng: RngStream, size=None) -> ArrayLike:
    """複合取樣：p ~ Beta(s,t)，再取 Binomial(n, p)"""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise DomainError(f"n 必須為非負整數: {n}")
    if size is None:
        size = n_arr.shape if n_arr.ndim else None
    p = rng.generator.beta(params.s, params.t, size=size)
    out = rng.generator.binomial(n_arr, p)
    return int(out) if np.ndim(out) == 0 else out


def sample_gamma(shape: float, scale: float, rng: RngStream, size=None) -> ArrayLike:
    """Gamma(shape, scale)，密度 x^{shape-1} e^{-x/scale} / (Γ(shape) scale^shape)"""
    if not (shape > 0 and scale > 0):
        raise DomainError(f"Gamma 參數必須為正: shape={shape}, scale={scale}")
    return rng.generator.gamma(shape, scale, size=size)


# ── 終止型超幾何級數 ──

def log_pochhammer(a: float, k: int) -> Tuple[int, float]:
    """
    上升階乘 (a)_k = a(a+1)...(a+k-1)，回傳 (正負號, ln|值|)。

    正負號為 0 表示值為 0（a 為非正整數且 k > -a）。
    """
    if k < 0:
        raise DomainError(f"Pochhammer 階數必須非負: {k}")
    if k == 0:
        return 1, 0.0
    if a <= 0 and float(a).is_integer():
        m = int(-a)
        if k > m:
            return 0, -math.inf
        # (-m)_k = (-1)^k m! / (m-k)!
        sign = -1 if k % 2 else 1
        return sign, float(special.gammaln(m + 1.0) - special.gammaln(m - k + 1.0))
    sign = int(special.gammasgn(a + k) * special.gammasgn(a))
    return sign, float(special.gammaln(a + k) - special.gammaln(a))


def hyp2f1_terminating(n: int, b: float, c: float, z: float) -> float:
    """
    ₂F₁(-n, b; c; z) = Σ_{k=0}^{n} (-n)_k (b)_k z^k / ((c)_k k!)

    只計算有限的 n+1 項；c 落在 {0, -1, ..., -(n-1)} 時分母為零。
    """
    if n < 0:
        raise DomainError(f"終止型 ₂F₁ 需要 n >= 0: {n}")
    if float(c).is_integer() and -(n - 1) <= c <= 0:
        raise DomainError(f"₂F₁ 分母參數 c={c} 在前 {n + 1} 項內為零")

    terms = []
    for k in range(n + 1):
        sa, la = log_pochhammer(-n, k)
        sb, lb = log_pochhammer(b, k)
        sc, lc = log_pochhammer(c, k)
        if sa == 0 or sb == 0:
            continue
        if k > 0 and z == 0:
            continue
        sz = 1 if (z >= 0 or k % 2 == 0) else -1
        lz = k * math.log(abs(z)) if k > 0 else 0.0
        log_mag = la + lb - lc + lz - float(special.gammaln(k + 1.0))
        terms.append(sa * sb * sc * sz * math.exp(log_mag))

    return math.fsum(terms)


def gauss_sum_closed_form(params: ModelParams, n: int) -> float:
    """Γ(t)Γ(n+s+t) / (Γ(s+t)Γ(n+t))，即 ₂F₁(-n, s; 1-n-t; 1) 的閉式"""
    s, t = params.s, params.t
    return math.exp(
        log_gamma(t) + log_gamma(n + s + t) - log_gamma(s + t) - log_gamma(n + t)
    )
