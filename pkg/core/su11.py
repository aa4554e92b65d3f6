"""SU(1,1) 表示 -- 扇區矩陣、單點截斷、單項式算子與各項代數恆等式驗證

離散單點表示（作用在函數 f(n) 上）：
    K⁺ f(n) = (s+t+n) f(n+1)
    K⁻ f(n) = n f(n-1)
    K⁰ f(n) = ((s+t)/2 + n) f(n)
滿足 [K⁺,K⁻] = 2K⁰、[K^±,K⁰] = ±K^±。

連續表示（作用在多項式上）：
    𝒦⁺ = x
    𝒦⁻ = x∂² + (s+t)∂
    𝒦⁰ = x∂ + (s+t)/2
滿足符號相反的關係 [𝒦⁺,𝒦⁻] = -2𝒦⁰、[𝒦^±,𝒦⁰] = ∓𝒦^±，
且 𝒦^α d(n,·) = K^α d(·,x)(n)。
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np

from core.dual import (
    check_theta,
    log_discrete_gamma_pmf,
    log_gamma_weight,
    sector_generator,
    transient_matrix,
)
from core.duality import eval_self_duality, log_duality_coefficient
from core.errors import DomainError
from core.sectors import SectorOperator, sector_size
from core.specialfn import ModelParams

logger = logging.getLogger(__name__)

KINDS = ("plus", "minus", "zero")

_KIND_ALIASES = {"+": "plus", "-": "minus", "0": "zero"}

Polynomial = Dict[int, float]


def _normalize_kind(kind: str) -> str:
    name = _KIND_ALIASES.get(kind, kind)
    if name not in KINDS:
        raise DomainError(f"未知的算子種類: {kind}（可用: {', '.join(KINDS)}）")
    return name


# ── 兩點扇區算子 ──

def build_k_operator(params: ModelParams, kind: str, total: int) -> SectorOperator:
    """
    K₁^α + K₂^α 限制在扇區 N 上（結果在扇區 N 求值）。

    plus  讀取扇區 N+1：M[n, n+1] = s+t+n、M[n, n] = s+t+N-n
    minus 讀取扇區 N-1：M[n, n-1] = n、M[n, n] = N-n
    zero  讀取扇區 N：  (s+t+N)·I
    """
    if total < 0:
        raise DomainError(f"扇區總數必須非負: {total}")
    name = _normalize_kind(kind)
    a = params.shape

    if name == "plus":
        matrix = np.zeros((total + 1, total + 2))
        for n in range(total + 1):
            matrix[n, n + 1] += a + n
            matrix[n, n] += a + total - n
        return SectorOperator(total, total + 1, matrix)

    if name == "minus":
        matrix = np.zeros((total + 1, total))
        for n in range(total + 1):
            if n >= 1:
                matrix[n, n - 1] += n
            if n <= total - 1:
                matrix[n, n] += total - n
        return SectorOperator(total, total - 1, matrix)

    return SectorOperator(total, total, (a + total) * np.eye(total + 1))


def verify_commutation(params: ModelParams, totals: Iterable[int], kinds: Iterable[str] = KINDS) -> float:
    """
    max ‖ℒ_N ∘ K^α - K^α ∘ ℒ_{N'}‖，N' 為 K^α 讀取的扇區。

    兩側都把扇區 N' 上的函數映到扇區 N 上的函數。
    """
    totals = list(totals)
    if not totals:
        raise DomainError("扇區範圍不可為空")
    worst = 0.0
    for total in totals:
        gen_here = sector_generator(params, total)
        for kind in kinds:
            op = build_k_operator(params, kind, total)
            if op.domain_total < 0:
                continue
            gen_there = sector_generator(params, op.domain_total)
            residual = (gen_here @ op) - (op @ gen_there)
            value = float(np.abs(residual.matrix).max()) if residual.matrix.size else 0.0
            logger.debug("交換子 N=%d α=%s: %.3g", total, kind, value)
            worst = max(worst, value)
    return worst


# ── 單點截斷表示 ──

def single_site_operators(params: ModelParams, n_max: int) -> Dict[str, np.ndarray]:
    """{0..N_max} 上截斷的 K⁺、K⁻、K⁰；K⁺ 的第 N_max 列讀不到 f(N_max+1)，留為 0"""
    if n_max < 1:
        raise DomainError(f"N_max 至少為 1: {n_max}")
    a = params.shape
    n = np.arange(n_max + 1, dtype=float)
    plus = np.diag(a + n[:-1], k=1)
    minus = np.diag(n[1:], k=-1)
    zero = np.diag(a / 2.0 + n)
    return {"plus": plus, "minus": minus, "zero": zero}


def leak_rows(matrix: np.ndarray, leaks: np.ndarray) -> np.ndarray:
    """A 讀到不可信列的那些列：|A| @ 1_leaks > 0"""
    return (np.abs(matrix) @ leaks.astype(float)) > 0


def _product_leaks(a: np.ndarray, a_leaks: np.ndarray, b_leaks: np.ndarray) -> np.ndarray:
    """leak(AB) = leak(A) ∪ {i : A 讀到 leak(B)}"""
    return a_leaks | leak_rows(a, b_leaks)


def verify_su11_relations(params: ModelParams, n_max: int) -> Tuple[float, int]:
    """
    驗證 [K⁺,K⁻] = 2K⁰、[K⁺,K⁰] = K⁺、[K⁻,K⁰] = -K⁻、[K⁰,K⁰] = 0。

    只比較未受截斷影響的列；回傳 (最大殘差, 被排除的列數)。
    """
    ops = single_site_operators(params, n_max)
    size = n_max + 1
    leaks = {name: np.zeros(size, dtype=bool) for name in KINDS}
    leaks["plus"][n_max] = True

    relations = [
        ("plus", "minus", 2.0 * ops["zero"]),
        ("plus", "zero", ops["plus"]),
        ("minus", "zero", -ops["minus"]),
        ("zero", "zero", np.zeros((size, size))),
    ]

    worst = 0.0
    excluded = np.zeros(size, dtype=bool)
    for left, right, expected in relations:
        a, b = ops[left], ops[right]
        commutator = a @ b - b @ a
        bad = (_product_leaks(a, leaks[left], leaks[right])
               | _product_leaks(b, leaks[right], leaks[left]))
        excluded |= bad
        rows = ~bad
        if rows.any():
            worst = max(worst, float(np.abs(commutator[rows] - expected[rows]).max()))
    return worst, int(excluded.sum())


def verify_adjointness(params: ModelParams, theta: float, n_max: int) -> float:
    """W K⁺ = θ⁻¹ (K⁻)ᵀ W 在內部區塊 [:N_max, :N_max] 上，W = diag(ν_θ)"""
    check_theta(theta)
    ops = single_site_operators(params, n_max)
    weights = np.diag(np.exp(log_discrete_gamma_pmf(params, theta, np.arange(n_max + 1))))
    lhs = weights @ ops["plus"]
    rhs = ops["minus"].T @ weights / theta
    return float(np.abs(lhs[:n_max, :n_max] - rhs[:n_max, :n_max]).max())


# ── 連續單項式表示 ──

@dataclass(frozen=True)
class MonomialOperator:
    """線性算子，以「x^n 的像」定義"""
    name: str
    action: Callable[[int], Polynomial]

    def apply(self, poly: Polynomial) -> Polynomial:
        out: Dict[int, float] = defaultdict(float)
        for power, coeff in poly.items():
            if coeff == 0:
                continue
            for target, factor in self.action(power).items():
                out[target] += coeff * factor
        return dict(out)

    def compose(self, other: "MonomialOperator") -> "MonomialOperator":
        """(self ∘ other)"""
        return MonomialOperator(
            f"{self.name}∘{other.name}",
            lambda n: self.apply(other.action(n)),
        )


def continuous_k_operator(params: ModelParams, kind: str, zero_reading: str = "euler") -> MonomialOperator:
    """
    𝒦⁺: x^n -> x^{n+1}
    𝒦⁻: x^n -> (n(n-1) + (s+t)n) x^{n-1}
    𝒦⁰: x^n -> (n + (s+t)/2) x^n           (zero_reading="euler")
        x^n -> x^{n+1} + (s+t)/2 · x^n     (zero_reading="multiplication")
    """
    name = _normalize_kind(kind)
    a = params.shape
    if name == "plus":
        return MonomialOperator("K+", lambda n: {n + 1: 1.0})
    if name == "minus":
        return MonomialOperator("K-", lambda n: {n - 1: n * (n - 1) + a * n} if n > 0 else {})
    if zero_reading == "euler":
        return MonomialOperator("K0", lambda n: {n: n + a / 2.0})
    if zero_reading == "multiplication":
        return MonomialOperator("K0*", lambda n: {n + 1: 1.0, n: a / 2.0})
    raise DomainError(f"未知的 K⁰ 讀法: {zero_reading}")


def _poly_distance(p: Polynomial, q: Polynomial) -> float:
    keys = set(p) | set(q)
    if not keys:
        return 0.0
    return max(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _poly_combine(p: Polynomial, q: Polynomial, scale: float = 1.0) -> Polynomial:
    """p + scale·q"""
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0.0) + scale * v
    return out


def verify_continuous_su11_relations(params: ModelParams, n_max: int) -> float:
    """在 x^0..x^{N_max} 上驗證 [𝒦⁺,𝒦⁻] = -2𝒦⁰、[𝒦⁺,𝒦⁰] = -𝒦⁺、[𝒦⁻,𝒦⁰] = 𝒦⁻"""
    plus = continuous_k_operator(params, "plus")
    minus = continuous_k_operator(params, "minus")
    zero = continuous_k_operator(params, "zero")
    relations = [
        (plus, minus, zero, -2.0),
        (plus, zero, plus, -1.0),
        (minus, zero, minus, 1.0),
    ]
    worst = 0.0
    for n in range(n_max + 1):
        mono = {n: 1.0}
        for a_op, b_op, expected_op, factor in relations:
            commutator = _poly_combine(a_op.compose(b_op).apply(mono), b_op.compose(a_op).apply(mono), -1.0)
            expected = {k: factor * v for k, v in expected_op.apply(mono).items()}
            worst = max(worst, _poly_distance(commutator, expected))
    return worst


def verify_intertwining(params: ModelParams, n_max: int, zero_reading: str = "euler") -> float:
    """
    𝒦^α d(n, ·) 與 K^α 作用在指標 n 上的係數比較，d(n,x) = c_n x^n、c_n = Γ(s+t)/Γ(s+t+n)。

        K⁺: (s+t+n) d(n+1, x)
        K⁻: n d(n-1, x)
        K⁰: ((s+t)/2 + n) d(n, x)
    """
    if n_max < 1:
        raise DomainError(f"n_max 至少為 1: {n_max}")
    a = params.shape
    coeff = np.exp(log_duality_coefficient(params, np.arange(n_max + 2)))

    worst = 0.0
    for kind in KINDS:
        op = continuous_k_operator(params, kind, zero_reading)
        for n in range(n_max + 1):
            lhs = op.apply({n: float(coeff[n])})
            if kind == "plus":
                rhs = {n + 1: (a + n) * coeff[n + 1]}
            elif kind == "minus":
                rhs = {n - 1: n * coeff[n - 1]} if n > 0 else {}
            else:
                rhs = {n: (a / 2.0 + n) * coeff[n]}
            worst = max(worst, _poly_distance(lhs, rhs))
    return worst


# ── 自對偶函數 ──

def cheap_duality_consistency(params: ModelParams, theta: float, total: int, time: float) -> float:
    """
    平凡自對偶函數 𝒟(a; b) = δ_{a,b} / π(a)，π 為扇區上的乘積可逆權重 ν_θ(k)ν_θ(l)。

    自對偶關係 Σ_z T[b,z] 𝒟(a,z) = Σ_z T[a,z] 𝒟(z,b) 化為 T[b,a]/π(a) = T[a,b]/π(b)；
    回傳相對殘差 max|A - Aᵀ| / max|A|，A = T · diag(1/π)。
    """
    check_theta(theta)
    k = np.arange(total + 1)
    log_pi = log_discrete_gamma_pmf(params, theta, k) + log_discrete_gamma_pmf(params, theta, total - k)
    transient = transient_matrix(params, total, time)
    a = transient * np.exp(-log_pi)[None, :]
    return float(np.abs(a - a.T).max() / np.abs(a).max())


def _direct_sum_index(n_max: int) -> List[Tuple[int, int]]:
    """直和空間的狀態列表 [(N, k)]，N = 0..N_max"""
    return [(total, k) for total in range(n_max + 1) for k in range(total + 1)]


def regenerated_self_duality(params: ModelParams, n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    e^{K₁⁺+K₂⁺} 𝒟，𝒟(k,l;n,m) = δ · k! l! Γ(s+t)² / (Γ(s+t+k)Γ(s+t+l))。

    K⁺ 提升扇區，因此在扇區 0..N_max 的直和上冪零，指數級數在第 N_max 項終止；
    最頂扇區讀不到 N_max+1，其像直接捨棄。回傳 (再生結果, 閉式 D) 兩個方陣。
    """
    states = _direct_sum_index(n_max)
    offsets = {total: sum(sector_size(t) for t in range(total)) for total in range(n_max + 1)}
    size = len(states)

    raise_op = np.zeros((size, size))
    for total in range(n_max):
        block = build_k_operator(params, "plus", total).matrix
        r0, c0 = offsets[total], offsets[total + 1]
        raise_op[r0:r0 + block.shape[0], c0:c0 + block.shape[1]] = block

    pairs = np.array([(k, total - k) for total, k in states], dtype=float)
    cheap = np.diag(np.exp(-(log_gamma_weight(params, pairs[:, 0]) + log_gamma_weight(params, pairs[:, 1]))))

    result = cheap.copy()
    term = cheap.copy()
    for j in range(1, n_max + 1):
        term = raise_op @ term / j
        result += term

    closed = np.zeros((size, size))
    for row, (k_tot, k) in enumerate(states):
        for col, (n_tot, n) in enumerate(states):
            closed[row, col] = (eval_self_duality(params, k, n)
                                * eval_self_duality(params, k_tot - k, n_tot - n))
    return result, closed


def verify_regeneration(params: ModelParams, n_max: int) -> float:
    """max |e^{K⁺}𝒟 - D| / max(1, |D|)"""
    result, closed = regenerated_self_duality(params, n_max)
    return float(np.max(np.abs(result - closed) / np.maximum(1.0, np.abs(closed))))
