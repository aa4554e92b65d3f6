"""守恆扇區上的線性算子

扇區 N = {(k, N-k): k = 0..N}，狀態依第一個頂點的粒子數 k 遞增排列。

算子作用在「函數值」上：矩陣的列 (row) 是結果被求值的扇區 (range_total)，
行 (column) 是被讀取的函數值所在扇區 (domain_total)。
例如 K⁺ 讀取扇區 N+1 的值、產生扇區 N 上的函數，所以 domain = range + 1。
"""
from dataclasses import dataclass

import numpy as np

from core.errors import DomainError


def sector_size(total: int) -> int:
    return max(0, total + 1)


def sector_states(total: int) -> np.ndarray:
    """扇區狀態陣列 [(0,N), (1,N-1), ..., (N,0)]"""
    k = np.arange(sector_size(total))
    return np.stack([k, total - k], axis=1)


@dataclass(frozen=True)
class SectorOperator:
    """稠密矩陣，shape = (range_total + 1, domain_total + 1)"""
    range_total: int
    domain_total: int
    matrix: np.ndarray

    def __post_init__(self):
        expected = (sector_size(self.range_total), sector_size(self.domain_total))
        if self.matrix.shape != expected:
            raise DomainError(f"扇區算子形狀 {self.matrix.shape} 與預期 {expected} 不符")
        self.matrix.setflags(write=False)

    @property
    def shift(self) -> int:
        """粒子觀點下的扇區位移：K⁺ 為 +1、K⁻ 為 -1、生成元為 0"""
        return self.domain_total - self.range_total

    def apply(self, f) -> np.ndarray:
        arr = np.asarray(f, dtype=float)
        if arr.shape != (sector_size(self.domain_total),):
            raise DomainError(f"函數長度 {arr.shape} 與扇區 {self.domain_total} 不符")
        return self.matrix @ arr

    def __matmul__(self, other: "SectorOperator") -> "SectorOperator":
        if self.domain_total != other.range_total:
            raise DomainError(
                f"扇區不相容: ({self.range_total}<-{self.domain_total}) ∘ "
                f"({other.range_total}<-{other.domain_total})"
            )
        return SectorOperator(self.range_total, other.domain_total, self.matrix @ other.matrix)

    def __sub__(self, other: "SectorOperator") -> "SectorOperator":
        if (self.range_total, self.domain_total) != (other.range_total, other.domain_total):
            raise DomainError("扇區不相容，無法相減")
        return SectorOperator(self.range_total, self.domain_total, self.matrix - other.matrix)

    def identity_like(self) -> "SectorOperator":
        if self.range_total != self.domain_total:
            raise DomainError("只有同扇區算子才有單位算子")
        return SectorOperator(self.range_total, self.domain_total, np.eye(sector_size(self.range_total)))
