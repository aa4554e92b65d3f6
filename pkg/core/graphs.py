"""交換核模組 -- 對稱不可約跳躍核 p(i,j)、內建圖與 edge-list 檔案解析

支援的圖規格：
  - two          兩個頂點，p(0,1) = 1
  - path:k       k 個頂點的路徑
  - cycle:k      k 個頂點的環
  - complete:k   k 個頂點的完全圖
  - 其他字串     視為 edge-list 檔案路徑

內建圖的邊權重為 1 / 最大度數，使每列和 <= 1。
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from core.errors import GraphSpecError

logger = logging.getLogger(__name__)

_ROW_SUM_SLACK = 1e-12

Edge = Tuple[int, int, float]


@dataclass(frozen=True)
class ExchangeKernel:
    """對稱跳躍核；每個無序邊只存一次 (i < j)"""
    num_vertices: int
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        if self.num_vertices < 1:
            raise GraphSpecError(f"頂點數必須為正: {self.num_vertices}")
        seen = set()
        for i, j, w in self.edges:
            if not (0 <= i < j < self.num_vertices):
                raise GraphSpecError(f"邊 ({i}, {j}) 不合法：需要 0 <= i < j < {self.num_vertices}")
            if (i, j) in seen:
                raise GraphSpecError(f"邊 ({i}, {j}) 重複")
            if not w >= 0:
                raise GraphSpecError(f"邊 ({i}, {j}) 權重為負: {w}")
            seen.add((i, j))

        row_sums = self.rate_matrix().sum(axis=1)
        if np.any(row_sums > 1.0 + _ROW_SUM_SLACK):
            raise GraphSpecError(f"跳躍核列和超過 1: {row_sums.max():.6g}")

        if self.num_vertices > 1:
            n_comp, _ = connected_components(
                csr_matrix(self.rate_matrix() > 0), directed=False,
            )
            if n_comp != 1:
                raise GraphSpecError(f"跳躍核不可約性失敗：圖有 {n_comp} 個連通分量")

    @property
    def total_rate(self) -> float:
        """所有邊時鐘速率之和 Λ"""
        return float(sum(w for _, _, w in self.edges))

    def rate_matrix(self) -> np.ndarray:
        """對稱矩陣 p(i,j)，對角為 0"""
        p = np.zeros((self.num_vertices, self.num_vertices))
        for i, j, w in self.edges:
            p[i, j] = w
            p[j, i] = w
        return p

    def generator_matrix(self) -> np.ndarray:
        """單粒子隨機漫步生成元 Q：非對角 p(i,j)，對角 -Σ_j p(i,j)"""
        q = self.rate_matrix()
        np.fill_diagonal(q, -q.sum(axis=1))
        return q

    def edge_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(i 陣列, j 陣列, 邊選取機率)，供事件取樣使用"""
        live = [(i, j, w) for i, j, w in self.edges if w > 0]
        i_arr = np.array([e[0] for e in live], dtype=np.int64)
        j_arr = np.array([e[1] for e in live], dtype=np.int64)
        w_arr = np.array([e[2] for e in live], dtype=float)
        if not live:
            return i_arr, j_arr, w_arr
        return i_arr, j_arr, w_arr / w_arr.sum()


def _uniform_kernel(num_vertices: int, pairs: List[Tuple[int, int]]) -> ExchangeKernel:
    degree = np.zeros(num_vertices, dtype=int)
    for i, j in pairs:
        degree[i] += 1
        degree[j] += 1
    weight = 1.0 / max(1, int(degree.max()))
    return ExchangeKernel(num_vertices, tuple((min(i, j), max(i, j), weight) for i, j in pairs))


def two_vertex_kernel(rate: float = 1.0) -> ExchangeKernel:
    return ExchangeKernel(2, ((0, 1, rate),))


def path_kernel(k: int) -> ExchangeKernel:
    if k < 2:
        raise GraphSpecError(f"path 至少需要 2 個頂點: {k}")
    return _uniform_kernel(k, [(i, i + 1) for i in range(k - 1)])


def cycle_kernel(k: int) -> ExchangeKernel:
    if k < 3:
        raise GraphSpecError(f"cycle 至少需要 3 個頂點: {k}")
    return _uniform_kernel(k, [(i, (i + 1) % k) for i in range(k)])


def complete_kernel(k: int) -> ExchangeKernel:
    if k < 2:
        raise GraphSpecError(f"complete 至少需要 2 個頂點: {k}")
    return _uniform_kernel(k, [(i, j) for i in range(k) for j in range(i + 1, k)])


_BUILTIN_PATTERN = re.compile(r'^(path|cycle|complete)\s*:\s*(\d+)$', re.IGNORECASE)

_BUILDERS = {
    "path": path_kernel,
    "cycle": cycle_kernel,
    "complete": complete_kernel,
}


def parse_graph_spec(spec: str) -> ExchangeKernel:
    """統一入口：內建圖規格或 edge-list 檔案路徑"""
    stripped = spec.strip()
    if stripped.lower() == "two":
        return two_vertex_kernel()

    m = _BUILTIN_PATTERN.match(stripped)
    if m:
        return _BUILDERS[m.group(1).lower()](int(m.group(2)))

    path = Path(stripped)
    if not path.is_file():
        raise GraphSpecError(f"無法辨識的圖規格（也不是檔案）: {spec}")
    return read_edge_list(str(path))


def parse_edge_list(text: str) -> ExchangeKernel:
    """
    解析 edge-list 文字：每行一組 `i j weight`，頂點從 0 起算，`#` 之後為註解。

    同一無序邊可出現多次（例如 i j 與 j i），但權重必須一致。
    """
    if text.startswith("\ufeff"):
        text = text[1:]

    weights: Dict[Tuple[int, int], float] = {}
    max_vertex = -1

    for line_no, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        parts = content.split()
        if len(parts) != 3:
            raise GraphSpecError(f"第 {line_no} 行格式錯誤（需要 `i j weight`）: {line!r}")
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as e:
            raise GraphSpecError(f"第 {line_no} 行無法解析: {line!r}") from e
        if i < 0 or j < 0 or i == j:
            raise GraphSpecError(f"第 {line_no} 行頂點不合法: {line!r}")

        key = (min(i, j), max(i, j))
        if key in weights and weights[key] != w:
            raise GraphSpecError(
                f"第 {line_no} 行：邊 {key} 的權重 {w} 與先前的 {weights[key]} 不一致"
            )
        weights[key] = w
        max_vertex = max(max_vertex, i, j)

    if max_vertex < 0:
        raise GraphSpecError("edge-list 中沒有任何邊")

    edges = tuple((i, j, w) for (i, j), w in sorted(weights.items()))
    logger.info("edge-list 載入完成: %d 個頂點, %d 條邊", max_vertex + 1, len(edges))
    return ExchangeKernel(max_vertex + 1, edges)


def read_edge_list(filepath: str, encoding: str = "utf-8") -> ExchangeKernel:
    """從檔案載入 edge-list"""
    path = Path(filepath)
    try:
        text = path.read_text(encoding=encoding)
    except UnicodeDecodeError:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as e:
        raise GraphSpecError(f"無法讀取 edge-list 檔案: {filepath}") from e
    return parse_edge_list(text)
