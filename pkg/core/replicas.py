"""Monte Carlo replica 工作池

策略：
  1. 把 replica 總數切成固定大小的 chunk（與執行緒數無關）
  2. 第 c 個 chunk 使用 rng.derive(c) 作為自己的亂數流
  3. 用 ThreadPoolExecutor 並行執行，結果依 chunk 索引存放
  4. 依 chunk 順序歸併，確保任何執行緒數下結果逐位元相同
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, TypeVar

import numpy as np

from config import DEFAULT_THREADS, REPLICA_CHUNK_SIZE
from core.errors import DomainError
from core.specialfn import RngStream

logger = logging.getLogger(__name__)

T = TypeVar("T")


def chunk_sizes(replicas: int, chunk_size: int = REPLICA_CHUNK_SIZE) -> List[int]:
    """把 replicas 切成 [chunk_size, chunk_size, ..., 餘數]"""
    if replicas < 0:
        raise DomainError(f"replica 數必須非負: {replicas}")
    full, rest = divmod(replicas, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_replicas(
    task: Callable[[int, RngStream], T],
    replicas: int,
    rng: RngStream,
    threads: Optional[int] = None,
    chunk_size: int = REPLICA_CHUNK_SIZE,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> List[T]:
    """
    以 chunk 為單位執行 task(count, stream)，回傳依 chunk 順序排列的結果。

    progress_callback(completed_chunks, total_chunks) 可用於進度回報。
    """
    sizes = chunk_sizes(replicas, chunk_size)
    streams = [rng.derive(c) for c in range(len(sizes))]
    results: List[Optional[T]] = [None] * len(sizes)

    workers = max(1, threads or DEFAULT_THREADS)
    workers = min(workers, max(1, len(sizes)))

    if workers <= 1:
        for idx, (count, stream) in enumerate(zip(sizes, streams)):
            results[idx] = task(count, stream)
            if progress_callback:
                progress_callback(idx + 1, len(sizes))
    else:
        logger.debug("啟用並行 replica: %d 個 workers, %d 個 chunks", workers, len(sizes))
        completed = 0
        with ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_idx = {
                executor.submit(task, count, stream): idx
                for idx, (count, stream) in enumerate(zip(sizes, streams))
            }
            for future in as_completed(future_to_idx):
                results[future_to_idx[future]] = future.result()
                completed += 1
                if progress_callback:
                    progress_callback(completed, len(sizes))

    logger.info("replica 完成: %d 個 (%d chunks)", replicas, len(sizes))
    return results  # type: ignore[return-value]


def concat_chunks(chunks: List[np.ndarray]) -> np.ndarray:
    """依 chunk 順序串接每個 chunk 的樣本陣列"""
    if not chunks:
        return np.array([])
    return np.concatenate(chunks, axis=0)


def mean_and_stderr(samples: np.ndarray):
    """樣本平均與標準誤（沿第 0 軸）"""
    arr = np.asarray(samples, dtype=float)
    if arr.shape[0] < 2:
        raise DomainError(f"標準誤至少需要 2 個樣本: {arr.shape[0]}")
    mean = arr.mean(axis=0)
    stderr = arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])
    return mean, stderr


def standard_score(mean: float, exact: float, stderr: float, abs_tol: float = 1e-12) -> float:
    """|mean - exact| / stderr；零變異樣本時相等記 0，否則記 inf"""
    gap = abs(float(mean) - float(exact))
    if stderr > 0:
        return gap / float(stderr)
    return 0.0 if gap <= abs_tol * max(1.0, abs(float(exact))) else math.inf
