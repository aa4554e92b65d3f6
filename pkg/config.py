"""全域設定常數"""
import os
from pathlib import Path

APP_DIR = Path(__file__).parent

# 輸出路徑（唯一的環境變數：覆寫預設輸出目錄）
OUTPUT_DIR_ENV = "EXCHANGEDUAL_OUTPUT_DIR"
OUTPUT_DIR = Path(os.environ.get(OUTPUT_DIR_ENV, str(APP_DIR / "output")))

# 模型預設值（s = t = 1 即原始 Immediate Exchange 模型）
DEFAULT_S = 1.0
DEFAULT_T = 1.0
DEFAULT_THETA = 0.5
DEFAULT_TIME = 1.0
DEFAULT_REPLICAS = 100_000
DEFAULT_SEED = 20240101
DEFAULT_FORMAT = "csv"
DEFAULT_GRAPH = "two"

# 並行設定
DEFAULT_THREADS = os.cpu_count() or 1
REPLICA_CHUNK_SIZE = 10_000  # 每個 chunk 擁有獨立的 RngStream，與執行緒數無關

# 數值截斷
UNIFORMIZATION_TAIL = 1e-14      # Poisson 尾端機率上限
DISCRETE_GAMMA_TAIL = 1e-12      # 離散 Gamma 測度截斷尾端上限
ERGODIC_HOLDING_TIMES = 50.0     # 「長時間」= 50 個平均停留時間

# 驗證容許誤差
RATE_SUM_TOL = 1e-12
PMF_SUM_TOL = 1e-12
GENERATOR_DUALITY_TOL = 1e-10
SELF_DUALITY_TOL = 1e-10
STATIONARY_TV_TOL = 1e-10
DETAILED_BALANCE_TOL = 1e-12
SUM_IDENTITY_TOL = 1e-11
COMMUTATION_TOL = 1e-11
SU11_RELATION_TOL = 1e-12
ADJOINT_TOL = 1e-13
INTERTWINING_TOL = 1e-12
REGENERATION_TOL = 1e-9
CHEAP_DUALITY_TOL = 1e-10
GAUSS_SUM_TOL = 1e-11
DISCRETE_TRANSFORM_TOL = 1e-10
SCALING_MEAN_GAP_TOL = 5e-3
SCALING_REDUCTION_FACTOR = 5.0

# Monte Carlo 接受帶（標準誤倍數）
MC_SIGMA_BAND = 3.0
MC_MULTI_SIGMA_BAND = 4.0

# 預設參數網格（驗證用）
PARAM_GRID = ((1.0, 1.0), (2.0, 3.0), (0.5, 0.5), (2.5, 0.7))

# 驗證網格與截斷
DUALITY_WEALTH_GRID = (0.75, 1.5, 2.25, 3.0)   # 生成元對偶的 4×4 (x, y) 網格
DUALITY_MAX_TOTAL = 8                          # n + m 的上限
RATE_SUM_MAX = 25                              # 速率正規化掃描 n, m <= 25
STATIONARY_LONG_TIME = 200.0                   # 「t → ∞」的代理時間
SECTOR_STATIONARITY_TOL = 1e-11
HARMONICITY_TOL = 1e-12
SU11_TRUNCATION = 20
ADJOINT_TRUNCATION = 30
CHEAP_DUALITY_SECTOR = 6
REGENERATION_MAX_TOTAL = 8
SCALING_SAMPLES = 1_000_000
SCALING_REFERENCE_K = (100, 1000)
