"""實驗設定 -- argparse 子命令、JSON 設定檔覆寫與驗證"""
import argparse
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from config import (
    DEFAULT_FORMAT,
    DEFAULT_GRAPH,
    DEFAULT_REPLICAS,
    DEFAULT_S,
    DEFAULT_SEED,
    DEFAULT_T,
    DEFAULT_THETA,
    DEFAULT_TIME,
)
from core.dual import check_theta
from core.errors import ConfigError, DomainError
from core.graphs import ExchangeKernel, parse_graph_spec
from core.specialfn import ModelParams

logger = logging.getLogger(__name__)

COMMANDS = (
    "simulate",
    "simulate-dual",
    "verify-duality",
    "verify-self-duality",
    "stationary",
    "detailed-balance",
    "ergodic",
    "scaling-limit",
    "su11",
    "wealth-spread",
    "invariance",
    "gauss-sum",
    "discrete-transform",
)

FORMATS = ("csv", "json")

_COMMAND_HELP = {
    "simulate": "連續財富交換的單一路徑模擬",
    "simulate-dual": "對偶粒子過程的單一路徑模擬（兩頂點時附帶分佈檢定）",
    "verify-duality": "生成元對偶、求和恆等式與路徑對偶",
    "verify-self-duality": "離散自對偶（扇區均勻化）",
    "stationary": "對偶扇區的不變測度、零空間比對與速率正規化",
    "detailed-balance": "離散 Gamma 乘積測度的細緻平衡",
    "ergodic": "兩人長時間分配比例對照 Beta(s+t, s+t)",
    "scaling-limit": "對偶一步更新的尺度極限",
    "su11": "SU(1,1) 交換子、代數關係、伴隨、交織與自對偶再生",
    "wealth-spread": "期望財富以隨機漫步擴散",
    "invariance": "Gamma 乘積測度的不變性",
    "gauss-sum": "終止型 Gauss 求和恆等式",
    "discrete-transform": "離散 Gamma 變換與多項式連續極限",
}


def _float_tuple(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"無法解析實數列表: {text!r}") from e


def _int_tuple(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"無法解析整數列表: {text!r}") from e


@dataclass(frozen=True)
class ExperimentConfig:
    """
    一次實驗的完整設定；相同設定與 seed 重跑結果逐位元相同。

    x, y, total, n_max 為 None 時由各命令決定預設值。
    """
    command: str
    s: float = DEFAULT_S
    t: float = DEFAULT_T
    theta: float = DEFAULT_THETA
    graph: str = DEFAULT_GRAPH
    time: float = DEFAULT_TIME
    replicas: int = DEFAULT_REPLICAS
    seed: int = DEFAULT_SEED
    output: Optional[str] = None
    format: str = DEFAULT_FORMAT
    threads: Optional[int] = None
    verbose: bool = False
    n: int = 2
    m: int = 1
    x: Optional[float] = None
    y: Optional[float] = None
    total: Optional[int] = None
    n_max: Optional[int] = None
    scale: int = 10_000
    init: Optional[Tuple[float, ...]] = None
    xi: Optional[Tuple[int, ...]] = None
    record_path: bool = False

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.s, self.t)

    @property
    def kernel(self) -> ExchangeKernel:
        return parse_graph_spec(self.graph)

    def validate(self) -> "ExperimentConfig":
        """依序檢查：命令、參數定義域、θ、圖規格、其他數值"""
        if self.command not in COMMANDS:
            raise ConfigError(f"未知的命令: {self.command}")
        if self.format not in FORMATS:
            raise ConfigError(f"未知的輸出格式: {self.format}（可用: {', '.join(FORMATS)}）")
        _ = self.params
        check_theta(self.theta)
        _ = self.kernel
        if self.time < 0:
            raise DomainError(f"--time 必須非負: {self.time}")
        if self.replicas < 0:
            raise DomainError(f"--replicas 必須非負: {self.replicas}")
        if self.seed < 0:
            raise DomainError(f"--seed 必須非負: {self.seed}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"--threads 至少為 1: {self.threads}")
        for name in ("n", "m", "total", "n_max"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise DomainError(f"--{name} 必須非負: {value}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("init", "xi"):
            if data[key] is not None:
                data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"設定檔含未知欄位: {', '.join(unknown)}")
        if "command" not in data:
            raise ConfigError("設定檔缺少 command")
        values = dict(data)
        if values.get("init") is not None:
            values["init"] = tuple(float(v) for v in values["init"])
        if values.get("xi") is not None:
            values["xi"] = tuple(int(v) for v in values["xi"])
        return cls(**values)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("模型與執行")
    group.add_argument("--s", type=float, default=DEFAULT_S, help="Beta 形狀參數 s (> 0)")
    group.add_argument("--t", type=float, default=DEFAULT_T, help="Beta 形狀參數 t (> 0)")
    group.add_argument("--theta", type=float, default=DEFAULT_THETA, help="Gamma 尺度 / 離散 Gamma 參數 θ ∈ (0,1)")
    group.add_argument("--graph", default=DEFAULT_GRAPH, help="two | path:k | cycle:k | complete:k | edge-list 檔案")
    group.add_argument("--time", type=float, default=DEFAULT_TIME, help="時間長度")
    group.add_argument("--replicas", type=int, default=DEFAULT_REPLICAS, help="Monte Carlo replica 數")
    group.add_argument("--seed", type=int, default=DEFAULT_SEED, help="亂數種子")
    group.add_argument("--threads", type=int, default=None, help="worker 數（預設為 CPU 數）")
    group.add_argument("--config", dest="config_file", default=None, help="JSON 設定檔，欄位覆寫命令列旗標")
    group.add_argument("--verbose", action="store_true", help="DEBUG 等級日誌")

    out = parser.add_argument_group("輸出")
    out.add_argument("-o", "--output", default=None, help="輸出檔案路徑，`-` 代表標準輸出")
    out.add_argument("--format", choices=FORMATS, default=DEFAULT_FORMAT)

    extra = parser.add_argument_group("實驗參數")
    extra.add_argument("--n", type=int, default=2, help="第一頂點的對偶粒子數")
    extra.add_argument("--m", type=int, default=1, help="第二頂點的對偶粒子數")
    extra.add_argument("--x", type=float, default=None, help="第一頂點財富")
    extra.add_argument("--y", type=float, default=None, help="第二頂點財富")
    extra.add_argument("--N", dest="total", type=int, default=None, help="扇區總粒子數")
    extra.add_argument("--N-max", dest="n_max", type=int, default=None, help="截斷或掃描上限")
    extra.add_argument("--K", dest="scale", type=int, default=10_000, help="尺度極限的 K")
    extra.add_argument("--init", type=_float_tuple, default=None, help="初始財富向量，例如 '1,2,3'")
    extra.add_argument("--xi", type=_int_tuple, default=None, help="初始粒子組態，例如 '2,1'")
    extra.add_argument("--record-path", action="store_true", help="simulate 時輸出整條路徑")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exchangedual",
        description="廣義即時交換模型與 Beta-binomial 對偶過程的數值驗證",
        allow_abbrev=False,
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=_COMMAND_HELP[command], allow_abbrev=False)
        _add_common_flags(sub)
    return parser


def _load_config_file(path: str) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8-sig"))
    except OSError as e:
        raise ConfigError(f"無法讀取設定檔: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"設定檔不是合法 JSON: {path} ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"設定檔頂層必須是物件: {path}")
    return data


def parse_config(argv: Optional[Sequence[str]] = None) -> ExperimentConfig:
    """
    argv -> 驗證後的 ExperimentConfig。

    用法錯誤由 argparse 直接以結束碼 2 離開；定義域錯誤以 DomainError 子類別拋出。
    """
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    values = {k: v for k, v in vars(args).items() if k != "config_file"}

    if args.config_file:
        overrides = _load_config_file(args.config_file)
        logger.info("套用設定檔 %s: %s", args.config_file, ", ".join(sorted(overrides)))
        values.update(overrides)

    config = ExperimentConfig.from_dict(values)
    return config.validate()


def with_defaults(config: ExperimentConfig, **defaults: Any) -> ExperimentConfig:
    """把為 None 的欄位補上命令專屬的預設值"""
    missing: Dict[str, Any] = {k: v for k, v in defaults.items() if getattr(config, k) is None}
    return replace(config, **missing) if missing else config


def config_rows(config: ExperimentConfig) -> List[Tuple[str, Any]]:
    """設定回顯，依欄位順序"""
    return [(f"config.{k}", v) for k, v in config.to_dict().items()]
