"""結果紀錄與 CSV / JSON 輸出

每一列 (experiment, key, value, tolerance, pass)：
  - 斷言列：tolerance 與 pass 皆有值，pass 只由 value 與 tolerance 推得
  - 資訊列：tolerance 與 pass 留空
  - 最後一列固定為 wall_clock_seconds（資訊列），重現性比對時忽略這一列
"""
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import OUTPUT_DIR

logger = logging.getLogger(__name__)

COLUMNS = ("experiment", "key", "value", "tolerance", "pass")
WALL_CLOCK_KEY = "wall_clock_seconds"


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return " ".join(format_value(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class RecordEntry:
    experiment: str
    key: str
    value: Any
    tolerance: Optional[float] = None
    passed: Optional[bool] = None
    comparison: str = "le"

    @property
    def is_assertion(self) -> bool:
        return self.passed is not None

    def as_row(self) -> Dict[str, str]:
        return {
            "experiment": self.experiment,
            "key": self.key,
            "value": format_value(self.value),
            "tolerance": format_value(self.tolerance),
            "pass": format_value(self.passed),
        }


@dataclass
class ResultRecord:
    """一個實驗的所有輸出列"""
    experiment: str
    entries: List[RecordEntry] = field(default_factory=list)
    wall_clock: float = 0.0

    def add_info(self, key: str, value: Any) -> None:
        self.entries.append(RecordEntry(self.experiment, key, value))

    def add_check(self, key: str, value: float, tolerance: float, comparison: str = "le") -> bool:
        """
        comparison = "le"：value <= tolerance 視為通過
        comparison = "ge"：value >= tolerance 視為通過
        NaN 一律不通過。
        """
        value = float(value)
        if comparison == "le":
            passed = value <= tolerance
        elif comparison == "ge":
            passed = value >= tolerance
        else:
            raise ValueError(f"未知的比較方式: {comparison}")
        passed = bool(passed and not math.isnan(value))
        self.entries.append(RecordEntry(self.experiment, key, value, tolerance, passed, comparison))
        if not passed:
            logger.warning("斷言失敗 %s/%s: %r (容許 %s %r)", self.experiment, key, value, comparison, tolerance)
        return passed

    @property
    def assertions(self) -> List[RecordEntry]:
        return [e for e in self.entries if e.is_assertion]

    @property
    def failures(self) -> List[RecordEntry]:
        return [e for e in self.assertions if not e.passed]

    @property
    def all_passed(self) -> bool:
        return not self.failures

    def rows(self) -> List[Dict[str, str]]:
        rows = [e.as_row() for e in self.entries]
        rows.append(RecordEntry(self.experiment, WALL_CLOCK_KEY, round(self.wall_clock, 6)).as_row())
        return rows


# ── 序列化 ──

def render_csv(record: ResultRecord) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(record.rows())
    return buffer.getvalue()


def render_json(record: ResultRecord) -> str:
    return json.dumps(record.rows(), ensure_ascii=False, indent=2) + "\n"


_RENDERERS = {"csv": render_csv, "json": render_json}


def default_output_path(command: str, fmt: str) -> Path:
    return OUTPUT_DIR / f"{command}.{fmt}"


def write_record(record: ResultRecord, output: Optional[str], fmt: str) -> Optional[Path]:
    """寫出紀錄；output 為 `-` 時寫到標準輸出並回傳 None"""
    if fmt not in _RENDERERS:
        raise ValueError(f"未知的輸出格式: {fmt}")
    text = _RENDERERS[fmt](record)

    if output == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return None

    path = Path(output) if output else default_output_path(record.experiment, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("結果已寫入: %s", path)
    return path
