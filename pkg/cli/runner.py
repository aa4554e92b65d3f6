"""實驗執行器 -- 分派命令、計時、彙整斷言並決定結束碼"""
import logging
import time
from typing import Tuple

from cli.config import ExperimentConfig, config_rows
from cli.experiments import EXPERIMENTS
from cli.records import ResultRecord, write_record
from core.errors import EXIT_ASSERTION_FAILED, EXIT_OK
from core.specialfn import RngStream

logger = logging.getLogger(__name__)


def run(config: ExperimentConfig) -> Tuple[ResultRecord, int]:
    """
    執行 config.command 對應的實驗。

    結束碼 0 當且僅當所有斷言通過；否則為 1，並逐一記錄失敗的斷言名稱。
    """
    experiment = EXPERIMENTS[config.command]
    record = ResultRecord(config.command)
    for key, value in config_rows(config):
        record.add_info(key, value)

    logger.info("開始實驗 %s (s=%g, t=%g, seed=%d)", config.command, config.s, config.t, config.seed)
    started = time.perf_counter()
    experiment(config, record, RngStream(config.seed))
    record.wall_clock = time.perf_counter() - started

    if record.all_passed:
        logger.info("實驗 %s 完成: %d 項斷言全部通過 (%.2f 秒)",
                    config.command, len(record.assertions), record.wall_clock)
        return record, EXIT_OK

    for entry in record.failures:
        logger.error("斷言失敗: %s = %r (容許 %r)", entry.key, entry.value, entry.tolerance)
    return record, EXIT_ASSERTION_FAILED


def run_and_write(config: ExperimentConfig) -> int:
    record, status = run(config)
    write_record(record, config.output, config.format)
    return status
