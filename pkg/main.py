"""廣義即時交換模型與對偶過程 -- 命令列進入點"""
import logging
import sys
import traceback
from typing import Optional, Sequence

from core.errors import EXIT_RUNTIME, ConfigError, DomainError


def setup_logging(verbose: bool = False) -> None:
    # stdout 保留給 `-o -` 的結果輸出
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    setup_logging("--verbose" in args)
    logger = logging.getLogger(__name__)

    from cli.config import parse_config
    from cli.runner import run_and_write

    try:
        config = parse_config(args)
        return run_and_write(config)
    except (DomainError, ConfigError) as e:
        logger.error("%s", e)
        return e.exit_code
    except Exception as e:
        logger.error("執行失敗: %s", e)
        logger.error("詳細錯誤:\n%s", traceback.format_exc())
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
