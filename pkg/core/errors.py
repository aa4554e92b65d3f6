"""錯誤類別與 CLI 結束碼"""

EXIT_OK = 0
EXIT_ASSERTION_FAILED = 1
EXIT_USAGE = 2
EXIT_PARAM_DOMAIN = 3
EXIT_THETA_DOMAIN = 4
EXIT_GRAPH_SPEC = 5
EXIT_RUNTIME = 6


class DomainError(ValueError):
    """數值參數超出定義域（例如 s <= 0、k > n、θ 不在 (0,1)）"""

    exit_code = EXIT_PARAM_DOMAIN


class ThetaDomainError(DomainError):
    """θ 不在 (0,1)"""

    exit_code = EXIT_THETA_DOMAIN


class GraphSpecError(DomainError):
    """圖規格或 edge-list 檔案格式錯誤，或圖不連通"""

    exit_code = EXIT_GRAPH_SPEC


class ConfigError(ValueError):
    """設定解析失敗，附帶結束碼"""

    def __init__(self, message: str, exit_code: int = EXIT_USAGE):
        super().__init__(message)
        self.exit_code = exit_code
