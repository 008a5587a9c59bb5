"""Exception hierarchy for souteni."""


class SouteniError(Exception):
    """パッケージ内で送出する例外の基底クラス"""


class DataError(SouteniError, ValueError):
    """入力データやパラメータに起因するエラー（CLIでは終了コード2）"""


class EmptyInputError(DataError):
    """価格レコードが1件もない"""

    def __init__(self, message: str = "no records"):
        super().__init__(message)


class MalformedRecordError(DataError):
    """解析できない行（行番号つき）"""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"malformed record at line {line}: {reason}")


class DuplicateRecordError(DataError):
    """同じ (date, ticker) の組が複数回現れた"""

    def __init__(self, line: int, date: str, ticker: str):
        self.line = line
        self.date = date
        self.ticker = ticker
        super().__init__(f"duplicate record at line {line}: ({date}, {ticker})")


class WindowError(DataError):
    """ウィンドウがパネルの日付範囲外、または日数が足りない"""


class SurvivorError(DataError):
    """ティッカーがウィンドウ内の生存条件を満たさない"""


class ZeroVarianceError(DataError):
    """分散ゼロ（定数系列）の列があり相関が定義できない"""

    def __init__(self, ticker: str):
        self.ticker = ticker
        super().__init__(f"zero-variance series: {ticker}")


class DegenerateFitError(DataError):
    """べき乗則フィットに使える点が2点未満"""


class TreeError(DataError):
    """木構造が不正、または頂点が木に含まれない"""


class NearDuplicateError(DataError):
    """辺の重みが epsilon_d 未満（ほぼ同一の資産）"""

    def __init__(self, ticker_i: str, ticker_j: str, weight: float):
        self.pair = (ticker_i, ticker_j)
        self.weight = weight
        super().__init__(
            f"edge {ticker_i}-{ticker_j} has weight {weight!r} below epsilon_d; "
            "deduplicate the assets"
        )


class PanelTooShortError(DataError):
    """パネルの日数がウィンドウ幅より短い"""


class UnknownMetricError(DataError):
    """absolute_minimum に未知の指標名が渡された"""


class MissingStaticCenterError(DataError):
    """mol_static が計算されていない（static_center 未設定）"""


class NotClassifiedError(DataError):
    """相ラベルの付いていないウィンドウがある"""
