"""Price panel ingestion and windowed log-return preparation."""

import logging
import re
from bisect import bisect_left
from dataclasses import dataclass
from datetime import date
from functools import cached_property
from pathlib import Path
from typing import IO

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DuplicateRecordError,
    EmptyInputError,
    MalformedRecordError,
    SurvivorError,
    WindowError,
)

logger = logging.getLogger(__name__)

# 入力CSVの必須カラム
REQUIRED_COLUMNS = ("date", "ticker", "close")

# 内部欠損を前方補完してよい最大連続日数
DEFAULT_GAP_LIMIT = 5

# 数値出力の書式（再現性のため17有効桁）
FLOAT_FORMAT = ".17g"
# DataFrame.to_csv 用の同じ書式
CSV_FLOAT_FORMAT = "%" + FLOAT_FORMAT


@dataclass(frozen=True)
class PricePanel:
    """日付×ティッカーの終値行列。欠損はNaNで表す。
    構築後は配列を書き込み不可にして、複数ウィンドウの並列評価で共有できるようにする。"""
    dates: tuple[date, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        dates = tuple(self.dates)
        tickers = tuple(self.tickers)
        prices = np.array(self.prices, dtype=float)

        if prices.shape != (len(dates), len(tickers)):
            raise DataError(
                f"price matrix shape {prices.shape} does not match "
                f"{len(dates)} dates x {len(tickers)} tickers"
            )
        if any(later <= earlier for earlier, later in zip(dates, dates[1:])):
            raise DataError("dates must be strictly increasing")
        if len(set(tickers)) != len(tickers):
            raise DataError("tickers must be unique")
        observed = prices[~np.isnan(prices)]
        if not np.all(np.isfinite(observed)) or np.any(observed <= 0):
            raise DataError("every non-missing price must be positive and finite")

        prices.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "prices", prices)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @cached_property
    def ticker_index(self) -> dict[str, int]:
        return {ticker: i for i, ticker in enumerate(self.tickers)}


@dataclass(frozen=True)
class ReturnPanel:
    """ウィンドウ内の（デトレンド済み）対数リターン。欠損は含まない。"""
    dates: tuple[date, ...]
    tickers: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        returns = np.array(self.returns, dtype=float)
        if returns.shape != (len(self.dates), len(self.tickers)):
            raise DataError(
                f"return matrix shape {returns.shape} does not match labels"
            )
        if np.isnan(returns).any():
            raise DataError("return panel must not contain missing entries")
        returns.setflags(write=False)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "returns", returns)


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float("nan")


def _parser_error_line(error: Exception) -> int:
    """pandasのパースエラーメッセージから行番号を取り出す"""
    match = re.search(r"line (\d+)", str(error))
    return int(match.group(1)) if match else 0


def load_price_panel(source: str | Path | IO[str]) -> PricePanel:
    """date,ticker,close 形式のCSVを読み込み、日付×ティッカーのパネルに組み立てる"""
    if isinstance(source, (str, Path)) and not Path(source).exists():
        raise FileNotFoundError(f"Price file not found: {source}")

    try:
        frame = pd.read_csv(
            source,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError as e:
        raise EmptyInputError() from e
    except pd.errors.ParserError as e:
        raise MalformedRecordError(_parser_error_line(e), str(e)) from e

    missing_columns = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing_columns:
        raise MalformedRecordError(1, f"missing columns: {', '.join(missing_columns)}")
    if frame.empty:
        raise EmptyInputError()

    frame = frame[list(REQUIRED_COLUMNS)].apply(lambda column: column.str.strip())
    parsed_dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    closes = frame["close"].map(_to_float)

    # 先頭から最初の不正行を探す（行番号はヘッダを1行目として数える）
    checks = [
        (parsed_dates.isna().to_numpy(), "invalid date"),
        ((frame["ticker"] == "").to_numpy(), "empty ticker"),
        (~np.isfinite(closes.to_numpy()), "close is not numeric"),
        ((closes <= 0).to_numpy(), "close must be positive"),
    ]
    bad = np.zeros(len(frame), dtype=bool)
    for mask, _ in checks:
        bad |= mask
    if bad.any():
        row = int(np.argmax(bad))
        reason = next(reason for mask, reason in checks if mask[row])
        raise MalformedRecordError(row + 2, reason)

    records = pd.DataFrame({
        "date": parsed_dates.dt.date,
        "ticker": frame["ticker"],
        "close": closes,
    })
    duplicated = records.duplicated(["date", "ticker"]).to_numpy()
    if duplicated.any():
        row = int(np.argmax(duplicated))
        raise DuplicateRecordError(row + 2, frame["date"].iloc[row], frame["ticker"].iloc[row])

    wide = (
        records.pivot(index="date", columns="ticker", values="close")
        .sort_index()
        .sort_index(axis=1)
    )
    logger.info("Loaded %d records: %d dates x %d tickers", len(records), *wide.shape)
    return PricePanel(
        dates=tuple(wide.index),
        tickers=tuple(str(t) for t in wide.columns),
        prices=wide.to_numpy(dtype=float),
    )


def write_price_panel(panel: PricePanel, path: Path | str) -> None:
    """パネルを load_price_panel が読める縦持ちCSVとして書き出す（欠損は行を省略）"""
    rows, cols = np.nonzero(~np.isnan(panel.prices))
    records = pd.DataFrame({
        "date": [panel.dates[i].isoformat() for i in rows],
        "ticker": [panel.tickers[j] for j in cols],
        "close": panel.prices[rows, cols],
    }, columns=list(REQUIRED_COLUMNS))
    records.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def window_bounds(panel: PricePanel, start: date, length: int) -> tuple[int, int]:
    """ウィンドウ [start, start+length) を行インデックスの半開区間に変換する。
    start が取引日でなければ、その日以降の最初の取引日から始める。"""
    if length < 1:
        raise WindowError(f"window length must be positive, got {length}")
    if not panel.dates or start < panel.dates[0]:
        raise WindowError(f"window start {start} is outside the panel's date range")

    first = bisect_left(panel.dates, start)
    stop = first + length
    if stop > panel.n_dates:
        raise WindowError(
            f"window of {length} trading days from {start} runs past "
            f"the last date {panel.dates[-1]}"
        )
    return first, stop


def _longest_run(mask: np.ndarray) -> int:
    """真偽配列中の True の最長連続長"""
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return int((ends - starts).max()) if starts.size else 0


def window_survivors(
    panel: PricePanel,
    start: date,
    length: int,
    gap_limit: int = DEFAULT_GAP_LIMIT,
) -> list[str]:
    """ウィンドウ内で最初と最後の値があり、欠損の連続が gap_limit 日以下のティッカーを返す"""
    if gap_limit < 0:
        raise DataError(f"gap_limit must be non-negative, got {gap_limit}")
    first, stop = window_bounds(panel, start, length)
    missing = np.isnan(panel.prices[first:stop])

    survivors = []
    for j, ticker in enumerate(panel.tickers):
        column = missing[:, j]
        # 上場前・上場廃止後の欠損（先頭・末尾）は除外
        if column[0] or column[-1]:
            continue
        if _longest_run(column) > gap_limit:
            continue
        survivors.append(ticker)
    return survivors


def log_returns_detrended(
    panel: PricePanel,
    tickers: list[str],
    start: date,
    length: int,
    gap_limit: int = DEFAULT_GAP_LIMIT,
    detrend: bool = True,
) -> ReturnPanel:
    """内部欠損を前方補完して対数リターンを計算し、日ごとの横断平均（マーケットモード）を差し引く"""
    if length < 2:
        raise WindowError("fewer than 2 days in window")
    if not tickers:
        raise SurvivorError("no tickers given for the return window")

    first, stop = window_bounds(panel, start, length)
    survivors = set(window_survivors(panel, start, length, gap_limit))
    failing = [t for t in tickers if t not in survivors]
    if failing:
        raise SurvivorError(f"tickers fail the survivor contract: {', '.join(failing)}")

    columns = [panel.ticker_index[t] for t in tickers]
    block = pd.DataFrame(panel.prices[first:stop, columns]).ffill().to_numpy()
    returns = np.diff(np.log(block), axis=0)

    if detrend:
        returns = returns - returns.mean(axis=1, keepdims=True)

    return ReturnPanel(
        dates=panel.dates[first + 1:stop],
        tickers=tuple(tickers),
        returns=returns,
    )
