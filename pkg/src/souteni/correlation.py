"""Windowed Pearson correlation matrices and the metric distance transform."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, ZeroVarianceError
from .ingest import CSV_FLOAT_FORMAT, ReturnPanel

logger = logging.getLogger(__name__)

# これ未満の標本標準偏差は定数系列とみなす
ZERO_VARIANCE_TOL = 1e-14


@dataclass(frozen=True)
class CorrelationMatrix:
    """対称・対角1・[-1, 1] にクランプ済みの相関行列"""
    tickers: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        n = len(self.tickers)
        if values.shape != (n, n):
            raise DataError(f"correlation matrix shape {values.shape} does not match {n} tickers")
        values.setflags(write=False)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class DistanceMatrix:
    """d(i,j) = sqrt(2(1 - C(i,j))) の距離行列。値は [0, 2]、対角0。"""
    tickers: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        n = len(self.tickers)
        if values.shape != (n, n):
            raise DataError(f"distance matrix shape {values.shape} does not match {n} tickers")
        if not np.array_equal(values, values.T):
            raise DataError("distance matrix must be symmetric")
        values.setflags(write=False)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "values", values)


def pearson_matrix(returns: ReturnPanel) -> CorrelationMatrix:
    """標本ピアソン相関係数の行列を計算する"""
    data = returns.returns
    n_rows = data.shape[0]
    if n_rows < 2:
        raise DataError(f"need at least 2 return rows for correlation, got {n_rows}")

    centered = data - data.mean(axis=0)
    # 標本分散（n-1 正規化）。相関の比では正規化は打ち消し合う
    std = np.sqrt((centered ** 2).sum(axis=0) / (n_rows - 1))
    flat = np.flatnonzero(std < ZERO_VARIANCE_TOL)
    if flat.size:
        raise ZeroVarianceError(returns.tickers[flat[0]])

    z = centered / std
    c = (z.T @ z) / (n_rows - 1)
    # 対称性を構成的に保証し、丸め誤差による範囲外の値をクランプする
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(tickers=returns.tickers, values=c)


def to_distance(correlation: CorrelationMatrix) -> DistanceMatrix:
    """相関係数を距離 d = sqrt(2(1 - C)) に変換する"""
    d = np.sqrt(np.maximum(2.0 * (1.0 - correlation.values), 0.0))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(tickers=correlation.tickers, values=d)


def write_matrix(matrix: CorrelationMatrix | DistanceMatrix, path: Path | str) -> None:
    """ティッカーを行・列見出しにした正方行列をCSVに書き出す（デバッグ・照合用）"""
    frame = pd.DataFrame(matrix.values, index=list(matrix.tickers), columns=list(matrix.tickers))
    frame.to_csv(path, float_format=CSV_FLOAT_FORMAT, index_label="ticker", lineterminator="\n")
    logger.info("Matrix written: %s", path)
