"""Synthetic factor markets, superhub injections and preferential-attachment benchmark trees."""

import json
import logging
import math
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DataError, WindowError
from .ingest import PricePanel
from .mst import Tree

logger = logging.getLogger(__name__)

# 合成パネルの最初の取引日
DEFAULT_START_DATE = date(2005, 1, 3)

# 既定のボラティリティ（日次リターン単位）
DEFAULT_SIGMA_IDIO = 0.02
DEFAULT_SIGMA_MARKET = 0.01


def _rng(seed: int) -> np.random.Generator:
    """全プラットフォームで同じ乱数列を出す固定アルゴリズム（PCG64）の生成器"""
    return np.random.Generator(np.random.PCG64(seed))


def _labels(prefix: str, n: int, width: int) -> tuple[str, ...]:
    # ゼロ埋めして辞書順とインデックス順を一致させる
    width = max(width, len(str(n - 1)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


class FactorMarketSpec(BaseModel):
    """1ファクター市場 r_i(t) = beta_i m(t) + eps_i(t) の設定"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_assets: int = Field(ge=3)
    n_days: int = Field(ge=2)
    betas: tuple[float, ...] | None = None  # None なら全資産 1.0
    sigma_idio: float = Field(default=DEFAULT_SIGMA_IDIO, gt=0.0)
    sigma_market: float = Field(default=DEFAULT_SIGMA_MARKET, gt=0.0)
    seed: int = Field(default=0, ge=0)
    start_date: date = DEFAULT_START_DATE

    @model_validator(mode="after")
    def _check_betas(self) -> "FactorMarketSpec":
        if self.betas is not None and len(self.betas) != self.n_assets:
            raise ValueError(f"expected {self.n_assets} betas, got {len(self.betas)}")
        return self

    def beta_vector(self) -> np.ndarray:
        if self.betas is None:
            return np.ones(self.n_assets)
        return np.array(self.betas, dtype=float)


class SuperhubInjection(BaseModel):
    """[start_day, end_day] の間、breadth 個の資産のリターンを target に寄せる"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    target: int = Field(ge=0)
    start_day: int = Field(ge=0)
    end_day: int = Field(ge=1)
    rho: float = Field(ge=0.0, lt=1.0)
    breadth: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_window(self) -> "SuperhubInjection":
        if self.start_day >= self.end_day:
            raise ValueError("start_day must precede end_day")
        return self


class Scenario(BaseModel):
    """synth サブコマンドのシナリオファイル（市場設定＋注入のリスト）"""
    model_config = ConfigDict(extra="forbid")

    market: FactorMarketSpec
    injections: list[SuperhubInjection] = []


def gen_factor_market(spec: FactorMarketSpec) -> PricePanel:
    """ガウス型1ファクター市場の価格パネルを生成する（初日の価格は1.0）"""
    rng = _rng(spec.seed)
    n_returns = spec.n_days - 1
    market = rng.normal(0.0, spec.sigma_market, size=n_returns)
    idio = rng.normal(0.0, spec.sigma_idio, size=(n_returns, spec.n_assets))
    returns = market[:, None] * spec.beta_vector()[None, :] + idio

    log_prices = np.vstack([np.zeros(spec.n_assets), np.cumsum(returns, axis=0)])
    dates = tuple(d.date() for d in pd.bdate_range(spec.start_date, periods=spec.n_days))

    logger.info(
        "Generated factor market: %d assets x %d days (seed=%d)",
        spec.n_assets, spec.n_days, spec.seed,
    )
    return PricePanel(dates=dates, tickers=_labels("S", spec.n_assets, 3), prices=np.exp(log_prices))


def inject_superhub(panel: PricePanel, inj: SuperhubInjection) -> PricePanel:
    """注入区間内の日 t（t-1 から t へのリターン）について
    r_j <- sqrt(1 - rho^2) r_j + rho r_target を target 以外の先頭 breadth 資産に適用する。
    start_day より前の価格はビット単位で変えず、以降の価格は混合後のリターンから組み直す。"""
    n_days, n_assets = panel.prices.shape
    if inj.end_day >= n_days:
        raise WindowError(f"injection end_day {inj.end_day} is outside a {n_days}-day panel")
    if inj.target >= n_assets:
        raise DataError(f"injection target {inj.target} is outside {n_assets} assets")
    if inj.breadth > n_assets - 1:
        raise DataError(f"breadth {inj.breadth} exceeds n_assets - 1 = {n_assets - 1}")
    if inj.rho == 0.0 or inj.breadth == 0:
        return panel
    if np.isnan(panel.prices).any():
        raise DataError("superhub injection needs a panel without missing prices")

    others = [j for j in range(n_assets) if j != inj.target][:inj.breadth]
    first = max(inj.start_day, 1)

    log_prices = np.log(panel.prices)
    returns = np.diff(log_prices[:, others], axis=0)
    target_returns = np.diff(log_prices[:, inj.target])
    rows = slice(first - 1, inj.end_day)
    returns[rows] = (
        math.sqrt(1.0 - inj.rho ** 2) * returns[rows] + inj.rho * target_returns[rows, None]
    )

    prices = panel.prices.copy()
    rebuilt = log_prices[first - 1, others] + np.cumsum(returns[first - 1:], axis=0)
    prices[first:, others] = np.exp(rebuilt)

    logger.info(
        "Injected superhub at %s: days [%d, %d], rho=%g, breadth=%d",
        panel.tickers[inj.target], inj.start_day, inj.end_day, inj.rho, inj.breadth,
    )
    return PricePanel(dates=panel.dates, tickers=panel.tickers, prices=prices)


def build_scenario_panel(scenario: Scenario) -> PricePanel:
    """市場を生成し、注入を順番に適用する"""
    panel = gen_factor_market(scenario.market)
    for injection in scenario.injections:
        panel = inject_superhub(panel, injection)
    return panel


def load_scenario(path: Path | str) -> Scenario:
    """JSONのシナリオファイルを読み込む"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"scenario file {path} is not valid JSON: {e}") from e
    return Scenario.model_validate(data)


def gen_pa_tree(n: int, seed: int) -> Tree:
    """優先的選択で木を成長させる。新しい頂点は現在の次数に比例した確率で既存頂点に1本の辺でつながる。"""
    if n < 2:
        raise DataError(f"a preferential-attachment tree needs n >= 2, got {n}")

    rng = _rng(seed)
    edges = [(0, 1, 1.0)]
    # 次数の回数だけ頂点を並べたリスト（一様に引けば次数比例になる）
    endpoints = [0, 1]
    for vertex in range(2, n):
        target = endpoints[int(rng.integers(len(endpoints)))]
        edges.append((target, vertex, 1.0))
        endpoints.extend((target, vertex))

    return Tree(_labels("V", n, 4), tuple(edges))
