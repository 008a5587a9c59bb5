"""Rolling-window scan: survivors, correlation, MST and metrics per window, plus series queries."""

import logging
import os
from bisect import bisect_left, bisect_right
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from functools import partial
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .correlation import CorrelationMatrix, pearson_matrix, to_distance
from .errors import (
    DataError,
    MissingStaticCenterError,
    NearDuplicateError,
    PanelTooShortError,
    SurvivorError,
    UnknownMetricError,
    ZeroVarianceError,
)
from .ingest import CSV_FLOAT_FORMAT, DEFAULT_GAP_LIMIT, PricePanel, log_returns_detrended, window_survivors
from .metrics import DEFAULT_FIT_RANGE, EPSILON_D, WindowMetrics, compute_window_metrics
from .mst import Tree, prim_mst
from .phase import PhaseThresholds, classify

logger = logging.getLogger(__name__)

# 動的MOLと静的MOLが一致するとみなす許容差（MOL単位）
DEFAULT_COINCIDENCE_TOL = 0.05

# MSTを作るのに必要な最小の生存ティッカー数
MIN_SURVIVORS = 3

# series.csv のカラム順
SERIES_COLUMNS = [
    "window_start", "window_end", "n_vertices",
    "gamma", "gamma_stderr", "fit_points",
    "mol_dynamic", "mol_static", "s_deg", "s_eff", "mean_tree_length",
    "k1", "k2", "k3", "gap_k1_k2", "gap_k2_k3",
    "central_vertex", "phase", "dragon_king", "n_outlier_hubs",
]

# absolute_minimum で参照できる数値指標
SERIES_METRICS = (
    "mol_dynamic", "mol_static", "s_deg", "s_eff", "mean_tree_length",
    "gamma", "k1", "k2", "k3", "gap_k1_k2", "gap_k2_k3", "n_vertices",
)


def _default_workers() -> int:
    """環境変数 SOUTENI_WORKERS からウィンドウ評価の並列数を決める"""
    raw = os.environ.get("SOUTENI_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring invalid SOUTENI_WORKERS=%r, using 1 worker", raw)
        return 1


class ScanConfig(BaseModel):
    """ローリングウィンドウ走査の設定（設定ファイルのキーと1対1に対応する）"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    window_length: int = Field(ge=30)
    step: int = Field(ge=1)
    gap_limit: int = Field(default=DEFAULT_GAP_LIMIT, ge=0)
    fit_range: tuple[int, int] = DEFAULT_FIT_RANGE
    detrend: bool = True
    static_center: str | None = None
    exclude: tuple[str, ...] = ()
    coincidence_tol: float = Field(default=DEFAULT_COINCIDENCE_TOL, gt=0.0)
    min_survivors: int = Field(default=MIN_SURVIVORS, ge=3)
    epsilon_d: float = Field(default=EPSILON_D, gt=0.0)
    # 並列数は結果に影響しないのでシリアライズしない
    workers: int = Field(default_factory=_default_workers, ge=1, exclude=True)
    thresholds: PhaseThresholds = Field(default_factory=PhaseThresholds)
    start: date | None = None
    end: date | None = None

    @model_validator(mode="after")
    def _check_config(self) -> "ScanConfig":
        if self.step > self.window_length:
            raise ValueError(f"step {self.step} must not exceed window_length {self.window_length}")
        lo, hi = self.fit_range
        if lo < 1 or hi <= lo:
            raise ValueError(f"invalid fit_range [{lo}, {hi}]")
        if self.start and self.end and self.end < self.start:
            raise ValueError("end must not precede start")
        return self


class SkippedWindow(BaseModel):
    """評価できなかったウィンドウとその理由"""
    window_start: date
    window_end: date
    n_survivors: int
    reason: str


class ScanSeries(BaseModel):
    """走査結果。windows は評価できたウィンドウのみ、window_starts と survivor_counts は全ウィンドウ分。"""
    config: ScanConfig
    windows: list[WindowMetrics]
    skipped: list[SkippedWindow] = []
    window_starts: list[date] = []
    survivor_counts: list[int] = []

    @model_validator(mode="after")
    def _check_order(self) -> "ScanSeries":
        starts = [w.window_start for w in self.windows]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("windows must be ordered by window_start")
        if len(self.window_starts) != len(self.survivor_counts):
            raise ValueError("window_starts and survivor_counts must have equal length")
        return self


class CoincidenceInterval(BaseModel):
    """動的MOLと静的MOLが許容差内で一致する連続ウィンドウ区間"""
    first_window_start: date
    last_window_start: date
    last_window_end: date
    n_windows: int


@dataclass(frozen=True)
class WindowResult:
    """1ウィンドウの評価結果（スキップ時は metrics と tree が None）"""
    window_start: date
    window_end: date
    n_survivors: int
    metrics: WindowMetrics | None = None
    tree: Tree | None = None
    skip_reason: str | None = None


def window_positions(panel: PricePanel, config: ScanConfig) -> list[int]:
    """パネル先頭（または config.start）から step 日ずつ、全幅が収まる間のウィンドウ開始行を返す"""
    first = bisect_left(panel.dates, config.start) if config.start else 0
    limit = bisect_right(panel.dates, config.end) if config.end else panel.n_dates
    span = limit - first
    if span < config.window_length:
        raise PanelTooShortError(
            f"panel has {span} trading days in range, window needs {config.window_length}"
        )
    return list(range(first, limit - config.window_length + 1, config.step))


def window_candidates(panel: PricePanel, config: ScanConfig, start: date) -> list[str]:
    """ウィンドウの生存ティッカーから exclude を除いたもの"""
    excluded = set(config.exclude)
    survivors = window_survivors(panel, start, config.window_length, config.gap_limit)
    return [t for t in survivors if t not in excluded]


def window_correlation(panel: PricePanel, config: ScanConfig, start: date) -> CorrelationMatrix:
    """ウィンドウの相関行列。分散ゼロのティッカーは落として再試行する。"""
    survivors = window_candidates(panel, config, start)
    while True:
        if len(survivors) < config.min_survivors:
            raise SurvivorError(f"only {len(survivors)} survivors (need {config.min_survivors})")
        returns = log_returns_detrended(
            panel, survivors, start, config.window_length, config.gap_limit, config.detrend
        )
        try:
            return pearson_matrix(returns)
        except ZeroVarianceError as e:
            logger.warning("Window %s: dropping zero-variance ticker %s", start, e.ticker)
            survivors.remove(e.ticker)


def measure_tree(tree: Tree, config: ScanConfig, start: date, end: date) -> WindowMetrics:
    """MSTの観測量を計算し、config の閾値で相ラベルを付ける"""
    metrics = compute_window_metrics(
        tree, start, end,
        fit_range=config.fit_range,
        static_center=config.static_center,
        epsilon_d=config.epsilon_d,
    )
    return metrics.model_copy(update={"phase": classify(metrics, config.thresholds)})


def evaluate_window(panel: PricePanel, config: ScanConfig, position: int) -> WindowResult:
    """1ウィンドウ分の 生存判定 → デトレンド → 相関 → 距離 → Prim MST → 観測量 → 相ラベル"""
    start = panel.dates[position]
    end = panel.dates[position + config.window_length - 1]

    try:
        correlation = window_correlation(panel, config, start)
        tree = prim_mst(to_distance(correlation))
        metrics = measure_tree(tree, config, start, end)
    except (SurvivorError, NearDuplicateError) as e:
        logger.warning("Window %s skipped: %s", start, e)
        n_survivors = len(window_candidates(panel, config, start))
        return WindowResult(start, end, n_survivors, skip_reason=str(e))

    return WindowResult(start, end, tree.n_vertices, metrics=metrics, tree=tree)


def run_scan(
    panel: PricePanel,
    config: ScanConfig,
    on_tree: Callable[[date, Tree], None] | None = None,
) -> ScanSeries:
    """全ウィンドウを独立タスクとして評価し、開始日順にまとめる。
    on_tree が与えられれば、評価できた各ウィンドウのMSTを開始日順に渡す。"""
    positions = window_positions(panel, config)
    logger.info(
        "Scanning %d windows (T=%d, step=%d, workers=%d)...",
        len(positions), config.window_length, config.step, config.workers,
    )

    evaluate = partial(evaluate_window, panel, config)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(evaluate, positions))
    else:
        results = [evaluate(p) for p in positions]

    windows = []
    skipped = []
    for result in results:
        if result.metrics is None:
            skipped.append(SkippedWindow(
                window_start=result.window_start,
                window_end=result.window_end,
                n_survivors=result.n_survivors,
                reason=result.skip_reason or "",
            ))
            continue
        windows.append(result.metrics)
        if on_tree is not None:
            on_tree(result.window_start, result.tree)

    logger.info("Scan finished: %d windows evaluated, %d skipped", len(windows), len(skipped))
    return ScanSeries(
        config=config,
        windows=windows,
        skipped=skipped,
        window_starts=[r.window_start for r in results],
        survivor_counts=[r.n_survivors for r in results],
    )


def metric_value(window: WindowMetrics, metric: str) -> float | None:
    """ウィンドウから名前で数値指標を取り出す"""
    if metric not in SERIES_METRICS:
        raise UnknownMetricError(
            f"unknown metric {metric!r}; choose from {', '.join(SERIES_METRICS)}"
        )
    if metric == "gamma":
        return window.fit.gamma if window.fit else None
    if metric == "gap_k1_k2":
        return window.degree_gaps[0]
    if metric == "gap_k2_k3":
        return window.degree_gaps[1]
    return getattr(window, metric)


def absolute_minimum(series: ScanSeries, metric: str) -> tuple[date, float]:
    """指標が全体最小となる最も早いウィンドウの開始日と値"""
    best: tuple[date, float] | None = None
    for window in series.windows:
        value = metric_value(window, metric)
        if value is None:
            continue
        if best is None or value < best[1]:
            best = (window.window_start, value)
    if best is None:
        raise DataError(f"no evaluated window carries {metric!r}")
    return best


def coincidence_interval(series: ScanSeries, tol: float | None = None) -> list[CoincidenceInterval]:
    """|mol_dynamic - mol_static| <= tol となる連続ウィンドウの極大区間を返す"""
    if tol is None:
        tol = series.config.coincidence_tol
    if series.config.static_center is None or all(w.mol_static is None for w in series.windows):
        raise MissingStaticCenterError("mol_static is absent; configure static_center")

    intervals = []
    run: list[WindowMetrics] = []
    for window in series.windows + [None]:
        inside = (
            window is not None
            and window.mol_static is not None
            and abs(window.mol_dynamic - window.mol_static) <= tol
        )
        if inside:
            run.append(window)
            continue
        if run:
            intervals.append(CoincidenceInterval(
                first_window_start=run[0].window_start,
                last_window_start=run[-1].window_start,
                last_window_end=run[-1].window_end,
                n_windows=len(run),
            ))
            run = []
    return intervals


def write_series(series: ScanSeries, out_dir: Path | str) -> list[Path]:
    """series.csv（表形式）と series.json（完全な記録）を書き出す"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    csv_path = out_dir / "series.csv"
    frame = pd.DataFrame([w.to_row() for w in series.windows], columns=SERIES_COLUMNS)
    frame.to_csv(csv_path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")

    json_path = out_dir / "series.json"
    json_path.write_text(series.model_dump_json(indent=2) + "\n", encoding="utf-8")

    logger.info("Series written: %s, %s", csv_path, json_path)
    return [csv_path, json_path]


def load_series(path: Path | str) -> ScanSeries:
    """series.json を読み込む"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Series file not found: {path}")
    return ScanSeries.model_validate_json(path.read_text(encoding="utf-8"))
