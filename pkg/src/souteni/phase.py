"""Phase classification of window MSTs, dragon-king detection and transition events."""

import logging
import math
from collections import Counter
from datetime import date
from enum import Enum
from itertools import groupby, pairwise
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import NotClassifiedError

if TYPE_CHECKING:
    from .metrics import DegreeDistribution, PowerLawFit, WindowMetrics
    from .scan import ScanSeries

logger = logging.getLogger(__name__)

# ドラゴンキング判定: 次数ギャップ比 k1 >= R_GAP * k2
R_GAP = 3.0
# ドラゴンキング判定: フィット則での k1 の期待頂点数がこれ未満
P_TAIL = 0.1
# ハブ外れ値判定の標準化残差の閾値
Z_HUB = 2.0
# DecoratedScaleFree とみなす外れ値ハブ頂点数の下限
H_MIN = 2
# ScaleFree とみなすフィットの相対誤差 stderr/gamma の上限
REL_ERR_MAX = 0.25
# 平滑化の窓幅（ラベル数）
W_SMOOTH = 3
# 残差のばらつきの下限（厳密なべき乗則入力で残差0になる場合の分母）
MIN_RESIDUAL_SPREAD = 0.25


class PhaseKind(str, Enum):
    SCALE_FREE = "ScaleFree"
    SUPERSTAR = "Superstar"
    DECORATED_SCALE_FREE = "DecoratedScaleFree"
    INDETERMINATE = "Indeterminate"


class DragonKing(BaseModel):
    """べき乗則から明確に外れた最大次数の頂点"""
    model_config = ConfigDict(frozen=True)

    ticker: str | None = None
    degree: int
    f_max: float  # 最大次数の頂点割合 f(k_max)
    expected_tail: float | None = None  # フィット則での k_max の期待頂点数


class PhaseLabel(BaseModel):
    """ウィンドウの相ラベルと判定根拠"""
    model_config = ConfigDict(frozen=True)

    kind: PhaseKind
    dragon_king: DragonKing | None = None
    n_outlier_hubs: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_evidence(self) -> "PhaseLabel":
        if self.kind is PhaseKind.SUPERSTAR and self.dragon_king is None:
            raise ValueError("Superstar requires a dragon king")
        if self.kind is PhaseKind.DECORATED_SCALE_FREE and (
            self.n_outlier_hubs < 2 or self.dragon_king is not None
        ):
            raise ValueError("DecoratedScaleFree requires >= 2 outlier hubs and no dragon king")
        return self


class TransitionEvent(BaseModel):
    """連続するウィンドウ間での相の変化"""
    model_config = ConfigDict(
        frozen=True,
        validate_by_name=True,
        validate_by_alias=True,
        serialize_by_alias=True,
    )

    from_kind: PhaseKind = Field(alias="from")
    to_kind: PhaseKind = Field(alias="to")
    window_start: date

    @model_validator(mode="after")
    def _check_change(self) -> "TransitionEvent":
        if self.from_kind is self.to_kind:
            raise ValueError("a transition must change the phase kind")
        return self


class PhaseThresholds(BaseModel):
    """相判定の閾値（既定値は設定ファイルで上書きできる）"""
    model_config = ConfigDict(frozen=True)

    r_gap: float = Field(default=R_GAP, gt=1.0)
    p_tail: float = Field(default=P_TAIL, gt=0.0)
    z_hub: float = Field(default=Z_HUB, gt=0.0)
    h_min: int = Field(default=H_MIN, ge=2)
    rel_err_max: float = Field(default=REL_ERR_MAX, gt=0.0)
    w_smooth: int = Field(default=W_SMOOTH, ge=1)
    min_residual_spread: float = Field(default=MIN_RESIDUAL_SPREAD, gt=0.0)

    @field_validator("w_smooth")
    @classmethod
    def _odd_width(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("w_smooth must be odd (centered window)")
        return value


class WindowPhase(BaseModel):
    """phases.json の1ウィンドウ分"""
    window_start: date
    window_end: date
    phase: PhaseLabel
    smoothed: PhaseKind


class PhaseReport(BaseModel):
    """classify サブコマンドの出力（ラベル・根拠・遷移イベント）"""
    thresholds: PhaseThresholds
    labels: list[WindowPhase]
    events: list[TransitionEvent]


def detect_dragon_king(
    dist: "DegreeDistribution",
    fit: "PowerLawFit | None",
    n: int,
    ticker: str | None = None,
    r_gap: float = R_GAP,
    p_tail: float = P_TAIL,
) -> DragonKing | None:
    """最大次数の頂点がドラゴンキングかを判定する。
    (a) k1 >= r_gap * k2、かつ (b) フィット則での k1 の期待頂点数 n·ĉ·k1^-γ < p_tail。
    フィットがない場合（星型など）は (b) の代わりに k1 の頂点がただ1つであることを要求する。"""
    counts = dist.counts(n)
    if len(dist.support) < 2 or counts[-1] != 1:
        return None

    k1 = dist.support[-1]
    k2 = dist.support[-2]
    if k1 < r_gap * k2:
        return None

    expected = None
    if fit is not None:
        expected = n * fit.expected_frequency(k1)
        if expected >= p_tail:
            return None

    return DragonKing(ticker=ticker, degree=k1, f_max=dist.f[-1], expected_tail=expected)


def outlier_hub_count(
    dist: "DegreeDistribution",
    fit: "PowerLawFit | None",
    n: int,
    z_hub: float = Z_HUB,
    min_residual_spread: float = MIN_RESIDUAL_SPREAD,
) -> int:
    """フィット区間より大きい次数で、べき乗則の上に外れたハブ頂点の数を数える。
    1頂点しかない次数は常に f=1/N に張り付くため、裾の頂点数 N(>=k) の対数残差で比べる。"""
    if fit is None:
        return 0

    counts = np.array(dist.counts(n))
    observed_tail = np.cumsum(counts[::-1])[::-1]

    upper = max(n - 1, dist.support[-1])
    js = np.arange(1, upper + 1, dtype=float)
    expected_pmf = n * fit.c_hat * js ** -fit.gamma
    expected_tail = np.cumsum(expected_pmf[::-1])[::-1]

    spread = max(fit.residual_std, min_residual_spread)
    hubs = 0
    for idx, k in enumerate(dist.support):
        if k <= fit.fit_range[1]:
            continue
        z = math.log(observed_tail[idx] / expected_tail[k - 1]) / spread
        if z > z_hub:
            hubs += int(counts[idx])
    return hubs


def classify(metrics: "WindowMetrics", thresholds: PhaseThresholds | None = None) -> PhaseLabel:
    """WindowMetrics から相ラベルを決める。
    Superstar（ドラゴンキングあり）> DecoratedScaleFree（外れ値ハブ >= h_min）> ScaleFree（相対誤差が小さい）> Indeterminate"""
    thresholds = thresholds or PhaseThresholds()
    dist = metrics.degree_distribution
    fit = metrics.fit
    n = metrics.n_vertices

    hubs = outlier_hub_count(dist, fit, n, thresholds.z_hub, thresholds.min_residual_spread)
    dragon_king = detect_dragon_king(
        dist, fit, n,
        ticker=metrics.central_vertex,
        r_gap=thresholds.r_gap,
        p_tail=thresholds.p_tail,
    )

    if dragon_king is not None:
        return PhaseLabel(kind=PhaseKind.SUPERSTAR, dragon_king=dragon_king, n_outlier_hubs=hubs)
    if hubs >= thresholds.h_min:
        return PhaseLabel(kind=PhaseKind.DECORATED_SCALE_FREE, n_outlier_hubs=hubs)
    if fit is not None and fit.gamma > 0 and fit.stderr / fit.gamma <= thresholds.rel_err_max:
        return PhaseLabel(kind=PhaseKind.SCALE_FREE, n_outlier_hubs=hubs)
    return PhaseLabel(kind=PhaseKind.INDETERMINATE, n_outlier_hubs=hubs)


def _hold_indeterminate(kinds: list[PhaseKind]) -> list[PhaseKind]:
    """Indeterminate を直前の確定ラベルで埋める（先頭は最初の確定ラベル、全て未確定ならそのまま）"""
    determinate = [k for k in kinds if k is not PhaseKind.INDETERMINATE]
    if not determinate:
        return list(kinds)
    held = []
    last = determinate[0]
    for kind in kinds:
        if kind is not PhaseKind.INDETERMINATE:
            last = kind
        held.append(last)
    return held


def _majority(kinds: list[PhaseKind], width: int) -> list[PhaseKind]:
    half = width // 2
    smoothed = []
    for i, kind in enumerate(kinds):
        neighbourhood = kinds[max(0, i - half):i + half + 1]
        top, count = Counter(neighbourhood).most_common(1)[0]
        smoothed.append(top if count * 2 > len(neighbourhood) else kind)
    return smoothed


def _bridge_short_runs(kinds: list[PhaseKind], width: int) -> list[PhaseKind]:
    """同じ相に挟まれた width 以下の長さの区間を両側の相に吸収する（変化がなくなるまで）"""
    while True:
        runs = [(kind, len(list(group))) for kind, group in groupby(kinds)]
        gaps = [
            i for i in range(1, len(runs) - 1)
            if runs[i][1] <= width and runs[i - 1][0] is runs[i + 1][0]
        ]
        if not gaps:
            return kinds
        # 最も短い区間から1つずつ吸収する
        target = min(gaps, key=lambda i: (runs[i][1], i))
        runs[target] = (runs[target - 1][0], runs[target][1])
        kinds = [kind for kind, length in runs for _ in range(length)]


def smooth_labels(kinds: list[PhaseKind], width: int = W_SMOOTH) -> list[PhaseKind]:
    """ラベル列の平滑化。width=1 なら何もしない。
    1. Indeterminate は直前の確定ラベルを引き継ぐ
    2. 中心化した窓での多数決（過半数のラベルがなければ元のラベルを残す）
    3. 同じ相に挟まれた width 以下の短い区間を吸収する"""
    if width == 1:
        return list(kinds)
    held = _hold_indeterminate(kinds)
    return _bridge_short_runs(_majority(held, width), width)


def _require_labels(series: "ScanSeries") -> list[PhaseKind]:
    missing = [w.window_start for w in series.windows if w.phase is None]
    if missing:
        raise NotClassifiedError(f"{len(missing)} windows have no phase label (first: {missing[0]})")
    return [w.phase.kind for w in series.windows]


def transitions(series: "ScanSeries", w_smooth: int = W_SMOOTH) -> list[TransitionEvent]:
    """平滑化したラベル列で、相の種類が変わるたびにイベントを1つ出す"""
    kinds = smooth_labels(_require_labels(series), w_smooth)
    events = []
    for i, (before, after) in enumerate(pairwise(kinds), start=1):
        if before is not after:
            events.append(TransitionEvent(
                from_kind=before,
                to_kind=after,
                window_start=series.windows[i].window_start,
            ))
    return events


def classify_series(series: "ScanSeries", thresholds: PhaseThresholds | None = None) -> "ScanSeries":
    """系列の全ウィンドウを（閾値を変えて）分類し直した系列を返す"""
    thresholds = thresholds or PhaseThresholds()
    windows = [w.model_copy(update={"phase": classify(w, thresholds)}) for w in series.windows]
    logger.info("Classified %d windows", len(windows))
    return series.model_copy(update={"windows": windows})


def build_phase_report(series: "ScanSeries", thresholds: PhaseThresholds | None = None) -> PhaseReport:
    """分類済み系列から phases.json の内容を作る"""
    thresholds = thresholds or PhaseThresholds()
    kinds = smooth_labels(_require_labels(series), thresholds.w_smooth)
    labels = [
        WindowPhase(
            window_start=w.window_start,
            window_end=w.window_end,
            phase=w.phase,
            smoothed=kind,
        )
        for w, kind in zip(series.windows, kinds)
    ]
    return PhaseReport(
        thresholds=thresholds,
        labels=labels,
        events=transitions(series, thresholds.w_smooth),
    )


def format_transitions(events: list[TransitionEvent]) -> str:
    """遷移イベントを人が読めるテキストにする"""
    if not events:
        return "no transitions\n"
    lines = [f"{len(events)} transition(s):"]
    lines += [
        f"  {e.window_start.isoformat()}  {e.from_kind.value} -> {e.to_kind.value}"
        for e in events
    ]
    return "\n".join(lines) + "\n"
