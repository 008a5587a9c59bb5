"""Human-readable scan report: phases, transitions, minima, dragon-king episodes and exponents."""

import logging
from collections import Counter
from itertools import groupby

import numpy as np
from pydantic import BaseModel

from .errors import DataError, MissingStaticCenterError
from .ingest import FLOAT_FORMAT
from .metrics import WindowMetrics
from .phase import PhaseKind, PhaseReport, format_transitions
from .scan import ScanSeries, absolute_minimum, coincidence_interval

logger = logging.getLogger(__name__)

# 絶対最小値を報告する指標
REPORTED_MINIMA = ("mol_dynamic", "mol_static", "s_deg", "s_eff", "mean_tree_length")


class Regime(BaseModel):
    """平滑化後の相が連続する区間"""
    kind: PhaseKind
    windows: list[WindowMetrics]

    @property
    def first_start(self):
        return self.windows[0].window_start

    @property
    def last_start(self):
        return self.windows[-1].window_start


class DragonKingEpisode(BaseModel):
    """Superstar 相が続く区間と、その間のドラゴンキング"""
    first_start: str
    last_start: str
    ticker: str
    peak_degree: int
    n_windows: int


def _num(value: float) -> str:
    return format(value, FLOAT_FORMAT)


def regimes(series: ScanSeries, phases: PhaseReport) -> list[Regime]:
    """phases.json の平滑化ラベルで系列を相ごとの区間に分ける"""
    if [w.window_start for w in series.windows] != [p.window_start for p in phases.labels]:
        raise DataError("phases file does not match the series windows")
    # 相ラベルは phases.json 側（classify で付け直したもの）を正とする
    pairs = [
        (w.model_copy(update={"phase": label.phase}), label.smoothed)
        for w, label in zip(series.windows, phases.labels)
    ]
    return [
        Regime(kind=kind, windows=[w for w, _ in group])
        for kind, group in groupby(pairs, key=lambda pair: pair[1])
    ]


def dragon_king_episodes(found: list[Regime]) -> list[DragonKingEpisode]:
    """Superstar の区間ごとに、最も多く検出されたドラゴンキングとその最大次数をまとめる"""
    episodes = []
    for regime in found:
        if regime.kind is not PhaseKind.SUPERSTAR:
            continue
        kings = [
            w.phase.dragon_king for w in regime.windows
            if w.phase is not None and w.phase.dragon_king is not None
        ]
        if not kings:
            continue
        ticker = Counter(k.ticker or "?" for k in kings).most_common(1)[0][0]
        episodes.append(DragonKingEpisode(
            first_start=regime.first_start.isoformat(),
            last_start=regime.last_start.isoformat(),
            ticker=ticker,
            peak_degree=max(k.degree for k in kings),
            n_windows=len(regime.windows),
        ))
    return episodes


def _gamma_line(regime: Regime) -> str:
    fits = [w.fit for w in regime.windows if w.fit is not None]
    span = f"{regime.first_start.isoformat()} .. {regime.last_start.isoformat()}"
    if not fits:
        return f"- {span}  {regime.kind.value}: no power-law fit"
    gamma = float(np.mean([f.gamma for f in fits]))
    stderr = float(np.mean([f.stderr for f in fits]))
    return (
        f"- {span}  {regime.kind.value}: gamma = {gamma:.3f} ± {stderr:.3f} "
        f"({len(fits)} fits)"
    )


def to_report(series: ScanSeries, phases: PhaseReport) -> str:
    """走査結果と相ラベルをMarkdown形式のレポートに整形する"""
    config = series.config
    found = regimes(series, phases)

    phase_lines = "\n".join(
        f"- {r.first_start.isoformat()} .. {r.last_start.isoformat()}  "
        f"{r.kind.value} ({len(r.windows)} windows)"
        for r in found
    ) or "- なし"

    minima = []
    for metric in REPORTED_MINIMA:
        try:
            start, value = absolute_minimum(series, metric)
        except DataError:
            continue
        minima.append(f"- {metric}: {_num(value)} at {start.isoformat()}")
    minima_lines = "\n".join(minima) or "- なし"

    coincidence = ""
    if config.static_center is not None:
        try:
            intervals = coincidence_interval(series)
        except MissingStaticCenterError:
            intervals = []
        lines = "\n".join(
            f"- {i.first_window_start.isoformat()} .. {i.last_window_start.isoformat()} "
            f"({i.n_windows} windows)"
            for i in intervals
        ) or "- なし"
        coincidence = (
            f"\n## 動的・静的MOLの一致区間 (center {config.static_center}, "
            f"tol {config.coincidence_tol:g})\n{lines}\n"
        )

    episodes = dragon_king_episodes(found)
    episode_lines = "\n".join(
        f"- {e.first_start} .. {e.last_start}  {e.ticker} (peak degree {e.peak_degree}, "
        f"{e.n_windows} windows)"
        for e in episodes
    ) or "- なし"

    gamma_lines = "\n".join(_gamma_line(r) for r in found) or "- なし"

    return f"""# 相転移レポート

## 概要
- window length: {config.window_length} trading days, step: {config.step}
- windows: {len(series.windows)} evaluated, {len(series.skipped)} skipped
- dragon-king episodes: {len(episodes)}

## 相の推移
{phase_lines}

## 遷移
{format_transitions(phases.events).rstrip()}

## 絶対最小値
{minima_lines}
{coincidence}
## ドラゴンキング
{episode_lines}

## 相ごとのべき指数
{gamma_lines}
"""
