"""Per-tree observables: degree distribution, power-law fit, mean occupation layer, entropies."""

import logging
import math
from collections.abc import Sequence
from datetime import date

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.sparse.csgraph import shortest_path
from scipy.stats import linregress

from .errors import DataError, DegenerateFitError, NearDuplicateError, TreeError
from .ingest import FLOAT_FORMAT
from .mst import Tree, degrees, levels
from .phase import PhaseLabel

logger = logging.getLogger(__name__)

# べき乗則フィットに使う整数次数の区間
DEFAULT_FIT_RANGE = (2, 10)

# 効率エントロピーで許す辺の重みの下限（これ未満はほぼ同一資産）
EPSILON_D = 1e-9

# 分布の総和チェックの許容誤差
SUM_TOLERANCE = 1e-12


class DegreeDistribution(BaseModel):
    """次数分布 f(k)。support は出現した次数の昇順、f はその頂点割合。"""
    model_config = ConfigDict(frozen=True)

    support: list[int]
    f: list[float]

    @model_validator(mode="after")
    def _check_distribution(self) -> "DegreeDistribution":
        if len(self.support) != len(self.f) or not self.support:
            raise ValueError("support and f must be non-empty and of equal length")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ValueError("support must be strictly increasing")
        if self.support[0] < 0 or any(p <= 0 for p in self.f):
            raise ValueError("degrees must be non-negative and frequencies positive")
        if abs(math.fsum(self.f) - 1.0) > SUM_TOLERANCE:
            raise ValueError("frequencies must sum to 1")
        return self

    def frequency(self, k: int) -> float:
        """次数 k の頻度（出現しなければ 0）"""
        try:
            return self.f[self.support.index(k)]
        except ValueError:
            return 0.0

    def counts(self, n: int) -> list[int]:
        """頂点数 n に対する各次数の頂点数"""
        return [round(p * n) for p in self.f]


class PowerLawFit(BaseModel):
    """両対数の最小二乗フィット ln f(k) = intercept - gamma ln k の結果"""
    model_config = ConfigDict(frozen=True)

    gamma: float
    stderr: float = Field(ge=0.0)
    intercept: float
    fit_range: tuple[int, int]
    n_points: int = Field(ge=2)
    residual_std: float = Field(ge=0.0)

    @property
    def slope(self) -> float:
        return -self.gamma

    @property
    def c_hat(self) -> float:
        return math.exp(self.intercept)

    def expected_frequency(self, k: float) -> float:
        return self.c_hat * k ** -self.gamma


class WindowMetrics(BaseModel):
    """1ウィンドウ分のMST観測量"""
    model_config = ConfigDict(frozen=True)

    window_start: date
    window_end: date
    n_vertices: int
    degree_distribution: DegreeDistribution
    fit: PowerLawFit | None
    mol_dynamic: float
    mol_static: float | None = None
    s_deg: float
    s_eff: float
    mean_tree_length: float
    k1: int
    k2: int
    k3: int
    central_vertex: str
    phase: PhaseLabel | None = None

    @model_validator(mode="after")
    def _check_metrics(self) -> "WindowMetrics":
        if not self.k1 >= self.k2 >= self.k3 >= 1:
            raise ValueError("top degrees must satisfy k1 >= k2 >= k3 >= 1")
        if self.n_vertices >= 2 and self.mol_dynamic < 1.0:
            raise ValueError("mol_dynamic must be at least 1")
        return self

    @property
    def degree_gaps(self) -> tuple[int, int]:
        return self.k1 - self.k2, self.k2 - self.k3

    def to_row(self) -> dict[str, object]:
        """表形式（CSV）1行分の辞書に平坦化する。次数分布はJSON側にのみ残す。"""
        def num(value: float | None) -> str:
            return "" if value is None else format(value, FLOAT_FORMAT)

        fit = self.fit
        phase = self.phase
        dragon_king = phase.dragon_king if phase else None
        return {
            "window_start": self.window_start.isoformat(),
            "window_end": self.window_end.isoformat(),
            "n_vertices": self.n_vertices,
            "gamma": num(fit.gamma if fit else None),
            "gamma_stderr": num(fit.stderr if fit else None),
            "fit_points": fit.n_points if fit else "",
            "mol_dynamic": num(self.mol_dynamic),
            "mol_static": num(self.mol_static),
            "s_deg": num(self.s_deg),
            "s_eff": num(self.s_eff),
            "mean_tree_length": num(self.mean_tree_length),
            "k1": self.k1,
            "k2": self.k2,
            "k3": self.k3,
            "gap_k1_k2": self.degree_gaps[0],
            "gap_k2_k3": self.degree_gaps[1],
            "central_vertex": self.central_vertex,
            "phase": phase.kind.value if phase else "",
            "dragon_king": (dragon_king.ticker or "") if dragon_king else "",
            "n_outlier_hubs": phase.n_outlier_hubs if phase else "",
        }


def degree_distribution(degree_counts: Sequence[int] | np.ndarray) -> DegreeDistribution:
    """頂点ごとの次数から f(k) = (次数kの頂点数)/N を作る"""
    counts = np.asarray(degree_counts, dtype=np.int64)
    if counts.size == 0:
        raise DataError("degree sequence is empty")
    support, frequency = np.unique(counts, return_counts=True)
    n = counts.size
    return DegreeDistribution(
        support=[int(k) for k in support],
        f=[int(c) / n for c in frequency],
    )


def fit_power_law(
    dist: DegreeDistribution,
    fit_range: tuple[int, int] = DEFAULT_FIT_RANGE,
) -> PowerLawFit:
    """fit_range 内の整数次数について ln f(k) を ln k に最小二乗回帰する。
    頻度0の次数は対数が定義できないので除く。"""
    lo, hi = fit_range
    if lo < 1 or hi <= lo:
        raise DataError(f"invalid fit range [{lo}, {hi}]")

    points = [(k, p) for k, p in zip(dist.support, dist.f) if lo <= k <= hi and p > 0]
    if len(points) < 2:
        raise DegenerateFitError(
            f"need at least 2 degrees with f(k) > 0 in [{lo}, {hi}], got {len(points)}"
        )

    x = np.log([k for k, _ in points])
    y = np.log([p for _, p in points])
    result = linregress(x, y)

    residuals = y - (result.intercept + result.slope * x)
    n_points = len(points)
    residual_std = math.sqrt(float(residuals @ residuals) / (n_points - 2)) if n_points > 2 else 0.0

    return PowerLawFit(
        gamma=-float(result.slope),
        stderr=float(result.stderr),
        intercept=float(result.intercept),
        fit_range=(lo, hi),
        n_points=n_points,
        residual_std=residual_std,
    )


def central_vertex(tree: Tree) -> str:
    """最大次数の頂点。同数なら木上のホップ距離の総和が小さい方、さらに同じならティッカー順。"""
    deg = degrees(tree)
    tied = np.flatnonzero(deg == deg.max())
    if tied.size == 1:
        return tree.tickers[int(tied[0])]

    hops = shortest_path(tree.adjacency, directed=False, unweighted=True, indices=tied)
    totals = hops.sum(axis=1)
    best = min(range(tied.size), key=lambda m: (totals[m], tree.tickers[int(tied[m])]))
    return tree.tickers[int(tied[best])]


def mean_occupation_layer(tree: Tree, center: str) -> float:
    """平均占有層: 中心以外の頂点について中心からのホップ数を平均する（分母は N-1）"""
    if tree.n_vertices < 2:
        raise TreeError("mean occupation layer needs at least 2 vertices")
    hops = levels(tree, center)
    return float(hops.sum()) / (tree.n_vertices - 1)


def degree_entropy(dist: DegreeDistribution) -> float:
    """次数エントロピー S_deg = -Σ f(k) ln f(k)（単位 nats）"""
    return -math.fsum(p * math.log(p) for p in dist.f) + 0.0


def efficient_entropy(tree: Tree, epsilon_d: float = EPSILON_D) -> float:
    """辺の長さの逆数に基づく効率エントロピー S_eff = -Σ P(i) ln P(i)。
    P(i) は頂点 i に接する辺の d^-1 の和を全体で正規化したもの（各辺は両端点に寄与）。"""
    if tree.n_vertices < 2:
        raise TreeError("efficient entropy needs at least 2 vertices")

    mass = np.zeros(tree.n_vertices)
    for i, j, w in tree.edges:
        if w < epsilon_d:
            raise NearDuplicateError(tree.tickers[i], tree.tickers[j], w)
        mass[i] += 1.0 / w
        mass[j] += 1.0 / w

    p = mass / mass.sum()
    return -float(np.sum(p * np.log(p))) + 0.0


def mean_tree_length(tree: Tree) -> float:
    """N-1 本の辺の重みの算術平均"""
    if tree.n_vertices < 2:
        raise TreeError("mean tree length needs at least 2 vertices")
    return tree.total_weight / (tree.n_vertices - 1)


def top_degrees(degree_counts: Sequence[int] | np.ndarray) -> tuple[int, int, int]:
    """重複を含めた上位3つの次数 k1 >= k2 >= k3"""
    counts = np.asarray(degree_counts, dtype=np.int64)
    if counts.size < 3:
        raise DataError(f"need at least 3 vertices for the top three degrees, got {counts.size}")
    k1, k2, k3 = np.sort(counts)[::-1][:3]
    return int(k1), int(k2), int(k3)


def degree_gaps(degree_counts: Sequence[int] | np.ndarray) -> tuple[int, int]:
    """次数の差分 (k1 - k2, k2 - k3)"""
    k1, k2, k3 = top_degrees(degree_counts)
    return k1 - k2, k2 - k3


def compute_window_metrics(
    tree: Tree,
    window_start: date,
    window_end: date,
    fit_range: tuple[int, int] = DEFAULT_FIT_RANGE,
    static_center: str | None = None,
    epsilon_d: float = EPSILON_D,
) -> WindowMetrics:
    """1本のMSTから WindowMetrics を組み立てる（相ラベルは未設定）"""
    deg = degrees(tree)
    dist = degree_distribution(deg)

    try:
        fit = fit_power_law(dist, fit_range)
    except DegenerateFitError as e:
        logger.warning("Window %s: no power-law fit (%s)", window_start, e)
        fit = None

    center = central_vertex(tree)
    mol_static = None
    if static_center is not None and static_center in tree.vertex_index:
        mol_static = mean_occupation_layer(tree, static_center)
    k1, k2, k3 = top_degrees(deg)

    return WindowMetrics(
        window_start=window_start,
        window_end=window_end,
        n_vertices=tree.n_vertices,
        degree_distribution=dist,
        fit=fit,
        mol_dynamic=mean_occupation_layer(tree, center),
        mol_static=mol_static,
        s_deg=degree_entropy(dist),
        s_eff=efficient_entropy(tree, epsilon_d),
        mean_tree_length=mean_tree_length(tree),
        k1=k1,
        k2=k2,
        k3=k3,
        central_vertex=center,
    )
