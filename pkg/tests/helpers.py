"""Shared builders and brute-force oracles for the test suite."""

import heapq
import itertools
import math
from collections import deque
from datetime import date, timedelta

import numpy as np

from souteni.correlation import DistanceMatrix
from souteni.ingest import PricePanel
from souteni.mst import Tree


def labels(n: int, prefix: str = "T") -> tuple[str, ...]:
    width = max(3, len(str(n - 1)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def trading_days(n: int, first: date = date(2020, 1, 1)) -> tuple[date, ...]:
    return tuple(first + timedelta(days=i) for i in range(n))


def make_panel(prices, tickers=None, first: date = date(2020, 1, 1)) -> PricePanel:
    prices = np.asarray(prices, dtype=float)
    tickers = tickers or labels(prices.shape[1])
    return PricePanel(dates=trading_days(prices.shape[0], first), tickers=tuple(tickers), prices=prices)


def prufer_decode(sequence: list[int], n: int) -> list[tuple[int, int]]:
    """Prüfer列から木の辺を復元する"""
    degree = [1] * n
    for v in sequence:
        degree[v] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)

    edges = []
    for v in sequence:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return edges


def tree_from_degrees(degree_sequence: list[int], prefix: str = "V", weight: float = 1.0) -> Tree:
    """与えた次数列を持つ木（次数-1 回ずつ頂点を並べたPrüfer列から作る）"""
    n = len(degree_sequence)
    assert sum(degree_sequence) == 2 * (n - 1)
    sequence = [v for v, k in enumerate(degree_sequence) for _ in range(k - 1)]
    edges = prufer_decode(sequence, n) if n > 2 else [(0, 1)]
    return Tree(labels(n, prefix), tuple((i, j, weight) for i, j in edges))


def degrees_from_counts(counts: dict[int, int]) -> list[int]:
    """{次数: 頂点数} から次数列を作る（次数の大きい頂点を先頭に並べる）"""
    return [k for k in sorted(counts, reverse=True) for _ in range(counts[k])]


def star_tree(n: int, weight: float = 1.0) -> Tree:
    return Tree(labels(n), tuple((0, j, weight) for j in range(1, n)))


def path_tree(n: int, weight: float = 1.0) -> Tree:
    return Tree(labels(n), tuple((j, j + 1, weight) for j in range(n - 1)))


def random_distance_matrix(rng: np.random.Generator, n: int, tickers=None) -> DistanceMatrix:
    """[0, 2] の一様乱数による対称な距離行列"""
    upper = np.triu(rng.uniform(0.0, 2.0, size=(n, n)), k=1)
    return DistanceMatrix(tickers=tickers or labels(n), values=upper + upper.T)


def brute_force_mst_weight(distances: DistanceMatrix) -> float:
    """全てのPrüfer列を列挙して最小の総重みを求める（N <= 7 用）"""
    n = len(distances.tickers)
    d = distances.values
    if n == 1:
        return 0.0
    if n == 2:
        return math.fsum([d[0, 1]])
    best = math.inf
    for sequence in itertools.product(range(n), repeat=n - 2):
        total = math.fsum(d[i, j] for i, j in prufer_decode(list(sequence), n))
        best = min(best, total)
    return best


def pearson_oracle(x: np.ndarray, y: np.ndarray) -> float:
    """定義どおりの標本ピアソン相関係数"""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def bfs_levels(tree: Tree, root: str) -> list[int]:
    """幅優先探索によるホップ数"""
    neighbours = {i: [] for i in range(tree.n_vertices)}
    for i, j, _ in tree.edges:
        neighbours[i].append(j)
        neighbours[j].append(i)
    start = tree.tickers.index(root)
    hops = [-1] * tree.n_vertices
    hops[start] = 0
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for u in neighbours[v]:
            if hops[u] < 0:
                hops[u] = hops[v] + 1
                queue.append(u)
    return hops


def efficient_entropy_oracle(tree: Tree) -> float:
    """頂点ごとの逆距離の和を直接足し上げる効率エントロピー"""
    mass = [0.0] * tree.n_vertices
    for i, j, w in tree.edges:
        mass[i] += 1.0 / w
        mass[j] += 1.0 / w
    total = sum(mass)
    return -sum(m / total * math.log(m / total) for m in mass)


# 崩壊期のプロファイル: N=479、次数90の頂点1つ、残りは gamma ≈ 2.9 のべき乗則
CRASH_PROFILE = {1: 269, 2: 127, 3: 40, 4: 19, 5: 9, 6: 5, 7: 4, 8: 2, 9: 2, 10: 1, 90: 1}

# 崩壊後のプロファイル: べき乗則の上に次数14, 17, 17 の外れ値ハブ（21は法則に近い）
DECORATED_PROFILE = {
    1: 166, 2: 90, 3: 25, 4: 10, 5: 5, 6: 3, 7: 2, 8: 1, 9: 1, 10: 1,
    14: 1, 17: 2, 21: 1,
}

# 外れ値ハブのないべき乗則プロファイル（N=243）
SCALE_FREE_PROFILE = {1: 105, 2: 90, 3: 25, 4: 10, 5: 5, 6: 3, 7: 2, 8: 1, 9: 1, 10: 1}
