"""Minimal spanning trees over distance matrices and tree structure queries."""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .correlation import DistanceMatrix
from .errors import TreeError
from .ingest import CSV_FLOAT_FORMAT

logger = logging.getLogger(__name__)

Edge = tuple[int, int, float]


@dataclass(frozen=True)
class Tree:
    """全域木。辺は (i, j, weight) で i < j、(i, j) の昇順に正規化して保持する。"""
    tickers: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        tickers = tuple(self.tickers)
        n = len(tickers)
        if n == 0:
            raise TreeError("a tree needs at least one vertex")
        if len(set(tickers)) != n:
            raise TreeError("vertex labels must be unique")

        edges = tuple(sorted(
            (min(int(i), int(j)), max(int(i), int(j)), float(w)) for i, j, w in self.edges
        ))
        if len(edges) != n - 1:
            raise TreeError(f"a tree on {n} vertices needs {n - 1} edges, got {len(edges)}")

        # N-1 本の辺がすべて異なる成分を結べば、連結かつ閉路なし
        components = DisjointSet(range(n))
        for i, j, _ in edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise TreeError(f"edge ({i}, {j}) does not join two vertices of the tree")
            if not components.merge(i, j):
                raise TreeError(f"edge ({tickers[i]}, {tickers[j]}) closes a cycle")

        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "edges", edges)

    @property
    def n_vertices(self) -> int:
        return len(self.tickers)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges], dtype=float)

    @property
    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges)

    @cached_property
    def vertex_index(self) -> dict[str, int]:
        return {ticker: i for i, ticker in enumerate(self.tickers)}

    @cached_property
    def adjacency(self) -> csr_matrix:
        """重みなし（ホップ数用）の隣接行列"""
        n = self.n_vertices
        rows = [i for i, j, _ in self.edges] + [j for i, j, _ in self.edges]
        cols = [j for i, j, _ in self.edges] + [i for i, j, _ in self.edges]
        return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    def index_of(self, ticker: str) -> int:
        """ティッカーの頂点インデックスを返す（木に含まれなければ TreeError）"""
        try:
            return self.vertex_index[ticker]
        except KeyError:
            raise TreeError(f"vertex {ticker!r} is not in the tree") from None

    def edge_labels(self) -> list[tuple[str, str, float]]:
        return [(self.tickers[i], self.tickers[j], w) for i, j, w in self.edges]


def _label_ranks(tickers: tuple[str, ...]) -> np.ndarray:
    """ティッカーの辞書順の順位（同順位の辺の決定的なタイブレークに使う）"""
    order = sorted(range(len(tickers)), key=lambda i: tickers[i])
    ranks = np.empty(len(tickers), dtype=np.int64)
    ranks[order] = np.arange(len(tickers))
    return ranks


def prim_mst(distances: DistanceMatrix) -> Tree:
    """密行列版Primアルゴリズム（各ラウンドO(N)、全体O(N^2)）で最小全域木を構築する。
    辺の順序は (重み, 小さい方の順位, 大きい方の順位) の厳密な全順序で、Kruskalと同じ木になる。"""
    d = distances.values
    n = len(distances.tickers)
    if n == 1:
        return Tree(distances.tickers, ())

    ranks = _label_ranks(distances.tickers)
    root = int(np.argmin(ranks))

    in_tree = np.zeros(n, dtype=bool)
    in_tree[root] = True
    # 木の外の各頂点について、木へ結ぶ最良の辺（重みと木側の端点）
    best_weight = d[root].copy()
    best_from = np.full(n, root)

    edges: list[Edge] = []
    for _ in range(n - 1):
        candidates = np.flatnonzero(~in_tree)
        lo = np.minimum(ranks[best_from[candidates]], ranks[candidates])
        hi = np.maximum(ranks[best_from[candidates]], ranks[candidates])
        chosen = candidates[np.lexsort((hi, lo, best_weight[candidates]))[0]]
        parent = int(best_from[chosen])
        edges.append((parent, int(chosen), float(d[parent, chosen])))
        in_tree[chosen] = True

        new_weight = d[chosen]
        new_lo = np.minimum(ranks[chosen], ranks)
        new_hi = np.maximum(ranks[chosen], ranks)
        old_lo = np.minimum(ranks[best_from], ranks)
        old_hi = np.maximum(ranks[best_from], ranks)
        better = (new_weight < best_weight) | (
            (new_weight == best_weight)
            & ((new_lo < old_lo) | ((new_lo == old_lo) & (new_hi < old_hi)))
        )
        better &= ~in_tree
        best_weight[better] = new_weight[better]
        best_from[better] = chosen

    return Tree(distances.tickers, tuple(edges))


def kruskal_mst(distances: DistanceMatrix) -> Tree:
    """Kruskalアルゴリズムによる最小全域木（Primの正しさを確かめるオラクル）"""
    d = distances.values
    n = len(distances.tickers)
    if n == 1:
        return Tree(distances.tickers, ())

    ranks = _label_ranks(distances.tickers)
    rows, cols = np.triu_indices(n, k=1)
    lo = np.minimum(ranks[rows], ranks[cols])
    hi = np.maximum(ranks[rows], ranks[cols])
    order = np.lexsort((hi, lo, d[rows, cols]))

    components = DisjointSet(range(n))
    edges: list[Edge] = []
    for k in order:
        i, j = int(rows[k]), int(cols[k])
        if components.merge(i, j):
            edges.append((i, j, float(d[i, j])))
            if len(edges) == n - 1:
                break
    return Tree(distances.tickers, tuple(edges))


def degrees(tree: Tree) -> np.ndarray:
    """各頂点の次数（tickers と同じ順序）"""
    counts = np.zeros(tree.n_vertices, dtype=np.int64)
    for i, j, _ in tree.edges:
        counts[i] += 1
        counts[j] += 1
    return counts


def levels(tree: Tree, root: str) -> np.ndarray:
    """root からの辺の本数（ホップ数）を各頂点について返す"""
    source = tree.index_of(root)
    if tree.n_vertices == 1:
        return np.zeros(1, dtype=np.int64)
    hops = shortest_path(tree.adjacency, directed=False, unweighted=True, indices=source)
    return hops.astype(np.int64)


def to_networkx(tree: Tree) -> nx.Graph:
    """外部の可視化ツール向けに networkx のグラフへ変換する"""
    graph = nx.Graph()
    for ticker in tree.tickers:
        graph.add_node(ticker)
    for a, b, w in tree.edge_labels():
        graph.add_edge(a, b, weight=w)
    return graph


def write_edge_list(tree: Tree, path: Path | str) -> None:
    """辺リストを ticker_i,ticker_j,weight 形式（重みは17有効桁）で書き出す"""
    frame = pd.DataFrame(tree.edge_labels(), columns=["ticker_i", "ticker_j", "weight"])
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def write_graphml(tree: Tree, path: Path | str) -> None:
    """頂点ラベルと重み属性つきの GraphML を書き出す（レイアウトは外部ツールに任せる）"""
    nx.write_graphml(to_networkx(tree), str(path))
