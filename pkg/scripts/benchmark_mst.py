"""Time dense Prim against Kruskal on random distance matrices."""

import argparse
import logging
import sys
import time

import numpy as np

from souteni.correlation import CorrelationMatrix, to_distance
from souteni.mst import kruskal_mst, prim_mst

logger = logging.getLogger(__name__)

# 既定で測る頂点数
DEFAULT_SIZES = (100, 200, 479, 1000)


def random_correlation(rng: np.random.Generator, n: int, days: int = 400) -> CorrelationMatrix:
    """ガウス乱数の系列から相関行列を作る"""
    data = rng.normal(size=(days, n))
    c = np.corrcoef(data, rowvar=False)
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(tickers=tuple(f"T{i:04d}" for i in range(n)), values=c)


def best_of(func, argument, repeat: int) -> float:
    timings = []
    for _ in range(repeat):
        started = time.perf_counter()
        func(argument)
        timings.append(time.perf_counter() - started)
    return min(timings)


def main():
    parser = argparse.ArgumentParser(description="Benchmark Prim and Kruskal MST construction")
    parser.add_argument(
        "--sizes",
        type=lambda text: [int(part) for part in text.split(",")],
        default=list(DEFAULT_SIZES),
        help="Comma-separated vertex counts",
    )
    parser.add_argument("--repeat", type=int, default=3, help="Timings per size (best is kept)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    rng = np.random.default_rng(args.seed)

    print(f"{'N':>6} {'prim [s]':>10} {'kruskal [s]':>12}  same tree")
    for n in args.sizes:
        distances = to_distance(random_correlation(rng, n))
        prim = prim_mst(distances)
        kruskal = kruskal_mst(distances)
        if prim.edges != kruskal.edges:
            print(f"Error: Prim and Kruskal disagree at N={n}", file=sys.stderr)
            sys.exit(1)

        prim_time = best_of(prim_mst, distances, args.repeat)
        kruskal_time = best_of(kruskal_mst, distances, args.repeat)
        print(f"{n:>6} {prim_time:>10.4f} {kruskal_time:>12.4f}  yes")


if __name__ == "__main__":
    main()
