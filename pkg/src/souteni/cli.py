"""CLI entry point for souteni."""

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from .correlation import to_distance, write_matrix
from .errors import DataError
from .ingest import CSV_FLOAT_FORMAT, load_price_panel, window_bounds, write_price_panel
from .manifest import TOOL_VERSION, write_manifest
from .mst import prim_mst, write_edge_list, write_graphml
from .phase import PhaseReport, PhaseThresholds, build_phase_report, classify_series, format_transitions
from .report import to_report
from .scan import ScanConfig, load_series, measure_tree, run_scan, window_correlation, write_series
from .synth import (
    DEFAULT_SIGMA_IDIO,
    DEFAULT_SIGMA_MARKET,
    FactorMarketSpec,
    Scenario,
    build_scenario_panel,
    load_scenario,
)

logger = logging.getLogger(__name__)

# 終了コード
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

# synth のフラグ既定値（シナリオファイルがない場合）
DEFAULT_ASSETS = 50
DEFAULT_DAYS = 600

# 設定ファイルのキーに対応する scan/tree のフラグ（属性名 → ScanConfig のフィールド名）
SCAN_FLAG_KEYS = {
    "step": "step",
    "gap_limit": "gap_limit",
    "fit_range": "fit_range",
    "detrend": "detrend",
    "static_center": "static_center",
    "exclude": "exclude",
    "tol": "coincidence_tol",
    "workers": "workers",
    "range_start": "start",
    "range_end": "end",
}


class UsageError(Exception):
    """引数の組み合わせが不正（終了コード1）"""


class _Parser(argparse.ArgumentParser):
    # argparse の既定（終了コード2）をデータエラーと区別するため1で終了させる
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"Error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _int_pair(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI integers, got {text!r}") from None
    return lo, hi


def _ticker_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _widths(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected T[,T...] integers, got {text!r}") from None


def _read_config(path: str | None) -> dict:
    """JSON設定ファイルを読む（キーは ScanConfig のフィールド名）"""
    if path is None:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"config file {config_path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise DataError(f"config file {config_path} must hold a JSON object")
    return data


def _scan_config(args: argparse.Namespace, base: dict, **fixed) -> ScanConfig:
    """設定ファイルの値にフラグを上書きして ScanConfig を作る（指定のないフラグは上書きしない）"""
    data = dict(base)
    for attr, key in SCAN_FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            data[key] = value
    data.update(fixed)
    return ScanConfig.model_validate(data)


def _add_window_options(parser: argparse.ArgumentParser) -> None:
    # scan と tree で共通のオプション
    parser.add_argument("--input", required=True, help="Price CSV (date,ticker,close)")
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument(
        "--detrend",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Subtract the daily cross-sectional mean return (default: on)",
    )
    parser.add_argument("--static-center", help="Ticker used as fixed center for static MOL")
    parser.add_argument("--exclude", type=_ticker_list, help="Comma-separated tickers to leave out")
    parser.add_argument(
        "--gap-limit",
        type=int,
        help="Longest internal gap (trading days) filled forward (default: 5)",
    )
    parser.add_argument(
        "--fit-range",
        type=_int_pair,
        help="Integer degree interval for the power-law fit (default: 2,10)",
    )
    parser.add_argument("--out", required=True, help="Output directory")


def cmd_scan(args: argparse.Namespace) -> None:
    """ローリングウィンドウ走査を実行して系列を書き出す"""
    base = _read_config(args.config)
    widths = args.window or ([base["window_length"]] if "window_length" in base else None)
    if not widths:
        raise UsageError("--window is required unless the config file sets window_length")
    if args.step is None and "step" not in base:
        raise UsageError("--step is required unless the config file sets step")

    input_path = Path(args.input)
    out_dir = Path(args.out)
    panel = load_price_panel(input_path)
    print(f"Loaded: {input_path} ({panel.n_dates} dates x {len(panel.tickers)} tickers)")

    outputs: list[Path] = []
    configs = []
    for width in widths:
        config = _scan_config(args, base, window_length=width)
        target = out_dir if len(widths) == 1 else out_dir / f"T{width}"
        target.mkdir(parents=True, exist_ok=True)

        on_tree = None
        if args.dump_trees:
            trees_dir = target / "trees"
            trees_dir.mkdir(parents=True, exist_ok=True)

            # 評価できたウィンドウのMSTを開始日ごとに書き出すコールバック
            def on_tree(start: date, tree, trees_dir=trees_dir):
                stem = trees_dir / start.isoformat()
                write_edge_list(tree, stem.with_suffix(".csv"))
                write_graphml(tree, stem.with_suffix(".graphml"))
                outputs.extend([stem.with_suffix(".csv"), stem.with_suffix(".graphml")])

        series = run_scan(panel, config, on_tree=on_tree)
        outputs.extend(write_series(series, target))
        configs.append(config.model_dump(mode="json"))
        print(
            f"T={width}: {len(series.windows)} windows, "
            f"{len(series.skipped)} skipped -> {target}"
        )

    manifest = write_manifest(
        out_dir, TOOL_VERSION, "scan", args.argv, {"scans": configs}, [input_path], outputs
    )
    print(f"\nSaved to: {out_dir} ({manifest.name})")


def cmd_tree(args: argparse.Namespace) -> None:
    """1ウィンドウのMSTを構築して辺リスト・GraphML・観測量を書き出す"""
    base = _read_config(args.config)
    config = _scan_config(args, base, window_length=args.length, step=1, start=None, end=None)

    input_path = Path(args.input)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    panel = load_price_panel(input_path)

    first, stop = window_bounds(panel, args.start, args.length)
    start, end = panel.dates[first], panel.dates[stop - 1]
    correlation = window_correlation(panel, config, start)
    tree = prim_mst(to_distance(correlation))
    metrics = measure_tree(tree, config, start, end)

    outputs = [out_dir / "tree.csv", out_dir / "tree.graphml", out_dir / "metrics.json",
               out_dir / "degree_distribution.csv"]
    write_edge_list(tree, outputs[0])
    write_graphml(tree, outputs[1])
    outputs[2].write_text(metrics.model_dump_json(indent=2) + "\n", encoding="utf-8")

    dist = metrics.degree_distribution
    pd.DataFrame({
        "k": dist.support,
        "count": dist.counts(metrics.n_vertices),
        "f": dist.f,
    }).to_csv(outputs[3], index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")

    if args.dump_matrix:
        outputs.append(out_dir / "correlation.csv")
        write_matrix(correlation, outputs[-1])

    write_manifest(
        out_dir, TOOL_VERSION, "tree", args.argv,
        config.model_dump(mode="json"), [input_path], outputs,
    )

    gamma = f"{metrics.fit.gamma:.3f} ± {metrics.fit.stderr:.3f}" if metrics.fit else "n/a"
    print(f"Window: {start} .. {end} ({metrics.n_vertices} vertices)")
    print(f"Central vertex: {metrics.central_vertex} (degree {metrics.k1})")
    print(f"MOL: {metrics.mol_dynamic:.6f}  gamma: {gamma}")
    print(f"Phase: {metrics.phase.kind.value}")
    print(f"\nSaved to: {out_dir}")


def cmd_classify(args: argparse.Namespace) -> None:
    """系列を分類し直して相ラベルと遷移イベントを書き出す"""
    series_path = Path(args.series)
    series = load_series(series_path)
    base = _read_config(args.config)
    if "thresholds" in base:
        thresholds = PhaseThresholds.model_validate(base["thresholds"])
    else:
        thresholds = series.config.thresholds

    phases = build_phase_report(classify_series(series, thresholds), thresholds)
    text = format_transitions(phases.events)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [out_dir / "phases.json", out_dir / "transitions.txt"]
    outputs[0].write_text(phases.model_dump_json(indent=2) + "\n", encoding="utf-8")
    outputs[1].write_text(text, encoding="utf-8")
    write_manifest(
        out_dir, TOOL_VERSION, "classify", args.argv,
        {"thresholds": thresholds.model_dump(mode="json")}, [series_path], outputs,
    )

    print(text, end="")
    print(f"\nSaved to: {out_dir}")


def cmd_report(args: argparse.Namespace) -> None:
    """系列と相ラベルから人が読めるレポートを作る"""
    series = load_series(args.series)
    phases_path = Path(args.phases)
    if not phases_path.exists():
        raise FileNotFoundError(f"Phases file not found: {phases_path}")
    phases = PhaseReport.model_validate_json(phases_path.read_text(encoding="utf-8"))

    text = to_report(series, phases)
    print(text, end="")
    if args.output:
        output_path = Path(args.output)
        output_path.write_text(text, encoding="utf-8")
        print(f"\nSaved to: {output_path}")


def cmd_synth(args: argparse.Namespace) -> None:
    """合成市場の価格パネルを生成する（シナリオファイルの値はフラグで上書きできる）"""
    inputs = []
    if args.scenario:
        scenario = load_scenario(args.scenario)
        inputs.append(Path(args.scenario))
    else:
        scenario = Scenario(market=FactorMarketSpec(n_assets=DEFAULT_ASSETS, n_days=DEFAULT_DAYS))

    overrides = {
        "n_assets": args.assets,
        "n_days": args.days,
        "seed": args.seed,
        "sigma_idio": args.sigma_idio,
        "sigma_market": args.sigma_market,
    }
    market = scenario.market.model_dump()
    market.update({k: v for k, v in overrides.items() if v is not None})
    scenario = Scenario(market=FactorMarketSpec.model_validate(market), injections=scenario.injections)

    panel = build_scenario_panel(scenario)
    output_path = Path(args.output)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    write_price_panel(panel, output_path)
    write_manifest(
        output_path.parent, TOOL_VERSION, "synth", args.argv,
        scenario.model_dump(mode="json"), inputs, [output_path],
    )
    print(f"Generated {len(panel.tickers)} assets x {panel.n_dates} days")
    print(f"Saved to: {output_path}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="souteni",
        description="Phase transitions in correlation-based minimal spanning tree networks",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log pipeline progress")
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # scan command
    scan_parser = subparsers.add_parser("scan", help="Rolling-window MST scan")
    _add_window_options(scan_parser)
    scan_parser.add_argument(
        "--window",
        type=_widths,
        help="Window width(s) in trading days, e.g. 400 or 300,350,400",
    )
    scan_parser.add_argument("--step", type=int, help="Scanning step in trading days")
    scan_parser.add_argument("--tol", type=float, help="MOL coincidence tolerance (default: 0.05)")
    scan_parser.add_argument(
        "--workers",
        type=int,
        help="Concurrent window evaluations (default: $SOUTENI_WORKERS or 1)",
    )
    scan_parser.add_argument(
        "--start", dest="range_start", type=date.fromisoformat, help="First window start (ISO date)"
    )
    scan_parser.add_argument(
        "--end", dest="range_end", type=date.fromisoformat, help="Last date a window may cover"
    )
    scan_parser.add_argument(
        "--dump-trees", action="store_true", help="Write every window's MST under trees/"
    )
    scan_parser.set_defaults(func=cmd_scan)

    # tree command
    tree_parser = subparsers.add_parser("tree", help="Inspect a single window's MST")
    _add_window_options(tree_parser)
    tree_parser.add_argument(
        "--start", required=True, type=date.fromisoformat, help="Window start (ISO date)"
    )
    tree_parser.add_argument("--length", required=True, type=int, help="Window length in trading days")
    tree_parser.add_argument(
        "--dump-matrix", action="store_true", help="Also write the correlation matrix"
    )
    tree_parser.set_defaults(func=cmd_tree)

    # classify command
    classify_parser = subparsers.add_parser("classify", help="Label phases and transitions")
    classify_parser.add_argument("--series", required=True, help="series.json from scan")
    classify_parser.add_argument("--config", help="JSON config file with a thresholds object")
    classify_parser.add_argument("--out", required=True, help="Output directory")
    classify_parser.set_defaults(func=cmd_classify)

    # report command
    report_parser = subparsers.add_parser("report", help="Human-readable report")
    report_parser.add_argument("--series", required=True, help="series.json from scan")
    report_parser.add_argument("--phases", required=True, help="phases.json from classify")
    report_parser.add_argument("-o", "--output", help="Also write the report to this file")
    report_parser.set_defaults(func=cmd_report)

    # synth command
    synth_parser = subparsers.add_parser("synth", help="Generate a synthetic price panel")
    synth_parser.add_argument("--scenario", help="JSON scenario (market spec + injections)")
    synth_parser.add_argument("--assets", type=int, help=f"Number of assets (default: {DEFAULT_ASSETS})")
    synth_parser.add_argument("--days", type=int, help=f"Number of trading days (default: {DEFAULT_DAYS})")
    synth_parser.add_argument("--seed", type=int, help="Random seed (default: 0)")
    synth_parser.add_argument(
        "--sigma-idio", type=float, help=f"Idiosyncratic volatility (default: {DEFAULT_SIGMA_IDIO})"
    )
    synth_parser.add_argument(
        "--sigma-market", type=float, help=f"Market volatility (default: {DEFAULT_SIGMA_MARKET})"
    )
    synth_parser.add_argument("-o", "--output", required=True, help="Output price CSV")
    synth_parser.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> None:
    # CLIのメインエントリーポイント（サブコマンドのディスパッチと終了コードの決定）
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = list(sys.argv[1:] if argv is None else argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        args.func(args)
    except UsageError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    except (FileNotFoundError, DataError, ValidationError) as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_DATA)
    except OSError as e:
        print(f"Error: cannot read or write {e.filename}: {e.strerror}", file=sys.stderr)
        sys.exit(EXIT_DATA)
    except Exception as e:
        logger.exception("Internal error")
        print(f"Error: internal error: {e}", file=sys.stderr)
        sys.exit(EXIT_INTERNAL)


if __name__ == "__main__":
    main()
