# パッケージの公開APIを定義する
from .cli import main
from .correlation import CorrelationMatrix, DistanceMatrix, pearson_matrix, to_distance
from .errors import DataError, SouteniError
from .ingest import (
    PricePanel,
    ReturnPanel,
    load_price_panel,
    log_returns_detrended,
    window_survivors,
)
from .manifest import TOOL_VERSION, RunManifest
from .metrics import (
    DegreeDistribution,
    PowerLawFit,
    WindowMetrics,
    central_vertex,
    degree_distribution,
    degree_entropy,
    degree_gaps,
    efficient_entropy,
    fit_power_law,
    mean_occupation_layer,
    mean_tree_length,
)
from .mst import Tree, degrees, kruskal_mst, levels, prim_mst
from .phase import (
    PhaseKind,
    PhaseLabel,
    PhaseThresholds,
    TransitionEvent,
    classify,
    detect_dragon_king,
    transitions,
)
from .report import to_report
from .scan import ScanConfig, ScanSeries, absolute_minimum, coincidence_interval, run_scan
from .synth import (
    FactorMarketSpec,
    Scenario,
    SuperhubInjection,
    gen_factor_market,
    gen_pa_tree,
    inject_superhub,
)

__version__ = TOOL_VERSION

__all__ = [
    "main",
    "CorrelationMatrix",
    "DataError",
    "DegreeDistribution",
    "DistanceMatrix",
    "FactorMarketSpec",
    "PhaseKind",
    "PhaseLabel",
    "PhaseThresholds",
    "PowerLawFit",
    "PricePanel",
    "ReturnPanel",
    "RunManifest",
    "ScanConfig",
    "ScanSeries",
    "Scenario",
    "SouteniError",
    "SuperhubInjection",
    "TransitionEvent",
    "Tree",
    "WindowMetrics",
    "absolute_minimum",
    "central_vertex",
    "classify",
    "coincidence_interval",
    "degree_distribution",
    "degree_entropy",
    "degree_gaps",
    "degrees",
    "detect_dragon_king",
    "efficient_entropy",
    "fit_power_law",
    "gen_factor_market",
    "gen_pa_tree",
    "inject_superhub",
    "kruskal_mst",
    "levels",
    "load_price_panel",
    "log_returns_detrended",
    "mean_occupation_layer",
    "mean_tree_length",
    "pearson_matrix",
    "prim_mst",
    "run_scan",
    "to_distance",
    "to_report",
    "transitions",
    "window_survivors",
]
