"""Tests for report module."""

from datetime import date, timedelta

import pytest

from souteni.errors import DataError
from souteni.metrics import compute_window_metrics
from souteni.phase import PhaseKind, build_phase_report, classify_series
from souteni.report import dragon_king_episodes, regimes, to_report
from souteni.scan import ScanConfig, ScanSeries

from tests.helpers import SCALE_FREE_PROFILE, degrees_from_counts, star_tree, tree_from_degrees


def star_then_scale_free(static_center: str | None = None) -> ScanSeries:
    """星型3ウィンドウの後にべき乗則の木3ウィンドウが続く分類済み系列"""
    scale_free = tree_from_degrees(degrees_from_counts(SCALE_FREE_PROFILE))
    windows = []
    for i in range(6):
        day = date(2020, 1, 1) + timedelta(days=i)
        tree = star_tree(5) if i < 3 else scale_free
        windows.append(compute_window_metrics(tree, day, day, static_center=static_center))
    config = ScanConfig(window_length=30, step=1, static_center=static_center)
    return classify_series(ScanSeries(config=config, windows=windows))


class TestRegimes:
    """Tests for regimes and dragon_king_episodes."""

    def test_split_by_smoothed_phase(self):
        """Test consecutive equal phases form one regime."""
        series = star_then_scale_free()
        found = regimes(series, build_phase_report(series))
        assert [(r.kind, len(r.windows)) for r in found] == [
            (PhaseKind.SUPERSTAR, 3),
            (PhaseKind.SCALE_FREE, 3),
        ]
        assert found[1].first_start == date(2020, 1, 4)

    def test_dragon_king_episode(self):
        """Test a Superstar regime yields one episode with its hub."""
        series = star_then_scale_free()
        episodes = dragon_king_episodes(regimes(series, build_phase_report(series)))
        assert len(episodes) == 1
        assert episodes[0].ticker == "T000"
        assert episodes[0].peak_degree == 4
        assert episodes[0].n_windows == 3
        assert (episodes[0].first_start, episodes[0].last_start) == ("2020-01-01", "2020-01-03")

    def test_mismatched_phases(self):
        """Test phases from a different series are rejected."""
        series = star_then_scale_free()
        other = ScanSeries(config=series.config, windows=series.windows[:4])
        with pytest.raises(DataError, match="does not match"):
            regimes(series, build_phase_report(other))


class TestToReport:
    """Tests for to_report."""

    def test_sections(self):
        """Test the report lists phases, transitions, minima and dragon kings."""
        series = star_then_scale_free()
        text = to_report(series, build_phase_report(series))

        assert text.startswith("# 相転移レポート\n")
        assert "- windows: 6 evaluated, 0 skipped" in text
        assert "- 2020-01-01 .. 2020-01-03  Superstar (3 windows)" in text
        assert "1 transition(s):\n  2020-01-04  Superstar -> ScaleFree" in text
        assert "- mol_dynamic: 1 at 2020-01-01" in text
        assert "- 2020-01-01 .. 2020-01-03  T000 (peak degree 4, 3 windows)" in text
        assert "Superstar: no power-law fit" in text
        assert "ScaleFree: gamma = " in text
        assert "mol_static" not in text
        assert "一致区間" not in text

    def test_coincidence_section(self):
        """Test the static-centre section appears when configured."""
        series = star_then_scale_free(static_center="T000")
        text = to_report(series, build_phase_report(series))
        assert "## 動的・静的MOLの一致区間 (center T000, tol 0.05)" in text
        assert "- 2020-01-01 .. 2020-01-03 (3 windows)" in text
        assert "- mol_static: 1 at 2020-01-01" in text

    def test_no_transitions(self):
        """Test a single-phase series reports no transitions."""
        series = classify_series(ScanSeries(
            config=ScanConfig(window_length=30, step=1),
            windows=[
                compute_window_metrics(star_tree(5), date(2020, 1, d), date(2020, 1, d))
                for d in (1, 2, 3)
            ],
        ))
        text = to_report(series, build_phase_report(series))
        assert "## 遷移\nno transitions\n" in text
