"""Tests for manifest module."""

import hashlib

import pytest

from souteni.manifest import (
    MANIFEST_NAME,
    TOOL_VERSION,
    digest_files,
    load_manifest,
    sha256_file,
    write_manifest,
)


class TestManifest:
    """Tests for run manifests."""

    def test_sha256_file(self, tmp_path):
        """Test file digests match hashlib."""
        path = tmp_path / "data.bin"
        path.write_bytes(b"souteni")
        assert sha256_file(path) == hashlib.sha256(b"souteni").hexdigest()

    def test_outputs_relative_and_sorted(self, tmp_path):
        """Test outputs are recorded relative to the output directory in path order."""
        (tmp_path / "trees").mkdir()
        b = tmp_path / "series.csv"
        a = tmp_path / "trees" / "2020-01-01.csv"
        b.write_text("b")
        a.write_text("a")
        entries = digest_files([b, a], base=tmp_path)
        assert [e.path for e in entries] == ["series.csv", "trees/2020-01-01.csv"]

    def test_write_and_load(self, tmp_path):
        """Test a written manifest reloads with its fields."""
        source = tmp_path / "prices.csv"
        source.write_text("date,ticker,close\n")
        out = tmp_path / "out"
        out.mkdir()
        result = out / "series.csv"
        result.write_text("x\n")

        path = write_manifest(
            out, TOOL_VERSION, "scan", ["scan", "--step", "5"], {"step": 5}, [source], [result]
        )
        assert path == out / MANIFEST_NAME

        manifest = load_manifest(path)
        assert manifest.version == TOOL_VERSION
        assert manifest.argv == ["scan", "--step", "5"]
        assert manifest.config == {"step": 5}
        assert manifest.outputs[0].path == "series.csv"
        assert manifest.inputs[0].sha256 == sha256_file(source)

    def test_same_run_same_manifest(self, tmp_path):
        """Test manifests carry no timestamps."""
        result = tmp_path / "series.csv"
        result.write_text("x\n")
        first = write_manifest(tmp_path, TOOL_VERSION, "scan", [], {}, [], [result]).read_bytes()
        second = write_manifest(tmp_path, TOOL_VERSION, "scan", [], {}, [], [result]).read_bytes()
        assert first == second

    def test_missing_manifest(self, tmp_path):
        """Test a missing manifest names the path."""
        with pytest.raises(FileNotFoundError, match="manifest.json"):
            load_manifest(tmp_path / "manifest.json")
