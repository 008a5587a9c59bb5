"""Run manifests: configuration snapshot and checksums that make a run reproducible."""

import hashlib
import logging
from pathlib import Path

from pydantic import BaseModel

logger = logging.getLogger(__name__)

# マニフェストに記録するツールのバージョン
TOOL_VERSION = "0.1.0"

MANIFEST_NAME = "manifest.json"

# チェックサム計算時の読み込みサイズ
CHUNK_BYTES = 1 << 20


class FileDigest(BaseModel):
    """ファイル名（出力先ディレクトリからの相対パス）とSHA-256"""
    path: str
    sha256: str


class RunManifest(BaseModel):
    """1回の実行の記録。時刻は含めず、同じ入力と設定なら同じ内容になる。"""
    version: str
    command: str
    argv: list[str]
    config: dict[str, object]
    inputs: list[FileDigest]
    outputs: list[FileDigest]


def sha256_file(path: Path | str) -> str:
    """ファイルのSHA-256を16進文字列で返す"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(CHUNK_BYTES), b""):
            digest.update(block)
    return digest.hexdigest()


def digest_files(paths: list[Path], base: Path | None = None) -> list[FileDigest]:
    """パス順に並べたダイジェストのリスト（base があればそこからの相対パスで記録）"""
    entries = []
    for path in paths:
        name = path.resolve().relative_to(base.resolve()).as_posix() if base else path.as_posix()
        entries.append(FileDigest(path=name, sha256=sha256_file(path)))
    return sorted(entries, key=lambda e: e.path)


def write_manifest(
    out_dir: Path | str,
    version: str,
    command: str,
    argv: list[str],
    config: dict[str, object],
    inputs: list[Path],
    outputs: list[Path],
) -> Path:
    """manifest.json を out_dir に書き出す"""
    out_dir = Path(out_dir)
    manifest = RunManifest(
        version=version,
        command=command,
        argv=list(argv),
        config=config,
        inputs=digest_files(inputs),
        outputs=digest_files(outputs, base=out_dir),
    )
    path = out_dir / MANIFEST_NAME
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("Manifest written: %s", path)
    return path


def load_manifest(path: Path | str) -> RunManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
