"""
Run Manifests
Version and provenance record written next to every command output.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable

from choice_consistency.config.app_config import APP_NAME, APP_VERSION
from choice_consistency.config.constants import Paths


def get_tool_version() -> str:
    return f"{APP_NAME} v{APP_VERSION}"


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def input_files(paths: Iterable[Path]) -> list:
    """Every input file (directories expanded), with its sha256, sorted by path."""
    files = []
    for path in paths:
        path = Path(path)
        if path.is_dir():
            files.extend(p for p in path.rglob("*") if p.is_file())
        elif path.exists():
            files.append(path)
    return [{'path': str(p), 'sha256': file_digest(p)} for p in sorted(set(files))]


def build_manifest(command: str, inputs: Iterable[Path], flags: Dict[str, Any], seed: Any) -> Dict[str, Any]:
    """Manifest without timestamps; manifest_hash covers every other field."""
    manifest = {
        'tool': APP_NAME,
        'version': APP_VERSION,
        'command': command,
        'inputs': input_files(inputs),
        'flags': {key: flags[key] for key in sorted(flags)},
        'seed': seed,
    }
    canonical = json.dumps(manifest, sort_keys=True, default=str).encode("utf-8")
    manifest['manifest_hash'] = hashlib.sha256(canonical).hexdigest()
    return manifest


def manifest_path(output: Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + Paths.MANIFEST_SUFFIX)


def write_manifest(output: Path, manifest: Dict[str, Any]) -> Path:
    path = manifest_path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path
