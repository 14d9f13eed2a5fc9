"""Run manifests and deterministic JSON output."""
from __future__ import annotations

import hashlib
import json
import math
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import numpy as np
from pydantic import BaseModel, Field

from . import __version__


class RunManifest(BaseModel):
    """Everything needed to reproduce one command's outputs."""
    command: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    config_digest: str
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    version: str = __version__
    started_at: str
    finished_at: Optional[str] = None


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become None."""
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "isoformat"):
        return value.isoformat()
    return value


def dumps(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(value: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(value), encoding="utf-8", newline="\n")
    return path


def slug(text: str) -> str:
    """File-name stem for a label: lowercase ASCII runs joined by single underscores."""
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


def config_digest(parameters: Dict[str, Any]) -> str:
    return hashlib.sha256(dumps(parameters).encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class ManifestRecorder:
    """Collects inputs and outputs of one command, then writes the manifest.

    Output file names are recorded relative to the output directory.
    """

    def __init__(self, command: str, out_dir: Path, parameters: Dict[str, Any], seed: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.manifest = RunManifest(
            command=command,
            parameters=to_jsonable(parameters),
            config_digest=config_digest(parameters),
            seed=seed,
            started_at=_now(),
        )

    def add_inputs(self, paths: Iterable[str | Path]) -> None:
        for path in paths:
            if path is not None:
                self.manifest.inputs[str(path)] = sha256_file(path)

    def add_outputs(self, paths: Iterable[str | Path]) -> None:
        for path in paths:
            path = Path(path)
            try:
                name = str(path.relative_to(self.out_dir))
            except ValueError:
                name = str(path)
            self.manifest.outputs[name] = sha256_file(path)

    def write(self) -> Path:
        self.manifest.finished_at = _now()
        path = self.out_dir / f"{self.manifest.command}.manifest.json"
        write_json(self.manifest, path)
        return path
