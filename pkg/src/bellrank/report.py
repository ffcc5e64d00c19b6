"""Report envelope: run manifest plus a deterministic analysis section."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__

SCHEMA_VERSION = "1"


def _sha256(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    inputs: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    artifact_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.inputs],
            "config": self.config,
            "seeds": self.seeds,
            "artifact_version": self.artifact_version,
            "timestamp": self.timestamp,
        }


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False)


def build_report(manifest: RunManifest, analysis: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "manifest": jsonable(manifest.to_dict()),
        "analysis": jsonable(analysis),
    }


def analysis_bytes(report: dict) -> bytes:
    """Canonical serialization of the analysis section (what determinism is judged on)."""
    return dumps(report["analysis"]).encode("utf-8")


def load_schema() -> dict:
    text = resources.files("bellrank").joinpath("schemas/report-v1.json").read_text(encoding="utf-8")
    return json.loads(text)
