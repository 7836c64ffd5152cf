"""manifest.json writer shared by every run."""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from ..system_info import get_system_info

MANIFEST_NAME = "manifest.json"


def _jsonable(value: Any) -> Any:
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)
                if not isinstance(getattr(value, f.name), np.ndarray) or getattr(value, f.name).size <= 64}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return repr(value)


def write_manifest(out_dir: Union[str, Path], payload: Dict[str, Any]) -> Path:
    """Write ``payload`` plus the environment description to ``out_dir/manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    document = dict(_jsonable(payload))
    document["environment"] = get_system_info()
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(document, indent=2, sort_keys=True, allow_nan=True))
    return path
