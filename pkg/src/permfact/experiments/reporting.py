"""Report files for benchmark runs: JSON Lines, CSV, and a run manifest.

Rows are plain dicts. Serialization is deterministic (sorted keys, repr-exact
floats), so a rerun from the manifest's config and seed reproduces the report
files byte for byte.
"""
from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

from .. import __version__

__all__ = ["write_jsonl", "write_csv", "write_report", "run_manifest"]


def _plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _plain(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item) and hasattr(obj, "dtype"):
        return obj.item()  # numpy scalar
    return obj


def write_jsonl(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(_plain(row), sort_keys=True))
            fh.write("\n")


def write_csv(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(v) for k, v in _plain(row).items()})


def _format_cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return v


def run_manifest(task: str, config, seed: int) -> dict:
    """Everything needed to reproduce a run byte-for-byte."""
    return {
        "task": task,
        "config": _plain(config),
        "seed": seed,
        "package": "permfact",
        "version": __version__,
        "format": 1,
    }


def write_report(rows: list[dict], out_dir: str | Path, name: str, manifest: dict) -> dict:
    """Write <name>.jsonl, <name>.csv and <name>.manifest.json under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "jsonl": out / f"{name}.jsonl",
        "csv": out / f"{name}.csv",
        "manifest": out / f"{name}.manifest.json",
    }
    write_jsonl(rows, paths["jsonl"])
    write_csv(rows, paths["csv"])
    paths["manifest"].write_text(json.dumps(_plain(manifest), sort_keys=True, indent=2) + "\n")
    return {k: str(v) for k, v in paths.items()}
