"""Output formats: commented CSV and JSON summaries.

Every file starts by recording the tool version and the full run
configuration (the ``workers`` count is left out because it never changes
the output).  CSV files carry them as ``#`` comment lines followed by a
single column header; JSON files carry them as the ``tool``, ``version``
and ``config`` fields.

Floats are written in their shortest round-trip form with a trailing
``.0`` dropped, so ``0.0`` reads ``0`` and every value re-parses to the
identical double.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable

from . import __version__

__all__ = ["format_float", "csv_text", "json_text", "write_text", "sha256_file", "SCHEMA_PATH", "load_schema"]

TOOL = "lgdecay"
SCHEMA_PATH = Path(__file__).with_name("schema") / "summary.schema.json"


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    s = repr(x)
    return s[:-2] if s.endswith(".0") else s


def _config_line(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def csv_text(config: dict, columns: Iterable[str], rows: Iterable[Iterable[float]], timing: float | None = None,
             time_unit: float | None = None) -> str:
    lines = [f"# {TOOL} {__version__}", f"# config: {_config_line(config)}"]
    if time_unit is not None:
        lines.append(f"# time_unit: {time_unit!r}")
    if timing is not None:
        lines.append(f"# timing_seconds: {timing!r}")
    lines.append(",".join(columns))
    lines.extend(",".join(format_float(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _clean(obj: Any) -> Any:
    # JSON has no NaN: undefined cells become null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def json_text(config: dict, results: Any, extremes: Any = None, errors: list[str] | None = None,
              timing: float | None = None) -> str:
    doc = {
        "tool": TOOL,
        "version": __version__,
        "config": config,
        "results": results,
        "extremes": extremes,
        "errors": list(errors or []),
        "timing": None if timing is None else {"seconds": timing},
    }
    return json.dumps(_clean(doc), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps bytes identical across platforms
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text())
