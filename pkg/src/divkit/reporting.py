"""JSON and CSV renderings of verification results.

Reports are plain dicts with a fixed key order, so identical inputs give
byte-identical output. Non-finite floats become ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .config import REPORT_SCHEMA_VERSION
from .core import logger


def clean(value: Any) -> Any:
    """Recursively convert models, arrays and Fractions into JSON-safe values."""
    if isinstance(value, BaseModel):
        return clean(value.model_dump())
    if isinstance(value, Mapping):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [clean(v) for v in value.tolist()]
    if isinstance(value, Fraction):
        return clean(float(value))
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


def build_report(
    command: str,
    *,
    seed: Optional[int] = None,
    tolerance: Optional[float] = None,
    chains: Sequence[BaseModel] = (),
    scans: Sequence[BaseModel] = (),
    **extras: Any,
) -> Dict[str, Any]:
    report: Dict[str, Any] = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "tolerance": tolerance,
        "chains": [_chain_entry(c) for c in chains],
        "scans": [clean(s) for s in scans],
    }
    for key, value in extras.items():
        report[key] = clean(value)
    return report


def _chain_entry(report: BaseModel) -> Dict[str, Any]:
    entry = clean(report)
    entry["passed"] = bool(getattr(report, "passed", True))
    return entry


def render_json(report: Mapping[str, Any]) -> str:
    return json.dumps(clean(report), indent=2, allow_nan=False) + "\n"


def format_number(value: Optional[float]) -> str:
    """17 significant digits; enough to round-trip a double."""
    if value is None or not math.isfinite(value):
        return "nan" if value is None else str(value)
    return f"{value:.17g}"


def render_table(rows: Iterable[Tuple[str, Optional[float]]]) -> str:
    lines = [f"{label}\t{format_number(value)}" for label, value in rows]
    return "\n".join(lines) + "\n"


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def plot_rows(series: Mapping[str, Tuple[np.ndarray, np.ndarray]]) -> List[Tuple[str, float, float]]:
    """Long-format (function, x, value) rows, functions in the given order."""
    rows: List[Tuple[str, float, float]] = []
    for name, (xs, values) in series.items():
        rows.extend((name, float(x), float(v)) for x, v in zip(xs, np.asarray(values, dtype=float)))
    return rows


def render_plot_csv(series: Mapping[str, Tuple[np.ndarray, np.ndarray]]) -> str:
    return render_csv(("function", "x", "value"), plot_rows(series))


def write_output(text: str, path: Optional[str] = None) -> Optional[str]:
    """Write to ``path`` or stdout; returns the path written, if any."""
    if not path:
        print(text, end="")
        return None
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as f:
        f.write(text)
    logger.info("report written", path=str(target), bytes=len(text))
    return str(target)
