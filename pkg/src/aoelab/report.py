"""Report envelope, JSON and markdown rendering."""
from __future__ import annotations

import json
import math
from typing import Any

import jsonschema

from aoelab import __version__

SCHEMA_VERSION = "aoelab.report/1"

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "tool", "command", "config", "results", "timings"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "tool": {
            "type": "object",
            "required": ["name", "version"],
            "properties": {"name": {"const": "aoelab"}, "version": {"type": "string"}},
        },
        "command": {"enum": ["predict", "feasibility", "simulate", "verify"]},
        "config": {"type": "object"},
        "results": {"type": "object"},
        "timings": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0},
        },
    },
}


def make_report(command: str, config: dict, results: dict, timings: dict) -> dict:
    report = {
        "schema": SCHEMA_VERSION,
        "tool": {"name": "aoelab", "version": __version__},
        "command": command,
        "config": config,
        "results": _clean(results),
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    validate_report(report)
    return report


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


def _clean(obj: Any):
    """JSON-safe copy: tuples to lists, non-finite floats to strings, numpy scalars to Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def _scalar(v) -> str:
    return json.dumps(v)


def _is_scalar(v) -> bool:
    return v is None or isinstance(v, (str, int, float, bool))


def _table(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in rows:
        lines.append("| " + " | ".join(_scalar(r.get(c)) if c in r else "" for c in cols) + " |")
    return lines


def _render(obj, depth: int, lines: list[str]) -> None:
    if isinstance(obj, dict):
        scalars = {k: v for k, v in obj.items() if _is_scalar(v)}
        for k, v in scalars.items():
            lines.append(f"- **{k}**: {_scalar(v)}")
        for k, v in obj.items():
            if k in scalars:
                continue
            if isinstance(v, list) and all(_is_scalar(x) for x in v):
                lines.append(f"- **{k}**: [" + ", ".join(_scalar(x) for x in v) + "]")
                continue
            lines.append("")
            lines.append("#" * min(depth, 6) + f" {k}")
            lines.append("")
            _render(v, depth + 1, lines)
    elif isinstance(obj, list):
        if obj and all(isinstance(x, dict) and all(_is_scalar(y) for y in x.values()) for x in obj):
            lines.extend(_table(obj))
        else:
            for i, item in enumerate(obj):
                if _is_scalar(item):
                    lines.append(f"- {_scalar(item)}")
                elif isinstance(item, list) and all(_is_scalar(x) for x in item):
                    lines.append("- [" + ", ".join(_scalar(x) for x in item) + "]")
                else:
                    lines.append("")
                    lines.append("#" * min(depth, 6) + f" [{i}]")
                    lines.append("")
                    _render(item, depth + 1, lines)
    else:
        lines.append(_scalar(obj))


def to_markdown(report: dict) -> str:
    """Markdown view of a report. Every number is printed exactly as in the JSON."""
    lines = [f"# aoelab {report['command']} report", ""]
    lines.append(f"- **schema**: {_scalar(report['schema'])}")
    lines.append(f"- **version**: {_scalar(report['tool']['version'])}")
    for section in ("config", "results", "timings"):
        lines += ["", f"## {section}", ""]
        _render(report[section], 3, lines)
    return "\n".join(lines) + "\n"


def render(report: dict, fmt: str) -> str:
    return to_markdown(report) if fmt == "md" else to_json(report)
