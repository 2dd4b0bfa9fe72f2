"""Reproducible CSV / JSON output with provenance headers, and readers
that reconstruct the written values exactly."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from fractions import Fraction
from pathlib import Path

import numpy as np

from ptrabi import __version__

ARTIFACT = "ptrabi"
OUTPUT_DIR_ENV = "PTRABI_OUTPUT_DIR"


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def format_value(value) -> str:
    """Cell text: floats with 17 significant digits, everything else via str."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return str(value)


def parse_value(text: str):
    """Inverse of ``format_value`` for the types it emits."""
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def jsonable(value):
    """Recursively convert numpy / complex / Fraction / enum values to JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [jsonable(value.real), jsonable(value.imag)]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, Fraction):
        return format_value(value)
    if hasattr(value, "value") and isinstance(value.value, str):
        return value.value
    return value


def provenance(command: str, params: dict, tolerances: dict | None = None) -> dict:
    return {
        "artifact": ARTIFACT,
        "version": __version__,
        "command": command,
        "params": jsonable(params),
        "tolerances": jsonable(tolerances or {}),
    }


def write_csv(path, header: list, rows, meta: dict) -> str:
    """Write ``rows`` under ``header`` preceded by ``# key: json`` lines.

    ``path`` may be None, in which case the text is only returned.
    """
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {json.dumps(jsonable(value))}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(source) -> tuple[dict, list, list]:
    """Parse text or a file written by ``write_csv``.

    Returns ``(meta, header, rows)`` with cells converted back by
    ``parse_value``.
    """
    text = source if "\n" in str(source) else Path(source).read_text()
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        elif line:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = [[parse_value(cell) for cell in row] for row in reader]
    return meta, header, rows


def write_json(path, report: dict) -> str:
    text = json.dumps(jsonable(report), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_json(source) -> dict:
    text = source if str(source).lstrip().startswith("{") else Path(source).read_text()
    return json.loads(text)
