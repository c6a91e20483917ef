"""Tabular outputs (CSV with a ``#`` units line, or JSON) and run manifests with content digests."""

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def table_csv(columns, rows, units):
    """CSV text: ``# name [unit], ...`` header comment, column names, then rows."""
    if len(units) != len(columns):
        raise ValueError("need one unit per column")
    buf = io.StringIO()
    buf.write("# " + ", ".join(f"{c} [{u}]" for c, u in zip(columns, units)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def table_json(columns, rows, units):
    data = {"columns": list(columns), "units": list(units),
            "rows": [[float(v) if isinstance(v, (float, np.floating)) else v for v in r] for r in rows]}
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def table_text(columns, rows, units, fmt="csv"):
    if fmt == "csv":
        return table_csv(columns, rows, units)
    if fmt == "json":
        return table_json(columns, rows, units)
    raise ValueError(f"unknown format {fmt!r}")


def sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def build_manifest(config, files, summary=None):
    """Manifest with the full config echo, per-file digests and one combined content digest."""
    digests = {name: sha256_text(text) for name, text in sorted(files.items())}
    combined = hashlib.sha256("".join(f"{k}:{v}\n" for k, v in digests.items()).encode()).hexdigest()
    return {"config": _jsonable(config), "files": digests, "content_digest": combined,
            "summary": _jsonable(summary or {})}


def write_outputs(out_dir, files, config, summary=None):
    """Write all files plus ``manifest.json``; staged in a temporary directory so that a
    failure leaves no partial output behind."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(config, files, summary)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out.parent))
    try:
        for name, text in files.items():
            (stage / name).write_text(text)
        (stage / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        out.mkdir(parents=True, exist_ok=True)
        for p in stage.iterdir():
            os.replace(p, out / p.name)
    finally:
        for p in stage.iterdir():
            p.unlink()
        stage.rmdir()
    return manifest
