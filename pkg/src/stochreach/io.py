"""Deterministic writing of tables, JSON documents and the run manifest."""
from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__


def plain(obj):
    """Recursively convert numpy scalars and arrays to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(target, header, rows):
    """Write to a path, or to an open text stream."""
    if hasattr(target, "write"):
        w = csv.writer(target, lineterminator="\n")
        w.writerow(header)
        w.writerows([format_cell(v) for v in r] for r in rows)
        return
    with open(target, "w", newline="") as fh:
        write_csv(fh, header, rows)


def dump_json(obj):
    return json.dumps(plain(obj), sort_keys=True, indent=1, allow_nan=True) + "\n"


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions():
    return {"stochreach": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def emit_results(bundle, out_dir, config=None, seed=None):
    """Write every table and document of ``bundle`` plus ``manifest.json``; return the manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {}
        for name, (header, rows) in sorted(bundle.tables.items()):
            write_csv(out / name, header, rows)
            files[name] = sha256(out / name)
        for name, doc in sorted(bundle.documents.items()):
            (out / name).write_text(dump_json(doc))
            files[name] = sha256(out / name)
        manifest = {"name": bundle.name, "config": config or {}, "seed": seed,
                    "versions": versions(), "files": files,
                    "summary": bundle.summary, "checks": bundle.checks}
        (out / "manifest.json").write_text(dump_json(manifest))
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return plain(manifest)
