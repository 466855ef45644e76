"""Deterministic CSV/JSON writers, trace readers and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError

MANIFEST = "manifest.json"


def fmt(x):
    """Shortest round-trip text for a number; booleans as 0/1."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def write_table(path: Path, columns, rows, fmt_kind="csv"):
    """Write ``rows`` (sequences matching ``columns``) as CSV or a JSON record list."""
    path = Path(path)
    if fmt_kind == "json":
        path = path.with_suffix(".json")
        records = [dict(zip(columns, map(_jsonable, r))) for r in rows]
        path.write_text(json.dumps(records, indent=1) + "\n")
        return path
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=1, sort_keys=True) + "\n")
    return path


def read_columns(path, required):
    """Read a headered CSV into a dict of float arrays; ``required`` columns must exist."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    missing = [c for c in required if c not in header]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {missing}; header is {header}")
    out = {}
    for c in header:
        try:
            out[c] = np.array([float(r[c]) for r in rows])
        except (TypeError, ValueError):
            if c in required:
                raise ConfigError(f"{path}: non-numeric value in column {c!r}") from None
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def now_iso():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir: Path, command, argv, config_path, config_digest, seed, started,
                   outputs):
    out_dir = Path(out_dir)
    files = [{"path": str(Path(p).relative_to(out_dir)), "sha256": sha256_file(p)}
             for p in outputs]
    manifest = {"tool": "kipamp", "version": __version__, "command": command, "argv": list(argv),
                "config": config_path, "config_sha256": config_digest, "seed": seed,
                "started": started, "finished": now_iso(), "outputs": files}
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


def verify_manifest(out_dir: Path):
    """Return a list of problems (empty when every listed output matches its digest)."""
    out_dir = Path(out_dir)
    mpath = out_dir / MANIFEST
    if not mpath.exists():
        raise ConfigError(f"no {MANIFEST} in {out_dir}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{mpath}: not valid JSON ({exc.msg})") from exc
    problems = []
    for entry in manifest.get("outputs", []):
        p = out_dir / entry["path"]
        if not p.exists():
            problems.append(f"missing: {entry['path']}")
        elif sha256_file(p) != entry["sha256"]:
            problems.append(f"modified: {entry['path']}")
    cfg = manifest.get("config")
    if cfg and Path(cfg).exists() and manifest.get("config_sha256"):
        if hashlib.sha256(Path(cfg).read_bytes()).hexdigest() != manifest["config_sha256"]:
            problems.append(f"config changed: {cfg}")
    return problems
