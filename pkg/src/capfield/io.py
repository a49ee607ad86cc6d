"""JSON and CSV persistence with format tags, versions and config hashes."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .poisson import CapFunction
from .sphere import Net

NETS_FORMAT = "capfield.nets"
CAPFUNCTION_FORMAT = "capfield.capfunction"
FORMAT_VERSION = 1
CSV_VERSION = 1
CSV_MAGIC = "# capfield-csv"


class FormatError(ValueError):
    """File is not a capfield artifact of a supported version."""


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _dump(doc: dict, path) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True)
    Path(path).write_text(text + "\n")


def _load(path, fmt: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise FormatError(f"{path}: expected format {fmt!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


# ---------------------------------------------------------------------------
# nets


def nets_to_dict(nets: Sequence[Net], reports=None, config: dict | None = None) -> dict:
    config = dict(config or {})
    entries = []
    for i, net in enumerate(nets):
        entry = {"d": net.d, "level": net.level, "seed": net.seed,
                 "points": net.points.tolist()}
        if reports is not None:
            rep = reports[i]
            entry["separation_check"] = rep.min_separation
            entry["covering_gap"] = rep.covering_gap
        entries.append(entry)
    return {"format": NETS_FORMAT, "version": FORMAT_VERSION,
            "config": config, "config_hash": config_hash(config), "nets": entries}


def save_nets(nets: Sequence[Net], path, reports=None, config: dict | None = None) -> None:
    _dump(nets_to_dict(nets, reports, config), path)


def load_nets(path) -> list[Net]:
    doc = _load(path, NETS_FORMAT)
    out = []
    for entry in doc["nets"]:
        pts = np.asarray(entry["points"], dtype=float)
        d = int(entry["d"])
        if pts.ndim != 2 or pts.shape[1] != d + 1:
            raise FormatError(f"{path}: level {entry.get('level')} points have the wrong shape")
        out.append(Net(d=d, level=int(entry["level"]), points=pts, seed=int(entry.get("seed", 0))))
    return out


# ---------------------------------------------------------------------------
# cap functions


def capfunction_to_dict(f: CapFunction, config: dict | None = None) -> dict:
    config = dict(config or {})
    terms = [{"center": c.tolist(), "radius": float(r), "weight": float(w)}
             for c, r, w in zip(f.centers, f.radii, f.weights)]
    atoms = [{"point": p.tolist(), "mass": float(m)} for p, m in zip(f.atom_points, f.atom_masses)]
    return {"format": CAPFUNCTION_FORMAT, "version": FORMAT_VERSION, "d": f.d, "mode": f.mode,
            "terms": terms, "atoms": atoms, "meta": f.meta,
            "config": config, "config_hash": config_hash(config)}


def save_capfunction(f: CapFunction, path, config: dict | None = None) -> None:
    _dump(capfunction_to_dict(f, config), path)


def load_capfunction(path) -> CapFunction:
    doc = _load(path, CAPFUNCTION_FORMAT)
    d = int(doc["d"])
    terms = doc.get("terms", [])
    atoms = doc.get("atoms", [])
    return CapFunction(
        d,
        np.array([t["center"] for t in terms], dtype=float).reshape(-1, d + 1),
        [t["radius"] for t in terms],
        [t["weight"] for t in terms],
        np.array([a["point"] for a in atoms], dtype=float).reshape(-1, d + 1),
        [a["mass"] for a in atoms],
        mode=doc.get("mode", "function"),
        meta=dict(doc.get("meta", {})),
    )


# ---------------------------------------------------------------------------
# CSV


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_csv(kind: str, columns: Sequence[str], rows: Iterable[Sequence], config: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"{CSV_MAGIC} v{CSV_VERSION} kind={kind} config_hash={config_hash(dict(config or {}))}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, kind: str, columns: Sequence[str], rows: Iterable[Sequence],
              config: dict | None = None) -> None:
    Path(path).write_text(format_csv(kind, columns, rows, config))


def read_csv(path) -> tuple[dict, list[dict]]:
    """Return (header info, rows as dicts of strings); rejects unknown versions."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(CSV_MAGIC):
        raise FormatError(f"{path}: missing capfield CSV header")
    fields = lines[0][len(CSV_MAGIC):].split()
    if not fields or fields[0] != f"v{CSV_VERSION}":
        raise FormatError(f"{path}: unsupported CSV version {fields[0] if fields else '?'}")
    info = dict(f.split("=", 1) for f in fields[1:] if "=" in f)
    reader = csv.DictReader(lines[1:])
    return info, list(reader)
