"""File formats: rosters, AIM files, run configs, CSV outputs and run manifests.

All text outputs use '.' decimals, LF line endings and ``repr`` floats, so a
value written and read back is bit-identical and repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any, Iterable, Sequence

from .dynamics import FitnessParams
from .errors import InputError, InvalidAim
from .ga import GaParams
from .sim import SimConfig, Trajectory
from .structure import Aim, ModuleSpec, validate_aim

ROSTER_HEADER = ["id", "mass_kg", "Jx", "Jy", "Jz"]


def fmt(v) -> str:
    """Shortest round-tripping text for a number."""
    if isinstance(v, (bool, str)):
        return str(v)
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


# ---------------------------------------------------------------------------
# roster
# ---------------------------------------------------------------------------

def read_roster(path) -> list[ModuleSpec]:
    """Parse a roster CSV (``id,mass_kg,Jx,Jy,Jz``; '#' starts a comment line).

    Rows may come in any order; ids must cover 1..n exactly once.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read roster ({exc.strerror})") from exc
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        if not header_seen:
            header_seen = True
            if fields != ROSTER_HEADER:
                raise InputError(f"{path}:{lineno}: expected header {','.join(ROSTER_HEADER)}")
            continue
        if len(fields) != 5:
            raise InputError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
        try:
            mid = int(fields[0])
            vals = [float(f) for f in fields[1:]]
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric field in {line.strip()!r}") from None
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise InputError(f"{path}:{lineno}: mass and inertias must be finite and > 0")
        rows.append((lineno, mid, vals))
    if not rows:
        raise InputError(f"{path}: roster has no modules")
    seen: dict[int, int] = {}
    for lineno, mid, _ in rows:
        if mid in seen:
            raise InputError(f"{path}:{lineno}: duplicate module id {mid} (first on line {seen[mid]})")
        seen[mid] = lineno
    n = len(rows)
    for lineno, mid, _ in rows:
        if not 1 <= mid <= n:
            raise InputError(f"{path}:{lineno}: module id {mid} outside 1..{n}")
    missing = sorted(set(range(1, n + 1)) - set(seen))
    if missing:
        raise InputError(f"{path}: missing module ids {missing}")
    rows.sort(key=lambda r: r[1])
    return [ModuleSpec(mid, v[0], (v[1], v[2], v[3])) for _, mid, v in rows]


def write_roster(path, roster: Sequence[ModuleSpec]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROSTER_HEADER)
        for m in roster:
            w.writerow([m.id, fmt(m.mass)] + [fmt(j) for j in m.inertia_diag])


# ---------------------------------------------------------------------------
# AIM files
# ---------------------------------------------------------------------------

def format_aim(aim: Aim, l: float = 1.0) -> str:
    lines = [f"n={aim.n} l={fmt(l)}"]
    lines += [" ".join(str(v) for v in row) for row in aim.rows]
    return "\n".join(lines) + "\n"


def write_aim(path, aim: Aim, l: float = 1.0) -> None:
    Path(path).write_text(format_aim(aim, l))


def read_aim(path) -> tuple[Aim, float]:
    """Parse an AIM file; raises InputError for syntax, InvalidAim for a bad tree."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise InputError(f"{path}: cannot read AIM file ({exc.strerror})") from exc
    if not lines:
        raise InputError(f"{path}:1: empty AIM file")
    head = dict(tok.split("=", 1) for tok in lines[0].split() if "=" in tok)
    try:
        n, l = int(head["n"]), float(head["l"])
    except (KeyError, ValueError):
        raise InputError(f"{path}:1: expected header 'n=<int> l=<float>'") from None
    if n < 1 or not (math.isfinite(l) and l > 0):
        raise InputError(f"{path}:1: need n >= 1 and l > 0")
    body = [(i, ln) for i, ln in enumerate(lines[1:], start=2) if ln.strip()]
    if len(body) != n:
        raise InputError(f"{path}: header says n={n} but found {len(body)} rows")
    rows = []
    for lineno, ln in body:
        parts = ln.split()
        try:
            row = [int(v) for v in parts]
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-integer entry in {ln.strip()!r}") from None
        if len(row) != 4:
            raise InputError(f"{path}:{lineno}: expected 4 integers, got {len(row)}")
        rows.append(row)
    report = validate_aim(rows)
    if not report.ok:
        raise InvalidAim(report)
    return Aim(rows), l


# ---------------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------------

def _load_json(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"{path}: cannot read config ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}:1: config must be a JSON object")
    # a run manifest doubles as the config of the run it records
    if "command" in data and "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


def _section(data: dict, name: str, cls, path) -> Any:
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise InputError(f"{path}: '{name}' must be an object")
    known = set(cls.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InputError(f"{path}: unknown keys in '{name}': {unknown}")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad '{name}' section: {exc}") from None


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else (base / p)


def _check_keys(data, allowed, path):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise InputError(f"{path}: unknown top-level keys {unknown}")


def _edge_length(data, path) -> float:
    l = data.get("l", 1.0)
    if not isinstance(l, (int, float)) or not l > 0:
        raise InputError(f"{path}: 'l' must be a positive number")
    return float(l)


def load_optimize_config(path) -> dict:
    """``{"roster": ..., "l": 1.0, "ga": {GaParams}, "fitness": {FitnessParams}}``."""
    path = Path(path)
    data = _load_json(path)
    _check_keys(data, {"roster", "l", "ga", "fitness"}, path)
    if "roster" not in data:
        raise InputError(f"{path}: missing 'roster'")
    return {"roster": _resolve(path.parent, data["roster"]), "l": _edge_length(data, path),
            "ga": _section(data, "ga", GaParams, path),
            "fitness": _section(data, "fitness", FitnessParams, path)}


def load_enumerate_config(path) -> dict:
    """``{"roster": ..., "l": 1.0, "fitness": {...}, "n_cap": 8}``."""
    path = Path(path)
    data = _load_json(path)
    _check_keys(data, {"roster", "l", "fitness", "n_cap"}, path)
    if "roster" not in data:
        raise InputError(f"{path}: missing 'roster'")
    n_cap = data.get("n_cap", 8)
    if not isinstance(n_cap, int) or n_cap < 1:
        raise InputError(f"{path}: 'n_cap' must be a positive integer")
    return {"roster": _resolve(path.parent, data["roster"]), "l": _edge_length(data, path),
            "fitness": _section(data, "fitness", FitnessParams, path), "n_cap": n_cap}


def load_fitness_config(path) -> FitnessParams:
    """Only the ``fitness`` section of any run config."""
    return _section(_load_json(path), "fitness", FitnessParams, Path(path))


def load_sim_config(path) -> dict:
    """``{"aim": ..., "roster": ..., "sim": {SimConfig fields, "trajectory": {...}}}``.

    ``aim`` and ``roster`` are optional here when given on the command line.
    """
    path = Path(path)
    data = _load_json(path)
    _check_keys(data, {"aim", "roster", "sim"}, path)
    sim = dict(data.get("sim", {}))
    traj = sim.pop("trajectory", None)
    cfg = _section({"sim": sim}, "sim", SimConfig, path)
    if traj is not None:
        t = _section({"trajectory": traj}, "trajectory", Trajectory, path)
        cfg = SimConfig(**{**cfg.__dict__, "trajectory": t})
    out = {"sim": cfg}
    for key in ("aim", "roster"):
        if key in data:
            out[key] = _resolve(path.parent, data[key])
    return out


def config_snapshot(cfg: dict) -> dict:
    """JSON-ready copy of a loaded config, with absolute input paths."""
    def conv(v):
        if isinstance(v, Path):
            return str(v.resolve())
        if hasattr(v, "__dataclass_fields__"):
            return {k: conv(getattr(v, k)) for k in v.__dataclass_fields__}
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v
    return {k: conv(v) for k, v in cfg.items()}


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_trace(path, trace) -> None:
    """Per-generation trace; deterministic columns only (timings go to write_timing)."""
    write_csv(path, ["gen", "best_fitness", "mean_fitness", "retries"],
              ((g, b, m, r) for g, (b, m, r) in
               enumerate(zip(trace.best_fitness, trace.mean_fitness, trace.retries))))


def write_timing(path, trace) -> None:
    write_csv(path, ["gen", "millis"], enumerate(trace.millis))


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_timeseries(path, result) -> None:
    header = ["t", "x", "y", "z", "roll", "pitch", "yaw",
              "x_ref", "y_ref", "z_ref", "roll_ref", "pitch_ref", "yaw_ref", "thrust_sq"]
    s = result.states
    rows = ([t] + list(s[k, 0:6]) + list(result.pos_ref[k]) + list(result.att_ref[k])
            + [result.thrust_sq[k]] for k, t in enumerate(result.t))
    write_csv(path, header, rows)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


def write_manifest(out_dir, command: str, config: dict, seed, version: str,
                   inputs: Sequence, started: str, extra: dict | None = None) -> dict:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": version,
        "inputs": {str(Path(p).resolve()): sha256_file(p) for p in inputs},
        "started": started,
        "finished": now_iso(),
    }
    manifest.update(extra or {})
    write_json(Path(out_dir) / "manifest.json", manifest)
    return manifest


def read_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.is_file():
        raise InputError(f"{directory}: no manifest.json")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None


def default_out_root() -> Path:
    return Path(os.environ.get("MODFLY_OUT", "modfly_runs"))
