"""``modfly`` command line: optimize, enumerate, eval, simulate, compare.

Exit codes: 0 success, 1 input error, 2 GA did not converge within its
generation budget, 3 structure is rank deficient, 4 simulation diverged.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .dynamics import FitnessParams, evaluation_report, fitness
from .enumeration import enumerate_all
from .errors import (Diverged, InputError, InvalidAim, InvalidParams, Overlap, RankDeficient,
                     Stalled, TooLarge)
from .ga import evolve
from .io import (config_snapshot, default_out_root, load_enumerate_config, load_fitness_config,
                 load_optimize_config,
                 load_sim_config, now_iso, read_aim, read_csv, read_manifest, read_roster,
                 write_aim, write_csv, write_json, write_manifest, write_timeseries, write_timing,
                 write_trace)
from .sim import SimConfig, track
from .structure import pos_tree_search

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_RANK, EXIT_DIVERGED = 0, 1, 2, 3, 4


def _out_dir(args, command: str) -> Path:
    out = Path(args.out) if args.out else default_out_root() / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_size(roster, aim):
    if len(roster) != aim.n:
        raise InputError(f"roster has {len(roster)} modules but the AIM has {aim.n}")


def cmd_optimize(args) -> int:
    cfg = load_optimize_config(args.config)
    ga = cfg["ga"]
    if args.seed is not None:
        ga = dataclasses.replace(ga, seed=args.seed)
    ga.validate()
    cfg["ga"] = ga
    roster = read_roster(cfg["roster"])
    out = _out_dir(args, "optimize")
    started = now_iso()
    t0 = time.perf_counter()
    best, trace = evolve(roster, ga, cfg["fitness"], cfg["l"], threads=args.threads)
    wall = time.perf_counter() - t0
    write_aim(out / "best.aim", best.aim, cfg["l"])
    layout = pos_tree_search(best.aim, roster, cfg["l"])
    report = evaluation_report(layout, cfg["fitness"])
    report.update(n=len(roster), generations=trace.generations, converged=trace.converged,
                  canonical_key=best.key.hex())
    write_json(out / "report.json", report)
    write_trace(out / "trace.csv", trace)
    write_timing(out / "timing.csv", trace)
    write_manifest(out, "optimize", config_snapshot(cfg), ga.seed, __version__, [cfg["roster"]],
                   started, {"wall_seconds": wall})
    print(f"best fitness {report['fitness']!r} after {trace.generations} generations "
          f"({'converged' if trace.converged else 'budget exhausted'}); wrote {out}")
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def cmd_enumerate(args) -> int:
    cfg = load_enumerate_config(args.config)
    roster = read_roster(cfg["roster"])
    out = _out_dir(args, "enumerate")
    started = now_iso()
    res = enumerate_all(roster, cfg["l"], cfg["fitness"], cfg["n_cap"], workers=args.threads)
    write_aim(out / "best.aim", res.best.aim, cfg["l"])
    layout = pos_tree_search(res.best.aim, roster, cfg["l"])
    report = evaluation_report(layout, cfg["fitness"])
    report.update(n=len(roster), count_raw=res.count_raw, count_canonical=res.count_canonical,
                  canonical_key=res.best.key.hex())
    write_json(out / "report.json", report)
    row = res.as_row()
    write_csv(out / "speed.csv", list(row), [list(row.values())])
    write_manifest(out, "enumerate", config_snapshot(cfg), None, __version__, [cfg["roster"]],
                   started, {"wall_seconds": res.wall_time})
    print(f"{res.count_canonical} classes ({res.count_raw} raw), best fitness "
          f"{res.best.fitness.value!r}; wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    aim, l = read_aim(args.aim)
    roster = read_roster(args.roster)
    _check_size(roster, aim)
    layout = pos_tree_search(aim, roster, l)
    fit = load_fitness_config(args.config) if args.config else FitnessParams()
    # -inf fitness is written as -Infinity, which Python's json reads back
    print(json.dumps(evaluation_report(layout, fit), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_sim_config(args.config) if args.config else {"sim": SimConfig()}
    aim_path = args.aim or cfg.get("aim")
    roster_path = args.roster or cfg.get("roster")
    if aim_path is None or roster_path is None:
        raise InputError("simulate needs an AIM file and a roster (arguments or config)")
    cfg["aim"], cfg["roster"] = Path(aim_path), Path(roster_path)
    aim, l = read_aim(aim_path)
    roster = read_roster(roster_path)
    _check_size(roster, aim)
    layout = pos_tree_search(aim, roster, l)
    out = _out_dir(args, "simulate")
    started = now_iso()
    t0 = time.perf_counter()
    res = track(layout, None, cfg["sim"])
    wall = time.perf_counter() - t0
    summary = res.summary()
    summary.update(n=aim.n, fitness=fitness(layout).value)
    write_json(out / "summary.json", summary)
    write_timeseries(out / "timeseries.csv", res)
    write_manifest(out, "simulate", config_snapshot(cfg), None, __version__,
                   [aim_path, roster_path], started, {"wall_seconds": wall})
    print(f"pos_rms {res.pos_rms!r} m, att_rms {res.att_rms!r} rad, energy {res.energy!r}; "
          f"wrote {out}")
    return EXIT_OK


COMPARE_COLUMNS = ["n", "ga_best_fitness", "ga_generations", "ga_seconds",
                   "enum_best_fitness", "enum_count_raw", "enum_count_canonical", "enum_seconds",
                   "sim_fitness", "sim_pos_rms", "sim_att_rms", "sim_energy"]


def _compare_fields(directory: Path, manifest: dict) -> tuple[int, str, dict]:
    cmd = manifest.get("command")
    if cmd == "optimize":
        rep = json.loads((directory / "report.json").read_text())
        return rep["n"], "ga", {"ga_best_fitness": rep["fitness"],
                                "ga_generations": rep["generations"],
                                "ga_seconds": manifest.get("wall_seconds")}
    if cmd == "enumerate":
        row = read_csv(directory / "speed.csv")[0]
        return int(row["n"]), "enum", {"enum_best_fitness": float(row["best_fitness"]),
                                       "enum_count_raw": int(row["count_raw"]),
                                       "enum_count_canonical": int(row["count_canonical"]),
                                       "enum_seconds": float(row["seconds"])}
    if cmd == "simulate":
        s = json.loads((directory / "summary.json").read_text())
        return s["n"], "sim", {"sim_fitness": s["fitness"], "sim_pos_rms": s["pos_rms"],
                               "sim_att_rms": s["att_rms"], "sim_energy": s["energy"]}
    raise InputError(f"{directory}/manifest.json: cannot compare command {cmd!r}")


def cmd_compare(args) -> int:
    """Join run directories into one CSV, one row per n (more rows if a kind repeats for an n)."""
    groups: dict[int, dict[str, list]] = {}
    for d in sorted(set(args.dirs)):
        directory = Path(d)
        n, kind, fields = _compare_fields(directory, read_manifest(directory))
        groups.setdefault(n, {}).setdefault(kind, []).append(fields)
    rows = []
    for n in sorted(groups):
        kinds = groups[n]
        for k in range(max(len(v) for v in kinds.values())):
            row = {"n": n}
            for items in kinds.values():
                if k < len(items):
                    row.update(items[k])
            rows.append([row.get(c) for c in COMPARE_COLUMNS])
    out = _out_dir(args, "compare")
    write_csv(out / "compare.csv", COMPARE_COLUMNS, rows)
    write_manifest(out, "compare", {"dirs": sorted(str(Path(d).resolve()) for d in args.dirs)},
                   None, __version__, [Path(d) / "manifest.json" for d in sorted(set(args.dirs))],
                   now_iso())
    print(f"{len(rows)} rows; wrote {out / 'compare.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (a manifest.json also works)")
    common.add_argument("--seed", type=int, help="override the GA seed")
    common.add_argument("--out", help="output directory (default: $MODFLY_OUT/<command>)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for fitness evaluation")

    p = argparse.ArgumentParser(prog="modfly", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("optimize", parents=[common], help="run the GA on a roster")
    sub.add_parser("enumerate", parents=[common], help="exhaustive search for small rosters")
    e = sub.add_parser("eval", parents=[common], help="print the evaluation report of one AIM")
    e.add_argument("aim")
    e.add_argument("roster")
    s = sub.add_parser("simulate", parents=[common], help="fly one structure along a trajectory")
    s.add_argument("aim", nargs="?")
    s.add_argument("roster", nargs="?")
    c = sub.add_parser("compare", parents=[common], help="merge run directories into one CSV")
    c.add_argument("dirs", nargs="+")
    return p


COMMANDS = {"optimize": cmd_optimize, "enumerate": cmd_enumerate, "eval": cmd_eval,
            "simulate": cmd_simulate, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("optimize", "enumerate") and not args.config:
        print(f"modfly {args.command}: --config is required", file=sys.stderr)
        return EXIT_INPUT
    if args.threads < 1:
        print("modfly: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except RankDeficient as exc:
        print(f"modfly {args.command}: rank deficient: {exc}", file=sys.stderr)
        return EXIT_RANK
    except Diverged as exc:
        print(f"modfly {args.command}: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except Stalled as exc:
        print(f"modfly {args.command}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (InputError, InvalidAim, InvalidParams, TooLarge, Overlap, ValueError) as exc:
        print(f"modfly {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
