"""Command line entry point: ``wsnloc gen|run|compare|fingerprint|version``.

Exit status is 0 on success, 1 on validation errors and 2 on runtime errors.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ContractError, InvalidConfigError, LocalizationError
from .fingerprint import (
    FingerprintDb,
    build_cellsense,
    cellsense_locate,
    knn_locate,
    load_db,
    read_survey,
    save_db,
    survey_readings,
    write_survey,
)
from .harness import export, format_table, load_scenario, run_scenario, shipped_scenario, skeleton, summary_doc
from .propagation import PathLossParams, rssi_matrix
from .world import random_walk_trajectory, Position


def _cmd_gen(args):
    text = json.dumps(skeleton(args.kind), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _resolve_scenario(name):
    """A file path, or the name of a bundled scenario such as ``fig2a``."""
    path = Path(name)
    if path.exists() or path.suffix:
        return path
    try:
        return shipped_scenario(name)
    except FileNotFoundError:
        return path


def _cmd_run(args):
    scenario = load_scenario(_resolve_scenario(args.scenario))
    results = run_scenario(scenario, seeds=args.seeds, n_jobs=args.jobs)
    out = Path(args.out) if args.out else Path("results") / scenario.name
    export(results, out)
    rows = summary_doc(results)["table"]
    print(format_table(rows))
    print(f"wrote {out}")


def _load_summary(path):
    path = Path(path)
    if path.is_dir():
        path = path / "summary.json"
    return json.loads(path.read_text())


def _cmd_compare(args):
    rows = []
    for p in args.results:
        rows.extend(_load_summary(p)["table"])
    print(format_table(rows))
    if args.csv:
        cols = ["scenario", "algorithm", "mean_error", "rms_error", "runtime_ms", "seeds", "n"]
        lines = [",".join(cols)] + [",".join(str(r[c]) for c in cols) for r in rows]
        Path(args.csv).write_text("\n".join(lines) + "\n")


def _parse_reading(items):
    out = {}
    for item in items:
        tower, _, value = item.partition("=")
        if not value:
            raise InvalidConfigError(f"reading must look like TOWER=DBM, got {item!r}")
        tower = int(tower) if tower.lstrip("-").isdigit() else tower
        out.setdefault(tower, []).append(float(value))
    return out


def _cmd_fp_build(args):
    rows = read_survey(args.survey)
    if args.method == "knn":
        db = FingerprintDb.from_readings(survey_readings(rows))
    else:
        samples = [(pos, tower, rssi) for _, pos, tower, rssi in rows]
        db = build_cellsense(samples, tuple(args.bounds), args.cell_size, args.bin_width)
    save_db(db, args.out)
    print(f"wrote {args.out}")


def _cmd_fp_locate(args):
    db = load_db(args.db)
    streams = _parse_reading(args.reading)
    if isinstance(db, FingerprintDb):
        reading = {t: float(np.mean(v)) for t, v in streams.items()}
        pos = knn_locate(db, reading, args.k)
    else:
        pos = cellsense_locate(db, streams)
    print(f"{pos.x:.6f} {pos.y:.6f} {pos.z:.6f}")


def _cmd_fp_simulate(args):
    rng = np.random.default_rng(args.seed)
    bounds = tuple(args.bounds)
    towers = rng.uniform((0, 0), bounds, size=(args.towers, 2))
    radio = PathLossParams(args.ref_power, args.exponent, args.shadow_sigma)
    start = Position(*rng.uniform((0, 0), bounds))
    path = random_walk_trajectory(start, args.steps, args.walk_sigma, bounds, rng).positions[:, :2]
    rssi = rssi_matrix(path, towers, radio, rng)
    rows = [(t, x, y, j, rssi[t, j]) for t, (x, y) in enumerate(path) for j in range(args.towers)]
    write_survey(args.out, rows)
    print(f"wrote {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="wsnloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="emit a scenario skeleton")
    g.add_argument("--kind", choices=["static", "track", "gsm", "gps"], default="static")
    g.add_argument("--out")
    g.set_defaults(func=_cmd_gen)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario", help="scenario file or bundled scenario name")
    r.add_argument("--out")
    r.add_argument("--seeds", type=int, nargs="+")
    r.add_argument("--jobs", type=int, default=None)
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("compare", help="tabulate summaries of earlier runs")
    c.add_argument("results", nargs="+", help="result directories or summary.json files")
    c.add_argument("--csv")
    c.set_defaults(func=_cmd_compare)

    f = sub.add_parser("fingerprint", help="build or query fingerprint databases")
    fsub = f.add_subparsers(dest="fp_command", required=True)
    fb = fsub.add_parser("build")
    fb.add_argument("survey")
    fb.add_argument("--method", choices=["knn", "cellsense"], default="knn")
    fb.add_argument("--out", required=True)
    fb.add_argument("--bounds", type=float, nargs=2, default=(1000.0, 1000.0))
    fb.add_argument("--cell-size", type=float, default=100.0)
    fb.add_argument("--bin-width", type=float, default=5.0)
    fb.set_defaults(func=_cmd_fp_build)
    fl = fsub.add_parser("locate")
    fl.add_argument("db")
    fl.add_argument("--reading", nargs="+", required=True, metavar="TOWER=DBM")
    fl.add_argument("-k", type=int, default=1)
    fl.set_defaults(func=_cmd_fp_locate)
    fs = fsub.add_parser("simulate", help="write a synthetic survey CSV")
    fs.add_argument("--out", required=True)
    fs.add_argument("--seed", type=int, default=0)
    fs.add_argument("--towers", type=int, default=4)
    fs.add_argument("--steps", type=int, default=200)
    fs.add_argument("--bounds", type=float, nargs=2, default=(1000.0, 1000.0))
    fs.add_argument("--walk-sigma", type=float, default=50.0)
    fs.add_argument("--ref-power", type=float, default=-30.0)
    fs.add_argument("--exponent", type=float, default=3.0)
    fs.add_argument("--shadow-sigma", type=float, default=4.0)
    fs.set_defaults(func=_cmd_fp_simulate)

    v = sub.add_parser("version")
    v.set_defaults(func=lambda args: print(__version__))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InvalidConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LocalizationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
