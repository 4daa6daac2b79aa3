"""Command line entry points: synth, mobility, cluster, fit, simulate."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

from .environment import ConfigError

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _read_participants(path):
    """participant_id -> (occupation, subclass) from a participants CSV."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["participant_id"]] = (row["occupation"], row.get("subclass") or "regular")
    return out


def cmd_synth(args) -> int:
    from .mobility import dump_gazetteer, write_traces_csv
    from .synth import DEFAULT_PROFILES, synth_gps, two_group_profiles

    profiles = two_group_profiles() if args.profiles == "two_group" else DEFAULT_PROFILES
    points, people, gaz = synth_gps(profiles, args.per_profile, args.days, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_traces_csv(points, out / "traces.csv")
    dump_gazetteer(gaz, out / "gazetteer.yaml")
    with open(out / "participants.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["participant_id", "occupation", "subclass"])
        for p in people:
            w.writerow([p.participant_id, p.profile.occupation, p.profile.subclass])
    print(f"{len(people)} participants, {len(points)} samples -> {out}")
    return 0


def cmd_mobility(args) -> int:
    from .mobility import load_gazetteer, process_traces, read_traces_csv, write_records_csv

    traces = read_traces_csv(args.traces)
    days, unresolved = process_traces(traces, load_gazetteer(args.gazetteer), args.eps, args.min_pts, args.cutoff)
    write_records_csv(days, args.out)
    n_unres = sum(len(v) for v in unresolved.values())
    print(f"{len(days)} participant-days from {len(traces)} participants -> {args.out}"
          f" ({n_unres} unlabeled stay regions)")
    return 0


def cmd_cluster(args) -> int:
    from .behavior import cluster_days, report
    from .mobility import read_records_csv

    days = read_records_csv(args.records)
    groups = defaultdict(list)
    if args.participants:
        occ = {pid: o for pid, (o, _) in _read_participants(args.participants).items()}
        for d in days:
            groups[occ.get(d.participant_id, "unknown")].append(d)
    else:
        groups["all"] = list(days)
    reports, rows = {}, []
    for name in sorted(groups):
        if args.occupation and name != args.occupation:
            continue
        sel = groups[name]
        result, sweep, mode = cluster_days(sel, seed=args.seed, workers=args.workers)
        reports[name] = report(result, sweep, mode)
        for d, lab in zip(sel, result.labels.tolist()):
            rows.append([d.participant_id, d.day_index, name, f"c{lab}"])
        print(f"{name}: {len(sel)} days, prominent mode {mode[0]}-{mode[1]}, k={result.k}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(reports, fh, indent=2)
    with open(out / "assignments.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["participant_id", "day", "occupation", "subclass"])
        w.writerows(rows)
    return 0


def cmd_fit(args) -> int:
    from .mobility import read_records_csv
    from .trajectory import estimate_matrices, save_matrix_set

    days = read_records_csv(args.records)
    occ = {pid: o for pid, (o, _) in _read_participants(args.participants).items()} if args.participants else {}
    sub = {}
    if args.assignments:
        with open(args.assignments, newline="") as fh:
            for row in csv.DictReader(fh):
                sub[(row["participant_id"], int(row["day"]))] = row["subclass"]
    groups = defaultdict(list)
    for d in days:
        key = (occ.get(d.participant_id, args.occupation), sub.get((d.participant_id, d.day_index), "regular"),
               d.day_type)
        groups[key].append(d)
    ms = {}
    for key in sorted(groups):
        sel = groups[key]
        ms[key] = estimate_matrices([d.codes for d in sel], sel[0].labels, alpha=args.alpha,
                                    time_conditioned=not args.no_stays)
        print(f"{'/'.join(key)}: {len(sel)} days, {len(ms[key].labels)} locations")
    save_matrix_set(ms, args.out)
    return 0


def cmd_simulate(args) -> int:
    from .scenario import builtin_scenario, builtin_scenarios, load_scenario
    from .simcore import run

    if args.list:
        print("\n".join(builtin_scenarios()))
        return 0
    if not args.scenario:
        raise ConfigError("simulate: give a scenario file or built-in name")
    path = Path(args.scenario)
    if not path.exists():
        path = builtin_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.days is not None:
        overrides["days"] = args.days
    sc = load_scenario(path, overrides)
    out = Path(args.out or f"runs/{sc.name}")
    res = run(sc, out, workers=args.workers)
    inf = res.infectious
    print(f"{sc.name}: {sc.days} days, {sc.population.size} agents, peak infectious {int(inf.max())}"
          f" on day {int(inf.argmax())}, cumulative infections {res.cumulative_infections} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="episim", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthetic GPS traces, gazetteer and participant list")
    s.add_argument("out")
    s.add_argument("--profiles", choices=["default", "two_group"], default="default")
    s.add_argument("--per-profile", type=int, default=5)
    s.add_argument("--days", type=int, default=21)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("mobility", help="GPS traces -> minute-level time-location CSV")
    s.add_argument("traces")
    s.add_argument("gazetteer")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--eps", type=float, default=5.0)
    s.add_argument("--min-pts", type=int, default=10)
    s.add_argument("--cutoff", type=float, default=50.0, help="gazetteer match distance (m)")
    s.set_defaults(func=cmd_mobility)

    s = sub.add_parser("cluster", help="behavior sub-classes per occupation")
    s.add_argument("records")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--participants", help="CSV mapping participant_id to occupation")
    s.add_argument("--occupation", help="only cluster this occupation")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("fit", help="visit and occupancy matrices per (occupation, subclass, day type)")
    s.add_argument("records")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--participants")
    s.add_argument("--assignments", help="assignments.csv from the cluster command")
    s.add_argument("--occupation", default="participant", help="occupation when no participants file")
    s.add_argument("--alpha", type=float, default=0.0, help="additive smoothing count")
    s.add_argument("--no-stays", action="store_true", help="omit the start-conditioned stay table")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a scenario")
    s.add_argument("scenario", nargs="?", help="scenario YAML or built-in name")
    s.add_argument("-o", "--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--days", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--list", action="store_true", help="list built-in scenarios")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level report
        logging.getLogger("episim").debug("aborted", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
