"""Command-line entry point: ``multirat simulate | analytic-only | areas | presets``.

Exit codes: 0 success, 2 configuration error, 3 runtime error (including a
sweep with failed points), 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from .config import ConfigError
from .scenario import METRIC_FAMILIES, PRESET_NAMES, dump_scenario, load_scenario
from .sweep import emit_csv, mean_area_table, run_sweep, scenario_window

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=PRESET_NAMES, help="built-in scenario")
    g.add_argument("--config", type=Path, help="YAML scenario file")
    p.add_argument("--seed", type=int, help="override the root seed")
    p.add_argument("--mode", choices=("noncrossing", "crossing"), help="override the association mode")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")


def _metrics(text: str) -> list[str]:
    items = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in items if m not in METRIC_FAMILIES]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"metrics must be a comma list from {', '.join(METRIC_FAMILIES)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multirat", description="Multi-RAT HetNet coexistence simulator "
                                 "and analytic bounds.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo sweep with analytic columns")
    _add_source(sim)
    sim.add_argument("--trials", type=int, help="typical-user trials per population and sweep point")
    sim.add_argument("--metrics", type=_metrics, help="comma list of " + ", ".join(METRIC_FAMILIES))
    sim.add_argument("--timing", action="store_true", help="fill wall_time_s (output no longer byte-stable)")
    sim.add_argument("--workers", type=int, help="worker processes (default: $MULTIRAT_WORKERS or 1)")

    an = sub.add_parser("analytic-only", help="evaluate bounds and limits without simulation")
    _add_source(an)
    an.add_argument("--metrics", type=_metrics)

    ar = sub.add_parser("areas", help="dump the mean contention-area table per sweep point")
    _add_source(ar)

    pr = sub.add_parser("presets", help="list presets, or print one as YAML")
    pr.add_argument("name", nargs="?", choices=PRESET_NAMES)
    return ap


def _scenario(args):
    sc = load_scenario(args.preset if args.preset else args.config)
    trials = getattr(args, "trials", None)
    if trials is not None and trials < 1:
        raise ConfigError("--trials must be >= 1")
    sc = sc.with_overrides(trials=trials, seed=args.seed, mode=args.mode,
                           metrics=getattr(args, "metrics", None))
    if getattr(args, "timing", False):
        from dataclasses import replace
        sc = replace(sc, timing=True)
    return sc


def _areas_csv(sc) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sweep_value", "tier", "contender_tier", "mean_area", "stderr", "samples", "source"])
    window = scenario_window(sc)
    for x in sc.users.sweep:
        t = mean_area_table(sc, sc.users.intensities(sc.config, x), window)
        K = t.areas.shape[0]
        for k in range(K):
            if not sc.config.tiers[k].contends:
                continue
            for m in range(K):
                w.writerow([format(x, ".9g"), k + 1, m + 1, format(t.areas[k, m], ".9g"),
                            format(t.stderr[k, m], ".9g"), int(t.samples[k]), t.source])
    return buf.getvalue()


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror or exc}") from exc


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "presets":
            if args.name:
                sys.stdout.write(dump_scenario(load_scenario(args.name)))
            else:
                for n in PRESET_NAMES:
                    print(f"{n:20s} {load_scenario(n).description}")
            return EXIT_OK
        sc = _scenario(args)
        if args.command == "areas":
            _write(_areas_csv(sc), args.out)
            return EXIT_OK
        if args.command == "simulate" and args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        rows = run_sweep(sc, simulate=args.command == "simulate",
                         workers=getattr(args, "workers", None))
        emit_csv(rows, args.out)
        failed = [r for r in rows if r.failed]
        if failed:
            for r in failed:
                print(f"multirat: sweep point {r.sweep_value:g}: {r.metric}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK
    except ConfigError as exc:
        print(f"multirat: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"multirat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"multirat: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
