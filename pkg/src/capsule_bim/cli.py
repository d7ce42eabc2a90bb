"""Command line driver.

::

    capsule-bim simulate <config>
    capsule-bim converge <config> --resolutions 32,64,128
    capsule-bim diagnose <config>

Exit status: 0 success, 2 configuration error, 3 runtime failure. Output
goes under ``$CAPSULE_BIM_OUTPUT_ROOT`` when that variable is set.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import __version__
from .harness import ConfigError, converge, diagnose, load_config, output_directory, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _resolutions(text: str) -> list[int]:
    try:
        out = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("no resolutions given")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capsule-bim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one configuration and write snapshots")
    s.add_argument("config")

    c = sub.add_parser("converge", help="self-refinement study over a doubling chain")
    c.add_argument("config")
    c.add_argument("--resolutions", type=_resolutions, default=[32, 64, 128])
    c.add_argument("--workers", type=int, default=1)

    d = sub.add_parser("diagnose", help="filtered versus unfiltered stability report")
    d.add_argument("config")
    d.add_argument("--workers", type=int, default=1)
    return p


def _simulate(args) -> int:
    cfg = load_config(args.config)
    res = simulate(cfg)
    traj = res.trajectory
    if res.ok:
        print(f"completed t = {traj.snapshots[-1].time:g} in {traj.steps} steps -> {res.directory}")
    else:
        print(f"failed after t = {traj.last_good_time:g}: {traj.failure} -> {res.directory}")
    return res.exit_code


def _converge(args) -> int:
    cfg = load_config(args.config)
    out = output_directory(cfg, "_converge")
    rep = converge(cfg, args.resolutions, out, workers=args.workers)
    print(f"dt = {rep.dt:.6g}, t_end = {rep.t_end:g}")
    print("  N    2N    diff_theta      diff_sigma      order_theta")
    orders = [math.nan] + rep.order("theta")
    for row, p in zip(rep.rows, orders):
        print(f"{row['n_coarse']:4d} {row['n_fine']:5d}  {row['diff_theta']:.6e}  {row['diff_sigma']:.6e}  {p:8.3f}")
    for n, f in rep.failures.items():
        print(f"N = {n} failed after t = {f['last_good_time']:g}: {f['failure']}")
    print(f"-> {out}")
    return EXIT_OK if rep.complete else EXIT_RUNTIME


def _diagnose(args) -> int:
    cfg = load_config(args.config)
    out = output_directory(cfg, "_diagnose")
    rep = diagnose(cfg, out, workers=args.workers)
    for note in rep.notes:
        print(f"note: {note}")
    print(f"analyzed scheme: {'yes' if rep.analyzed else 'no'}")
    for name in rep.tails:
        blow = rep.blow_up_time[name]
        status = "stable run" if blow is None else f"failed after t = {blow:g}"
        print(
            f"{name:10s} tail {rep.tails[name][0]:.3e} -> max {max(rep.tails[name]):.3e}"
            f" (growth {rep.growth(name):.3g}), {status}"
        )
    print(f"-> {out}")
    return EXIT_OK if rep.failure["configured"] is None else EXIT_RUNTIME


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    handler = {"simulate": _simulate, "converge": _converge, "diagnose": _diagnose}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
