"""Command-line entry point ``markov-merging``.

Exit codes: 0 when every checked property holds, 2 when a domination or
closure property fails, 1 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import gallery
from .exceptions import MergingError
from .experiment import (
    OUTPUT_ENV,
    ExperimentConfig,
    adversary,
    compare_bounds,
    compare_table_csv,
    run,
    write_gallery,
)
from .stability import s2n_closure_check, sn_closure_check

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

GALLERY = {
    "circle": gallery.circle,
    "hypercube": gallery.hypercube,
    "metropolis_bd": gallery.metropolis_bd,
    "transpose_i_random": gallery.transpose_i_random,
    "symmetric_perturbation": gallery.symmetric_perturbation,
    "sticky_permutation": gallery.sticky_permutation,
    "drift": lambda N, beta, direction=1: gallery.GalleryInstance(
        "drift", {"N": N, "beta": beta, "direction": direction},
        [gallery.biased_walk(N, beta, direction)], {}, {}),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for property failures here
    def error(self, message):
        raise UsageError(message)


def _coerce(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _params(pairs):
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"parameter {item!r} is not key=value")
        out[key] = _coerce(value)
    return out


def _emit(text, out_path=None):
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path):
    return ExperimentConfig.from_file(path)


def cmd_gallery_build(args):
    params = _params(args.param)
    try:
        inst = GALLERY[args.family](**params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for {args.family}: {exc}") from None
    write_gallery(inst, args.out)
    sys.stdout.write(json.dumps(inst.manifest(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_run(args):
    cfg = _load(args.config)
    if args.out:
        cfg.output_dir = args.out
    bundle = run(cfg)
    summary = {
        "errors": bundle.errors,
        "failed": bundle.failed,
        "merging_time": None if bundle.merging is None else bundle.merging.time,
        "observed_c": None if bundle.stability is None else bundle.stability.observed_c,
        "min_slack": {k: r.min_slack() for k, r in bundle.bounds.items()},
    }
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_FAIL if bundle.failed else EXIT_OK


def cmd_compare(args):
    cfg = _load(args.config)
    rows, reports = compare_bounds(cfg)
    _emit(compare_table_csv(rows), args.out)
    failed = [k for k, r in reports.items() if r.inputs_exact and not r.dominates()]
    return EXIT_FAIL if failed else EXIT_OK


def cmd_adversary(args):
    cfg = _load(args.config)
    _emit(json.dumps(adversary(cfg), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_stability(args):
    if args.family == "circle":
        cert = sn_closure_check(args.epsilon, args.trials, seed=args.seed, site=1 if args.corrupt else 0)
    else:
        cert = s2n_closure_check(args.epsilon, args.N, args.trials, seed=args.seed, corrupt=args.corrupt)
    d = cert.to_dict()
    d["witness"] = None if d.get("witness") is None else [float(v) for v in d["witness"]]
    sys.stdout.write(json.dumps(d, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if cert.passed else EXIT_FAIL


def build_parser():
    p = _Parser(prog="markov-merging", description="Merging of time-inhomogeneous Markov chains.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gallery", help="example families")
    gsub = g.add_subparsers(dest="action", parser_class=_Parser)
    gsub.required = True
    gb = gsub.add_parser("build", help="write kernel/measure CSVs and a manifest")
    gb.add_argument("family", choices=sorted(GALLERY))
    gb.add_argument("--param", action="append", metavar="KEY=VALUE")
    gb.add_argument("--out", required=True)
    gb.set_defaults(func=cmd_gallery_build)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (overridden by ${OUTPUT_ENV})")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare-bounds", help="rank bound families against the exact merging time")
    c.add_argument("config")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("adversary", help="search for unstable or slow schedules")
    a.add_argument("config")
    a.add_argument("--out")
    a.set_defaults(func=cmd_adversary)

    s = sub.add_parser("stability", help="stability class checks")
    ssub = s.add_subparsers(dest="action", parser_class=_Parser)
    ssub.required = True
    sc = ssub.add_parser("check", help="randomized closure check")
    sc.add_argument("--family", choices=("circle", "hypercube"), default="circle")
    sc.add_argument("--epsilon", type=float, default=0.1)
    sc.add_argument("--trials", type=int, default=1000)
    sc.add_argument("--N", type=int, default=3)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--corrupt", action="store_true", help="use the off-centre negative control")
    sc.set_defaults(func=cmd_stability)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except MergingError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
