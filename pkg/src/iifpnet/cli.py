"""Command line entry point: ``iifpnet {train,certify,attack,report,run-all}``.

Exit codes: 0 success, 1 configuration or input error, 2 bound violation.
"""

import argparse
import json
import logging
import os
import sys

from . import harness
from .errors import ConfigError, IIFPError

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


def _common(p):
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--dataset", dest="csv", help="CSV file (default: synthetic data)")
    p.add_argument("--target-col", dest="target_col")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--slope-a", dest="slope_a", type=float)
    p.add_argument("--nu-target", dest="nu_target", type=float)
    p.add_argument("--epsilon-attack", dest="epsilon_attack", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon-design", dest="epsilon_design", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="iifpnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one network per depth")
    _common(p)
    p.add_argument("--depth", type=int, action="append", help="hidden layers (repeatable)")

    p = sub.add_parser("certify", help="compute the passivity certificate of a model file")
    _common(p)
    p.add_argument("model")
    p.add_argument("--output", "-o")

    p = sub.add_parser("attack", help="hill-climb every test point against a certificate")
    _common(p)
    p.add_argument("model")
    p.add_argument("certificate")
    p.add_argument("--points", help="preprocessed point CSV (default: rebuild the test split)")
    p.add_argument("--output", "-o", help="evaluation CSV path")
    p.add_argument("--summary", help="summary JSON path")

    p = sub.add_parser("report", help="summary CSV and SVG charts from evaluation files")
    p.add_argument("evaluations", nargs="+")
    p.add_argument("--certificates", nargs="*", default=[])
    p.add_argument("--out-dir", dest="out_dir", default="report")
    p.add_argument("--nu-target", dest="nu_target", type=float)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("run-all", help="train, certify, attack and report for every depth")
    _common(p)
    p.add_argument("--depth", type=int, action="append")
    return parser


def _config(args):
    over = {k: getattr(args, k, None) for k in (
        "seed", "csv", "target_col", "out_dir", "slope_a", "nu_target", "epsilon_attack",
        "beta", "epsilon_design", "max_epochs")}
    if getattr(args, "depth", None):
        over["depths"] = args.depth
    return harness.load_config(args.config, **over)


def _print(doc):
    print(json.dumps(doc, indent=2, sort_keys=True))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, IIFPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args):
    if args.command == "report":
        rows, _ = harness.cmd_report(args.evaluations, args.certificates, args.out_dir, args.nu_target)
        _print(rows)
        return EXIT_VIOLATION if any(r["bound_violated"] for r in rows) else EXIT_OK

    cfg = _config(args)
    if args.command == "train":
        splits = harness.prepare_data(cfg)
        for depth in cfg.depths:
            _, history, p = harness.cmd_train(cfg, depth, splits)
            print(f"depth {depth}: {p['model']} (best epoch {history.best_epoch})")
        return EXIT_OK

    if args.command == "certify":
        cert = harness.cmd_certify(args.model, cfg.nu_target, cfg.beta, cfg.epsilon_design, args.output)
        _print(cert.as_dict())
        return EXIT_OK

    if args.command == "attack":
        if args.points:
            points = harness.load_points(args.points)
        else:
            points = harness.prepare_data(cfg)[2].features
        out = args.output or os.path.splitext(args.model)[0].replace("_model", "") + "_evaluation.csv"
        _, summary = harness.cmd_attack(args.model, args.certificate, points, cfg.attack_config(),
                                        out, args.summary)
        _print(summary)
        return EXIT_VIOLATION if harness.any_violation(summary) else EXIT_OK

    if args.command == "run-all":
        results = harness.run_all(cfg)
        _print({str(k): v for k, v in results.items()})
        return EXIT_VIOLATION if any(harness.any_violation(s) for s in results.values()) else EXIT_OK
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
