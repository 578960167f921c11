"""Command-line entry point: ``noisyabc {run,check-gradients,pit,simulate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from ..errors import ConfigError, NoisyABCError
from ..gradcheck import check_model
from ..models import get_model
from .config import ExperimentConfig
from .experiments import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    summary = run_experiment(cfg, force=args.force)
    print(cfg.output_path() / "summary.json")
    return EXIT_NUMERICAL if summary["n_failed"] else EXIT_OK


def _cmd_check_gradients(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    ok = True
    for res in check_model(cfg.build_model(), n_points=args.points, seed=cfg.seed):
        print(res.line())
        ok &= res.ok
    return EXIT_OK if ok else EXIT_NUMERICAL


def _cmd_pit(args) -> int:
    cfg = replace(ExperimentConfig.load(args.config), mode="pit-check")
    cfg.validate()
    summary = run_experiment(cfg, force=args.force)
    for rep in summary["replicates"]:
        if "error" in rep:
            print(f"replicate {rep['replicate']}: {rep['error']}")
        else:
            verdict = "reject" if rep["uniform_rejected"] else "accept"
            print(f"replicate {rep['replicate']}: KS={rep['ks']:.4f} crit(1%)={rep['critical_1pct']:.4f} {verdict}")
    return EXIT_NUMERICAL if summary["n_failed"] else EXIT_OK


def _cmd_simulate(args) -> int:
    if len(args.values) < 3:
        raise ConfigError("simulate needs <theta...> <n> <seed>")
    *theta, n, seed = args.values
    try:
        n, seed = int(n), int(seed)
        theta = [float(v) for v in theta]
    except ValueError:
        raise ConfigError("n and seed must be integers and theta entries numbers") from None
    options = json.loads(args.options) if args.options else {}
    if args.model == "sv_alpha_r" and "drift" not in options:
        options["drift"] = len(theta) == 4
    model = get_model(args.model, **options)
    if len(theta) != model.d_theta:
        raise ConfigError(f"{model.name} expects {model.d_theta} parameters {model.param_names}, got {len(theta)}")
    try:
        y = model.simulate(theta, n, np.random.default_rng(seed))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    text = "".join(f"{v!r}\n" for v in np.asarray(y, dtype=float).tolist())
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noisyabc", description="Noisy ABC maximum likelihood with SMC gradients.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--force", action="store_true", help="run even if the config is disabled")
    r.set_defaults(func=_cmd_run)

    g = sub.add_parser("check-gradients", help="analytic vs finite-difference gradients of the config's model")
    g.add_argument("config")
    g.add_argument("--points", type=int, default=1000)
    g.set_defaults(func=_cmd_check_gradients)

    t = sub.add_parser("pit", help="PIT model check at the config's theta")
    t.add_argument("config")
    t.add_argument("--force", action="store_true")
    t.set_defaults(func=_cmd_pit)

    s = sub.add_parser("simulate", help="simulate raw observations: simulate <model> <theta...> <n> <seed>")
    s.add_argument("model")
    s.add_argument("values", nargs="+", help="theta entries followed by n and seed")
    s.add_argument("--options", help="model options as JSON")
    s.add_argument("-o", "--output")
    s.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoisyABCError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
