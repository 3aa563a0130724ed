"""Command-line driver: ``nisac gen|train|eval|verify|sweep``.

Exit codes: 0 success, 1 configuration or usage error (bad config, unknown
suite or axis, failed verification), 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, parse_value, with_overrides

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        overrides[key.strip()] = parse_value(value.strip())
    if args.seed is not None:
        overrides.update({"dataset.seed": args.seed, "train.seed": args.seed})
    return with_overrides(cfg, overrides) if overrides else cfg


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def cmd_gen(args) -> int:
    from .dataset_io import generate_dataset, write_dataset

    cfg = _config(args)
    n = args.n if args.n is not None else cfg.dataset.n_samples
    ds = generate_dataset(cfg, n)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    from .dataset_io import read_dataset, train_test
    from .nn.checkpoint import save_checkpoint, save_history
    from .nn.train import train

    ds = read_dataset(args.data)
    cfg = _config(args) if (args.config or args.set or args.seed is not None) else ds.config
    if cfg.data_hash() != ds.header.get("config_hash"):
        raise ConfigError("dataset was generated with a different scene/channel/link config")
    ds.config = cfg
    tr, _ = train_test(ds)
    result = train(tr, cfg, progress=lambda r: print(json.dumps(r), file=sys.stderr))
    out = Path(args.out)
    save_checkpoint(result.model, out, meta={"config": cfg.to_dict(), "best_epoch": result.best_epoch})
    save_history(result.history, out.with_suffix(".history.csv"))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .dataset_io import read_dataset, train_test
    from .nn.checkpoint import load_checkpoint
    from .nn.train import evaluate
    from .pipeline import SensingPipeline

    model, meta = load_checkpoint(args.model)
    ds = read_dataset(args.data)
    cfg = ds.config
    if "config" in meta:
        from .config import from_dict

        cfg = from_dict(meta["config"])
    if args.config or args.set or args.seed is not None:
        cfg = _config(args)
    ds.config = cfg
    _, te = train_test(ds)
    metrics = evaluate(model, SensingPipeline(cfg, ds.h_ref), te, cfg.train.seed)
    _write_json({"metrics": metrics, "config": cfg.to_dict()}, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    if args.suite != "all" and args.suite not in SUITES:
        raise ConfigError(f"unknown suite '{args.suite}'; choose from {', '.join(list(SUITES) + ['all'])}")
    kwargs = {}
    if args.n0 is not None:
        if args.suite not in ("lemma1", "prop3", "prop1"):
            raise ConfigError("--n0 applies to the prop1, lemma1 and prop3 suites")
        kwargs["n0"] = args.n0
    report = run_suite(args.suite, seed=args.seed or 0, **kwargs)
    _write_json(report, args.out)
    return EXIT_OK if report["passed"] else EXIT_CONFIG


def cmd_sweep(args) -> int:
    from .experiments import AXES, parse_axis_value, sweep

    if args.axis not in AXES:
        raise ConfigError(f"unknown sweep axis '{args.axis}'; choose from {', '.join(AXES)}")
    cfg = _config(args)
    try:
        values = [parse_axis_value(args.axis, v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value for axis {args.axis}: {exc}") from exc
    seeds = [int(s) for s in args.seeds.split(",")]
    sweep(cfg, args.axis, values, seeds, args.out, jobs=args.jobs)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run config (defaults to built-in)")
    common.add_argument("--seed", type=int, help="overrides dataset.seed and train.seed")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. train.epochs=5 (repeatable)")

    p = argparse.ArgumentParser(prog="nisac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a dataset file")
    g.add_argument("--out", required=True)
    g.add_argument("-n", type=int, help="number of records (default: dataset.n_samples)")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", parents=[common], help="train a CNN on a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint path; history goes next to it")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the test split")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--out", help="JSON report path (default: stdout)")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", parents=[common], help="run an estimator verification suite")
    v.add_argument("suite", help="prop1, prop2, lemma1, prop3, clt or all")
    v.add_argument("--n0", type=float, help="noise variance for the noise suites")
    v.add_argument("--out", help="JSON report path (default: stdout)")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", parents=[common], help="generate/train/evaluate over a grid")
    s.add_argument("--axis", required=True)
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--seeds", default="0", help="comma-separated seeds")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--out", required=True, help="CSV path")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
