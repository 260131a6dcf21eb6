"""Command-line entry point: ``metabo gen-data | run | validate | plot``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import bench
from .bench import ExperimentConfig

log = logging.getLogger("metabo")

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2

# flag name -> config field, where they differ
ALIASES = {"noise": "noise_sd", "m": "M", "n": "N", "t": "T", "k": "K"}
FIELD_TYPES = {
    "setting": str, "M": int, "N": int, "T": int, "d": int, "K": int, "noise_sd": float,
    "mask_rate": float, "lengthscale": float, "signal_var": float, "trials": int, "delta": float,
    "methods": "list", "seed": int, "train_fraction": float, "bandwidth": "optional_float",
    "complete_rank": int, "complete_shrink": float, "pi_target": str,
}
assert set(FIELD_TYPES) == {f.name for f in fields(ExperimentConfig)}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    # usage problems share the runtime-error exit code; 2 is kept for failed checks
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _field(key: str) -> str:
    key = key.strip().replace("-", "_")
    key = ALIASES.get(key, ALIASES.get(key.lower(), key))
    if key not in FIELD_TYPES:
        raise UsageError(f"unknown config key {key!r}")
    return key


def _convert(key: str, raw: str):
    kind = FIELD_TYPES[key]
    try:
        if kind == "list":
            return tuple(m.strip() for m in raw.split(",") if m.strip())
        if kind == "optional_float":
            return None if raw.strip().lower() in ("", "none") else float(raw)
        return kind(raw)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {raw!r}") from exc


def read_config_file(path) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = _field(key)
        out[key] = _convert(key, value.strip())
    return out


def _add_experiment_flags(p: argparse.ArgumentParser, only=None) -> None:
    flags = [
        ("--setting", str, "discrete or continuous"),
        ("--m", int, "number of candidates / design points"),
        ("--n", int, "number of offline tasks"),
        ("--t", int, "BO iterations"),
        ("--d", int, "input dimension"),
        ("--k", int, "number of cosine features"),
        ("--noise", float, "observation noise sd"),
        ("--mask-rate", float, "fraction of offline entries removed"),
        ("--lengthscale", float, "ground-truth SE lengthscale"),
        ("--signal-var", float, "ground-truth signal variance"),
        ("--trials", int, "test functions per method"),
        ("--delta", float, "confidence parameter"),
        ("--methods", str, "comma-separated subset of " + ",".join(bench.METHODS)),
        ("--seed", int, "master seed"),
        ("--train-fraction", float, "fraction of offline tasks used for estimation"),
        ("--bandwidth", str, "feature bandwidth (default: lengthscale)"),
        ("--complete-rank", int, "rank cap for matrix completion"),
        ("--complete-shrink", float, "singular-value shrinkage for matrix completion"),
        ("--pi-target", str, "PI target rule: inflated or max"),
    ]
    for flag, typ, help_ in flags:
        if only is None or flag in only:
            p.add_argument(flag, type=str, default=None, metavar=typ.__name__.upper(), help=help_)


def resolve_config(args, base: dict | None = None) -> ExperimentConfig:
    """Defaults, then preset, then config file, then explicit flags."""
    values = {}
    preset = getattr(args, "preset", None) or "discrete"
    if preset == "continuous":
        values.update(bench.continuous_preset().as_dict())
    elif preset != "discrete":
        raise UsageError(f"unknown preset {preset!r}")
    values.update(base or {})
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key, raw in vars(args).items():
        if raw is None or key in ("config", "preset", "out", "jobs", "plot", "command", "func", "verbose"):
            continue
        name = _field(key)
        values[name] = _convert(name, raw)
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _print_config(cfg: ExperimentConfig) -> None:
    print("# resolved config")
    print(cfg.to_text(), end="")


def cmd_gen_data(args) -> int:
    cfg = resolve_config(args, {"methods": ("random",), "T": 0})
    _print_config(cfg)
    data = bench.generate_offline_dataset(cfg)
    out, sidecar = bench.write_dataset(data, args.out)
    print(f"wrote {out} and {sidecar}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    _print_config(cfg)
    result = bench.run_experiment(cfg, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    (out / "rows.csv").write_text(result.rows_csv())
    (out / "aggregate.csv").write_text(result.aggregate_csv())
    for tr in result.skipped:
        print(f"skipped {tr.method} trial {tr.trial}: {tr.error}", file=sys.stderr)
    print(f"{'method':<15} {'trials':>6} {'mean r_T':>10} {'mean R_T':>10}")
    for method in cfg.methods:
        r, R = result.final(method, "r"), result.final(method, "R")
        if r.size:
            print(f"{method:<15} {r.size:>6} {r.mean():>10.4f} {R.mean():>10.4f}")
    if args.plot:
        bench.plot_svg(result.aggregate(), args.plot)
        print(f"wrote {args.plot}")
    print(f"wrote {out / 'rows.csv'} and {out / 'aggregate.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import stats_validate as sv

    if args.suite != "all" and args.suite not in sv.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(sv.SUITES)}, all")
    print(f"# resolved config\nsuite={args.suite}\nseed={args.seed}\njobs={args.jobs}")
    reports = sv.run_suite(args.suite, seed=args.seed, jobs=args.jobs)
    text = "".join(rep.to_text() for rep in reports)
    print(text, end="")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"validate_{args.suite}.txt").write_text(text)
    (out / f"validate_{args.suite}.csv").write_text(sv.reports_csv(reports))
    return EXIT_OK if all(rep.passed for rep in reports) else EXIT_CHECK_FAILED


def _read_aggregate(path) -> list[tuple]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            return [(r["method"], int(r["t"]), float(r["mean_r"]), float(r["se_r"]), float(r["mean_R"]),
                     float(r["se_R"]), float(r["mean_ybest"]), float(r["se_ybest"])) for r in reader]
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read aggregate CSV {path}: {exc}") from exc


def cmd_plot(args) -> int:
    print(f"# resolved config\naggregate={args.aggregate}\ncolumn={args.column}\nout={args.out}")
    bench.plot_svg(_read_aggregate(args.aggregate), args.out, args.column)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="metabo", description="Meta Bayesian optimization with an estimated GP prior.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("gen-data", help="sample an offline dataset from a synthetic GP")
    _add_experiment_flags(p, {"--setting", "--n", "--m", "--d", "--k", "--noise", "--mask-rate",
                              "--seed", "--lengthscale", "--signal-var"})
    p.add_argument("--out", required=True, help="dataset CSV path (sidecar written next to it)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="run a regret experiment")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--preset", choices=("discrete", "continuous"), default=None)
    _add_experiment_flags(p)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--plot", default=None, help="also write an SVG regret plot here")
    p.add_argument("--jobs", type=int, default=bench.default_jobs(), help="parallel trial workers")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="run statistical checks")
    p.add_argument("--suite", default="all", help="lemma1, lemma3, lemma4, tails, bounds or all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="validation", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="plot an aggregate CSV as SVG")
    p.add_argument("--aggregate", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--column", choices=("r", "R", "y_best"), default="r")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"metabo: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"metabo: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
