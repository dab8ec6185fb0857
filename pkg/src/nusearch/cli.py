"""Command-line front end.

Examples
--------
  nusearch direct --n 3 --marked 5
  nusearch dilated --n 3 --a-policy exact_N --aa-steps 1 --seed 7
  nusearch sweep --a-policy barm_n --n-values 3-12 --out fig3a.csv
  nusearch multidb --n 3 --K 2 --a-policy exact_N --marked 1,6 --format json
  nusearch group --n 3 --signs 10010011 --a 1
  nusearch group --n 1 --signs=-1,1
  nusearch figures --out figs/

Exit status: 0 on success, 2 on invalid arguments, 3 when a numerical
invariant check fails (the failing checks are named on stderr).
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .experiments import ConfigError, ExperimentConfig, figure_configs, run
from .operators import APolicy
from .results_io import render, write_results

SUBCOMMANDS = {
    "direct": "direct",
    "sweep": "magnitude_sweep",
    "dilated": "dilated",
    "lcu": "lcu",
    "multidb": "multidb",
    "group": "grouping",
}
KIND_TO_SUB = {v: k for k, v in SUBCOMMANDS.items()}

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 2, 3


@dataclass
class CliRequest:
    command: str
    configs: list
    out: Optional[str]
    fmt: str
    workers: int

    @property
    def config(self) -> ExperimentConfig:
        if len(self.configs) != 1:
            raise ValueError("request expands to several configs")
        return self.configs[0]


def _int_list(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _n_values(text: str) -> tuple:
    if "-" in text and "," not in text:
        lo, hi = text.split("-")
        return tuple(range(int(lo), int(hi) + 1))
    return _int_list(text)


def _signs(text: str) -> tuple:
    """``-1,1,1`` style lists, or a bit string where 1 marks a negative sign."""
    text = text.strip()
    if "," in text or text in ("1", "-1") or text.startswith("-"):
        return _int_list(text)
    if set(text) <= {"0", "1"}:
        return tuple(-1 if c == "1" else 1 for c in text)
    raise argparse.ArgumentTypeError(f"cannot parse sign vector {text!r}")


def _steps(text: str):
    if text == "n":
        return "n"
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nusearch", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output file (stdout when omitted)"):
        sp.add_argument("--out", default=None, help=out_help)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)

    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--n", type=int, default=3)
        sp.add_argument("--k", type=int, default=1)
        sp.add_argument("--K", type=int, default=1)
        sp.add_argument("--a", type=float, default=None, help="shorthand for --a-policy fixed:A")
        sp.add_argument("--a-policy", default=None,
                        help="exact_N, poly_n, barm_n, barm_n2 or fixed:VALUE")
        sp.add_argument("--rho", type=float, default=1.0)
        sp.add_argument("--kappa", type=float, default=None)
        sp.add_argument("--aa-steps", type=_steps, default=0, help="integer or 'n'")
        sp.add_argument("--marked", type=_int_list, default=None)
        sp.add_argument("--signs", type=_signs, default=None)
        sp.add_argument("--weights", type=lambda t: tuple(float(x) for x in t.split(",")),
                        default=None)
        sp.add_argument("--n-values", type=_n_values, default=None, help="e.g. 3-12 or 3,5,7")
        sp.add_argument("--symmetric", action="store_true")
        sp.add_argument("--combine", action="store_true")
        sp.add_argument("--label", default="")

    fp = sub.add_parser("figures")
    common(fp, out_help="output directory")
    fp.add_argument("--n-max", type=int, default=12)
    return p


def _config_from_args(args) -> ExperimentConfig:
    if args.a is not None and args.a_policy is not None:
        raise ConfigError("give either --a or --a-policy, not both")
    try:
        if args.a is not None:
            policy = APolicy("fixed", args.a)
        elif args.a_policy is not None:
            policy = APolicy.parse(args.a_policy)
        else:
            policy = None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = ExperimentConfig(
        kind=SUBCOMMANDS[args.command],
        n=args.n, k=args.k, K=args.K, a_policy=policy, rho=args.rho, kappa=args.kappa,
        aa_steps=0 if args.aa_steps == "n" else args.aa_steps,
        aa_steps_n=args.aa_steps == "n",
        marked=args.marked, signs=args.signs, weights=args.weights, n_values=args.n_values,
        symmetric=args.symmetric, combine=args.combine, seed=args.seed, label=args.label,
    )
    return cfg.validate()


def parse_cli(argv) -> CliRequest:
    """Parse ``argv`` into validated configs (``figures`` expands to the full set)."""
    args = build_parser().parse_args(argv)
    if args.command == "figures":
        configs = figure_configs(seed=args.seed, n_max=args.n_max)
    else:
        configs = [_config_from_args(args)]
    return CliRequest(args.command, configs, args.out, args.format, args.workers)


def config_to_argv(cfg: ExperimentConfig) -> list[str]:
    """Command line that :func:`parse_cli` turns back into ``cfg``."""
    argv = [KIND_TO_SUB[cfg.kind], "--n", str(cfg.n), "--k", str(cfg.k), "--K", str(cfg.K),
            "--rho", repr(cfg.rho), "--seed", str(cfg.seed)]
    if cfg.a_policy is not None:
        argv += ["--a-policy", str(cfg.a_policy)]
    if cfg.kappa is not None:
        argv += ["--kappa", repr(cfg.kappa)]
    argv += ["--aa-steps", "n" if cfg.aa_steps_n else str(cfg.aa_steps)]
    for flag, val in (("--marked", cfg.marked), ("--n-values", cfg.n_values)):
        if val is not None:
            argv += [flag, ",".join(str(v) for v in val)]
    if cfg.signs is not None:
        # The '=' form keeps a leading "-1" from being read as a flag.
        argv.append("--signs=" + ",".join(str(v) for v in cfg.signs))
    if cfg.weights is not None:
        argv += ["--weights", ",".join(repr(float(w)) for w in cfg.weights)]
    if cfg.symmetric:
        argv.append("--symmetric")
    if cfg.combine:
        argv.append("--combine")
    if cfg.label:
        argv += ["--label", cfg.label]
    return argv


def _run_all(configs, workers: int):
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, configs))
    return [run(c) for c in configs]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        req = parse_cli(argv)
    except ConfigError as exc:
        print(f"nusearch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        results = _run_all(req.configs, req.workers)
    except (ConfigError, ValueError) as exc:
        print(f"nusearch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if req.command == "figures":
        out_dir = Path(req.out or "figures")
        for res in results:
            write_results(res, req.fmt, out_dir / f"{res.config.label}.{req.fmt}")
    elif req.out:
        write_results(results[0], req.fmt, req.out)
    else:
        sys.stdout.write(render(results[0], req.fmt))

    failed = [f"{r.config.label or r.config.kind}:{c}" for r in results for c in r.failed_checks()]
    if failed:
        print("nusearch: invariant check failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
