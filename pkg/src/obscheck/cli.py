"""Command-line interface.

    obscheck samples --dim D --count M [--out FILE]
    obscheck run --model FILE --T 4,12,20 --K 2000 --out report.json
    obscheck report report.json

Exit codes: 0 observable, 3 not observable, 1 usage or configuration error,
2 internal failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from pathlib import Path

from .models import ModelError, load_model
from .optimize import OptConfig
from .samples import (
    InvalidMixtureError,
    LcdConfig,
    lcd_distance,
    optimize_mixture,
    write_sample_csv,
)
from .study import (
    NOT_OBSERVABLE,
    StudyConfig,
    plot_csv,
    render_report,
    report_from_json,
    report_to_dict,
    report_to_json,
    run_study,
    write_atomic,
)

__all__ = ["main", "entry"]

EXIT_OBSERVABLE = 0
EXIT_USAGE = 1
EXIT_INTERNAL = 2
EXIT_NOT_OBSERVABLE = 3


class _CliError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obscheck", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_lcd_flags(p):
        p.add_argument("--seed", type=int, default=LcdConfig.seed,
                       help="seed for the deterministic sample initializer")
        p.add_argument("--b-max", type=float, default=LcdConfig.b_max)
        p.add_argument("--quad-nodes", type=int, default=LcdConfig.quad_nodes)
        p.add_argument("--placement-iters", type=int, default=LcdConfig.max_iters)
        p.add_argument("--step-tol", type=float, default=LcdConfig.step_tol)

    p_samples = sub.add_parser("samples", help="generate a deterministic sample set")
    p_samples.add_argument("--dim", type=int, required=True)
    p_samples.add_argument("--count", type=int, required=True)
    p_samples.add_argument("--out", type=Path, default=None,
                           help="output CSV (default samples-dim<D>-count<M>.csv)")
    add_lcd_flags(p_samples)

    p_run = sub.add_parser("run", help="run an observability study on a model file")
    p_run.add_argument("--model", required=True, help="model JSON file or bundled name")
    p_run.add_argument("--T", default="4,12,20", help="comma-separated horizons")
    p_run.add_argument("--K", type=int, default=2000, help="number of design vectors")
    p_run.add_argument("--out", type=Path, default=Path("report.json"))
    p_run.add_argument("--plot", type=Path, default=None, help="CSV of per-run estimates")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--random-baseline", action="store_true",
                       help="also run plain random observation vectors for comparison")
    p_run.add_argument("--cache-dir", type=Path, default=None,
                       help="sample-set cache (default OBSCHECK_CACHE_DIR or ~/.cache/obscheck)")
    p_run.add_argument("--no-cache", action="store_true")
    p_run.add_argument("--grad-check", type=float, default=OptConfig.grad_check)
    p_run.add_argument("--eig-ratio-min", type=float, default=OptConfig.eig_ratio_min)
    p_run.add_argument("--lvar-max", type=float, default=OptConfig.lvar_max)
    p_run.add_argument("--grad-tol", type=float, default=OptConfig.grad_tol)
    add_lcd_flags(p_run)

    p_report = sub.add_parser("report", help="render a report file as text tables")
    p_report.add_argument("path", type=Path)
    return parser


def _lcd_from_args(args) -> LcdConfig:
    return LcdConfig(
        b_max=args.b_max,
        quad_nodes=args.quad_nodes,
        max_iters=args.placement_iters,
        step_tol=args.step_tol,
        seed=args.seed,
    )


def _cmd_samples(args) -> int:
    if args.dim < 1 or args.count < 1:
        raise _CliError("--dim and --count must be positive")
    cfg = _lcd_from_args(args)
    mix = optimize_mixture(args.dim, args.count, cfg)
    out = args.out or Path(f"samples-dim{args.dim}-count{args.count}.csv")
    write_sample_csv(out, mix, cfg)
    print(f"wrote {mix.count} points to {out}")
    print(f"lcd_distance = {lcd_distance(mix, cfg):.12g}")
    return EXIT_OBSERVABLE


def _resolve_cache_dir(args) -> Path | None:
    if args.no_cache:
        return None
    if args.cache_dir is not None:
        return args.cache_dir
    env = os.environ.get("OBSCHECK_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "obscheck"


def _cmd_run(args) -> int:
    try:
        horizons = tuple(int(t) for t in str(args.T).split(",") if t.strip())
    except ValueError:
        raise _CliError(f"cannot parse --T {args.T!r}") from None
    if not horizons:
        raise _CliError("--T must list at least one horizon")
    try:
        model = load_model(args.model)
    except (ModelError, OSError) as exc:
        raise _CliError(str(exc)) from exc
    cache_dir = _resolve_cache_dir(args)
    try:
        cfg = StudyConfig(
            model=model,
            T_list=horizons,
            K=args.K,
            lcd=_lcd_from_args(args),
            opt=OptConfig(
                grad_tol=args.grad_tol,
                grad_check=args.grad_check,
                eig_ratio_min=args.eig_ratio_min,
                lvar_max=args.lvar_max,
            ),
            threads=max(1, args.threads),
            cache_dir=str(cache_dir) if cache_dir is not None else None,
            random_baseline=args.random_baseline,
        )
    except ValueError as exc:
        raise _CliError(str(exc)) from exc

    report = run_study(cfg)
    write_atomic(args.out, report_to_json(report))
    if args.plot is not None:
        write_atomic(args.plot, plot_csv(report))
    print(render_report(report_to_dict(report)), end="")
    print(f"report written to {args.out}")
    return EXIT_OBSERVABLE if report.verdict != NOT_OBSERVABLE else EXIT_NOT_OBSERVABLE


def _cmd_report(args) -> int:
    try:
        data = report_from_json(Path(args.path).read_text())
    except (OSError, ValueError) as exc:
        raise _CliError(f"cannot read report: {exc}") from exc
    print(render_report(data), end="")
    return EXIT_OBSERVABLE


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; fold into the usage code
        return EXIT_USAGE if exc.code else EXIT_OBSERVABLE
    try:
        if args.command == "samples":
            return _cmd_samples(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        raise _CliError(f"unknown command {args.command!r}")
    except (_CliError, InvalidMixtureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())
