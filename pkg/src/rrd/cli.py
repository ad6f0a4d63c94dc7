"""Command line interface.

Subcommands: ``simulate`` dumps one path (and its increments) as CSV,
``estimate`` turns an increments CSV into a density-estimate CSV, ``coeffs``
prints count probabilities and inverse coefficients, ``experiment`` runs the
configured Monte Carlo study.  Exit codes: 0 ok, 1 configuration problem,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .decompound import build_correction, corrected_estimator, naive_estimator
from .harness import (
    ConfigError,
    emit,
    experiment_from_config,
    load_toml,
    mixture_from_config,
    model_from_config,
    run_experiment,
    wavelet_from_config,
)
from .simulate import IncrementSeries, discretize, sample_path


def _fmt(x) -> str:
    return repr(float(x))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrd",
        description="Renewal reward simulation and jump density estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="sample one path and dump CSVs")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=".")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--t", type=float, default=None, help="override horizon")
    p_sim.add_argument("--delta", type=float, default=None, help="override step")

    p_est = sub.add_parser("estimate", help="estimate the jump density from increments CSV")
    p_est.add_argument("--config", required=True)
    p_est.add_argument("--increments", required=True)
    p_est.add_argument("--out", default=".")
    p_est.add_argument("--order", type=int, default=0, help="correction order (0 = naive)")

    p_coef = sub.add_parser("coeffs", help="print count probabilities and inverse coefficients")
    p_coef.add_argument("--config", required=True)
    p_coef.add_argument("--delta", type=float, default=None)
    p_coef.add_argument("--order", type=int, default=3)

    p_exp = sub.add_parser("experiment", help="run the configured Monte Carlo study")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", default=None)
    p_exp.add_argument("--seed", type=int, default=None)
    p_exp.add_argument("--replicates", type=int, default=None)
    p_exp.add_argument("--workers", type=int, default=None)
    p_exp.add_argument("--no-svg", action="store_true")
    return parser


def _experiment_section(data: dict) -> dict:
    return data.get("experiment", {})


def cmd_simulate(args) -> int:
    data = load_toml(args.config)
    model = model_from_config(data)
    mixture = mixture_from_config(data)
    section = _experiment_section(data)
    horizon = args.t if args.t is not None else float(section.get("T", 1000.0))
    delta = args.delta if args.delta is not None else section.get("delta")
    path = sample_path(model, mixture, horizon, args.seed)

    os.makedirs(args.out, exist_ok=True)
    path_csv = os.path.join(args.out, "path.csv")
    with open(path_csv, "w", newline="") as fh:
        fh.write("t,jump\n")
        for t, j in zip(path.jump_times, path.jump_sizes):
            fh.write(f"{_fmt(t)},{_fmt(j)}\n")
    print(path_csv)

    if delta is not None:
        series = discretize(path, float(delta))
        inc_csv = os.path.join(args.out, "increments.csv")
        with open(inc_csv, "w", newline="") as fh:
            fh.write("i,increment\n")
            for i, v in enumerate(series.values, start=1):
                fh.write(f"{i},{_fmt(v)}\n")
        print(inc_csv)
    return 0


def read_increments_csv(path, delta: float) -> IncrementSeries:
    values = []
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header.split(",")[:2] != ["i", "increment"]:
            raise ConfigError(f"{path} does not look like an increments CSV")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            _, v = line.split(",")
            values.append(float(v))
    if not values:
        raise ConfigError(f"{path} holds no increments")
    return IncrementSeries(delta, np.asarray(values))


def cmd_estimate(args) -> int:
    data = load_toml(args.config)
    model = model_from_config(data)
    cfg = wavelet_from_config(data)
    section = _experiment_section(data)
    if "delta" not in section or "T" not in section:
        raise ConfigError("[experiment] must provide T and delta for estimation")
    delta = float(section["delta"])
    horizon = float(section["T"])
    series = read_increments_csv(args.increments, delta)
    if args.order == 0:
        est = naive_estimator(series, cfg, horizon)
    else:
        est = corrected_estimator(series, model.family, delta, args.order, cfg, horizon)

    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "estimate.csv")
    with open(out_csv, "w", newline="") as fh:
        fh.write("x,value\n")
        for x, v in zip(est.grid(), est.values):
            fh.write(f"{_fmt(x)},{_fmt(v)}\n")
    print(out_csv)
    return 0


def cmd_coeffs(args) -> int:
    data = load_toml(args.config)
    model = model_from_config(data)
    section = _experiment_section(data)
    delta = args.delta if args.delta is not None else section.get("delta")
    if delta is None:
        raise ConfigError("provide --delta or [experiment].delta")
    correction = build_correction(model, float(delta), args.order)
    out = sys.stdout
    out.write("quantity,m,value\n")
    for m, pm in enumerate(correction.p, start=1):
        out.write(f"p,{m},{_fmt(pm)}\n")
    for m, lm in enumerate(correction.l, start=1):
        out.write(f"l,{m},{_fmt(lm)}\n")
    return 0


def cmd_experiment(args) -> int:
    data = load_toml(args.config)
    cfg = experiment_from_config(
        data,
        base_seed=args.seed,
        replicates=args.replicates,
        output_dir=args.out,
        workers=args.workers,
    )
    report = run_experiment(cfg)
    formats = ("csv",) if args.no_svg else ("csv", "svg")
    written = emit(report, cfg.output_dir, formats)
    for path in written:
        print(path)
    for name in cfg.estimator_names:
        print(
            f"# {name}: mean_l2={report.mean_error(name):.6g} "
            f"std={report.std_error(name):.6g} "
            f"ok={report.n_ok(name)} failed={report.n_failed(name)}"
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; fold usage
        # errors into the config-error code.
        return 0 if exc.code == 0 else 1
    handlers = {
        "simulate": cmd_simulate,
        "estimate": cmd_estimate,
        "coeffs": cmd_coeffs,
        "experiment": cmd_experiment,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
