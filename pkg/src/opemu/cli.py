"""Command-line pipeline: design, simulate, fit, validate, predict, sweep, uq.

Every command reads the run config (defaults if none given), writes its
artifacts atomically, and embeds the config hash, seed, and package version
in each output so results are traceable and reruns are byte-identical.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
"""

import argparse
import os
import sys

from . import __version__
from .analysis import (
    save_histogram_csv,
    save_quantiles_csv,
    save_quantiles_json,
    save_sweep_csv,
    sensitivity_sweep,
    uq_monte_carlo,
)
from .config import RunConfig
from .design import load_design_csv, maximin_lhd, save_design_csv
from .emulator import credible_interval, fit, load_model, save_model
from .errors import ConfigError, DataError, NumericalDegeneracyError, OptimizationFailure
from .ioutil import atomic_write_text, fmt, meta_lines
from .likelihood import (
    HyperparamEstimate,
    estimate_hyperparams,
    optimize_correlation_lengths,
)
from .simulator import ingest_runs, toy_training_set, write_training_csv
from .validation import loo, save_fold_csv, save_report_json


def _parser() -> argparse.ArgumentParser:
    # the flags are global: accepted both before and after the subcommand.
    # SUPPRESS keeps the subparser's copy from overwriting a value given in
    # the global position; real defaults are registered once below.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="run-config JSON file")
    common.add_argument("--seed", type=int, metavar="U64", default=argparse.SUPPRESS,
                        help="override the design/analysis seeds")
    common.add_argument("--threads", type=int, metavar="N", default=argparse.SUPPRESS,
                        help="worker threads for independent folds/samples")
    common.add_argument("--trace", action="store_true", default=argparse.SUPPRESS,
                        help="write optimizer trace CSV next to the reports")

    parser = argparse.ArgumentParser(
        prog="opemu",
        description="Outer-product emulator pipeline for expensive simulators",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"opemu {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("design", parents=[common],
                   help="generate the maximin Latin Hypercube design CSV")
    sub.add_parser("simulate", parents=[common],
                   help="run the toy simulator over the design, write training CSV")
    sub.add_parser("fit", parents=[common],
                   help="estimate hyperparameters, optimize lengths, fit the emulator")
    sub.add_parser("validate", parents=[common],
                   help="leave-one-out diagnostics and summary report")
    p_pred = sub.add_parser("predict", parents=[common],
                            help="predictive series at one input point")
    p_pred.add_argument("--point", required=True,
                        help="comma-separated input coordinates, e.g. '-1.0,1.5,2.0'")
    p_pred.add_argument("--out", default=None, help="output CSV (default prediction.csv)")
    sub.add_parser("sweep", parents=[common],
                   help="sensitivity sweep curves from the analysis config")
    sub.add_parser("uq", parents=[common],
                   help="Monte-Carlo uncertainty quantification tables")
    return parser


def _load_config(args) -> RunConfig:
    return RunConfig.load(args.config) if args.config else RunConfig()


def _design_seed(cfg, args) -> int:
    return args.seed if args.seed is not None else cfg.raw["design"]["seed"]


def _analysis_seed(cfg, args) -> int:
    return args.seed if args.seed is not None else cfg.raw["analysis"]["seed"]


def cmd_design(cfg: RunConfig, args) -> int:
    seed = _design_seed(cfg, args)
    design = maximin_lhd(
        cfg.raw["design"]["n"], cfg.space(), seed, cfg.raw["design"]["candidates"]
    )
    path = cfg.raw["paths"]["design"]
    save_design_csv(design, path, cfg.meta(seed))
    print(f"wrote {path}: {design.n} points, {design.space.k} dimensions")
    print(f"min pairwise distance: unit={design.min_distance(unit=True):.6f} "
          f"physical={design.min_distance(unit=False):.6f}")
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    design = load_design_csv(cfg.raw["paths"]["design"], cfg.space())
    train = toy_training_set(design, cfg.time_grid(), cfg.toy_params())
    path = cfg.raw["paths"]["training"]
    write_training_csv(train, path, cfg.meta(_design_seed(cfg, args)))
    print(f"wrote {path}: {train.n} runs x {train.q} time points")
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    train = ingest_runs(cfg.raw["paths"]["training"], cfg.space())
    ib, ob = cfg.input_basis(), cfg.output_basis()
    prior_cfg = cfg.raw["prior"]
    jitter = cfg.raw["kernel"]["jitter"]

    if prior_cfg["sigma2"] is not None:
        size = ib.size * ob.size
        est = HyperparamEstimate(
            size=size,
            sigma2=prior_cfg["sigma2"],
            dof=prior_cfg["dof"],
            scale=prior_cfg["scale"],
            provenance="user-override",
        )
    else:
        est = estimate_hyperparams(train, ib, ob, prior_cfg["dof"], prior_cfg["split"])
    print(f"prior ({est.provenance}): sigma2={est.sigma2:.6g} dof={est.dof:g} "
          f"scale={est.scale:.6g}")

    kernel = cfg.kernel_spec()
    if kernel is None:
        state = optimize_correlation_lengths(
            train,
            ib,
            ob,
            est.sigma2,
            bounds=cfg.raw["kernel"]["length_bounds"],
            restarts=cfg.raw["kernel"]["restarts"],
            seed=cfg.raw["kernel"]["opt_seed"],
            exponent=cfg.raw["kernel"]["exponent"],
            jitter=jitter,
            collect_trace=args.trace,
        )
        kernel = state.kernel_spec(cfg.raw["kernel"]["exponent"])
        lengths = ", ".join(f"{v:.4g}" for v in kernel.lengths)
        print(f"optimized lengths: [{lengths}] log-likelihood={state.value:.4f}")
        if args.trace:
            trace_path = os.path.join(cfg.raw["paths"]["reports"], "fit_trace.csv")
            _write_trace(state.trace, train.design.space, trace_path,
                         cfg.meta(_design_seed(cfg, args)))
            print(f"wrote {trace_path}")
    else:
        print(f"using configured lengths: {[float(v) for v in kernel.lengths]}")

    model = fit(est.to_prior(), ib, ob, kernel, train, jitter)
    path = cfg.raw["paths"]["model"]
    save_model(model, path, cfg.meta(_design_seed(cfg, args)))
    print(f"wrote {path}: posterior dof={model.dof:g} scale={model.scale:.6g}")
    return 0


def _write_trace(trace, space, path, meta):
    names = list(space.names) + ["time", "tau"]
    lines = meta_lines(meta)
    lines.append("restart,evaluation,log_likelihood,grad_norm," + ",".join(names))
    for row in trace:
        lines.append(",".join(
            [str(row[0]), str(row[1]), fmt(row[2]), fmt(row[3])]
            + [fmt(v) for v in row[4:]]
        ))
    atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_validate(cfg: RunConfig, args) -> int:
    train = ingest_runs(cfg.raw["paths"]["training"], cfg.space())
    model = load_model(cfg.raw["paths"]["model"])
    level = cfg.raw["validate"]["level"]

    refit = None
    if cfg.raw["validate"]["reoptimize"]:
        ib, ob = cfg.input_basis(), cfg.output_basis()
        sigma2 = model.prior.sigma2

        def refit(subset):
            state = optimize_correlation_lengths(
                subset, ib, ob, sigma2,
                restarts=cfg.raw["kernel"]["restarts"],
                seed=cfg.raw["kernel"]["opt_seed"],
                exponent=cfg.raw["kernel"]["exponent"],
                jitter=model.jitter,
            )
            return state.kernel_spec(cfg.raw["kernel"]["exponent"])

    report = loo(
        train,
        model.input_basis,
        model.output_basis,
        model.kernel,
        model.prior,
        jitter=model.jitter,
        level=level,
        threads=args.threads,
        refit_lengths=refit,
    )
    reports_dir = cfg.raw["paths"]["reports"]
    meta = cfg.meta(_design_seed(cfg, args))
    save_report_json(report, os.path.join(reports_dir, "loo_report.json"), meta)
    for diag in report.diagnostics:
        save_fold_csv(
            diag, os.path.join(reports_dir, f"loo_fold_{diag.index:02d}.csv"),
            level, meta,
        )
    print(f"leave-one-out: {len(report.diagnostics)}/{train.n} folds completed")
    print(f"pooled {level:.0%} coverage: {report.pooled_coverage:.4f}")
    print(f"corr(MED, RMSE)={report.corr_med_rmse:.4f} "
          f"corr(MED, MCIL)={report.corr_med_mcil:.4f}")
    if report.failures:
        print(f"failed folds: {[f['index'] for f in report.failures]}", file=sys.stderr)
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    model = load_model(cfg.raw["paths"]["model"])
    try:
        point = [float(v) for v in args.point.split(",")]
    except ValueError:
        raise ConfigError(f"--point must be comma-separated numbers, got {args.point!r}")
    if len(point) != model.design.space.k:
        raise ConfigError(
            f"--point needs {model.design.space.k} coordinates, got {len(point)}"
        )
    series = model.predict(point)
    if series.extrapolation:
        print("warning: input lies outside the design box; prediction is an "
              "extrapolation", file=sys.stderr)
    level = cfg.raw["validate"]["level"]
    lo, hi = credible_interval(series, level)
    out = args.out or "prediction.csv"
    lines = meta_lines(cfg.meta(_design_seed(cfg, args)))
    lines.append(f"# point={args.point}")
    lines.append(f"# dof={fmt(series.dof)}")
    lines.append("time,location,scale,lo95,hi95")
    for row in zip(series.times, series.location, series.scale, lo, hi):
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(out, "\n".join(lines) + "\n")
    print(f"wrote {out}: {series.times.size} predictive marginals "
          f"(max location {series.location.max():.6g})")
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    model = load_model(cfg.raw["paths"]["model"])
    reports_dir = cfg.raw["paths"]["reports"]
    total = 0
    for spec in cfg.sweep_specs():
        curve = sensitivity_sweep(model, spec, cfg.raw["validate"]["level"])
        name = model.design.space.names[spec.dim]
        path = os.path.join(reports_dir, f"sweep_{name}.csv")
        save_sweep_csv(curve, name, path, cfg.meta(_design_seed(cfg, args)))
        total += curve.n_evaluations
        print(f"wrote {path}: {curve.n_evaluations} evaluations, "
              f"max elevation range [{curve.max_elev.min():.4g}, "
              f"{curve.max_elev.max():.4g}]")
    print(f"total emulator evaluations: {total}")
    return 0


def cmd_uq(cfg: RunConfig, args) -> int:
    model = load_model(cfg.raw["paths"]["model"])
    seed = _analysis_seed(cfg, args)
    result = uq_monte_carlo(
        model,
        cfg.beta_spec(),
        n=cfg.raw["analysis"]["mc_samples"],
        seed=seed,
        level=cfg.raw["validate"]["level"],
        bins=cfg.raw["analysis"]["bins"],
        threads=args.threads,
    )
    reports_dir = cfg.raw["paths"]["reports"]
    meta = cfg.meta(seed)
    save_quantiles_csv(result, os.path.join(reports_dir, "uq_quantiles.csv"), meta)
    save_quantiles_json(result, os.path.join(reports_dir, "uq_quantiles.json"), meta)
    save_histogram_csv(result, os.path.join(reports_dir, "uq_histogram.csv"), meta)
    header = " ".join(f"p{v:g}" for v in result.max_elevation.levels)
    print(f"{result.max_elevation.n_samples} samples, percentiles: {header}")
    for summary in (result.max_elevation, result.mean_ci_length):
        values = " ".join(f"{v:.4g}" for v in summary.values)
        print(f"{summary.statistic}: {values}")
    print(f"wrote {reports_dir}/uq_quantiles.csv, uq_quantiles.json, uq_histogram.csv")
    return 0


_COMMANDS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "validate": cmd_validate,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
    "uq": cmd_uq,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    # SUPPRESS leaves unspecified globals unset; apply the real defaults here
    args.config = getattr(args, "config", None)
    args.seed = getattr(args, "seed", None)
    args.threads = getattr(args, "threads", 1)
    args.trace = getattr(args, "trace", False)
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalDegeneracyError, OptimizationFailure) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
