"""Command-line front end.

Subcommands: ``train``, ``infer``, ``sweep-alpha``, ``chebyshev``.  Every
command writes CSV files plus PNG figures into an output directory
(``--output``, else the config's ``output_dir``, else ``$QNNVAR_OUTPUT_DIR``,
else ``./runs``).

Exit codes: 0 success, 1 invalid configuration or arguments, 2 numeric
abort during training, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import yaml

from qnnvar import reports
from qnnvar.config import OUTPUT_DIR_ENV, TrainConfig, parse_config
from qnnvar.errors import ConfigError, DataFormatError, NumericAbort
from qnnvar.experiments import (
    FUNCTION_KINDS,
    alpha_sweep,
    confidence_interval,
    function_reference,
    gen_inference_grid,
    r2_score,
)
from qnnvar.qnn import EXACT, Shots, chebyshev_curve, evaluate_batch
from qnnvar.sim import RngStream
from qnnvar.training import AlphaSchedule, Regularization, train

log = logging.getLogger("qnnvar")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the validation status, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:step`` (inclusive) or a comma-separated list of values."""
    try:
        if ":" in spec:
            lo, hi, step = (float(p) for p in spec.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
        return np.array([float(v) for v in spec.split(",")])
    except ValueError:
        raise UsageError(f"invalid grid {spec!r}; expected lo:hi:step or v1,v2,...") from None


def _output_dir(args, cfg: TrainConfig | None = None) -> Path:
    if args.output:
        return Path(args.output)
    if cfg is not None:
        return cfg.output_dir
    return Path(os.environ.get(OUTPUT_DIR_ENV) or "runs")


class _Staging:
    """Write into a temporary directory and move files into place on success."""

    def __init__(self, target: Path):
        self.target = target

    def __enter__(self) -> Path:
        self.target.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.target))
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for f in sorted(self.tmp.iterdir()):
                os.replace(f, self.target / f.name)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return False


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------


def _load_config(args) -> TrainConfig:
    cfg = parse_config(args.config, args.set or ())
    if getattr(args, "seeds", None):
        cfg.data["seeds"] = [int(s) for s in args.seeds.split(",")]
    return cfg


def cmd_train(args) -> int:
    cfg = _load_config(args)
    layout = cfg.layout()
    train_set, _ = cfg.datasets()
    out = _output_dir(args, cfg)
    runs, logs = [], []
    with _Staging(out) as tmp:
        for seed in cfg.seeds:
            t0 = time.perf_counter()
            params0 = cfg.init_params(seed)
            try:
                params, run_log = train(
                    layout, params0, train_set.inputs, train_set.labels,
                    cfg.settings(seed), train_set.weights,
                )
            except NumericAbort as exc:
                diag = out / f"abort_seed{seed}.json"
                reports.write_json(diag, {"seed": seed, "error": str(exc), "config": cfg.to_dict()})
                if exc.log is not None:
                    reports.write_log_csv(out / f"abort_log_seed{seed}.csv", exc.log)
                log.error("numeric abort (seed %d): %s; diagnostics in %s", seed, exc, diag)
                return EXIT_NUMERIC
            reports.write_log_csv(tmp / f"log_seed{seed}.csv", run_log)
            reports.write_params(tmp / f"params_seed{seed}.txt", layout, params)
            runs.append(_run_summary(seed, run_log, time.perf_counter() - t0))
            logs.append(run_log)
            log.info("seed %d: L_fit=%.4g L_var=%.4g", seed, runs[-1]["final_L_fit"], runs[-1]["final_L_var"])
        if len(logs) > 1:
            reports.write_mean_trajectory(tmp / "mean_trajectory.csv", logs)
        summary = {"config": cfg.to_dict(), "runs": runs}
        if runs and all(r["iterations"] for r in runs):
            summary["mean_final_L_fit"] = float(np.mean([r["final_L_fit"] for r in runs]))
            summary["mean_final_L_var"] = float(np.mean([r["final_L_var"] for r in runs]))
        reports.write_json(tmp / "summary.json", summary)
        if not args.no_plots and all(len(l) for l in logs):
            from qnnvar.plotting import plot_training

            label = cfg["regularization"]["mode"]
            plot_training({label: [reports.read_csv(tmp / f"log_seed{s}.csv") for s in cfg.seeds]},
                          tmp / "training.png")
    print(f"wrote {out}")
    return EXIT_OK


def _run_summary(seed, run_log, wall) -> dict:
    row = {"seed": seed, "iterations": len(run_log), "wall_time": wall}
    if len(run_log):
        fit, var = run_log.final_averages(10)
        row.update(final_L_fit=fit, final_L_var=var,
                   total_gradient_shots=int(run_log.column("shots").sum()))
    return row


# --------------------------------------------------------------------------
# infer
# --------------------------------------------------------------------------


def cmd_infer(args) -> int:
    layout, params = reports.read_params(args.params)
    exact = args.mode == "exact"
    mode = EXACT if exact else Shots(args.shots, RngStream(args.seed, (0,)))
    out = _output_dir(args)
    if args.grid == "pes":
        return _infer_pes(args, layout, params, exact, out)
    kind = args.grid if args.grid in FUNCTION_KINDS else None
    grid = gen_inference_grid(kind) if kind else parse_grid(args.grid)
    res = evaluate_batch(layout, params, grid, mode)
    std = np.zeros_like(res.values) if exact else np.sqrt(res.variances / args.shots)
    with _Staging(out) as tmp:
        reports.write_csv(tmp / "inference.csv", ("x", "f", "sigma2", "std_mean"),
                          zip(grid, res.values, res.variances, std))
        if not args.no_plots:
            from qnnvar.plotting import plot_inference

            ref = train_x = train_y = None
            if kind and args.config:
                ds, _ = parse_config(args.config).datasets()
                ref = function_reference(kind, ds, grid)
                train_x, train_y = ds.inputs[:, 0], ds.labels
            plot_inference(grid, res.values, std, tmp / "inference.png", train_x, train_y, ref)
    print(f"wrote {out / 'inference.csv'}")
    return EXIT_OK


def _infer_pes(args, layout, params, exact, out) -> int:
    if not args.config:
        raise UsageError("--grid pes needs --config (the training config) to rebuild the dataset")
    cfg = parse_config(args.config)
    if not cfg.is_pes:
        raise UsageError("--grid pes needs a PES training config")
    train_set, test_set = cfg.datasets()
    scaler = train_set.label_scaler
    rows, summary = [], {}
    rng = RngStream(args.seed, (0,))
    figure = {}
    for k, ds in enumerate((train_set, test_set)):
        ex = evaluate_batch(layout, params, ds.inputs)
        if exact:
            mean, half = ex.values, np.zeros_like(ex.values)
            std = np.zeros_like(ex.values)
        else:
            mean, half = confidence_interval(layout, params, ds.inputs, args.repeats, args.shots,
                                             rng.child(k))
            std = np.sqrt(ex.variances / args.shots)
        energy = scaler.inverse(ds.labels)
        f_h = scaler.inverse(mean)
        half_h = scaler.inverse_scale(half)
        summary[f"r2_{ds.split}"] = r2_score(mean, ds.labels)
        summary[f"mean_ci_half_width_hartree_{ds.split}"] = float(np.mean(half_h))
        figure[ds.split] = (energy, f_h, half_h)
        for x, f, v, s, e, fh, hh in zip(ds.inputs, mean, ex.variances, std, energy, f_h, half_h):
            rows.append((*x, ds.split, f, v, s, e, fh, hh))
    cols = ("x0", "x1", "x2", "split", "f", "sigma2", "std_mean",
            "energy_hartree", "f_hartree", "ci_half_hartree")
    with _Staging(out) as tmp:
        reports.write_csv(tmp / "inference.csv", cols, rows)
        reports.write_json(tmp / "inference_summary.json", summary)
        if not args.no_plots:
            from qnnvar.plotting import plot_parity

            plot_parity(figure, tmp / "parity.png")
    print(f"R2 train {summary['r2_train']:.4f}  R2 test {summary['r2_test']:.4f}")
    print(f"wrote {out / 'inference.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep-alpha
# --------------------------------------------------------------------------


def _load_schedules(path) -> list[AlphaSchedule]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("schedules", f"file not found: {path}")
    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    if data is None:
        return []
    if not isinstance(data, list):
        raise ConfigError("schedules", "expected a list of {a, b, v} mappings")
    out = []
    for k, item in enumerate(data):
        if not isinstance(item, dict) or set(item) - {"a", "b", "v"}:
            raise ConfigError(f"schedules[{k}]", "expected keys a, b, v")
        try:
            out.append(AlphaSchedule(**{key: float(v) for key, v in item.items()}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"schedules[{k}]", str(exc)) from None
    return out


def cmd_sweep_alpha(args) -> int:
    cfg = _load_config(args)
    schedules = _load_schedules(args.schedules)
    layout = cfg.layout()
    train_set, _ = cfg.datasets()
    seed = cfg.seeds[0]
    out = _output_dir(args, cfg)
    try:
        logs = alpha_sweep(layout, cfg.init_params(seed), train_set, schedules, cfg.settings(seed))
    except NumericAbort as exc:
        log.error("numeric abort during sweep: %s", exc)
        return EXIT_NUMERIC
    results, curves = [], {}
    with _Staging(out) as tmp:
        for k, (sched, run_log) in enumerate(zip(schedules, logs)):
            name = f"sweep_{k}.csv"
            reports.write_log_csv(tmp / name, run_log)
            fit, var = run_log.final_averages(10) if len(run_log) else (None, None)
            results.append({"index": k, "a": sched.a, "b": sched.b, "v": sched.v, "file": name,
                            "final_L_fit": fit, "final_L_var": var})
            curves[f"a={sched.a:g} b={sched.b:g} v={sched.v:g}"] = [reports.read_csv(tmp / name)]
        reports.write_json(tmp / "sweep_summary.json", {"config": cfg.to_dict(), "schedules": results})
        if curves and not args.no_plots and cfg["optimizer"]["max_iters"] > 0:
            from qnnvar.plotting import plot_training

            plot_training(curves, tmp / "sweep.png")
    print(f"wrote {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# chebyshev
# --------------------------------------------------------------------------


def cmd_chebyshev(args) -> int:
    phis = parse_grid(args.phis)
    x = parse_grid(args.grid)
    if np.any(np.abs(x) > 1):
        raise UsageError("grid must lie in [-1, 1]")
    out = _output_dir(args)
    curves = [chebyshev_curve(phi, x) for phi in phis]
    rows = ((xi, phi, v) for phi, c in zip(phis, curves) for xi, v in zip(x, c))
    with _Staging(out) as tmp:
        reports.write_csv(tmp / "chebyshev.csv", ("x", "phi", "value"), rows)
        if not args.no_plots:
            from qnnvar.plotting import plot_chebyshev

            plot_chebyshev(x, list(phis), curves, tmp / "chebyshev.png")
    print(f"wrote {out / 'chebyshev.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qnnvar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config=True):
        p.add_argument("-o", "--output", help=f"output directory (default: ${OUTPUT_DIR_ENV} or ./runs)")
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
        if config:
            p.add_argument("-c", "--config", help="YAML config file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a config entry, e.g. layout.n_qubits=6")

    p = sub.add_parser("train", help="train a QNN")
    common(p)
    p.add_argument("--seeds", help="comma-separated seed list (one run per seed)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="evaluate a trained QNN on a grid")
    common(p, config=False)
    p.add_argument("--params", required=True, help="parameter file written by train")
    p.add_argument("--grid", required=True,
                   help="log | abs | oscillation | pes | lo:hi:step | v1,v2,...")
    p.add_argument("--mode", choices=("exact", "shots"), default="exact")
    p.add_argument("--shots", type=int, default=5000)
    p.add_argument("--repeats", type=int, default=100, help="PES confidence-interval repeats")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-c", "--config", help="training config (reference curve, PES dataset)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sweep-alpha", help="exact-mode training for several alpha schedules")
    common(p)
    p.add_argument("--schedules", required=True, help="YAML list of {a, b, v}")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("chebyshev", help="one-qubit Chebyshev curves for non-integer degree")
    common(p, config=False)
    p.add_argument("--phis", default="2:3:0.1")
    p.add_argument("--grid", default="-1:1:0.01")
    p.set_defaults(func=cmd_chebyshev)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
