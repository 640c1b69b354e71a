"""Command-line interface: build-matrix, simulate, reconstruct, uncertainty, montecarlo, reproduce.

Exit codes: 0 success, 2 usage or configuration error, 3 degenerate data,
4 numerical failure. A ``manifest.json`` is written beside the outputs of
every command, including failed ones.
"""
from __future__ import annotations

import argparse
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import yaml

from petfisher import __version__, kernels
from petfisher import io as pio
from petfisher.core import SystemMatrix, as_counts, build_gaussian_system_matrix
from petfisher.em import EmConfig, run_em
from petfisher.errors import InvalidArgumentError, PetFisherError
from petfisher.fisher import fisher_information
from petfisher.simulation import (
    DEFAULT_SEED,
    PAPER_TUMOR,
    Scenario,
    compare_theoretical_empirical,
    format_table,
    run_monte_carlo,
    run_rng,
    sample_counts,
    theoretical_report,
)
from petfisher.uncertainty import build_report

OUTPUT_DIR_ENV = "PETFISHER_OUTPUT_DIR"
WIDE_TOLERANCE_RUNS = 1000

SCENARIO_DEFAULTS = {
    "pixels": 7,
    "detectors": None,
    "sigma": 1.0,
    "true_lambda": list(PAPER_TUMOR),
    "T": 100.0,
    "iterations": 200,
    "tolerance": 0.0,
    "runs": 10000,
    "seed": DEFAULT_SEED,
    "init_mode": "true_tumor",
}


class Manifest:
    def __init__(self, command, out_dir):
        self.out_dir = Path(out_dir)
        self.data = {"command": command, "tool_version": __version__, "kernel_backend": kernels.BACKEND,
                     "python": platform.python_version(), "config": {}, "inputs": {}, "outputs": [],
                     "seed": None, "timings_s": {}, "error": None}
        self._t = time.perf_counter()

    def stage(self, name):
        now = time.perf_counter()
        self.data["timings_s"][name] = round(now - self._t, 6)
        self._t = now

    def output(self, path):
        self.data["outputs"].append(str(Path(path).name))
        return path

    def write(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        pio.write_json(self.out_dir / "manifest.json", self.data)


def _positive_float(flag):
    def parse(text):
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be a number, got {text!r}") from None
        if not (x > 0 and np.isfinite(x)):
            raise argparse.ArgumentTypeError(f"{flag} must be positive, got {text}")
        return x
    return parse


def _positive_int(flag):
    def parse(text):
        try:
            x = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be an integer, got {text!r}") from None
        if x < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {text}")
        return x
    return parse


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _load_config(path):
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{path}: config must be a mapping")
    unknown = set(data) - set(SCENARIO_DEFAULTS)
    if unknown:
        raise InvalidArgumentError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def _resolve(args, keys):
    """Flags override the config file, which overrides defaults."""
    config = _load_config(getattr(args, "config", None))
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else config.get(key, SCENARIO_DEFAULTS[key])
    if "detectors" in out and out["detectors"] is None:
        out["detectors"] = out["pixels"]
    return out


def _out_dir(args):
    # an explicit --out without --out-dir keeps the manifest beside that file
    if not args.out_dir and getattr(args, "out", None):
        return Path(args.out).parent
    return Path(args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")


# -- commands ---------------------------------------------------------------

def cmd_build_matrix(args, man):
    cfg = _resolve(args, ["pixels", "detectors", "sigma"])
    man.data["config"] = cfg
    P = build_gaussian_system_matrix(cfg["pixels"], cfg["detectors"], cfg["sigma"])
    man.stage("build")
    target = Path(args.out) if args.out else man.out_dir / "system_matrix.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    pio.write_matrix(man.output(target), P.p)
    if args.plot:
        from petfisher.plotting import plot_system_matrix
        plot_system_matrix(man.output(target.with_suffix(".svg")), P.p,
                           title=f"sigma = {cfg['sigma']:g}")
    print(target)


def _load_matrix(args, man):
    if args.matrix is not None:
        man.data["inputs"]["matrix"] = str(args.matrix)
        return SystemMatrix(pio.read_matrix(args.matrix))
    cfg = _resolve(args, ["pixels", "detectors", "sigma"])
    return build_gaussian_system_matrix(cfg["pixels"], cfg["detectors"], cfg["sigma"])


def cmd_simulate(args, man):
    cfg = _resolve(args, ["pixels", "detectors", "sigma", "true_lambda", "T", "seed"])
    P = _load_matrix(args, man)
    truth = pio.read_vector(args.lambda_file) if args.lambda_file else np.asarray(cfg["true_lambda"], float)
    man.data["config"] = cfg
    man.data["seed"] = cfg["seed"]
    counts = sample_counts(P, truth, cfg["T"], run_rng(cfg["seed"], args.run_index))
    man.stage("simulate")
    man.out_dir.mkdir(parents=True, exist_ok=True)
    target = Path(args.out) if args.out else man.out_dir / "counts.csv"
    pio.write_vector(man.output(target), counts, kind="detectors", integer=True)
    print(target)


def cmd_reconstruct(args, man):
    P = SystemMatrix(pio.read_matrix(args.matrix))
    counts = as_counts(pio.read_vector(args.counts, kind="detectors"), P.n_detectors)
    man.data["inputs"] = {"matrix": str(args.matrix), "counts": str(args.counts)}
    init = None
    if args.init != "uniform":
        init = pio.read_vector(args.init)
        man.data["inputs"]["init"] = args.init
    man.data["config"] = {"iterations": args.iterations, "tolerance": args.tolerance, "init": args.init}
    state = run_em(P, counts, EmConfig(max_iterations=args.iterations, init=init,
                                       stop_tolerance=args.tolerance, record_trajectory=True))
    man.stage("em")
    residual = fisher_residual = state.residual
    d = man.out_dir
    d.mkdir(parents=True, exist_ok=True)
    pio.write_vector(man.output(d / "lambda_hat.csv"), state.lam, kind="pixels")
    pio.write_table(man.output(d / "loglik.csv"),
                    {"iteration": np.arange(len(state.log_likelihood_trace)),
                     "log_likelihood": state.log_likelihood_trace})
    from petfisher.fisher import mle_condition_residual
    r = mle_condition_residual(P, state.lam, counts)
    pio.write_json(man.output(d / "reconstruct.json"), {
        "iterations": state.iteration,
        "converged": state.converged,
        "residual_max": fisher_residual,
        "score": r.tolist(),
        "log_likelihood": state.log_likelihood,
        "lambda_hat": state.lam.tolist(),
    })
    if args.trajectory:
        pio.write_trajectory(man.output(d / "trajectory.csv"), d / "trajectory_loglik.csv",
                             state.trajectory, state.log_likelihood_trace)
        man.output(d / "trajectory_loglik.csv")
    print(f"iterations={state.iteration} residual_max={residual:.6g} log_likelihood={state.log_likelihood:.10g}")


def _write_report(man, report, fisher=None, empirical_se=None, truth=None, prefix=""):
    d = man.out_dir
    d.mkdir(parents=True, exist_ok=True)
    n = len(report.se_full)
    cols = {"pixel": np.arange(1, n + 1), "lambda_hat": report.lambda_hat, "se_full": report.se_full}
    for k, se in sorted(report.se_minor.items()):
        cols[f"se_minor_{k}"] = se
    if empirical_se is not None:
        cols["se_empirical"] = empirical_se
    cols["nts"] = report.nts
    pio.write_table(man.output(d / f"{prefix}se.csv"), cols)
    pio.write_table(man.output(d / f"{prefix}nts.csv"), {"pixel": np.arange(1, n + 1), "nts": report.nts})
    pio.write_matrix(man.output(d / f"{prefix}correlation.csv"), report.correlation, header=False)
    pio.write_matrix(man.output(d / f"{prefix}covariance.csv"), report.covariance, header=False)
    pio.write_json(man.output(d / f"{prefix}uncertainty.json"), report.to_dict())
    if fisher is not None:
        pio.write_fisher(man.output(d / f"{prefix}fisher.csv"), man.output(d / f"{prefix}fisher.json"),
                         fisher, iterations=report.iterations, T=report.T)
    from petfisher.plotting import plot_noise_to_signal, plot_standard_errors
    plot_standard_errors(man.output(d / f"{prefix}se.svg"), report.se_full, report.se_minor,
                         empirical_se=empirical_se, truth=truth)
    nts_minor = {}
    if truth is not None:
        from petfisher.uncertainty import noise_to_signal
        nts_minor = {k: noise_to_signal(se, truth, report.T).nts for k, se in report.se_minor.items()}
    plot_noise_to_signal(man.output(d / f"{prefix}nts.svg"), report.nts, nts_minor)


def cmd_uncertainty(args, man):
    P = SystemMatrix(pio.read_matrix(args.matrix))
    lam = pio.read_vector(args.lambda_file, kind="pixels")
    counts = pio.read_vector(args.counts, kind="detectors")
    man.data["inputs"] = {"matrix": str(args.matrix), "lambda": str(args.lambda_file),
                          "counts": str(args.counts)}
    man.data["config"] = {"minors": args.minors, "T": args.T}
    fisher = fisher_information(P, lam, counts)
    report = build_report(fisher, lam, T=args.T, minors=args.minors, iterations=args.iterations)
    man.stage("uncertainty")
    empirical = None
    if args.empirical:
        samples = pio.read_matrix(args.empirical)
        empirical = samples.std(axis=0, ddof=1)
        man.data["inputs"]["empirical"] = str(args.empirical)
    _write_report(man, report, fisher, empirical_se=empirical)
    print(f"condition_estimate={report.condition_estimate:.6g}")
    for b, se in enumerate(report.se_full, 1):
        print(f"pixel {b}: se={se:.6g}")


def _scenario_from(cfg, P):
    return Scenario(P, np.asarray(cfg["true_lambda"], float), cfg["T"], iterations=cfg["iterations"],
                    stop_tolerance=cfg["tolerance"], seed=cfg["seed"], init_mode=cfg["init_mode"])


def cmd_montecarlo(args, man):
    cfg = _resolve(args, ["pixels", "detectors", "sigma", "true_lambda", "T", "iterations",
                          "tolerance", "runs", "seed", "init_mode"])
    man.data["config"] = cfg
    man.data["seed"] = cfg["seed"]
    P = _load_matrix(args, man)
    sc = _scenario_from(cfg, P)
    mc = run_monte_carlo(sc, cfg["runs"], threads=args.threads)
    man.stage("monte_carlo")
    report = theoretical_report(sc, mc, run=args.designated_run, minors=args.minors,
                                average=args.average_fisher)
    comp = compare_theoretical_empirical(mc, report)
    man.stage("uncertainty")
    _write_report(man, report, empirical_se=mc.empirical_se, truth=sc.true_lambda)
    d = man.out_dir
    pio.write_matrix(man.output(d / "empirical_corr.csv"), mc.empirical_corr, header=False)
    pio.write_matrix(man.output(d / "composite_corr.csv"), comp.composite, header=False)
    (d / "table1.txt").write_text(format_table(comp.composite) + "\n", encoding="utf-8")
    man.output(d / "table1.txt")
    pio.write_json(man.output(d / "montecarlo.json"), {
        "n_runs": mc.n_runs, "excluded_runs": list(mc.excluded), "T": mc.T,
        "empirical_se": mc.empirical_se.tolist(), "empirical_cov": mc.empirical_cov.tolist(),
        "empirical_corr": mc.empirical_corr.tolist(), "comparison": comp.to_dict(),
    })
    if args.dump_samples:
        pio.write_matrix(man.output(d / "mle_samples.csv"), mc.mle_samples, header=False)
    print(format_table(comp.composite))
    print(f"max corr gap {comp.max_corr_gap:.4f}, max SE relative gap {comp.max_se_rel_gap:.4f}")


def cmd_reproduce(args, man):
    from petfisher import acceptance
    from petfisher.experiment import run_paper_experiment

    sigmas = [1.0, 1.5] if args.sigma == "both" else [float(args.sigma)]
    man.data["config"] = {"sigma": sigmas, "runs": args.runs, "seed": args.seed,
                          "iterations": args.iterations, "init_mode": args.init_mode}
    man.data["seed"] = args.seed
    if args.runs < WIDE_TOLERANCE_RUNS:
        warnings.warn(f"only {args.runs} runs: Monte-Carlo agreement tolerances assume about 10000",
                      RuntimeWarning, stacklevel=1)
    runs = {}
    for sigma in sigmas:
        run = run_paper_experiment(sigma, runs=args.runs, seed=args.seed, iterations=args.iterations,
                                   init_mode=args.init_mode, threads=args.threads)
        runs[sigma] = run
        man.stage(f"sigma_{sigma:g}")
        sub = Manifest("reproduce", man.out_dir / f"sigma_{sigma:g}")
        _write_report(sub, run.report, empirical_se=run.mc.empirical_se, truth=run.scenario.true_lambda)
        d = sub.out_dir
        pio.write_matrix(d / "composite_corr.csv", run.comparison.composite, header=False)
        table = format_table(run.comparison.composite)
        (d / "table1.txt").write_text(table + "\n", encoding="utf-8")
        pio.write_table(d / "se_comparison.csv", {
            "pixel": np.arange(1, 8), "tumor": run.scenario.true_lambda,
            "se_full": run.report.se_full, "se_3pt": run.report.se_minor[3],
            "se_1pt": run.report.se_minor[1], "se_empirical": run.mc.empirical_se,
        })
        pio.write_table(d / "nts_comparison.csv", {
            "pixel": np.arange(1, 8), "nts_full": run.report.nts,
            **{f"nts_{k}pt": v for k, v in sorted(run.nts_minor.items())},
        })
        from petfisher.plotting import plot_system_matrix
        plot_system_matrix(d / "system_matrix.svg", run.scenario.P.p, title=f"sigma = {sigma:g}")
        man.output(d)
        print(f"sigma = {sigma:g}, T = {run.scenario.T:g}: empirical below, observed above the diagonal")
        print(table)
    results = acceptance.run_all(runs, seed=args.seed)
    man.stage("acceptance")
    lines = [line for r in results for line in r.lines()]
    (man.out_dir / "acceptance_summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    pio.write_json(man.output(man.out_dir / "acceptance_summary.json"), [r.to_dict() for r in results])
    man.output(man.out_dir / "acceptance_summary.txt")
    for r in results:
        print(r.line())


# -- parser -----------------------------------------------------------------

def _add_common(p):
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default ${OUTPUT_DIR_ENV} or the current directory)")


def _add_geometry(p):
    p.add_argument("--config", default=None, help="YAML or JSON scenario file")
    p.add_argument("--pixels", type=_positive_int("--pixels"), default=None)
    p.add_argument("--detectors", type=_positive_int("--detectors"), default=None)
    p.add_argument("--sigma", type=_positive_float("--sigma"), default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="petfisher", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-matrix", help="write a Gaussian system-matrix CSV")
    _add_geometry(p)
    _add_common(p)
    p.add_argument("--out", default=None, help="CSV path (default <out-dir>/system_matrix.csv)")
    p.add_argument("--plot", action="store_true", help="also write a heatmap SVG")

    p = sub.add_parser("simulate", help="draw Poisson detector counts")
    _add_geometry(p)
    _add_common(p)
    p.add_argument("--matrix", default=None, help="system-matrix CSV (overrides geometry flags)")
    p.add_argument("--lambda", dest="lambda_file", default=None, help="true per-unit charge CSV")
    p.add_argument("--true-lambda", type=_float_list, default=None, help="comma-separated true charges")
    p.add_argument("--T", type=_positive_float("--T"), default=None, help="exposure multiplier")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--run-index", type=int, default=0, help="substream index within the seed")
    p.add_argument("--out", default=None, help="CSV path (default <out-dir>/counts.csv)")

    p = sub.add_parser("reconstruct", help="EM reconstruction from counts")
    _add_common(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--iterations", type=_positive_int("--iterations"), default=200)
    p.add_argument("--tolerance", type=float, default=0.0,
                   help="stop once the MLE-condition residual max-norm is below this")
    p.add_argument("--init", default="uniform", help="'uniform' or a charge CSV (counts scale)")
    p.add_argument("--trajectory", action="store_true", help="dump every iterate")

    p = sub.add_parser("uncertainty", help="Fisher information, SEs and correlations")
    _add_common(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--lambda", dest="lambda_file", required=True, help="estimate CSV (counts scale)")
    p.add_argument("--counts", required=True)
    p.add_argument("--minors", type=_int_list, default=[1, 3], help="odd window sizes, e.g. 1,3")
    p.add_argument("--T", type=_positive_float("--T"), default=1.0, help="exposure used for per-unit reporting")
    p.add_argument("--iterations", type=int, default=None, help="EM iterations (recorded only)")
    p.add_argument("--empirical", default=None, help="per-unit MLE samples CSV to overlay")

    p = sub.add_parser("montecarlo", help="repeated simulate-and-reconstruct study")
    _add_geometry(p)
    _add_common(p)
    p.add_argument("--matrix", default=None)
    p.add_argument("--true-lambda", type=_float_list, default=None)
    p.add_argument("--T", type=_positive_float("--T"), default=None)
    p.add_argument("--iterations", type=_positive_int("--iterations"), default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--runs", type=_positive_int("--runs"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--init-mode", choices=["uniform", "true_tumor"], default=None)
    p.add_argument("--minors", type=_int_list, default=[1, 3])
    p.add_argument("--designated-run", type=int, default=0)
    p.add_argument("--average-fisher", action="store_true",
                   help="average the information over all runs instead of one designated run")
    p.add_argument("--dump-samples", action="store_true")
    p.add_argument("--threads", type=_positive_int("--threads"), default=None)

    p = sub.add_parser("reproduce", help="seven-pixel experiment with acceptance summary")
    _add_common(p)
    p.add_argument("--sigma", choices=["1.0", "1.5", "both"], default="both")
    p.add_argument("--runs", type=_positive_int("--runs"), default=10000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--iterations", type=_positive_int("--iterations"), default=200)
    p.add_argument("--init-mode", choices=["uniform", "true_tumor"], default="true_tumor")
    p.add_argument("--threads", type=_positive_int("--threads"), default=None)
    return parser


COMMANDS = {
    "build-matrix": cmd_build_matrix,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "uncertainty": cmd_uncertainty,
    "montecarlo": cmd_montecarlo,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    man = Manifest(args.command, _out_dir(args))
    code, error = 0, None
    try:
        COMMANDS[args.command](args, man)
    except PetFisherError as exc:
        code, error = exc.exit_code, exc
    except (FileNotFoundError, IsADirectoryError) as exc:
        code, error = 2, exc
    if error is not None:
        man.data["error"] = f"{type(error).__name__}: {error}"
        print(f"petfisher {args.command}: error: {error}", file=sys.stderr)
    man.data["exit_code"] = code
    man.write()
    return code


if __name__ == "__main__":
    sys.exit(main())
