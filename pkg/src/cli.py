"""
Command-line front end.

    ehrjoint simulate  --config case.json --out data/
    ehrjoint validate  --data data/
    ehrjoint fit       --data data/ --design design.json --method ehrjoint --out fit/ [--boot 200]
    ehrjoint fit       --data data/ --design design.json --submodel visit
    ehrjoint benchmark --config bench.json --out bench/ [--threads 8]
    ehrjoint report    --in bench/ [--coefficient A]

Exit codes: 0 success, 1 unexpected error, 2 usage or configuration,
3 ingest, 4 validation, 5-15 estimation and bootstrap failures (see
src/exceptions.py), 16 file system errors.
"""

import argparse
import glob
import logging
import os
import sys
from typing import List, Optional

import pandas as pd
from joblib import cpu_count

from src import __version__
from src.constants import EXPOSURE, N_BOOT
from src.estimators import METHODS, create_estimator
from src.exceptions import IO_EXIT_CODE, ConfigError, DataValidationError, EHRJointError
from src.inference import bootstrap, run_coverage_study, run_replications, truth_of
from src.io.config_loader import (benchmark_config_from_dict, design_from_dict, load_config,
                                  seed_override, sim_config_from_dict)
from src.io.panel_csv import export_csv, ingest_csv
from src.io.report_writer import (RunWriter, combined_table, coverage_table, diagnostics_of,
                                  estimates_frame, read_report, report_payload)
from src.obs_process import estimate_alpha
from src.simgen import simulate
from src.visit_process import fit_visit_model

logger = logging.getLogger(__name__)

BASELINES = "baselines.csv"
EVENTS = "events.csv"


def _data_paths(data_dir: str):
    return os.path.join(data_dir, BASELINES), os.path.join(data_dir, EVENTS)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    config["seed"] = seed_override(config.get("seed", 0))
    sim_config = sim_config_from_dict(config)
    output = simulate(sim_config, args.replicate)

    writer = RunWriter(args.out, "simulate")
    baselines, events = writer.path(BASELINES), writer.path(EVENTS)
    export_csv(output.dataset, baselines, events)
    writer.record(BASELINES)
    writer.record(EVENTS)
    writer.json("truth.json", {
        "case_id": sim_config.case_id,
        "setting": sim_config.setting,
        "replicate": args.replicate,
        "beta": truth_of(sim_config),
        "threshold": output.threshold,
        "config": sim_config.to_dict(),
        "subjects": output.latent.to_dict(orient="records"),
    })
    writer.manifest([args.config], sim_config.seed, __version__,
                    {"replicate": args.replicate})
    logger.info("case %s: %d subjects, %d visits written to %s", sim_config.case_id,
                output.dataset.n_subjects, output.dataset.n_events, args.out)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    baselines, events = _data_paths(args.data)
    try:
        dataset = ingest_csv(baselines, events)
    except DataValidationError as err:
        logger.error("%s", err.report)
        raise
    logger.info("OK: %d subjects, %d visits, %d recorded", dataset.n_subjects,
                dataset.n_events, int(dataset.event_recorded.sum()))
    return 0


def _submodel_frame(submodel: str, dataset, design) -> pd.DataFrame:
    if submodel == "visit":
        fit = fit_visit_model(dataset, design.w_names)
        rows = [{"term": f"gamma:{n}", "time": None, "value": float(g)}
                for n, g in zip(fit.w_names, fit.gamma)]
        rows.append({"term": "sigma_eta2", "time": None, "value": fit.sigma_eta2})
        rows += [{"term": "baseline", "time": float(t), "value": float(v)}
                 for t, v in zip(fit.baseline.jump_times, fit.baseline.cumulative_values)]
        return pd.DataFrame(rows, columns=["term", "time", "value"])
    fit = estimate_alpha(dataset, design.v_names, intercept=design.v_intercept)
    return pd.DataFrame({"term": [f"alpha:{n}" for n in fit.names],
                         "value": [float(a) for a in fit.alpha]})


def cmd_fit(args: argparse.Namespace) -> int:
    design = design_from_dict(load_config(args.design))
    baselines, events = _data_paths(args.data)
    dataset = ingest_csv(baselines, events)
    design.check_against(dataset)

    if args.submodel:
        frame = _submodel_frame(args.submodel, dataset, design)
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
        if args.out:
            writer = RunWriter(args.out, f"fit --submodel {args.submodel}")
            writer.frame(f"{args.submodel}_model.csv", frame)
            writer.manifest([baselines, events, args.design], None, __version__)
        return 0
    if not args.out:
        raise ConfigError("fit: --out is required unless --submodel is given")

    estimator = create_estimator(args.method)
    fit = estimator.fit(dataset, design)
    estimates = fit if isinstance(fit, dict) else fit.coefficients()
    seed = seed_override(args.seed)
    boot = None
    if args.boot is not None:
        boot = bootstrap(dataset, estimator, design, n_boot=args.boot, seed=seed,
                         n_jobs=args.threads, verbose=True)

    writer = RunWriter(args.out, "fit")
    writer.frame("estimates.csv", estimates_frame(estimates, boot))
    writer.json("diagnostics.json", diagnostics_of(args.method, fit, boot))
    writer.manifest([baselines, events, args.design], seed, __version__,
                    {"method": args.method, "boot": args.boot})
    for name, value in estimates.items():
        logger.info("%s: %s = %.6f", args.method, name, value)
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    bench = benchmark_config_from_dict(load_config(args.config))
    writer = RunWriter(args.out, "benchmark")
    frames = {}
    for case_id in bench.cases:
        logger.info("case %s: %d replications of %s", case_id, bench.n_reps,
                    ", ".join(bench.methods))
        report = run_replications(bench.sim_config(case_id), bench.methods, bench.n_reps,
                                  design=bench.design, n_jobs=args.threads, verbose=True)
        frames[case_id] = report.to_frame()
        writer.frame(os.path.join(case_id, "report.csv"), frames[case_id])
        writer.json(os.path.join(case_id, "report.json"), report_payload(case_id, report))
        if bench.n_boot is not None:
            studies = [run_coverage_study(bench.sim_config(case_id), method, bench.n_reps,
                                          n_boot=bench.n_boot, design=bench.design,
                                          n_jobs=args.threads, verbose=True)
                       for method in bench.methods]
            writer.frame(os.path.join(case_id, "coverage.csv"), coverage_table(studies))
    writer.frame("combined.csv", combined_table(frames, bench.coefficient))
    writer.manifest([args.config], bench.seed, __version__, {"n_boot": bench.n_boot})
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    paths = sorted(glob.glob(os.path.join(args.input, "*", "report.csv")))
    if not paths:
        raise ConfigError(f"report: no <case>/report.csv under {args.input}")
    frames = {os.path.basename(os.path.dirname(p)): read_report(p) for p in paths}
    table = combined_table(frames, args.coefficient)
    writer = RunWriter(args.out or args.input, "report")
    writer.frame("combined.csv", table)
    writer.manifest(paths, None, __version__, {"coefficient": args.coefficient})
    table.to_csv(sys.stdout, index=False, lineterminator="\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehrjoint",
        description="Joint modeling of EHR visit, observation and biomarker processes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Generate one dataset of a simulation case")
    p.add_argument("--config", required=True, help="SimConfig file (JSON or YAML)")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--replicate", type=int, default=0, help="Replication index (default 0)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("validate", help="Check a baselines.csv/events.csv pair")
    p.add_argument("--data", required=True, help="Directory holding the two CSV files")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("fit", help="Fit one estimator to a dataset")
    p.add_argument("--data", required=True, help="Directory holding the two CSV files")
    p.add_argument("--design", required=True, help="DesignSpec file (JSON or YAML)")
    p.add_argument("--method", choices=METHODS, default="ehrjoint")
    p.add_argument("--submodel", choices=("visit", "obs"),
                   help="Fit only the visiting or observation model and print it as CSV")
    p.add_argument("--out", help="Output directory")
    p.add_argument("--boot", type=int, metavar="B",
                   help=f"Add bootstrap SE and percentile CI from B resamples (e.g. {N_BOOT})")
    p.add_argument("--seed", type=int, default=0, help="Bootstrap seed (EHRJOINT_SEED overrides)")
    p.add_argument("--threads", type=int, default=cpu_count(), help="Worker processes")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("benchmark", help="Monte Carlo replications over simulation cases")
    p.add_argument("--config", required=True, help="Benchmark file (JSON or YAML)")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--threads", type=int, default=cpu_count(), help="Worker processes")
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("report", help="Rebuild combined.csv from per-case reports")
    p.add_argument("--in", dest="input", required=True, help="Benchmark output directory")
    p.add_argument("--out", help="Output directory (default: the input directory)")
    p.add_argument("--coefficient", default=EXPOSURE, help="Coefficient to tabulate")
    p.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except EHRJointError as err:
        logger.error("%s: %s", type(err).__name__, err)
        return err.exit_code
    except OSError as err:
        logger.error("I/O error: %s", err)
        return IO_EXIT_CODE
    except Exception:
        logger.exception("unexpected error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
