"""Command-line interface.

Three subcommands:

* ``analyze``         run the invariance search on a CSV file and emit a
                      JSON report.  Exit code 0 on success, 2 when no
                      invariant model was found (a finding, not a
                      failure), 1 on any error.
* ``simulate``        run a randomised-scenario benchmark sweep and emit
                      aggregate JSON (plus an optional per-run CSV).
* ``export-fixture``  write one of the named benchmark datasets as CSV.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np
import pandas as pd

from .data import split_environments_by_variable, validate_dataset
from .engine import IcpConfig, run_icp
from .errors import InvarcpError
from .fixtures import FIXTURE_NAMES, make_fixture
from .hidden import run_hidden_icp
from .report import BenchmarkReport, make_analysis_report
from .sem import generate_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MODEL_REJECTED = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors by default, which would
    # collide with the model-rejection signal.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="invarcp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the invariance search on a CSV file")
    pa.add_argument("csv_path")
    pa.add_argument("--target", required=True, help="target column name")
    group = pa.add_mutually_exclusive_group(required=True)
    group.add_argument("--env", help="environment label column")
    group.add_argument("--split-col", help="derive environments by binning this column")
    pa.add_argument(
        "--cutpoints",
        help="comma-separated increasing cutpoints for --split-col",
    )
    pa.add_argument(
        "--keep-split-col",
        action="store_true",
        help="keep the split column among the predictors",
    )
    pa.add_argument("--alpha", type=float, default=0.05)
    pa.add_argument("--method", type=int, choices=(1, 2), default=2)
    pa.add_argument("--max-set-size", type=int, default=None)
    pa.add_argument("--preselect", type=int, default=None, metavar="Q")
    pa.add_argument("--gof-cutoff", type=float, default=0.0)
    pa.add_argument("--robust-v", type=int, default=0)
    pa.add_argument("--hidden", action="store_true", help="hidden-confounder test")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--out", help="write the JSON report here instead of stdout")

    ps = sub.add_parser("simulate", help="randomised-scenario benchmark sweep")
    ps.add_argument("--scenarios", type=int, default=10, metavar="N")
    ps.add_argument("--reps", type=int, default=10, metavar="R")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--method", type=int, choices=(1, 2), default=2)
    ps.add_argument("--alpha", type=float, default=0.05)
    ps.add_argument("--max-set-size", type=int, default=3)
    ps.add_argument("--preselect", type=int, default=12, metavar="Q")
    ps.add_argument("--out-csv", help="write one row per scenario x replicate")
    ps.add_argument("--out", help="write the aggregate JSON here instead of stdout")

    pe = sub.add_parser("export-fixture", help="write a named benchmark dataset")
    pe.add_argument("name", choices=FIXTURE_NAMES)
    pe.add_argument("--n", type=int, default=1000, help="rows per environment")
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", required=True)
    return parser


def _parse_cutpoints(text: str) -> list[float]:
    try:
        cuts = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise InvarcpError(f"could not parse cutpoints {text!r}") from exc
    if not cuts:
        raise InvarcpError("need at least one cutpoint")
    return cuts


def cmd_analyze(args) -> int:
    start = time.perf_counter()
    try:
        frame = pd.read_csv(args.csv_path)
    except Exception as exc:
        print(f"invarcp: could not read {args.csv_path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.env is not None:
        d = validate_dataset(frame, args.target, args.env)
    else:
        if args.cutpoints is None:
            raise InvarcpError("--split-col requires --cutpoints")
        if "_env_" in frame.columns:
            raise InvarcpError("input already has a reserved column '_env_'")
        frame = frame.assign(_env_=1)
        d = validate_dataset(frame, args.target, "_env_")
        d = split_environments_by_variable(
            d,
            args.split_col,
            _parse_cutpoints(args.cutpoints),
            keep_as_predictor=args.keep_split_col,
        )
    cfg = IcpConfig(
        alpha=args.alpha,
        method=args.method,
        max_set_size=args.max_set_size,
        preselect_q=args.preselect,
        gof_cutoff=args.gof_cutoff,
        robust_v=args.robust_v,
        seed=args.seed,
    )
    result = run_hidden_icp(d, cfg) if args.hidden else run_icp(d, cfg)
    config_echo = {
        "alpha": args.alpha,
        "method": args.method,
        "max_set_size": args.max_set_size,
        "preselect_q": args.preselect,
        "gof_cutoff": args.gof_cutoff,
        "robust_v": args.robust_v,
        "hidden": args.hidden,
        "seed": args.seed,
    }
    report = make_analysis_report(
        d, result, config_echo, time.perf_counter() - start, hidden=args.hidden
    )
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_MODEL_REJECTED if result.model_rejected else EXIT_OK


def cmd_simulate(args) -> int:
    start = time.perf_counter()
    if args.scenarios < 1 or args.reps < 1:
        raise InvarcpError("--scenarios and --reps must be at least 1")
    rows = []
    root = np.random.SeedSequence(args.seed)
    for i, scenario_seq in enumerate(root.spawn(args.scenarios)):
        streams = scenario_seq.spawn(args.reps + 1)
        scenario = generate_scenario(np.random.default_rng(streams[0]))
        truth = scenario.parent_cols()
        base_row = {
            "scenario": i,
            "p": scenario.params.p,
            "k_avg": scenario.params.k_avg,
            "n_obs": scenario.params.n_obs,
            "n_int": scenario.params.n_int,
            "target_intervened": scenario.target_intervened,
            "n_parents": len(truth),
            "parents": ";".join(str(k) for k in sorted(truth)),
        }
        for j in range(args.reps):
            rep_seq = streams[j + 1]
            cfg = IcpConfig(
                alpha=args.alpha,
                method=args.method,
                max_set_size=args.max_set_size,
                preselect_q=args.preselect if scenario.params.p > args.preselect else None,
                seed=int(rep_seq.generate_state(1)[0]),
            )
            row = dict(base_row, rep=j)
            try:
                d = scenario.sample_dataset(np.random.default_rng(rep_seq))
                result = run_icp(d, cfg)
                row.update(
                    status="ok",
                    success=(result.s_hat == truth),
                    error=(not result.s_hat <= truth),
                    model_rejected=result.model_rejected,
                    tested_count=result.tested_count,
                    best_p=result.best_p,
                    s_hat=";".join(str(k) for k in sorted(result.s_hat)),
                )
            except InvarcpError as exc:
                row.update(
                    status=type(exc).__name__,
                    success=False,
                    error=False,
                    model_rejected=False,
                    tested_count=0,
                    best_p=None,
                    s_hat="",
                )
            rows.append(row)
    config_echo = {
        "scenarios": args.scenarios,
        "reps": args.reps,
        "seed": args.seed,
        "method": args.method,
        "alpha": args.alpha,
        "max_set_size": args.max_set_size,
        "preselect_q": args.preselect,
    }
    report = BenchmarkReport(
        config=config_echo, rows=rows, runtime_seconds=time.perf_counter() - start
    )
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_export_fixture(args) -> int:
    d = make_fixture(args.name, args.n, np.random.default_rng(args.seed))
    d.to_frame().to_csv(args.out, index=False)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "analyze": cmd_analyze,
        "simulate": cmd_simulate,
        "export-fixture": cmd_export_fixture,
    }
    try:
        return handlers[args.command](args)
    except InvarcpError as exc:
        print(f"invarcp: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
