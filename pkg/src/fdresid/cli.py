"""Command-line entry point: ``fdresid <subcommand> ...``.

Exit codes: 0 success, 1 computational failure, 2 configuration or
ingestion error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .harness import (MonteCarloReport, Prepared, RunResult, emit_report, evaluate_records, read_runs_csv,
                      run_monte_carlo, write_report_csv)
from .lti import SolverError, ValidationError
from .residuals import FilterSpec, design_butterworth, export_filter, write_frequency_response
from .signals import IngestionError, gen_fault, read_record_csv, write_record_csv
from .spectra import (analytic_disturbance_spectrum, default_grid, estimate_spectrum, optimal_frequency,
                      perf_index_freq, perf_index_time, write_spectrum_csv)

log = logging.getLogger("fdresid")

OUTPUT_ENV = "FDRESID_OUTPUT_DIR"


def _outdir(args) -> Path:
    d = Path(args.output_dir or os.environ.get(OUTPUT_ENV, "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_dare(args) -> int:
    config = cfgmod.load_config(args.config, args.overrides)
    prep = Prepared(config)
    sol = prep.kalman
    rows = []
    for label, M in (("K", sol.K), ("Lambda", sol.lam), ("P", sol.P)):
        for (i, j), v in np.ndenumerate(M):
            rows.append([label, i, j, repr(float(v))])
    out = _outdir(args) / "dare.csv"
    _write_rows(out, ["matrix", "i", "j", "value"], rows)
    print(f"K = {sol.K.ravel().tolist()}  Lambda = {sol.lam.ravel().tolist()}  iterations = {sol.iterations}")
    print(f"G: num={prep.G.numerator.tolist()} den={prep.G.denominator.tolist()}")
    print(f"H: num={prep.H.numerator.tolist()} den={prep.H.denominator.tolist()}")
    return 0


def cmd_simulate(args) -> int:
    """Export the training and test records of one Monte Carlo run."""
    config = cfgmod.load_config(args.config, args.overrides)
    prep = Prepared(config)
    train, test = prep.records(args.run_index)
    out = _outdir(args)
    write_record_csv(train, out / "train.csv")
    write_record_csv(test, out / "test.csv")
    meta = {"run_index": args.run_index, "lead": prep.lead, "fault_onset": prep.lead + config.fault_onset,
            "config_hash": config.digest()}
    (out / "dataset.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'train.csv'} and {out / 'test.csv'} (onset at row {meta['fault_onset']})")
    return 0


def cmd_design_filter(args) -> int:
    spec = FilterSpec(args.shape, args.order, cutoff=args.cutoff, low=args.low, high=args.high)
    filt = design_butterworth(spec)
    out = _outdir(args)
    stem = _safe(spec.label)
    export_filter(filt, out / f"filter_{stem}.csv")
    export_filter(filt, out / f"filter_{stem}.json")
    write_frequency_response(filt.tf, default_grid(), out / f"freqresp_{stem}.csv")
    print(f"{spec.label}: b={filt.tf.numerator.tolist()} a={filt.tf.denominator.tolist()}")
    return 0


def perf_index_rows(config, run_index: int = 0):
    """Time- and frequency-domain indices for every residual variant of ``config``."""
    prep = Prepared(config)
    train, test = prep.records(run_index)
    lead, onset = prep.lead, prep.lead + config.fault_onset
    grid = default_grid()
    phi_v = analytic_disturbance_spectrum(prep.H, prep.lam, grid)
    # fault spectrum over the faulty window only
    f_win = gen_fault(config.fault.shifted(lead), len(test))[onset:]
    phi_f = estimate_spectrum(f_win, grid)
    pe_w = np.abs(prep.Hinv(grid)) ** 2
    omega0, j_opt = optimal_frequency(phi_f, phi_v)
    rows, spectra = [], {"fault": phi_f, "disturbance_OE": phi_v, "disturbance_PE": phi_v.scaled(pe_w)}
    seen = set()
    for m in config.methods:
        key = (m.residual, m.filter)
        if key in seen:
            continue
        seen.add(key)
        r_train = prep.residual(train, m)
        r_test = prep.residual(test, m)
        j_time = perf_index_time(r_test.values[onset:], r_train.values[lead:])
        w = pe_w if m.residual == "PE" else 1.0
        if m.filter is not None:
            w = w * np.abs(prep.filters[m.filter].tf(grid)) ** 2
        j_freq = perf_index_freq(phi_f.scaled(w), phi_v.scaled(w))
        label = m.residual + ("" if m.filter is None else f"+{m.filter.label}")
        rows.append([label, f"{j_time:.10g}", f"{j_freq:.10g}", f"{omega0:.10g}", f"{j_opt:.10g}"])
    return rows, spectra


def cmd_perf_index(args) -> int:
    config = cfgmod.load_config(args.config, args.overrides)
    rows, spectra = perf_index_rows(config, args.run_index)
    out = _outdir(args)
    _write_rows(out / "perf_index.csv", ["method_id", "j_time", "j_freq", "omega0", "j_opt"], rows)
    write_spectrum_csv(spectra, out / "spectra.csv")
    for r in rows:
        print(f"{r[0]:>24s}  J_time={r[1]}  J_freq={r[2]}  omega0={r[3]}  J_opt={r[4]}")
    return 0


def _write_traces(prep: Prepared, path: Path, run_index: int = 0) -> None:
    train, test = prep.records(run_index)
    lead = prep.lead
    outcomes, traces = evaluate_records(prep, train, test, lead + prep.config.fault_onset, keep_traces=True)
    names = [m.name for m, _ in outcomes]
    header = ["t", "f"] + [f"{n}" for n in names] + [f"{n}_threshold" for n in names]
    n_eval = len(test) - lead
    rows = []
    for k in range(n_eval):
        rows.append([k, f"{test.f[lead + k]:.10g}"]
                    + [f"{traces[n][0][k]:.10g}" for n in names]
                    + [f"{traces[n][1]:.10g}" for n in names])
    _write_rows(path, header, rows)


def cmd_mc(args) -> int:
    config = cfgmod.load_config(args.config, args.overrides)
    report = run_monte_carlo(config, workers=args.workers, progress=True)
    out = _outdir(args)
    emit_report(report, out)
    prep = Prepared(config)
    grid = default_grid()
    write_frequency_response(prep.Hinv, grid, out / "freqresp_Hinv.csv")
    for spec, filt in prep.filters.items():
        write_frequency_response(filt.tf, grid, out / f"freqresp_{_safe(spec.label)}.csv")
    if not args.no_traces:
        _write_traces(prep, out / "traces.csv")
    log.info("%s: %d runs in %.1f s (config %s)", config.name, config.runs, report.elapsed, report.config_hash)
    _print_report(report)
    return 0


def _print_report(report: MonteCarloReport) -> None:
    print(f"{'method':>12s} {'s':>5s} {'alpha':>6s} {'FDR %':>9s} {'FAR %':>8s} {'MT2D':>10s} {'det':>5s}")
    for r in report.rows:
        print(f"{r.method:>12s} {r.s:5d} {r.alpha:6g} {r.fdr_pct:9.4f} {r.far_pct:8.4f} {r.mt2d:10.4f} {r.detected:5d}")


def eval_dataset(config, train_path, test_path, onset: int | None = None, lead: int | None = None):
    prep = Prepared(config)
    lead = prep.lead if lead is None else lead
    onset = lead + config.fault_onset if onset is None else onset
    train = read_record_csv(train_path)
    test = read_record_csv(test_path, fault_onset=onset)
    return prep, evaluate_records(prep, train, test, onset, lead=lead, keep_traces=True), lead


def cmd_eval_dataset(args) -> int:
    config = cfgmod.load_config(args.config, args.overrides)
    prep, (outcomes, traces), lead = eval_dataset(config, args.train, args.test, args.onset, args.lead)
    runs = [RunResult(0, m.name, m.s, m.alpha, o.fdr, o.far, o.mt2d, o.detected) for m, o in outcomes]
    report = MonteCarloReport.from_runs(runs, [m.name for m, _ in outcomes], config.digest())
    out = _outdir(args)
    write_report_csv(report, out / "indicators.csv", exact=True)
    names = list(traces)
    n = min(len(traces[k][0]) for k in names) if names else 0
    _write_rows(out / "eval_traces.csv", ["t", *names, *(f"{k}_threshold" for k in names)],
                [[lead + i, *(repr(float(traces[k][0][i])) for k in names),
                  *(repr(float(traces[k][1])) for k in names)] for i in range(n)])
    _print_report(report)
    return 0


def cmd_report(args) -> int:
    runs = read_runs_csv(args.runs)
    report = MonteCarloReport.from_runs(runs)
    out = Path(args.output) if args.output else _outdir(args) / "report.csv"
    write_report_csv(report, out)
    _print_report(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdresid", description="Residual generation and evaluation for fault detection.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="config file or bundled name (case1, case2, case3)")
        sp.add_argument("--overrides", nargs="*", action="extend", default=[], metavar="KEY=VALUE")
        sp.add_argument("--output-dir", "--output", dest="output_dir",
                        help=f"output directory (default ${OUTPUT_ENV} or ./out)")
        return sp

    sp = with_config(sub.add_parser("dare", help="solve the Riccati equation and print G, H"))
    sp.set_defaults(func=cmd_dare)

    sp = with_config(sub.add_parser("simulate", help="export one run's training/test records as CSV"))
    sp.add_argument("--run-index", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("design-filter", help="design a Butterworth post-filter")
    sp.add_argument("--shape", choices=["lowpass", "bandpass"], required=True)
    sp.add_argument("--order", type=int, default=2)
    sp.add_argument("--cutoff", type=float)
    sp.add_argument("--low", type=float)
    sp.add_argument("--high", type=float)
    sp.add_argument("--output-dir", "--output", dest="output_dir")
    sp.set_defaults(func=cmd_design_filter)

    sp = with_config(sub.add_parser("perf-index", help="fault-to-noise indices and spectra"))
    sp.add_argument("--run-index", type=int, default=0)
    sp.set_defaults(func=cmd_perf_index)

    sp = with_config(sub.add_parser("mc", help="run a Monte Carlo campaign"))
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--no-traces", action="store_true", help="skip the single-run trace CSV")
    sp.set_defaults(func=cmd_mc)

    sp = with_config(sub.add_parser("eval-dataset", help="evaluate methods on t,u,y CSV data"))
    sp.add_argument("--train", required=True, help="fault-free training CSV")
    sp.add_argument("--test", required=True, help="test CSV")
    sp.add_argument("--onset", type=int, help="fault onset row in the test file (default from config)")
    sp.add_argument("--lead", type=int, help="rows skipped before evaluation (default from config)")
    sp.set_defaults(func=cmd_eval_dataset)

    sp = sub.add_parser("report", help="aggregate a per-run CSV into the summary table")
    sp.add_argument("--runs", required=True)
    sp.add_argument("--output")
    sp.add_argument("--output-dir", dest="output_dir")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (cfgmod.ConfigError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.__cause__, ValidationError) else 1


if __name__ == "__main__":
    sys.exit(main())
