"""Monte Carlo comparison of residual / evaluation-function designs.

Every run draws one fault-free training record and one test record with the
fault injected. All methods see the same two records. Each record starts with
a shared lead-in of ``lead`` samples that covers the longest evaluation window
and the slowest filter transient, so every method is scored on exactly
``N_test`` samples, ``fault_onset`` of them before the fault.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .lti import StateSpaceModel, ValidationError, solve_dare, ss_to_tf
from .residuals import (DEFAULT_TRANSIENT, DigitalFilter, FilterSpec, ResidualSeries, apply_filter,
                        design_butterworth, residual_oe, residual_pe)
from .signals import FaultSpec, SimulationRecord, gen_noise, simulate
from .stattests import (DetectionOutcome, EvalSeries, Threshold, chi2_threshold, decide, estimate_moments, eval_jkf, eval_t2,
                        indicators, t2_threshold)

log = logging.getLogger(__name__)

REPORT_COLUMNS = ["method", "s", "alpha", "FDR_pct", "FAR_pct", "MT2D", "detected"]
RUN_COLUMNS = ["run", "method", "s", "alpha", "FDR", "FAR", "MT2D", "detected"]


class MethodError(RuntimeError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    """One residual + evaluation design.

    residual: "OE" or "PE" (the Kalman innovation, computed as H^-1 (y - G u)).
    evaluation: "t2" (Hotelling T^2 with moments from training data) or
    "jkf" (windowed chi-square with the Riccati innovation covariance).
    """

    name: str
    residual: str
    evaluation: str
    alpha: float = 0.99
    s: int = 0
    filter: FilterSpec | None = None

    def __post_init__(self):
        res = self.residual.upper()
        if res == "KF":
            res = "PE"
        object.__setattr__(self, "residual", res)
        object.__setattr__(self, "evaluation", self.evaluation.lower())
        if res not in ("OE", "PE"):
            raise ValidationError(f"{self.name}: residual must be OE, PE or KF, got {self.residual!r}")
        if self.evaluation not in ("t2", "jkf"):
            raise ValidationError(f"{self.name}: evaluation must be t2 or jkf, got {self.evaluation!r}")
        if self.evaluation == "jkf" and (res != "PE" or self.filter is not None):
            raise ValidationError(f"{self.name}: jkf evaluation needs the unfiltered PE/KF residual")
        if not 0 < self.alpha < 1:
            raise ValidationError(f"{self.name}: alpha must be in (0, 1), got {self.alpha}")
        if int(self.s) != self.s or self.s < 0:
            raise ValidationError(f"{self.name}: s must be a non-negative integer, got {self.s}")

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual, "evaluation": self.evaluation,
                "alpha": self.alpha, "s": self.s,
                "filter": None if self.filter is None else self.filter.to_dict()}


@dataclass(frozen=True)
class ExperimentConfig:
    model: StateSpaceModel
    fault: FaultSpec  # onset is relative to the start of the evaluation window
    methods: tuple[MethodSpec, ...]
    N_train: int = 10_000
    N_test: int = 10_000
    runs: int = 500
    seed: int = 0
    name: str = "experiment"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.runs < 1:
            raise ValidationError(f"runs must be >= 1, got {self.runs}")
        if self.N_train < 100:
            raise ValidationError(f"N_train must be >= 100, got {self.N_train}")
        if not 0 < self.fault.onset < self.N_test:
            raise ValidationError(f"fault onset {self.fault.onset} must lie inside (0, N_test={self.N_test})")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValidationError(f"method names must be unique, got {names}")

    @property
    def fault_onset(self) -> int:
        return self.fault.onset

    def to_dict(self) -> dict:
        return {"name": self.name, "model": self.model.to_dict(), "fault": self.fault.to_dict(),
                "methods": [m.to_dict() for m in self.methods], "N_train": self.N_train,
                "N_test": self.N_test, "runs": self.runs, "seed": self.seed}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Prepared:
    """Per-config quantities shared by all runs (gain, transfer functions, filters)."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        model = config.model
        self.kalman = solve_dare(model)
        self.lam = self.kalman.lam
        self.G, self.H = ss_to_tf(model, self.kalman.K)
        self.Hinv = self.H.inverse()
        self.filters: dict[FilterSpec, DigitalFilter] = {}
        for m in config.methods:
            if m.filter is not None and m.filter not in self.filters:
                self.filters[m.filter] = design_butterworth(m.filter)

    def transient(self, m: MethodSpec) -> int:
        t = DEFAULT_TRANSIENT
        if m.filter is not None:
            t = max(t, self.filters[m.filter].settling_length())
        return t + m.s

    @cached_property
    def lead(self) -> int:
        return max([DEFAULT_TRANSIENT] + [self.transient(m) for m in self.config.methods])

    def seeds(self, run_index: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
        ss = np.random.SeedSequence(entropy=self.config.seed, spawn_key=(run_index,))
        train, test = ss.spawn(2)
        return train, test

    def records(self, run_index: int) -> tuple[SimulationRecord, SimulationRecord]:
        cfg = self.config
        s_train, s_test = self.seeds(run_index)
        lead = self.lead
        train = simulate(cfg.model, FaultSpec(), gen_noise(cfg.model, lead + cfg.N_train, s_train),
                         model_id=cfg.name)
        test = simulate(cfg.model, cfg.fault.shifted(lead), gen_noise(cfg.model, lead + cfg.N_test, s_test),
                        model_id=cfg.name)
        return train, test

    def residual(self, record: SimulationRecord, m: MethodSpec, cache: dict | None = None) -> ResidualSeries:
        key = (m.residual, m.filter)
        if cache is not None and key in cache:
            return cache[key]
        base_key = (m.residual, None)
        if cache is not None and base_key in cache:
            r = cache[base_key]
        elif m.residual == "OE":
            r = residual_oe(record, self.G)
        else:
            r = residual_pe(record, self.G, self.H)
        if cache is not None:
            cache[base_key] = r
        if m.filter is not None:
            r = apply_filter(self.filters[m.filter], r)
            if cache is not None:
                cache[key] = r
        return r

    def evaluate(self, m: MethodSpec, train_res: ResidualSeries, test_res: ResidualSeries,
                 lead: int) -> tuple[EvalSeries, Threshold]:
        if m.evaluation == "jkf":
            ev = eval_jkf(test_res, self.lam, m.s)
            th = chi2_threshold((m.s + 1) * self.lam.shape[0], m.alpha)
        else:
            train = train_res.values[lead:]
            mu, S = estimate_moments(train)
            ev = eval_t2(test_res, mu, S)
            th = t2_threshold(S.shape[0], len(train), m.alpha)
        return ev, th


def evaluate_records(prep: Prepared, train: SimulationRecord, test: SimulationRecord,
                     fault_onset: int, lead: int | None = None,
                     keep_traces: bool = False) -> list[tuple[MethodSpec, DetectionOutcome]] | tuple:
    """Score every configured method on one (training, test) record pair.

    ``fault_onset`` is absolute within ``test``; evaluation covers
    [lead, len(test)) and moments use training samples [lead, len(train)).
    """
    lead = prep.lead if lead is None else lead
    if len(train) - lead < 100:
        raise ValidationError(f"training record has {len(train) - lead} post-transient samples, need >= 100")
    if not lead < fault_onset < len(test):
        raise ValidationError(f"fault onset {fault_onset} must lie in ({lead}, {len(test)})")
    c_train: dict = {}
    c_test: dict = {}
    out = []
    traces = {}
    for m in prep.config.methods:
        try:
            r_train = prep.residual(train, m, c_train)
            r_test = prep.residual(test, m, c_test)
            ev, th = prep.evaluate(m, r_train, r_test, lead)
            outcome = indicators(decide(ev, th), fault_onset, eval_start=lead, offset=ev.offset)
        except Exception as exc:
            raise MethodError(f"method {m.name!r}: {exc}") from exc
        out.append((m, outcome))
        if keep_traces:
            traces[m.name] = (ev.values[lead - ev.offset:], th.value)
    return (out, traces) if keep_traces else out


def run_single(config: ExperimentConfig, run_index: int, prep: Prepared | None = None
               ) -> list[tuple[MethodSpec, DetectionOutcome]]:
    prep = Prepared(config) if prep is None else prep
    train, test = prep.records(run_index)
    return evaluate_records(prep, train, test, prep.lead + config.fault_onset)


@dataclass(frozen=True)
class RunResult:
    run: int
    method: str
    s: int
    alpha: float
    fdr: float
    far: float
    mt2d: float
    detected: bool


@dataclass(frozen=True)
class MethodSummary:
    method: str
    s: int
    alpha: float
    fdr_pct: float
    far_pct: float
    mt2d: float
    detected: int
    runs: int
    fdr_se_pct: float = float("nan")


@dataclass
class MonteCarloReport:
    rows: list[MethodSummary]
    config_hash: str = ""
    elapsed: float = 0.0
    runs: list[RunResult] = field(default_factory=list)

    def row(self, method: str) -> MethodSummary:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    @classmethod
    def from_runs(cls, runs: list[RunResult], method_order: list[str] | None = None,
                  config_hash: str = "", elapsed: float = 0.0) -> "MonteCarloReport":
        order = method_order or list(dict.fromkeys(r.method for r in runs))
        rows = []
        for name in order:
            rs = [r for r in runs if r.method == name]
            if not rs:
                continue
            fdr = np.array([r.fdr for r in rs])
            far = np.array([r.far for r in rs])
            det = [r.mt2d for r in rs if r.detected]
            rows.append(MethodSummary(
                method=name, s=rs[0].s, alpha=rs[0].alpha,
                fdr_pct=100 * float(fdr.mean()), far_pct=100 * float(far.mean()),
                mt2d=float(np.mean(det)) if det else float("nan"), detected=len(det), runs=len(rs),
                fdr_se_pct=100 * float(fdr.std(ddof=1) / math.sqrt(len(rs))) if len(rs) > 1 else float("nan"),
            ))
        return cls(rows=rows, config_hash=config_hash, elapsed=elapsed, runs=list(runs))


def _run_chunk(args) -> list[RunResult]:
    config, indices = args
    prep = Prepared(config)
    out = []
    for i in indices:
        for m, o in run_single(config, i, prep):
            out.append(RunResult(i, m.name, m.s, m.alpha, o.fdr, o.far, o.mt2d, o.detected))
    return out


def run_monte_carlo(config: ExperimentConfig, workers: int = 1, progress: bool = False) -> MonteCarloReport:
    """Aggregate ``run_single`` over ``config.runs`` runs.

    Each run's seeds depend only on (seed, run index), so the report does not
    depend on ``workers``.
    """
    t0 = time.perf_counter()
    indices = list(range(config.runs))
    results: list[RunResult] = []
    if workers <= 1:
        prep = Prepared(config)
        for i in indices:
            try:
                for m, o in run_single(config, i, prep):
                    results.append(RunResult(i, m.name, m.s, m.alpha, o.fdr, o.far, o.mt2d, o.detected))
            except Exception as exc:
                raise RuntimeError(f"run {i} failed: {exc}") from exc
            if progress and (i + 1) % max(1, config.runs // 10) == 0:
                log.info("%s: %d/%d runs", config.name, i + 1, config.runs)
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for part in ex.map(_run_chunk, [(config, c) for c in chunks]):
                results.extend(part)
        results.sort(key=lambda r: r.run)
    elapsed = time.perf_counter() - t0
    return MonteCarloReport.from_runs(results, [m.name for m in config.methods], config.digest(), elapsed)


def _fmt(x: float) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.6f}"


def write_report_csv(report: MonteCarloReport, path, exact: bool = False) -> None:
    """Summary rows; ``exact`` writes round-trippable floats instead of 6 decimals."""
    fmt = repr if exact else _fmt
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([r.method, r.s, f"{r.alpha:g}", fmt(r.fdr_pct), fmt(r.far_pct), fmt(r.mt2d), r.detected])


def write_table_csv(report: MonteCarloReport, path) -> None:
    """Indicators as rows, methods as columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["indicator", *(r.method for r in report.rows)])
        w.writerow(["FDR (%)", *(_fmt(r.fdr_pct) for r in report.rows)])
        w.writerow(["FAR (%)", *(_fmt(r.far_pct) for r in report.rows)])
        w.writerow(["MT2D (sample)", *(_fmt(r.mt2d) for r in report.rows)])


def write_runs_csv(runs: list[RunResult], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in runs:
            w.writerow([r.run, r.method, r.s, repr(r.alpha), repr(r.fdr), repr(r.far), repr(r.mt2d), int(r.detected)])


def read_runs_csv(path) -> list[RunResult]:
    with Path(path).open(newline="") as fh:
        return [RunResult(int(row["run"]), row["method"], int(row["s"]), float(row["alpha"]),
                          float(row["FDR"]), float(row["FAR"]), float(row["MT2D"]), bool(int(row["detected"])))
                for row in csv.DictReader(fh)]


def emit_report(report: MonteCarloReport, destination, per_run: bool = True) -> list[Path]:
    """Write report.csv, table.csv and (optionally) runs.csv into ``destination``.

    A destination ending in .csv writes only the summary table there.
    """
    dest = Path(destination)
    try:
        if dest.suffix == ".csv":
            write_report_csv(report, dest)
            return [dest]
        paths = [dest / "report.csv", dest / "table.csv"]
        write_report_csv(report, paths[0])
        write_table_csv(report, paths[1])
        if per_run:
            paths.append(dest / "runs.csv")
            write_runs_csv(report.runs, paths[2])
    except OSError as exc:
        raise OSError(f"cannot write report to {dest}: {exc}") from exc
    return paths

