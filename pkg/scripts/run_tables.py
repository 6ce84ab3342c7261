"""Run the three bundled Monte Carlo cases and print their detection tables.

    python scripts/run_tables.py --runs 500 --workers 4 --out results/
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass, replace
from pathlib import Path

from fdresid import emit_report, run_monte_carlo
from fdresid.config import load_config


@dataclass
class TablesConfig:
    cases: tuple[str, ...] = ("case1", "case2", "case3")
    runs: int | None = None  # None keeps each config's own run count
    workers: int = 1
    out: Path = Path("results")


def run(cfg: TablesConfig) -> None:
    for case in cfg.cases:
        exp = load_config(case)
        if cfg.runs is not None:
            exp = replace(exp, runs=cfg.runs)
        t0 = time.perf_counter()
        report = run_monte_carlo(exp, workers=cfg.workers)
        emit_report(report, cfg.out / case)
        print(f"\n{case}: {exp.runs} runs, {time.perf_counter() - t0:.1f} s")
        print(f"{'method':>10s} {'FDR %':>8s} {'+/-':>6s} {'FAR %':>7s} {'MT2D':>9s} {'det':>5s}")
        for r in report.rows:
            print(f"{r.method:>10s} {r.fdr_pct:8.2f} {r.fdr_se_pct:6.2f} {r.far_pct:7.2f} {r.mt2d:9.1f} "
                  f"{r.detected:5d}")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cases", nargs="+", default=list(TablesConfig.cases))
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=TablesConfig.out)
    a = p.parse_args()
    run(TablesConfig(tuple(a.cases), a.runs, a.workers, a.out))


if __name__ == "__main__":
    main()
