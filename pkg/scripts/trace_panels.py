"""Dump plot data for run 0 of a bundled case: evaluation traces with
thresholds, filter frequency responses and residual spectra, all as CSV.

    python scripts/trace_panels.py --case case1 --out panels/
"""
from __future__ import annotations

import argparse
from pathlib import Path

from fdresid.cli import main as cli_main


def main() -> None:
    p = argparse.ArgumentParser(description="single-run plot data for one bundled case")
    p.add_argument("--case", default="case1")
    p.add_argument("--out", type=Path, default=Path("panels"))
    a = p.parse_args()
    out = a.out / a.case
    # traces.csv and freqresp_*.csv from a one-run campaign; spectra.csv from perf-index
    cli_main(["mc", "--config", a.case, "--overrides", "runs=1", "--output-dir", str(out)])
    cli_main(["perf-index", "--config", a.case, "--output-dir", str(out)])
    print(f"plot data in {out}")


if __name__ == "__main__":
    main()
