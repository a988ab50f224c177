"""Run every shipped manifest through the CLI and tabulate exit codes.

    python scripts/run_shipped.py [--out out] [--workers N] [names...]
"""

import argparse
import io
import sys
import time
from pathlib import Path

from randentire.cli import main
from randentire.config import TAIL_EXPERIMENTS, ExperimentConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_one(path: Path, out: Path, workers: str) -> tuple:
    cfg = ExperimentConfig.load(path)
    command = "tails" if cfg.experiment in TAIL_EXPERIMENTS else "verify"
    buf = io.StringIO()
    start = time.perf_counter()
    code = main([command, "--config", str(path), "--out", str(out / path.stem), "--workers", workers], out=buf)
    return code, time.perf_counter() - start, buf.getvalue()


def main_cli(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems; default all")
    ap.add_argument("--out", default="out")
    ap.add_argument("--workers", default="1")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    paths = sorted(CONFIGS.glob("*.json"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    worst = 0
    for path in paths:
        code, elapsed, text = run_one(path, Path(args.out), args.workers)
        worst = max(worst, code)
        print(f"{path.stem:<28} exit={code}  {elapsed:6.1f} s")
        if args.verbose or code:
            print("    " + text.rstrip().replace("\n", "\n    "))
    return worst


if __name__ == "__main__":
    sys.exit(main_cli())
