"""Per-trial effect of replacing f by 2f on log sigma, N(r, 0, f_omega) and the deviation.

The zeros of 2 f_omega are those of f_omega, so N is unchanged while log sigma
moves by log 2; the deviation therefore moves by log 2 unless the sign of
log sigma - N flips in between.
"""

import argparse
import math

import numpy as np

from randentire.config import ExperimentConfig
from randentire.experiments import run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=20240101)
    args = ap.parse_args(argv)
    d = {"experiment": "theorem1", "model": "gaussian", "radii": [5.0, 10.0, 20.0, 40.0],
         "trials": args.trials, "seed": args.seed}
    _, plain = run(ExperimentConfig.from_dict({**d, "base": "exponential"}))
    _, doubled = run(ExperimentConfig.from_dict({**d, "base": "exponential;scale=2"}))
    dn = np.array([b.N_zero - a.N_zero for a, b in zip(plain, doubled)])
    ds = np.array([b.log_sigma_f - a.log_sigma_f for a, b in zip(plain, doubled)])
    dd = np.array([abs(b.deviation - a.deviation) for a, b in zip(plain, doubled)])
    print(f"max |change in N|            {np.max(np.abs(dn)):.3e}")
    print(f"change in log sigma - log 2  {np.max(np.abs(ds - math.log(2))):.3e}")
    print(f"deviation change: min {dd.min():.6f}  median {np.median(dd):.6f}  max {dd.max():.6f}")
    print(f"rows with change == log 2    {np.mean(np.abs(dd - math.log(2)) < 1e-9):.3f}")


if __name__ == "__main__":
    main()
