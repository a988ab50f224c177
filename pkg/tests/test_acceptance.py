"""Acceptance criteria, one test each; the terminal summary prints a PASS/FAIL line per criterion."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from randentire.cli import execute
from randentire.config import ExperimentConfig, RunManifest
from randentire.errors import RandEntireError
from randentire.experiments import run
from randentire.functionals import (count_zeros_argument, find_zeros, jensen_residual, sigma_omega_integral,
                                    sigma_omega_parseval, with_jitter)
from randentire.models import RandomModel, sample_function
from randentire.series import CoefficientSequence

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SHIPPED = sorted(p.stem for p in CONFIGS.glob("*.json"))
MODELS = list(RandomModel)
EXP = CoefficientSequence.exponential()


class ShippedRuns:
    """Runs each shipped manifest at most once per worker count."""

    def __init__(self, root):
        self.root = root
        self.cache = {}

    def __call__(self, name, workers=1):
        key = (name, workers)
        if key not in self.cache:
            path = CONFIGS / f"{name}.json"
            cfg = ExperimentConfig.load(path)
            out = self.root / f"{name}-w{workers}"
            out.mkdir()
            manifest = RunManifest(str(path), cfg, str(out), cfg.output.format, workers)
            start = time.perf_counter()
            report = execute(manifest, cfg.experiment in ("tails", "condition_y", "gaussian_cdf",
                                                          "moment_growth"))
            elapsed = time.perf_counter() - start
            records = (out / report["records"]).read_bytes()
            self.cache[key] = (report, records, elapsed)
        return self.cache[key]


@pytest.fixture(scope="session")
def shipped(tmp_path_factory):
    return ShippedRuns(tmp_path_factory.mktemp("shipped"))


def _random_samples(count, seed, max_degree=60, r_range=(0.5, 20.0)):
    rng = np.random.default_rng(seed)
    for k in range(count):
        model = MODELS[k % 3]
        degree = int(rng.integers(1, max_degree + 1))
        r = float(rng.uniform(*r_range))
        yield sample_function(EXP, model, degree, seed, k), r


def _check_failures(report):
    checks = {c["name"]: c for c in report["checks"]}
    failing = [name for name, c in checks.items() if not c["passed"]]
    assert not failing, failing
    return checks


@pytest.mark.acceptance(1, "Jensen-Poisson residual <= 1e-7 on 500 samples, < 30 s")
def test_jensen_poisson_identity():
    start = time.perf_counter()
    worst = 0.0
    for sample, r in _random_samples(500, seed=101):
        res, _ = with_jitter(lambda rk: jensen_residual(sample, rk), r)
        worst = max(worst, res)
    elapsed = time.perf_counter() - start
    print(f"max residual {worst:.3e} in {elapsed:.1f} s")
    assert worst <= 1e-7
    assert elapsed < 30.0


@pytest.mark.acceptance(2, "argument-principle count equals root-finder count on 300 samples")
def test_zero_count_oracle_equality():
    failures = 0
    mismatches = []
    for sample, r in _random_samples(300, seed=202):
        try:
            n_arg, r_used = with_jitter(lambda rk: count_zeros_argument(sample, rk), r)
            n_roots = find_zeros(sample, 0.0, r_used).count(r_used)
        except RandEntireError:
            failures += 1
            continue
        if n_arg != n_roots:
            mismatches.append((sample.trial_index, r, n_arg, n_roots))
    print(f"failures {failures}/300, mismatches {len(mismatches)}")
    assert not mismatches
    assert failures / 300 < 0.01


@pytest.mark.acceptance(3, "Parseval coefficient side equals integral side to 1e-10 on 200 samples")
def test_parseval_cross_check():
    worst = 0.0
    for sample, r in _random_samples(200, seed=303):
        a, b = sigma_omega_parseval(sample, r), sigma_omega_integral(sample, r)
        worst = max(worst, abs(a - b) / a)
    print(f"max relative gap {worst:.3e}")
    assert worst <= 1e-10


@pytest.mark.acceptance(4, "Gaussian pointwise law KS <= 0.0163 at r=10 over 1e4 trials, < 60 s")
def test_gaussian_pointwise_law(shipped):
    report, _, elapsed = shipped("gaussian_cdf")
    (ks,) = report["aggregate"]["ks"]
    print(f"KS {ks['ks_statistic']:.5f} (n={ks['n']}) in {elapsed:.1f} s")
    assert ks["n"] == 10_000 and ks["r"] == 10.0
    assert ks["ks_statistic"] <= 0.0163
    assert elapsed < 60.0


def _theorem1_rows(shipped):
    report, _, _ = shipped("theorem1_gaussian")
    cfg = report["config"]
    assert cfg["base"] == {"kind": "exponential"} and cfg["model"] == "gaussian" and cfg["trials"] == 200
    assert cfg["radii"] == [5.0, 10.0, 20.0, 40.0]
    assert cfg["constants"]["A"] == pytest.approx(2 / 1.1) and cfg["constants"]["B"] == 1.0
    assert cfg["constants"]["C"] == pytest.approx(1.2)
    return report, report["aggregate"]["per_radius"]


@pytest.mark.acceptance(5, "band violation fraction nonincreasing within 3 SE and <= 10% at r=40")
def test_theorem1_band(shipped):
    report, rows = _theorem1_rows(shipped)
    frac = [e["violations"]["thm1"]["fraction"] for e in rows]
    se = [e["violations"]["thm1"]["se"] for e in rows]
    print(f"violation fractions {frac}")
    for i in range(len(frac)):
        for j in range(i + 1, len(frac)):
            assert frac[j] <= frac[i] + 3 * math.hypot(se[i], se[j])
    assert frac[-1] <= 0.10
    _check_failures(report)


@pytest.mark.acceptance(6, "median N/r in [0.8, 1.1] at r=20; median |N/r - 1| decreasing from r=5 to 40")
def test_counting_function_close_to_r(shipped):
    _, rows = _theorem1_rows(shipped)
    by_r = {e["r"]: e for e in rows}
    med = by_r[20.0]["N_over_r"]["median"]
    gaps = [e["abs_N_over_r_minus_1"]["median"] for e in rows]
    print(f"median N/r at 20: {med:.4f}; median |N/r - 1|: {gaps}")
    assert 0.8 <= med <= 1.1
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


@pytest.mark.acceptance(7, "deterministic bounds hold on every shipped base with stable maxlem slack")
@pytest.mark.parametrize("name", [n for n in SHIPPED if n.startswith("bounds_")])
def test_deterministic_bounds(shipped, name):
    report, _, _ = shipped(name)
    rows = report["aggregate"]["per_radius"]
    for e in rows:
        assert e["T_f"] <= e["log_sigma_f"] + 0.5 * math.log(2.0)
        assert e["log_sigma_f"] <= e["log_M_f"] + 1e-9 * abs(e["log_M_f"])
        for col in ("slack_lem3", "slack_sigma_le_M", "slack_maxlem"):
            assert math.isfinite(e[col])
    upper = [e["slack_maxlem"] for e in rows[len(rows) // 2:]]
    print(f"{name}: maxlem slack variation {max(upper) - min(upper):.3f}")
    assert max(upper) - min(upper) < 2.0
    _check_failures(report)


@pytest.mark.acceptance(8, "condition Y estimate finite with top-1% share < 50% for all three models")
@pytest.mark.parametrize("model, A, B", [("gaussian", 2 / 1.1, 1.0), ("steinhaus", 0.5, 1.0),
                                         ("rademacher", None, 1 / 6)])
def test_condition_y_finite(shipped, model, A, B):
    report, _, _ = shipped(f"condition_y_{model}")
    cfg = report["config"]
    assert cfg["model"] == model and cfg["trials"] == 5000 and cfg["radii"] == [5.0, 20.0]
    if A is not None:
        assert cfg["constants"]["A"] == pytest.approx(A)
    assert cfg["constants"]["B"] == pytest.approx(B)
    for est in report["aggregate"]["estimates"]:
        print(f"{model} r={est['r']}: {est['estimate']:.4f} [{est['ci_low']:.4f}, {est['ci_high']:.4f}] "
              f"top-1% {est['top1_share']:.3f}")
        assert est["finite"] and math.isfinite(est["ci_high"])
        assert est["top1_share"] < 0.5
    assert report["aggregate"]["failed"] == 0


@pytest.mark.acceptance(9, "empirical tails below C1/x^C within 3 SE, per model")
@pytest.mark.parametrize("model", ["gaussian", "rademacher", "steinhaus"])
def test_tail_domination(shipped, model):
    report, _, _ = shipped(f"tails_{model}")
    for tail in report["aggregate"]["tails"]:
        excess = [e - b - 3 * s for e, b, s in zip(tail["empirical_tail"], tail["bound_curve"],
                                                    tail["standard_error"])]
        print(f"{model} r={tail['r']}: worst excess {max(excess):.4f}")
        assert max(excess) <= 0.0


@pytest.mark.acceptance(10, "replacing f by 2f leaves each trial's deviation unchanged to 1e-9")
def test_scaling_invariance():
    d = {"experiment": "theorem1", "model": "gaussian", "radii": [5.0, 10.0, 20.0, 40.0], "trials": 50,
         "seed": 20240101}
    _, plain = run(ExperimentConfig.from_dict({**d, "base": "exponential"}))
    _, doubled = run(ExperimentConfig.from_dict({**d, "base": "exponential;scale=2"}))
    diffs = [abs(a.deviation - b.deviation) for a, b in zip(plain, doubled)]
    print(f"max per-trial deviation change {max(diffs):.6f} (log 2 = {math.log(2):.6f})")
    assert max(diffs) <= 1e-9


@pytest.mark.acceptance(11, "shipped manifests give byte-identical records for 1 and 2 workers")
@pytest.mark.parametrize("name", SHIPPED)
def test_reproducible_across_workers(shipped, name):
    _, one, _ = shipped(name, workers=1)
    _, two, _ = shipped(name, workers=2)
    assert one == two
