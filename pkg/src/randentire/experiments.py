"""Monte Carlo harness: per-trial records, aggregate reports, pass/fail checks.

Each runner returns ``(report, records)``.  Trials are independent tasks run
on a process pool and merged in trial-index order, so the record stream does
not depend on the worker count.  Every aggregate is a fold over records.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial

import numpy as np
from scipy import stats

from . import version_string
from .config import ExperimentConfig, validate_for_run
from .errors import RandEntireError
from .functionals import (abs_log_moment, characteristic_T_base, counting_N, find_zeros, log_sigma_omega,
                          proximity_m, with_jitter, x_r_functional)
from .models import RandomModel, sample_function
from .records import (SampleRecord, TrialRecord, bands, binomial_se, fold, violation_a_flags,
                      violation_flags, with_thresholds)
from .series import (horner, log_max_modulus, log_sigma, log_sigma_derivative, scaled_poly,
                     truncation_degree)

# numeric failures that mark a trial as failed instead of aborting the run
TRIAL_ERRORS = (RandEntireError, ArithmeticError, ValueError, np.linalg.LinAlgError)


# -- worker pool -----------------------------------------------------------------


def map_trials(func, indices, workers: int = 1):
    """``[func(i) for i in indices]`` on ``workers`` processes, in index order."""
    indices = list(indices)
    if workers <= 1 or len(indices) < 2:
        return [func(i) for i in indices]
    chunk = max(1, len(indices) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, indices, chunksize=chunk))


def _failure(exc) -> str:
    return f"{type(exc).__name__}: {exc}"


# -- deterministic context ---------------------------------------------------------


@dataclass(frozen=True)
class RadialContext:
    """Sample-independent quantities at each grid radius."""

    radii: tuple
    degree: int
    log_sigma_f: tuple
    log_M_f: tuple
    T_f: tuple
    s_f: tuple


def radial_context(cfg: ExperimentConfig, with_T: bool = True) -> RadialContext:
    base, pol = cfg.base, cfg.truncation
    degree = truncation_degree(base, cfg.radii[-1], pol)
    lsig, lm, tf, sf = [], [], [], []
    for r in cfg.radii:
        lsig.append(log_sigma(base, r, pol))
        lm.append(log_max_modulus(base.coefficients(truncation_degree(base, r, pol)), r))
        tf.append(characteristic_T_base(base, r, cfg.quadrature, pol) if with_T else math.nan)
        sf.append(log_sigma_derivative(base, r, pol))
    return RadialContext(cfg.radii, degree, *(tuple(float(v) for v in col) for col in (lsig, lm, tf, sf)))


# -- trial kernels ------------------------------------------------------------------


def _failed_rows(cfg, trial, exc):
    ntar = len(cfg.target_values)
    nan = (math.nan,) * ntar
    return [TrialRecord(trial, r, status="failed", failure=_failure(exc), N_a=nan, deviation_a=nan,
                        violated_a=(None,) * ntar, threshold_a=(None,) * ntar) for r in cfg.radii]


def radial_trial(cfg: ExperimentConfig, ctx: RadialContext, trial: int) -> list:
    """All functionals of one sample along the radius grid."""
    try:
        return _radial_trial(cfg, ctx, trial)
    except TRIAL_ERRORS as exc:
        return _failed_rows(cfg, trial, exc)


def _radial_trial(cfg, ctx, trial):
    sample = sample_function(cfg.base, cfg.model, ctx.degree, cfg.seed, trial)
    # slightly past the last radius so jittered radii stay inside the cap
    cap = cfg.radii[-1] * (1.0 + 1e-4)
    zeros = find_zeros(sample, 0.0, cap)
    zeros_a = [find_zeros(sample, a, cap) for a in cfg.target_values]
    spec = cfg.quadrature
    rows = []
    for i, r in enumerate(cfg.radii):
        lsf = ctx.log_sigma_f[i]

        def circle(rk):
            return (proximity_m(sample, rk, spec),
                    x_r_functional(sample, None, rk, spec, log_sigma_f=lsf))

        (t_om, x_r), r_used = with_jitter(circle, r)
        n_big = counting_N(zeros, r_used)
        band, band_a = bands(lsf, cfg.constants)
        n_a = tuple(counting_N(z, r_used) for z in zeros_a)
        rec = TrialRecord(
            trial_index=trial, r=r, r_used=r_used,
            log_sigma_f=lsf, log_M_f=ctx.log_M_f[i], T_f=ctx.T_f[i], s_f=ctx.s_f[i],
            log_sigma_omega=log_sigma_omega(sample, r_used), T_omega=t_om, X_r=x_r,
            n_zero=zeros.count(r_used), N_zero=n_big, deviation=abs(lsf - n_big),
            band=band, band_a=band_a,
            N_a=n_a, deviation_a=tuple(abs(lsf - v) for v in n_a),
        )
        rec = replace(rec, violated=violation_flags(rec, cfg.constants), violated_a=violation_a_flags(rec))
        rows.append(rec)
    return with_thresholds(rows, cfg.radii)


def _run_radial(cfg, workers):
    validate_for_run(cfg)
    ctx = radial_context(cfg)
    per_trial = map_trials(partial(radial_trial, cfg, ctx), range(cfg.trials), workers)
    return [row for rows in per_trial for row in rows]


# -- checks -------------------------------------------------------------------------


def _check(name, passed, **detail):
    return {"name": name, "passed": bool(passed), **detail}


def monotone_within_se(fractions, ses, k):
    """Largest ``f_j - f_i - k sqrt(se_i^2 + se_j^2)`` over ``i < j`` (pass if <= 0)."""
    worst = -math.inf
    for i in range(len(fractions)):
        for j in range(i + 1, len(fractions)):
            excess = fractions[j] - fractions[i] - k * math.hypot(ses[i], ses[j])
            worst = max(worst, excess)
    return worst if fractions else 0.0


def _violation_checks(agg, cfg, key="thm1", target=None):
    th = cfg.thresholds
    if target is None:
        fr = [e["violations"][key]["fraction"] for e in agg["per_radius"]]
        se = [e["violations"][key]["se"] for e in agg["per_radius"]]
        label = key
    else:
        fr = [e["targets"][target]["fraction"] for e in agg["per_radius"]]
        se = [e["targets"][target]["se"] for e in agg["per_radius"]]
        label = f"a[{target}]={cfg.target_values[target]}"
    out = []
    if th.monotone_se is not None and len(fr) > 1:
        worst = monotone_within_se(fr, se, th.monotone_se)
        out.append(_check(f"{label}: violation fraction nonincreasing in r", worst <= 0.0,
                          fractions=fr, worst_excess=worst))
    if th.max_final_violation is not None:
        out.append(_check(f"{label}: violation fraction at r={cfg.radii[-1]} <= {th.max_final_violation}",
                          fr[-1] <= th.max_final_violation, value=fr[-1]))
    return out


def _failure_check(agg, cfg):
    rate = agg["failure_rate"]
    return _check(f"failure rate < {cfg.thresholds.max_failure_rate}",
                  rate < cfg.thresholds.max_failure_rate, value=rate, failures=agg["failures"])


def _report(cfg, aggregate, checks, **extra):
    return {
        "experiment": cfg.experiment,
        "name": cfg.name,
        "version": version_string(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "aggregate": aggregate,
        **extra,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


# -- radial experiments ----------------------------------------------------------------


def run_theorem1(cfg: ExperimentConfig, workers: int = 1):
    """Deviation ``|log sigma(r, f) - N(r, 0, f_omega)|`` against the band."""
    records = _run_radial(cfg, workers)
    agg = fold(records, cfg.radii, len(cfg.target_values))
    checks = [_failure_check(agg, cfg)] + _violation_checks(agg, cfg)
    return _report(cfg, agg, checks), records


def run_value_a(cfg: ExperimentConfig, workers: int = 1):
    """``|log sigma(r, f) - N(r, a, f_omega)|`` against the widened band, per target ``a``."""
    records = _run_radial(cfg, workers)
    agg = fold(records, cfg.radii, len(cfg.target_values))
    checks = [_failure_check(agg, cfg)]
    last = agg["per_radius"][-1]
    for k in range(len(cfg.target_values)):
        checks += _violation_checks(agg, cfg, target=k)
        med = last["targets"][k]["deviation"]["median"]
        checks.append(_check(f"a[{k}]: median deviation <= band_a at r={cfg.radii[-1]}",
                             med is not None and med <= last["band_a"], value=med, band_a=last.get("band_a")))
    return _report(cfg, agg, checks), records


def run_bounds_suite(cfg: ExperimentConfig, workers: int = 1):
    """Deterministic bounds once per radius, sample bounds per trial, slack columns."""
    records = _run_radial(cfg, workers)
    agg = fold(records, cfg.radii, len(cfg.target_values))
    rows = agg["per_radius"]
    checks = [_failure_check(agg, cfg)]
    lem3 = [e["slack_lem3"] for e in rows]
    sig_m = [e["slack_sigma_le_M"] for e in rows]
    checks.append(_check("T(r,f) <= log sigma(r,f) + log(2)/2 at every radius", min(lem3) >= 0.0, slack=lem3))
    # log M is computed to ~1e-10 relative; sigma <= M needs that much slack
    tol = [1e-9 * max(1.0, abs(e["log_M_f"])) for e in rows]
    checks.append(_check("sigma(r,f) <= M(r,f) at every radius",
                         all(s >= -t for s, t in zip(sig_m, tol)), slack=sig_m))
    upper = [e["slack_maxlem"] for e in rows[len(rows) // 2:]]
    variation = max(upper) - min(upper)
    if cfg.thresholds.max_slack_variation is not None:
        checks.append(_check(f"maxlem O(1) slack varies by < {cfg.thresholds.max_slack_variation} "
                             "over the upper half of the grid",
                             variation < cfg.thresholds.max_slack_variation,
                             slack=[e["slack_maxlem"] for e in rows], variation=variation))
    om = [e["violations"]["lem3_omega"]["fraction"] for e in rows]
    checks.append(_check("T(r,f_omega) <= log sigma(r,f_omega) + log(2)/2 for every sample",
                         all(f == 0.0 for f in om), fractions=om))
    checks += _violation_checks(agg, cfg, key="lem6")
    return _report(cfg, agg, checks), records


def fit_gamma(n, s):
    """Smallest ``gamma >= 1/2`` with ``|n_i - s_i| <= 2 s_i^gamma`` for all ``i`` (s_i > 1)."""
    g = 0.5
    for ni, si in zip(n, s):
        d = abs(ni - si)
        if d > 2.0 * si ** 0.5:
            g = max(g, math.log(d / 2.0) / math.log(si))
    return g


def run_nns_derivative_check(cfg: ExperimentConfig, workers: int = 1):
    """``n(r, 0, f_omega)`` against ``s(r) = r d/dr log sigma(r, f)``."""
    records = _run_radial(cfg, workers)
    agg = fold(records, cfg.radii, len(cfg.target_values))
    upper = cfg.radii[len(cfg.radii) // 2:]
    by_trial = {}
    for rec in records:
        by_trial.setdefault(rec.trial_index, []).append(rec)
    gammas = []
    for t in sorted(by_trial):
        rows = [rec for rec in by_trial[t] if rec.r in upper]
        if all(rec.ok for rec in rows) and all(rec.s_f > 1.0 for rec in rows):
            gammas.append(fit_gamma([rec.n_zero for rec in rows], [rec.s_f for rec in rows]))
    g = np.asarray(gammas)
    summary = {
        "count": int(g.size),
        "median": float(np.median(g)) if g.size else None,
        "q95": float(np.quantile(g, 0.95)) if g.size else None,
        "fraction_at_half": float(np.mean(g == 0.5)) if g.size else None,
        "relative_gap_median": [
            float(np.median([abs(rec.n_zero - rec.s_f) / rec.s_f for rec in records if rec.ok and rec.r == r]))
            for r in cfg.radii
        ],
    }
    checks = [_failure_check(agg, cfg)]
    if cfg.thresholds.gamma_floor is not None:
        checks.append(_check(f"median gamma_hat > {cfg.thresholds.gamma_floor}",
                             summary["median"] is not None and summary["median"] > cfg.thresholds.gamma_floor,
                             value=summary["median"]))
    return _report(cfg, agg, checks, gamma_hat=summary), records


# -- sampled scalars ----------------------------------------------------------------------


def tail_constants(model: RandomModel, tau: float, epsilon: float):
    """``(A, B, C)`` for which ``P(X_r >= ((C/A) log x)^(1/B)) <= C1 / x^C``
    reproduces each model's tail bound, with ``C1 = E exp(A X_r^B)``."""
    model = RandomModel.parse(model)
    if model is RandomModel.GAUSSIAN:
        return 2.0 / (1.0 + tau), 1.0, (1.0 + 2.0 * tau) / (1.0 + tau)
    if model is RandomModel.RADEMACHER:
        return epsilon, 1.0 / 6.0, 1.0 + tau
    return 1.0 / (1.0 + tau), 1.0, 1.0 + tau


def tail_threshold(x, A, B, C):
    return (C / A * np.log(x)) ** (1.0 / B)


def _x_r_trial(cfg, degree, lsig, trial):
    """``X_r`` at every grid radius for one sample."""
    try:
        sample = sample_function(cfg.base, cfg.model, degree, cfg.seed, trial)
        out = []
        for r, ls in zip(cfg.radii, lsig):
            x, _ = with_jitter(lambda rk: x_r_functional(sample, None, rk, cfg.quadrature, log_sigma_f=ls), r)
            out.append(SampleRecord(trial, r, values=(x,)))
        return out
    except TRIAL_ERRORS as exc:
        return [SampleRecord(trial, r, "failed", _failure(exc), (math.nan,)) for r in cfg.radii]


def sample_x_r(cfg: ExperimentConfig, indices, workers: int = 1) -> list:
    degree = truncation_degree(cfg.base, cfg.radii[-1], cfg.truncation)
    lsig = tuple(log_sigma(cfg.base, r, cfg.truncation) for r in cfg.radii)
    rows = map_trials(partial(_x_r_trial, cfg, degree, lsig), indices, workers)
    return [rec for recs in rows for rec in recs]


def _values(records, r, k=0):
    return np.array([rec.values[k] for rec in records if rec.r == r and rec.ok])


@dataclass(frozen=True)
class TailReport:
    model: str
    r: float
    A: float
    B: float
    C: float
    C1: float
    x_grid: tuple
    threshold: tuple
    empirical_tail: tuple
    standard_error: tuple
    bound_curve: tuple
    n: int
    ks_statistic: float | None = None

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def tail_report(x_sample, c1_sample, model, r, x_grid, A, B, C) -> TailReport:
    """Empirical tail of ``x_sample`` against ``C1 / x^C`` with ``C1`` from ``c1_sample``."""
    x_grid = np.asarray(x_grid, dtype=float)
    psi = tail_threshold(x_grid, A, B, C)
    n = x_sample.size
    emp = np.array([np.count_nonzero(x_sample >= p) / n for p in psi])
    c1 = float(np.mean(np.exp(A * c1_sample ** B)))
    return TailReport(RandomModel.parse(model).value, float(r), A, B, C, c1, tuple(x_grid.tolist()),
                      tuple(psi.tolist()), tuple(emp.tolist()),
                      tuple(binomial_se(p, n) for p in emp), tuple((c1 / x_grid ** C).tolist()), int(n))


def run_tail_estimates(cfg: ExperimentConfig, workers: int = 1):
    """Tail of ``X_r`` against the Markov curve; ``C1`` from an independent batch."""
    validate_for_run(cfg)
    A, B, C = tail_constants(cfg.model, cfg.constants.tau, cfg.constants.epsilon)
    records = sample_x_r(cfg, range(2 * cfg.trials), workers)
    main = [rec for rec in records if rec.trial_index < cfg.trials]
    c1_batch = [rec for rec in records if rec.trial_index >= cfg.trials]
    reports, checks = [], []
    failed = sum(not rec.ok for rec in records)
    rate = failed / len(records)
    checks.append(_check(f"failure rate < {cfg.thresholds.max_failure_rate}",
                         rate < cfg.thresholds.max_failure_rate, value=rate))
    for r in cfg.radii:
        rep = tail_report(_values(main, r), _values(c1_batch, r), cfg.model, r, cfg.x_grid, A, B, C)
        reports.append(rep.to_dict())
        k = cfg.thresholds.tail_se
        excess = [e - b - k * s for e, b, s in zip(rep.empirical_tail, rep.bound_curve, rep.standard_error)]
        checks.append(_check(f"r={r}: empirical tail below C1/x^C within {k} SE", max(excess) <= 0.0,
                             worst_excess=max(excess)))
        checks.append(_check(f"r={r}: empirical tail nonincreasing in x",
                             all(b <= a for a, b in zip(rep.empirical_tail, rep.empirical_tail[1:]))))
    agg = {"samples": len(records), "failed": failed, "tails": reports}
    return _report(cfg, agg, checks), records


def condition_y_estimate(x, A, B, seed=0, resamples=2000):
    """Monte Carlo ``E exp(A X^B)``, percentile-bootstrap CI and heavy-tail diagnostic."""
    v = np.exp(A * np.asarray(x, dtype=float) ** B)
    mean = float(np.mean(v))
    finite = bool(np.isfinite(mean))
    if finite and v.size > 1:
        ci = stats.bootstrap((v,), np.mean, n_resamples=resamples, confidence_level=0.95, method="percentile",
                             random_state=np.random.default_rng(seed)).confidence_interval
        lo, hi = float(ci.low), float(ci.high)
    else:
        lo = hi = mean
    top = np.sort(v)[::-1][:max(1, v.size // 100)]
    share = float(np.sum(top) / np.sum(v)) if finite else math.inf
    return {"A": A, "B": B, "n": int(v.size), "estimate": mean, "ci_low": lo, "ci_high": hi,
            "top1_share": share, "finite": finite and math.isfinite(hi), "stable": share < 0.5}


def run_condition_y(cfg: ExperimentConfig, A: float | None = None, B: float | None = None, workers: int = 1):
    """``E exp(A X_r^B)`` per radius with a bootstrap CI."""
    validate_for_run(cfg)
    A = cfg.constants.A if A is None else A
    B = cfg.constants.B if B is None else B
    records = sample_x_r(cfg, range(cfg.trials), workers)
    ests, checks = [], []
    failed = sum(not rec.ok for rec in records)
    rate = failed / len(records)
    checks.append(_check(f"failure rate < {cfg.thresholds.max_failure_rate}",
                         rate < cfg.thresholds.max_failure_rate, value=rate))
    for r in cfg.radii:
        est = {"r": r, **condition_y_estimate(_values(records, r), A, B, seed=cfg.seed)}
        ests.append(est)
        checks.append(_check(f"r={r}: E exp(A X^B) finite", est["finite"], value=est["estimate"]))
        checks.append(_check(f"r={r}: top-1% share < 0.5", est["stable"], value=est["top1_share"]))
    return _report(cfg, {"estimates": ests, "failed": failed}, checks), records


def gaussian_abs_log_cdf(x):
    """``P(|log|f_hat|| < x)`` for a normalized complex Gaussian value."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(-np.exp(-2.0 * x)) - np.exp(-np.exp(2.0 * x))
    return np.where(x > 0, out, 0.0)


def _pointwise_trial(cfg, degree, r, lsig, trial):
    sample = sample_function(cfg.base, cfg.model, degree, cfg.seed, trial)
    b, top = scaled_poly(sample.coefficients, r)
    v = horner(b, np.exp(1j * np.array([cfg.theta])))[0]
    val = abs(top + math.log(abs(v)) - lsig) if v != 0 else math.inf
    return SampleRecord(trial, r, values=(val,))


def run_gaussian_pointwise_cdf(cfg: ExperimentConfig, workers: int = 1):
    """KS distance between ``|log|f_hat(r e^{i theta})||`` and its exact law."""
    validate_for_run(cfg)
    records, checks, results = [], [], []
    for r in cfg.radii:
        degree = truncation_degree(cfg.base, r, cfg.truncation)
        lsig = log_sigma(cfg.base, r, cfg.truncation)
        recs = map_trials(partial(_pointwise_trial, cfg, degree, r, lsig), range(cfg.trials), workers)
        records += recs
        x = _values(recs, r)
        ks = stats.kstest(x, gaussian_abs_log_cdf)
        crit = 1.63 / math.sqrt(x.size)
        results.append({"r": r, "n": int(x.size), "ks_statistic": float(ks.statistic),
                         "p_value": float(ks.pvalue), "threshold": crit})
        checks.append(_check(f"r={r}: KS <= 1.63/sqrt(n)", ks.statistic <= crit, value=float(ks.statistic),
                             threshold=crit))
    return _report(cfg, {"ks": results}, checks), records


def _moment_trial(cfg, degree, lsig, trial):
    try:
        sample = sample_function(cfg.base, cfg.model, degree, cfg.seed, trial)
        out = []
        for r, ls in zip(cfg.radii, lsig):
            vals = []
            for p in cfg.p_grid:
                v, _ = with_jitter(lambda rk: abs_log_moment(sample, ls, rk, p, cfg.quadrature), r)
                vals.append(v)
            out.append(SampleRecord(trial, r, values=tuple(vals)))
        return out
    except TRIAL_ERRORS as exc:
        return [SampleRecord(trial, r, "failed", _failure(exc), (math.nan,) * len(cfg.p_grid))
                for r in cfg.radii]


def moment_names(cfg):
    return [f"moment_p{p:g}" for p in cfg.p_grid]


def run_moment_growth(cfg: ExperimentConfig, workers: int = 1):
    """``E int |log|f_hat||^p`` over ``p_grid`` with bootstrap CIs."""
    validate_for_run(cfg)
    degree = truncation_degree(cfg.base, cfg.radii[-1], cfg.truncation)
    lsig = tuple(log_sigma(cfg.base, r, cfg.truncation) for r in cfg.radii)
    rows = map_trials(partial(_moment_trial, cfg, degree, lsig), range(cfg.trials), workers)
    records = [rec for recs in rows for rec in recs]
    checks, per_r = [], []
    failed = sum(not rec.ok for rec in records)
    checks.append(_check(f"failure rate < {cfg.thresholds.max_failure_rate}",
                         failed / len(records) < cfg.thresholds.max_failure_rate, value=failed / len(records)))
    for r in cfg.radii:
        moments = []
        for k, p in enumerate(cfg.p_grid):
            v = _values(records, r, k)
            ci = stats.bootstrap((v,), np.mean, n_resamples=2000, method="percentile",
                                 random_state=np.random.default_rng(cfg.seed)).confidence_interval
            moments.append({"p": p, "mean": float(np.mean(v)), "ci_low": float(ci.low), "ci_high": float(ci.high)})
        power_means = [m["mean"] ** (1.0 / m["p"]) for m in moments]
        # any C0 below this bound is contradicted by the estimates
        c0_floor = max(m["mean"] ** (1.0 / (6.0 * m["p"])) / m["p"] for m in moments)
        per_r.append({"r": r, "moments": moments, "power_means": power_means, "c0_lower_bound": c0_floor})
        checks.append(_check(f"r={r}: moments finite", all(math.isfinite(m["ci_high"]) for m in moments)))
        checks.append(_check(f"r={r}: power means nondecreasing in p",
                             all(b >= a * (1 - 1e-12) for a, b in zip(power_means, power_means[1:])),
                             power_means=power_means))
    return _report(cfg, {"per_radius": per_r, "failed": failed}, checks), records


RUNNERS = {
    "theorem1": run_theorem1,
    "value_a": run_value_a,
    "bounds": run_bounds_suite,
    "nns": run_nns_derivative_check,
    "tails": run_tail_estimates,
    "condition_y": run_condition_y,
    "gaussian_cdf": run_gaussian_pointwise_cdf,
    "moment_growth": run_moment_growth,
}


def run(cfg: ExperimentConfig, workers: int = 1):
    return RUNNERS[cfg.experiment](cfg, workers=workers)


def sample_names(cfg: ExperimentConfig):
    """Value columns of the sample-record stream of a tail-type experiment."""
    if cfg.experiment == "moment_growth":
        return moment_names(cfg)
    if cfg.experiment == "gaussian_cdf":
        return ["abs_log_f_hat"]
    return ["X_r"]
