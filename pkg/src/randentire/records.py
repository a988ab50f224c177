"""Per-(trial, radius) records, their on-disk forms, and the fold into reports.

Records carry every functional an inequality needs, so violation flags and
every aggregate number can be recomputed from a persisted stream alone.

CSV column order of :class:`TrialRecord` (``k`` runs over target values)::

    trial_index, r, r_used, status, failure,
    log_sigma_f, log_M_f, T_f, s_f, log_sigma_omega, T_omega, X_r,
    n_zero, N_zero, deviation, band, band_a, threshold_radius_estimate,
    violated_thm1, violated_lem3, violated_lem3_omega, violated_lem6,
    violated_cor1, violated_newcor3,
    N_a_k, deviation_a_k, violated_a_k, threshold_a_k   (per k)

:class:`SampleRecord` rows are ``trial_index, r, status, failure`` followed by
one column per sampled quantity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

HALF_LOG2 = 0.5 * math.log(2.0)

CORE_COLUMNS = (
    "trial_index", "r", "r_used", "status", "failure",
    "log_sigma_f", "log_M_f", "T_f", "s_f", "log_sigma_omega", "T_omega", "X_r",
    "n_zero", "N_zero", "deviation", "band", "band_a", "threshold_radius_estimate",
    "violated_thm1", "violated_lem3", "violated_lem3_omega", "violated_lem6",
    "violated_cor1", "violated_newcor3",
)
TARGET_COLUMNS = ("N_a", "deviation_a", "violated_a", "threshold_a")
FLAG_NAMES = ("thm1", "lem3", "lem3_omega", "lem6", "cor1", "newcor3")


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    r: float
    r_used: float = math.nan
    status: str = "ok"
    failure: str = ""
    log_sigma_f: float = math.nan
    log_M_f: float = math.nan
    T_f: float = math.nan
    s_f: float = math.nan
    log_sigma_omega: float = math.nan
    T_omega: float = math.nan
    X_r: float = math.nan
    n_zero: int = -1
    N_zero: float = math.nan
    deviation: float = math.nan
    band: float = math.nan
    band_a: float = math.nan
    threshold_radius_estimate: float | None = None
    violated: dict = field(default_factory=dict)
    N_a: tuple = ()
    deviation_a: tuple = ()
    violated_a: tuple = ()
    threshold_a: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def bands(log_sigma_f: float, constants) -> tuple:
    """``(band, band_a)`` at a radius where ``log sigma(r, f) = log_sigma_f``."""
    ll = math.log(log_sigma_f)
    band = constants.band_factor * ll ** (1.0 / constants.B)
    return band, band + (1.0 + constants.delta) * ll


def violation_flags(rec: TrialRecord, constants) -> dict:
    """Inequality violations from a record's stored functionals alone."""
    k = constants.band_factor
    inv_b = 1.0 / constants.B
    out = {
        "thm1": rec.deviation > rec.band,
        "lem3": rec.T_f > rec.log_sigma_f + HALF_LOG2,
        "lem3_omega": rec.T_omega > rec.log_sigma_omega + HALF_LOG2,
        "lem6": rec.log_sigma_omega > rec.log_sigma_f + math.log(rec.log_sigma_f) + 2.0,
    }
    # T and log M must exceed 1 for the log-log terms to be defined
    out["cor1"] = bool(rec.T_f > 1.0 and rec.T_f > rec.N_zero + k * math.log(rec.T_f) ** inv_b)
    if rec.log_M_f > 1.0:
        llm = math.log(rec.log_M_f)
        out["newcor3"] = abs(rec.log_M_f - rec.N_zero) > k * llm ** inv_b + llm
    else:
        out["newcor3"] = False
    return {key: bool(v) for key, v in out.items()}


def violation_a_flags(rec: TrialRecord) -> tuple:
    return tuple(bool(d > rec.band_a) for d in rec.deviation_a)


def threshold_radius(radii, violated) -> float | None:
    """Smallest grid radius from which on no violation occurs; None if the last one fails."""
    est = radii[0]
    for r, v in zip(radii, violated):
        if v:
            est = None
        elif est is None:
            est = r
    return est


def with_thresholds(rows: list, radii) -> list:
    """Fill the per-trial threshold radius estimates into one trial's rows."""
    if not rows or not all(r.ok for r in rows):
        return rows
    thr = threshold_radius(radii, [r.violated["thm1"] for r in rows])
    ntar = len(rows[0].violated_a)
    thr_a = tuple(threshold_radius(radii, [r.violated_a[k] for r in rows]) for k in range(ntar))
    return [replace(r, threshold_radius_estimate=thr, threshold_a=thr_a) for r in rows]


# -- serialization ------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def columns(n_targets: int) -> list:
    cols = list(CORE_COLUMNS)
    for k in range(n_targets):
        cols += [f"{c}_{k}" for c in TARGET_COLUMNS]
    return cols


def _flat(rec: TrialRecord) -> dict:
    row = {f.name: getattr(rec, f.name) for f in fields(rec)
           if f.name not in ("violated", "N_a", "deviation_a", "violated_a", "threshold_a")}
    for name in FLAG_NAMES:
        row[f"violated_{name}"] = rec.violated.get(name) if rec.ok else None
    for k in range(len(rec.N_a)):
        row[f"N_a_{k}"] = rec.N_a[k]
        row[f"deviation_a_{k}"] = rec.deviation_a[k]
        row[f"violated_a_{k}"] = rec.violated_a[k]
        row[f"threshold_a_{k}"] = rec.threshold_a[k] if rec.threshold_a else None
    return row


def write_records(records, fmt: str, n_targets: int) -> str:
    """Render trial records as CSV or JSON lines with fixed column order."""
    cols = columns(n_targets)
    rows = [_flat(r) for r in records]
    return _render(rows, cols, fmt)


def _render(rows, cols, fmt):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in cols])
        return buf.getvalue()
    lines = []
    for row in rows:
        obj = {c: _json_value(row.get(c)) for c in cols}
        lines.append(json.dumps(obj, allow_nan=False))
    return "".join(line + "\n" for line in lines)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _parse(v, kind):
    if v is None or v == "":
        return None
    if kind is bool:
        return v in (True, 1, "1", "true", "True")
    if kind is int:
        return int(v)
    if kind is float:
        return float(v)
    return v


def read_records(text: str, fmt: str) -> list:
    """Inverse of :func:`write_records`."""
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    out = []
    for row in rows:
        ntar = sum(1 for c in row if c.startswith("N_a_"))
        kw = {}
        for f in fields(TrialRecord):
            if f.name in ("violated", "N_a", "deviation_a", "violated_a", "threshold_a"):
                continue
            kind = {"trial_index": int, "n_zero": int, "status": str, "failure": str}.get(f.name, float)
            val = _parse(row.get(f.name), kind)
            if val is None and kind is float and f.name != "threshold_radius_estimate":
                val = math.nan
            if val is None and kind is str:
                val = ""
            if val is None and kind is int:
                val = -1
            kw[f.name] = val
        kw["violated"] = {n: _parse(row.get(f"violated_{n}"), bool) for n in FLAG_NAMES} if kw["status"] == "ok" else {}
        kw["N_a"] = tuple(_nan(_parse(row.get(f"N_a_{k}"), float)) for k in range(ntar))
        kw["deviation_a"] = tuple(_nan(_parse(row.get(f"deviation_a_{k}"), float)) for k in range(ntar))
        kw["violated_a"] = tuple(_parse(row.get(f"violated_a_{k}"), bool) for k in range(ntar))
        kw["threshold_a"] = tuple(_parse(row.get(f"threshold_a_{k}"), float) for k in range(ntar))
        out.append(TrialRecord(**kw))
    return out


def _nan(v):
    return math.nan if v is None else v


@dataclass(frozen=True)
class SampleRecord:
    """One trial's sampled scalars at one radius (tail-type experiments)."""

    trial_index: int
    r: float
    status: str = "ok"
    failure: str = ""
    values: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def write_samples(records, names, fmt: str) -> str:
    cols = ["trial_index", "r", "status", "failure"] + list(names)
    rows = []
    for rec in records:
        row = {"trial_index": rec.trial_index, "r": rec.r, "status": rec.status, "failure": rec.failure}
        for name, v in zip(names, rec.values):
            row[name] = v
        rows.append(row)
    return _render(rows, cols, fmt)


def read_samples(text: str, fmt: str, names) -> list:
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [SampleRecord(int(row["trial_index"]), float(row["r"]), row["status"] or "ok",
                         row["failure"] or "",
                         tuple(_nan(_parse(row.get(n), float)) for n in names)) for row in rows]


# -- fold ----------------------------------------------------------------------


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n else math.nan


def _quantiles(values):
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"median": None, "q95": None}
    return {"median": float(np.median(v)), "q95": float(np.quantile(v, 0.95))}


def fold(records, radii, n_targets: int) -> dict:
    """Aggregate a trial-record stream; a pure function of its inputs."""
    per_radius = []
    for r in radii:
        rows = [rec for rec in records if rec.r == r]
        ok = [rec for rec in rows if rec.ok]
        n = len(ok)
        entry = {"r": r, "n_ok": n, "n_failed": len(rows) - n}
        if ok:
            first = ok[0]
            entry["log_sigma_f"] = first.log_sigma_f
            entry["log_M_f"] = first.log_M_f
            entry["T_f"] = first.T_f
            entry["s_f"] = first.s_f
            entry["band"] = first.band
            entry["band_a"] = first.band_a
            # deterministic slack columns (measured, never fitted)
            entry["slack_lem3"] = first.log_sigma_f + HALF_LOG2 - first.T_f
            entry["slack_sigma_le_M"] = first.log_M_f - first.log_sigma_f
            entry["slack_maxlem"] = first.log_M_f - first.log_sigma_f - math.log(first.log_sigma_f)
        flags = {}
        for name in FLAG_NAMES:
            frac = sum(rec.violated[name] for rec in ok) / n if n else math.nan
            flags[name] = {"fraction": frac, "se": binomial_se(frac, n)}
        entry["violations"] = flags
        ratio = [rec.deviation / rec.band for rec in ok]
        entry["deviation_to_band"] = _quantiles(ratio)
        entry["deviation"] = _quantiles([rec.deviation for rec in ok])
        entry["N_over_r"] = _quantiles([rec.N_zero / r for rec in ok])
        entry["abs_N_over_r_minus_1"] = _quantiles([abs(rec.N_zero / r - 1.0) for rec in ok])
        entry["lem6_excess"] = _quantiles([rec.log_sigma_omega - rec.log_sigma_f - math.log(rec.log_sigma_f)
                                           for rec in ok])
        entry["X_r"] = _quantiles([rec.X_r for rec in ok])
        per_a = []
        for k in range(n_targets):
            frac = sum(rec.violated_a[k] for rec in ok) / n if n else math.nan
            per_a.append({
                "fraction": frac,
                "se": binomial_se(frac, n),
                "deviation": _quantiles([rec.deviation_a[k] for rec in ok]),
            })
        entry["targets"] = per_a
        per_radius.append(entry)

    trials = sorted({rec.trial_index for rec in records})
    first_rows = {}
    for rec in records:
        first_rows.setdefault(rec.trial_index, rec)
    failed = sorted({rec.trial_index for rec in records if not rec.ok})
    thr = [first_rows[t].threshold_radius_estimate for t in trials if t not in failed]
    thr_report = _threshold_summary(thr)
    thr_a = []
    for k in range(n_targets):
        thr_a.append(_threshold_summary([first_rows[t].threshold_a[k] for t in trials if t not in failed]))
    return {
        "trials": len(trials),
        "failed_trials": len(failed),
        "failure_rate": len(failed) / len(trials) if trials else 0.0,
        "failures": sorted({rec.failure for rec in records if not rec.ok}),
        "per_radius": per_radius,
        "threshold_radius": thr_report,
        "threshold_radius_a": thr_a,
    }


def _threshold_summary(values):
    finite = [v for v in values if v is not None]
    out = _quantiles(finite)
    out["never_settled"] = len(values) - len(finite)
    out["count"] = len(values)
    return out
