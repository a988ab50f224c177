"""Command-line front end.

    randentire eval BASE --r R [--model M --seed S] [--a A]
    randentire verify --config PATH [--out DIR] [--seed U64] [--workers N|auto] [--format csv|jsonl]
    randentire tails  --config PATH [...same flags]

Exit codes: 0 pass, 1 threshold failure (artifacts still written),
2 invalid input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import version_string
from .config import TAIL_EXPERIMENTS, RunManifest
from .errors import ConfigError, RandEntireError
from .experiments import run, sample_names
from .functionals import (characteristic_T, count_zeros_argument, counting_N, find_zeros, jensen_residual,
                          with_jitter, x_r_functional)
from .models import RandomModel, sample_function
from .records import write_records, write_samples
from .series import log_max_modulus, log_sigma, parse_base_id, truncation_degree

EXIT_OK, EXIT_THRESHOLD, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randentire", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=version_string())
    sub = ap.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="functionals of a base function and optionally one sample")
    ev.add_argument("base", help="base id, e.g. exponential, explicit:0,1, factorial_power:c=2,s=0.5")
    ev.add_argument("--r", type=float, required=True)
    ev.add_argument("--model", choices=[m.value for m in RandomModel])
    ev.add_argument("--a", type=_complex_arg, default=0j)
    ev.add_argument("--seed", type=_u64)
    ev.add_argument("--trial", type=int, default=0)

    for name in ("verify", "tails"):
        p = sub.add_parser(name, help=f"run a {name} manifest")
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--workers", default="1")
        p.add_argument("--format", choices=["csv", "jsonl"])
    return ap


def _row(label, value):
    if isinstance(value, float):
        text = f"{value:.12g}"
    else:
        text = str(value)
    return f"{label:<18}{text}"


def _fmt_a(a: complex) -> str:
    return f"{a.real:g}" if a.imag == 0 else f"{a:g}"


def cmd_eval(args, out=sys.stdout) -> int:
    if not args.r > 0:
        raise ConfigError("r > 0 required")
    base = parse_base_id(args.base)
    r = args.r
    deg = truncation_degree(base, r)
    lsig = log_sigma(base, r)
    lines = [_row("base", base.base_id), _row("r", r), _row("sigma(r,f)", math.exp(lsig)),
             _row("log sigma(r,f)", lsig), _row("log M(r,f)", log_max_modulus(base.coefficients(deg), r))]
    if args.model is not None or args.seed is not None:
        if args.model is None or args.seed is None:
            raise ConfigError("sample functionals need both --model and --seed")
        sample = sample_function(base, args.model, deg, args.seed, args.trial)
        # N and n are evaluated on the (possibly jittered) radius the argument count accepted
        n0, r0 = with_jitter(lambda rk: count_zeros_argument(sample, rk), r)
        na, ra = with_jitter(lambda rk: count_zeros_argument(sample, rk, args.a), r)
        z0 = find_zeros(sample, 0.0, max(r0, ra))
        za = find_zeros(sample, args.a, max(r0, ra))
        lines += [
            _row("model", args.model), _row("seed", args.seed), _row("trial", args.trial),
            _row("degree", sample.degree),
            _row("n(r,0)", n0), _row("N(r,0)", counting_N(z0, r0)),
            _row(f"n(r,{_fmt_a(args.a)})", na), _row(f"N(r,{_fmt_a(args.a)})", counting_N(za, ra)),
            _row("T(r,f_omega)", characteristic_T(sample, r0)),
            _row("X_r", x_r_functional(sample, None, r0, log_sigma_f=log_sigma(base, r0))),
            _row("jensen residual", jensen_residual(sample, r0)),
        ]
        if r0 != r or ra != r:
            lines.append(_row("r used", max(r0, ra)))
    out.write("\n".join(lines) + "\n")
    return EXIT_OK


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def execute(manifest: RunManifest, expect_tails: bool):
    """Run a manifest and write ``records.<fmt>`` and ``report.json``."""
    cfg = manifest.config
    if (cfg.experiment in TAIL_EXPERIMENTS) != expect_tails:
        other = "tails" if cfg.experiment in TAIL_EXPERIMENTS else "verify"
        raise ConfigError(f"experiment {cfg.experiment!r} is run by the {other!r} command")
    report, records = run(cfg, workers=manifest.worker_count)
    out = Path(manifest.output_dir)
    if expect_tails:
        text = write_samples(records, sample_names(cfg), manifest.format)
    else:
        text = write_records(records, manifest.format, len(cfg.target_values))
    rec_path = out / f"records.{manifest.format}"
    rec_path.write_text(text)
    report = {**report, "records": rec_path.name, "workers": manifest.worker_count}
    (out / "report.json").write_text(json.dumps(_clean(report), indent=2) + "\n")
    return report


def _run_manifest(args, expect_tails, out):
    manifest = RunManifest.build(args.config, args.out, args.seed, args.workers, args.format)
    report = execute(manifest, expect_tails)
    for c in report["checks"]:
        out.write(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}\n")
    out.write(f"wrote {Path(manifest.output_dir) / report['records']} and report.json\n")
    return EXIT_OK if report["passed"] else EXIT_THRESHOLD


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        if args.command == "eval":
            return cmd_eval(args, out)
        return _run_manifest(args, args.command == "tails", out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RandEntireError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
