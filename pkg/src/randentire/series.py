"""Deterministic entire functions given by their Taylor coefficients.

A :class:`CoefficientSequence` describes ``f(z) = sum a_j z^j`` either by a
closed-form generator or by an explicit finite list.  All radial functionals
(``sigma``, its logarithmic derivative, the truncation degree) are computed in
log space so that radii where ``sigma(r, f)`` exceeds the float range of the
individual terms are still handled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, TruncationFailure

GENERATOR_KINDS = ("exponential", "factorial_power", "mittag_leffler")
KINDS = GENERATOR_KINDS + ("explicit",)

# ratio of consecutive squared terms must be at most this beyond the cut
_RATIO_CAP = 0.5


@dataclass(frozen=True)
class TruncationPolicy:
    tail_tolerance: float = 1e-12
    max_degree: int = 4096

    def __post_init__(self):
        if not 0.0 < self.tail_tolerance < 1.0:
            raise ConfigError("tail_tolerance must lie in (0, 1)")
        if int(self.max_degree) < 1:
            raise ConfigError("max_degree must be >= 1")


@dataclass(frozen=True)
class CoefficientSequence:
    """Taylor coefficients of a base entire function.

    kinds:
      exponential      a_j = 1/j!
      factorial_power  a_j = c^j / (j!)^s
      mittag_leffler   a_j = 1/Gamma(1 + j/rho)
      explicit         a_j = values[j], zero past the end

    ``scale`` multiplies every coefficient and ``star_order`` applies
    ``f -> z f'`` that many times to a generator kind.
    """

    kind: str
    c: float = 1.0
    s: float = 1.0
    rho: float = 1.0
    values: tuple = ()
    scale: complex = 1.0
    star_order: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown coefficient kind {self.kind!r}")
        if self.scale == 0 or not np.isfinite(abs(self.scale)):
            raise ConfigError("scale must be finite and nonzero")
        if self.star_order < 0:
            raise ConfigError("star_order must be >= 0")
        if self.kind == "explicit":
            vals = tuple(complex(v) for v in self.values)
            if not vals or not any(v != 0 for v in vals):
                raise ConfigError("explicit coefficient list needs a nonzero entry")
            if not all(np.isfinite(v) for v in vals):
                raise ConfigError("explicit coefficients must be finite")
            if self.star_order:
                raise ConfigError("explicit lists are starred termwise, not by star_order")
            object.__setattr__(self, "values", vals)
        elif self.kind == "factorial_power":
            if not (self.c > 0 and self.s > 0):
                raise ConfigError("factorial_power needs c > 0 and s > 0")
        elif self.kind == "mittag_leffler":
            if not self.rho > 0:
                raise ConfigError("mittag_leffler needs rho > 0")

    # -- constructors -------------------------------------------------------

    @classmethod
    def exponential(cls, scale=1.0):
        return cls("exponential", scale=scale)

    @classmethod
    def factorial_power(cls, c, s, scale=1.0):
        return cls("factorial_power", c=float(c), s=float(s), scale=scale)

    @classmethod
    def mittag_leffler(cls, rho, scale=1.0):
        return cls("mittag_leffler", rho=float(rho), scale=scale)

    @classmethod
    def explicit(cls, values, scale=1.0):
        return cls("explicit", values=tuple(values), scale=scale)

    # -- properties ---------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.kind == "explicit"

    @property
    def length(self):
        """Number of stored coefficients for explicit lists, None otherwise."""
        return len(self.values) if self.is_finite else None

    def nonzero_count(self, limit=64) -> int:
        """Nonzero coefficients among the first ``limit`` (all of them for lists)."""
        if self.is_finite:
            return sum(1 for v in self.values if v != 0)
        return int(np.count_nonzero(np.isfinite(self.log_abs(np.arange(limit)))))

    @property
    def base_id(self) -> str:
        return format_base_id(self)

    # -- coefficients -------------------------------------------------------

    def log_abs(self, j) -> np.ndarray:
        """``log|a_j|`` for an integer array ``j``; ``-inf`` where a_j = 0."""
        j = np.asarray(j, dtype=np.int64)
        if self.is_finite:
            vals = np.abs(np.asarray(self.values, dtype=complex))
            out = np.full(j.shape, -np.inf)
            inside = j < len(vals)
            with np.errstate(divide="ignore"):
                out[inside] = np.log(vals[j[inside]])
            return out + math.log(abs(self.scale))
        jf = j.astype(float)
        if self.kind == "exponential":
            out = -gammaln(jf + 1.0)
        elif self.kind == "factorial_power":
            out = jf * math.log(self.c) - self.s * gammaln(jf + 1.0)
        else:
            out = -gammaln(1.0 + jf / self.rho)
        if self.star_order:
            with np.errstate(divide="ignore"):
                out = out + self.star_order * np.log(jf)
        return out + math.log(abs(self.scale))

    def coefficients(self, degree: int) -> np.ndarray:
        """Complex vector ``a_0 .. a_degree``."""
        j = np.arange(degree + 1)
        if self.is_finite:
            out = np.zeros(degree + 1, dtype=complex)
            n = min(len(self.values), degree + 1)
            out[:n] = self.values[:n]
            return out * self.scale
        phase = self.scale / abs(self.scale)
        return np.exp(self.log_abs(j)) * phase

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "factorial_power":
            d.update(c=self.c, s=self.s)
        elif self.kind == "mittag_leffler":
            d["rho"] = self.rho
        elif self.kind == "explicit":
            d["values"] = [complex_to_json(v) for v in self.values]
        if self.scale != 1:
            d["scale"] = complex_to_json(self.scale)
        if self.star_order:
            d["star_order"] = self.star_order
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientSequence":
        allowed = {"kind", "c", "s", "rho", "values", "scale", "star_order"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown base keys: {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("base needs a 'kind'")
        kw = dict(d)
        if "values" in kw:
            kw["values"] = tuple(complex_from_json(v) for v in kw["values"])
        if "scale" in kw:
            kw["scale"] = complex_from_json(kw["scale"])
        return cls(**kw)


def complex_to_json(v):
    v = complex(v)
    return v.real if v.imag == 0 else [v.real, v.imag]


def complex_from_json(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def format_base_id(seq: CoefficientSequence) -> str:
    scale = [f"scale={_fmt_num(seq.scale)}"] if seq.scale != 1 else []
    if seq.kind == "explicit":
        head = "explicit:" + ",".join(_fmt_num(v) for v in seq.values)
        return ";".join([head] + scale)
    params = []
    if seq.kind == "factorial_power":
        params += [f"c={seq.c!r}", f"s={seq.s!r}"]
    elif seq.kind == "mittag_leffler":
        params.append(f"rho={seq.rho!r}")
    if seq.star_order:
        params.append(f"star={seq.star_order}")
    params += scale
    return seq.kind + (":" + ",".join(params) if params else "")


def _fmt_num(v) -> str:
    v = complex(v)
    if v.imag == 0:
        return repr(v.real)
    return repr(v).strip("()")


def parse_base_id(text: str) -> CoefficientSequence:
    """Parse ids such as ``exponential``, ``factorial_power:c=2,s=0.5``,
    ``mittag_leffler:rho=2`` or ``explicit:0,1`` (``;scale=2`` optional)."""
    text = text.strip()
    extra = {}
    if ";" in text:
        text, tail = text.split(";", 1)
        extra = _parse_params(tail)
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    try:
        if kind == "explicit":
            values = tuple(complex(v.strip()) for v in rest.split(",") if v.strip())
            seq = CoefficientSequence.explicit(values)
        elif kind in GENERATOR_KINDS:
            params = _parse_params(rest) if rest else {}
            params.update(extra)
            extra = {}
            kw = {}
            for key, val in params.items():
                if key in ("c", "s", "rho"):
                    kw[key] = float(val)
                elif key == "star":
                    kw["star_order"] = int(val)
                elif key == "scale":
                    kw["scale"] = complex(val)
                else:
                    raise ConfigError(f"unknown parameter {key!r} for {kind}")
            seq = CoefficientSequence(kind, **kw)
        else:
            raise ConfigError(f"unknown base id {text!r}")
        for key, val in extra.items():
            if key != "scale":
                raise ConfigError(f"unknown parameter {key!r}")
            seq = replace(seq, scale=complex(val))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse base id {text!r}: {exc}") from None
    return seq


def _parse_params(text: str) -> dict:
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"expected key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


# -- operations ---------------------------------------------------------------


def coefficient(seq: CoefficientSequence, j: int) -> complex:
    if j < 0:
        raise ValueError("coefficient index must be nonnegative")
    if seq.is_finite:
        return complex(seq.values[j]) * seq.scale if j < len(seq.values) else 0j
    return complex(seq.coefficients(j)[j])


def _log_terms(seq, r, count):
    """log of |a_j|^2 r^(2j) for j < count."""
    j = np.arange(count)
    return 2.0 * seq.log_abs(j) + 2.0 * j * math.log(r)


def truncation_degree(seq: CoefficientSequence, r: float, policy: TruncationPolicy = TruncationPolicy()) -> int:
    """Smallest N whose certified tail is at most ``eps^2`` times the partial sum.

    Every generator family has nonincreasing ratios ``q_j = t_{j+1}/t_j`` of
    squared terms, so once ``q_{N+1} <= 1/2`` the tail is bounded by
    ``t_{N+1} / (1 - q_{N+1})``.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    if seq.is_finite:
        return len(seq.values) - 1
    count = policy.max_degree + 3
    lt = _log_terms(seq, r, count)
    log_partial = np.logaddexp.accumulate(lt)
    with np.errstate(invalid="ignore"):
        log_q = lt[1:] - lt[:-1]  # log q_j for j = 0 .. count-2
    # candidate N uses t_{N+1} and q_{N+1}
    n = np.arange(policy.max_degree + 1)
    lq = log_q[n + 1]
    lq = np.where(np.isnan(lq), np.inf, lq)
    ok_ratio = lq <= math.log(_RATIO_CAP)
    q = np.exp(np.minimum(lq, 0.0))
    with np.errstate(divide="ignore"):
        log_tail = lt[n + 1] - np.log1p(-np.minimum(q, 0.999))
    ok_tail = log_tail <= 2.0 * math.log(policy.tail_tolerance) + log_partial[n]
    hits = np.flatnonzero(ok_ratio & ok_tail & np.isfinite(log_partial[n]))
    if hits.size == 0:
        raise TruncationFailure(
            f"{seq.base_id}: tail not certified below {policy.tail_tolerance} "
            f"within {policy.max_degree} terms at r={r}"
        )
    return int(hits[0])


def _weights(seq, r, policy):
    n = truncation_degree(seq, r, policy)
    lt = _log_terms(seq, r, n + 1)
    top = np.max(lt)
    return np.exp(lt - top), top


def log_sigma(seq: CoefficientSequence, r: float, policy: TruncationPolicy = TruncationPolicy()) -> float:
    """``log sigma(r, f)`` with sigma the circle L2 mean (Parseval sum)."""
    if not r > 0:
        raise ValueError("radius must be positive")
    w, top = _weights(seq, r, policy)
    return 0.5 * (top + math.log(math.fsum(w)))


def sigma(seq: CoefficientSequence, r: float, policy: TruncationPolicy = TruncationPolicy()) -> float:
    return math.exp(log_sigma(seq, r, policy))


def log_sigma_derivative(seq: CoefficientSequence, r: float, policy: TruncationPolicy = TruncationPolicy()) -> float:
    """``r d/dr log sigma(r, f) = sum j t_j / sum t_j``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    w, _ = _weights(seq, r, policy)
    j = np.arange(w.size)
    return math.fsum(j * w) / math.fsum(w)


def star_transform(seq: CoefficientSequence) -> CoefficientSequence:
    """Coefficients ``j a_j`` of ``z f'(z)``."""
    if seq.is_finite:
        return replace(seq, values=tuple(j * v for j, v in enumerate(seq.values)))
    return replace(seq, star_order=seq.star_order + 1)


def scaled_poly(coeffs, r):
    """Return ``(b, log_scale)`` with ``b_j = c_j r^j / exp(log_scale)``.

    ``log_scale`` is the largest ``log|c_j r^j|`` so ``max|b_j| == 1``.
    """
    c = np.asarray(coeffs, dtype=complex)
    mag = np.abs(c)
    nz = mag > 0
    if not nz.any():
        raise ValueError("polynomial is identically zero")
    logm = np.full(c.shape, -np.inf)
    logm[nz] = np.log(mag[nz]) + np.arange(c.size)[nz] * math.log(r)
    top = float(np.max(logm))
    b = np.zeros_like(c)
    b[nz] = c[nz] / mag[nz] * np.exp(logm[nz] - top)
    return b, top


def horner(b, w):
    """Evaluate ``sum b_j w^j`` for an array of points ``w``."""
    w = np.asarray(w)
    acc = np.full(w.shape, b[-1], dtype=complex)
    for coef in b[-2::-1]:
        acc = acc * w + coef
    return acc


def circle_values(b, n):
    """``sum b_j exp(i j theta_k)`` on ``theta_k = 2 pi k / n`` (needs n > deg)."""
    return np.fft.ifft(b, n) * n


def log_max_modulus(coeffs, r: float) -> float:
    """``log max_{|z|=r} |p(z)|`` for a finite coefficient vector."""
    b, top = scaled_poly(coeffs, r)
    deg = b.size - 1
    n = 8 * deg + 64
    vals = np.abs(circle_values(b, n))
    h = 2.0 * math.pi / n

    def neg_mod(theta):
        return -abs(horner(b, np.exp(1j * theta)))

    # local maxima of the grid, best few refined by golden section
    left = np.roll(vals, 1)
    right = np.roll(vals, -1)
    peaks = np.flatnonzero((vals >= left) & (vals >= right))
    peaks = peaks[np.argsort(vals[peaks])[::-1][:4]]
    best = float(vals.max())
    for k in peaks:
        theta = _golden_min(neg_mod, (k - 1) * h, (k + 1) * h)
        best = max(best, -neg_mod(theta))
    return top + math.log(best)


def max_modulus(coeffs, r: float) -> float:
    return math.exp(log_max_modulus(coeffs, r))


def _golden_min(func, lo, hi, iters=80):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - inv * (b - a)
    x2 = a + inv * (b - a)
    f1, f2 = func(x1), func(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = func(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = func(x2)
        if b - a < 1e-13:
            break
    return 0.5 * (a + b)
