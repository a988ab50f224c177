"""Nevanlinna functionals of a truncated sample ``p`` on the circle ``|z| = r``.

All circle integrals are returned as means, i.e. divided by ``2 pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CircleRootProximity, QuadratureDivergence
from .models import as_coefficients
from .quadrature import QuadratureSpec, log_mean, split_mean, split_mean_fn
from .roots import check_residuals, merge_clusters, polish, polynomial_roots
from .series import (CoefficientSequence, TruncationPolicy, circle_values, horner, log_sigma,
                     scaled_poly, truncation_degree)

DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class ZeroSet:
    """Roots of ``p - a`` in ``0 < |z| <= radius_cap`` plus the zero at the origin."""

    target: complex
    radius_cap: float
    moduli: tuple
    origin_multiplicity: int
    quality: float

    def count(self, r: float | None = None) -> int:
        """``n(r, a)``: roots in the closed disk of radius ``r`` (default: the cap)."""
        r = self.radius_cap if r is None else r
        return self.origin_multiplicity + sum(1 for m in self.moduli if m <= r)


def _shifted(sample, a):
    c = np.array(as_coefficients(sample), dtype=complex)
    c[0] -= a
    return c


def _first_nonzero(c):
    nz = np.flatnonzero(c != 0)
    if nz.size == 0:
        raise ValueError("polynomial is identically zero")
    return int(nz[0]), complex(c[nz[0]])


# -- circle integrals -----------------------------------------------------------


def circle_log_integral(sample, r: float, a: complex = 0.0, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Mean of ``log|p(r e^{it}) - a|`` over the circle."""
    b, top = scaled_poly(_shifted(sample, a), r)
    return top + log_mean(b, spec)


def proximity_m(sample, r: float, spec: QuadratureSpec = DEFAULT_SPEC, a: complex = 0.0) -> float:
    """``m(r, p - a)``: mean of ``log+ |p - a|``."""
    b, top = scaled_poly(_shifted(sample, a), r)
    pos, _ = split_mean(b, -top, spec)
    return pos


def characteristic_T(sample, r: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    # entire samples have no poles, so T = m
    return proximity_m(sample, r, spec)


def characteristic_T_base(seq: CoefficientSequence, r: float, spec: QuadratureSpec = DEFAULT_SPEC,
                          policy: TruncationPolicy = TruncationPolicy()) -> float:
    """``T(r, f)`` of the deterministic base function itself.

    Unlike a random sample, ``f`` may be exponentially small on part of the
    circle (``|e^z| = e^{-r}`` on the left) while its Taylor terms reach
    ``~e^r``, so a double-precision sum of the truncation is meaningless
    there.  Exponential-type bases use ``log|f| = log|scale| + c r cos t``
    directly; other bases are truncated with an absolute tail below 1e-12
    and summed in double precision where a rounding bound certifies the
    result, in mpmath elsewhere.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    slope = _exponential_rate(seq)
    if slope is not None:
        ls = math.log(abs(seq.scale))

        def g(t):
            return ls + slope * r * np.cos(t)

        pos, _ = split_mean_fn(g, lambda n: g(2.0 * math.pi * np.arange(n) / n), 16, spec)
        return pos

    # sup-norm tail <= 4 eps sigma under the ratio-1/2 certificate
    log_eps = math.log(1e-12) - max(log_sigma(seq, r, policy), 0.0)
    if log_eps < math.log(1e-300):
        raise ValueError(f"sigma({r}) too large for an absolute truncation certificate")
    deg = truncation_degree(seq, r, TruncationPolicy(min(policy.tail_tolerance, math.exp(log_eps)),
                                                     policy.max_degree))
    coeffs = seq.coefficients(deg)
    b, top = scaled_poly(coeffs, r)
    # forward error of the sum incl. coefficient rounding, in units of exp(top)
    err = 100.0 * (deg + 1) * np.finfo(float).eps * float(np.sum(np.abs(b)))
    log_err = top + math.log(err)
    if log_err <= math.log(1e-10):
        return proximity_m(coeffs, r, spec)
    return _mp_positive_part(seq, deg, b, top, err, r, spec)


def _exponential_rate(seq):
    """``c`` when ``f = scale * exp(c z)``, else None."""
    if seq.star_order:
        return None
    if seq.kind == "exponential":
        return 1.0
    if seq.kind == "factorial_power" and seq.s == 1.0:
        return seq.c
    if seq.kind == "mittag_leffler" and seq.rho == 1.0:
        return 1.0
    return None


def _mp_coefficients(seq, deg):
    import mpmath as mp

    out = []
    for j in range(deg + 1):
        if seq.kind == "exponential":
            a = 1 / mp.factorial(j)
        elif seq.kind == "factorial_power":
            a = mp.power(seq.c, j) / mp.power(mp.factorial(j), seq.s)
        elif seq.kind == "mittag_leffler":
            a = mp.rgamma(1 + mp.mpf(j) / seq.rho)
        else:
            a = mp.mpc(seq.values[j]) if j < len(seq.values) else mp.mpf(0)
        if seq.star_order:
            a *= mp.mpf(j) ** seq.star_order
        out.append(a * mp.mpc(seq.scale))
    return out


def _mp_positive_part(seq, deg, b, top, err, r, spec):
    """Mean of ``log+|f|``: double sums where they settle ``log+``, mpmath elsewhere."""
    import mpmath as mp

    abs_err = math.exp(top) * err
    digits = int(math.ceil((top + math.log(float(np.sum(np.abs(b))))) / math.log(10))) + 25
    with mp.workdps(max(digits, 30)):
        coeffs = _mp_coefficients(seq, deg)[::-1]
        mr = mp.mpf(r)

    def exact(theta):
        with mp.workdps(max(digits, 30)):
            return np.array([float(mp.log(abs(mp.polyval(coeffs, mr * mp.expj(mp.mpf(float(t)))))))
                             for t in theta])

    def settle(theta, approx):
        # approx: double values of |f|; recompute where the error bound matters
        out = np.log(np.maximum(approx, 1e-300))
        certain_below = approx + abs_err < 1.0
        out[certain_below] = np.minimum(np.log(approx[certain_below] + abs_err), -1e-300)
        loose = ~certain_below & (approx < 1e10 * abs_err)
        if loose.any():
            out[loose] = exact(theta[loose])
        return out

    def gfun(theta):
        theta = np.asarray(theta, dtype=float)
        flat = theta.ravel()
        approx = np.exp(top) * np.abs(horner(b, np.exp(1j * flat)))
        return settle(flat, approx).reshape(theta.shape)

    def ggrid(n):
        theta = 2.0 * math.pi * np.arange(n) / n
        return settle(theta, np.exp(top) * np.abs(circle_values(b, n)))

    pos, _ = split_mean_fn(gfun, ggrid, deg, spec)
    return pos


def x_r_functional(sample, sigma_f: float, r: float, spec: QuadratureSpec = DEFAULT_SPEC,
                   log_sigma_f: float | None = None) -> float:
    """Circle mean of ``|log|p / sigma_f||``.

    Pass ``log_sigma_f`` instead of ``sigma_f`` when sigma overflows a float.
    """
    if log_sigma_f is None:
        if not sigma_f > 0:
            raise ValueError("sigma_f must be positive")
        log_sigma_f = math.log(sigma_f)
    return abs_log_moment(sample, log_sigma_f, r, 1.0, spec)


def abs_log_moment(sample, log_sigma_f: float, r: float, p: float = 1.0,
                   spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Circle mean of ``|log|p / sigma_f||**p``; ``p = 1`` gives ``X_r``."""
    b, top = scaled_poly(as_coefficients(sample), r)
    pos, neg = split_mean(b, log_sigma_f - top, spec, power=None if p == 1.0 else p)
    return pos + neg


def log_sigma_omega(sample, r: float) -> float:
    """``log sigma(r, p)`` from the coefficient side (compensated sum)."""
    c = as_coefficients(sample)
    mag = np.abs(c)
    nz = mag > 0
    if not nz.any():
        raise ValueError("polynomial is identically zero")
    lt = 2.0 * (np.log(mag[nz]) + np.arange(c.size)[nz] * math.log(r))
    top = float(np.max(lt))
    return 0.5 * (top + math.log(math.fsum(np.exp(lt - top))))


def sigma_omega_parseval(sample, r: float) -> float:
    if not r > 0:
        raise ValueError("radius must be positive")
    return math.exp(log_sigma_omega(sample, r))


def sigma_omega_integral(sample, r: float) -> float:
    """Integral side of Parseval: trapezoid on ``2N + 1`` nodes, exact for ``|p|^2``."""
    b, top = scaled_poly(as_coefficients(sample), r)
    n = 2 * (b.size - 1) + 1
    vals = circle_values(b, n)
    return math.exp(top) * math.sqrt(math.fsum(np.abs(vals) ** 2) / n)


# -- zeros -----------------------------------------------------------------------


def find_zeros(sample, a: complex = 0.0, radius_cap: float = 1.0) -> ZeroSet:
    """All roots of ``p - a`` with modulus at most ``radius_cap``.

    Roots come from companion eigenvalues (Aberth-Ehrlich above degree 512)
    of the polynomial rescaled to the unit disk, then Newton-polished on the
    untrimmed polynomial; residuals must be below 1e-10 of the largest term.
    """
    if not radius_cap > 0:
        raise ValueError("radius_cap must be positive")
    c = _shifted(sample, a)
    nz = np.flatnonzero(c != 0)
    if nz.size == 0 or nz[-1] < 1:
        raise ValueError("p - a must have degree >= 1")
    origin = int(nz[0])
    q = c[origin: nz[-1] + 1]
    if q.size == 1:
        return ZeroSet(complex(a), float(radius_cap), (), origin, 0.0)
    b, top = scaled_poly(q, radius_cap)
    w_all = polynomial_roots(b)
    near = np.abs(w_all) <= 1.0 + 1e-3
    w = polish(b, w_all[near], others=w_all[~near])
    res = check_residuals(b, w)
    w = merge_clusters(w)
    mods = np.abs(w)
    keep = mods <= 1.0
    moduli = tuple(sorted(float(m) * radius_cap for m in mods[keep]))
    quality = float(np.max(res[keep])) * math.exp(top) if keep.any() else 0.0
    return ZeroSet(complex(a), float(radius_cap), moduli, origin, quality)


def counting_N(zeros: ZeroSet, r: float) -> float:
    """``N(r, a) = sum log(r/|rho|) + n(0, a) log r`` over roots in the disk."""
    if r > zeros.radius_cap * (1 + 1e-12):
        raise ValueError(f"r={r} exceeds the zero set's radius cap {zeros.radius_cap}")
    logr = math.log(r)
    terms = [logr - math.log(m) for m in zeros.moduli if m <= r]
    return math.fsum(terms) + zeros.origin_multiplicity * logr


def count_zeros_argument(sample, r: float, a: complex = 0.0, spec: QuadratureSpec = DEFAULT_SPEC) -> int:
    """Winding number of ``t -> p(r e^{it}) - a`` about 0.

    An arc ``[t0, t1]`` is accepted once ``(t1 - t0) * D < max(|v0|, |v1|)``
    with ``D = sum j |b_j|`` bounding ``|dq/dt|``: the arc then stays in a disk
    that misses the origin, so its phase change is the principal value of
    ``arg(v1/v0)`` and has modulus below pi/2.  Arcs narrower than 1e-8 that
    still fail mean a root sits on the circle.
    """
    b, _ = scaled_poly(_shifted(sample, a), r)
    deg = b.size - 1
    bound = float(np.sum(np.arange(b.size) * np.abs(b)))
    if bound == 0.0:
        return 0
    n = spec.nodes_for(deg)
    vals = circle_values(b, n)
    t0 = 2.0 * math.pi * np.arange(n) / n
    t1 = np.append(t0[1:], 2.0 * math.pi)
    v0 = vals
    v1 = np.roll(vals, -1)
    total = 0.0
    while t0.size:
        ok = (t1 - t0) * bound < np.maximum(np.abs(v0), np.abs(v1))
        if ok.any():
            total += math.fsum(np.angle(v1[ok] / v0[ok]))
        bad = ~ok
        if not bad.any():
            break
        t0, t1, v0, v1 = t0[bad], t1[bad], v0[bad], v1[bad]
        if np.min(t1 - t0) < 1e-8:
            raise CircleRootProximity(f"root of p - a within ~1e-8 r of |z| = {r}")
        tm = 0.5 * (t0 + t1)
        vm = horner(b, np.exp(1j * tm))
        t0, t1 = np.concatenate([t0, tm]), np.concatenate([tm, t1])
        v0, v1 = np.concatenate([v0, vm]), np.concatenate([vm, v1])
    wind = total / (2.0 * math.pi)
    k = round(wind)
    if abs(wind - k) > 1e-6:
        raise CircleRootProximity(f"non-integer winding {wind} at r={r}")
    return int(k)


def jensen_residual(sample, r: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``|log|c(0)| + N(r, 0) - mean log|p||``; zero up to rounding by Jensen."""
    c = as_coefficients(sample)
    _, c0 = _first_nonzero(c)
    if np.count_nonzero(c) == 1:
        zeros = ZeroSet(0j, r, (), _first_nonzero(c)[0], 0.0)
    else:
        zeros = find_zeros(sample, 0.0, r)
    lhs = math.log(abs(c0)) + counting_N(zeros, r)
    return abs(lhs - circle_log_integral(sample, r, 0.0, spec))


def with_jitter(func, r: float, *args, attempts: int = 8, rel: float = 1e-6, **kwargs):
    """Call ``func(r, ...)``; on a root at the circle retry at ``r (1 + k rel)``.

    Returns ``(value, r_used)``.
    """
    last = None
    for k in range(attempts + 1):
        rk = r * (1.0 + k * rel)
        try:
            return func(rk, *args, **kwargs), rk
        except (CircleRootProximity, QuadratureDivergence) as exc:
            last = exc
    raise last
