"""Circle means of ``log|q|`` and of kinked functions of it.

``q`` is always a scaled polynomial ``sum b_j w^j`` on the unit circle (see
:func:`randentire.series.scaled_poly`); callers add back the log scale.

Two engines:

* :func:`log_mean` -- nested trapezoid rule with dyadic doubling.  For the
  smooth periodic integrand ``log|q|`` its error decays geometrically.
* :func:`split_mean` -- for ``max(g, 0)``, ``|g|`` and ``|g|**p`` with
  ``g = log|q| - shift``.  These have kinks where ``|q| = exp(shift)``, which
  would cut the trapezoid rule back to second order, so the circle is split
  at the level crossings and each arc is integrated by adaptive
  Gauss-Legendre panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, QuadratureDivergence
from .series import circle_values, horner

TWO_PI = 2.0 * math.pi
_GL_ORDER = 16
# panel bisection levels allowed per unit of max_refinement_depth
_PANEL_LEVELS_PER_DEPTH = 4


@dataclass(frozen=True)
class QuadratureSpec:
    base_nodes: int | None = None  # None means 2*degree + 64
    max_refinement_depth: int = 12
    abs_tolerance: float = 1e-9

    def __post_init__(self):
        if self.base_nodes is not None and self.base_nodes < 16:
            raise ConfigError("base_nodes must be >= 16")
        if not self.abs_tolerance > 0:
            raise ConfigError("abs_tolerance must be positive")
        if self.max_refinement_depth < 0:
            raise ConfigError("max_refinement_depth must be >= 0")

    def nodes_for(self, degree: int) -> int:
        n = self.base_nodes if self.base_nodes is not None else 2 * degree + 64
        return max(n, degree + 1, 16)


def _log_abs(v):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(v))


def eval_on_circle(b, theta):
    """``sum b_j exp(i j theta)`` at arbitrary angles.

    A single matrix product for small batches (where Horner's per-degree
    Python loop dominates), Horner otherwise.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size * b.size <= 6000:
        w = np.exp(1j * theta.ravel())
        powers = np.ones((w.size, b.size), dtype=complex)
        if b.size > 1:
            powers[:, 1:] = np.cumprod(np.broadcast_to(w[:, None], (w.size, b.size - 1)), axis=1)
        return (powers @ b).reshape(theta.shape)
    return horner(b, np.exp(1j * theta))


def _trapezoid(integrand, n0, spec):
    """Trapezoid means on n0, 2 n0, 4 n0, ... nodes until two agree.

    Returns None when the doubling budget runs out or a node hits a root.
    """
    prev = None
    n = n0
    for _ in range(spec.max_refinement_depth + 1):
        vals = integrand(n)
        if not np.all(np.isfinite(vals)):
            return None
        cur = float(np.mean(vals))
        if prev is not None and abs(cur - prev) < spec.abs_tolerance:
            return cur
        prev = cur
        n *= 2
    return None


def _circle_panels(func, n0, spec):
    """Whole-circle mean of ``func`` by adaptive panels, ``n0 / 8`` to start."""
    count = max(8, n0 // 8)
    lo = TWO_PI * np.arange(count) / count
    hi = TWO_PI * np.arange(1, count + 1) / count
    total = adaptive_panels(func, lo, hi, np.zeros(count, dtype=int), 1, spec.abs_tolerance,
                            _PANEL_LEVELS_PER_DEPTH * max(spec.max_refinement_depth, 1))
    return float(total[0]) / TWO_PI


def log_mean(b, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``(1/2pi) int log|q(e^{it})| dt``.

    Trapezoid rule first; if it cannot converge (a root on or very near the
    circle) the integrable log singularity is resolved by adaptive panels.
    """
    b = np.asarray(b, dtype=complex)
    n0 = spec.nodes_for(b.size - 1)
    val = _trapezoid(lambda n: _log_abs(circle_values(b, n)), n0, spec)
    if val is not None:
        return val
    return _circle_panels(lambda t: _log_abs(horner(b, np.exp(1j * t))), n0, spec)


@lru_cache(maxsize=None)
def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _gl(func, lo, hi):
    x, w = _gauss_legendre(_GL_ORDER)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = func(pts)
    return half * (vals @ w)


def adaptive_panels(func, lo, hi, owner, n_owner, tol_density, max_levels):
    """Integrate ``func`` over panels ``[lo, hi]``, summing results by ``owner``.

    A panel is accepted when its Gauss-Legendre value and the sum over its two
    halves differ by at most ``tol_density * width``.
    """
    total = np.zeros(n_owner)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    owner = np.asarray(owner)
    whole = _gl(func, lo, hi)
    for _ in range(max_levels):
        mid = 0.5 * (lo + hi)
        left = _gl(func, lo, mid)
        right = _gl(func, mid, hi)
        fine = left + right
        err = np.abs(whole - fine)
        # the absolute floor lets panels touching an endpoint log singularity
        # terminate; only O(1) such panels exist per singularity
        ok = np.isfinite(fine) & (err <= tol_density * (hi - lo) + 1e-3 * tol_density)
        np.add.at(total, owner[ok], fine[ok])
        bad = ~ok
        if not bad.any():
            return total
        lo = np.concatenate([lo[bad], mid[bad]])
        hi = np.concatenate([mid[bad], hi[bad]])
        owner = np.concatenate([owner[bad], owner[bad]])
        whole = np.concatenate([left[bad], right[bad]])
    raise QuadratureDivergence("adaptive panels not converged (likely a root on the circle)")


def _crossings(g, band):
    """Sign changes of ``g`` ignoring samples with ``|g| <= band``.

    Returns ``(i, k)``: a crossing lies between grid nodes ``i`` and ``i + k``
    (cyclically); both carry a sign outside the band.  None when every sample
    is inside the band.
    """
    idx = np.flatnonzero(np.abs(g) > band)
    if idx.size == 0:
        return None
    s = g[idx] > 0
    nxt = np.roll(idx, -1)
    gap = (nxt - idx) % g.size
    gap[gap == 0] = g.size
    change = s != np.roll(s, -1)
    return idx[change], gap[change]


def _bisect_crossings(gfun, lo, hi, max_iter=100):
    """Sign changes of ``gfun`` inside the brackets ``[lo, hi]``.

    Illinois-modified regula falsi: the bracket is kept throughout, and the
    retained endpoint's value is halved after repeated one-sided steps, so
    convergence is superlinear on smooth ``g`` instead of one bit per step.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    glo, ghi = gfun(lo), gfun(hi)
    # an infinite endpoint (root on a node) would stall the secant step
    glo = np.clip(glo, -1e300, 1e300)
    ghi = np.clip(ghi, -1e300, 1e300)
    side = np.zeros(lo.shape, dtype=int)
    active = np.ones(lo.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        l, h, gl, gh = lo[idx], hi[idx], glo[idx], ghi[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            x = (l * gh - h * gl) / (gh - gl)
        bad = ~np.isfinite(x) | (x <= l) | (x >= h)
        x = np.where(bad, 0.5 * (l + h), x)
        gx = np.clip(gfun(x), -1e300, 1e300)
        left = (gx >= 0.0) == (gl >= 0.0)  # root lies in [x, h]
        lo[idx] = np.where(left, x, l)
        glo[idx] = np.where(left, gx, gl)
        hi[idx] = np.where(left, h, x)
        ghi[idx] = np.where(left, gh, gx)
        s = side[idx]
        # halve the stale endpoint after two moves on the same side
        ghi[idx] = np.where(left & (s == 1), 0.5 * ghi[idx], ghi[idx])
        glo[idx] = np.where(~left & (s == -1), 0.5 * glo[idx], glo[idx])
        side[idx] = np.where(left, 1, -1)
        width = hi[idx] - lo[idx]
        done = (width <= 4e-16 * np.maximum(1.0, np.abs(hi[idx]))) | (gx == 0.0)
        active[idx[done]] = False
    return np.where(glo == 0.0, lo, np.where(ghi == 0.0, hi, 0.5 * (lo + hi)))


def split_mean(b, shift: float, spec: QuadratureSpec = QuadratureSpec(), power: float | None = None):
    """Circle means of the positive and negative parts of ``g = log|q| - shift``.

    Returns ``(pos, neg)`` with ``pos = mean(max(g, 0)**p)`` and
    ``neg = mean(max(-g, 0)**p)``; ``p = 1`` when ``power`` is None.
    """
    b = np.asarray(b, dtype=complex)
    deg = b.size - 1
    # rounding noise of log|q| is ignored when locating sign changes
    band = 64 * np.finfo(float).eps * (1.0 + abs(shift) + abs(math.log(np.sum(np.abs(b)))))
    return split_mean_fn(
        lambda t: _log_abs(eval_on_circle(b, t)) - shift,
        lambda n: _log_abs(circle_values(b, n)) - shift,
        deg, spec, power, band,
    )


def split_mean_fn(gfun, ggrid, deg: int, spec: QuadratureSpec = QuadratureSpec(),
                  power: float | None = None, band: float = 0.0):
    """:func:`split_mean` for any ``g`` given pointwise (``gfun(theta)``) and on
    the equispaced grid of ``n`` nodes (``ggrid(n)``).

    ``deg`` sets the oscillation scale (grids start at about ``4 (deg + 1)``
    nodes); samples with ``|g| <= band`` carry no sign.
    """
    p = 1.0 if power is None else float(power)

    # grid fine enough that two successive doublings see the same crossings
    n = 1 << max(6, math.ceil(math.log2(max(4 * (deg + 1), spec.nodes_for(deg)))))
    g = ggrid(n)
    cross = _crossings(g, band)
    for _ in range(spec.max_refinement_depth + 1):
        g2 = ggrid(2 * n)
        cross2 = _crossings(g2, band)
        if (cross is None) == (cross2 is None) and (cross is None or cross2[0].size == cross[0].size):
            break
        n, g, cross = 2 * n, g2, cross2
    else:
        raise QuadratureDivergence("level crossings did not stabilise under grid refinement")
    n, g, cross = 2 * n, g2, cross2

    if cross is None:
        # g vanishes to rounding on the whole circle
        return float(np.mean(np.maximum(g, 0.0) ** p)), float(np.mean(np.maximum(-g, 0.0) ** p))

    if cross[0].size == 0:
        sign = 1.0 if g[np.argmax(np.abs(g))] > 0 else -1.0
        if p == 1.0:
            vals, pan = ggrid, gfun
        else:
            def vals(m):
                return np.abs(ggrid(m)) ** p

            def pan(t):
                return np.abs(gfun(t)) ** p
        val = _trapezoid(vals, n, spec)
        if val is None:
            val = _circle_panels(pan, n, spec)
        val = abs(val)
        return (val, 0.0) if sign > 0 else (0.0, val)

    h = TWO_PI / n
    i, k = cross
    theta_c = _bisect_crossings(gfun, i * h, (i + k) * h) % TWO_PI
    theta_c = np.sort(theta_c)
    starts = theta_c
    ends = np.roll(theta_c, -1)
    ends[-1] += TWO_PI
    mids = 0.5 * (starts + ends)
    signs = np.where(gfun(mids) >= 0.0, 1.0, -1.0)

    # initial panels no wider than a few grid cells
    width = ends - starts
    counts = np.maximum(1, np.ceil(width / (8 * h)).astype(int))
    owner = np.repeat(np.arange(starts.size), counts)
    k = np.concatenate([np.arange(c) for c in counts])
    step = (width / counts)[owner]
    lo = starts[owner] + k * step
    hi = lo + step

    def integrand(theta):
        return np.abs(gfun(theta)) ** p if p != 1.0 else np.abs(gfun(theta))

    per_arc = adaptive_panels(integrand, lo, hi, owner, starts.size, spec.abs_tolerance,
                              _PANEL_LEVELS_PER_DEPTH * max(spec.max_refinement_depth, 1))
    per_arc /= TWO_PI
    return float(np.sum(per_arc[signs > 0])), float(np.sum(per_arc[signs < 0]))
