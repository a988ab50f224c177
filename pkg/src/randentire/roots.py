"""Polynomial roots: companion eigenvalues, Aberth-Ehrlich, Newton polishing.

Coefficient vectors are in ascending order (``b[j]`` multiplies ``w**j``)
throughout this module.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import RootFindingFailure
from .series import horner

COMPANION_MAX_DEGREE = 512


def newton_polygon_radii(b):
    """Initial root moduli from the upper convex hull of ``(j, log|b_j|)``.

    Returns one radius per root (length ``deg``).
    """
    mag = np.abs(b)
    idx = np.flatnonzero(mag > 0)
    pts = [(int(j), math.log(mag[j])) for j in idx]
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point when it is not strictly above the chord
            if (y2 - y1) * (p[0] - x1) <= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    radii = []
    for (i, yi), (k, yk) in zip(hull[:-1], hull[1:]):
        radii += [math.exp((yi - yk) / (k - i))] * (k - i)
    return np.array(radii)


def _newton_ratio(b, db, z):
    """``p(z)/p'(z)`` evaluated stably on both sides of the unit circle."""
    n = b.size - 1
    out = np.empty(z.shape, dtype=complex)
    inner = np.abs(z) <= 1.0
    if inner.any():
        zi = z[inner]
        out[inner] = horner(b, zi) / horner(db, zi)
    if (~inner).any():
        zo = z[~inner]
        y = 1.0 / zo
        rb = b[::-1]
        rv = horner(rb, y)
        rd = horner(rb[1:] * np.arange(1, n + 1), y)
        out[~inner] = zo * rv / (n * rv - y * rd)
    return out


def aberth_roots(b, max_iter=500, tol=1e-15):
    """All roots of ``sum b_j w^j`` by simultaneous Aberth-Ehrlich iteration."""
    b = np.asarray(b, dtype=complex)
    n = b.size - 1
    if n < 1:
        return np.empty(0, dtype=complex)
    if b[-1] == 0:
        raise ValueError("leading coefficient must be nonzero")
    db = b[1:] * np.arange(1, n + 1)
    radii = newton_polygon_radii(b)
    angles = 2.0 * np.pi * np.arange(n) / n + 0.4
    z = radii * np.exp(1j * angles)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        ratio = _newton_ratio(b, db, z[active])
        diff = z[active][:, None] - z[None, :]
        rows = np.arange(diff.shape[0])
        diff[rows, np.flatnonzero(active)] = 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / diff
        inv[rows, np.flatnonzero(active)] = 0.0
        s = inv.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            corr = ratio / (1.0 - ratio * s)
        corr = np.where(np.isfinite(corr), corr, 0.0)
        idx = np.flatnonzero(active)
        z[idx] -= corr
        done = np.abs(corr) <= tol * np.maximum(np.abs(z[idx]), 1e-300)
        active[idx[done]] = False
        if not active.any():
            break
    return z


def _trim(b, eps=1e-17):
    """Drop top-degree terms whose total size on the unit disk is below ``eps``."""
    mag = np.abs(b)
    tail = np.cumsum(mag[::-1])[::-1]  # tail[j] = sum_{k>=j} |b_k|
    keep = b.size
    while keep > 1 and tail[keep - 1] <= eps:
        keep -= 1
    while keep > 1 and b[keep - 1] == 0:
        keep -= 1
    return b[:keep]


def polynomial_roots(b):
    """Roots of the trimmed polynomial, by eigenvalues or Aberth by degree."""
    bt = _trim(np.asarray(b, dtype=complex))
    deg = bt.size - 1
    if deg < 1:
        return np.empty(0, dtype=complex)
    if deg <= COMPANION_MAX_DEGREE:
        return np.roots(bt[::-1])
    return aberth_roots(bt)


def polish(b, w, others=None, max_iter=60):
    """Newton-polish ``w`` against the full polynomial ``b``.

    A root may move by less than a third of its distance to the nearest other
    root (from ``w`` itself and ``others``), so close roots never collapse.
    """
    w = np.array(w, dtype=complex)
    if w.size == 0:
        return w
    db = b[1:] * np.arange(1, b.size)
    pool = w if others is None else np.concatenate([w, np.asarray(others, dtype=complex)])
    d = np.abs(w[:, None] - pool[None, :])
    d[np.arange(w.size), np.arange(w.size)] = np.inf
    guard = d.min(axis=1) / 3.0 if pool.size > 1 else np.full(w.size, np.inf)
    start = w.copy()
    for _ in range(max_iter):
        p = horner(b, w)
        dp = horner(db, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp != 0, p / dp, 0.0)
        cand = w - step
        ok = np.isfinite(cand) & (np.abs(cand - start) < guard)
        w = np.where(ok, cand, w)
        if np.all(~ok | (np.abs(step) <= 4e-16 * np.maximum(np.abs(w), 1e-300))):
            break
    return w


def residual_scale(b, w):
    """Largest term ``|b_j w^j|``, the reference for relative residuals."""
    aw = np.abs(w)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(b))[None, :] + np.arange(b.size)[None, :] * np.log(np.maximum(aw, 1e-300))[:, None]
    return np.exp(np.max(logs, axis=1))


def merge_clusters(roots, rel=1e-8):
    """Replace each cluster of near-coincident roots by its centroid, repeated."""
    roots = np.asarray(roots, dtype=complex)
    n = roots.size
    if n < 2:
        return roots
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(np.abs(roots))
    mods = np.abs(roots)
    for a_pos in range(n):
        i = order[a_pos]
        for b_pos in range(a_pos + 1, n):
            j = order[b_pos]
            if mods[j] - mods[i] > rel * max(mods[j], 1e-300):
                break
            if abs(roots[i] - roots[j]) <= rel * max(mods[i], mods[j]):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = roots.copy()
    for members in groups.values():
        if len(members) > 1:
            out[members] = roots[members].mean()
    return out


def check_residuals(b, w, rel=1e-10):
    res = np.abs(horner(b, w))
    scale = residual_scale(b, w)
    bad = res > rel * scale
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise RootFindingFailure(
            f"root {w[k]!r} has residual {res[k]:.3e} above {rel:g} x {scale[k]:.3e}",
            root=complex(w[k]),
        )
    return res
