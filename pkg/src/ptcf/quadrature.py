"""Integration over products of a box, Lambda^n.

In one dimension we use nested Gauss-Legendre rules on pieces whose ends
are the places where the integrand can have a kink: anchor points shifted
by signed sums of the potential's singular radii.  For hard cores the
integrand is then piecewise polynomial and the rule is exact.  The error
estimate is the difference between two neighbouring orders.

In higher dimension a stratified Monte Carlo estimate is used, with the
standard error as the error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, QuadratureError

CHUNK = 100_000


@dataclass(frozen=True)
class VolumeCutoff:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        if len(lo) != len(hi) or not lo:
            raise DomainError("box bounds must have equal positive length")
        if any(b <= a for a, b in zip(lo, hi)):
            raise DomainError("box must have positive side lengths")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def interval(cls, a, b):
        return cls((a,), (b,))

    @property
    def d(self):
        return len(self.lower)

    @property
    def volume(self):
        return math.prod(b - a for a, b in zip(self.lower, self.upper))

    def contains(self, points) -> bool:
        p = np.asarray(points, dtype=float).reshape(-1, self.d)
        return bool(np.all((p >= self.lower) & (p <= self.upper)))


@dataclass(frozen=True)
class QuadratureSpec:
    order: int = 3
    max_piece: float = 0.5
    max_shift_terms: int = 3
    mc_samples: int = 20000
    seed: int = 0


@lru_cache(maxsize=None)
def _gauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _shifts(radii, terms):
    radii = [r for r in radii if r > 0]
    out = {0.0}
    if not radii:
        return np.array([0.0])
    if len(radii) == 1:
        a = radii[0]
        return np.arange(-terms, terms + 1) * a
    cur = {0.0}
    for _ in range(terms):
        cur = {round(s + sg * r, 12) for s in cur for r in radii for sg in (1, -1)} | cur
        out |= cur
    return np.array(sorted(out))


def _pieces(anchors, shifts, lo, hi, max_piece):
    cand = (np.asarray(anchors, dtype=float)[:, None] + shifts[None, :]).ravel()
    cand = cand[(cand > lo) & (cand < hi)]
    cuts = np.unique(np.concatenate([[lo, hi], cand]))
    # drop slivers created by rounding
    keep = np.concatenate([[True], np.diff(cuts) > 1e-13 * (hi - lo)])
    cuts = cuts[keep]
    cuts[-1] = hi
    a, b = cuts[:-1], cuts[1:]
    nsub = np.maximum(1, np.ceil((b - a) / max_piece).astype(int))
    starts, ends = [], []
    for ai, bi, k in zip(a, b, nsub):
        edges = np.linspace(ai, bi, k + 1)
        starts.append(edges[:-1])
        ends.append(edges[1:])
    return np.concatenate(starts), np.concatenate(ends)


def _rule_1d(anchors, shifts, lo, hi, order, max_piece):
    a, b = _pieces(anchors, shifts, lo, hi, max_piece)
    x, w = _gauss(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def product_rule(n, box: VolumeCutoff, anchors=(), radii=(), spec=QuadratureSpec(), order=None, chain=True):
    """Nodes (K, n, 1) and weights (K,) for a d=1 box.

    With ``chain`` each coordinate's rule also breaks at the earlier
    coordinates, which keeps nodes off the diagonals y_i = y_j.  Smooth
    integrands can turn it off to get a plain tensor rule.
    """
    if box.d != 1:
        raise DomainError("product_rule is for one-dimensional boxes")
    order = order or spec.order
    lo, hi = box.lower[0], box.upper[0]
    base = [lo, hi, *np.asarray(anchors, dtype=float).ravel()]
    if n == 0:
        return np.zeros((1, 0, 1)), np.ones(1)
    prefixes = [()]
    pweights = [1.0]
    for level in range(n):
        terms = min(n - level, spec.max_shift_terms) if len([r for r in radii if r > 0]) > 1 else n - level
        shifts = _shifts(radii, terms)
        new_p, new_w = [], []
        for pre, pw in zip(prefixes, pweights):
            x, w = _rule_1d(base + list(pre) if chain else base, shifts, lo, hi, order, spec.max_piece)
            new_p.extend(pre + (xi,) for xi in x)
            new_w.extend(pw * w)
        prefixes, pweights = new_p, new_w
    nodes = np.array(prefixes, dtype=float).reshape(-1, n, 1)
    return nodes, np.array(pweights)


def _apply(f, nodes, weights):
    total = None
    for s in range(0, len(weights), CHUNK):
        vals = np.asarray(f(nodes[s:s + CHUNK]), dtype=float)
        part = np.tensordot(weights[s:s + CHUNK], vals, axes=(0, 0))
        total = part if total is None else total + part
    return total


def integrate_box(f, n, box: VolumeCutoff, anchors=(), radii=(), spec=QuadratureSpec(), chain=True):
    """Integral of f over box^n.

    ``f`` maps an array of shape (K, n, d) to values of shape (K, ...).
    Returns (value, error) with matching trailing shapes.
    """
    if n == 0:
        v = np.asarray(f(np.zeros((1, 0, box.d))), dtype=float)[0]
        return v, np.zeros_like(v)
    if box.d == 1:
        hi_nodes, hi_w = product_rule(n, box, anchors, radii, spec, spec.order + 1, chain)
        lo_nodes, lo_w = product_rule(n, box, anchors, radii, spec, spec.order, chain)
        hi = _apply(f, hi_nodes, hi_w)
        lo = _apply(f, lo_nodes, lo_w)
        err = np.abs(hi - lo)
        if not np.all(np.isfinite(hi)):
            raise QuadratureError(f"non-finite integral at n={n}: {hi}")
        return hi, err
    return _monte_carlo(f, n, box, spec)


def _monte_carlo(f, n, box, spec):
    """Stratified in the first point's position, uniform in the others."""
    rng = np.random.default_rng(spec.seed + 7919 * n)
    d = box.d
    lo = np.asarray(box.lower)
    width = np.asarray(box.upper) - lo
    k = max(1, int(round((spec.mc_samples / 16) ** (1 / d) / 2)))
    cells = np.stack(np.meshgrid(*[np.arange(k)] * d, indexing="ij"), -1).reshape(-1, d)
    per = max(2, spec.mc_samples // len(cells))
    means, vars_ = [], []
    for c in cells:
        u = rng.random((per, n, d))
        u[:, 0, :] = (c + u[:, 0, :]) / k
        vals = np.asarray(f(lo + u * width), dtype=float)
        means.append(vals.mean(axis=0))
        vars_.append(vals.var(axis=0, ddof=1) / per)
    vol = box.volume**n
    means = np.array(means)
    vars_ = np.array(vars_)
    value = vol * means.mean(axis=0)
    err = vol * np.sqrt(vars_.sum(axis=0)) / len(cells)
    return value, err
