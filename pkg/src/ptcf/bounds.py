"""Closed-form bounds, radii and decay constants, and checks of the two
integral lemmas behind the decay estimate."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from math import comb, e, factorial, lgamma, log, prod

import numpy as np
from scipy import integrate

from .combinatorics import labeled_trees
from .errors import DivergenceError, DomainError, ResourceCapError

TREE_CAP = 7


@dataclass(frozen=True)
class BoundParams:
    h: float
    nu1: float
    nubar1: float  # integral of 1/(1+|x|^alpha) over R^d
    C: float
    alpha: float
    sizes: tuple
    sigma: int = 1
    nu0: float = 1.0

    def __post_init__(self):
        if self.h <= 0:
            raise DomainError("h must be positive")
        if len(self.sizes) < 1 or any(x < 1 for x in self.sizes):
            raise DomainError("cluster sizes must be >= 1")
        if not 1 <= self.sigma <= max(self.m, 1):
            raise DomainError(f"sigma={self.sigma} outside 1..{self.m}")

    @property
    def m(self):
        return len(self.sizes)

    @property
    def l(self):
        return sum(self.sizes)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def radius_r_beta(B, nu1, beta=1.0):
    if nu1 <= 0:
        raise DomainError("nu1 must be positive")
    return math.exp(-2 * beta * B - 1) / nu1


def convergence_margin(z, beta, B, nu1):
    return 1.0 - z * math.exp(2 * beta * B + 2) * nu1


def nu0_tilde(nu0):
    return 1.0 if nu0 <= 1 else nu0


def ptcf_upper_bound(p: BoundParams, z, beta, B):
    """(2 z e^{2bB+1})^l nu0~^(l-l1) l^(m-2) / (1 - z e^{2bB+2} nu1)."""
    margin = convergence_margin(z, beta, B, p.nu1)
    if margin <= 0:
        raise DivergenceError(f"z e^(2 beta B + 2) nu1 = {1 - margin} >= 1")
    l, m, l1 = p.l, p.m, p.sizes[0]
    return (2 * z * math.exp(2 * beta * B + 1)) ** l * nu0_tilde(p.nu0) ** (l - l1) * l ** (m - 2) / margin


def forest_term(sizes, n, h, nu1):
    """log of l1 prod(2^li - 1) (l+n)^(m+n-2) (h nu1)^n / n!, times h^l excluded."""
    m, l, l1 = len(sizes), sum(sizes), sizes[0]
    if n == 0 and m == 1:
        return 0.0
    base = log(l1) + sum(log(2**x - 1) for x in sizes[1:])
    return base + (m + n - 2) * log(l + n) + n * log(h * nu1) - lgamma(n + 1)


def forest_series_tail(sizes, h, nu1, nu0, n_max, extra=400):
    """Bound on sum_{n > n_max} of the integrated Q contributions.

    Each order n is at most h^l nu0~^(l-l1) N_n (h nu1)^n / n!, with N_n the
    forest count.  Terms are summed explicitly for ``extra`` orders and the
    rest bounded by a geometric series with ratio h nu1 e (1 + l/(n+1)).
    """
    sizes = tuple(sizes)
    l, l1 = sum(sizes), sizes[0]
    if nu1 == 0:
        return 0.0
    x = h * nu1
    if x * e >= 1:
        return math.inf
    pref = h**l * nu0_tilde(nu0) ** (l - l1)
    top = n_max + extra
    total = sum(math.exp(forest_term(sizes, n, h, nu1)) for n in range(n_max + 1, top + 1))
    q = x * e * (1 + l / (top + 1))
    if q >= 1:
        return math.inf
    last = math.exp(forest_term(sizes, top, h, nu1))
    total += last * q / (1 - q)
    return pref * total


# ---------------------------------------------------------------- decay constants

def _check(cond, name):
    if cond <= 0:
        raise DivergenceError(f"smallness condition {name} violated (margin {cond})")


def _core(p):
    hne = p.h * p.nu1 * e
    D = 1 - hne - p.h * p.nubar1 * 2 ** (1 + p.alpha) * p.C
    _check(D, "h(nu1 e + nubar1 2^(1+alpha) C) < 1")
    g = p.h / (1 - hne)
    return hne, D, g


def A_2(p):
    l1, l2 = p.sizes
    hne, D, g = _core(p)
    C = p.C
    return 0.5 * l1 * l2 * C * (1 + C) ** (l2 - 1) * g ** p.l * (1 - hne) / D


def A_3(p):
    l1, l2, l3 = p.sizes
    hne, D, g = _core(p)
    C, l, a = p.C, p.l, p.alpha
    common = l1 * l2 * l3 * (1 + C) ** (l2 + l3 - 2) * g**l
    x = p.h * p.nubar1 * 2 ** (1 + a) * C
    if p.sigma == 1:
        return common * l * C**2
    if p.sigma == 2:
        return 2 * common * l * C**2 * x / D
    return 3 * common * 2 ** (2 * a) * C**3 * p.h * p.nubar1 * (1 - hne) ** 2 / D**3


def A_m1(p):
    hne, D, g = _core(p)
    m, l, l1, C = p.m, p.l, p.sizes[0], p.C
    return l ** (m - 2) * prod(p.sizes) * C ** (m - 1) * (1 + C) ** (l - l1 - m + 1) * g**l


def A_m2(p):
    hne, D, g = _core(p)
    m, l, l1, C = p.m, p.l, p.sizes[0], p.C
    x = p.h * p.nubar1 * 2 ** (1 + p.alpha) * C
    return (m - 1) * prod(p.sizes) * l ** (m - 2) * C ** (m - 1) * (1 + C) ** (l - l1 - m + 1) * g**l * x / D


def A_msigma(p):
    hne, D, g = _core(p)
    m, l, l1, C, s, a = p.m, p.l, p.sizes[0], p.C, p.sigma, p.alpha
    D2 = 1 - hne - p.h * p.nubar1 * (e + 2 ** (1 + a)) * C
    _check(D2, "h[nu1 e + nubar1 C (e + 2^(1+alpha))] < 1")
    return ((s - 2) ** s * comb(m - 1, s - 1) * 2 ** (a * (s - 1) ** 2) * l ** (m - s) * C**m
            * (1 + C) ** (l - l1 - s + 1) * g**l * ((1 - hne) / D) ** s
            * p.h * p.nubar1 * e * D / D2)


def decay_constant_A(p: BoundParams) -> float:
    if p.m < 2:
        raise DomainError("decay constants need m >= 2")
    if p.m == 2:
        return A_2(p)
    if p.m == 3:
        return A_3(p)
    if p.sigma == 1:
        return A_m1(p)
    if p.sigma == 2:
        return A_m2(p)
    return A_msigma(p)


def decay_condition_margin(p: BoundParams) -> float:
    """1 - h(nu1 e + nubar1 2^(1+alpha) C), or the stronger form for sigma >= 3, m >= 4."""
    if p.m >= 4 and p.sigma >= 3:
        return 1 - p.h * (p.nu1 * e + p.nubar1 * p.C * (e + 2 ** (1 + p.alpha)))
    return 1 - p.h * (p.nu1 * e + p.nubar1 * 2 ** (1 + p.alpha) * p.C)


# ---------------------------------------------------------------- envelopes

def decay_envelope(family, nubar, cap=TREE_CAP) -> float:
    """Max over labeled trees on the clusters of prod_edges max nubar(x_i - x_j)."""
    clusters = family.clusters if hasattr(family, "clusters") else family
    m = len(clusters)
    if m < 2:
        raise DomainError("envelope needs m >= 2")
    if m > cap:
        raise ResourceCapError(f"m={m} exceeds tree cap {cap}")
    arrs = [np.asarray(c.array if hasattr(c, "array") else c, dtype=float) for c in clusters]
    arrs = [a.reshape(len(a), -1) for a in arrs]
    best = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            disp = arrs[i][:, None, :] - arrs[j][None, :, :]
            best[i, j] = best[j, i] = float(np.max(nubar(disp)))
    return max(prod(best[a, b] for a, b in tree) for tree in labeled_trees(m))


def decay_lemma_check(alpha, d, points):
    """Both sides of the convolution inequality for nubar = 1/(1+|x|^alpha).

    lhs = int prod_r nubar(x_r - y) dy,
    rhs = 2^(alpha(p-1)) int(nubar) sum_r prod_{k != r} nubar(x_k - x_r).

    Returns (lhs, rhs, err) with err the quadrature's absolute error
    estimate for lhs plus a few ulps; at p = 1 the two sides coincide.
    """
    if d != 1:
        raise DomainError("the lemma check integrates in d = 1 only")
    xs = [float(np.ravel(x)[0]) for x in points]
    p = len(xs)
    if not 1 <= p <= 4:
        raise DomainError("need 1 <= p <= 4 points")
    nb = lambda t: 1.0 / (1.0 + abs(t) ** alpha)
    f = lambda y: prod(nb(x - y) for x in xs)
    knots = sorted(set(xs))
    opts = dict(epsabs=1e-14, epsrel=1e-11, limit=500)
    pieces = [(-np.inf, knots[0]), *zip(knots[:-1], knots[1:]), (knots[-1], np.inf)]
    lhs = err = 0.0
    for a, b in pieces:
        v, e = integrate.quad(f, a, b, **opts)
        lhs += v
        err += e
    nubar1 = math.pi / alpha / math.sin(math.pi / alpha) * 2
    rhs = 2 ** (alpha * (p - 1)) * nubar1 * sum(
        prod(nb(xs[k] - xs[r]) for k in range(p) if k != r) for r in range(p))
    return lhs, rhs, err + 4 * np.finfo(float).eps * abs(lhs)


def series_bound_check(u, v, x, terms=20000):
    """sum_{r>=v} r^u x^(r-v)  versus  sum_{k<=u} k! (v+k)^u / (1-x)^(k+1)."""
    if not 0 <= x < 1:
        raise DomainError("need 0 <= x < 1")
    lhs = sum(float(r) ** u * x ** (r - v) for r in range(v, v + terms))
    rhs = sum(factorial(k) * float(v + k) ** u / (1 - x) ** (k + 1) for k in range(u + 1))
    return lhs, rhs


def decay_bound_check(family, z, beta, pot, spec, alpha, B=None, summary=None):
    """Compare |PTCF| from the forest series with sum_sigma A_{m,sigma} * envelope.

    The PTCF is evaluated in the box of ``spec`` (finite volume); the
    integrated kernels over the box are dominated by those over R^d, so the
    infinite-volume bound applies.
    """
    from .correlations import ptcf_forest_series
    from .potentials import PolyDecay, compute_summary, polydecay_integral

    if summary is None:
        summary = compute_summary(pot, beta, B=B if B is not None else spec.B, alpha=alpha)
    Bv = summary.stability_B
    h = z * math.exp(2 * beta * Bv)
    C = summary.polydecay[0] if summary.polydecay else 0.0
    nubar1, how = polydecay_integral(alpha, pot.d)
    sizes = family.sizes
    report = {"h": h, "C": C, "nubar1": nubar1, "nubar1_method": how, "B": Bv,
              "nu1": summary.nu1}
    res = ptcf_forest_series(family, spec)
    report["ptcf"] = res.value
    report["ptcf_error"] = res.truncation_error + res.quadrature_error
    env = decay_envelope(family, PolyDecay(alpha))
    report["envelope"] = env
    A = []
    try:
        for s in range(1, family.m + 1):
            A.append(decay_constant_A(BoundParams(h, summary.nu1, nubar1, C, alpha, sizes, s, summary.nu0)))
        worst = min(decay_condition_margin(BoundParams(h, summary.nu1, nubar1, C, alpha, sizes, s, summary.nu0))
                    for s in range(1, family.m + 1))
    except DivergenceError as exc:
        report.update(condition_failed=True, reason=str(exc), bound=None, ok=None)
        return report
    report["A"] = A
    report["condition_margin"] = worst
    report["condition_failed"] = False
    report["bound"] = sum(A) * env
    report["ok"] = abs(res.value) + report["ptcf_error"] <= report["bound"]
    return report
