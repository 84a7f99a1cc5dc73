"""Finite-volume correlation functions by two independent routes.

Everything here lives in a box Lambda and is expanded in powers of z.
Series are numpy arrays of coefficients; ``c[k]`` multiplies ``z^(base+k)``
where the base power is the number of fixed points.

direct   ratio of the truncated numerator and partition-function series
mobius   cluster cumulant of direct values, taken on the series
forest   integrals of the T kernel over the box, order by order
ursell   integrals of the connected-graph function
"""
from __future__ import annotations

import math
import operator
from dataclasses import dataclass, field
from functools import cached_property, lru_cache, reduce
from itertools import combinations

import numpy as np

from .bounds import convergence_margin, forest_series_tail, radius_r_beta
from .combinatorics import all_partitions
from .configurations import ClusterFamily, PointConfiguration, choose_base_point, energy_W
from .errors import DomainError, ResourceCapError
from .kernels import batch_T
from .potentials import boltzmann, compute_nu0, compute_nu1, mayer_factor
from .quadrature import QuadratureSpec, VolumeCutoff, integrate_box, product_rule

ORDER_CAP = 4
URSELL_CAP = 7


@dataclass(frozen=True)
class SeriesSpec:
    pot: object
    beta: float
    z: float
    box: VolumeCutoff
    n_max: int = 3
    B: float | None = None
    quad: QuadratureSpec = QuadratureSpec()

    def __post_init__(self):
        if self.n_max < 0:
            raise DomainError("n_max must be >= 0")
        if self.z <= 0 or self.beta <= 0:
            raise DomainError("z and beta must be positive")
        if self.box.d != self.pot.d:
            raise DomainError(f"box dimension {self.box.d} != potential dimension {self.pot.d}")

    @cached_property
    def constants(self) -> dict:
        """B, nu0, nu1, h and the convergence margin."""
        B = self.pot.default_stability() if self.B is None else float(self.B)
        nu1 = 0.0 if _ideal(self.pot) else compute_nu1(self.pot, self.beta)
        nu0 = compute_nu0(self.pot, self.beta) if nu1 > 0 else 0.0
        return {
            "B": B, "nu0": nu0, "nu1": nu1,
            "h": self.z * math.exp(2 * self.beta * B),
            "margin": convergence_margin(self.z, self.beta, B, nu1),
            "r_beta": radius_r_beta(B, nu1, self.beta) if nu1 > 0 else math.inf,
        }

    def tail(self, sizes) -> float:
        c = self.constants
        return forest_series_tail(tuple(sizes), c["h"], c["nu1"], c["nu0"], self.n_max)

    def flags(self) -> tuple:
        c = self.constants
        out = []
        if c["margin"] <= 0:
            out.append("outside_convergence_region")
        if self.z >= c["r_beta"]:
            out.append("outside_disk")
        return tuple(out)


def _ideal(pot):
    return getattr(pot, "diameter", None) == 0


@dataclass
class CorrelationResult:
    value: float
    truncation_error: float
    route: str
    quadrature_error: float = 0.0
    coefficients: tuple = ()
    flags: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.truncation_error >= 0:
            raise DomainError("truncation error must be non-negative")

    @property
    def error(self):
        return self.truncation_error + self.quadrature_error


# ------------------------------------------------------------------ series

def _mul(a, b):
    n = min(len(a), len(b))
    return np.array([sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(n)])


def _inv(a):
    out = np.zeros(len(a))
    out[0] = 1.0 / a[0]
    for k in range(1, len(a)):
        out[k] = -sum(a[i] * out[k - i] for i in range(1, k + 1)) / a[0]
    return out


def _horner(c, z):
    return float(sum(ck * z**k for k, ck in enumerate(c)))


def _integrate(f, n, spec: SeriesSpec, anchors=()):
    anchors = np.asarray(anchors, dtype=float).ravel() if spec.box.d == 1 else ()
    return integrate_box(f, n, spec.box, anchors=anchors, radii=spec.pot.radii, spec=spec.quad)


def _points(x):
    if isinstance(x, PointConfiguration):
        return x
    return PointConfiguration(x)


def boltzmann_batch(fixed, nodes, pot, beta):
    """exp(-beta U(fixed + y)) for each row y of ``nodes`` (K, n, d)."""
    fixed = np.asarray(fixed, dtype=float)
    K, n, d = nodes.shape
    fixed = fixed.reshape(-1, d)
    l = len(fixed)
    own = 1.0
    for a, b in combinations(range(l), 2):
        own *= float(boltzmann(pot, beta, float(np.linalg.norm(fixed[a] - fixed[b]))))
    out = np.full(K, own)
    if own == 0.0:
        return out
    for j in range(n):
        y = nodes[:, j, :]
        for a in range(l):
            out = out * boltzmann(pot, beta, np.linalg.norm(y - fixed[a], axis=-1))
        for k in range(j):
            out = out * boltzmann(pot, beta, np.linalg.norm(y - nodes[:, k, :], axis=-1))
    return out


@lru_cache(maxsize=4096)
def _numerator(points: tuple, spec: SeriesSpec, order: int):
    """(1/k!) int_{Lambda^k} exp(-beta U(eta + y)) dy for k <= order, with errors."""
    d = spec.box.d
    fixed = np.array(points, dtype=float).reshape(-1, d)
    coef, err = np.zeros(order + 1), np.zeros(order + 1)
    for k in range(order + 1):
        if k > ORDER_CAP:
            raise ResourceCapError(f"integration order {k} exceeds cap {ORDER_CAP}")
        v, e = _integrate(lambda y: boltzmann_batch(fixed, y, spec.pot, spec.beta), k, spec, fixed)
        coef[k] = v / math.factorial(k)
        err[k] = e / math.factorial(k)
    return coef, err


def rho_series(eta, spec: SeriesSpec, order=None):
    """Coefficients of rho(eta)/z^|eta| as a power series, with error bounds."""
    order = spec.n_max if order is None else order
    eta = _points(eta)
    if len(eta) == 0:
        c = np.zeros(order + 1)
        c[0] = 1.0
        return c, np.zeros(order + 1)
    num, enum = _numerator(eta.points, spec, order)
    Z, eZ = _numerator((), spec, order)
    iZ = _inv(Z)
    r = _mul(num, iZ)
    # first-order propagation of the quadrature errors through the division
    err = _mul(np.abs(iZ), enum + _mul(np.abs(r), eZ))
    return r, err


def _check_inside(points, box):
    if len(points) and not box.contains(np.array(points)):
        raise DomainError("configuration is not inside the box")


def rho_direct(eta, spec: SeriesSpec) -> CorrelationResult:
    """rho_Lambda(eta) = z^|eta| Z^-1 sum_n z^n/n! int exp(-beta U(eta + y)) dy."""
    eta = _points(eta)
    _check_inside(eta.points, spec.box)
    if len(eta) == 0:
        return CorrelationResult(1.0, 0.0, "direct")
    c, e = rho_series(eta, spec)
    zl = spec.z ** len(eta)
    return CorrelationResult(zl * _horner(c, spec.z), spec.tail((len(eta),)), "direct",
                             zl * _horner(e, spec.z), tuple(map(float, c)), spec.flags())


def lp_integral(F, spec: SeriesSpec, anchors=(), radii=(), chain=True):
    """sum_{n <= n_max} z^n/n! int_{Lambda^n} F(n, y) dy; returns (value, error).

    Pass ``chain=False`` for integrands that are smooth on the diagonals.
    """
    val = err = 0.0
    for n in range(spec.n_max + 1):
        v, e = integrate_box(lambda y: F(n, y), n, spec.box, anchors=anchors, radii=radii, spec=spec.quad,
                             chain=chain)
        w = spec.z**n / math.factorial(n)
        val += w * float(v)
        err += w * float(e)
    return val, err


# ------------------------------------------------------------------ cumulants

def _key(block):
    return frozenset(block)


def mobius_truncate(values, m=None, mul=operator.mul):
    """sum over set partitions of {0..m-1} of (-1)^(k-1) (k-1)! prod rho(block union).

    ``values`` maps frozensets of cluster indices to values (numbers or
    series); ``mul`` multiplies two of them.
    """
    if m is None:
        m = 1 + max(i for k in values for i in k)
    total = None
    for blocks in all_partitions(range(m)):
        k = len(blocks)
        try:
            terms = [values[_key(b)] for b in blocks]
        except KeyError as exc:
            raise DomainError(f"missing value for block {set(exc.args[0])}") from None
        term = reduce(mul, terms) * ((-1) ** (k - 1) * math.factorial(k - 1))
        total = term if total is None else total + term
    return total


def mobius_error(values, errors, m=None, mul=operator.mul):
    """Bound on the change of the cumulant when each value moves by its error."""
    if m is None:
        m = 1 + max(i for k in values for i in k)
    total = None
    for blocks in all_partitions(range(m)):
        k = len(blocks)
        hi = reduce(mul, [abs(values[_key(b)]) + errors[_key(b)] for b in blocks])
        lo = reduce(mul, [abs(values[_key(b)]) for b in blocks])
        term = (hi - lo) * math.factorial(k - 1)
        total = term if total is None else total + term
    return total


def _family(family):
    return family if isinstance(family, ClusterFamily) else ClusterFamily(family)


def _has_empty(family):
    return family.m > 1 and any(s == 0 for s in family.sizes)


def ptcf_series(family, spec: SeriesSpec, order=None):
    """Power series of the PTCF / z^l from direct values of every cluster union."""
    family = _family(family)
    order = spec.n_max if order is None else order
    if _has_empty(family):
        return np.zeros(order + 1), np.zeros(order + 1)
    vals, errs = {}, {}
    for r in range(1, family.m + 1):
        for J in combinations(range(family.m), r):
            pts = [p for i in J for p in family.clusters[i].points]
            vals[_key(J)], errs[_key(J)] = rho_series(PointConfiguration(pts, family.d), spec, order)
    c = mobius_truncate(vals, family.m, _mul)
    e = mobius_error(vals, errs, family.m, _mul)
    return c, e


def ptcf_mobius(family, spec: SeriesSpec) -> CorrelationResult:
    family = _family(family)
    _check_inside(family.union.points, spec.box)
    c, e = ptcf_series(family, spec)
    zl = spec.z**family.l
    tail = 0.0 if _has_empty(family) else spec.tail(family.sizes)
    return CorrelationResult(zl * _horner(c, spec.z), tail, "mobius", zl * _horner(e, spec.z),
                             tuple(c), spec.flags())


def ptcf_forest_series(family, spec: SeriesSpec, cap=ORDER_CAP) -> CorrelationResult:
    """sum_{n <= n_max} 1/n! int_{Lambda^n} T_m(eta_1;...;eta_m | y) dy."""
    family = _family(family)
    _check_inside(family.union.points, spec.box)
    if _has_empty(family):
        return CorrelationResult(0.0, 0.0, "forest_series")
    if spec.n_max > cap:
        raise ResourceCapError(f"n_max={spec.n_max} exceeds integration cap {cap}")
    fixed = family.union.array
    coef, err = [], []
    for n in range(spec.n_max + 1):
        v, e = _integrate(lambda y: batch_T(family, y, spec.pot, spec.beta), n, spec, fixed)
        coef.append(float(v) / math.factorial(n))
        err.append(float(e) / math.factorial(n))
    zl = spec.z**family.l
    return CorrelationResult(zl * _horner(coef, spec.z), spec.tail(family.sizes), "forest_series",
                             zl * _horner(err, spec.z), tuple(coef), spec.flags())


# ------------------------------------------------------------------ Ursell

def ursell(gamma, pot, beta, cap=URSELL_CAP) -> float:
    """Sum over connected graphs on gamma of the product of Mayer factors."""
    gamma = _points(gamma)
    V = len(gamma)
    if V > cap:
        raise ResourceCapError(f"|gamma|={V} exceeds Ursell cap {cap}")
    if V == 0:
        return 0.0
    if V == 1:
        return 1.0
    P = gamma.array
    pairs = list(combinations(range(V), 2))
    masks = np.arange(2 ** len(pairs), dtype=np.int64)
    weight = np.ones(len(masks))
    bits = []
    for e, (a, b) in enumerate(pairs):
        has = (masks >> e) & 1
        bits.append(has)
        c = mayer_factor(pot, beta, float(np.linalg.norm(P[a] - P[b])))
        weight = np.where(has == 1, weight * c, weight)
    reach = np.ones(len(masks), dtype=np.int64)
    for _ in range(V - 1):
        for e, (a, b) in enumerate(pairs):
            ra = (reach >> a) & 1
            rb = (reach >> b) & 1
            reach |= (bits[e] & ra) << b
            reach |= (bits[e] & rb) << a
    connected = reach == (1 << V) - 1
    return float(weight[connected].sum())


def ursell_batch(fixed, nodes, pot, beta):
    """Ursell function of fixed + y for every row y of ``nodes``.

    Uses Phi(S) = F(S) - sum_{T < S, min S in T} Phi(T) F(S - T), F the
    Boltzmann factor, over subsets encoded as bitmasks.
    """
    fixed = np.asarray(fixed, dtype=float)
    K, n, d = nodes.shape
    fixed = fixed.reshape(-1, d)
    pos = [np.broadcast_to(p, (K, d)) for p in fixed] + [nodes[:, j, :] for j in range(n)]
    V = len(pos)
    if V > URSELL_CAP:
        raise ResourceCapError(f"{V} points exceed Ursell cap {URSELL_CAP}")
    if V == 0:
        return np.zeros(K)
    E = {}
    for a, b in combinations(range(V), 2):
        E[a, b] = boltzmann(pot, beta, np.linalg.norm(pos[a] - pos[b], axis=-1))
    F = {0: np.ones(K)}
    for S in range(1, 1 << V):
        top = S.bit_length() - 1
        rest = S & ~(1 << top)
        f = F[rest]
        for a in range(top):
            if rest >> a & 1:
                f = f * E[a, top]
        F[S] = f
    Phi = {}
    for S in sorted(range(1, 1 << V), key=lambda s: bin(s).count("1")):
        low = S & -S
        val = F[S].copy()
        others = S & ~low
        T = others
        while True:
            # T ranges over subsets of S without its lowest bit; the block is T | low
            sub = T | low
            if sub != S:
                val = val - Phi[sub] * F[S & ~sub]
            if T == 0:
                break
            T = (T - 1) & others
        Phi[S] = val
    return Phi[(1 << V) - 1]


def tcf_series(eta, spec: SeriesSpec, cap=ORDER_CAP) -> CorrelationResult:
    """rho^T(eta) = z^|eta| sum_n z^n/n! int Phi^T(eta + y) dy, truncated."""
    eta = _points(eta)
    _check_inside(eta.points, spec.box)
    if spec.n_max > cap:
        raise ResourceCapError(f"n_max={spec.n_max} exceeds integration cap {cap}")
    fixed = eta.array
    coef, err = [], []
    for n in range(spec.n_max + 1):
        if len(eta) + n > URSELL_CAP:
            raise ResourceCapError(f"|eta|+n={len(eta) + n} exceeds Ursell cap {URSELL_CAP}")
        v, e = _integrate(lambda y: ursell_batch(fixed, y, spec.pot, spec.beta), n, spec, fixed)
        coef.append(float(v) / math.factorial(n))
        err.append(float(e) / math.factorial(n))
    zl = spec.z ** len(eta)
    tail = spec.tail((1,) * len(eta)) if len(eta) else 0.0
    return CorrelationResult(zl * _horner(coef, spec.z), tail, "ursell_series",
                             zl * _horner(err, spec.z), tuple(coef), spec.flags())


# ------------------------------------------------------------------ key equation

@dataclass
class ResidualReport:
    lhs: float
    rhs: float
    residual: float
    bound: float
    lhs_error: float
    rhs_error: float
    tail: float

    @property
    def ok(self):
        return self.residual <= self.bound


def _fan(x, clusters, pot, beta):
    out = 1.0
    for c in clusters:
        f = 1.0
        for p in c.points:
            f *= 1.0 + mayer_factor(pot, beta, float(np.linalg.norm(np.subtract(x, p))))
        out *= f - 1.0
    return out


def _inner_order0(first, rest, nodes, spec):
    """Order-0 coefficient of the inner PTCF for every row of ``nodes``."""
    d = spec.box.d
    m = 1 + len(rest)
    groups = [np.array(first, dtype=float).reshape(-1, d)] + [c.array for c in rest]
    K = nodes.shape[0]
    vals = {}
    for r in range(1, m + 1):
        for J in combinations(range(m), r):
            fixed = np.concatenate([groups[i] for i in J]) if J else np.zeros((0, d))
            ys = nodes if 0 in J else nodes[:, :0, :]
            vals[_key(J)] = boltzmann_batch(fixed, ys, spec.pot, spec.beta) * np.ones(K)
    if m > 1 and (len(first) + nodes.shape[1]) == 0:
        return np.zeros(K)
    return mobius_truncate(vals, m)


def ks_residual(family, spec: SeriesSpec, cap=3) -> ResidualReport:
    """Both sides of the key recursion for the PTCF, truncated at total power l + n_max.

    LHS is the direct cumulant series.  RHS is

        z exp(-beta W(x1; eta1')) sum_I fan_I(x1) sum_g 1/g! int K(x1; y)
            PTCF(eta1' + eta_I + y; eta_rest) dy

    with the inner PTCF expanded to the matching order.  In exact arithmetic
    the two polynomials coincide, so the residual is a quadrature error; the
    reported bound adds both tail bounds.
    """
    family = _family(family)
    if family.sizes[0] == 0:
        raise DomainError("the first cluster must be nonempty")
    if spec.n_max > cap:
        raise ResourceCapError(f"n_max={spec.n_max} exceeds cap {cap}")
    _check_inside(family.union.points, spec.box)
    pot, beta, z, N = spec.pot, spec.beta, spec.z, spec.n_max
    l = family.l
    B = spec.constants["B"]
    eta1 = family.clusters[0]
    k = choose_base_point(eta1, pot, B)
    x1 = eta1.points[k]
    eta1p = eta1.without(k)
    w = math.exp(-beta * energy_W(PointConfiguration([x1], family.d), eta1p, pot)) if len(eta1p) else 1.0
    others = family.clusters[1:]

    lc, le = ptcf_series(family, spec, N)
    lhs = z**l * _horner(lc, z)
    lhs_err = z**l * _horner(le, z)

    rhs = rhs_err = 0.0
    x1a = np.array(x1)
    for r in range(len(others) + 1):
        for I in combinations(range(len(others)), r):
            fan = _fan(x1, [others[i] for i in I], pot, beta)
            if fan == 0.0:
                continue
            first = list(eta1p.points) + [p for i in I for p in others[i].points]
            rest = [others[i] for i in range(len(others)) if i not in I]
            m_in = 1 + len(rest)
            for g in range(N + 1):
                order = N - g
                # base power of the inner PTCF: every point it carries
                power = len(first) + g + sum(len(c) for c in rest)
                if m_in > 1 and len(first) + g == 0:
                    continue

                def integrand(y, order=order):
                    Kxy = np.ones(y.shape[0])
                    for j in range(y.shape[1]):
                        Kxy = Kxy * mayer_factor(pot, beta, np.linalg.norm(y[:, j, :] - x1a, axis=-1))
                    if order == 0:
                        return Kxy * _inner_order0(first, rest, y, spec), np.zeros(y.shape[0])
                    vals, errs = np.zeros(y.shape[0]), np.zeros(y.shape[0])
                    for q in range(y.shape[0]):
                        if Kxy[q] == 0.0:
                            continue
                        pts = first + [tuple(p) for p in y[q]]
                        fam = ClusterFamily([PointConfiguration(pts, family.d), *rest])
                        c, e = ptcf_series(fam, spec, order)
                        vals[q] = Kxy[q] * _horner(c, z)
                        errs[q] = abs(Kxy[q]) * _horner(e, z)
                    return vals, errs

                v, ve = _outer(integrand, g, spec, [x1, *first, *[p for c in rest for p in c.points]])
                scale = z * w * fan * z**power / math.factorial(g)
                rhs += scale * v
                rhs_err += abs(scale) * ve
    tail = spec.tail(family.sizes)
    residual = abs(lhs - rhs)
    return ResidualReport(lhs, rhs, residual, lhs_err + rhs_err + 2 * tail, lhs_err, rhs_err, tail)


def _outer(integrand, g, spec, anchors):
    """Integral of a (value, error) integrand over box^g with a two-order error."""
    if g == 0:
        v, e = integrand(np.zeros((1, 0, spec.box.d)))
        return float(v[0]), float(e[0])
    if spec.box.d != 1:
        val, err = integrate_box(lambda y: np.stack(integrand(y), axis=-1), g, spec.box, spec=spec.quad)
        return float(val[0]), float(err[0] + val[1])
    anchors = np.asarray(anchors, dtype=float).ravel()
    res = []
    for order in (spec.quad.order + 1, spec.quad.order):
        nodes, wts = product_rule(g, spec.box, anchors, spec.pot.radii, spec.quad, order)
        v, e = integrand(nodes)
        res.append((float(wts @ v), float(np.abs(wts) @ e)))
    (hi, hi_e), (lo, _) = res
    return hi, abs(hi - lo) + hi_e


# ------------------------------------------------------------------ resummation

def resummation_check(F, H, spec: SeriesSpec):
    """Both sides of the subset resummation identity at matched truncation.

    lhs = sum_n z^n/n! int F(n, y) sum_{I subset [n]} H(y_I, y_rest)
    rhs = sum_{a+b <= n_max} z^(a+b)/(a! b!) int F(a+b, (y, y')) H(y, y')

    ``F(n, nodes)`` and ``H(a_nodes, b_nodes)`` act on arrays (K, n, d).
    Returns (lhs, rhs, error estimate).
    """
    lhs = rhs = err = 0.0
    for n in range(spec.n_max + 1):
        def left(y, n=n):
            tot = np.zeros(y.shape[0])
            for r in range(n + 1):
                for I in combinations(range(n), r):
                    J = [j for j in range(n) if j not in I]
                    tot = tot + H(y[:, list(I), :], y[:, J, :])
            return F(n, y) * tot

        v, e = integrate_box(left, n, spec.box, spec=spec.quad)
        lhs += spec.z**n / math.factorial(n) * float(v)
        err += spec.z**n / math.factorial(n) * float(e)
        for a in range(n + 1):
            b = n - a
            v, e = integrate_box(lambda y, a=a, n=n: F(n, y) * H(y[:, :a, :], y[:, a:, :]), n,
                                 spec.box, spec=spec.quad)
            wgt = spec.z**n / (math.factorial(a) * math.factorial(b))
            rhs += wgt * float(v)
            err += wgt * float(e)
    return lhs, rhs, err
