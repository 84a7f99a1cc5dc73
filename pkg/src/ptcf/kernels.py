"""The kernel recursions T_m and Q_m, integrated kernels and chain kernels.

Both recursions share one engine.  Points carry integer labels: clusters
first, then the external points.  A call works on (first, others, gamma)
where ``first`` is the current first cluster, ``others`` the remaining
clusters and ``gamma`` the unused external points.  The base point x of
``first`` contributes

    weight(x, first - x) * sum_{xi in gamma} sum_{I} prod_{y in xi} e(x, y)
        * prod_{i in I} (prod_{p in eta_i} (1 + e(x, p)) - 1) * rec(...)

where the fan factor is the sum over the nonempty selections from each
eta_i (i in I) and the recursive call gets first' = first - x + xi + eta_I.
With a first cluster that has been emptied the value is 1 if nothing is
left and 0 otherwise.

Pair factors may be scalars or numpy arrays; arrays let one call evaluate
the kernel on a whole batch of external-point positions.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import chain, combinations

import numpy as np
from scipy import integrate

from .configurations import ClusterFamily, PointConfiguration, choose_base_point, fan_kernel_K0
from .errors import DomainError, ResourceCapError
from .potentials import MayerKernel, boltzmann, mayer_factor
from .quadrature import QuadratureSpec, VolumeCutoff, integrate_box

INTEGRATION_CAP = 2


def _subsets(seq):
    return chain.from_iterable(combinations(seq, k) for k in range(len(seq) + 1))


class _Engine:
    def __init__(self, edge, weight, base):
        self.edge = edge  # (a, b) -> factor
        self.weight = weight  # (x, rest) -> factor
        self.base = base  # first -> x
        self.memo = {}
        self.terms = 0

    def __call__(self, first, others, gamma):
        first = tuple(sorted(first))
        key = (first, others, gamma)
        if key in self.memo:
            return self.memo[key]
        if not first:
            val = 1.0 if not others and not gamma else 0.0
            self.memo[key] = val
            return val
        x = self.base(first)
        rest = tuple(p for p in first if p != x)
        total = 0.0
        for xi in _subsets(gamma):
            g = tuple(y for y in gamma if y not in xi)
            kxi = 1.0
            for y in xi:
                kxi = kxi * self.edge(x, y)
            for I in _subsets(range(len(others))):
                merged = rest + xi + tuple(p for i in I for p in others[i])
                left = tuple(o for i, o in enumerate(others) if i not in I)
                if not merged and (left or g):
                    continue
                sub = self(merged, left, g)
                if isinstance(sub, float) and sub == 0.0:
                    continue
                fan = 1.0
                for i in I:
                    f = 1.0
                    for p in others[i]:
                        f = f * (1.0 + self.edge(x, p))
                    fan = fan * (f - 1.0)
                total = total + kxi * fan * sub
                self.terms += 1
        val = self.weight(x, rest) * total
        self.memo[key] = val
        return val


def _labels(sizes, n):
    out, start = [], 0
    for s in sizes:
        out.append(tuple(range(start, start + s)))
        start += s
    return tuple(out), tuple(range(start, start + n))


def _as_family(family):
    return family if isinstance(family, ClusterFamily) else ClusterFamily(family)


def _as_config(gamma, d):
    if isinstance(gamma, PointConfiguration):
        return gamma
    return PointConfiguration(gamma, d)


def _check_instance(family, gamma):
    pts = set(p for c in family.clusters for p in c.points)
    if pts.intersection(gamma.points):
        raise DomainError("gamma overlaps the clusters")


def _pair_matrix(P, func):
    V = len(P)
    M = np.zeros((V, V))
    for a, b in combinations(range(V), 2):
        M[a, b] = M[b, a] = func(P[a], P[b])
    return M


@dataclass
class KernelValue:
    value: float
    terms: int


def _run(sizes, n, engine):
    # empty clusters: only the m = 1 initial conditions give nonzero values
    if len(sizes) > 1 and any(s == 0 for s in sizes):
        return 0.0
    clusters, gamma = _labels(sizes, n)
    return engine(clusters[0], clusters[1:], gamma)


def kernel_T(family, gamma, pot, beta, z, B=0.0, detail=False):
    """T_m(eta_1;...;eta_m | gamma) at a single configuration.

    The base point of each first cluster is chosen by ``choose_base_point``
    (lowest canonical index with W >= -2B).
    """
    return _kernel_T(_as_family(family), gamma, pot, beta, z, B, detail)


def _kernel_T(family, gamma, pot, beta, z, B, detail):
    gamma = _as_config(gamma, family.d)
    _check_instance(family, gamma)
    P = [p for c in family.clusters for p in c.points] + list(gamma.points)
    P = np.array(P, dtype=float).reshape(len(P), family.d)
    C = _pair_matrix(P, lambda a, b: mayer_factor(pot, beta, float(np.linalg.norm(a - b))))
    E = _pair_matrix(P, lambda a, b: float(boltzmann(pot, beta, float(np.linalg.norm(a - b)))))

    def base(first):
        cfg_order = sorted(first, key=lambda v: tuple(P[v]))
        k = choose_base_point(PointConfiguration([P[v] for v in cfg_order], family.d), pot, B)
        return cfg_order[k]

    def weight(x, rest):
        w = z
        for p in rest:
            w *= E[x, p]
        return w

    eng = _Engine(lambda a, b: C[a, b], weight, base)
    val = _run(family.sizes, len(gamma), eng)
    return KernelValue(float(val), eng.terms) if detail else float(val)


def kernel_Q(family, gamma, h, nu, base="canonical", detail=False):
    """Q_m(eta_1;...;eta_m | gamma) with weight h and pair factor nu.

    ``nu`` is a kernel on displacements.  ``base`` is "canonical" (lowest
    point in lexicographic order) or "label" (lowest vertex number).
    """
    family = _as_family(family)
    gamma = _as_config(gamma, family.d)
    _check_instance(family, gamma)
    P = [p for c in family.clusters for p in c.points] + list(gamma.points)
    P = np.array(P, dtype=float).reshape(len(P), family.d)
    N = _pair_matrix(P, lambda a, b: float(nu(a - b)))
    if base == "canonical":
        pick = lambda first: min(first, key=lambda v: tuple(P[v]))
    else:
        pick = min
    eng = _Engine(lambda a, b: N[a, b], lambda x, rest: h, pick)
    val = _run(family.sizes, len(gamma), eng)
    return KernelValue(float(val), eng.terms) if detail else float(val)


def compare_T_Q(family, gamma, pot, beta, z, B=0.0):
    """(|T|, Q, ok) with h = z exp(2 beta B) and nu = |exp(-beta phi) - 1|."""
    t = kernel_T(family, gamma, pot, beta, z, B)
    q = kernel_Q(family, gamma, z * np.exp(2 * beta * B), MayerKernel(pot, beta))
    return abs(t), q, abs(t) <= q + 1e-12 * abs(q)


# ------------------------------------------------------------------ batches

def batch_kernel(sizes, fixed, nodes, pair, weight_pair, prefactor=1.0):
    """Evaluate the recursion for a batch of external configurations.

    ``fixed`` holds the cluster points (l, d); ``nodes`` has shape (K, n, d).
    ``pair(r)`` gives the edge factor and ``weight_pair(r)`` the factor of
    the base-point weight, both as functions of distance arrays; the base
    point is the lowest label.  Returns an array of shape (K,).
    """
    fixed = np.asarray(fixed, dtype=float)
    K, n = nodes.shape[0], nodes.shape[1]
    l = fixed.shape[0]
    pos = [np.broadcast_to(fixed[i], (K, fixed.shape[1])) for i in range(l)]
    pos += [nodes[:, j, :] for j in range(n)]
    cache_e, cache_w = {}, {}

    def dist(a, b):
        return np.sqrt(np.sum((pos[a] - pos[b]) ** 2, axis=-1))

    def edge(a, b):
        key = (min(a, b), max(a, b))
        if key not in cache_e:
            if a < l and b < l:
                cache_e[key] = float(pair(dist(a, b)[:1])[0])
            else:
                cache_e[key] = pair(dist(a, b))
        return cache_e[key]

    def wpair(a, b):
        key = (min(a, b), max(a, b))
        if key not in cache_w:
            if a < l and b < l:
                cache_w[key] = float(weight_pair(dist(a, b)[:1])[0])
            else:
                cache_w[key] = weight_pair(dist(a, b))
        return cache_w[key]

    def weight(x, rest):
        w = prefactor
        for p in rest:
            w = w * wpair(x, p)
        return w

    eng = _Engine(edge, weight, min)
    val = _run(tuple(sizes), n, eng)
    return np.broadcast_to(np.asarray(val, dtype=float), (K,))


def batch_T(family, nodes, pot, beta):
    """T_m at z = 1 for every row of ``nodes``; scale by z^(l+n) afterwards."""
    return batch_kernel(family.sizes, _fixed(family), nodes,
                        lambda r: mayer_factor(pot, beta, r),
                        lambda r: boltzmann(pot, beta, r))


def batch_Q(family, nodes, h, nu):
    fixed = _fixed(family)
    n = nodes.shape[1]
    out = batch_kernel(family.sizes, fixed, nodes, nu.radial, lambda r: np.ones_like(r))
    return out * h ** (family.l + n)


def _fixed(family):
    return np.array([p for c in family.clusters for p in c.points], dtype=float).reshape(-1, family.d)


def integrated_Q(family, n, h, nu, box: VolumeCutoff, spec=QuadratureSpec(), cap=INTEGRATION_CAP):
    """Integral of Q_m(...|{y_1..y_n}) over box^n; returns (value, error)."""
    family = _as_family(family)
    if n > cap:
        raise ResourceCapError(f"n={n} exceeds integration cap {cap}")
    if n == 0:
        return kernel_Q(family, (), h, nu), 0.0
    fixed = _fixed(family)
    val, err = integrate_box(lambda y: batch_Q(family, y, h, nu), n, box,
                             anchors=fixed.ravel() if box.d == 1 else (),
                             radii=nu.radii, spec=spec)
    return float(val), float(err)


# ------------------------------------------------------------------ chains

def _line_integral(f, knots):
    """Integral over the real line, split at ``knots``."""
    knots = sorted(set(float(k) for k in knots))
    total = 0.0
    opts = dict(epsabs=1e-13, epsrel=1e-10, limit=500)
    total += integrate.quad(f, -np.inf, knots[0], **opts)[0]
    for a, b in zip(knots[:-1], knots[1:]):
        total += integrate.quad(f, a, b, **opts)[0]
    total += integrate.quad(f, knots[-1], np.inf, **opts)[0]
    return total


def chain_kernel(x, eta_j, k, h, nu):
    """h^k * integral of nu(x-y_1) nu(y_1-y_2)... K0(y_k; eta_j), d = 1, k <= 2."""
    eta_j = eta_j if isinstance(eta_j, PointConfiguration) else PointConfiguration(eta_j)
    if eta_j.d != 1:
        raise DomainError("chain kernels are integrated in one dimension only")
    if k > 2:
        raise ResourceCapError(f"k={k} exceeds chain-kernel cap 2")
    x = float(np.ravel(x)[0])
    targets = [p[0] for p in eta_j.points]
    k0 = lambda y: fan_kernel_K0([y], [eta_j], nu)
    radii = [r for r in nu.radii if r > 0]
    knots = lambda centres: [c + s * r for c in centres for r in [0.0, *radii] for s in (1, -1)]
    if k == 0:
        return k0(x)
    if k == 1:
        f = lambda y: float(nu([x - y])) * k0(y)
        return h * _line_integral(f, knots([x, *targets]))
    inner = lambda y1: _line_integral(lambda y2: float(nu([y1 - y2])) * k0(y2),
                                      knots([y1, *targets]))
    f = lambda y1: float(nu([x - y1])) * inner(y1)
    return h**2 * _line_integral(f, knots([x, *targets]))
