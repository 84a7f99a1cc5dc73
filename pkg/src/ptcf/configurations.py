"""Finite point configurations, clusters, energies and product kernels."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError, InconsistencyError
from .potentials import PairPotential, mayer_factor
from .quadrature import VolumeCutoff  # noqa: F401  (re-exported)


@dataclass(frozen=True, init=False)
class PointConfiguration:
    """Points of R^d stored in lexicographic order."""

    points: tuple
    d: int

    def __init__(self, points=(), d=None):
        pts = [tuple(float(c) for c in np.atleast_1d(p)) for p in points]
        if d is None:
            d = len(pts[0]) if pts else 1
        if any(len(p) != d for p in pts):
            raise DomainError(f"all points must have dimension {d}")
        object.__setattr__(self, "points", tuple(sorted(pts)))
        object.__setattr__(self, "d", int(d))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(len(self.points), self.d)

    def __add__(self, other):
        return PointConfiguration(self.points + other.points, self.d)

    def without(self, index: int):
        return PointConfiguration(self.points[:index] + self.points[index + 1:], self.d)


@dataclass(frozen=True, init=False)
class ClusterFamily:
    clusters: tuple

    def __init__(self, clusters):
        cl = tuple(c if isinstance(c, PointConfiguration) else PointConfiguration(c) for c in clusters)
        if not cl:
            raise DomainError("a cluster family needs m >= 1 clusters")
        seen = set()
        for c in cl:
            common = seen.intersection(c.points)
            if common:
                raise DomainError(f"clusters are not disjoint: {sorted(common)}")
            seen.update(c.points)
        object.__setattr__(self, "clusters", cl)

    @property
    def m(self):
        return len(self.clusters)

    @property
    def sizes(self):
        return tuple(len(c) for c in self.clusters)

    @property
    def l(self):
        return sum(self.sizes)

    @property
    def d(self):
        return self.clusters[0].d

    @property
    def union(self) -> PointConfiguration:
        return PointConfiguration([p for c in self.clusters for p in c.points], self.d)


def _dist(a, b):
    return float(np.linalg.norm(np.subtract(a, b)))


def energy_U(cfg: PointConfiguration, pot: PairPotential) -> float:
    total = 0.0
    for x, y in combinations(cfg.points, 2):
        total += pot(_dist(x, y))
        if total == np.inf:
            break
    return total


def energy_W(eta: PointConfiguration, gamma: PointConfiguration, pot: PairPotential) -> float:
    total = 0.0
    for x in eta.points:
        for y in gamma.points:
            total += pot(_dist(x, y))
            if total == np.inf:
                return total
    return total


def choose_base_point(eta: PointConfiguration, pot: PairPotential, B: float = 0.0) -> int:
    """Lowest index x with W(x; eta minus x) >= -2B."""
    if len(eta) == 0:
        raise DomainError("base point of an empty configuration")
    for i, x in enumerate(eta.points):
        w = energy_W(PointConfiguration([x], eta.d), eta.without(i), pot)
        if w >= -2 * B:
            return i
    raise InconsistencyError(f"no point satisfies W >= -2B with B={B}; B is not a stability constant")


def product_kernel_K(x, xi: PointConfiguration, pot, beta) -> float:
    out = 1.0
    for y in xi.points:
        out *= mayer_factor(pot, beta, _dist(x, y))
    return out


def _nonempty_subsets(seq):
    for k in range(1, len(seq) + 1):
        yield from combinations(seq, k)


def fan_kernel_K0(x, etaI, nu) -> float:
    """Sum over eta inside the union of etaI meeting every cluster of prod nu(x - y).

    ``nu`` is a kernel on displacements (a MayerKernel gives |C| or C).
    """
    clusters = [c if isinstance(c, PointConfiguration) else PointConfiguration(c) for c in etaI]
    if any(len(c) == 0 for c in clusters):
        raise DomainError("fan kernel needs nonempty clusters")
    if not clusters:
        return 1.0
    pts = [(i, p) for i, c in enumerate(clusters) for p in c.points]
    x = np.asarray(x, dtype=float)
    vals = [float(nu(x - np.asarray(p))) for _, p in pts]
    total = 0.0
    for sub in _nonempty_subsets(range(len(pts))):
        if len({pts[k][0] for k in sub}) < len(clusters):
            continue
        total += float(np.prod([vals[k] for k in sub]))
    return total
