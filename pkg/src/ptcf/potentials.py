"""Radial pair potentials and the scalar functionals derived from them.

Every potential is a function of the distance r >= 0 taking values in
(-inf, +inf], with phi(0) = +inf.  Hard cores are represented exactly by
+inf, and ``exp(-beta * inf)`` is taken to be 0.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, RegularityError


def _as_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError(f"distance must be non-negative, got {r}")
    return r


class PairPotential:
    """Base class.  Subclasses implement ``_phi`` on a float array."""

    d: int = 1

    def __call__(self, r):
        r = _as_radius(r)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.asarray(self._phi(r), dtype=float)
        out = np.where(r == 0, np.inf, out)
        return out if out.ndim else float(out)

    def phi_plus(self, r):
        return np.maximum(self(r), 0.0)

    def phi_minus(self, r):
        return np.maximum(-np.asarray(self(r)), 0.0)

    @property
    def radii(self) -> tuple:
        """Distances where phi (hence the Mayer factor) is not smooth."""
        return ()

    @property
    def repulsive(self) -> bool:
        return False

    def default_stability(self) -> float:
        if self.repulsive:
            return 0.0
        raise DomainError(
            f"no default stability constant for {type(self).__name__}; pass B explicitly"
        )


@dataclass(frozen=True)
class LennardJones(PairPotential):
    phi0: float = 1.0
    r0: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.phi0 <= 0 or self.r0 <= 0:
            raise DomainError("LennardJones needs phi0 > 0 and r0 > 0")

    def _phi(self, r):
        u = (self.r0 / r) ** 6
        return self.phi0 / r**6 * (u - 1.0)

    @property
    def well_depth(self) -> float:
        # minimum at r^6 = 2 r0^6
        return self.phi0 / (4.0 * self.r0**6)


@dataclass(frozen=True)
class HardSphere(PairPotential):
    """phi = +inf below the diameter and 0 beyond; diameter 0 is the ideal gas."""

    diameter: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.diameter < 0:
            raise DomainError("diameter must be >= 0")

    def _phi(self, r):
        return np.where(r < self.diameter, np.inf, 0.0)

    @property
    def radii(self):
        return (self.diameter,) if self.diameter > 0 else ()

    @property
    def repulsive(self):
        return True


@dataclass(frozen=True)
class HardCorePowerTail(PairPotential):
    """Hard core below r1, soft repulsion on [r1, r0], attractive tail beyond r0.

    On [r1, r0] the potential is phi1 r^-s (r0^s - r^s)/(r0^s - r1^s), which
    vanishes at r0.  Beyond r0 it is -phi2 r^-(d+eps0) g(r) where g ramps
    linearly from 0 at r0 to 1 at r2.
    """

    r1: float = 1.0
    r0: float = 1.2
    r2: float = 1.5
    phi1: float = 1.0
    phi2: float = 1.0
    s: float = 1.0
    eps0: float = 1.0
    d: int = 1

    def __post_init__(self):
        if not 0 < self.r1 < self.r0 < self.r2:
            raise DomainError("need 0 < r1 < r0 < r2")
        if self.phi1 <= 0 or self.phi2 < 0:
            raise DomainError("need phi1 > 0 and phi2 >= 0")
        if self.s < self.d or self.eps0 <= 0:
            raise DomainError("need s >= d and eps0 > 0")

    def _phi(self, r):
        s = self.s
        soft = self.phi1 * r**-s * (self.r0**s - r**s) / (self.r0**s - self.r1**s)
        ramp = np.clip((r - self.r0) / (self.r2 - self.r0), 0.0, 1.0)
        tail = -self.phi2 * r ** -(self.d + self.eps0) * ramp
        return np.where(r < self.r1, np.inf, np.where(r <= self.r0, soft, tail))

    @property
    def radii(self):
        return (self.r1, self.r0, self.r2)

    @property
    def repulsive(self):
        return self.phi2 == 0

    def default_stability(self) -> float:
        if self.d != 1:
            return super().default_stability()
        return hard_core_stability_1d(self, self.r1)


@dataclass(frozen=True)
class Custom(PairPotential):
    """Tabulated profile, linearly interpolated, zero beyond the last knot."""

    r: tuple = ()
    values: tuple = ()
    hard_core: float = 0.0
    d: int = 1
    B: float | None = None

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or len(r) < 2 or len(r) != len(self.values):
            raise DomainError("table needs at least two (r, phi) rows")
        if np.any(np.diff(r) <= 0):
            raise DomainError("table radii must be strictly increasing")
        if self.hard_core < 0:
            raise DomainError("hard_core must be >= 0")

    @classmethod
    def from_csv(cls, path, hard_core=0.0, d=1, B=None):
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    continue  # header line
        r, v = zip(*rows)
        return cls(r=tuple(r), values=tuple(v), hard_core=hard_core, d=d, B=B)

    def _phi(self, r):
        knots = np.asarray(self.r)
        vals = np.interp(r, knots, np.asarray(self.values, dtype=float))
        vals = np.where(r > knots[-1], 0.0, vals)
        return np.where(r < self.hard_core, np.inf, vals)

    @property
    def radii(self):
        return (self.hard_core,) if self.hard_core > 0 else ()

    @property
    def repulsive(self):
        return min(self.values) >= 0

    def default_stability(self):
        if self.B is not None:
            return float(self.B)
        return super().default_stability()


def evaluate(pot: PairPotential, r) -> float:
    return pot(r)


def mayer_factor(pot: PairPotential, beta: float, r):
    """exp(-beta phi(r)) - 1, exactly -1 where phi is infinite."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    with np.errstate(over="ignore"):
        out = np.expm1(-beta * np.asarray(pot(r), dtype=float))
    return out if np.ndim(out) else float(out)


def boltzmann(pot: PairPotential, beta: float, r):
    with np.errstate(over="ignore"):
        return np.exp(-beta * np.asarray(pot(r), dtype=float))


def hard_core_stability_1d(pot: PairPotential, core: float, terms: int = 64) -> float:
    """Stability constant for a one-dimensional potential with a hard core.

    Ordering the points on the line, the k-th neighbour on either side is at
    least k*core away, so U >= -|gamma| sum_k sup_{t >= k core} phi^-(t).
    The sum is done explicitly for ``terms`` shells and bounded beyond by the
    decay phi^- <= phi2 t^-(1+eps0) when available.
    """
    grid = np.geomspace(core, core * (terms + 2) * 4, 20000)
    neg = pot.phi_minus(grid)
    # running sup from the right
    sup_right = np.maximum.accumulate(neg[::-1])[::-1]
    total = 0.0
    for k in range(1, terms + 1):
        total += float(np.interp(k * core, grid, sup_right))
    eps0 = getattr(pot, "eps0", None)
    phi2 = getattr(pot, "phi2", None)
    if eps0 is not None:
        total += phi2 * core ** -(1 + eps0) * float(special.zeta(1 + eps0, terms + 1))
    return total


def finite_size_stability(pot: PairPotential, n_points: int) -> float:
    """A stability constant valid for every configuration of at most n points.

    Uses only U >= C(n,2) * min(phi, 0); enough for kernel comparisons on
    small instances where the global constant is not needed.
    """
    if isinstance(pot, LennardJones):
        depth = pot.well_depth
    else:
        r = np.geomspace(1e-3, 1e3, 20001)
        depth = float(np.max(pot.phi_minus(r)))
    return 0.5 * max(n_points - 1, 0) * depth


class Kernel:
    """A non-negative (or signed) function of a displacement vector."""

    radii: tuple = ()

    def radial(self, r):
        raise NotImplementedError

    def __call__(self, disp):
        disp = np.asarray(disp, dtype=float)
        return self.radial(np.sqrt(np.sum(disp * disp, axis=-1)))


@dataclass(frozen=True)
class MayerKernel(Kernel):
    """nu_beta = |exp(-beta phi) - 1|, or the signed Mayer factor."""

    pot: PairPotential
    beta: float
    signed: bool = False

    @property
    def radii(self):
        return self.pot.radii

    def radial(self, r):
        c = mayer_factor(self.pot, self.beta, r)
        return c if self.signed else np.abs(c)


@dataclass(frozen=True)
class PolyDecay(Kernel):
    """nubar(x) = 1 / (1 + |x|^alpha), optionally scaled."""

    alpha: float
    scale: float = 1.0

    def radial(self, r):
        return self.scale / (1.0 + np.asarray(r, dtype=float) ** self.alpha)


@dataclass(frozen=True)
class FunctionKernel(Kernel):
    func: object
    radii: tuple = ()

    def radial(self, r):
        return np.asarray(self.func(np.asarray(r, dtype=float)), dtype=float)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d=1)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def polydecay_integral(alpha: float, d: int) -> tuple[float, str]:
    """Integral of 1/(1+|x|^alpha) over R^d and the method used."""
    if alpha <= d:
        raise RegularityError(f"alpha={alpha} must exceed d={d}")
    # closed form: S_{d-1} * (pi/alpha) / sin(pi d/alpha)
    val = sphere_area(d) * (math.pi / alpha) / math.sin(math.pi * d / alpha)
    return val, "analytic"


@dataclass(frozen=True)
class SummarySpec:
    rtol: float = 1e-8
    grid_points: int = 4000
    r_max: float = 1e4


@dataclass(frozen=True)
class PotentialSummary:
    beta: float
    stability_B: float
    nu0: float
    nu1: float
    polydecay: tuple | None = None  # (C, alpha)
    notes: dict = field(default_factory=dict)

    @property
    def nu0_tilde(self) -> float:
        return 1.0 if self.nu0 <= 1 else self.nu0


def _radial_pieces(pot, r_hi):
    cuts = sorted({0.0, *[x for x in pot.radii if 0 < x < r_hi], r_hi})
    return list(zip(cuts[:-1], cuts[1:]))


def compute_nu1(pot: PairPotential, beta: float, spec: SummarySpec = SummarySpec()):
    nu = MayerKernel(pot, beta)
    d = pot.d
    f = lambda r: float(nu.radial(r)) * r ** (d - 1)
    r_hi = max([1.0, *pot.radii]) * 4
    total = 0.0
    for a, b in _radial_pieces(pot, r_hi):
        val, _ = integrate.quad(f, a, b, epsabs=0, epsrel=spec.rtol, limit=400)
        total += val
    # the tail: nu must fall off faster than r^-d before quad is trusted
    probe = np.array([1e2, 1e3, 1e4]) * r_hi
    vals = nu.radial(probe)
    if vals[1] > 0:
        slope = -np.log10(max(vals[2], 1e-300) / vals[1])
        if slope <= d + 1e-3:
            raise RegularityError(
                f"|exp(-beta phi) - 1| decays like r^-{slope:.3g}, not integrable in d={d}")
    tail, _ = integrate.quad(f, r_hi, np.inf, epsabs=1e-14, epsrel=spec.rtol, limit=400)
    total += tail
    return sphere_area(d) * total


def compute_nu0(pot: PairPotential, beta: float, spec: SummarySpec = SummarySpec()):
    nu = MayerKernel(pot, beta)
    grid = np.concatenate([[0.0], np.geomspace(1e-4, spec.r_max, spec.grid_points)])
    vals = nu.radial(grid)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < len(grid) - 1:
        res = optimize.minimize_scalar(
            lambda r: -float(nu.radial(r)), bounds=(grid[k - 1], grid[k + 1]), method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best


def compute_polydecay_constant(pot, beta, alpha, spec: SummarySpec = SummarySpec()):
    """Smallest C on the grid with nu_beta(x) <= C nubar(x)."""
    if alpha <= pot.d:
        raise RegularityError(f"alpha={alpha} must exceed d={pot.d}")
    nu = MayerKernel(pot, beta)
    grid = np.concatenate([[0.0], np.geomspace(1e-4, spec.r_max, 4 * spec.grid_points)])
    for r in pot.radii:
        grid = np.append(grid, [r * (1 - 1e-12), r, r * (1 + 1e-12)])
    ratio = nu.radial(grid) * (1.0 + grid**alpha)
    far = np.array([1e1, 1e2, 1e3]) * spec.r_max
    far_ratio = nu.radial(far) * (1 + far**alpha)
    if far_ratio[2] > far_ratio[1] * (1 + 1e-6):
        raise RegularityError(f"nu_beta does not decay like |x|^-{alpha}")
    return float(max(ratio.max(), far_ratio.max())) * (1 + 1e-9)


def compute_summary(pot, beta, quadrature: SummarySpec = SummarySpec(), B=None, alpha=None):
    if beta <= 0:
        raise DomainError("beta must be positive")
    if B is None:
        B = pot.default_stability()
    if B < 0:
        raise DomainError("stability constant must be >= 0")
    nu1 = compute_nu1(pot, beta, quadrature)
    if not (nu1 > 0 and math.isfinite(nu1)):
        raise RegularityError(f"nu1={nu1} is not positive and finite")
    poly = None
    if alpha is not None:
        poly = (compute_polydecay_constant(pot, beta, alpha, quadrature), float(alpha))
    return PotentialSummary(beta=beta, stability_B=float(B), nu0=compute_nu0(pot, beta, quadrature),
                            nu1=nu1, polydecay=poly)
