import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptcf.configurations import (
    ClusterFamily, PointConfiguration, choose_base_point, energy_U, energy_W, fan_kernel_K0,
    product_kernel_K,
)
from ptcf.errors import DomainError, InconsistencyError
from ptcf.potentials import (
    HardSphere, LennardJones, MayerKernel, boltzmann, finite_size_stability, mayer_factor,
)

ROD = HardSphere(1.0)


def cfg(*xs, d=None):
    return PointConfiguration([np.atleast_1d(x) for x in xs], d)


def test_canonical_order():
    assert cfg(2.0, 0.0, 1.0) == cfg(0.0, 1.0, 2.0)


def test_energies():
    assert energy_U(cfg(), ROD) == 0.0
    assert energy_U(cfg(0.0, 0.5), ROD) == math.inf
    tri = PointConfiguration([(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2)])
    assert energy_U(tri, LennardJones(1.0, 1.0, 2)) == pytest.approx(0.0, abs=1e-12)
    assert energy_W(cfg(), cfg(1.0), ROD) == 0.0
    assert energy_W(cfg(0.0), cfg(0.0), ROD) == math.inf
    assert energy_W(cfg(0.0), cfg(1.0, 2.0), HardSphere(0.5)) == 0.0


def test_repeated_point_has_infinite_energy():
    assert energy_U(cfg(1.0, 1.0), LennardJones()) == math.inf


def test_family_checks():
    with pytest.raises(DomainError):
        ClusterFamily([[0.0], [0.0, 1.0]])
    fam = ClusterFamily([[0.0, 2.0], [5.0]])
    assert fam.sizes == (2, 1) and fam.l == 3 and fam.m == 2


def test_base_point():
    assert choose_base_point(cfg(3.0), ROD) == 0
    assert choose_base_point(cfg(0.0, 3.0, 7.0), ROD) == 0
    lj = LennardJones()
    eta = cfg(0.0, 1.1, 2.3)
    B = finite_size_stability(lj, 3)
    k = choose_base_point(eta, lj, B)
    x = eta.points[k]
    assert energy_W(PointConfiguration([x]), eta.without(k), lj) >= -2 * B
    with pytest.raises(InconsistencyError):
        choose_base_point(cfg(0.0, 2 ** (1 / 6)), lj, 0.0)


def test_product_kernel():
    assert product_kernel_K((0.0,), cfg(), ROD, 1.0) == 1.0
    assert product_kernel_K((0.0,), cfg(0.5), ROD, 1.0) == -1.0
    assert product_kernel_K((0.0,), cfg(2.0, 3.0), ROD, 1.0) == 0.0


def test_fan_kernel():
    nu = MayerKernel(LennardJones(), 1.0)
    x = np.array([0.0])
    a, b = nu([x - 1.05]), nu([x - 1.3])
    assert fan_kernel_K0(x, [cfg(1.05)], nu) == pytest.approx(a)
    assert fan_kernel_K0(x, [cfg(1.05, 1.3)], nu) == pytest.approx(a + b + a * b)
    assert fan_kernel_K0(x, [cfg(1.05), cfg(1.3)], nu) == pytest.approx(a * b)
    assert fan_kernel_K0(x, [], nu) == 1.0


points = st.lists(st.floats(-3, 3, allow_nan=False), min_size=0, max_size=4, unique=True)


@settings(max_examples=40, deadline=None)
@given(points, points)
def test_energy_additivity(xs, ys):
    ys = [y for y in ys if y not in xs]
    eta, gamma = cfg(*xs, d=1), cfg(*ys, d=1)
    pot = LennardJones()
    lhs = energy_U(eta + gamma, pot)
    rhs = energy_U(eta, pot) + energy_U(gamma, pot) + energy_W(eta, gamma, pot)
    assert lhs == pytest.approx(rhs, rel=1e-12) or (lhs == rhs == math.inf)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4, unique=True),
       st.lists(st.floats(-3, 3), min_size=0, max_size=4, unique=True))
def test_subset_sum_splits(eta, gamma):
    # sum over subsets of eta+gamma equals the double sum over subsets of each
    x = (0.123,)
    pot = LennardJones()
    C = {p: mayer_factor(pot, 0.7, abs(p - x[0])) for p in eta + gamma}

    def subsets(s):
        return [c for k in range(len(s) + 1) for c in combinations(s, k)]

    lhs = sum(math.prod(C[p] for p in xi) for xi in subsets(eta + gamma))
    rhs = sum(math.prod(C[p] for p in a) * math.prod(C[p] for p in b) for a in subsets(eta) for b in subsets(gamma))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=3, unique=True),
       st.lists(st.floats(-3, 3), min_size=0, max_size=3, unique=True))
def test_boltzmann_factorisation(eta, gamma):
    gamma = [g for g in gamma if g not in eta]
    pot, beta = LennardJones(), 0.4
    eta_c, gam_c = cfg(*eta, d=1), cfg(*gamma, d=1)
    x = eta_c.points[0]
    rest = eta_c.without(0)
    lhs = math.exp(-beta * energy_U(eta_c + gam_c, pot))
    # 1 + C written as the Boltzmann factor; 1 + expm1(...) underflows to 0 at short range
    K = math.prod(boltzmann(pot, beta, abs(x[0] - y[0])) for y in gam_c.points)
    rhs = math.exp(-beta * energy_W(PointConfiguration([x]), rest, pot)) * K * math.exp(-beta * energy_U(rest + gam_c, pot))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-300)
