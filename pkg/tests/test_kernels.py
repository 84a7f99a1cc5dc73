import math

import numpy as np
import pytest

from ptcf.combinatorics import n1
from ptcf.configurations import ClusterFamily, PointConfiguration
from ptcf.correlations import ursell
from ptcf.errors import ResourceCapError
from ptcf.forests import forest_edge_sets, gamma_degrees_at_least_two
from ptcf.kernels import (
    batch_Q, batch_T, chain_kernel, compare_T_Q, integrated_Q, kernel_Q, kernel_T,
)
from ptcf.potentials import (
    FunctionKernel, HardSphere, LennardJones, MayerKernel, finite_size_stability,
)
from ptcf.quadrature import QuadratureSpec, VolumeCutoff, integrate_box

ROD = HardSphere(1.0)
EMPTY = PointConfiguration([], 1)


def test_initial_conditions():
    assert kernel_T([[]], [], ROD, 1.0, 0.3) == 1.0
    assert kernel_T([[0.0]], [], ROD, 1.0, 0.3) == pytest.approx(0.3)
    assert kernel_T([[0.0], [0.5]], [], ROD, 1.0, 0.3) == pytest.approx(-0.09)
    assert kernel_T([[0.0], []], [], ROD, 1.0, 0.3) == 0.0
    assert kernel_T([[]], [[1.0]], ROD, 1.0, 0.3) == 0.0


def test_Q_simple():
    nu = MayerKernel(LennardJones(), 1.0)
    assert kernel_Q([[0.0, 1.3, 2.2]], [], 0.2, nu) == pytest.approx(0.2**3)
    assert kernel_Q([[0.0], [1.1]], [], 0.2, nu) == pytest.approx(0.04 * float(nu([1.1])))


def test_T_below_Q():
    rng = np.random.default_rng(11)
    lj = LennardJones()
    B = finite_size_stability(lj, 6)
    for _ in range(15):
        sizes = rng.integers(1, 3, size=rng.integers(1, 4))
        pts = rng.permutation(np.linspace(-2, 2, 40))[: sizes.sum() + 2]
        clusters, k = [], 0
        for s in sizes:
            clusters.append(list(pts[k:k + s]))
            k += s
        t, q, ok = compare_T_Q(clusters, list(pts[k:k + 2]), lj, 1.0, 0.05, B)
        assert ok


def test_Q_independent_of_base_rule():
    nu = FunctionKernel(lambda r: 1 / (1 + r**2))
    fam = ClusterFamily([[0.0, 0.9], [2.0], [-1.5, 3.0]])
    g = PointConfiguration([[0.4], [1.7]])
    a = kernel_Q(fam, g, 0.3, nu, base="canonical")
    b = kernel_Q(fam, g, 0.3, nu, base="label")
    assert a == pytest.approx(b, rel=1e-13)


def test_batch_matches_pointwise():
    fam = ClusterFamily([[0.0], [0.6, 1.9]])
    y = np.array([[[1.2], [-0.8]], [[2.5], [0.3]]])
    bt = batch_T(fam, y, ROD, 1.0)
    for row, val in zip(y, bt):
        assert kernel_T(fam, row.reshape(-1, 1), ROD, 1.0, 1.0) == pytest.approx(val, abs=1e-14)
    nu = MayerKernel(ROD, 1.0)
    bq = batch_Q(fam, y, 0.2, nu)
    for row, val in zip(y, bq):
        assert kernel_Q(fam, row.reshape(-1, 1), 0.2, nu) == pytest.approx(val, rel=1e-13)


def test_singletons_reproduce_tree_expansion():
    # with all clusters singletons and no external points, T_m / z^m is the Ursell function
    lj, beta = LennardJones(), 0.8
    for pts in ([0.0, 1.2], [0.0, 1.2, 2.1], [0.0, 0.9, 1.8]):
        t = kernel_T([[p] for p in pts], [], lj, beta, 1.0, B=finite_size_stability(lj, 3))
        assert t == pytest.approx(ursell(PointConfiguration([[p] for p in pts]), lj, beta), rel=1e-12)


def test_integrated_Q_small():
    box = VolumeCutoff.interval(-6, 6)
    nu = MayerKernel(ROD, 1.0)
    h = 0.1
    v, _ = integrated_Q([[0.0]], 0, h, nu, box)
    assert v == pytest.approx(h)
    v, _ = integrated_Q([[0.0]], 1, h, nu, box)
    assert v == pytest.approx(h**2 * 2.0, rel=1e-13)
    # two clusters at distance 0.5: 3 forests, convolution overlap 1.5
    v, _ = integrated_Q([[0.0], [0.5]], 1, h, nu, box)
    assert v == pytest.approx(h**3 * (1.5 + 2 * 2.0), rel=1e-13)
    with pytest.raises(ResourceCapError):
        integrated_Q([[0.0]], 5, h, nu, box)


def restricted_integral(sizes, fixed, k, nu, box, spec):
    """(1/k!) int of the forest sum restricted to external degree >= 2, without h."""
    forests = [e for e in forest_edge_sets(sizes, k) if gamma_degrees_at_least_two(e, sizes, k)]
    if not forests:
        return 0.0
    fixed = np.asarray(fixed, dtype=float).reshape(-1, 1)

    def f(y):
        K = y.shape[0]
        pos = [np.full(K, p[0]) for p in fixed] + [y[:, j, 0] for j in range(k)]
        out = np.zeros(K)
        for edges in forests:
            term = np.ones(K)
            for a, b in edges:
                term = term * nu.radial(np.abs(pos[a] - pos[b]))
            out += term
        return out

    v, _ = integrate_box(f, k, box, anchors=fixed.ravel(), radii=nu.radii, spec=spec)
    return float(v) / math.factorial(k)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_external_degree_decomposition(n):
    # hard rods have compact support, so a box holding every reachable point is exact
    box = VolumeCutoff.interval(-4, 4.5)
    spec = QuadratureSpec()
    nu = MayerKernel(ROD, 1.0)
    h, nu1 = 0.2, 2.0
    fixed = [0.0, 0.5]
    sizes, l = (1, 1), 2
    lhs, _ = integrated_Q([[0.0], [0.5]], n, h, nu, box, spec)
    rhs = h**l * sum(
        math.comb(n, k) * math.factorial(k) * n1(n - k, l + k) * (h * nu1) ** (n - k)
        * h**k * restricted_integral(sizes, fixed, k, nu, box, spec)
        for k in range(n + 1)
    )
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_chain_kernel():
    nu = MayerKernel(ROD, 1.0)
    assert chain_kernel([0.0], [[0.7]], 0, 0.3, nu) == 1.0
    assert chain_kernel([0.0], [[0.5]], 1, 0.3, nu) == pytest.approx(0.3 * 1.5, rel=1e-9)
    # k = 2: h^2 * int int nu(x-y1) nu(y1-y2) nu(y2-xj)
    fine = np.linspace(-1, 1, 4001)
    w = np.gradient(fine)
    ov = np.array([max(0.0, 2.0 - abs(y1 - 0.5)) for y1 in fine])
    assert chain_kernel([0.0], [[0.5]], 2, 0.3, nu) == pytest.approx(0.09 * (w @ ov), rel=1e-3)
    with pytest.raises(ResourceCapError):
        chain_kernel([0.0], [[0.5]], 3, 0.3, nu)
