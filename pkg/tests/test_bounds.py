import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptcf.bounds import (
    A_2, A_3, A_m1, BoundParams, convergence_margin, decay_bound_check, decay_condition_margin,
    decay_constant_A, decay_envelope, decay_lemma_check, forest_series_tail, ptcf_upper_bound,
    radius_r_beta, series_bound_check,
)
from ptcf.configurations import ClusterFamily
from ptcf.correlations import SeriesSpec
from ptcf.errors import DivergenceError, DomainError, ResourceCapError
from ptcf.potentials import HardCorePowerTail, PolyDecay
from ptcf.quadrature import VolumeCutoff

NB2 = PolyDecay(2.0)


def params(h=0.005, sizes=(1, 2), sigma=1, C=2.0):
    return BoundParams(h, 2.0, math.pi, C, 2.0, sizes, sigma)


def test_radius_and_margin():
    assert radius_r_beta(0.0, 1.0) == pytest.approx(math.exp(-1))
    assert radius_r_beta(0.5, 2.0, 2.0) == pytest.approx(math.exp(-3) / 2)
    r = radius_r_beta(0.3, 1.7)
    # margin vanishes at z = r / e
    assert convergence_margin(r / math.e, 1.0, 0.3, 1.7) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        radius_r_beta(0.0, 0.0)


def test_upper_bound_value():
    p = BoundParams(0.01, 2.0, math.pi, 1.0, 2.0, (2, 1))
    z, B = 0.01, 0.0
    want = (2 * z * math.e) ** 3 * 3 ** 0 / (1 - z * math.e**2 * 2)
    assert ptcf_upper_bound(p, z, 1.0, B) == pytest.approx(want, rel=1e-14)
    with pytest.raises(DivergenceError):
        ptcf_upper_bound(p, 1.0, 1.0, B)


def test_upper_bound_dominates_tail_terms():
    # every term h^l N_n (h nu1)^n / n! lies below the closed form
    sizes, h, nu1 = (1, 1), 0.01, 2.0
    p = BoundParams(h, nu1, 1.0, 1.0, 2.0, sizes)
    total = forest_series_tail(sizes, h, nu1, 1.0, -1)
    assert total <= ptcf_upper_bound(p, h, 1.0, 0.0)


def test_tail_shrinks_with_order():
    tails = [forest_series_tail((1, 1), 0.01, 2.0, 1.0, n) for n in range(5)]
    assert all(a > b for a, b in zip(tails, tails[1:]))
    assert forest_series_tail((1, 1), 0.5, 2.0, 1.0, 3) == math.inf


def test_A2_by_hand():
    p = params(sizes=(2, 3))
    h, nu1, nb, C = 0.005, 2.0, math.pi, 2.0
    x = h * nu1 * math.e
    D = 1 - x - h * nb * 8 * C
    want = 0.5 * 2 * 3 * C * (1 + C) ** 2 * (h / (1 - x)) ** 5 * (1 - x) / D
    assert A_2(p) == pytest.approx(want, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.tuples(*[st.integers(1, 4)] * 3), st.floats(1e-4, 0.01), st.floats(0.1, 3))
def test_general_formula_matches_three_clusters(sizes, h, C):
    p = BoundParams(h, 1.5, math.pi, C, 2.0, sizes, 1)
    assert A_m1(p) == pytest.approx(A_3(p), rel=1e-12)


def test_four_clusters_all_sigma():
    for s in (1, 2, 3, 4):
        a = decay_constant_A(params(h=0.002, sizes=(1, 1, 2, 1), sigma=s))
        b = decay_constant_A(params(h=0.003, sizes=(1, 1, 2, 1), sigma=s))
        assert 0 < a < b


def test_divergence_near_boundary():
    p = params()
    hmax = 1 / (p.nu1 * math.e + p.nubar1 * 8 * p.C)
    vals = [A_2(params(h=hmax * f)) for f in (0.9, 0.99, 0.999)]
    assert vals[0] < vals[1] < vals[2]
    with pytest.raises(DivergenceError):
        A_2(params(h=hmax * 1.01))
    assert decay_condition_margin(params(h=hmax)) == pytest.approx(0.0, abs=1e-12)


def test_params_validation_and_digest():
    with pytest.raises(DomainError):
        params(sigma=3)
    with pytest.raises(DomainError):
        params(h=0.0)
    assert params().digest() == params().digest() != params(h=0.006).digest()


def test_envelope():
    assert decay_envelope(ClusterFamily([[[0.0]], [[3.0]]]), NB2) == pytest.approx(0.1)
    # nearest points across clusters set the pair maximum
    assert decay_envelope(ClusterFamily([[[0.0], [2.0]], [[4.0]]]), NB2) == pytest.approx(0.2)
    line = ClusterFamily([[[0.0]], [[5.0]], [[10.0]]])
    assert decay_envelope(line, NB2) == pytest.approx(1 / 26**2)
    shifted = ClusterFamily([[[7.0]], [[12.0]], [[17.0]]])
    assert decay_envelope(shifted, NB2) == pytest.approx(decay_envelope(line, NB2))
    with pytest.raises(ResourceCapError):
        decay_envelope([[[float(i)]] for i in range(8)], NB2)


def test_lemma_examples():
    lhs, rhs, err = decay_lemma_check(2.0, 1, [[0.0]])
    assert lhs == pytest.approx(math.pi, rel=1e-9) and rhs == pytest.approx(math.pi)
    rng = np.random.default_rng(5)
    for alpha in (1.5, 2.0, 3.0):
        for p in (2, 3, 4):
            lhs, rhs, err = decay_lemma_check(alpha, 1, list(rng.uniform(-10, 10, p)))
            assert lhs - err <= rhs and err < 1e-9


@pytest.mark.parametrize("x", [0.1, 0.5, 0.9])
def test_series_bound(x):
    for u in range(5):
        for v in range(5):
            lhs, rhs = series_bound_check(u, v, x)
            assert lhs <= rhs * (1 + 1e-12)


TAIL = HardCorePowerTail(r1=1.0, r0=1.2, r2=1.5, phi1=1.0, phi2=0.5, s=1.0, eps0=1.0)


def test_decay_bound_one_separation():
    box = VolumeCutoff.interval(-2, 12)
    spec = SeriesSpec(TAIL, 1.0, 0.0025, box, 2)
    rep = decay_bound_check(ClusterFamily([[[0.0]], [[5.0]]]), 0.0025, 1.0, TAIL, spec, 2.0)
    assert not rep["condition_failed"]
    assert rep["ok"] and rep["condition_margin"] > 0
    assert rep["nubar1"] == pytest.approx(math.pi)


def test_decay_bound_reports_failed_condition():
    spec = SeriesSpec(TAIL, 1.0, 0.05, VolumeCutoff.interval(-2, 12), 1)
    rep = decay_bound_check(ClusterFamily([[[0.0]], [[5.0]]]), 0.05, 1.0, TAIL, spec, 2.0)
    assert rep["condition_failed"] and rep["bound"] is None and rep["ok"] is None
