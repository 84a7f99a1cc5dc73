import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptcf.errors import DomainError, RegularityError
from ptcf.potentials import (
    Custom, HardCorePowerTail, HardSphere, LennardJones, MayerKernel, PolyDecay,
    compute_nu0, compute_nu1, compute_polydecay_constant, compute_summary, evaluate,
    finite_size_stability, hard_core_stability_1d, mayer_factor, polydecay_integral,
)

# mpmath quad at 30 digits, split at the kinks
LJ_NU1_BETA_HALF = 1.93110846990226371853


def test_lj_values():
    lj = LennardJones(1.0, 1.0)
    assert evaluate(lj, 1.0) == 0.0
    assert evaluate(lj, 2.0) == pytest.approx(-63 / 4096, rel=1e-15)
    assert mayer_factor(lj, 1.0, 1.0) == 0.0


@pytest.mark.parametrize("pot", [LennardJones(), HardSphere(1.0), HardCorePowerTail()])
def test_zero_distance_is_infinite(pot):
    assert evaluate(pot, 0.0) == math.inf
    assert mayer_factor(pot, 1.0, 0.0) == -1.0


def test_negative_distance_rejected():
    with pytest.raises(DomainError):
        evaluate(HardSphere(), -1.0)


def test_mayer_decays():
    assert abs(mayer_factor(LennardJones(), 1.0, 1e3)) < 1e-15


def test_hard_rod_summary():
    for beta in (0.3, 1.0, 7.0):
        s = compute_summary(HardSphere(0.75), beta)
        assert s.nu1 == pytest.approx(1.5, rel=1e-10)
        assert s.nu0 == 1.0
        assert s.stability_B == 0.0


def test_lj_nu1_against_oracle():
    assert compute_nu1(LennardJones(1.0, 1.0, 1), 0.5) == pytest.approx(LJ_NU1_BETA_HALF, rel=1e-6)


def test_lj_needs_explicit_B():
    with pytest.raises(DomainError):
        compute_summary(LennardJones(), 1.0)
    s = compute_summary(LennardJones(), 1.0, B=finite_size_stability(LennardJones(), 5))
    assert s.stability_B == pytest.approx(2 * 0.25)


def test_lj_nu0_is_well_boltzmann():
    lj = LennardJones()
    # sup |e^{-beta phi} - 1| is attained either in the core (1) or at the well
    assert compute_nu0(lj, 1.0) == pytest.approx(max(1.0, math.exp(lj.well_depth) - 1), rel=1e-8)


def test_non_integrable_tail():
    slow = Custom(r=(1.0, 2.0, 1e9), values=(0.0, -1.0, -1e-9), hard_core=0.5)
    with pytest.raises(RegularityError):
        compute_nu1(slow, 1.0)


def test_power_tail_shape():
    pot = HardCorePowerTail(r1=1.0, r0=1.2, r2=1.5, phi1=2.0, phi2=0.5, s=1.0, eps0=1.0)
    assert evaluate(pot, 0.99) == math.inf
    assert evaluate(pot, 1.2) == pytest.approx(0.0, abs=1e-15)
    r = np.geomspace(1.5, 1e4, 200)
    assert np.all(pot.phi_minus(r) <= 0.5 * r**-2 * (1 + 1e-12))
    r = np.linspace(1.0, 1.19, 50)
    assert np.all(pot(r) >= 0)


def test_decomposition_into_parts():
    pot = HardCorePowerTail()
    r = np.linspace(1.0, 5.0, 101)
    np.testing.assert_allclose(pot.phi_plus(r) - pot.phi_minus(r), pot(r), atol=1e-15)


def test_stability_1d_tail_potential():
    pot = HardCorePowerTail(phi2=1.0, eps0=1.0)
    B = hard_core_stability_1d(pot, pot.r1)
    # direct check on equally spaced chains, the worst packing on a line
    for n in (2, 5, 20):
        x = np.arange(n) * pot.r1
        U = sum(pot(abs(a - b)) for i, a in enumerate(x) for b in x[i + 1:])
        assert U >= -B * n - 1e-12


def test_polydecay():
    assert polydecay_integral(2.0, 1)[0] == pytest.approx(math.pi)
    pot = HardCorePowerTail(phi2=0.5, eps0=1.0)
    C = compute_polydecay_constant(pot, 1.0, 2.0)
    nu, nb = MayerKernel(pot, 1.0), PolyDecay(2.0)
    r = np.geomspace(1e-3, 1e3, 3000)
    assert np.all(nu.radial(r) <= C * nb.radial(r))
    with pytest.raises(RegularityError):
        polydecay_integral(1.0, 1)


def test_custom_table(tmp_path):
    path = tmp_path / "phi.csv"
    path.write_text("r,phi\n1.0,2.0\n2.0,-1.0\n3.0,0.0\n")
    pot = Custom.from_csv(path, hard_core=0.8)
    assert evaluate(pot, 0.5) == math.inf
    assert evaluate(pot, 1.5) == pytest.approx(0.5)
    assert evaluate(pot, 4.0) == 0.0
    with pytest.raises(DomainError):
        Custom(r=(1.0, 1.0), values=(0.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.0, 20.0))
def test_mayer_at_least_minus_one(beta, r):
    for pot in (LennardJones(), HardCorePowerTail()):
        assert mayer_factor(pot, beta, r) >= -1.0


def test_repulsive_nu1_monotone_in_beta():
    pot = HardCorePowerTail(phi2=0.0)
    vals = [compute_nu1(pot, b) for b in (0.2, 0.5, 1.0, 2.0, 5.0)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
