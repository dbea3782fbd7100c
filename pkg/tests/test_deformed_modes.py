import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from elliptic_billiards import (
    DomainError, Ellipse, EllipticMotion, FourierSeries, PerturbedDomain, annihilation_test, basis_defect,
    capital_C_mode, deformed_mode, elliptic_motion_mu, lambda_from_rotation, sobolev_inner,
)
from elliptic_billiards.deformed_modes import (
    DeformedBasis, antiderivative, basis_mode, derivative, grid_values, sobolev_norm_spectral, sup_norm,
    transported_coefficients, trig_mode,
)

from conftest import frame_for


def l2(u, v):
    return 2 * math.pi * u.mean * v.mean + math.pi * float(np.sum(u.cos * v.cos + u.sin * v.sin))


class EllipseOracle:
    """Lazutkin coordinate by quadrature and the caustic amplitude through mpmath."""

    def __init__(self, frame, q):
        self.a, self.b = frame.a, frame.b
        self.total = self._integral(2 * math.pi)
        lam = lambda_from_rotation(frame, 1 / q)
        self.m = frame.c**2 / (frame.a**2 - lam**2)
        self.K = float(mpmath.ellipk(self.m))

    def _integral(self, p):
        f = lambda t: 1 / math.sqrt((self.a * math.sin(t)) ** 2 + (self.b * math.cos(t)) ** 2)
        return quad(f, 0, p, epsabs=1e-15, epsrel=1e-13, limit=200)[0]

    def x(self, phi):
        turns = math.floor(phi / (2 * math.pi))
        return 2 * math.pi * (turns + self._integral(phi - 2 * math.pi * turns) / self.total)

    def phi(self, theta):
        u = 2 * self.K * theta / math.pi - self.K
        w = round(u / (2 * self.K))
        v = u - 2 * w * self.K
        sn, cn = mpmath.ellipfun("sn", v, m=self.m), mpmath.ellipfun("cn", v, m=self.m)
        return math.pi / 2 + float(mpmath.atan2(sn, cn)) + w * math.pi


# ----------------------------------------------------------------------------
# basis and pairing

def test_trig_modes_and_constant_normalisation():
    V0 = basis_mode(0, 2, 16)
    assert sobolev_inner(V0, V0, 2) == pytest.approx(1.0, rel=1e-15)
    one = trig_mode(0, 16)
    assert sobolev_inner(one, one, 3) == pytest.approx((2 * math.pi) ** 2, rel=1e-15)
    with pytest.raises(DomainError):
        trig_mode(17, 16)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_sobolev_basis_is_orthonormal(r):
    idx = list(range(-12, 13))
    V = [basis_mode(k, r, 16) for k in idx]
    gram = np.array([[sobolev_inner(u, v, r) for v in V] for u in V])
    assert np.max(np.abs(gram - np.eye(len(idx)))) < 1e-13


def test_pairing_against_quadrature():
    u = FourierSeries.from_modes(8, 0.3, cos={1: 1.0, 5: 1.0})
    v = FourierSeries.from_modes(8, -0.2, cos={5: 0.5}, sin={2: 1.0})
    r = 2
    du, dv = derivative(u, r), derivative(v, r)
    prod = quad(lambda t: float(du(np.array([t]))[0] * dv(np.array([t]))[0]), 0, 2 * math.pi, limit=200)[0]
    want = (2 * math.pi * 0.3) * (2 * math.pi * -0.2) + prod
    assert sobolev_inner(u, v, r) == pytest.approx(want, rel=1e-12)


def test_spectral_norm_of_two_modes():
    u = FourierSeries.from_modes(8, cos={1: 1.0, 5: 1.0})
    assert sobolev_norm_spectral(u, 2) == pytest.approx(math.sqrt(math.pi * (1 + 5**4)), rel=1e-15)


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6), st.integers(1, 4))
def test_derivative_undoes_antiderivative(c, r):
    u = FourierSeries.from_modes(6, 0.0, cos={1: c[0], 3: c[1], 6: c[2]}, sin={2: c[3], 4: c[4], 5: c[5]})
    assert (derivative(antiderivative(u, r), r) - u).max_abs_coefficient() < 1e-14


def test_pairing_resolution_flag():
    smooth = FourierSeries.from_modes(64, cos={3: 1.0})
    rough = FourierSeries(0.0, np.ones(64), np.zeros(64))
    assert sobolev_inner(smooth, smooth, 1, with_status=True).resolved
    assert not sobolev_inner(rough, smooth, 1, with_status=True).resolved


def test_bad_order_rejected():
    with pytest.raises(DomainError):
        basis_mode(1, 0)
    with pytest.raises(DomainError):
        sobolev_inner(trig_mode(1, 4), trig_mode(1, 4), 0)


# ----------------------------------------------------------------------------
# deformed modes

def test_circle_modes_are_trigonometric():
    B = DeformedBasis(Ellipse(1.0, 1.0), 2, 1024)
    for k in (5, -7, 12):
        assert (B.c(k) - trig_mode(k, B.K_max)).max_abs_coefficient() < 1e-12


def test_low_modes_are_undeformed():
    E = frame_for(0.3)
    for k in (1, -2, 3):
        assert (deformed_mode(E, k, 3) - trig_mode(k, 2047)).max_abs_coefficient() == 0.0
        assert (capital_C_mode(E, k, 2, 3) - basis_mode(k, 2)).max_abs_coefficient() == 0.0


@pytest.mark.parametrize("k", [7, -7, 9])
def test_transported_mode_against_oracle(k):
    E = frame_for(0.2)
    oracle = EllipseOracle(E, abs(k))
    f = lambda x: math.cos(3 * x) + 0.5 * math.sin(8 * x) + 0.2 * math.cos(7 * x) - 0.3 * math.sin(9 * x)
    n = 256
    theta = 2 * math.pi * np.arange(n) / n
    wave = np.cos if k > 0 else np.sin
    vals = np.array([f(oracle.x(oracle.phi(t))) for t in theta])
    want = float(np.sum(vals * wave(abs(k) * theta))) * 2 * math.pi / n / math.sqrt(math.pi)
    B = DeformedBasis(E, abs(k) - 1)
    fs = FourierSeries.from_samples(np.array([f(x) for x in B.x]), B.K_max)
    assert l2(fs, B.c(k)) == pytest.approx(want, abs=1e-12)


def test_deviation_follows_inverse_k_envelope():
    B = DeformedBasis(frame_for(0.1), 3)
    env = [k * sup_norm(B.c(k) - trig_mode(k, B.K_max)) for k in (8, 16, 32, 64)]
    assert max(env) <= 1.25 * min(env)


def test_C_mode_has_c_mode_as_derivative():
    E = frame_for(0.2)
    C = capital_C_mode(E, 9, 2, 3)
    assert (derivative(C, 2) - deformed_mode(E, 9, 3)).max_abs_coefficient() < 1e-13
    assert C.mean == 0.0


def test_mode_validation():
    E = frame_for(0.2)
    with pytest.raises(DomainError):
        deformed_mode(E, 0, 3)
    with pytest.raises(DomainError):
        capital_C_mode(E, 0, 2, 3)
    with pytest.raises(DomainError):
        DeformedBasis(E, 3, 256).c(40)
    with pytest.raises(DomainError):
        grid_values(trig_mode(3, 16), 32)


# ----------------------------------------------------------------------------
# basis defect

def test_defect_vanishes_on_circle():
    d = basis_defect(Ellipse(1.0, 1.0), 3, 2, 16, 1024)
    assert d.defect < 1e-12 and d.threshold_ok


def test_defect_grows_with_eccentricity():
    small = basis_defect(frame_for(0.05), 3, 2, 16)
    large = basis_defect(frame_for(0.1), 3, 2, 16)
    assert large.defect > small.defect > 0


def test_partial_sum_is_below_envelope_bound():
    d = basis_defect(frame_for(0.1), 3, 2, 24)
    assert d.partial**2 < d.C_r**2 * math.pi**2 / 3
    assert d.defect**2 == pytest.approx(d.partial**2 + d.tail**2, rel=1e-12)


def test_defect_needs_enough_modes():
    with pytest.raises(DomainError):
        basis_defect(frame_for(0.1), 4, 2, 8)


# ----------------------------------------------------------------------------
# annihilation

def test_unperturbed_domain_gives_zero():
    E = frame_for(0.3)
    assert annihilation_test(PerturbedDomain.ellipse(E, 32), 7, 2) == (0.0, 0.0)


def test_pairing_is_linear_in_a_high_mode():
    E = frame_for(0.3)
    vals = [annihilation_test(PerturbedDomain(E, FourierSeries.from_modes(32, cos={7: s})), 7, 2)[0]
            for s in (1e-4, 5e-5)]
    assert vals[0] / vals[1] == pytest.approx(2.0, rel=1e-9)
    assert abs(vals[0]) > 1e-3


def test_transported_coefficient_of_translation_is_third_order():
    E = frame_for(0.3)
    vals = []
    for s in (1e-3, 5e-4):
        mu = elliptic_motion_mu(E, EllipticMotion("translation", (s, 0.6 * s)), "exact", 64)
        vals.append(abs(transported_coefficients(PerturbedDomain(E, mu), 5)[0]))
    assert vals[0] / vals[1] == pytest.approx(8.0, rel=0.05)


def test_moved_ellipse_pairing_is_small():
    E = frame_for(0.3)
    for motion in (EllipticMotion("homothety", (1e-3,)), EllipticMotion("translation", (1e-3, 6e-4))):
        mu = elliptic_motion_mu(E, motion, "exact", 64)
        mode = PerturbedDomain(E, FourierSeries.from_modes(64, cos={7: 1e-3}))
        moved = abs(annihilation_test(PerturbedDomain(E, mu), 7, 2)[0])
        assert moved < 1e-6 * abs(annihilation_test(mode, 7, 2)[0])


def test_annihilation_validation():
    E = frame_for(0.3)
    with pytest.raises(DomainError):
        annihilation_test(PerturbedDomain.ellipse(E), 2, 2)
    with pytest.raises(DomainError):
        annihilation_test(PerturbedDomain.ellipse(E), 5, 2, q0=6)
