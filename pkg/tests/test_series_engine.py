import math
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from elliptic_billiards import (
    DomainError, FourierSeries, RationalTrigPoly, compose_mu_expansion, expand_action_angle, fourier_condition_row,
    jacobi_am_sn_cn, xi, xi_diagonal, xi_polynomials,
)
from elliptic_billiards.acceptance import REFERENCE_PHI, REFERENCE_XI
from elliptic_billiards.series_engine import MAX_ORDER, trig_poly_from_terms

from conftest import frame_for


def harmonic_taylor_coefficient(k, n, j, points=64, steps=10, h="1e-4", dps=50):
    """[m^j] of the cos(n t) coefficient of cos(k am(2 K t / pi, m)), by interpolation in m."""
    with mpmath.workdps(dps):
        h = mpmath.mpf(h)
        ms = [i * h for i in range(steps + 1)]
        vals = []
        for m in ms:
            K = mpmath.ellipk(m)
            s = 0
            for i in range(points):
                t = 2 * mpmath.pi * (i + mpmath.mpf(1) / 3) / points
                u = 2 * K * t / mpmath.pi
                w = int(mpmath.nint(u / (2 * K)))
                v = u - 2 * w * K
                phi = mpmath.atan2(mpmath.ellipfun("sn", v, m=m), mpmath.ellipfun("cn", v, m=m)) + w * mpmath.pi
                s += mpmath.cos(k * phi) * mpmath.cos(n * t)
            vals.append(2 * s / points)
        V = mpmath.matrix([[m**p for p in range(steps + 1)] for m in ms])
        return float(mpmath.lu_solve(V, mpmath.matrix(vals))[j])


def _padded(c, n):
    return [F(v) for v in c] + [F(0)] * (n - len(c))


# ----------------------------------------------------------------------------
# phi_j

def test_phi_terms_are_pure_sines_with_known_coefficients():
    expansion = expand_action_angle(6)
    for j, want in REFERENCE_PHI.items():
        assert not expansion[j].cos
        assert expansion[j].sin == want


def test_first_term_by_hand():
    assert expand_action_angle(1)[1] == RationalTrigPoly(sin={2: F(1, 8)})


def test_series_tracks_amplitude_to_fourteenth_power():
    kappa, theta = 0.15, 1.0
    m = kappa * kappa
    K = float(mpmath.ellipk(m))
    am = jacobi_am_sn_cn(2 * K * theta / math.pi, kappa)[0]
    approx = float(expand_action_angle(6).evaluate(theta, kappa))
    assert abs(am - approx) <= 10 * kappa**14


def test_truncation_error_shrinks_with_order():
    kappa = 0.3
    theta = np.linspace(0, 2 * np.pi, 50)
    K = float(mpmath.ellipk(kappa * kappa))
    am = np.array([jacobi_am_sn_cn(2 * K * t / math.pi, kappa)[0] for t in theta])
    errs = [np.max(np.abs(am - expand_action_angle(N).evaluate(theta, kappa))) for N in (2, 4, 6, 8)]
    assert all(b < a / 10 for a, b in zip(errs, errs[1:]))


def test_vertex_convention_flips_odd_half_harmonics():
    am, vx = expand_action_angle(5), expand_action_angle(5, "vertex")
    for j in range(1, 6):
        for n, v in am[j].sin.items():
            assert vx[j].sin[n] == (v if (n // 2) % 2 == 0 else -v)


def test_vertex_convention_against_amplitude():
    kappa = 0.25
    K = float(mpmath.ellipk(kappa * kappa))
    series = expand_action_angle(8, "vertex")
    for theta in (0.3, 1.2, 2.9, 4.4):
        want = math.pi / 2 + jacobi_am_sn_cn(2 * K * theta / math.pi - K, kappa)[0]
        assert float(series.evaluate(theta, kappa)) == pytest.approx(want, abs=1e-9)


def test_bad_order_and_convention():
    with pytest.raises(DomainError):
        expand_action_angle(0)
    with pytest.raises(DomainError):
        expand_action_angle(MAX_ORDER + 1)
    with pytest.raises(DomainError):
        expand_action_angle(3, "polar")


# ----------------------------------------------------------------------------
# xi_{j,l}

def test_xi_table_matches_known_values_except_top_cubic():
    table = {(p.j, p.l): p for p in xi_polynomials(6)}
    for key, want in REFERENCE_XI.items():
        got = list(table[key].coeffs)
        n = max(len(got), len(want))
        if key == (6, 6):
            got[3], want = F(0), list(want[:3]) + [F(0)] + list(want[4:])
        assert _padded(got, n) == _padded(want, n), key


def test_top_diagonal_cubic_coefficient():
    # confirmed independently by the numerical oracle below
    assert xi(6, 6).coeffs[3] == F(15, 805306368)


@pytest.mark.parametrize("j,l,k", [(6, 6, 1), (6, 6, 2), (6, 6, 3), (3, -1, 9), (4, 2, 10), (2, 0, 5), (5, -3, 13)])
def test_xi_against_numerical_taylor_oracle(j, l, k):
    want = harmonic_taylor_coefficient(k, k + 2 * l, j)
    assert float(xi(j, l)(k)) == pytest.approx(want, rel=1e-9, abs=1e-20)


def test_alternative_top_cubic_is_rejected_by_oracle():
    alternative = list(REFERENCE_XI[(6, 6)])
    wrong = sum(float(c) * 3**i for i, c in enumerate(alternative))
    want = harmonic_taylor_coefficient(3, 15, 6)
    assert abs(wrong - want) > 1e-4 * abs(want)


@pytest.mark.parametrize("convention", ["am", "vertex"])
def test_diagonal_route_agrees_with_full_table(convention):
    for j in range(1, 8):
        assert xi_diagonal(j, convention).coeffs == xi(j, j, convention).coeffs


def test_diagonal_route_beyond_expansion_cap():
    p = xi_diagonal(MAX_ORDER + 3)
    assert p.degree == MAX_ORDER + 3
    # leading coefficient is (1/16)^j / j!, from exp(k m sin 2t / 8) at top harmonic
    assert p.coeffs[-1] == F(1, 16 ** (MAX_ORDER + 3) * math.factorial(MAX_ORDER + 3))


def test_zero_shift_polynomials_have_even_powers_only():
    for j in range(1, 7):
        assert xi(j, 0).only_even_powers()
        assert xi(j, 0)(0) == 0


@given(st.integers(1, 6), st.integers(0, 6), st.integers(1, 30))
def test_xi_symmetry_under_negated_mode(j, l, k):
    # cos(-k phi) = cos(k phi): xi_{j,l}(k) must equal xi_{j,-l}(-k)
    if l > j:
        return
    assert xi(j, l)(k) == xi(j, -l)(-k)


def test_xi_validation():
    with pytest.raises(DomainError):
        xi(2, 3)
    with pytest.raises(DomainError):
        xi(0, 0)
    with pytest.raises(DomainError):
        xi_diagonal(0)


# ----------------------------------------------------------------------------
# composition with a boundary perturbation

@pytest.mark.parametrize("k", [3, 4, 7])
def test_first_order_composition_of_cosine(k):
    (P1,) = compose_mu_expansion(RationalTrigPoly(cos={k: 1}), 1)
    assert P1 == RationalTrigPoly(cos={k + 2: F(k, 16), k - 2: F(-k, 16)})


def test_constant_perturbation_is_unchanged():
    assert all(p.is_zero() for p in compose_mu_expansion(RationalTrigPoly.constant(F(3, 7)), 4))


def test_composition_of_sine_uses_same_xi():
    P = compose_mu_expansion(RationalTrigPoly(sin={3: 1}), 2)
    want = RationalTrigPoly(sin={3 + 2 * l: xi(2, l)(3) for l in range(-2, 3)})
    assert P[1] == want


def test_composition_accepts_fourier_series():
    mu = FourierSeries.from_modes(8, cos={5: 0.5})
    P = compose_mu_expansion(mu, 2)
    assert P[0] == RationalTrigPoly(cos={7: F(5, 32), 3: F(-5, 32)})


def test_composition_against_direct_evaluation():
    kappa = 0.2
    K = float(mpmath.ellipk(kappa * kappa))
    mu = RationalTrigPoly(cos={2: F(1, 3), 5: 1}, sin={4: F(-1, 2)})
    P = compose_mu_expansion(mu, 6)
    for theta in (0.4, 2.2, 5.0):
        phi = jacobi_am_sn_cn(2 * K * theta / math.pi, kappa)[0]
        approx = float(mu(theta)) + sum(float(p(theta)) * kappa ** (2 * j + 2) for j, p in enumerate(P))
        assert approx == pytest.approx(float(mu(phi)), abs=5e-8)


# ----------------------------------------------------------------------------
# exact trigonometric algebra

coeff = st.fractions(min_value=-5, max_value=5, max_denominator=12)
trig = st.builds(
    lambda c, s: RationalTrigPoly(c, s),
    st.dictionaries(st.integers(0, 6), coeff, max_size=4),
    st.dictionaries(st.integers(1, 6), coeff, max_size=4),
)


@given(trig, trig)
def test_product_commutes(p, q):
    assert p * q == q * p


@given(trig, trig, trig)
def test_product_distributes(p, q, r):
    assert p * (q + r) == p * q + p * r


@given(trig, trig)
def test_leibniz_rule(p, q):
    assert (p * q).derivative() == p.derivative() * q + p * q.derivative()


@given(trig, trig, st.floats(0, 2 * math.pi))
def test_product_evaluates_pointwise(p, q, t):
    assert float((p * q)(t)) == pytest.approx(float(p(t)) * float(q(t)), abs=1e-10)


@given(trig)
def test_subtraction_gives_zero(p):
    assert (p - p).is_zero() and not (p - p)


def test_terms_round_trip():
    p = RationalTrigPoly({0: F(1, 2), 3: -2}, {1: F(5, 9)})
    assert trig_poly_from_terms(p.terms()) == p
    with pytest.raises(DomainError):
        trig_poly_from_terms([(1, "tan", F(1))])


# ----------------------------------------------------------------------------
# Fourier-coefficient condition rows

def test_condition_row_five_first_order():
    row = fourier_condition_row(1, 5, 1, frame_for(0.3))
    assert row.modes == (3, 5, 7)
    assert row.symbolic == {3: [(1, F(3, 16))], 5: [(0, F(1))], 7: [(1, F(-7, 16))]}
    assert row.leading_weight == pytest.approx(0.09 / math.cos(math.pi / 5) ** 2, rel=1e-15)
    assert row.exact[5] == 1.0
    assert row.exact[7] == pytest.approx(-7 / 16 * row.weight, rel=1e-15)


def test_condition_row_seven_second_order():
    row = fourier_condition_row(1, 7, 2, frame_for(0.2))
    assert row.modes == (3, 5, 7, 9, 11)
    assert dict(row.symbolic[3])[2] == F(12, 512)
    assert dict(row.symbolic[5])[1] == F(5, 16)
    assert row.remainder_scale == pytest.approx(row.weight**3, rel=1e-15)


def test_exact_weight_tends_to_leading_weight():
    gaps = []
    for e in (0.2, 0.1, 0.05):
        row = fourier_condition_row(1, 5, 1, frame_for(e))
        gaps.append(abs(row.weight - row.leading_weight) / row.leading_weight)
    assert gaps[0] > gaps[1] > gaps[2]


def test_zeroth_order_row_is_single_mode():
    row = fourier_condition_row(2, 7, 0, frame_for(0.3))
    assert row.modes == (7,)
    assert row.symbolic == {7: [(0, F(1))]}


@pytest.mark.parametrize("p,q,N", [(2, 4, 1), (1, 2, 0), (3, 5, 1), (1, 5, 3)])
def test_condition_row_validation(p, q, N):
    with pytest.raises(DomainError):
        fourier_condition_row(p, q, N, frame_for(0.3))
