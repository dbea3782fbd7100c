import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elliptic_billiards import (
    BoundaryState, CausticOrbitSpec, DomainError, Ellipse, EllipticMotion, FourierSeries, PerturbedDomain,
    Xq_map, action_angle_phi, action_angle_theta, billiard_step, caustic_invariance, caustic_rotation_number,
    confocal_caustic, elliptic_motion_mu, ellipse_caustic_orbit, expand_action_angle, integrability_residual,
    iterate, lambda_from_rotation, lazutkin_map, max_pq_gon,
)
from elliptic_billiards import billiard_dynamics as bd
from elliptic_billiards.ellipse_geometry import cartesian_to_offset

from conftest import frame_for

TWO_PI = 2 * math.pi


def state_on_caustic(frame, lam, t0=0.0):
    pts = ellipse_caustic_orbit(frame, CausticOrbitSpec(lam, t0, 1))
    domain = PerturbedDomain.ellipse(frame)
    phi = float(cartesian_to_offset(frame, *pts[0])[1])
    return domain, bd.boundary_state_from_chord(domain, phi, pts[1])


def weighted_birkhoff_rotation(domain, state, n):
    """Rotation number from smoothly weighted phi increments; converges far faster than the plain mean."""
    inc = []
    for _ in range(n):
        nxt = billiard_step(domain, state)
        inc.append((nxt.phi - state.phi) % TWO_PI)
        state = nxt
    x = (np.arange(n) + 0.5) / n
    w = np.exp(-1 / (x * (1 - x)))
    return float(np.sum(w * np.array(inc)) / np.sum(w)) / TWO_PI


# ----------------------------------------------------------------------------
# billiard map

@given(st.floats(0, TWO_PI), st.floats(0.05, math.pi - 0.05))
def test_circle_step_is_a_rotation(phi, theta):
    R = 1.7
    nxt = billiard_step(PerturbedDomain.ellipse(Ellipse(R, R)), BoundaryState(phi, theta))
    # arc length advances by 2 R theta
    assert math.cos(nxt.phi - (phi + 2 * theta)) == pytest.approx(1.0, abs=1e-12)
    assert nxt.theta == pytest.approx(theta, abs=1e-12)


def test_major_axis_two_periodic_orbit():
    domain = PerturbedDomain.ellipse(frame_for(0.5))
    s1, s2 = iterate(domain, BoundaryState(0.0, math.pi / 2), 2)[1:]
    assert s1.phi == pytest.approx(math.pi, abs=1e-14) and s1.theta == pytest.approx(math.pi / 2, abs=1e-14)
    assert math.cos(s2.phi) == pytest.approx(1.0, abs=1e-14)


def test_step_keeps_tangency():
    frame = frame_for(0.3)
    domain, state = state_on_caustic(frame, 0.2)
    caustic = confocal_caustic(frame, 0.2)
    nxt = billiard_step(domain, billiard_step(domain, state))
    after = billiard_step(domain, nxt)
    P, Q = domain.point(nxt.phi), domain.point(after.phi)
    assert abs(bd.tangency_defect(caustic, P, Q)) < 1e-10


@given(st.floats(0, TWO_PI), st.floats(0.2, math.pi - 0.2))
def test_step_is_reversible_on_perturbed_domain(phi, theta):
    mu = FourierSeries.from_modes(8, 1e-3, cos={3: 2e-3}, sin={5: -1e-3})
    domain = PerturbedDomain(frame_for(0.4), mu)
    nxt = billiard_step(domain, BoundaryState(phi, theta))
    back = billiard_step(domain, BoundaryState(nxt.phi, math.pi - nxt.theta))
    assert math.cos(back.phi - phi) == pytest.approx(1.0, abs=1e-12)
    assert back.theta == pytest.approx(math.pi - theta, abs=1e-10)


def test_perturbed_step_obeys_reflection_law():
    mu = FourierSeries.from_modes(8, cos={4: 2e-3})
    domain = PerturbedDomain(frame_for(0.3), mu)
    s0 = BoundaryState(0.4, 1.1)
    s1 = billiard_step(domain, s0)
    P, T0, _ = domain.derivatives(s0.phi)
    Q, T1, _ = domain.derivatives(s1.phi)
    d = (Q - P) / np.linalg.norm(Q - P)
    assert d @ T0 / np.linalg.norm(T0) == pytest.approx(math.cos(s0.theta), abs=1e-12)
    assert d @ T1 / np.linalg.norm(T1) == pytest.approx(math.cos(s1.theta), abs=1e-12)


# ----------------------------------------------------------------------------
# caustic orbits and rotation numbers

def test_circle_orbit_keeps_constant_chord_distance():
    pts = ellipse_caustic_orbit(Ellipse(1.0, 1.0), CausticOrbitSpec(0.6, 0.2, 50))
    d = pts[1:] - pts[:-1]
    dist = np.abs(pts[:-1, 0] * d[:, 1] - pts[:-1, 1] * d[:, 0]) / np.hypot(d[:, 0], d[:, 1])
    # the caustic of parameter lam is the concentric circle of radius sqrt(R^2 - lam^2)
    assert np.allclose(dist, 0.8, atol=1e-14)
    angles = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
    assert np.allclose(np.diff(angles), np.diff(angles)[0], atol=1e-13)


def test_orbit_tangency_and_step_consistency():
    check = caustic_invariance(Ellipse(1.0, 0.8), CausticOrbitSpec(0.3, 0.1, 500))
    assert check.max_tangency_defect < 1e-10
    assert check.max_step_error < 1e-9


def test_rotation_number_of_circle():
    assert caustic_rotation_number(Ellipse(1.0, 1.0), 0.5).value == pytest.approx(1 / 6, abs=1e-16)
    E = Ellipse(2.0, 2.0)
    for lam in (0.1, 0.9, 1.7):
        assert caustic_rotation_number(E, lam).value == pytest.approx(math.asin(lam / 2) / math.pi, abs=1e-15)
        assert lambda_from_rotation(E, math.asin(lam / 2) / math.pi) == pytest.approx(lam, rel=1e-15)


def test_rotation_number_matches_orbit_winding():
    frame = Ellipse(1.0, 0.8)
    domain, state = state_on_caustic(frame, 0.4)
    omega = weighted_birkhoff_rotation(domain, state, 10_000)
    assert omega == pytest.approx(caustic_rotation_number(frame, 0.4).value, abs=1e-6)


def test_rotation_number_approaches_half_logarithmically():
    # 1/2 - omega decays like 1/log(1/(b - lam)), nowhere near 1e-6 at b(1 - 1e-12)
    frame = frame_for(0.3)
    gaps = [0.5 - caustic_rotation_number(frame, frame.b * (1 - d)).value for d in (1e-3, 1e-6, 1e-9, 1e-12)]
    assert np.all(np.diff(gaps) < 0)
    scaled = [g * math.log(1 / d) for g, d in zip(gaps, (1e-3, 1e-6, 1e-9, 1e-12))]
    assert max(scaled) - min(scaled) < 0.015
    assert 0.01 < gaps[-1] < 0.012


@given(st.floats(0.01, 0.45), st.floats(0.0, 0.8))
def test_rotation_round_trip(omega, e):
    frame = frame_for(e)
    lam = lambda_from_rotation(frame, omega)
    assert caustic_rotation_number(frame, lam).value == pytest.approx(omega, abs=1e-12)


def test_lambda_deviation_shrinks_fourfold():
    dev = [abs(lambda_from_rotation(frame_for(e), 1 / 3) - frame_for(e).b * math.sin(math.pi / 3))
           for e in (0.1, 0.05)]
    assert dev[0] / dev[1] == pytest.approx(4.0, rel=0.05)


def test_rotation_validation():
    with pytest.raises(DomainError):
        caustic_rotation_number(frame_for(0.3), 0.99)
    # lam would have to sit closer to b than double precision resolves
    with pytest.raises(DomainError, match="double precision"):
        lambda_from_rotation(frame_for(0.5), 0.49)
    with pytest.raises(DomainError):
        lambda_from_rotation(frame_for(0.3), 0.5)


# ----------------------------------------------------------------------------
# action-angle coordinates

def test_action_angle_fixed_points():
    frame = frame_for(0.4)
    assert action_angle_phi(0.0, 0.3, frame) == pytest.approx(0.0, abs=1e-15)
    assert action_angle_phi(math.pi / 2, 0.3, frame) == pytest.approx(math.pi / 2, abs=1e-15)


def test_action_angle_matches_vertex_expansion():
    frame = frame_for(0.2)
    lam = 0.3
    kappa2 = frame.c**2 / (frame.a**2 - lam**2)
    series = expand_action_angle(6, "vertex")
    assert abs(action_angle_phi(1.0, lam, frame) - series.evaluate(1.0, math.sqrt(kappa2))) <= 10 * kappa2**7


def test_billiard_acts_as_rotation_in_action_angle():
    frame = frame_for(0.35)
    lam = 0.45
    omega = caustic_rotation_number(frame, lam).value
    domain = PerturbedDomain.ellipse(frame)
    theta0 = 0.7
    pts = ellipse_caustic_orbit(frame, CausticOrbitSpec(lam, 0.0, 1))
    phi0 = action_angle_phi(theta0, lam, frame)
    phi1 = action_angle_phi(theta0 + TWO_PI * omega, lam, frame)
    P0, P1 = domain.point(phi0), domain.point(phi1)
    assert abs(bd.tangency_defect(confocal_caustic(frame, lam), P0, P1)) < 1e-12
    assert pts.shape == (2, 2)


@given(st.floats(-10, 10), st.floats(0.05, 0.7), st.floats(0.05, 0.95))
def test_action_angle_theta_inverts_phi(theta, e, s):
    frame = frame_for(e)
    lam = s * frame.b
    assert action_angle_theta(action_angle_phi(theta, lam, frame), lam, frame) == pytest.approx(theta, abs=1e-11)


# ----------------------------------------------------------------------------
# periodic orbits

def test_circle_polygon_is_regular():
    phis = max_pq_gon(PerturbedDomain.ellipse(Ellipse(1.0, 1.0)), 2, 5, 0.3)
    assert len(phis) == 5
    assert np.allclose(np.mod(np.diff(phis), TWO_PI), 2 * TWO_PI / 5, atol=1e-12)


def test_ellipse_triangle_lies_on_caustic_orbit():
    frame = frame_for(0.3)
    phis = max_pq_gon(PerturbedDomain.ellipse(frame), 1, 3, 0.0)
    lam = lambda_from_rotation(frame, 1 / 3)
    pts = ellipse_caustic_orbit(frame, CausticOrbitSpec(lam, 0.0, 2))
    want = np.mod(cartesian_to_offset(frame, pts[:, 0], pts[:, 1])[1], TWO_PI)
    assert np.allclose(phis, want, atol=1e-8)


def test_perturbed_polygon_satisfies_reflection_law():
    domain = PerturbedDomain(frame_for(0.3), FourierSeries.from_modes(8, cos={5: 1e-6}))
    phis = max_pq_gon(domain, 1, 4, 0.3)
    assert np.max(np.abs(bd.reflection_residual(domain, phis, 1))) < 1e-9


def test_polygon_is_a_local_maximum():
    domain = PerturbedDomain(frame_for(0.3), FourierSeries.from_modes(8, cos={3: 1e-3}))
    phis = max_pq_gon(domain, 2, 7, 0.0)
    best = bd.perimeter(domain, phis, 2)
    rng = np.random.default_rng(1)
    for _ in range(20):
        bumped = phis + np.concatenate([[0.0], 1e-4 * rng.standard_normal(6)])
        assert bd.perimeter(domain, bumped, 2) < best


def test_polygon_validation():
    domain = PerturbedDomain.ellipse(frame_for(0.3))
    with pytest.raises(DomainError):
        max_pq_gon(domain, 2, 4)
    with pytest.raises(DomainError):
        integrability_residual(domain, 3, 5)


# ----------------------------------------------------------------------------
# integrability residual

def test_ellipse_residual_vanishes():
    osc, profile = integrability_residual(PerturbedDomain.ellipse(frame_for(0.3), 8), 1, 5)
    assert osc < 1e-14 and len(profile) == 256


@pytest.mark.parametrize("q", [5, 7])
def test_single_mode_residual_is_linear(q):
    frame = frame_for(0.3)
    osc = [integrability_residual(PerturbedDomain(frame, FourierSeries.from_modes(2 * q, cos={q: s})), 1, q)[0]
           for s in (1e-4, 5e-5)]
    assert osc[0] / osc[1] == pytest.approx(2.0, rel=0.01)


def test_translation_residual_is_third_order():
    # the first-order term cancels for every elliptic motion; for a translation
    # and odd q the second-order term cancels too
    frame = frame_for(0.3)
    osc = []
    for s in (1e-3, 5e-4):
        mu = elliptic_motion_mu(frame, EllipticMotion("translation", (s, 0.6 * s)), "exact", K_max=64)
        osc.append(integrability_residual(PerturbedDomain(frame, mu), 1, 5)[0])
    assert osc[0] / osc[1] == pytest.approx(8.0, rel=0.05)
    assert osc[0] < 1e-10


def test_homothety_residual_is_second_order():
    frame = frame_for(0.3)
    osc = []
    for s in (1e-3, 5e-4):
        mu = elliptic_motion_mu(frame, EllipticMotion("homothety", (s,)), "exact", K_max=64)
        osc.append(integrability_residual(PerturbedDomain(frame, mu), 1, 6)[0])
    assert osc[0] < 1e-8


# ----------------------------------------------------------------------------
# Lazutkin coordinate and X_q

def test_lazutkin_of_circle_is_scaled_arclength():
    x_of_s, C = lazutkin_map(PerturbedDomain.ellipse(Ellipse(2.0, 2.0)))
    s = np.linspace(0, 4 * math.pi, 9)
    assert np.allclose(x_of_s(s), s * TWO_PI / (4 * math.pi), atol=1e-13)
    assert C > 0


def test_lazutkin_deviation_is_order_e_squared():
    x = np.linspace(0, TWO_PI, 1000, endpoint=False)
    ratios = []
    for e in (0.2, 0.1, 0.05):
        lm = bd.LazutkinMap(PerturbedDomain.ellipse(frame_for(e)))
        ratios.append(np.max(np.abs(lm.phi_of_x(x) - x)) / e**2)
    assert max(ratios) / min(ratios) < 1.05


def test_lazutkin_grid_refinement():
    domain = PerturbedDomain.ellipse(frame_for(0.2))
    x = np.linspace(0, TWO_PI, 333)
    a = bd.LazutkinMap(domain, 4096).x_of_phi(x)
    b = bd.LazutkinMap(domain, 8192).x_of_phi(x)
    assert np.max(np.abs(a - b)) < 1e-11


def test_lazutkin_round_trip_and_monotone():
    lm = bd.LazutkinMap(PerturbedDomain(frame_for(0.4), FourierSeries.from_modes(8, cos={3: 1e-3})))
    phi = np.linspace(0, TWO_PI, 101)
    x = lm.x_of_phi(phi)
    assert np.all(np.diff(x) > 0)
    assert np.allclose(lm.phi_of_x(x), phi, atol=1e-13)
    assert lm.x_of_phi(TWO_PI) == pytest.approx(TWO_PI, abs=1e-13)


def test_Xq_map_properties():
    assert Xq_map(Ellipse(1.0, 1.0), 9).deviation() < 1e-14
    frame = frame_for(0.1)
    X16, X32 = Xq_map(frame, 16), Xq_map(frame, 32)
    assert X16.deviation() / X32.deviation() == pytest.approx(4.0, rel=0.05)
    for q in (3, 7, 40):
        assert abs(Xq_map(frame, q)(0.0)) < 1e-14
    t = np.linspace(0, TWO_PI, 17)
    assert np.allclose(X16.inverse(X16(t)), t, atol=1e-12)


def test_Xq_rejects_small_q():
    with pytest.raises(DomainError):
        Xq_map(frame_for(0.1), 2)
