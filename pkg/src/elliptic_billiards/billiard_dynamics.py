"""Billiard map, elliptic caustics, rotation numbers and boundary parametrisations.

Boundary points are labelled by the elliptic angle ``phi`` of the domain's
frame.  For the ellipse itself the orbit tangent to the confocal caustic of
parameter ``lam`` is

    (x, y) = (a cd(t), b k' sd(t)),   k = k_lam,

which in elliptic angle reads ``phi = pi/2 + am(t - K)``.  Consecutive impacts
are ``delta = 2 F(asin(lam / b); k)`` apart in ``t``, so ``theta = pi t / (2 K)``
is the angle in which the billiard acts as a rotation by ``2 pi omega``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .ellipse_geometry import (
    Ellipse, FourierSeries, PerturbedDomain, caustic_modulus, cartesian_to_offset, confocal_caustic,
)
from .errors import ConvexityError, DomainError, NumericError, SearchError
from .special_functions import (
    complete_K, incomplete_F, incomplete_F_array, jacobi_am_array, jacobi_sn_cn_dn_array,
)

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class BoundaryState:
    """Impact at elliptic angle ``phi`` leaving with angle ``theta`` to the positive tangent."""

    phi: float
    theta: float

    def __post_init__(self):
        if not (0 < self.theta < math.pi):
            raise DomainError(f"theta must lie in (0, pi), got {self.theta!r}")


@dataclass(frozen=True)
class CausticOrbitSpec:
    lam: float
    t0: float = 0.0
    count: int = 100


@dataclass(frozen=True)
class RotationNumber:
    value: float
    as_fraction: tuple[int, int] | None = None

    def __post_init__(self):
        if not (0 < self.value < 0.5):
            raise DomainError(f"rotation number must lie in (0, 1/2), got {self.value!r}")
        if self.as_fraction is not None:
            p, q = self.as_fraction
            if math.gcd(p, q) != 1 or Fraction(p, q) != Fraction(self.value).limit_denominator(10**9):
                raise DomainError("fraction must be coprime and equal to value")

    @classmethod
    def from_fraction(cls, p: int, q: int) -> "RotationNumber":
        return cls(p / q, (p, q))


def _check_lambda(frame: Ellipse, lam: float) -> None:
    if not (0 < lam < frame.b):
        raise DomainError(f"caustic parameter must lie in (0, b={frame.b!r}), got {lam!r}")


def _check_pq(p: int, q: int) -> None:
    if q <= 0 or p <= 0 or math.gcd(p, q) != 1 or not (2 * p < q):
        raise DomainError(f"need coprime 0 < p/q < 1/2, got {p}/{q}")


# ----------------------------------------------------------------------------
# the billiard map

def _unit(v):
    return v / math.hypot(v[0], v[1])


def _ellipse_step(a: float, b: float, phi: float, theta: float):
    """One reflection in the canonical ellipse, in local coordinates."""
    cs, sn = math.cos(phi), math.sin(phi)
    px, py = a * cs, b * sn
    tx, ty = -a * sn, b * cs
    nt = math.hypot(tx, ty)
    tx, ty = tx / nt, ty / nt
    ct, st = math.cos(theta), math.sin(theta)
    vx, vy = ct * tx - st * ty, ct * ty + st * tx
    # |(P + t v) / (a, b)|^2 = 1, the nonzero root
    ux, uy = vx / a, vy / b
    t = -2 * (px * ux / a + py * uy / b) / (ux * ux + uy * uy)
    qx, qy = px + t * vx, py + t * vy
    psi = math.atan2(qy / b, qx / a)
    # one Newton polish of cross(v, gamma(psi) - P) = 0
    g = vx * (b * math.sin(psi) - py) - vy * (a * math.cos(psi) - px)
    dg = vx * b * math.cos(psi) + vy * a * math.sin(psi)
    if dg != 0:
        psi -= g / dg
    Tx, Ty = -a * math.sin(psi), b * math.cos(psi)
    nT = math.hypot(Tx, Ty)
    Tx, Ty = Tx / nT, Ty / nT
    theta_new = math.atan2(abs(vx * -Ty + vy * Tx), vx * Tx + vy * Ty)
    return psi % TWO_PI, theta_new


def billiard_step(domain: PerturbedDomain, state: BoundaryState, tol: float = 1e-13) -> BoundaryState:
    """Next impact of the billiard map."""
    frame, mu = domain.frame, domain.mu
    phi, theta = state.phi, state.theta
    if not np.any(mu.cos) and not np.any(mu.sin) and mu.mean == 0.0:
        psi, th = _ellipse_step(frame.a, frame.b, phi, theta)
        return BoundaryState(psi, th)

    P, T, _ = domain.derivatives(phi)
    t_hat = _unit(T)
    n_hat = np.array([-t_hat[1], t_hat[0]])
    v = math.cos(theta) * t_hat + math.sin(theta) * n_hat

    # initial guess from the frame ellipse
    pl = np.array(frame.to_local(P[0], P[1]))
    R = frame.rotation()
    vl = R.T @ v
    ab = np.array([frame.a, frame.b])
    u, w = pl / ab, vl / ab
    t_guess = -2 * (u @ w) / (w @ w)
    Q = P + t_guess * v
    _, psi0 = cartesian_to_offset(frame, Q[0], Q[1])
    psi = phi + (float(psi0) - phi) % TWO_PI

    def g(s):
        G = domain.point(s)
        return v[0] * (G[1] - P[1]) - v[1] * (G[0] - P[0])

    ok = False
    for _ in range(30):
        _, Gp, _ = domain.derivatives(psi)
        dg = v[0] * Gp[1] - v[1] * Gp[0]
        if dg == 0:
            break
        step = g(psi) / dg
        psi -= step
        if abs(step) <= tol:
            ok = True
            break
    G = domain.point(psi)
    if not ok or not (phi + 1e-9 < psi < phi + TWO_PI - 1e-9) or (G[0] - P[0]) * v[0] + (G[1] - P[1]) * v[1] <= 0:
        # safeguarded fallback: the chord angle increases monotonically from 0 to pi
        def chord_angle(s):
            D = domain.point(s) - P
            return math.atan2(t_hat[0] * D[1] - t_hat[1] * D[0], t_hat @ D) - theta

        eps = 1e-10
        try:
            psi = brentq(chord_angle, phi + eps, phi + TWO_PI - eps, xtol=1e-15, rtol=1e-15, maxiter=200)
        except ValueError as exc:
            raise NumericError(f"chord intersection failed: {exc}") from exc
        res = abs(g(psi))
        if res > 1e-9 * frame.a:
            raise NumericError("chord intersection did not converge", res)
    _, Tq, _ = domain.derivatives(psi)
    Tq = _unit(Tq)
    th = math.atan2(abs(v[0] * -Tq[1] + v[1] * Tq[0]), v @ Tq)
    return BoundaryState(psi % TWO_PI, th)


def iterate(domain: PerturbedDomain, state: BoundaryState, steps: int) -> list[BoundaryState]:
    out = [state]
    for _ in range(steps):
        state = billiard_step(domain, state)
        out.append(state)
    return out


def boundary_state_from_chord(domain: PerturbedDomain, phi: float, target) -> BoundaryState:
    """State at ``phi`` whose chord points at the cartesian ``target``."""
    P, T, _ = domain.derivatives(phi)
    t_hat = _unit(T)
    D = np.asarray(target, dtype=float) - P
    return BoundaryState(phi % TWO_PI, math.atan2(t_hat[0] * D[1] - t_hat[1] * D[0], t_hat @ D))


# ----------------------------------------------------------------------------
# the ellipse: caustics, rotation numbers, action-angle

def tangency_defect(caustic: Ellipse, P, Q) -> float:
    """Distance from the line PQ to the caustic minus zero: 0 when tangent, > 0 when it misses.

    Uses the support function sqrt(A^2 n_x^2 + B^2 n_y^2) of the caustic in the
    direction n normal to the line.
    """
    P = np.array(caustic.to_local(*P))
    Q = np.array(caustic.to_local(*Q))
    d = Q - P
    n = np.array([-d[1], d[0]]) / math.hypot(d[0], d[1])
    h = abs(float(n @ P))
    return h - math.hypot(caustic.a * n[0], caustic.b * n[1])


def caustic_rotation_number(frame: Ellipse, lam: float) -> RotationNumber:
    """omega = F(asin(lam / b); k) / (2 K(k))."""
    _check_lambda(frame, lam)
    k = caustic_modulus(frame, lam)
    return RotationNumber(incomplete_F(math.asin(lam / frame.b), k) / (2 * complete_K(k)))


def lambda_from_rotation(frame: Ellipse, omega) -> float:
    """Caustic parameter with rotation number ``omega`` (monotone bracketed solve on (0, b))."""
    w = omega.value if isinstance(omega, RotationNumber) else float(omega)
    if not (0 < w < 0.5):
        raise DomainError(f"rotation number must lie in (0, 1/2), got {w!r}")
    if frame.c == 0:
        return frame.b * math.sin(math.pi * w)

    def f(lam):
        k = caustic_modulus(frame, lam)
        return incomplete_F(math.asin(lam / frame.b), k) / (2 * complete_K(k)) - w

    # omega(lam) increases from 0 to 1/2; it approaches 1/2 only logarithmically
    hi = frame.b * (1 - 1e-15)
    if f(hi) < 0:
        raise DomainError(f"rotation number {w!r} needs lam closer to b than double precision resolves "
                          f"(largest reachable is {f(hi) + w:.6f})")
    return brentq(f, 0.0, hi, xtol=1e-16, rtol=1e-15, maxiter=500)


def ellipse_caustic_orbit(frame: Ellipse, spec: CausticOrbitSpec) -> np.ndarray:
    """Impact points (count + 1, 2) of the orbit tangent to the caustic ``spec.lam``."""
    _check_lambda(frame, spec.lam)
    k = caustic_modulus(frame, spec.lam)
    delta = 2 * incomplete_F(math.asin(spec.lam / frame.b), k)
    t = spec.t0 + delta * np.arange(spec.count + 1)
    sn, cn, dn = jacobi_sn_cn_dn_array(t, k)
    kc = math.sqrt((1 - k) * (1 + k))
    x, y = frame.to_global(frame.a * cn / dn, frame.b * kc * sn / dn)
    return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class CausticCheck:
    max_tangency_defect: float
    max_step_error: float


def caustic_invariance(frame: Ellipse, spec: CausticOrbitSpec) -> CausticCheck:
    """Compare the closed-form orbit with the caustic and with billiard_step, impact by impact."""
    pts = ellipse_caustic_orbit(frame, spec)
    caustic = confocal_caustic(frame, spec.lam)
    domain = PerturbedDomain.ellipse(frame)
    tang = step = 0.0
    for j in range(spec.count):
        tang = max(tang, abs(tangency_defect(caustic, pts[j], pts[j + 1])))
        phi = float(cartesian_to_offset(frame, *pts[j])[1])
        nxt = billiard_step(domain, boundary_state_from_chord(domain, phi, pts[j + 1]))
        P = domain.point(nxt.phi)
        step = max(step, math.hypot(P[0] - pts[j + 1][0], P[1] - pts[j + 1][1]))
    return CausticCheck(tang, step)


def action_angle_phi(theta, lam: float, frame: Ellipse):
    """Elliptic angle of the boundary point with action-angle coordinate ``theta``.

    The billiard restricted to the caustic ``lam`` is theta -> theta + 2 pi omega.
    """
    _check_lambda(frame, lam)
    k = caustic_modulus(frame, lam)
    K = complete_K(k)
    theta = np.asarray(theta, dtype=float)
    out = math.pi / 2 + jacobi_am_array(2 * K * theta / math.pi - K, k)
    return out if out.ndim else float(out)


def action_angle_phi_derivative(theta, lam: float, frame: Ellipse):
    k = caustic_modulus(frame, lam)
    K = complete_K(k)
    theta = np.asarray(theta, dtype=float)
    _, _, dn = jacobi_sn_cn_dn_array(2 * K * theta / math.pi - K, k)
    return 2 * K / math.pi * dn


def action_angle_theta(phi, lam: float, frame: Ellipse):
    """Inverse of :func:`action_angle_phi`."""
    _check_lambda(frame, lam)
    k = caustic_modulus(frame, lam)
    K = complete_K(k)
    phi = np.asarray(phi, dtype=float)
    out = math.pi * (incomplete_F_array(phi - math.pi / 2, k) + K) / (2 * K)
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------------
# periodic orbits

def _boundary_points(domain: PerturbedDomain, phis):
    x, y = domain.point(phis)
    return np.stack([x, y], axis=-1)


def _pq_gradient(domain: PerturbedDomain, lifted):
    """d(perimeter)/d(phi_k) for every vertex of the closed lifted polygon (last = first + 2 pi p)."""
    pts = _boundary_points(domain, lifted)
    d = np.diff(pts, axis=0)
    u = d / np.hypot(d[:, 0], d[:, 1])[:, None]
    _, T, _ = domain.derivatives(lifted[:-1])
    u_in = np.roll(u, 1, axis=0)
    return np.einsum("ij,ij->i", T, u_in - u), np.hypot(T[:, 0], T[:, 1])


def reflection_residual(domain: PerturbedDomain, phis, p: int) -> np.ndarray:
    """Reflection-law defect gamma' . (u_in - u_out) / |gamma'| at every vertex."""
    lifted = _lift_increasing(np.asarray(phis, dtype=float), p)
    lifted = np.append(lifted, lifted[0] + TWO_PI * p)
    grad, speed = _pq_gradient(domain, lifted)
    return grad / speed


def _lift_increasing(phis, p: int):
    out = [phis[0]]
    for x in phis[1:]:
        out.append(out[-1] + (x - out[-1]) % TWO_PI)
    out = np.array(out)
    if out[-1] - out[0] >= TWO_PI * p:
        raise SearchError("vertices do not wind the prescribed number of times")
    return out


def _lifted_perimeter(domain: PerturbedDomain, lifted) -> float:
    d = np.diff(_boundary_points(domain, lifted), axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def perimeter(domain: PerturbedDomain, phis, p: int) -> float:
    lifted = _lift_increasing(np.asarray(phis, dtype=float), p)
    lifted = np.append(lifted, lifted[0] + TWO_PI * p)
    d = np.diff(_boundary_points(domain, lifted), axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def max_pq_gon(domain: PerturbedDomain, p: int, q: int, start_phi: float = 0.0,
               fix_start: bool = True, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Vertices of the perimeter-maximising (p, q)-polygon through ``start_phi``.

    Started from the (p, q) orbit of the frame ellipse (the exact answer for an
    ellipse), then Newton ascent on the perimeter with the Hessian taken from
    gradient differences; positive curvature directions are flipped so every
    step ascends, and an Armijo backtrack keeps vertices ordered.
    """
    _check_pq(p, q)
    frame = domain.frame
    if frame.c > 0:
        lam = lambda_from_rotation(frame, p / q)
        th0 = action_angle_theta(start_phi, lam, frame)
        lifted = np.asarray(action_angle_phi(th0 + TWO_PI * p * np.arange(q + 1) / q, lam, frame))
        lifted = lifted - lifted[0] + start_phi
    else:
        lifted = start_phi + TWO_PI * p * np.arange(q + 1) / q

    free = np.arange(1 if fix_start else 0, q)
    h = 1e-6
    for _ in range(max_iter):
        lifted[-1] = lifted[0] + TWO_PI * p
        grad, speed = _pq_gradient(domain, lifted)
        resid = np.max(np.abs(grad / speed)[free]) if len(free) else 0.0
        if resid < tol:
            break
        H = np.zeros((q, q))
        for j in range(q):
            bumped = lifted.copy()
            bumped[j] += h
            if j == 0:
                bumped[-1] += h
            g2, _ = _pq_gradient(domain, bumped)
            bumped[j] -= 2 * h
            if j == 0:
                bumped[-1] -= 2 * h
            g1, _ = _pq_gradient(domain, bumped)
            H[:, j] = (g2 - g1) / (2 * h)
        Hf = H[np.ix_(free, free)]
        # saddle-free Newton: flip positive curvature so the step always ascends
        w, V = np.linalg.eigh(0.5 * (Hf + Hf.T))
        w = -np.maximum(np.abs(w), 1e-10)
        step = V @ ((V.T @ -grad[free]) / w)
        base = _lifted_perimeter(domain, lifted)
        slope = float(grad[free] @ step)
        for _ in range(40):
            trial = lifted.copy()
            trial[free] += step
            trial[-1] = trial[0] + TWO_PI * p
            if np.all(np.diff(trial) > 0) and _lifted_perimeter(domain, trial) >= base + 1e-4 * slope - 1e-15 * base:
                break
            step = step / 2
            slope /= 2
        else:
            raise SearchError("polygon degenerated (no admissible ascent step); try another start_phi")
        lifted = trial
    else:
        raise SearchError(f"(p, q)-gon search did not converge (residual {resid:.3e})")
    return np.mod(lifted[:q], TWO_PI)


# ----------------------------------------------------------------------------
# integrable rational caustics

def integrability_residual(domain: PerturbedDomain, p: int, q: int, grid: int = 256):
    """Oscillation and profile of S(theta) = lam * sum_k mu(phi_lam(theta + 2 pi k p / q)).

    ``lam`` is the frame's caustic with rotation number p / q.  The sum vanishes
    to first order in mu (up to a constant) when the p/q caustic survives.
    """
    _check_pq(p, q)
    frame = domain.frame
    lam = lambda_from_rotation(frame, p / q)
    theta = TWO_PI * np.arange(grid) / grid
    shifts = TWO_PI * p * np.arange(1, q + 1) / q
    if frame.c > 0:
        phis = action_angle_phi(np.add.outer(theta, shifts), lam, frame)
    else:
        phis = np.add.outer(theta, shifts)
    profile = lam * np.sum(domain.mu(phis), axis=1)
    return float(np.max(profile) - np.min(profile)), profile


# ----------------------------------------------------------------------------
# Lazutkin parametrisation

class PeriodicPrimitive:
    """t + P(t) / mean where P is the zero-at-0 periodic primitive of (g - mean)."""

    def __init__(self, samples: np.ndarray, cutoff: float = 1e-17):
        n = len(samples)
        spec = np.fft.rfft(samples) / n
        self.mean = float(spec[0].real)
        coef = spec[1:].copy()
        if n % 2 == 0:
            coef[-1] /= 2
        scale = max(abs(self.mean), 1e-300)
        keep = np.nonzero(np.abs(coef) > cutoff * scale)[0]
        m = int(keep[-1]) + 1 if len(keep) else 0
        self.tail = float(np.max(np.abs(coef[m - 8:m]))) / scale if m >= 8 else 0.0
        self.resolved = m < len(coef) - 1
        k = np.arange(1, m + 1)
        # g - mean = sum 2 Re(c_k e^{ikt}); primitive = sum 2 Re(c_k e^{ikt} / (ik))
        self.k = k.astype(float)
        self.c = coef[:m]
        self.offset = float(np.sum(2 * (self.c / (1j * self.k)).real))

    def periodic(self, t, deriv: int = 0):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty_like(flat)
        for i in range(0, len(flat), 2048):
            e = np.exp(1j * np.multiply.outer(flat[i:i + 2048], self.k))
            if deriv == 0:
                out[i:i + 2048] = 2 * (e @ (self.c / (1j * self.k))).real - self.offset
            else:
                out[i:i + 2048] = 2 * (e @ (self.c * (1j * self.k) ** (deriv - 1))).real
        return out.reshape(t.shape)

    def __call__(self, t):
        return np.asarray(t, dtype=float) + self.periodic(t) / self.mean

    def derivative(self, t, order: int = 1):
        extra = self.periodic(t, order) / self.mean
        return 1 + extra if order == 1 else extra

    def inverse(self, x, tol: float = 1e-15):
        x = np.asarray(x, dtype=float)
        t = x.copy()
        for _ in range(50):
            step = (self(t) - x) / self.derivative(t)
            t = t - step
            if np.max(np.abs(step), initial=0.0) <= tol * max(1.0, float(np.max(np.abs(x), initial=0.0))):
                return t
        raise NumericError("inversion of monotone map did not converge", float(np.max(np.abs(step))))


class LazutkinMap:
    """x(phi) = C * integral_0^phi kappa^(2/3) |gamma'| dphi, normalised to x(2 pi) = 2 pi."""

    def __init__(self, domain: PerturbedDomain, n_grid: int = 4096):
        self.domain = domain
        phi = TWO_PI * np.arange(n_grid) / n_grid
        kappa = domain.curvature(phi)
        if np.min(kappa) <= 0:
            raise ConvexityError("non-positive curvature sample; the Lazutkin map needs a strictly convex boundary")
        speed = domain.speed(phi)
        self._x = PeriodicPrimitive(kappa ** (2 / 3) * speed)
        self._s = PeriodicPrimitive(speed)
        self.length = TWO_PI * self._s.mean
        self.C_Omega = 1.0 / self._x.mean

    def x_of_phi(self, phi):
        return self._x(phi)

    def dx_dphi(self, phi, order: int = 1):
        return self._x.derivative(phi, order)

    def phi_of_x(self, x):
        return self._x.inverse(x)

    def s_of_phi(self, phi):
        return self._s.mean * self._s(phi)

    def phi_of_s(self, s):
        return self._s.inverse(np.asarray(s, dtype=float) / self._s.mean)

    def x_of_s(self, s):
        return self.x_of_phi(self.phi_of_s(s))


def lazutkin_map(domain: PerturbedDomain, n_grid: int = 4096):
    """Returns (x_of_s, C_Omega); the full :class:`LazutkinMap` is available as ``x_of_s.__self__``."""
    lm = LazutkinMap(domain, n_grid)
    return lm.x_of_s, lm.C_Omega


class XqMap:
    """theta -> x: Lazutkin coordinate of the action-angle point for the 1/q caustic."""

    def __init__(self, frame: Ellipse, q: int, n_grid: int = 4096, lazutkin: LazutkinMap | None = None):
        if q <= 2:
            raise DomainError(f"need q > 2, got {q}")
        self.frame, self.q = frame, q
        self.lazutkin = lazutkin or LazutkinMap(PerturbedDomain.ellipse(frame), n_grid)
        self.identity = frame.c == 0
        self.lam = lambda_from_rotation(frame, 1.0 / q)

    def _phi(self, theta):
        return np.asarray(theta, dtype=float) if self.identity else np.asarray(action_angle_phi(theta, self.lam, self.frame))

    def __call__(self, theta):
        return self.lazutkin.x_of_phi(self._phi(theta))

    def derivative(self, theta):
        if self.identity:
            return self.lazutkin.dx_dphi(theta)
        return self.lazutkin.dx_dphi(self._phi(theta)) * action_angle_phi_derivative(theta, self.lam, self.frame)

    def inverse(self, x):
        phi = self.lazutkin.phi_of_x(x)
        return phi if self.identity else action_angle_theta(phi, self.lam, self.frame)

    def deviation(self, samples: int = 2048) -> float:
        """C^1 distance to the identity."""
        theta = TWO_PI * np.arange(samples) / samples
        return float(max(np.max(np.abs(self(theta) - theta)), np.max(np.abs(self.derivative(theta) - 1))))


def Xq_map(frame: Ellipse, q: int, n_grid: int = 4096) -> XqMap:
    return XqMap(frame, q, n_grid)


__all__ = [
    "BoundaryState", "CausticOrbitSpec", "RotationNumber", "billiard_step", "iterate",
    "boundary_state_from_chord", "tangency_defect", "caustic_rotation_number", "lambda_from_rotation",
    "ellipse_caustic_orbit", "action_angle_phi", "action_angle_phi_derivative", "action_angle_theta",
    "max_pq_gon", "reflection_residual", "perimeter", "integrability_residual", "LazutkinMap",
    "lazutkin_map", "XqMap", "Xq_map", "PeriodicPrimitive", "confocal_caustic", "FourierSeries",
]
