"""Trigonometric modes transported by the 1/k action-angle maps, and the H^r pairing.

With ``X_k`` the map from the action-angle coordinate of the 1/k caustic to the
Lazutkin coordinate, the deformed mode is

    c_k(x) = cos(k X_k^-1(x)) / (sqrt(pi) X_k'(X_k^-1(x)))

(sine for negative k), so that integrating against c_k in x is integrating
against cos(k theta) in the action-angle variable.  Modes with |k| <= q0 are
left undeformed.  All functions are tabulated on a uniform grid and handled
through their Fourier series.

The pairing is <u, v>_r = (int u)(int v) + int u^(r) v^(r) over one period.
``V_k`` and ``C_k`` are the zero-average r-th antiderivatives of v_k and c_k;
``V_0`` is the constant 1 / (2 pi), which has unit norm for this pairing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .billiard_dynamics import (
    LazutkinMap, action_angle_phi_derivative, action_angle_theta, lambda_from_rotation,
)
from .ellipse_geometry import Ellipse, FourierSeries, PerturbedDomain
from .errors import DomainError

TWO_PI = 2.0 * math.pi
SQRT_PI = math.sqrt(math.pi)
N_GRID = 4096


def _grid(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


def _check_r(r: int) -> None:
    if not isinstance(r, (int, np.integer)) or r < 1:
        raise DomainError(f"Sobolev order must be an integer >= 1, got {r!r}")


def trig_mode(k: int, K_max: int) -> FourierSeries:
    """v_k: 1 for k = 0, cos(k x)/sqrt(pi) for k > 0, sin(|k| x)/sqrt(pi) for k < 0."""
    if abs(k) > K_max:
        raise DomainError(f"|k| = {abs(k)} exceeds K_max = {K_max}")
    if k == 0:
        return FourierSeries.from_modes(K_max, mean=1.0)
    if k > 0:
        return FourierSeries.from_modes(K_max, cos={k: 1 / SQRT_PI})
    return FourierSeries.from_modes(K_max, sin={-k: 1 / SQRT_PI})


def antiderivative(u: FourierSeries, r: int) -> FourierSeries:
    """Zero-average r-th antiderivative (the mean of u is dropped)."""
    k = np.arange(1, u.K_max + 1, dtype=float)
    z = (u.cos - 1j * u.sin) / (1j * k) ** r
    return FourierSeries(0.0, z.real, -z.imag)


def derivative(u: FourierSeries, r: int) -> FourierSeries:
    k = np.arange(1, u.K_max + 1, dtype=float)
    z = (u.cos - 1j * u.sin) * (1j * k) ** r
    return FourierSeries(0.0, z.real, -z.imag)


def basis_mode(k: int, r: int, K_max: int = N_GRID // 2 - 1) -> FourierSeries:
    """V_k, the orthonormal H^r basis element built on v_k."""
    _check_r(r)
    if k == 0:
        return FourierSeries.from_modes(K_max, mean=1 / TWO_PI)
    return antiderivative(trig_mode(k, K_max), r)


@dataclass(frozen=True)
class InnerProduct:
    value: float
    resolved: bool


def sobolev_inner(u: FourierSeries, v: FourierSeries, r: int, tol: float = 1e-12,
                  with_status: bool = False):
    """(int u)(int v) + int u^(r) v^(r), computed from the Fourier coefficients.

    With ``with_status`` an :class:`InnerProduct` is returned whose ``resolved``
    flag reports whether both spectra decayed below ``tol`` (relative) before
    their last eight harmonics.
    """
    _check_r(r)
    K = max(u.K_max, v.K_max)
    u, v = u.padded(K), v.padded(K)
    k = np.arange(1, K + 1, dtype=float)
    value = TWO_PI**2 * u.mean * v.mean + math.pi * float(np.sum(k ** (2 * r) * (u.cos * v.cos + u.sin * v.sin)))
    if not with_status:
        return value
    return InnerProduct(value, _resolved(u, tol) and _resolved(v, tol))


def _resolved(u: FourierSeries, tol: float) -> bool:
    amp = np.hypot(u.cos, u.sin)
    if amp.size < 16:
        return True
    top = max(float(np.max(amp)), abs(u.mean), 1e-300)
    return float(np.max(amp[-8:])) <= tol * top


def sobolev_norm_spectral(u: FourierSeries, r: int) -> float:
    """sqrt(sum_k max(|k|^(2r), 1) uhat_k^2) with uhat_k = int u v_k."""
    k = np.arange(1, u.K_max + 1, dtype=float)
    hat0 = TWO_PI * u.mean
    hat = math.pi * (u.cos**2 + u.sin**2)  # squared coefficients against cos/sqrt(pi), sin/sqrt(pi)
    return math.sqrt(hat0**2 + float(np.sum(np.maximum(k ** (2 * r), 1.0) * hat)))


class DeformedBasis:
    """Deformed modes of one frame ellipse; the Lazutkin inverse is shared by all k."""

    def __init__(self, frame: Ellipse, q0: int, n_grid: int = N_GRID):
        if q0 < 0:
            raise DomainError(f"q0 must be non-negative, got {q0}")
        self.frame, self.q0, self.n_grid = frame, int(q0), int(n_grid)
        self.K_max = self.n_grid // 2 - 1
        self.x = _grid(self.n_grid)
        self.identity = frame.c == 0
        self.lazutkin = LazutkinMap(PerturbedDomain.ellipse(frame), self.n_grid)
        self.phi = self.lazutkin.phi_of_x(self.x)
        self.dx_dphi = self.lazutkin.dx_dphi(self.phi)

    def transport(self, q: int):
        """theta = X_q^-1(x) and X_q'(theta) on the grid."""
        if self.identity:
            return self.phi, self.dx_dphi
        lam = lambda_from_rotation(self.frame, 1.0 / q)
        theta = action_angle_theta(self.phi, lam, self.frame)
        return theta, self.dx_dphi * action_angle_phi_derivative(theta, lam, self.frame)

    def c(self, k: int) -> FourierSeries:
        if k == 0 or abs(k) <= self.q0:
            return trig_mode(k, self.K_max)
        n = abs(k)
        if 2 * n + 1 > self.n_grid // 4:
            raise DomainError(f"|k| = {n} is too large for a grid of {self.n_grid} points")
        theta, dX = self.transport(n)
        wave = np.cos(n * theta) if k > 0 else np.sin(n * theta)
        return FourierSeries.from_samples(wave / (SQRT_PI * dX), self.K_max)

    def C(self, k: int, r: int) -> FourierSeries:
        _check_r(r)
        if k == 0:
            return basis_mode(0, r, self.K_max)
        return antiderivative(self.c(k), r)

    def V(self, k: int, r: int) -> FourierSeries:
        return basis_mode(k, r, self.K_max)


@lru_cache(maxsize=8)
def _basis(a: float, b: float, q0: int, n_grid: int) -> DeformedBasis:
    return DeformedBasis(Ellipse(a, b), q0, n_grid)


def _basis_for(frame: Ellipse, q0: int, n_grid: int) -> DeformedBasis:
    if not frame.is_canonical:
        return DeformedBasis(frame, q0, n_grid)
    return _basis(frame.a, frame.b, int(q0), int(n_grid))


def deformed_mode(frame: Ellipse, k: int, q0: int, n_grid: int = N_GRID) -> FourierSeries:
    """c_k as a Fourier series resolved on ``n_grid`` points."""
    if k == 0:
        raise DomainError("deformed modes are indexed by k != 0")
    return _basis_for(frame, q0, n_grid).c(k)


def capital_C_mode(frame: Ellipse, k: int, r: int, q0: int, n_grid: int = N_GRID) -> FourierSeries:
    """C_k: the zero-average function whose r-th derivative is c_k."""
    if k == 0:
        raise DomainError("deformed modes are indexed by k != 0")
    return _basis_for(frame, q0, n_grid).C(k, r)


def grid_values(u: FourierSeries, n: int = N_GRID) -> np.ndarray:
    """u at 2 pi j / n by an inverse FFT; needs n > 2 K_max."""
    if n <= 2 * u.K_max:
        raise DomainError(f"{n} samples cannot resolve {u.K_max} harmonics")
    spec = np.zeros(n // 2 + 1, dtype=complex)
    spec[0] = u.mean
    spec[1:u.K_max + 1] = (u.cos - 1j * u.sin) / 2
    return np.fft.irfft(spec, n) * n


def sup_norm(u: FourierSeries, samples: int = N_GRID) -> float:
    return float(np.max(np.abs(grid_values(u, samples))))


@dataclass(frozen=True)
class BasisDefect:
    defect: float
    threshold_ok: bool
    partial: float
    tail: float
    C_sup: float          # max_k k ||c_k - v_k||_C0
    C_r: float            # max_k k ||C_k - V_k||_r
    per_k: tuple          # (k, ||c_k - v_k||_C0, ||C_k - V_k||_r)

    def to_json(self) -> dict:
        f = lambda x: f"{x:.17g}"
        return {"defect": f(self.defect), "threshold_ok": self.threshold_ok, "partial": f(self.partial),
                "tail": f(self.tail), "C_sup": f(self.C_sup), "C_r": f(self.C_r),
                "per_k_deviation": [{"k": k, "c0": f(a), "hr": f(b)} for k, a, b in self.per_k]}


def basis_defect(frame: Ellipse, q0: int, r: int, K: int, n_grid: int = N_GRID) -> BasisDefect:
    """Bound on ||L - Id|| where L sends V_k to C_k.

    The computed part is sqrt(sum over q0 < |k| <= K of ||C_k - V_k||_r^2); the
    modes beyond K are bounded through the measured envelope
    ||C_k - V_k||_r <= C_r / |k|, which gives tail^2 <= 2 C_r^2 / K.
    """
    _check_r(r)
    if K < 4 * q0 or K < 1:
        raise DomainError(f"need K >= 4 q0, got K={K}, q0={q0}")
    basis = _basis_for(frame, q0, n_grid)
    per_k, partial2, C_sup, C_r = [], 0.0, 0.0, 0.0
    for k in range(q0 + 1, K + 1):
        for kk in (k, -k):
            c_dev = sup_norm(basis.c(kk) - trig_mode(kk, basis.K_max), n_grid)
            diff = basis.C(kk, r) - basis.V(kk, r)
            h_dev = math.sqrt(max(sobolev_inner(diff, diff, r), 0.0))
            per_k.append((kk, c_dev, h_dev))
            partial2 += h_dev**2
            C_sup = max(C_sup, k * c_dev)
            C_r = max(C_r, k * h_dev)
    tail = math.sqrt(2.0 * C_r**2 / K)
    defect = math.sqrt(partial2 + tail**2)
    return BasisDefect(defect, defect < 1.0, math.sqrt(partial2), tail, C_sup, C_r, tuple(per_k))


def lazutkin_pullback(domain: PerturbedDomain, n_grid: int = N_GRID) -> FourierSeries:
    """f_mu(x) = mu(phi_L(x)) with x the Lazutkin coordinate of the frame ellipse."""
    basis = _basis_for(domain.frame, 0, n_grid)
    return FourierSeries.from_samples(domain.mu(basis.phi), basis.K_max)


def annihilation_test(domain: PerturbedDomain, q: int, r: int, q0: int | None = None,
                      n_grid: int = N_GRID) -> tuple[float, float]:
    """(<f_mu, C_q>_r, <f_mu, C_-q>_r) on the frame of ``domain``."""
    _check_r(r)
    q0 = q - 1 if q0 is None else q0
    if q <= max(q0, 2):
        raise DomainError(f"need q > q0 and q > 2, got q={q}, q0={q0}")
    basis = _basis_for(domain.frame, q0, n_grid)
    f = FourierSeries.from_samples(domain.mu(basis.phi), basis.K_max)
    return sobolev_inner(f, basis.C(q, r), r), sobolev_inner(f, basis.C(-q, r), r)


def transported_coefficients(domain: PerturbedDomain, q: int, n_grid: int = N_GRID) -> tuple[float, float]:
    """(int f_mu c_q dx, int f_mu c_-q dx).

    By the change of variables x = X_q(theta) these equal the cos(q theta) and
    sin(q theta) coefficients of mu(phi_{1/q}(theta)) times sqrt(pi), which is
    the quantity the 1/q integrability condition controls.
    """
    if q <= 2:
        raise DomainError(f"need q > 2, got {q}")
    basis = _basis_for(domain.frame, q - 1, n_grid)
    f = FourierSeries.from_samples(domain.mu(basis.phi), basis.K_max)

    def l2(u: FourierSeries, v: FourierSeries) -> float:
        return TWO_PI * u.mean * v.mean + math.pi * float(np.sum(u.cos * v.cos + u.sin * v.sin))

    return l2(f, basis.c(q)), l2(f, basis.c(-q))
