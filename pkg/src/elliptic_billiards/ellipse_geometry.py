"""Ellipses, elliptic coordinates, small elliptic motions and frame changes.

A boundary close to an ellipse is described in the ellipse's elliptic-polar
coordinates ``x = c cosh(m) cos(phi)``, ``y = c sinh(m) sin(phi)`` as
``m = m0 + nu(phi)`` where ``m0 = acosh(1/e)`` labels the ellipse itself.  We
store the offset ``nu`` rather than ``m``: with ``A = a cosh nu + b sinh nu`` and
``B = b cosh nu + a sinh nu`` the point is ``(A cos phi, B sin phi)``, which
stays finite at ``e = 0`` where it reduces to polar coordinates with radius
``a exp(nu)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import elementwise, least_squares, minimize

from .errors import BranchError, ConvexityError, DegenerateChartError, DomainError, GeometryError


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


# ----------------------------------------------------------------------------
# ellipses

@dataclass(frozen=True)
class Ellipse:
    """Ellipse with semi-axes a >= b > 0, optionally moved by a rotation and a shift."""

    a: float
    b: float
    center: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "angle"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not (self.a >= self.b > 0):
            raise DomainError(f"need a >= b > 0, got a={self.a!r}, b={self.b!r}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def c(self) -> float:
        return math.sqrt((self.a - self.b) * (self.a + self.b))

    @property
    def e(self) -> float:
        return self.c / self.a

    @property
    def mu0(self) -> float:
        """Elliptic radial coordinate of the ellipse itself (infinite for a circle)."""
        return math.acosh(self.a / self.c) if self.c > 0 else math.inf

    @property
    def is_canonical(self) -> bool:
        return self.center == (0.0, 0.0) and self.angle == 0.0

    def rotation(self) -> np.ndarray:
        cs, sn = math.cos(self.angle), math.sin(self.angle)
        return np.array([[cs, -sn], [sn, cs]])

    def shape_matrix(self) -> np.ndarray:
        """Symmetric positive matrix S with ellipse = center + S (unit circle)."""
        R = self.rotation()
        return R @ np.diag([self.a, self.b]) @ R.T

    def to_local(self, x, y):
        x = np.asarray(x, dtype=float) - self.center[0]
        y = np.asarray(y, dtype=float) - self.center[1]
        if self.angle == 0.0:
            return x, y
        cs, sn = math.cos(self.angle), math.sin(self.angle)
        return cs * x + sn * y, -sn * x + cs * y

    def to_global(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.angle != 0.0:
            cs, sn = math.cos(self.angle), math.sin(self.angle)
            x, y = cs * x - sn * y, sn * x + cs * y
        return x + self.center[0], y + self.center[1]

    @classmethod
    def from_matrix(cls, M, center=(0.0, 0.0)) -> "Ellipse":
        """Ellipse center + M (unit circle) for any invertible 2x2 matrix M."""
        U, s, _ = np.linalg.svd(np.asarray(M, dtype=float))
        angle = 0.0 if s[0] == s[1] else math.atan2(U[1, 0], U[0, 0])
        # the major axis direction is only defined up to sign
        if angle > math.pi / 2:
            angle -= math.pi
        elif angle <= -math.pi / 2:
            angle += math.pi
        return cls(float(s[0]), float(s[1]), (float(center[0]), float(center[1])), angle)

    def to_json(self) -> dict:
        out = {"a": _fmt(self.a), "b": _fmt(self.b)}
        if not self.is_canonical:
            out["center"] = [_fmt(self.center[0]), _fmt(self.center[1])]
            out["angle"] = _fmt(self.angle)
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Ellipse":
        center = tuple(float(v) for v in d.get("center", (0.0, 0.0)))
        return cls(float(d["a"]), float(d["b"]), center, float(d.get("angle", 0.0)))


@dataclass(frozen=True)
class EllipticPoint:
    """Point in elliptic-polar coordinates (absolute radial coordinate mu, angle phi).

    For a circular frame the chart is polar and ``mu`` is read as ``log(r / a)``.
    """

    mu: float
    phi: float


def offset_to_cartesian(frame: Ellipse, nu, phi):
    """Cartesian point at offset ``nu`` from the frame along the coordinate line ``phi``."""
    nu = np.asarray(nu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ch, sh = np.cosh(nu), np.sinh(nu)
    x = (frame.a * ch + frame.b * sh) * np.cos(phi)
    y = (frame.b * ch + frame.a * sh) * np.sin(phi)
    return frame.to_global(x, y)


def cartesian_to_offset(frame: Ellipse, x, y):
    """Inverse of :func:`offset_to_cartesian`; phi is returned in [0, 2 pi).

    The confocal ellipse through the point has squared semi-axes s and s - c^2
    where s is the larger root of s^2 - (r^2 + c^2) s + x^2 c^2 = 0.
    """
    xl, yl = frame.to_local(x, y)
    c2 = (frame.a - frame.b) * (frame.a + frame.b)
    r2 = xl * xl + yl * yl
    d = r2 - c2
    root = np.sqrt(d * d + 4.0 * yl * yl * c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        B2 = np.where(d >= 0, 0.5 * (d + root), 2.0 * yl * yl * c2 / (root - d))
    B2 = np.where(np.isfinite(B2), B2, 0.0)
    A = np.sqrt(B2 + c2)
    B = np.sqrt(B2)
    nu = np.log((A + B) / (frame.a + frame.b))
    # (x, y) = (A cos phi, B sin phi); on the focal segment B = 0 and phi is 0 or pi
    phi = np.arctan2(np.where(B > 0, yl / np.where(B > 0, B, 1.0), 0.0) * A, xl)
    phi = np.mod(phi, 2 * np.pi)
    return nu, phi


def to_cartesian(p: EllipticPoint, frame: Ellipse):
    nu = p.mu - frame.mu0 if frame.c > 0 else p.mu
    x, y = offset_to_cartesian(frame, nu, p.phi)
    return float(x), float(y)


def from_cartesian(x: float, y: float, frame: Ellipse) -> EllipticPoint:
    if frame.c == 0:
        raise DegenerateChartError("elliptic coordinates degenerate for a circle; use polar coordinates")
    xl, yl = frame.to_local(x, y)
    if yl == 0 and abs(xl) <= frame.c:
        raise BranchError(f"point lies on the focal segment |x| <= {frame.c:.17g}, y = 0 where the angle is ambiguous")
    nu, phi = cartesian_to_offset(frame, x, y)
    return EllipticPoint(frame.mu0 + float(nu), float(phi))


def caustic_modulus(frame: Ellipse, lam: float) -> float:
    """k_lambda = c / sqrt(a^2 - lambda^2)."""
    return frame.c / math.sqrt((frame.a - lam) * (frame.a + lam))


def confocal_caustic(frame: Ellipse, lam: float) -> Ellipse:
    if not (0 < lam < frame.b):
        raise DomainError(f"caustic parameter must lie in (0, b={frame.b!r}), got {lam!r}")
    return Ellipse(
        math.sqrt((frame.a - lam) * (frame.a + lam)),
        math.sqrt((frame.b - lam) * (frame.b + lam)),
        frame.center, frame.angle,
    )


# ----------------------------------------------------------------------------
# Fourier series

@dataclass(frozen=True, eq=False)
class FourierSeries:
    """mean + sum_k cos[k-1] cos(k phi) + sin[k-1] sin(k phi), k = 1..K_max."""

    mean: float
    cos: np.ndarray
    sin: np.ndarray

    def __post_init__(self):
        c = np.array(self.cos, dtype=float).ravel()
        s = np.array(self.sin, dtype=float).ravel()
        if c.shape != s.shape:
            raise DomainError("cos and sin coefficient lists must have the same length")
        c.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)
        object.__setattr__(self, "mean", float(self.mean))

    @property
    def K_max(self) -> int:
        return len(self.cos)

    @classmethod
    def zero(cls, K_max: int = 0) -> "FourierSeries":
        return cls(0.0, np.zeros(K_max), np.zeros(K_max))

    @classmethod
    def from_modes(cls, K_max: int, mean: float = 0.0, cos: dict | None = None, sin: dict | None = None):
        c, s = np.zeros(K_max), np.zeros(K_max)
        for k, v in (cos or {}).items():
            c[k - 1] = v
        for k, v in (sin or {}).items():
            s[k - 1] = v
        return cls(mean, c, s)

    @classmethod
    def from_samples(cls, values, K_max: int) -> "FourierSeries":
        """Series from samples at phi_j = 2 pi j / N, truncated to K_max harmonics."""
        values = np.asarray(values, dtype=float)
        n = len(values)
        if n < 2 * K_max + 1:
            raise DomainError(f"need at least {2 * K_max + 1} samples for K_max={K_max}")
        spec = np.fft.rfft(values) / n
        c = 2 * spec[1:K_max + 1].real
        s = -2 * spec[1:K_max + 1].imag
        return cls(spec[0].real, c, s)

    @classmethod
    def from_function(cls, f, K_max: int, oversample: int = 8) -> "FourierSeries":
        n = max(oversample * K_max, 2 * K_max + 1, 16)
        phi = 2 * np.pi * np.arange(n) / n
        return cls.from_samples(f(phi), K_max)

    def padded(self, K_max: int) -> "FourierSeries":
        c, s = np.zeros(K_max), np.zeros(K_max)
        m = min(K_max, self.K_max)
        c[:m], s[:m] = self.cos[:m], self.sin[:m]
        return FourierSeries(self.mean, c, s)

    def __call__(self, phi, deriv: int = 0):
        phi = np.asarray(phi, dtype=float)
        out = np.full(phi.shape, self.mean if deriv == 0 else 0.0)
        if self.K_max == 0:
            return out
        k = np.arange(1, self.K_max + 1, dtype=float)
        arg = np.multiply.outer(phi, k) + deriv * np.pi / 2
        weights = k**deriv
        return out + np.cos(arg) @ (weights * self.cos) + np.sin(arg) @ (weights * self.sin)

    def __add__(self, other: "FourierSeries") -> "FourierSeries":
        K = max(self.K_max, other.K_max)
        x, y = self.padded(K), other.padded(K)
        return FourierSeries(x.mean + y.mean, x.cos + y.cos, x.sin + y.sin)

    def __sub__(self, other: "FourierSeries") -> "FourierSeries":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "FourierSeries":
        return FourierSeries(factor * self.mean, factor * self.cos, factor * self.sin)

    def weighted_norm(self, n: int) -> float:
        """sqrt(mean^2 + sum_k max(1, k^(2n)) (a_k^2 + b_k^2))."""
        k = np.arange(1, self.K_max + 1, dtype=float)
        w = np.maximum(1.0, k ** (2 * n))
        return math.sqrt(self.mean**2 + float(np.sum(w * (self.cos**2 + self.sin**2))))

    def cn_norm(self, n: int, samples: int | None = None) -> float:
        """max over derivative orders 0..n of the sampled sup norm."""
        m = samples or max(8 * self.K_max, 64)
        phi = 2 * np.pi * np.arange(m) / m
        return max(float(np.max(np.abs(self(phi, d)))) for d in range(n + 1))

    def max_abs_coefficient(self) -> float:
        vals = [abs(self.mean)] + list(np.abs(self.cos)) + list(np.abs(self.sin))
        return float(max(vals))

    def to_json(self) -> dict:
        return {"mean": _fmt(self.mean), "cos": [_fmt(v) for v in self.cos], "sin": [_fmt(v) for v in self.sin]}

    @classmethod
    def from_json(cls, d: dict) -> "FourierSeries":
        return cls(float(d["mean"]), [float(v) for v in d["cos"]], [float(v) for v in d["sin"]])


# ----------------------------------------------------------------------------
# perturbed domains

@dataclass(frozen=True, eq=False)
class PerturbedDomain:
    """Domain whose boundary is the frame ellipse pushed out by mu(phi) in elliptic offsets."""

    frame: Ellipse
    mu: FourierSeries
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.check:
            return
        n = max(8 * self.mu.K_max, 256)
        phi = 2 * np.pi * np.arange(n) / n
        nu = self.mu(phi)
        if self.frame.c > 0 and np.min(nu) <= -self.frame.mu0:
            raise GeometryError("boundary leaves the elliptic chart (mu0 + min mu <= 0)")
        kappa = self.curvature(phi)
        if np.min(kappa) <= 0:
            i = int(np.argmin(kappa))
            raise ConvexityError(f"non-positive curvature {kappa[i]:.3e} at phi={phi[i]:.6f}")

    @classmethod
    def ellipse(cls, frame: Ellipse, K_max: int = 0) -> "PerturbedDomain":
        return cls(frame, FourierSeries.zero(K_max))

    def point(self, phi):
        return offset_to_cartesian(self.frame, self.mu(phi), phi)

    def local_derivatives(self, phi):
        """Local-frame boundary point and its first two phi-derivatives."""
        phi = np.asarray(phi, dtype=float)
        a, b = self.frame.a, self.frame.b
        nu, d1, d2 = self.mu(phi), self.mu(phi, 1), self.mu(phi, 2)
        ch, sh = np.cosh(nu), np.sinh(nu)
        A, B = a * ch + b * sh, b * ch + a * sh
        cs, sn = np.cos(phi), np.sin(phi)
        p = np.stack([A * cs, B * sn], axis=-1)
        t = np.stack([B * d1 * cs - A * sn, A * d1 * sn + B * cs], axis=-1)
        acc = np.stack([
            (A * d1 * d1 + B * d2 - A) * cs - 2 * B * d1 * sn,
            (B * d1 * d1 + A * d2 - B) * sn + 2 * A * d1 * cs,
        ], axis=-1)
        return p, t, acc

    def derivatives(self, phi):
        """Global point, first and second derivative with respect to phi."""
        p, t, acc = self.local_derivatives(phi)
        R = self.frame.rotation()
        c = np.array(self.frame.center)
        return p @ R.T + c, t @ R.T, acc @ R.T

    def curvature(self, phi):
        _, t, acc = self.local_derivatives(phi)
        cross = t[..., 0] * acc[..., 1] - t[..., 1] * acc[..., 0]
        return cross / np.hypot(t[..., 0], t[..., 1]) ** 3

    def speed(self, phi):
        _, t, _ = self.local_derivatives(phi)
        return np.hypot(t[..., 0], t[..., 1])

    def implicit(self, x, y):
        """Negative inside, zero on the boundary, positive outside."""
        nu, phi = cartesian_to_offset(self.frame, x, y)
        return nu - self.mu(phi)

    def perimeter(self, samples: int | None = None) -> float:
        n = samples or max(8 * self.mu.K_max, 1024)
        phi = 2 * np.pi * np.arange(n) / n
        return float(np.mean(self.speed(phi)) * 2 * np.pi)

    def to_json(self) -> dict:
        return {"frame": self.frame.to_json(), "mu": self.mu.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "PerturbedDomain":
        return cls(Ellipse.from_json(d["frame"]), FourierSeries.from_json(d["mu"]))


def solve_offsets(implicit, frame: Ellipse, phi, span: float = 0.05):
    """For each phi, the offset nu along the frame's coordinate line where ``implicit`` vanishes."""
    phi = np.asarray(phi, dtype=float)
    floor = -0.9 * frame.mu0 if frame.c > 0 else -2.0
    lo = np.full(phi.shape, max(-span, floor))
    hi = np.full(phi.shape, span)

    def g(nu, ph):
        return implicit(*offset_to_cartesian(frame, nu, ph))

    for _ in range(8):
        glo, ghi = g(lo, phi), g(hi, phi)
        bad_lo, bad_hi = glo > 0, ghi < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, np.maximum(2 * lo, floor), lo)
        hi = np.where(bad_hi, 2 * hi, hi)
    else:
        raise GeometryError("could not bracket the boundary along the coordinate lines; frames too far apart")
    res = elementwise.find_root(g, (lo, hi), args=(phi,), tolerances={"xatol": 1e-16, "xrtol": 4e-16, "fatol": 0.0, "frtol": 0.0})
    if not np.all(res.success):
        raise GeometryError("boundary root solve failed")
    return res.x


def reframe_perturbation(domain: PerturbedDomain, new_frame: Ellipse, K_max: int = 128,
                         oversample: int = 8) -> FourierSeries:
    """Offset function of the domain's boundary measured in ``new_frame``'s coordinates."""
    if new_frame == domain.frame:
        return domain.mu.padded(K_max)
    n = max(oversample * K_max, 2 * K_max + 1, 64)
    phi = 2 * np.pi * np.arange(n) / n
    return FourierSeries.from_samples(solve_offsets(domain.implicit, new_frame, phi), K_max)


def ellipse_offsets(frame: Ellipse, other: Ellipse, K_max: int = 128, oversample: int = 8) -> FourierSeries:
    """Offset function of ``other`` written in ``frame``'s coordinates."""
    return reframe_perturbation(PerturbedDomain.ellipse(other), frame, K_max, oversample)


def reframe_estimates(domain: PerturbedDomain, new_frame: Ellipse, n: int = 1, K_max: int = 64) -> dict:
    """Measured constants in the change-of-frame estimates.

    ``C`` bounds the second-order remainder |mu - (mu_E + mu_bar)|_n by
    C |mu_E|_n |mu - mu_E|_n, and ``C_prime`` is the two-sided ratio between
    |mu_bar|_n and |mu - mu_E|_n.
    """
    mu = domain.mu.padded(K_max)
    mu_E = ellipse_offsets(domain.frame, new_frame, K_max)
    mu_bar = reframe_perturbation(domain, new_frame, K_max)
    diff = (mu - mu_E).cn_norm(n)
    remainder = (mu - (mu_E + mu_bar)).cn_norm(n)
    bar = mu_bar.cn_norm(n)
    ratio = bar / diff if diff > 0 else 1.0
    return {
        "norm_mu_E": mu_E.cn_norm(n),
        "norm_difference": diff,
        "norm_mu_bar": bar,
        "remainder": remainder,
        "C": remainder / (mu_E.cn_norm(n) * diff) if mu_E.cn_norm(n) * diff > 0 else 0.0,
        "C_prime": max(ratio, 1 / ratio) if ratio > 0 else math.inf,
    }


def frame_distance(frame: Ellipse, other: Ellipse, samples: int = 512) -> float:
    """Largest displacement along the frame's coordinate lines between the two ellipses.

    An upper bound for their Hausdorff distance, cheap enough for optimizer loops.
    """
    phi = 2 * np.pi * np.arange(samples) / samples
    nu = solve_offsets(PerturbedDomain.ellipse(other).implicit, frame, phi)
    x1, y1 = offset_to_cartesian(frame, nu, phi)
    x0, y0 = offset_to_cartesian(frame, 0.0, phi)
    return float(np.max(np.hypot(x1 - x0, y1 - y0)))


# ----------------------------------------------------------------------------
# elliptic motions

MOTION_KINDS = ("homothety", "translation", "hyperbolic_rotation")


@dataclass(frozen=True)
class EllipticMotion:
    """Small motion of the frame.

    homothety (lam,) scales by exp(lam); translation (a1, a2) shifts the center;
    hyperbolic_rotation (b1, b2) applies exp([[b1, b2], [b2, -b1]]).  Parameters
    are in the frame's own axes.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in MOTION_KINDS:
            raise DomainError(f"unknown motion kind {self.kind!r}; expected one of {MOTION_KINDS}")
        want = 1 if self.kind == "homothety" else 2
        if len(self.params) != want:
            raise DomainError(f"{self.kind} takes {want} parameter(s)")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def size(self) -> float:
        return math.hypot(*self.params)

    def scaled(self, factor: float) -> "EllipticMotion":
        return EllipticMotion(self.kind, tuple(factor * p for p in self.params))


def _check_motion(frame: Ellipse, motion: EllipticMotion, bound: float | None):
    bound = 1e-2 * frame.a if bound is None else bound
    # translations are lengths, the other two are dimensionless
    size = motion.size if motion.kind == "translation" else motion.size * frame.a
    if size > bound:
        raise DomainError(f"motion size {size:.3e} exceeds the validity bound {bound:.3e}")


def moved_ellipse(frame: Ellipse, motion: EllipticMotion) -> Ellipse:
    """Image of the frame under the motion (applied in the frame's axes)."""
    if motion.kind == "homothety":
        L, shift = math.exp(motion.params[0]) * np.eye(2), np.zeros(2)
    elif motion.kind == "translation":
        L, shift = np.eye(2), np.array(motion.params)
    else:
        b1, b2 = motion.params
        s = math.hypot(b1, b2)
        S = np.array([[b1, b2], [b2, -b1]])
        L = math.cosh(s) * np.eye(2) + (math.sinh(s) / s if s > 0 else 1.0) * S
        shift = np.zeros(2)
    R = frame.rotation()
    M = R @ L @ np.diag([frame.a, frame.b])
    center = np.array(frame.center) + R @ shift
    return Ellipse.from_matrix(M, center)


def elliptic_motion_mu(frame: Ellipse, motion: EllipticMotion, order: str = "leading",
                       K_max: int = 128, bound: float | None = None) -> FourierSeries:
    """Offset function of the moved frame, to first order (``leading``) or exactly (``exact``)."""
    _check_motion(frame, motion, bound)
    if order == "leading":
        if motion.kind == "homothety":
            return FourierSeries.from_modes(K_max, mean=motion.params[0])
        if motion.kind == "translation":
            a1, a2 = motion.params
            return FourierSeries.from_modes(K_max, cos={1: a1 / frame.a}, sin={1: a2 / frame.a})
        b1, b2 = motion.params
        return FourierSeries.from_modes(K_max, cos={2: b1}, sin={2: b2})
    if order == "exact":
        return ellipse_offsets(frame, moved_ellipse(frame, motion), K_max)
    raise DomainError(f"order must be 'leading' or 'exact', got {order!r}")


# ----------------------------------------------------------------------------
# best approximating ellipse

@dataclass(frozen=True, eq=False)
class BestFit:
    ellipse: Ellipse
    residual: FourierSeries
    norm: float
    input_norm: float
    distance: float
    boundary_hit: bool


def _ellipse_from_params(p) -> Ellipse:
    cx, cy, s11, s12, s22 = p
    S = np.array([[s11, s12], [s12, s22]])
    w, V = np.linalg.eigh(S)
    if w[0] <= 0:
        raise GeometryError("shape matrix not positive definite")
    a, b = float(w[1]), float(w[0])
    angle = 0.0 if a == b else math.atan2(V[1, 1], V[0, 1])
    if angle > math.pi / 2:
        angle -= math.pi
    elif angle <= -math.pi / 2:
        angle += math.pi
    return Ellipse(a, b, (float(cx), float(cy)), angle)


def best_fit_ellipse(domain: PerturbedDomain, norm_order: int = 2, radius: float = 1e-2,
                     K_max: int = 32, restarts: int = 3, seed: int = 0) -> BestFit:
    """Ellipse within distance 2*radius of the frame minimising the weighted residual norm.

    The ellipse is parametrised by its center and the symmetric shape matrix S
    (ellipse = center + S * circle), which stays smooth through circles.
    Levenberg-Marquardt runs on the weighted coefficient vector from the frame
    and from ``restarts`` seeded perturbations of it; if none of them ends in
    the ball, a penalised Nelder-Mead search takes over.
    """
    frame = domain.frame
    S0 = frame.shape_matrix()
    p0 = np.array([frame.center[0], frame.center[1], S0[0, 0], S0[0, 1], S0[1, 1]])
    ball = 2 * radius
    k = np.arange(1, K_max + 1, dtype=float)
    sqrt_w = np.sqrt(np.maximum(1.0, k ** (2 * norm_order)))

    def residual_vector(p):
        E = _ellipse_from_params(p)
        r = reframe_perturbation(domain, E, K_max)
        return np.concatenate([[r.mean], sqrt_w * r.cos, sqrt_w * r.sin]), E, r

    def distance(E):
        return frame_distance(frame, E, samples=256)

    def objective(p):
        try:
            vec, E, _ = residual_vector(p)
            d = distance(E)
        except GeometryError:
            return 1e6
        val = float(vec @ vec)
        if d > ball:
            val += 1e3 * (1.0 + val) * ((d - ball) / ball) ** 2
        return val

    input_vec, _, input_res = residual_vector(p0)
    input_val = float(input_vec @ input_vec)
    rng = np.random.default_rng(seed)
    step = max(radius, 1e-8 * frame.a)
    starts = [p0] + [p0 + 0.1 * step * rng.standard_normal(5) for _ in range(restarts)]
    best_p, best_val = p0, input_val
    for start in starts:
        try:
            # the residual bottoms out at root-solve noise, so tighter tolerances only burn evaluations
            ls = least_squares(lambda p: residual_vector(p)[0], start, method="lm",
                               xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=120)
            cand = ls.x
            val = float(residual_vector(cand)[0] @ residual_vector(cand)[0])
            if val < best_val and distance(_ellipse_from_params(cand)) <= ball:
                best_p, best_val = cand, val
        except GeometryError:
            continue

    if best_p is p0 and input_val > 0:
        simplex = [p0] + [p0 + step * np.eye(5)[j] for j in range(5)]
        res = minimize(objective, p0, method="Nelder-Mead",
                       options={"initial_simplex": np.array(simplex), "xatol": 1e-13, "fatol": 1e-30,
                                "maxiter": 2000, "maxfev": 4000})
        if res.fun < best_val and distance(_ellipse_from_params(res.x)) <= ball:
            best_p = res.x

    vec, E, r = residual_vector(best_p)
    if float(vec @ vec) > input_val:
        E, r, vec = frame, input_res, input_vec
    d = distance(E) if E != frame else 0.0
    return BestFit(E, r, math.sqrt(float(vec @ vec)), math.sqrt(input_val), d, d >= ball * (1 - 1e-3))
