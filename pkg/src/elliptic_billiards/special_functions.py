"""Legendre elliptic integral of the first kind and the Jacobi amplitude.

Everything is built on the arithmetic-geometric mean.  ``F`` uses the descending
Landen (Gauss) transformation with the amplitude doubled at every step, ``am``
uses the AGM with backward recovery of the amplitude followed by a Newton
polish on ``F(am) = u``.  Scalar functions take an optional ``dps`` argument;
when given, the computation runs in mpmath at that many decimal digits and an
``mpmath.mpf`` is returned.  The ``*_array`` variants are vectorised numpy
versions of the same algorithms for a scalar modulus.
"""
from __future__ import annotations

import math
from types import SimpleNamespace

import mpmath
import numpy as np

from .errors import DomainError, NumericError

_MAX_ITER = 60


def _float_ops():
    return SimpleNamespace(
        pi=math.pi, sin=math.sin, cos=math.cos, sqrt=math.sqrt, asin=math.asin,
        atan2=math.atan2, num=float, eps=2.0**-52,
    )


def _mp_ops():
    mp = mpmath.mp
    return SimpleNamespace(
        pi=+mp.pi, sin=mpmath.sin, cos=mpmath.cos, sqrt=mpmath.sqrt, asin=mpmath.asin,
        atan2=mpmath.atan2, num=mpmath.mpf, eps=mpmath.mpf(2) ** (-mp.prec),
    )


def _check_modulus(k) -> None:
    if not _isfinite(k) or k < 0 or k >= 1:
        raise DomainError(f"modulus k must satisfy 0 <= k < 1, got {k!r}")


def _isfinite(x) -> bool:
    if isinstance(x, mpmath.mpf):
        return bool(mpmath.isfinite(x))
    try:
        return math.isfinite(x)
    except TypeError:
        return False


def _agm(a, b, ops):
    for _ in range(_MAX_ITER):
        if abs(a - b) <= 4 * ops.eps * a:
            return a
        a, b = (a + b) / 2, ops.sqrt(a * b)
    raise NumericError("AGM did not converge", float(abs(a - b)))


def _complete_K(k, ops):
    kc = ops.sqrt((1 - k) * (1 + k))
    return ops.pi / (2 * _agm(ops.num(1), kc, ops))


def _F_reduced(phi, k, ops):
    # Gauss transformation: tan(phi_{n+1} - phi_n) = (b_n/a_n) tan(phi_n), written so
    # that no quadrant bookkeeping is needed.
    a = ops.num(1)
    b = ops.sqrt((1 - k) * (1 + k))
    scale = 1
    for _ in range(_MAX_ITER):
        if abs(a - b) <= 4 * ops.eps * a:
            return phi / (scale * a)
        s, c = ops.sin(phi), ops.cos(phi)
        phi = 2 * phi - ops.atan2((a - b) * s * c, a * c * c + b * s * s)
        a, b = (a + b) / 2, ops.sqrt(a * b)
        scale *= 2
    raise NumericError("Landen iteration for F did not converge", float(abs(a - b)))


def _F(phi, k, ops):
    n = int(round(float(phi / ops.pi)))
    reduced = phi - n * ops.pi
    value = _F_reduced(reduced, k, ops)
    if n:
        value += 2 * n * _complete_K(k, ops)
    return value


def _am(u, k, ops):
    K = _complete_K(k, ops)
    n = int(round(float(u / (2 * K))))
    ur = u - 2 * n * K
    # descending AGM, remembering c_n / a_n
    a = ops.num(1)
    b = ops.sqrt((1 - k) * (1 + k))
    ratios = []
    for _ in range(_MAX_ITER):
        c = (a - b) / 2
        if abs(a - b) <= 4 * ops.eps * a:
            break
        a, b = (a + b) / 2, ops.sqrt(a * b)
        ratios.append(c / a)
    else:
        raise NumericError("AGM for am did not converge", float(abs(a - b)))
    phi = (2 ** len(ratios)) * a * ur
    for r in reversed(ratios):
        phi = (phi + ops.asin(r * ops.sin(phi))) / 2
    # Newton polish on F(phi) = ur
    k2 = k * k
    resid = None
    for _ in range(8):
        resid = _F_reduced(phi, k, ops) - ur
        step = resid * ops.sqrt(1 - k2 * ops.sin(phi) ** 2)
        phi -= step
        if abs(step) <= 8 * ops.eps * max(1, abs(phi)):
            break
    else:
        raise NumericError("amplitude inversion did not converge", float(abs(resid)))
    return phi + n * ops.pi


def incomplete_F(phi, k, dps: int | None = None):
    """F(phi; k) = integral_0^phi dt / sqrt(1 - k^2 sin^2 t)."""
    _check_modulus(k)
    if not _isfinite(phi):
        raise DomainError(f"amplitude must be finite, got {phi!r}")
    if dps is None:
        return _F(float(phi), float(k), _float_ops())
    with mpmath.workdps(dps):
        ops = _mp_ops()
        return +_F(ops.num(phi), ops.num(k), ops)


def complete_K(k, dps: int | None = None):
    """K(k) = F(pi/2; k)."""
    _check_modulus(k)
    if dps is None:
        return _complete_K(float(k), _float_ops())
    with mpmath.workdps(dps):
        ops = _mp_ops()
        return +_complete_K(ops.num(k), ops)


def jacobi_am_sn_cn(u, k, dps: int | None = None):
    """Return (am, sn, cn) with F(am; k) = u."""
    _check_modulus(k)
    if not _isfinite(u):
        raise DomainError(f"argument must be finite, got {u!r}")
    if dps is None:
        ops = _float_ops()
        phi = _am(float(u), float(k), ops)
        return phi, math.sin(phi), math.cos(phi)
    with mpmath.workdps(dps):
        ops = _mp_ops()
        phi = _am(ops.num(u), ops.num(k), ops)
        return +phi, mpmath.sin(phi), mpmath.cos(phi)


# ----------------------------------------------------------------------------
# vectorised versions (binary64, scalar modulus)

def _agm_steps(k: float):
    a, b = 1.0, math.sqrt((1.0 - k) * (1.0 + k))
    steps = []
    while abs(a - b) > 4 * 2.0**-52 * a:
        steps.append((a, b))
        a, b = (a + b) / 2, math.sqrt(a * b)
        if len(steps) > _MAX_ITER:
            raise NumericError("AGM did not converge", abs(a - b))
    return steps, a


def incomplete_F_array(phi, k: float) -> np.ndarray:
    """Vectorised F(phi; k) for an array of amplitudes."""
    _check_modulus(k)
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise DomainError("amplitudes must be finite")
    n = np.round(phi / math.pi)
    x = phi - n * math.pi
    steps, a_final = _agm_steps(k)
    for a, b in steps:
        s, c = np.sin(x), np.cos(x)
        x = 2 * x - np.arctan2((a - b) * s * c, a * c * c + b * s * s)
    return x / (2 ** len(steps) * a_final) + 2 * n * complete_K(k)


def jacobi_am_array(u, k: float) -> np.ndarray:
    """Vectorised Jacobi amplitude."""
    _check_modulus(k)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("arguments must be finite")
    K = complete_K(k)
    n = np.round(u / (2 * K))
    ur = u - 2 * n * K
    steps, a_final = _agm_steps(k)
    ratios = [((a - b) / 2) / ((a + b) / 2) for a, b in steps]
    phi = 2 ** len(steps) * a_final * ur
    for r in reversed(ratios):
        phi = (phi + np.arcsin(r * np.sin(phi))) / 2
    k2 = k * k
    for _ in range(8):
        resid = incomplete_F_array(phi, k) - ur
        step = resid * np.sqrt(1 - k2 * np.sin(phi) ** 2)
        phi = phi - step
        if np.all(np.abs(step) <= 8 * 2.0**-52 * np.maximum(1.0, np.abs(phi))):
            break
    else:
        raise NumericError("amplitude inversion did not converge", float(np.max(np.abs(resid))))
    return phi + n * math.pi


def jacobi_sn_cn_dn_array(u, k: float):
    """Vectorised (sn, cn, dn)."""
    phi = jacobi_am_array(u, k)
    sn, cn = np.sin(phi), np.cos(phi)
    return sn, cn, np.sqrt(1 - (k * sn) ** 2)
