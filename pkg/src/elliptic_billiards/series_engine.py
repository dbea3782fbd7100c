"""Exact expansions of the action-angle parametrisation in powers of kappa^2.

The amplitude ``phi = am(2 K theta / pi; kappa)`` solves ``F(phi) = A theta``
with ``A = 2 K / pi``.  Writing ``F(phi) = A phi + G(phi)`` where ``G`` is a
sine series, ``phi = theta + Delta`` with ``Delta = -G(theta + Delta) / A``.
Everything is a truncated power series in ``m = kappa^2`` whose coefficients
are trigonometric polynomials with rational coefficients, so iterating the
fixed point ``N`` times gives ``phi_1 .. phi_N`` exactly.

Two angle conventions are supported.  ``"am"`` expands the Jacobi amplitude
itself.  ``"vertex"`` measures the elliptic angle from the major-axis vertex,
``phi = pi/2 + am(2 K theta / pi - K)``, which is the parametrisation in which
the billiard in the ellipse is a rotation; it flips the sign of every harmonic
``2l`` with ``l`` odd.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import DomainError

CONVENTIONS = ("am", "vertex")
MAX_ORDER = 12


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class RationalTrigPoly:
    """Finite sum of c_n cos(n t) and s_n sin(n t), n >= 0, with rational coefficients."""

    __slots__ = ("cos", "sin")

    def __init__(self, cos: dict | None = None, sin: dict | None = None):
        self.cos: dict[int, Fraction] = {}
        self.sin: dict[int, Fraction] = {}
        for n, v in (cos or {}).items():
            self._add_cos(n, _frac(v))
        for n, v in (sin or {}).items():
            self._add_sin(n, _frac(v))

    # canonical accumulation: cos(-n) = cos(n), sin(-n) = -sin(n), sin(0) = 0
    def _add_cos(self, n: int, v: Fraction) -> None:
        n = abs(n)
        if v:
            new = self.cos.get(n, 0) + v
            if new:
                self.cos[n] = new
            else:
                self.cos.pop(n, None)

    def _add_sin(self, n: int, v: Fraction) -> None:
        if n == 0 or not v:
            return
        if n < 0:
            n, v = -n, -v
        new = self.sin.get(n, 0) + v
        if new:
            self.sin[n] = new
        else:
            self.sin.pop(n, None)

    @classmethod
    def constant(cls, v) -> "RationalTrigPoly":
        return cls(cos={0: v})

    def copy(self) -> "RationalTrigPoly":
        out = RationalTrigPoly()
        out.cos, out.sin = dict(self.cos), dict(self.sin)
        return out

    def is_zero(self) -> bool:
        return not self.cos and not self.sin

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __eq__(self, other) -> bool:
        return isinstance(other, RationalTrigPoly) and self.cos == other.cos and self.sin == other.sin

    def __hash__(self):
        return hash((frozenset(self.cos.items()), frozenset(self.sin.items())))

    def __add__(self, other: "RationalTrigPoly") -> "RationalTrigPoly":
        out = self.copy()
        for n, v in other.cos.items():
            out._add_cos(n, v)
        for n, v in other.sin.items():
            out._add_sin(n, v)
        return out

    def __neg__(self) -> "RationalTrigPoly":
        return self.scale(-1)

    def __sub__(self, other: "RationalTrigPoly") -> "RationalTrigPoly":
        return self + (-other)

    def scale(self, c) -> "RationalTrigPoly":
        c = _frac(c)
        out = RationalTrigPoly()
        if c:
            out.cos = {n: v * c for n, v in self.cos.items()}
            out.sin = {n: v * c for n, v in self.sin.items()}
        return out

    def __mul__(self, other):
        if not isinstance(other, RationalTrigPoly):
            return self.scale(other)
        out = RationalTrigPoly()
        half = Fraction(1, 2)
        for a, x in self.cos.items():
            for b, y in other.cos.items():
                v = half * x * y
                out._add_cos(a - b, v)
                out._add_cos(a + b, v)
            for b, y in other.sin.items():
                v = half * x * y
                out._add_sin(a + b, v)
                out._add_sin(b - a, v)
        for a, x in self.sin.items():
            for b, y in other.cos.items():
                v = half * x * y
                out._add_sin(a + b, v)
                out._add_sin(a - b, v)
            for b, y in other.sin.items():
                v = half * x * y
                out._add_cos(a - b, v)
                out._add_cos(a + b, -v)
        return out

    __rmul__ = __mul__

    def derivative(self, order: int = 1) -> "RationalTrigPoly":
        out = self
        for _ in range(order):
            nxt = RationalTrigPoly()
            for n, v in out.cos.items():
                nxt._add_sin(n, -n * v)
            for n, v in out.sin.items():
                nxt._add_cos(n, n * v)
            out = nxt
        return out

    def harmonics(self) -> set[int]:
        return set(self.cos) | set(self.sin)

    def max_harmonic(self) -> int:
        h = self.harmonics()
        return max(h) if h else 0

    def flip_odd_half_harmonics(self) -> "RationalTrigPoly":
        """Shift t -> t - pi/2 for polynomials in even harmonics: n = 2l picks up (-1)^l."""
        out = RationalTrigPoly()
        for n, v in self.cos.items():
            out._add_cos(n, v if (n // 2) % 2 == 0 else -v)
        for n, v in self.sin.items():
            out._add_sin(n, v if (n // 2) % 2 == 0 else -v)
        return out

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for n, v in self.cos.items():
            out = out + float(v) * np.cos(n * t)
        for n, v in self.sin.items():
            out = out + float(v) * np.sin(n * t)
        return out

    def terms(self) -> list[tuple[int, str, Fraction]]:
        rows = [(n, "cos", v) for n, v in self.cos.items()] + [(n, "sin", v) for n, v in self.sin.items()]
        return sorted(rows, key=lambda r: (r[0], r[1]))

    def to_json(self) -> list[dict]:
        return [{"harm": n, "fn": fn, "num": str(v.numerator), "den": str(v.denominator)} for n, fn, v in self.terms()]

    def __repr__(self) -> str:
        parts = [f"{v}*{fn}({n}t)" if n else f"{v}" for n, fn, v in self.terms()]
        return " + ".join(parts) if parts else "0"


# ----------------------------------------------------------------------------
# truncated power series in m with trig-polynomial coefficients

Series = list  # list[RationalTrigPoly], index = power of m


def _zero_series(N: int) -> Series:
    return [RationalTrigPoly() for _ in range(N + 1)]


def _series_mul(x: Series, y: Series, N: int) -> Series:
    out = _zero_series(N)
    for i, xi in enumerate(x[:N + 1]):
        if xi.is_zero():
            continue
        for j, yj in enumerate(y[:N + 1 - i]):
            if not yj.is_zero():
                out[i + j] = out[i + j] + xi * yj
    return out


def _scalar_series_mul(c: list[Fraction], x: Series, N: int) -> Series:
    out = _zero_series(N)
    for i, ci in enumerate(c[:N + 1]):
        if not ci:
            continue
        for j, xj in enumerate(x[:N + 1 - i]):
            if not xj.is_zero():
                out[i + j] = out[i + j] + xj.scale(ci)
    return out


def _powers(delta: Series, N: int, r_max: int) -> list[Series]:
    """delta^0 .. delta^r_max, truncated at m^N."""
    out = [[RationalTrigPoly.constant(1)] + [RationalTrigPoly() for _ in range(N)]]
    for _ in range(r_max):
        out.append(_series_mul(out[-1], delta, N))
    return out


def _compose(f: Series, delta_powers: list[Series], N: int) -> Series:
    """f(theta + Delta) = sum_r f^(r)(theta) Delta^r / r!, all truncated at m^N."""
    out = _zero_series(N)
    for r, dp in enumerate(delta_powers):
        coef = Fraction(1, math.factorial(r))
        deriv = [fi.derivative(r).scale(coef) if not fi.is_zero() else fi for fi in f]
        term = _series_mul(deriv, dp, N)
        out = [a + b for a, b in zip(out, term)]
    return out


def _central(n: int) -> Fraction:
    """binom(2n, n) / 4^n, the coefficients of (1 - x)^(-1/2)."""
    return Fraction(math.comb(2 * n, n), 4**n)


def _A_series(N: int) -> list[Fraction]:
    """2 K(kappa) / pi as a power series in m = kappa^2."""
    return [_central(n) ** 2 for n in range(N + 1)]


def _inverse_scalar_series(c: list[Fraction], N: int) -> list[Fraction]:
    inv = [Fraction(1) / c[0]]
    for n in range(1, N + 1):
        inv.append(-sum(c[i] * inv[n - i] for i in range(1, n + 1)) / c[0])
    return inv


def _G_series(N: int) -> Series:
    """F(phi; kappa) - A phi as a series in m with sine-polynomial coefficients.

    sin^(2n) t = 4^-n [binom(2n, n) + 2 sum_l (-1)^l binom(2n, n - l) cos(2 l t)].
    """
    out = _zero_series(N)
    for n in range(1, N + 1):
        scale = _central(n) * Fraction(2, 4**n)
        terms = {2 * l: scale * (-1) ** l * Fraction(math.comb(2 * n, n - l), 2 * l) for l in range(1, n + 1)}
        out[n] = RationalTrigPoly(sin=terms)
    return out


def _check_order(N: int) -> None:
    if not isinstance(N, (int, np.integer)) or not (1 <= N <= MAX_ORDER):
        raise DomainError(f"expansion order must be an integer in [1, {MAX_ORDER}], got {N!r}")


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise DomainError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


@lru_cache(maxsize=None)
def _am_expansion(N: int) -> tuple[RationalTrigPoly, ...]:
    A_inv = _inverse_scalar_series(_A_series(N), N)
    G = _G_series(N)
    delta = _zero_series(N)
    for it in range(1, N + 1):
        # after iteration i the coefficients up to m^i are final
        comp = _compose(G, _powers(delta, it, it), it)
        new = _scalar_series_mul(A_inv, comp, it)
        delta = [-t for t in new] + [RationalTrigPoly() for _ in range(N - it)]
    return tuple(delta[1:])


@dataclass(frozen=True)
class ExpansionSeries:
    """phi(theta) = theta + sum_j coeffs[j-1](theta) kappa^(2j) + O(kappa^(2N+2))."""

    coeffs: tuple[RationalTrigPoly, ...]
    convention: str = "am"

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, j: int) -> RationalTrigPoly:
        if j < 1:
            raise IndexError("terms are indexed from 1")
        return self.coeffs[j - 1]

    def evaluate(self, theta, kappa: float):
        theta = np.asarray(theta, dtype=float)
        m = kappa * kappa
        return theta + sum(c(theta) * m ** (j + 1) for j, c in enumerate(self.coeffs))

    def to_json(self) -> dict:
        return {"convention": self.convention,
                "phi": [{"j": j + 1, "terms": c.to_json()} for j, c in enumerate(self.coeffs)]}


def expand_action_angle(N: int, convention: str = "am") -> ExpansionSeries:
    """phi_1 .. phi_N of the action-angle expansion, exactly."""
    _check_order(N)
    _check_convention(convention)
    coeffs = _am_expansion(int(N))
    if convention == "vertex":
        coeffs = tuple(c.flip_odd_half_harmonics() for c in coeffs)
    return ExpansionSeries(coeffs, convention)


def _as_trig_poly(mu) -> RationalTrigPoly:
    if isinstance(mu, RationalTrigPoly):
        return mu
    # a FourierSeries; binary floats convert exactly
    cos = {0: Fraction(mu.mean)}
    cos.update({k + 1: Fraction(float(v)) for k, v in enumerate(mu.cos)})
    sin = {k + 1: Fraction(float(v)) for k, v in enumerate(mu.sin)}
    return RationalTrigPoly(cos, sin)


def compose_mu_expansion(mu, N: int, convention: str = "am") -> list[RationalTrigPoly]:
    """P_1 .. P_N with mu(phi(theta)) = mu(theta) + sum_j P_j(theta) kappa^(2j) + O(kappa^(2N+2))."""
    _check_order(N)
    mu = _as_trig_poly(mu)
    delta = [RationalTrigPoly()] + list(expand_action_angle(N, convention).coeffs)
    f = [mu] + [RationalTrigPoly() for _ in range(N)]
    out = _compose(f, _powers(delta, N, N), N)
    return out[1:]


# ----------------------------------------------------------------------------
# xi polynomials

@dataclass(frozen=True)
class XiPolynomial:
    """xi_{j,l}(k) = sum_i coeffs[i] k^i."""

    j: int
    l: int
    coeffs: tuple[Fraction, ...]

    def __call__(self, k):
        if isinstance(k, (int, Fraction)):
            return sum((c * Fraction(k) ** i for i, c in enumerate(self.coeffs)), Fraction(0))
        return sum(float(c) * k**i for i, c in enumerate(self.coeffs))

    @property
    def degree(self) -> int:
        nz = [i for i, c in enumerate(self.coeffs) if c]
        return max(nz) if nz else -1

    def only_even_powers(self) -> bool:
        return all(c == 0 for i, c in enumerate(self.coeffs) if i % 2)

    def to_json(self) -> dict:
        return {"j": self.j, "l": self.l, "poly": [str(c) for c in self.coeffs]}


@lru_cache(maxsize=None)
def _xi_table(N: int, convention: str) -> dict[tuple[int, int], XiPolynomial]:
    delta = [RationalTrigPoly()] + list(expand_action_angle(N, convention).coeffs)
    powers = _powers(delta, N, N)
    table: dict[tuple[int, int], list[Fraction]] = {
        (j, l): [Fraction(0)] * (j + 1) for j in range(1, N + 1) for l in range(-j, j + 1)
    }
    for r in range(1, N + 1):
        inv_fact = Fraction(1, math.factorial(r))
        for j in range(r, N + 1):
            d = powers[r][j]
            if r % 2 == 0:
                # mu^(r) = s k^r cos(k t) against a cosine polynomial
                if d.sin:
                    raise AssertionError("even power of a sine series must be a cosine series")
                s = 1 if r % 4 == 0 else -1
                for n, c in d.cos.items():
                    l = n // 2
                    if l == 0:
                        table[(j, 0)][r] += s * c * inv_fact
                    else:
                        table[(j, l)][r] += s * c * inv_fact / 2
                        table[(j, -l)][r] += s * c * inv_fact / 2
            else:
                # mu^(r) = t k^r sin(k t); sin(k t) sin(n t) = (cos((k-n)t) - cos((k+n)t)) / 2
                if d.cos:
                    raise AssertionError("odd power of a sine series must be a sine series")
                t = -1 if r % 4 == 1 else 1
                for n, c in d.sin.items():
                    l = n // 2
                    table[(j, -l)][r] += t * c * inv_fact / 2
                    table[(j, l)][r] -= t * c * inv_fact / 2
    return {key: XiPolynomial(key[0], key[1], tuple(v)) for key, v in table.items()}


def xi_polynomials(N: int, convention: str = "am") -> list[XiPolynomial]:
    """All xi_{j,l}, 1 <= j <= N, |l| <= j, as exact polynomials in the mode index k.

    For mu = cos(k t) (or sin(k t)), P_j = sum_l xi_{j,l}(k) cos((k + 2l) t)
    (respectively sin); the index k is kept formal, so each r-th derivative of
    the mode contributes k^r.
    """
    _check_order(N)
    _check_convention(convention)
    table = _xi_table(int(N), convention)
    return [table[(j, l)] for j in range(1, N + 1) for l in range(-j, j + 1)]


def xi(j: int, l: int, convention: str = "am") -> XiPolynomial:
    if not (1 <= j <= MAX_ORDER and abs(l) <= j):
        raise DomainError(f"need 1 <= j <= {MAX_ORDER} and |l| <= j")
    return _xi_table(max(j, 1), convention)[(j, l)]


def _ps_mul(x: list[Fraction], y: list[Fraction], N: int) -> list[Fraction]:
    out = [Fraction(0)] * (N + 1)
    for i, xi_ in enumerate(x):
        if xi_:
            for j in range(min(len(y), N + 1 - i)):
                out[i + j] += xi_ * y[j]
    return out


def _ps_exp(x: list[Fraction], N: int) -> list[Fraction]:
    """exp of a power series without constant term, via E' = x' E."""
    out = [Fraction(1)] + [Fraction(0)] * N
    for n in range(1, N + 1):
        out[n] = sum(i * x[i] * out[n - i] for i in range(1, n + 1)) / n
    return out


@lru_cache(maxsize=None)
def _top_harmonic_series(N: int) -> tuple[Fraction, ...]:
    """d_j, the coefficient of sin(2 j t) in phi_j (am convention), j = 0..N.

    Only the top harmonic of every factor can reach harmonic 2j at order j, so
    with z = m e^(2it) the relation F(phi) = A theta collapses to the scalar
    series identity delta(z) = -sum_n g_n z^n exp(n delta(z)).
    """
    g = [Fraction(0)] + [_central(n) * Fraction(2, 4**n) * (-1) ** n / (2 * n) for n in range(1, N + 1)]
    delta = [Fraction(0)] * (N + 1)
    for it in range(1, N + 1):
        nxt = [Fraction(0)] * (N + 1)
        for n in range(1, it + 1):
            e = _ps_exp([n * d for d in delta[: it + 1]], it - n)
            for i, v in enumerate(e):
                nxt[n + i] -= g[n] * v
        delta = nxt[: it + 1] + [Fraction(0)] * (N - it)
    return tuple(delta)


def xi_diagonal(j: int, convention: str = "am") -> XiPolynomial:
    """xi_{j,j}(k) = [z^j] exp(k delta(z) / 2) for any j >= 1.

    Independent of the full expansion and not limited by its order cap.
    """
    _check_convention(convention)
    if not isinstance(j, (int, np.integer)) or j < 1:
        raise DomainError(f"order must be a positive integer, got {j!r}")
    j = int(j)
    d = list(_top_harmonic_series(j))
    if convention == "vertex":
        d = [v * (-1) ** i for i, v in enumerate(d)]
    # exp(k D) with D = delta / 2: coefficient of z^j is sum_r k^r [z^j] D^r / r!
    D = [v / 2 for v in d]
    coeffs = [Fraction(0)] * (j + 1)
    power = [Fraction(1)] + [Fraction(0)] * j
    for r in range(1, j + 1):
        power = _ps_mul(power, D, j)
        coeffs[r] = power[j] / math.factorial(r)
    return XiPolynomial(j, j, tuple(coeffs))


# ----------------------------------------------------------------------------
# Fourier-coefficient conditions

@dataclass(frozen=True)
class FourierConditionRow:
    """Coefficients multiplying a_n (n = q - 2l) in the q-th Fourier condition.

    ``exact`` uses the weight kappa^2 = c^2 / (a^2 - lam^2) of the p/q caustic,
    ``leading`` replaces it by e^2 / cos^2(p pi / q).  ``symbolic`` lists, per
    mode, the pairs (n, xi_{n,l}(q - 2l)) so any weight can be substituted.
    """

    p: int
    q: int
    N: int
    modes: tuple[int, ...]
    symbolic: dict
    exact: dict
    leading: dict
    weight: float
    leading_weight: float
    remainder_scale: float


def fourier_condition_row(p: int, q: int, N: int, frame, convention: str = "am") -> FourierConditionRow:
    from .billiard_dynamics import lambda_from_rotation  # local import keeps layers acyclic

    if math.gcd(p, q) != 1 or not (0 < 2 * p < q):
        raise DomainError(f"need coprime 0 < p/q < 1/2, got {p}/{q}")
    if not (0 <= N <= MAX_ORDER) or q <= 2 * N:
        raise DomainError(f"need 0 <= N <= {MAX_ORDER} and q > 2N, got q={q}, N={N}")
    lam = lambda_from_rotation(frame, p / q)
    weight = frame.c**2 / ((frame.a - lam) * (frame.a + lam))
    lead = frame.e**2 / math.cos(math.pi * p / q) ** 2
    table = _xi_table(max(N, 1), convention)
    modes, symbolic, exact, leading = [], {}, {}, {}
    for l in range(N, -N - 1, -1):
        n_mode = q - 2 * l
        terms = [(n, table[(n, l)](n_mode)) for n in range(max(abs(l), 1), N + 1)]
        terms = [(n, v) for n, v in terms if v]
        if l == 0:
            terms = [(0, Fraction(1))] + terms
        modes.append(n_mode)
        symbolic[n_mode] = terms
        exact[n_mode] = sum(float(v) * weight**n for n, v in terms)
        leading[n_mode] = sum(float(v) * lead**n for n, v in terms)
    return FourierConditionRow(p, q, N, tuple(modes), symbolic, exact, leading, weight, lead, weight ** (N + 1))


def fraction_str(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)


def trig_poly_from_terms(terms: Iterable[tuple[int, str, Fraction]]) -> RationalTrigPoly:
    out = RationalTrigPoly()
    for n, fn, v in terms:
        if fn == "cos":
            out._add_cos(n, _frac(v))
        elif fn == "sin":
            out._add_sin(n, _frac(v))
        else:
            raise DomainError(f"unknown function {fn!r}")
    return out
