"""Graded linear systems for the leading Fourier conditions and their determinants.

Each row is the leading part of the condition attached to a rotation number
``w = p/q``: the unknown ``a_q`` with coefficient one, and every lower mode
``a_n`` of the same parity with coefficient ``xi_{j,j}(n) (e / cos(w pi))^(2j)``
where ``j = (q - n) / 2`` is the column distance from the unit.  Modes above
``q`` do not appear at leading order.

Because the e-power of entry (r, c) is ``2 (u_r - c)`` with ``u_r`` the unit
column of row r, the determinant is a single monomial: ``det M(e) =
e^(2 (sum u - sum c)) det C`` with C the e-free coefficient matrix.  The
determinant of C is evaluated in extended precision and enclosed in an
interval to certify its sign.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np
from mpmath import iv
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, SingularityError, StructuralError
from .series_engine import xi_diagonal

DEFAULT_DPS = 50


@dataclass(frozen=True)
class SymbolicEntry:
    """``zero``, ``one``, or ``xi_value * e^(2j) / cos^(2j)(w pi)``."""

    kind: str
    xi_value: Fraction = Fraction(0)
    j: int = 0
    w: Fraction = Fraction(0)

    def value(self, e, ctx=mpmath.mp):
        if self.kind == "zero":
            return ctx.mpf(0)
        if self.kind == "one":
            return ctx.mpf(1)
        x = ctx.mpf(self.xi_value.numerator) / self.xi_value.denominator
        c = ctx.cos(ctx.pi * self.w.numerator / self.w.denominator)
        return x * (ctx.mpf(e) / c) ** (2 * self.j)

    def coefficient(self, ctx=mpmath.mp):
        """The entry with e = 1 removed from the grading."""
        return self.value(1, ctx)

    def label(self) -> str:
        if self.kind != "scaled":
            return self.kind
        return f"{self.xi_value}*e^{2 * self.j}/cos^{2 * self.j}({self.w}pi)"


@dataclass(frozen=True)
class RowSpec:
    target: int
    w: Fraction

    @property
    def rotation(self) -> tuple[int, int]:
        return (self.w.numerator, self.w.denominator)


@dataclass
class NondegMatrix:
    name: str
    q0: int
    parity: str
    m: int
    modes: tuple[int, ...]
    row_specs: tuple[RowSpec, ...]
    rows: list[list[SymbolicEntry]] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.rows)

    @property
    def row_labels(self) -> list[tuple[int, int]]:
        return [r.rotation for r in self.row_specs]

    @property
    def unit_columns(self) -> list[int]:
        return [[e.kind for e in row].index("one") for row in self.rows]

    def order_matrix(self) -> np.ndarray:
        """e-power of every entry; -1 marks a structural zero."""
        out = np.full((self.size, self.size), -1, dtype=int)
        for r, row in enumerate(self.rows):
            for c, ent in enumerate(row):
                if ent.kind == "one":
                    out[r, c] = 0
                elif ent.kind == "scaled" and ent.xi_value != 0:
                    out[r, c] = 2 * ent.j
        return out

    def numeric(self, e, ctx=mpmath.mp):
        return [[ent.value(e, ctx) for ent in row] for row in self.rows]

    def coefficients(self, ctx=mpmath.mp):
        return [[ent.coefficient(ctx) for ent in row] for row in self.rows]

    def permuted_rows(self, perm) -> "NondegMatrix":
        perm = list(perm)
        return NondegMatrix(self.name, self.q0, self.parity, self.m, self.modes,
                            tuple(self.row_specs[i] for i in perm), [self.rows[i] for i in perm])

    def check_structure(self) -> None:
        n = self.size
        if any(len(row) != n for row in self.rows):
            raise StructuralError(f"{self.name}: matrix is not square")
        for r, row in enumerate(self.rows):
            kinds = [e.kind for e in row]
            if kinds.count("one") != 1:
                raise StructuralError(f"{self.name}: row {r} must contain exactly one unit")
            u = kinds.index("one")
            if any(k != "zero" for k in kinds[u + 1:]):
                raise StructuralError(f"{self.name}: row {r} has entries right of its unit")
            for c, ent in enumerate(row[:u]):
                if ent.kind == "scaled" and ent.j != u - c:
                    raise StructuralError(f"{self.name}: entry ({r}, {c}) has the wrong order")

    def to_json(self) -> dict:
        return {
            "matrix": self.name, "q0": self.q0, "parity": self.parity, "m": self.m,
            "modes": list(self.modes), "size": self.size,
            "rows": [{"rotation": f"{s.w}", "entries": [
                {"kind": e.kind, "xi": str(e.xi_value), "j": e.j} for e in row]}
                for s, row in zip(self.row_specs, self.rows)],
        }


def _assemble(name: str, q0: int, parity: str, m: int, modes, row_specs) -> NondegMatrix:
    modes = tuple(modes)
    step = modes[1] - modes[0] if len(modes) > 1 else 2
    if len(modes) != len(row_specs):
        raise StructuralError(f"{name}: {len(row_specs)} rows for {len(modes)} unknowns")
    rows = []
    for spec in row_specs:
        if spec.target not in modes:
            raise StructuralError(f"{name}: row target a_{spec.target} is not an unknown")
        u = modes.index(spec.target)
        row = []
        for c, mode in enumerate(modes):
            if c < u:
                j = (spec.target - mode) // step
                row.append(SymbolicEntry("scaled", xi_diagonal(j)(mode), j, spec.w))
            elif c == u:
                row.append(SymbolicEntry("one"))
            else:
                row.append(SymbolicEntry("zero"))
        rows.append(row)
    M = NondegMatrix(name, q0, parity, m, modes, tuple(row_specs), rows)
    M.check_structure()
    return M


def _half(q0: int) -> int:
    if not isinstance(q0, (int, np.integer)) or q0 < 4 or q0 % 2:
        raise DomainError(f"q0 must be an even integer >= 4, got {q0!r}")
    return int(q0) // 2


def build_odd_matrix(q0: int, m: int) -> NondegMatrix:
    """System for the odd modes a_{2m-1} .. a_{2(3k0-m)+1}, q0 = 2 k0, 2 <= m <= k0."""
    k0 = _half(q0)
    if not (2 <= m <= k0):
        raise DomainError(f"m must lie in [2, {k0}], got {m}")
    modes = range(2 * m - 1, 2 * (3 * k0 - m) + 2, 2)
    specs = [RowSpec(2 * k + 1, Fraction(1, 2 * k + 1)) for k in range(k0, 2 * k0)]
    for k in range(2 * k0, 3 * k0 - m + 1):
        specs += [RowSpec(2 * k + 1, Fraction(1, 2 * k + 1)), RowSpec(2 * k + 1, Fraction(2, 2 * k + 1))]
    return _assemble(f"odd_q0{q0}_m{m}", q0, "odd", m, modes, specs)


def even_top_index(k0: int, m: int) -> int:
    """N_m = 3 k0 + 3 floor((k0 - m) / 2) + nu with nu = 1 for k0 - m even, else 2."""
    nu = 1 if (k0 - m) % 2 == 0 else 2
    return 3 * k0 + 3 * ((k0 - m) // 2) + nu


def even_count_identity(k0: int, m: int) -> bool:
    """2 floor(N_m / 3) = 3 k0 - m + 1 - alpha_m with alpha_m = N_m mod 3."""
    N = even_top_index(k0, m)
    return 2 * (N // 3) == 3 * k0 - m + 1 - N % 3


def build_even_matrix(q0: int, m: int) -> NondegMatrix:
    """System for the even modes a_{2m} .. a_{2 N_m}, q0 = 2 k0, 1 <= m <= k0."""
    k0 = _half(q0)
    if not (1 <= m <= k0):
        raise DomainError(f"m must lie in [1, {k0}], got {m}")
    N = even_top_index(k0, m)
    modes = range(2 * m, 2 * N + 1, 2)
    specs = [RowSpec(2 * k, Fraction(1, 2 * k)) for k in range(k0 + 1, 3 * k0 + 1)]
    for k in range(3 * k0 + 1, N + 1):
        specs.append(RowSpec(2 * k, Fraction(1, 2 * k)))
        if k % 3:
            specs.append(RowSpec(2 * k, Fraction(3, 2 * k)))
    return _assemble(f"even_q0{q0}_m{m}", q0, "even", m, modes, specs)


def _rows(*pairs) -> list[RowSpec]:
    return [RowSpec(t, Fraction(p, t)) for t, p in pairs]


CONCRETE_SYSTEMS: dict[str, tuple[int, list[int], list[RowSpec]]] = {
    "q3_odd": (3, [3, 5, 7], _rows((5, 1), (7, 1), (7, 2))),
    "q4_odd": (4, [3, 5, 7, 9], _rows((5, 1), (7, 1), (9, 1), (9, 2))),
    "q4_even": (4, list(range(4, 15, 2)), _rows((6, 1), (8, 1), (10, 1), (12, 1), (14, 1), (14, 3))),
    "q5_odd4": (5, [5, 7, 9, 11], _rows((7, 1), (9, 1), (11, 1), (11, 2))),
    "q5_odd6": (5, list(range(3, 14, 2)), _rows((7, 1), (9, 1), (11, 1), (11, 2), (13, 1), (13, 2))),
    "q5_even7": (5, list(range(4, 17, 2)), _rows((6, 1), (8, 1), (10, 1), (12, 1), (14, 1), (16, 1), (16, 3))),
}


def build_concrete_system(name: str) -> NondegMatrix:
    if name not in CONCRETE_SYSTEMS:
        raise DomainError(f"unknown system {name!r}; choose from {sorted(CONCRETE_SYSTEMS)}")
    q0, modes, specs = CONCRETE_SYSTEMS[name]
    return _assemble(name, q0, "concrete", 0, modes, specs)


# ----------------------------------------------------------------------------
# determinants

@contextmanager
def _iv_precision(dps: int):
    old = iv.prec
    iv.dps = dps
    try:
        yield
    finally:
        iv.prec = old


def bareiss_det(A, magnitude: Callable = abs, is_zero: Callable = lambda x: x == 0):
    """Fraction-free elimination with row pivoting on the largest ``magnitude``.

    Works for any field-like scalars (Fraction, mpf, interval).  Returns None
    when no admissible pivot exists in a column, which for exact scalars
    means the determinant vanishes and for intervals means the sign cannot
    be certified.
    """
    a = [list(row) for row in A]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        p = max(range(k, n), key=lambda i: magnitude(a[i][k]))
        if is_zero(a[p][k]):
            return None
        if p != k:
            a[k], a[p] = a[p], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
        prev = a[k][k]
    return a[n - 1][n - 1] if sign > 0 else -a[n - 1][n - 1]


def _iv_magnitude(x) -> float:
    # smallest absolute value in the enclosure; zero when the enclosure straddles 0
    if 0 in x:
        return 0.0
    return float(min(abs(mpmath.mpf(x.a)), abs(mpmath.mpf(x.b))))


def _iv_is_zero(x) -> bool:
    return 0 in x


def _mp_det(A):
    d = bareiss_det(A)
    return mpmath.mpf(0) if d is None else d


def _iv_det(A):
    d = bareiss_det(A, magnitude=_iv_magnitude, is_zero=_iv_is_zero)
    return iv.mpf([-mpmath.inf, mpmath.inf]) if d is None else d


def leibniz_det(A):
    """Permutation expansion; exponential cost, used only as an oracle."""
    import itertools

    n = len(A)
    total = 0
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        prod = 1
        for i, p in enumerate(perm):
            prod = prod * A[i][p]
            if prod == 0:
                break
        total += -prod if inv % 2 else prod
    return total


def determinant_order_range(M: NondegMatrix) -> tuple[int, int] | None:
    """Min and max total e-order over permutations with all entries nonzero."""
    orders = M.order_matrix()
    support = orders >= 0
    big = 10 * (int(orders.max()) + 1) * M.size + 1
    cost = np.where(support, orders, big)
    r, c = linear_sum_assignment(cost)
    if not support[r, c].all():
        return None
    lo = int(orders[r, c].sum())
    r, c = linear_sum_assignment(np.where(support, -orders, big))
    hi = int(orders[r, c].sum())
    return lo, hi


@dataclass(frozen=True)
class DetLeading:
    order: int
    value: mpmath.mpf
    interval: tuple[mpmath.mpf, mpmath.mpf]

    @property
    def certified_sign(self) -> int:
        lo, hi = self.interval
        if lo > 0:
            return 1
        if hi < 0:
            return -1
        return 0

    @property
    def certified(self) -> bool:
        return self.certified_sign != 0

    def to_json(self, digits: int = 17) -> dict:
        s = lambda x: mpmath.nstr(x, digits, min_fixed=1, max_fixed=0)
        return {"det_order": self.order,
                "det_coeff": {"value": s(self.value), "interval": [s(self.interval[0]), s(self.interval[1])]}}


def det_leading(M: NondegMatrix, dps: int = DEFAULT_DPS) -> DetLeading:
    """Leading monomial coefficient * e^order of det M(e)."""
    M.check_structure()
    rng = determinant_order_range(M)
    if rng is None:
        raise SingularityError(f"{M.name}: no permutation avoids the structural zeros")
    if rng[0] != rng[1]:
        raise StructuralError(f"{M.name}: permutation products have orders {rng[0]}..{rng[1]}")
    with mpmath.workdps(dps):
        value = +_mp_det(M.coefficients(mpmath.mp))
    with _iv_precision(dps):
        enc = _iv_det(M.coefficients(iv))
        # convert endpoints at the interval precision so they stay exact
        with mpmath.workprec(iv.prec):
            interval = (+mpmath.mpf(enc.a), +mpmath.mpf(enc.b))
    return DetLeading(rng[0], value, interval)


def _minor(A, i: int, j: int):
    return [row[:j] + row[j + 1:] for r, row in enumerate(A) if r != i]


@dataclass(frozen=True)
class InverseRowOrders:
    rows: tuple[int, ...]
    orders: tuple[tuple[int | None, ...], ...]
    coefficients: tuple[tuple[mpmath.mpf, ...], ...]


def inverse_row_orders(M: NondegMatrix, rows, dps: int = DEFAULT_DPS) -> InverseRowOrders:
    """e-orders of rows of M(e)^-1 (0-based row indices) through the adjugate.

    Entry (i, j) of the inverse is (-1)^(i+j) minor(j, i) / det; its order is
    the order of the minor minus that of the determinant.  An entry whose
    minor coefficient cannot be separated from zero is reported as None.
    """
    lead = det_leading(M, dps)
    if not lead.certified:
        raise SingularityError(f"{M.name}: leading determinant coefficient is not certified nonzero")
    n = M.size
    orders = M.order_matrix()
    with mpmath.workdps(dps):
        C = M.coefficients(mpmath.mp)
    with _iv_precision(dps):
        Ci = M.coefficients(iv)
    out_orders, out_coefs = [], []
    for i in rows:
        if not (0 <= i < n):
            raise DomainError(f"row index {i} outside [0, {n})")
        row_o, row_c = [], []
        for j in range(n):
            sub = orders[np.arange(n) != j][:, np.arange(n) != i]
            sub_rng = _order_range_of(sub)
            with _iv_precision(dps):
                enc = _iv_det(_minor(Ci, j, i))
            if sub_rng is None or 0 in enc:
                row_o.append(None)
                row_c.append(mpmath.mpf(0))
                continue
            if sub_rng[0] != sub_rng[1]:
                raise StructuralError(f"{M.name}: minor ({j}, {i}) is not homogeneous")
            with mpmath.workdps(dps):
                coef = (-1) ** (i + j) * _mp_det(_minor(C, j, i)) / lead.value
            row_o.append(sub_rng[0] - lead.order)
            row_c.append(+coef)
        out_orders.append(tuple(row_o))
        out_coefs.append(tuple(row_c))
    return InverseRowOrders(tuple(rows), tuple(out_orders), tuple(out_coefs))


def _order_range_of(orders: np.ndarray) -> tuple[int, int] | None:
    if orders.size == 0:
        return (0, 0)
    support = orders >= 0
    big = 10 * (int(orders.max()) + 1) * len(orders) + 1
    r, c = linear_sum_assignment(np.where(support, orders, big))
    if not support[r, c].all():
        return None
    lo = int(orders[r, c].sum())
    r, c = linear_sum_assignment(np.where(support, -orders, big))
    return lo, int(orders[r, c].sum())


def numeric_inverse_exponents(M: NondegMatrix, rows, eps=(1e-2, 1e-3), dps: int = DEFAULT_DPS):
    """Observed exponents log(|inv(e1)| / |inv(e2)|) / log(e1 / e2) for rows of M(e)^-1."""
    e1, e2 = eps
    with mpmath.workdps(dps):
        inv1 = mpmath.inverse(mpmath.matrix(M.numeric(mpmath.mpf(e1))))
        inv2 = mpmath.inverse(mpmath.matrix(M.numeric(mpmath.mpf(e2))))
        out = []
        for i in rows:
            row = []
            for j in range(M.size):
                a, b = abs(inv1[i, j]), abs(inv2[i, j])
                row.append(None if a == 0 or b == 0 else float(mpmath.log(a / b) / mpmath.log(mpmath.mpf(e1) / e2)))
            out.append(tuple(row))
    return tuple(out)


# ----------------------------------------------------------------------------
# certification sweep

@dataclass
class VerifyReport:
    q0: int
    include_m1: bool
    entries: list[dict]
    expected_count: int | None

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def all_pass(self) -> bool:
        return all(e["status"] == "PASS" for e in self.entries) and (
            self.expected_count is None or self.count == self.expected_count)

    def to_json(self) -> dict:
        return {"q0": self.q0, "include_m1": self.include_m1, "count": self.count,
                "expected_count": self.expected_count, "all_pass": self.all_pass, "matrices": self.entries}


def certify(M: NondegMatrix, dps: int = DEFAULT_DPS) -> dict:
    entry: dict = {"matrix": M.name, "size": M.size}
    checks = {}
    try:
        lead = det_leading(M, dps)
    except (StructuralError, SingularityError) as exc:
        entry.update({"det_order": None, "det_coeff": None, "status": "FAIL", "reason": str(exc)})
        return entry
    entry.update(lead.to_json())
    checks["homogeneous"] = True
    checks["sign_certified"] = lead.certified
    if M.parity == "even":
        checks["count_identity"] = even_count_identity(M.q0 // 2, M.m)
    entry["checks"] = checks
    entry["sign"] = lead.certified_sign
    entry["status"] = "PASS" if all(checks.values()) else "FAIL"
    return entry


def matrices_for(q0: int, include_m1: bool = False) -> list[NondegMatrix]:
    if q0 == 3:
        return [build_concrete_system("q3_odd")]
    if q0 == 5:
        return [build_concrete_system(n) for n in ("q5_odd4", "q5_odd6", "q5_even7")]
    if q0 == 4:
        return [build_concrete_system(n) for n in ("q4_odd", "q4_even")]
    k0 = _half(q0)
    out = [build_odd_matrix(q0, m) for m in range(2, k0 + 1)]
    out += [build_even_matrix(q0, m) for m in range(1 if include_m1 else 2, k0 + 1)]
    return out


def verify_all(q0: int, include_m1: bool = False, dps: int = DEFAULT_DPS) -> VerifyReport:
    """Build and certify every system attached to q0.

    For even q0 >= 6 the odd family uses m = 2..k0 and the even family
    m = 2..k0, which gives q0 - 2 systems; ``include_m1`` adds the even m = 1
    system as well.  q0 in {3, 4, 5} uses the hand-specified systems.
    """
    mats = matrices_for(q0, include_m1)
    expected = None
    if q0 >= 6:
        expected = q0 - 2 + (1 if include_m1 else 0)
    return VerifyReport(q0, include_m1, [certify(M, dps) for M in mats], expected)
