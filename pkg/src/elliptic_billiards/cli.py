"""Command line front end.

Every subcommand prints JSON (default) or CSV.  Numbers are written as decimal
strings with 17 significant digits, or ``digits`` in extended precision, so
identical invocations give byte-identical output.

Exit codes: 0 success, 1 a criterion or computation failed, 2 invalid input
(a JSON error object goes to stderr), 3 file I/O failure.

Settings are read from an INI file with a ``[run]`` section, taken from
``--config`` or from the path in $ELLIPTIC_BILLIARDS_CONFIG; flags win over
the file.  Keys: precision (double | extended), digits, k_max, grid, tol,
format (json | csv), output.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import acceptance
from . import billiard_dynamics as bd
from . import deformed_modes as dm
from . import nondegeneracy as nd
from . import series_engine as se
from .ellipse_geometry import (
    Ellipse, EllipticMotion, FourierSeries, PerturbedDomain, best_fit_ellipse, elliptic_motion_mu,
)
from .errors import (
    DomainError, GeometryError, NumericError, SearchError, SingularityError, StructuralError,
)
from .special_functions import complete_K, incomplete_F, jacobi_am_sn_cn

CONFIG_ENV = "ELLIPTIC_BILLIARDS_CONFIG"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    precision: str = "double"
    digits: int = 30
    k_max: int = 64
    grid: int = 256
    tol: float = 1e-12
    format: str = "json"
    output: str | None = None

    def __post_init__(self):
        if self.precision not in ("double", "extended"):
            raise DomainError(f"precision must be double or extended, got {self.precision!r}")
        if self.precision == "extended" and self.digits < 25:
            raise DomainError(f"extended precision needs digits >= 25, got {self.digits}")
        if self.tol <= 0:
            raise DomainError("tol must be positive")
        if self.k_max < 1 or self.grid < 8:
            raise DomainError("k_max must be >= 1 and grid >= 8")
        if self.format not in ("json", "csv"):
            raise DomainError(f"format must be json or csv, got {self.format!r}")

    @property
    def sig(self) -> int:
        return self.digits if self.precision == "extended" else 17


def load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    if not parser.has_section("run"):
        return {}
    sec = parser["run"]
    out = {}
    for key, conv in (("precision", str), ("digits", int), ("k_max", int), ("grid", int),
                      ("tol", float), ("format", str), ("output", str)):
        if key in sec:
            try:
                out[key] = conv(sec[key])
            except ValueError as exc:
                raise DomainError(f"config key {key}: {exc}") from exc
    return out


# ----------------------------------------------------------------------------
# serialisation

def _num(x, sig: int):
    if isinstance(x, mpmath.mpf):
        return mpmath.nstr(x, sig)
    if isinstance(x, Fraction):
        return se.fraction_str(x)
    return f"{float(x):.{sig}g}"


def _clean(x, sig: int):
    if isinstance(x, dict):
        return {str(k): _clean(v, sig) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v, sig) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v, sig) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)) or x is None:
        return None if x is None else bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating, mpmath.mpf, Fraction)):
        return _num(x, sig)
    return x


def _flatten(d, prefix=""):
    if isinstance(d, dict):
        for k, v in d.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(d, list):
        for i, v in enumerate(d):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, d


@dataclass
class Result:
    payload: dict
    rows: list[dict] | None = None
    failed: bool = False


def emit(result: Result, cfg: RunConfig) -> str:
    payload = _clean(result.payload, cfg.sig)
    if cfg.format == "json":
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    if result.rows is not None:
        rows = _clean(result.rows, cfg.sig)
        cols = list(rows[0]) if rows else []
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerows(_flatten(payload))
    return buf.getvalue()


# ----------------------------------------------------------------------------
# shared input handling

def _frame(args) -> Ellipse:
    return Ellipse(args.a, args.b)


def _parse_mode(text: str):
    try:
        kind, k, amp = text.split(":")
        k, amp = int(k), float(amp)
    except ValueError:
        raise DomainError(f"mode must look like cos:K:AMP or sin:K:AMP, got {text!r}") from None
    if kind not in ("cos", "sin") or k < 0:
        raise DomainError(f"bad mode {text!r}")
    return kind, k, amp


def _parse_motion(text: str) -> EllipticMotion:
    try:
        kind, vals = text.split(":")
        params = tuple(float(v) for v in vals.split(","))
    except ValueError:
        raise DomainError(f"motion must look like KIND:P1[,P2], got {text!r}") from None
    return EllipticMotion(kind, params)


def _read_json(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}") from exc


def _domain(args, cfg: RunConfig) -> PerturbedDomain:
    """Domain from --domain FILE, or from the frame flags plus --mode / --motion."""
    if getattr(args, "domain", None):
        d = _read_json(args.domain)
        d = d.get("domain", d)
        try:
            return PerturbedDomain.from_json(d)
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"{args.domain} does not describe a domain: {exc}") from exc
    frame = _frame(args)
    K = max([cfg.k_max] + [k for _, k, _ in map(_parse_mode, args.mode or [])])
    cos, sin, mean = {}, {}, 0.0
    for kind, k, amp in map(_parse_mode, args.mode or []):
        if k == 0:
            mean += amp
        else:
            target = cos if kind == "cos" else sin
            target[k] = target.get(k, 0.0) + amp
    mu = FourierSeries.from_modes(K, mean, cos, sin)
    for text in args.motion or []:
        mu = mu + elliptic_motion_mu(frame, _parse_motion(text), "exact", K)
    return PerturbedDomain(frame, mu)


def _add_frame(p, required=True):
    p.add_argument("--a", type=float, required=required, help="semi-major axis")
    p.add_argument("--b", type=float, required=required, help="semi-minor axis")


def _add_domain(p):
    _add_frame(p, required=False)
    p.add_argument("--domain", help="JSON file with a domain (fit-ellipse output is accepted)")
    p.add_argument("--mode", action="append", help="perturbation mode cos:K:AMP or sin:K:AMP (repeatable)")
    p.add_argument("--motion", action="append",
                   help="exact elliptic motion KIND:P1[,P2], KIND in homothety, translation, hyperbolic_rotation")


def _need_frame(args):
    if not getattr(args, "domain", None) and (args.a is None or args.b is None):
        raise DomainError("give --a and --b, or --domain")


# ----------------------------------------------------------------------------
# subcommands

def cmd_ellint(args, cfg):
    dps = cfg.digits if cfg.precision == "extended" else None
    F = incomplete_F(args.phi, args.k, dps)
    K = complete_K(args.k, dps)
    am, sn, cn = jacobi_am_sn_cn(F, args.k, dps)
    # residual of the round trip phi -> F(phi) -> am(F)
    return Result({"input": {"k": args.k, "phi": args.phi},
                   "value": {"F": F, "K": K, "am_of_F": am, "sn": sn, "cn": cn},
                   "residual": abs(am - args.phi)})


def cmd_rotnum(args, cfg):
    frame = _frame(args)
    if (args.lam is None) == (args.omega is None):
        raise DomainError("give exactly one of --lambda and --omega")
    if args.lam is not None:
        w = bd.caustic_rotation_number(frame, args.lam).value
        return Result({"a": frame.a, "b": frame.b, "lambda": args.lam, "omega": w})
    omega = float(Fraction(args.omega))
    return Result({"a": frame.a, "b": frame.b, "omega": omega, "lambda": bd.lambda_from_rotation(frame, omega)})


def cmd_orbit(args, cfg):
    """CSV columns: j, x, y."""
    frame = _frame(args)
    pts = bd.ellipse_caustic_orbit(frame, bd.CausticOrbitSpec(args.lam, args.t0, args.count))
    rows = [{"j": j, "x": x, "y": y} for j, (x, y) in enumerate(pts)]
    return Result({"a": frame.a, "b": frame.b, "lambda": args.lam, "points": pts}, rows)


def cmd_caustic_test(args, cfg):
    frame = _frame(args)
    check = bd.caustic_invariance(frame, bd.CausticOrbitSpec(args.lam, args.t0, args.steps))
    ok = check.max_tangency_defect < args.tangency_tol and check.max_step_error < args.step_tol
    return Result({"lambda": args.lam, "steps": args.steps, "max_tangency_defect": check.max_tangency_defect,
                   "max_step_error": check.max_step_error, "status": "PASS" if ok else "FAIL"}, failed=not ok)


def cmd_pqgon(args, cfg):
    """CSV columns: j, phi, x, y."""
    domain = _domain(args, cfg)
    phis = bd.max_pq_gon(domain, args.p, args.q, args.start_phi, tol=cfg.tol)
    xs, ys = domain.point(phis)
    rows = [{"j": j, "phi": p, "x": x, "y": y} for j, (p, x, y) in enumerate(zip(phis, xs, ys))]
    return Result({"p": args.p, "q": args.q, "phi": phis, "perimeter": bd.perimeter(domain, phis, args.p),
                   "reflection_residual": float(np.max(np.abs(bd.reflection_residual(domain, phis, args.p))))},
                  rows)


def cmd_integrability(args, cfg):
    """CSV columns: theta, S."""
    domain = _domain(args, cfg)
    osc, profile = bd.integrability_residual(domain, args.p, args.q, cfg.grid)
    theta = 2 * math.pi * np.arange(cfg.grid) / cfg.grid
    rows = [{"theta": t, "S": s} for t, s in zip(theta, profile)]
    return Result({"p": args.p, "q": args.q, "oscillation": osc, "profile": profile}, rows)


def cmd_expand(args, cfg):
    """CSV columns: j, harmonic, function, coefficient."""
    series = se.expand_action_angle(args.order, args.convention)
    rows = [{"j": j, "harmonic": h, "function": fn, "coefficient": se.fraction_str(c)}
            for j in range(1, series.order + 1) for h, fn, c in series[j].terms()]
    return Result(series.to_json(), rows)


def cmd_xi(args, cfg):
    """CSV columns: j, l, power, coefficient."""
    polys = se.xi_polynomials(args.order, args.convention)
    if args.diagonal_to:
        polys = polys + [se.xi_diagonal(j, args.convention) for j in range(args.order + 1, args.diagonal_to + 1)]
    rows = [{"j": p.j, "l": p.l, "power": i, "coefficient": se.fraction_str(c)}
            for p in polys for i, c in enumerate(p.coeffs) if c]
    return Result({"convention": args.convention, "xi": [p.to_json() for p in polys]}, rows)


def _matrix(args) -> nd.NondegMatrix:
    if args.name:
        return nd.build_concrete_system(args.name)
    if args.q0 is None or args.m is None or args.parity is None:
        raise DomainError("give --name, or --q0, --parity and --m")
    build = nd.build_odd_matrix if args.parity == "odd" else nd.build_even_matrix
    return build(args.q0, args.m)


def cmd_matrix(args, cfg):
    M = _matrix(args)
    dps = cfg.digits if cfg.precision == "extended" else nd.DEFAULT_DPS
    out = M.to_json()
    out.update(nd.det_leading(M, dps).to_json(cfg.sig))
    if args.inverse_rows:
        rows = [int(r) for r in args.inverse_rows.split(",")]
        inv = nd.inverse_row_orders(M, rows, dps)
        out["inverse_rows"] = {"rows": list(inv.rows), "orders": [list(o) for o in inv.orders],
                               "coefficients": [list(c) for c in inv.coefficients]}
    if args.e is not None:
        with mpmath.workdps(dps):
            out["numeric"] = [[+v for v in row] for row in M.numeric(mpmath.mpf(args.e))]
    return Result(out)


def cmd_verify(args, cfg):
    """CSV columns: matrix, size, det_order, det_coeff, sign, status."""
    dps = cfg.digits if cfg.precision == "extended" else nd.DEFAULT_DPS
    report = nd.verify_all(args.q0, args.include_m1, dps)
    rows = [{"matrix": e["matrix"], "size": e["size"], "det_order": e["det_order"],
             "det_coeff": (e["det_coeff"] or {}).get("value"), "sign": e.get("sign"), "status": e["status"]}
            for e in report.entries]
    return Result(report.to_json(), rows, failed=not report.all_pass)


def cmd_modes(args, cfg):
    """CSV columns: k, c0 (sup deviation of c_k), hr (H^r deviation of C_k)."""
    d = dm.basis_defect(_frame(args), args.q0, args.r, args.K)
    rows = [{"k": k, "c0": a, "hr": b} for k, a, b in d.per_k]
    return Result(d.to_json(), rows, failed=not d.threshold_ok)


def cmd_annihilate(args, cfg):
    _need_frame(args)
    domain = _domain(args, cfg)
    plus, minus = dm.annihilation_test(domain, args.q, args.r, args.q0)
    l2p, l2m = dm.transported_coefficients(domain, args.q)
    return Result({"q": args.q, "r": args.r, "sobolev": {"C_q": plus, "C_-q": minus},
                   "l2": {"c_q": l2p, "c_-q": l2m}, "frame": domain.frame.to_json()})


def cmd_fit_ellipse(args, cfg):
    _need_frame(args)
    domain = _domain(args, cfg)
    fit = best_fit_ellipse(domain, args.norm_order, args.radius, cfg.k_max, args.restarts, args.seed)
    return Result({"seed": args.seed, "ellipse": fit.ellipse.to_json(), "norm": fit.norm,
                   "input_norm": fit.input_norm, "distance": fit.distance, "boundary_hit": fit.boundary_hit,
                   "domain": PerturbedDomain(fit.ellipse, fit.residual, check=False).to_json()})


def cmd_reproduce(args, cfg):
    """CSV columns: criterion, title, status, seconds."""
    chosen = [int(c) for c in args.criteria.split(",")] if args.criteria else None
    if chosen and any(not 1 <= c <= len(acceptance.CRITERIA) for c in chosen):
        raise DomainError(f"criteria must lie in 1..{len(acceptance.CRITERIA)}")
    outcomes = []
    for fn in (acceptance.CRITERIA if not chosen else [acceptance.CRITERIA[c - 1] for c in chosen]):
        o = fn()
        print(o.line(), file=sys.stderr)
        outcomes.append(o)
    rows = [{"criterion": o.number, "title": o.title, "status": "PASS" if o.passed else "FAIL",
             "seconds": round(o.seconds, 3)} for o in outcomes]
    payload = {"criteria": [o.to_json() for o in outcomes], "all_pass": all(o.passed for o in outcomes)}
    # timings vary between runs, so they are left out unless asked for
    if not args.timings:
        for c in payload["criteria"]:
            c.pop("seconds")
            c["details"] = _strip_seconds(c["details"])
        for r in rows:
            r.pop("seconds")
    return Result(payload, rows, failed=not payload["all_pass"])


def _strip_seconds(d):
    if isinstance(d, dict):
        return {k: _strip_seconds(v) for k, v in d.items() if k != "seconds"}
    return d


# ----------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    # run settings are accepted before or after the subcommand
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("run settings")
    g.add_argument("--config", help=f"INI file with a [run] section (default ${CONFIG_ENV})")
    g.add_argument("--format", choices=["json", "csv"])
    g.add_argument("--output", "-o", help="write here instead of stdout")
    g.add_argument("--precision", choices=["double", "extended"])
    g.add_argument("--digits", type=int, help="significant digits in extended precision (>= 25)")
    g.add_argument("--k-max", type=int, dest="k_max", help="Fourier truncation for perturbations")
    g.add_argument("--grid", type=int, help="sample count for residual profiles")
    g.add_argument("--tol", type=float, help="solver tolerance")
    p = _Parser(prog="elliptic-billiards", description=__doc__, parents=[common],
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help, description=(fn.__doc__ or help), parents=[common])
        sp.set_defaults(fn=fn)
        return sp

    sp = add("ellint", cmd_ellint, "incomplete and complete first-kind integrals and the amplitude")
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--phi", type=float, required=True)

    sp = add("rotnum", cmd_rotnum, "rotation number of a confocal caustic, or the caustic of a rotation number")
    _add_frame(sp)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--omega", help="rotation number, decimal or p/q")

    sp = add("orbit", cmd_orbit, "closed-form billiard orbit tangent to a caustic")
    _add_frame(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--count", type=int, default=100)

    sp = add("caustic-test", cmd_caustic_test, "tangency and billiard-step agreement along a caustic orbit")
    _add_frame(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--t0", type=float, default=0.3)
    sp.add_argument("--steps", type=int, default=10_000)
    sp.add_argument("--tangency-tol", type=float, default=1e-10)
    sp.add_argument("--step-tol", type=float, default=1e-9)

    sp = add("pqgon", cmd_pqgon, "perimeter-maximising periodic orbit of type (p, q)")
    _add_domain(sp)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--start-phi", type=float, default=0.0)

    sp = add("integrability", cmd_integrability, "residual of the first-order p/q integrability condition")
    _add_domain(sp)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--q", type=int, required=True)

    for name, fn, help in (("expand", cmd_expand, "exact action-angle expansion phi_1..phi_N"),
                           ("xi", cmd_xi, "exact xi_{j,l}(k) polynomials")):
        sp = add(name, fn, help)
        sp.add_argument("--order", type=int, required=True)
        sp.add_argument("--convention", choices=list(se.CONVENTIONS), default="am")
        if name == "xi":
            sp.add_argument("--diagonal-to", type=int, help="also emit xi_{j,j} for orders up to this")

    sp = add("matrix", cmd_matrix, "a non-degeneracy matrix with its leading determinant")
    sp.add_argument("--name", choices=sorted(nd.CONCRETE_SYSTEMS))
    sp.add_argument("--q0", type=int)
    sp.add_argument("--parity", choices=["odd", "even"])
    sp.add_argument("--m", type=int)
    sp.add_argument("--e", type=float, help="also print the numeric matrix at this eccentricity")
    sp.add_argument("--inverse-rows", help="comma-separated 0-based rows of the inverse to grade")

    sp = add("verify", cmd_verify, "certify every non-degeneracy system for q0")
    sp.add_argument("--q0", type=int, required=True)
    sp.add_argument("--include-m1", action="store_true")

    sp = add("modes", cmd_modes, "deformed-mode basis defect")
    _add_frame(sp)
    sp.add_argument("--q0", type=int, required=True)
    sp.add_argument("--r", type=int, default=2)
    sp.add_argument("--K", type=int, default=64)

    sp = add("annihilate", cmd_annihilate, "pair a perturbation with the deformed modes of index +-q")
    _add_domain(sp)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--r", type=int, default=2)
    sp.add_argument("--q0", type=int)

    sp = add("fit-ellipse", cmd_fit_ellipse, "best approximating ellipse and the residual domain")
    _add_domain(sp)
    sp.add_argument("--norm-order", type=int, default=2)
    sp.add_argument("--radius", type=float, default=1e-2)
    sp.add_argument("--restarts", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("reproduce", cmd_reproduce, "run the acceptance criteria")
    sp.add_argument("--criteria", help="comma-separated criterion numbers (default all)")
    sp.add_argument("--timings", action="store_true", help="include wall times (makes output nondeterministic)")
    return p


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = load_config(getattr(args, "config", None))
        for key in ("precision", "digits", "k_max", "grid", "tol", "format", "output"):
            if getattr(args, key, None) is not None:
                settings[key] = getattr(args, key)
        cfg = RunConfig(**settings)
        result = args.fn(args, cfg)
        text = emit(result, cfg)
    except UsageError as exc:
        return _fail(2, "usage", str(exc))
    except OSError as exc:
        return _fail(3, "io", str(exc))
    except (DomainError, GeometryError, StructuralError, SingularityError) as exc:
        return _fail(2, type(exc).__name__, str(exc))
    except (NumericError, SearchError) as exc:
        return _fail(1, type(exc).__name__, str(exc))
    if cfg.output:
        try:
            with open(cfg.output, "w") as fh:
                fh.write(text)
        except OSError as exc:
            return _fail(3, "io", f"cannot write {cfg.output}: {exc}")
    else:
        sys.stdout.write(text)
    return 1 if result.failed else 0


if __name__ == "__main__":
    sys.exit(main())
