"""Command-line interface.

Complex-number flags accept a small grammar:

* arithmetic literals ``1``, ``-2.5``, ``0.1+0.2i``, ``3j``, ``i``, ``1e-3-2i``;
* the names ``pi``, ``e`` and, where a lattice is known, ``gen1`` and ``gen2``;
* the functions ``exp``, ``sqrt``, ``cos``, ``sin`` and ``conj``;
* ``exp:THETA`` for ``e^{i THETA}`` (``exp:pi/6``);
* ``conj`` alone, accepted for ``--gen2``, mirrors ``--gen1``.

Every subcommand prints one JSON document on standard output (a readable
table with ``--pretty``). Exit status: 0 success, 1 domain error (error
object on standard error), 2 usage error.
"""

import argparse
import ast
import cmath
import json
import math
import operator
import re
import sys
import time

import numpy as np

from . import acceptance as acc
from . import dynamics as dyn
from . import elliptic as ell
from . import lattice as lat
from . import newton as nwt
from . import render as rd
from . import weierstrass as wsf
from .errors import DomainError

SCHEMA_PREFIX = "ellnewton"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# complex grammar

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"exp": cmath.exp, "sqrt": cmath.sqrt, "cos": cmath.cos, "sin": cmath.sin,
          "conj": lambda z: complex(z).conjugate()}
_NUM_I = re.compile(r"(?<![\w.])((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)[ij](?![\w.])")
_BARE_I = re.compile(r"(?<![\w.])[ij](?![\w.(])")


def _eval_node(node, names):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
            and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, names), _eval_node(node.right, names))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand, names))
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        raise UsageError(f"unknown name {node.id!r}")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        return _FUNCS[node.func.id](_eval_node(node.args[0], names))
    raise UsageError("unsupported expression")


def parse_complex(text, names=None):
    """Parse a complex literal or expression (see the module docstring)."""
    env = {"pi": math.pi, "e": math.e}
    env.update(names or {})
    s = str(text).strip()
    if not s:
        raise UsageError("empty complex value")
    if s.startswith("exp:"):
        theta = parse_complex(s[4:], names)
        if abs(complex(theta).imag) > 0:
            raise UsageError(f"exp: angle must be real in {text!r}")
        return cmath.exp(1j * complex(theta).real)
    src = _BARE_I.sub("1j", _NUM_I.sub(r"\1j", s))
    try:
        tree = ast.parse(src, mode="eval")
        val = complex(_eval_node(tree, env))
    except UsageError as exc:
        raise UsageError(f"cannot parse complex value {text!r}: {exc}") from None
    except (SyntaxError, TypeError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise UsageError(f"cannot parse complex value {text!r}: {exc}") from None
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise UsageError(f"non-finite complex value {text!r}")
    return val


def parse_coeffs(text):
    if text is None:
        return None
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        return ()
    return tuple(parse_complex(p) for p in parts)


# ---------------------------------------------------------------------------
# output


def _clean(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.complexfloating,)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _flatten(obj, prefix=""):
    rows = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            rows += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and len(obj) == 2 and all(isinstance(x, (int, float)) for x in obj):
        rows.append((prefix, f"{obj[0]:.12g} {obj[1]:+.12g}i"))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            rows += _flatten(v, f"{prefix}[{i}]")
    else:
        rows.append((prefix, str(obj)))
    return rows


def emit(payload, pretty, out=None):
    out = out or sys.stdout
    payload = _clean(payload)
    if pretty:
        if "results" in payload and payload.get("schema", "").endswith("verify/1"):
            for r in payload["results"]:
                out.write(r["line"] + "\n")
            out.write(f"all passed: {payload['all_passed']}\n")
            return
        rows = _flatten(payload)
        width = max((len(k) for k, _ in rows), default=0)
        for k, v in rows:
            out.write(f"{k.ljust(width)}  {v}\n")
        return
    out.write(json.dumps(payload, allow_nan=False) + "\n")


def _schema(name):
    return f"{SCHEMA_PREFIX}.{name}/1"


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_lattice(p):
    p.add_argument("--gen1", default="exp:pi/6", help="first generator (default exp:pi/6)")
    p.add_argument("--gen2", default="conj", help="second generator; 'conj' mirrors gen1")
    p.add_argument("--half-periods", action="store_true",
                   help="read gen1/gen2 as half-periods (lattice spanned by 2*gen1, 2*gen2)")
    p.add_argument("--tol", type=float, default=lat.DEFAULT_INVARIANT_TOL,
                   help="relative tolerance for the lattice invariants")


def _add_function(p):
    p.add_argument("--b", help="parameter of wp + b")
    p.add_argument("--P", help="comma-separated coefficients of P, ascending powers")
    p.add_argument("--S", help="comma-separated coefficients of S, ascending powers")


def _add_orbit(p):
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--root-tol", type=float, default=1e-9)
    p.add_argument("--cycle-tol", type=float, default=1e-8)
    p.add_argument("--max-period", type=int, default=64)
    p.add_argument("--transient", type=int, default=50)


def _add_common(p):
    p.add_argument("--pretty", action="store_true", help="human-readable output")


def build_parser():
    parser = _Parser(prog="ellnewton", description="Newton dynamics of elliptic functions")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lattice-info", help="invariants and distinguished points")
    _add_lattice(p)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate wp, f and the Newton map at a point")
    _add_lattice(p)
    _add_function(p)
    p.add_argument("--z", required=True)
    _add_common(p)

    p = sub.add_parser("classify", help="classify the Newton orbit of a point")
    _add_lattice(p)
    _add_function(p)
    _add_orbit(p)
    p.add_argument("--z", required=True)
    _add_common(p)

    for name, helptext in (("render-dyn", "render a dynamical plane"),
                           ("render-param", "render the wp + b parameter plane")):
        p = sub.add_parser(name, help=helptext)
        _add_lattice(p)
        if name == "render-dyn":
            _add_function(p)
        _add_orbit(p)
        p.add_argument("--center", help="window centre (default depends on plane)")
        p.add_argument("--width", type=float, help="window width")
        p.add_argument("--px", type=int, default=200 if name == "render-dyn" else 100)
        p.add_argument("--py", type=int)
        p.add_argument("--out", required=True, help="PPM output path")
        p.add_argument("--sidecar", help="JSON sidecar path (default: OUT with .json)")
        p.add_argument("--csv", help="optional CSV dump of the cells")
        p.add_argument("--png", help="optional matplotlib figure")
        p.add_argument("--workers", type=int, default=0,
                       help=f"worker processes (0: ${rd.WORKERS_ENV} or CPU count)")
        _add_common(p)

    p = sub.add_parser("wandering-b", help="wandering parameters b = lambda wp'(c)")
    _add_lattice(p)
    p.add_argument("--lambda", dest="lam",
                   help="lattice shift, e.g. gen1, -gen2, gen1+gen2 (default: list all)")
    p.add_argument("--zero", choices=("first", "second"), default="first")
    p.add_argument("--target", help="sort candidates by distance to this b")
    _add_common(p)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--filter", help="comma-separated module names or criterion numbers")
    p.add_argument("--seed", type=int, default=acc.DEFAULT_SEED)
    _add_common(p)
    return parser


def _lattice_from(args):
    g1 = parse_complex(args.gen1)
    g2 = g1.conjugate() if args.gen2.strip() == "conj" else parse_complex(args.gen2, {"gen1": g1})
    if not (args.tol > 0):
        raise UsageError("--tol must be positive")
    return g1, g2


def _build_lattice(g1, g2, args):
    if args.half_periods:
        return lat.Lattice.from_half_periods(g1, g2, tol=args.tol)
    return lat.make_lattice(g1, g2, tol=args.tol)


def _function_spec(args):
    b = parse_complex(args.b) if args.b is not None else None
    P, S = parse_coeffs(args.P), parse_coeffs(args.S)
    if b is not None and (P is not None or S is not None):
        raise UsageError("--b cannot be combined with --P/--S")
    if b is None and P is None and S is None:
        raise UsageError("one of --b or --P/--S is required")
    return b, P, S


def _newton_from(L, spec):
    b, P, S = spec
    if b is not None:
        return nwt.wp_plus_b_map(L, b)
    return nwt.newton_map(ell.make_elliptic(L, P or (), S or ()))


def _orbit_params(args):
    try:
        return dyn.OrbitParams(args.max_iter, args.root_tol, args.cycle_tol,
                               args.max_period, args.transient)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands


def _lattice_payload(L):
    out = {
        "schema": _schema("lattice-info"),
        "lattice": L.to_json(),
        "reduced_gen1": L.reduced_gen1,
        "reduced_gen2": L.reduced_gen2,
        "shortest_vector_len": L.shortest_vector_len,
        "area": L.area,
        "g2": L.g2,
        "g3": L.g3,
        "discriminant": L.discriminant,
        "triangular": lat.is_triangular(L),
        "half_periods": dict(zip(("w1", "w2", "w3"), lat.half_periods(L).as_tuple())),
    }
    out["critical_values"] = dict(zip(("e1", "e2", "e3"), lat.critical_values(L).as_tuple()))
    return out


def cmd_lattice_info(args, L):
    return _lattice_payload(L)


def cmd_eval(args, L, spec, z):
    ev = wsf.evaluator_for(L)
    out = {"schema": _schema("eval"), "z": z,
           "wp": wsf.wp(ev, z), "wp_prime": wsf.wp_prime(ev, z),
           "wp_second": wsf.wp_second(ev, z), "wp_third": wsf.wp_third(ev, z)}
    N = _newton_from(L, spec)
    g = N.f
    out["f"] = ell.eval_f(g, z)
    out["f_prime"] = ell.eval_f_prime(g, z)
    out["order"] = g.order
    out["N"] = nwt.newton_eval(N, z)
    out["N_prime"] = nwt.newton_derivative(N, z)
    return out


def cmd_classify(args, L, spec, z, params):
    N = _newton_from(L, spec)
    out = dyn.classify_orbit(N, z, params).to_json()
    return {"schema": _schema("classify"), "z": z, "orbit_params": params.to_json(), **out}


def _write_outputs(r, args, title):
    rd.encode_image(r, args.out)
    side = args.sidecar or re.sub(r"\.ppm$", "", args.out) + ".json"
    rd.encode_sidecar(r, side)
    files = {"image": args.out, "sidecar": side}
    if args.csv:
        rd.encode_csv(r, args.csv)
        files["csv"] = args.csv
    if args.png:
        from . import plotting
        plotting.save_figure(r, args.png, title=title)
        files["png"] = args.png
    return files


def cmd_render_dyn(args, L, spec, params, center, width, px, py):
    N = _newton_from(L, spec)
    if center is None:
        center = lat.half_periods(L).w3
    if width is None:
        width = math.sqrt(2 * L.area) * px / py
    cfg = rd.RasterConfig(center, width, px, py, params, worker_hint=args.workers)
    r = rd.render_dynamical_plane(N, cfg)
    files = _write_outputs(r, args, "dynamical plane")
    return {"schema": _schema("render-dyn"), **rd.sidecar_dict(r), "files": files}


def cmd_render_param(args, L, params, center, width, px, py):
    c0, w0 = rd.default_parameter_window(L)
    center = c0 if center is None else center
    width = w0 if width is None else width
    cfg = rd.RasterConfig(center, width, px, py, params, worker_hint=args.workers)
    r = rd.render_parameter_plane(L, center, width, cfg)
    files = _write_outputs(r, args, "parameter plane")
    return {"schema": _schema("render-param"), **rd.sidecar_dict(r), "files": files}


def _wandering_row(L, lam, zero, label=None):
    b = nwt.wandering_parameter(L, lam, zero)
    c = nwt.wandering_seed(L, zero)
    N = nwt.wp_plus_b_map(L, b)
    resid = abs(nwt.newton_eval(N, c) - (c - lam))
    row = {"b": b, "c": c, "lambda": lam, "zero": zero, "check_Nb_c": "c - lambda",
           "residual": resid}
    if label:
        row["lambda_label"] = label
    return row


def cmd_wandering_b(args, L, lam, target):
    if lam is not None:
        return {"schema": _schema("wandering-b"), **_wandering_row(L, lam, args.zero)}
    rows = []
    for c in nwt.wandering_candidates(L, target):
        row = _wandering_row(L, c["lambda"], c["zero"], c["lambda_label"])
        if target is not None:
            row["distance"] = c["distance"]
        rows.append(row)
    return {"schema": _schema("wandering-b"), "candidates": rows}


def cmd_verify(args):
    results = []
    ctx = acc.make_context(args.seed)
    selected = acc.select(args.filter)
    if not selected:
        raise UsageError(f"--filter {args.filter!r} matches no criterion")
    for cid, *_ in selected:
        t = time.perf_counter()
        r = acc.run_check(cid, ctx)
        sys.stderr.write(f"{r.line()} [{time.perf_counter() - t:.1f} s]\n")
        results.append({**r.to_json(), "line": r.line()})
    ok = all(r["passed"] for r in results)
    return {"schema": _schema("verify"), "seed": args.seed, "results": results,
            "all_passed": ok}, (0 if ok else 1)


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        # validate every numeric flag before computing anything
        if args.command == "verify":
            payload, code = cmd_verify(args)
            emit(payload, args.pretty)
            return code
        g1, g2 = _lattice_from(args)
        cmd = args.command
        # gen1/gen2 in point arguments name the lattice generators
        k = 2 if args.half_periods else 1
        names = {"gen1": k * g1, "gen2": k * g2}
        if cmd in ("eval", "classify"):
            spec = _function_spec(args)
            z = parse_complex(args.z, names)
        if cmd == "classify":
            params = _orbit_params(args)
        if cmd in ("render-dyn", "render-param"):
            spec = _function_spec(args) if cmd == "render-dyn" else None
            params = _orbit_params(args)
            center = parse_complex(args.center, names) if args.center is not None else None
            px = args.px
            py = args.py if args.py is not None else px
            if not (16 <= px <= 8192 and 16 <= py <= 8192):
                raise UsageError("--px/--py must lie in [16, 8192]")
            if args.width is not None and not (args.width > 0 and math.isfinite(args.width)):
                raise UsageError("--width must be positive")
            if args.workers < 0:
                raise UsageError("--workers must be >= 0")
            if not args.out:
                raise UsageError("--out must be a path")
        if cmd == "wandering-b":
            lam = parse_complex(args.lam, names) if args.lam is not None else None
            target = parse_complex(args.target) if args.target is not None else None

        L = _build_lattice(g1, g2, args)
        if cmd == "lattice-info":
            payload = cmd_lattice_info(args, L)
        elif cmd == "eval":
            payload = cmd_eval(args, L, spec, z)
        elif cmd == "classify":
            payload = cmd_classify(args, L, spec, z, params)
        elif cmd == "render-dyn":
            payload = cmd_render_dyn(args, L, spec, params, center, args.width, px, py)
        elif cmd == "render-param":
            payload = cmd_render_param(args, L, params, center, args.width, px, py)
        else:
            payload = cmd_wandering_b(args, L, lam, target)
        emit(payload, args.pretty)
        return 0
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    except DomainError as exc:
        sys.stderr.write(json.dumps(exc.to_json()) + "\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(json.dumps({"error": "ValueError", "message": str(exc)}) + "\n")
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
