"""Command line front-end: ``python3 -m symsq <subcommand> [options]``.

Exit status: 0 when every embedded contract holds, 2 when a tolerance or
numerical contract fails, 1 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import arith, exponents, lfunc, moments, petersson, voronoi
from .errors import (ArgumentError, ContourError, ConvergenceError, DomainError, PrecisionError,
                     PreconditionError, SymsqError, TruncationError, UnsupportedError)
from .qexp import delta_eigenform, level_one_eigenform, reference_newform, sym_square, verify_hecke

EXIT_OK, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2
GOLDEN = (1 + math.sqrt(5)) / 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kw):
        kw.setdefault("allow_abbrev", False)
        super().__init__(*args, **kw)

    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    tol: float = 1e-8
    threads: int = 1
    precision: int | None = None
    out: str | None = None
    format: str = "json"

    def __post_init__(self):
        if not 0 < self.tol <= 1e-2:
            raise UsageError("tol must lie in (0, 1e-2]")
        if self.threads < 1:
            raise UsageError("threads must be at least 1")
        if self.format not in ("json", "csv"):
            raise UsageError("format must be json or csv")
        if self.precision is not None and self.precision < 2:
            raise UsageError("precision must be at least 2")


# ------------------------------------------------------------ serialization

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, Fraction):
        return str(x)
    return x


def dumps(obj) -> str:
    """JSON with floats at 17 significant digits and sorted keys."""

    def enc(x) -> str:
        if x is None:
            return "null"
        if isinstance(x, bool):
            return "true" if x else "false"
        if isinstance(x, int):
            return str(x)
        if isinstance(x, float):
            return format(x, ".17g") if math.isfinite(x) else "null"
        if isinstance(x, str):
            import json
            return json.dumps(x)
        if isinstance(x, list):
            return "[" + ", ".join(enc(v) for v in x) + "]"
        if isinstance(x, dict):
            return "{" + ", ".join(f"{enc(k)}: {enc(x[k])}" for k in sorted(x)) + "}"
        raise TypeError(f"cannot serialize {type(x).__name__}")

    return enc(_plain(obj))


def to_csv(obj) -> str:
    rows = obj.get("rows") if isinstance(obj, dict) and isinstance(obj.get("rows"), list) else None
    if rows is None:
        rows = [{k: v for k, v in _plain(obj).items() if not isinstance(v, (dict, list))}]
    rows = [_plain(r) for r in rows]
    keys = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


# ------------------------------------------------------------------- forms

@lru_cache(maxsize=8)
def _level_one(k: int, precision: int):
    return delta_eigenform(precision) if k == 12 else level_one_eigenform(k, precision)


@lru_cache(maxsize=4)
def _newform(two_kappa: int, P: int, precision: int):
    if (two_kappa, P) != (4, 5):
        raise UnsupportedError(f"only the weight-4 level-5 newform is built in, not ({two_kappa}, {P})")
    return reference_newform(precision)


def _thread_map(fn, items, threads: int):
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _contract(name: str, passed: bool, **detail) -> dict:
    return {"name": name, "passed": bool(passed), **detail}


# -------------------------------------------------------------- subcommands

def cmd_eigen(a, rc: RunConfig) -> dict:
    prec = rc.precision or max(a.n + 2, 64)
    f = _newform(a.k, a.level, prec) if a.level > 1 else _level_one(a.k, prec)
    bad = verify_hecke(f.a, f.weight, f.level)
    lam = [f.lambda_(n) for n in range(1, a.n + 1)]
    deligne = max(abs(f.lambda_(p)) / 2 for p in arith.primes_up_to(a.n) if f.level % p) if a.n >= 2 else 0.0
    return {"weight": f.weight, "level": f.level, "a": [int(x) for x in f.a[1:a.n + 1]], "lambda": lam,
            "contracts": [_contract("hecke", bad is None, first_failure=bad),
                          _contract("deligne", deligne <= 1 + 1e-12, max_ratio=deligne)]}


def cmd_kloosterman(a, rc: RunConfig) -> dict:
    direct = arith.kloosterman_direct(a.m, a.n, a.c)
    crt = arith.kloosterman(a.m, a.n, a.c)
    bound = arith.weil_bound(a.m, a.n, a.c)
    return {"m": a.m, "n": a.n, "c": a.c, "direct": direct, "crt": crt, "weil_bound": bound,
            "contracts": [_contract("crt", abs(direct - crt) <= rc.tol * (1 + abs(direct))),
                          _contract("weil", abs(direct) <= bound * (1 + 1e-12))]}


def cmd_petersson_check(a, rc: RunConfig) -> dict:
    params = petersson.PeterssonParams.choose(a.k, a.N, a.m, a.n, rc.tol, a.c_cap, certify=not a.uncertified)
    res = petersson.PeterssonEngine(a.N, params.c_max).run([a.k], [(a.m, a.n)])[a.k]
    value = float(res.values[0])
    out = {"k": a.k, "N": a.N, "m": a.m, "n": a.n, "c_max": res.c_max, "geometric": value,
           "tail_bound": float(res.tail_bound[0]), "tail_estimate": float(res.tail_estimate[0])}
    dim = petersson.cusp_dimension(a.k, a.N)
    spectral = None
    if dim == 0:
        spectral = 1.0 if a.m == a.n else 0.0
    elif a.N == 1 and dim == 1:
        f = _level_one(a.k, max(a.m, a.n, 2) + 1)
        L1 = lfunc.special_value_L1_sym2(_level_one(a.k, 20000), 1e-12)
        omega = petersson.omega_from_L1(a.k, 1, L1)
        spectral = f.lambda_(a.m) * f.lambda_(a.n) / omega
    out["dimension"] = dim
    out["spectral"] = spectral
    contracts = []
    if spectral is not None:
        contracts.append(_contract("spectral=geometric", abs(value - spectral) <= max(rc.tol, 1e-12),
                                   gap=abs(value - spectral)))
    out["contracts"] = contracts
    return out


def voronoi_coefficients(c: int, X: float, alpha: float = 30.0) -> int:
    """Coefficient range a Voronoi check at (c, X) needs with the log-Gaussian weight."""
    top = math.sqrt(2) * X * math.exp(math.sqrt(math.log(1e17) / alpha)) + 2
    dual = c ** 3 * 3.6 * alpha ** 1.5 / (math.sqrt(2) * X) * 3 + 4000
    return int(max(top, dual))


def _voronoi_one(args):
    c, a_, X, alpha, k, theta, tol, precision = args
    need = precision or voronoi_coefficients(c, X, alpha)
    f = _level_one(k, need + 1)
    F = sym_square(f, 1, need)
    psi = voronoi.TestFunction(voronoi.LogGaussianWeight(X, alpha), theta)
    r = voronoi.voronoi_check(F, a_, c, voronoi.PsiTransform(k, psi), tol)
    row = r.as_row()
    row["dual_lengths"] = {str(n1): v for n1, v in r.dual_lengths.items()}
    row["passed"] = r.rel_err <= tol
    return row


def cmd_voronoi_check(a, rc: RunConfig) -> dict:
    if a.grid:
        cases = [(c, aa, X) for X in (10.0, 100.0) for c, aa in ((2, 1), (3, 1), (3, 2), (4, 1), (5, 2))]
    else:
        cases = [(a.c, a.a, a.X)]
    rows = _thread_map(_voronoi_one, [(c, aa, X, a.alpha, a.k, a.theta, rc.tol, rc.precision)
                                       for c, aa, X in cases], rc.threads)
    out = {"rows": rows, "contracts": [_contract("voronoi", all(r["passed"] for r in rows),
                                                 max_rel_err=max(r["rel_err"] for r in rows))]}
    if len(rows) == 1:
        out.update({k: v for k, v in rows[0].items() if k != "passed"})
    return out


def _pair(a, rc: RunConfig, need: int):
    prec = max(rc.precision or 0, need)
    return _level_one(a.k, prec), _newform(2 * a.kappa, a.P, prec)


def cmd_vweight(a, rc: RunConfig) -> dict:
    f, g = _pair(a, rc, 4000)
    V = lfunc.VWeight(f, g, level_layer=a.layer)
    ys = [float(y) for y in a.y.split(",")]
    values = [lfunc.v_weight(V, y, rc.tol) for y in ys]
    out = {"layer": a.layer, "rows": [{"y": y, "V": v} for y, v in zip(ys, values)]}
    if a.limit:
        out["small_y_limit"] = V.small_y_limit(rc.tol)
    out["contracts"] = [_contract("tail", True)]
    return out


def cmd_central_value(a, rc: RunConfig) -> dict:
    f0, g0 = _level_one(a.k, 64), _newform(2 * a.kappa, a.P, 64)
    need = lfunc.required_precision(f0, g0, a.Y, min(rc.tol, 1e-10)) + 10
    f, g = _pair(a, rc, need)
    rep = lfunc.central_value_report(f, g, a.Y, min(rc.tol, 1e-10))
    out = rep.as_dict()
    out["contracts"] = [_contract("imaginary residue", rep.imag_residue <= max(rc.tol, 1e-10)),
                        _contract("truncation", rep.tail_bound <= rc.tol)]
    return out


def _moment_need(Y: float) -> int:
    return int(1200 * max(Y, 1 / Y)) + 100


def cmd_moment(a, rc: RunConfig) -> dict:
    f, g = _pair(a, rc, max(_moment_need(a.Y), 40000 if a.cross_check else 0))
    cfg = moments.MomentConfig(f, g, a.ell, a.Y, rc.tol, a.L)
    rep = moments.moment_report(cfg, cross_check=a.cross_check)
    out = rep.as_dict()
    out["T1"], out["T2"] = rep.T1, rep.T2
    out["a_priori_gate"] = cfg.a_priori_gate
    out["diagonal"] = moments.diagonal_term(cfg)
    out["contracts"] = ([_contract("dual route", rep.rel_gap < 1e-4, rel_gap=rep.rel_gap)]
                        if a.cross_check else [])
    return out


def cmd_amplified(a, rc: RunConfig) -> dict:
    f, g = _pair(a, rc, max(_moment_need(a.Y), 40000 if a.route == "direct" else 0))
    amp = moments.Amplifier.build(g, a.L)
    if a.route == "direct":
        def F(l):
            return moments.twisted_moment_direct(moments.MomentConfig(f, g, l, a.Y, rc.tol, a.L))
        value = moments.amplified_average(f, g, a.L, a.Y, rc.tol, moment=F)
    else:
        value = moments.amplified_average(f, g, a.L, a.Y, rc.tol)
    A = amp.value(g)
    return {"L": a.L, "primes": amp.primes, "alpha": {str(k): v for k, v in sorted(amp.alpha.items())},
            "A_g0": A, "route": a.route, "value": value,
            "contracts": [_contract("amplifier identity", abs(A - len(amp.primes)) <= 1e-10)]}


def cmd_exponents(a, rc: RunConfig) -> dict:
    rep = exponents.exponent_report(a.kappa)
    rep["contracts"] = [_contract("assumptions", all(x["verdict"] for x in rep["assumptions"]))]
    return rep


def cmd_wilton(a, rc: RunConfig) -> dict:
    Xs = [float(x) for x in a.X.split(",")]
    alphas = []
    for s in a.alpha.split(","):
        s = s.strip()
        alphas.append(GOLDEN if s == "golden" else float(Fraction(s)))
    need = rc.precision or int(2 * max(Xs)) + 2
    F = sym_square(_level_one(a.k, need + 1), 1, need)
    rep = voronoi.wilton_envelope(F, alphas, Xs)
    return {"k": a.k, "rows": rep.rows, "max_ratio": rep.max_ratio,
            "constant_by_X": {format(x, "g"): v for x, v in rep.constants_by_X().items()},
            "contracts": []}


COMMANDS = {
    "eigen": cmd_eigen, "kloosterman": cmd_kloosterman, "petersson-check": cmd_petersson_check,
    "voronoi-check": cmd_voronoi_check, "vweight": cmd_vweight, "central-value": cmd_central_value,
    "moment": cmd_moment, "amplified": cmd_amplified, "exponents": cmd_exponents, "wilton": cmd_wilton,
}


# ------------------------------------------------------------------ parser

def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--precision", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--format", default="json", choices=("json", "csv"))
    common.add_argument("--config", default=None, help="key=value file; flags override it")

    p = _Parser(prog="symsq", description="Numerical checks for Sym^2 f x g.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("eigen", parents=[common])
    s.add_argument("--k", type=int, default=12)
    s.add_argument("--level", type=int, default=1)
    s.add_argument("--n", type=int, default=20)

    s = sub.add_parser("kloosterman", parents=[common])
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--c", type=int, required=True)

    s = sub.add_parser("petersson-check", parents=[common])
    s.add_argument("--k", type=int, default=12)
    s.add_argument("--N", type=int, default=1)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--c-cap", type=int, default=petersson.DEFAULT_C_CAP)
    s.add_argument("--uncertified", action="store_true")

    s = sub.add_parser("voronoi-check", parents=[common])
    s.add_argument("--c", type=int, default=1)
    s.add_argument("--a", type=int, default=1)
    s.add_argument("--X", type=float, default=10.0)
    s.add_argument("--k", type=int, default=12)
    s.add_argument("--alpha", type=float, default=30.0)
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--grid", action="store_true")

    for name in ("vweight", "central-value", "moment", "amplified"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--k", type=int, default=12)
        s.add_argument("--kappa", type=int, default=2)
        s.add_argument("--P", type=int, default=5)
        if name == "vweight":
            s.add_argument("--y", default="0.01,0.1,1,10")
            s.add_argument("--layer", default="primitive", choices=("primitive", "as-written"))
            s.add_argument("--limit", action="store_true")
        if name in ("central-value", "moment", "amplified"):
            s.add_argument("--Y", type=float, default=1.0)
        if name in ("moment", "amplified"):
            s.add_argument("--L", type=float, default=1.0 if name == "moment" else 2.0)
        if name == "moment":
            s.add_argument("--ell", type=int, default=1)
            s.add_argument("--cross-check", action="store_true")
        if name == "amplified":
            s.add_argument("--route", default="trace", choices=("trace", "direct"))

    s = sub.add_parser("exponents", parents=[common])
    s.add_argument("--kappa", type=int, default=2)

    s = sub.add_parser("wilton", parents=[common])
    s.add_argument("--k", type=int, default=12)
    s.add_argument("--X", default=",".join(str(2 ** j) for j in range(5, 13)))
    s.add_argument("--alpha", default="0,golden,1/3")
    return p


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line without '=': {raw.strip()!r}")
            key, val = (x.strip() for x in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _apply_config(parser: _Parser, argv: list[str]) -> None:
    pre = _Parser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        defaults = {}
        for act in sp._actions:
            if act.dest in cfg:
                raw = cfg[act.dest]
                if isinstance(act, argparse._StoreTrueAction):
                    defaults[act.dest] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    defaults[act.dest] = act.type(raw) if act.type else raw
                act.required = False
        sp.set_defaults(**defaults)


def cmd_dispatch(argv: list[str] | None = None, stdout=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing subcommand")
        threads = args.threads if args.threads is not None else int(os.environ.get("SYMSQ_THREADS", "1"))
        rc = RunConfig(args.tol, threads, args.precision, args.out, args.format)
    except (UsageError, ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    try:
        result = COMMANDS[args.command](args, rc)
    except (ArgumentError, UnsupportedError, PreconditionError, DomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PrecisionError, ContourError, TruncationError, ConvergenceError, SymsqError) as exc:
        result = {"error": type(exc).__name__, "message": str(exc),
                  "contracts": [_contract("computation", False)]}
    result["command"] = args.command
    result["tol"] = rc.tol
    text = to_csv(result) if rc.format == "csv" else dumps(result) + "\n"
    if rc.out:
        with open(rc.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    ok = all(c["passed"] for c in result.get("contracts", []))
    return EXIT_OK if ok else EXIT_CONTRACT


def main() -> None:
    sys.exit(cmd_dispatch())
