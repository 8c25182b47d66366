"""Command-line front end: ``specdet <command> --problem FILE ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .coeff_lang import CoeffError
from .halfline import (bc_trace_diff, halfline_from_dict, halfline_relative_zeta_prime0, jost,
                       m_function, perturbation_det)
from .ode_engine import DEFAULT_CONFIG, IntegrationError
from .sl_core import ValidationError, problem_from_dict, read_problem_file
from .spectra import SamplingBudgetError, find_eigenvalues, fredholm_det_ratio, trace_resolvent
from .zeta import ZetaConfig, relative_zeta, relative_zeta_prime0, zeta, zeta_prime0

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class UsageError(ValueError):
    pass


def _pair(text: str | None, what: str) -> tuple[float, float] | None:
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) not in (1, 2):
        raise UsageError(f"--{what}: expected RE[,IM] or LO,HI, got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--{what}: not a number: {text!r}") from None
    return (vals[0], vals[1] if len(vals) == 2 else 0.0)


def _complex(text, what) -> complex | None:
    p = _pair(text, what)
    return None if p is None else complex(*p)


def _cplx(v: complex) -> list[float]:
    v = complex(v)
    return [v.real, v.imag]


def _require(args, name: str):
    if getattr(args, name) is None:
        raise UsageError(f"--{name} is required for '{args.command}'")
    return getattr(args, name)


def _zeta_config(args) -> ZetaConfig:
    return ZetaConfig(theta=args.theta) if args.theta is not None else ZetaConfig()


def _load_interval(path):
    data = read_problem_file(path)
    if data.get("halfline", False):
        raise UsageError(f"{path} is a half-line problem; use the 'halfline' command")
    return problem_from_dict(data)


def _provenance(args, cfg: ZetaConfig | None = None, **extra) -> dict:
    out = {"version": __version__, "command": args.command,
           "integrator": {"rel_tol": DEFAULT_CONFIG.rel_tol, "abs_tol": DEFAULT_CONFIG.abs_tol}}
    if cfg is not None:
        out["zeta"] = cfg.to_dict()
        out["theta"] = cfg.theta
    out.update(extra)
    return out


# -- commands ---------------------------------------------------------------------------------

def cmd_eig(args) -> dict:
    prob, bc = _load_interval(_require(args, "problem"))
    window = _pair(args.window, "window")
    if window is None and args.count is None:
        raise UsageError("eig needs --window LO,HI or --count N")
    spec = find_eigenvalues(prob, bc, window=window, count_target=args.count)
    return {"rows": spec.to_rows(), "zero_modes": spec.zero_modes, "negatives": spec.negatives,
            "search_window": list(spec.search_window), "complete_from_bottom": spec.complete_from_bottom,
            "warnings": spec.warnings, "provenance": _provenance(args, problem=prob.to_dict(), bc=bc.to_dict())}


def cmd_det(args) -> dict:
    prob, bc = _load_interval(_require(args, "problem"))
    z, z0 = _complex(_require(args, "z"), "z"), _complex(_require(args, "z0"), "z0")
    ratio = fredholm_det_ratio(prob, bc, z, z0)
    return {"z": _cplx(z), "z0": _cplx(z0), "det_ratio": _cplx(ratio),
            "provenance": _provenance(args, problem=prob.to_dict(), bc=bc.to_dict())}


def cmd_trace(args) -> dict:
    prob, bc = _load_interval(_require(args, "problem"))
    z = _complex(_require(args, "z"), "z")
    return {"z": _cplx(z), "trace": _cplx(trace_resolvent(prob, bc, z)),
            "provenance": _provenance(args, problem=prob.to_dict(), bc=bc.to_dict())}


def cmd_zeta(args) -> dict:
    prob1, bc1 = _load_interval(_require(args, "problem"))
    cfg = _zeta_config(args)
    s = _complex(args.s, "s")
    if args.problem2 is None:
        res = zeta_prime0(prob1, bc1, cfg)
        out = {"kind": "absolute", "result": res.to_dict()}
        if s is not None:
            out["zeta_s"] = {"s": _cplx(s), "value": _cplx(zeta(s, prob1, bc1, cfg))}
        problems = [prob1.to_dict()]
    else:
        prob2, bc2 = _load_interval(args.problem2)
        if bc1 != bc2:
            raise UsageError("relative zeta needs the same boundary condition in both problem files")
        res = relative_zeta_prime0(prob1, prob2, bc1, cfg)
        out = {"kind": "relative", "result": res.to_dict()}
        if s is not None:
            out["zeta_s"] = {"s": _cplx(s), "value": _cplx(relative_zeta(s, prob1, prob2, bc1, cfg))}
        problems = [prob1.to_dict(), prob2.to_dict()]
    out["provenance"] = _provenance(args, cfg, shift=0.0, problems=problems, bc=bc1.to_dict())
    return out


def cmd_halfline(args) -> dict:
    prob1, a1, a2 = halfline_from_dict(read_problem_file(_require(args, "problem")))
    if args.problem2 is not None:
        prob2, b1, _ = halfline_from_dict(read_problem_file(args.problem2))
        a2 = b1
    else:
        prob2 = prob1
        a2 = a1 if a2 is None else a2
    cfg = _zeta_config(args)
    res = halfline_relative_zeta_prime0(prob1, prob2, a1, a2, cfg)
    out = {"alpha1": a1, "alpha2": a2, "result": res.to_dict(), "pieces": res.pieces}
    z = _complex(args.z, "z")
    if z is not None:
        lam = prob1.lambda1
        jd = jost(prob2, z - lam)
        at_z = {"z": _cplx(z), "jost_f0": _cplx(jd.f0), "jost_f0p": _cplx(jd.f0p),
                "m_function": _cplx(m_function(prob2, a2, z - lam))}
        if prob1 != prob2:
            at_z["perturbation_det"] = _cplx(perturbation_det(prob1, prob2, a2, z))
        if a1 != a2:
            at_z["bc_trace_diff"] = _cplx(bc_trace_diff(prob2, a1, a2, z))
        out["at_z"] = at_z
    out["provenance"] = _provenance(args, cfg, lambda1=prob1.lambda1,
                                    problems=[prob1.to_dict(), prob2.to_dict()])
    return out


def cmd_selfcheck(args) -> dict:
    from .selfcheck import run_all
    # the pass/fail table goes to stderr so that stdout stays a clean document
    checks = run_all(echo=lambda line: print(line, file=sys.stderr, flush=True))
    return {"checks": [c.to_dict() for c in checks], "all_passed": all(c.passed for c in checks),
            "provenance": _provenance(args, ZetaConfig())}


COMMANDS = {"eig": cmd_eig, "det": cmd_det, "trace": cmd_trace, "zeta": cmd_zeta,
            "halfline": cmd_halfline, "selfcheck": cmd_selfcheck}


# -- output -----------------------------------------------------------------------------------

def _flatten(obj, prefix="") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        rows = []
        for k, v in obj.items():
            rows += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
        return rows
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        rows = []
        for i, v in enumerate(obj):
            rows += _flatten(v, f"{prefix}.{i}")
        return rows
    if isinstance(obj, list):
        return [(prefix, ";".join(repr(v) if isinstance(v, float) else str(v) for v in obj))]
    return [(prefix, repr(obj) if isinstance(obj, float) else obj)]


def _plain(obj):
    """Replace numpy scalars and tuples by plain Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def render(result: dict, fmt: str) -> str:
    result = _plain(result)
    if fmt == "json":
        return json.dumps(result, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if "rows" in result:
        w.writerow(["index", "lambda", "multiplicity"])
        for r in result["rows"]:
            w.writerow([r["index"], repr(r["lambda"]), r["multiplicity"]])
    elif "checks" in result:
        w.writerow(["number", "title", "passed", "seconds"])
        for c in result["checks"]:
            w.writerow([c["number"], c["title"], c["passed"], f"{c['seconds']:.3f}"])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten({k: v for k, v in result.items() if k != "provenance"}):
            w.writerow([k, v])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="specdet", description=__doc__)
    ap.add_argument("--version", action="version", version=f"specdet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in [("eig", "eigenvalues in a window or the lowest N"),
                            ("det", "Fredholm determinant ratio F(z)/F(z0)"),
                            ("trace", "trace of the resolvent at z"),
                            ("zeta", "zeta-regularized determinant (absolute or relative)"),
                            ("halfline", "half-line relative determinant and Jost data"),
                            ("selfcheck", "run the closed-form acceptance checks")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--problem", help="TOML problem file")
        p.add_argument("--problem2", help="second problem file (relative quantities)")
        p.add_argument("--z", help="spectral parameter RE,IM")
        p.add_argument("--z0", help="reference spectral parameter RE,IM")
        p.add_argument("--s", help="zeta argument RE,IM")
        p.add_argument("--window", help="eigenvalue window LO,HI")
        p.add_argument("--count", type=int, help="number of eigenvalues from the bottom")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--theta", type=float, help="branch-cut angle in (pi/2, pi)")
        p.add_argument("--out", help="write the result to this file")
    return ap


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _glue_values(argv: list[str]) -> list[str]:
    """Turn ``--z -1,2`` into ``--z=-1,2`` so argparse does not mistake the value for a flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


VALUE_FLAGS = ("--z", "--z0", "--s", "--window", "--theta")


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_values(argv))
    try:
        result = COMMANDS[args.command](args)
    except (UsageError, ValidationError, CoeffError, OSError) as exc:
        return _fail(args, exc, EXIT_VALIDATION)
    except (ArithmeticError, IntegrationError, SamplingBudgetError) as exc:
        return _fail(args, exc, EXIT_NUMERICAL)
    except ValueError as exc:
        return _fail(args, exc, EXIT_VALIDATION)
    _emit(render(result, args.format), args.out)
    if args.command == "selfcheck" and not result["all_passed"]:
        return EXIT_NUMERICAL
    return EXIT_OK


def _fail(args, exc: Exception, code: int) -> int:
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    _emit(render(err, args.format), args.out)
    print(f"specdet {args.command}: {exc}", file=sys.stderr)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
