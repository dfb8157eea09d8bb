"""Command-line entry point: seeded experiments with JSON or CSV output.

Exit codes: 0 success, 1 a check failed, 2 bad configuration or IO.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import random
import sys
from datetime import datetime, timezone
from fractions import Fraction
from importlib import metadata

import numpy as np
import scipy

from . import combinatorics as comb
from . import edge, ensembles, stochastics
from .dunkl import dunkl_joint_moment, dunkl_moment
from .errors import BetaEdgeError, SpecError
from .freeprob import EnsembleSpec, cumulants, moment_coefficient, moment_nc, voiculescu

__all__ = ["main", "run", "build_parser"]

STOCHASTIC = {"walk-mc", "excursion-mc", "airy-laplace", "tridiag-mc", "addition-mc"}
SEED_ENV = "BETAEDGE_SEED"
WINDOWS = ((0.2, 0.8), (0.2, 0.4), (0.4, 0.6), (0.6, 0.8))


class CheckFailed(Exception):
    """Carries a result whose check did not pass."""

    def __init__(self, result):
        super().__init__("check failed")
        self.result = result


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    return str(x)


def _load_spec(args) -> EnsembleSpec:
    if not args.spec:
        raise SpecError("this command needs --spec FILE")
    try:
        return EnsembleSpec.from_json(args.spec)
    except OSError as exc:
        raise SpecError(f"cannot read spec file {args.spec}: {exc}") from exc


# ---- subcommands -------------------------------------------------------------


def cmd_cumulants(args):
    spec = _load_spec(args)
    kind = "finite" if args.N else "limiting"
    cum = cumulants(spec, kind, args.max_index, args.N)
    return {"kind": kind, "rows": [{"l": l, "kappa": cum[l]} for l in range(1, args.max_index + 1)]}


def cmd_moments(args):
    spec = _load_spec(args)
    if args.M is None:
        raise SpecError("moments needs --M")
    M, method = args.M, args.method
    if method in ("nc", "coeff"):
        kind = "finite" if args.N else "limiting"
        cum = cumulants(spec, kind, max(M, 1), args.N)
        v = moment_nc(cum, M) if method == "nc" else moment_coefficient(cum, M)
        return {"M": M, "method": method, "value": v}
    vt = voiculescu(spec, args.N)
    if method == "contour":
        return {"M": M, "method": method, "value": edge.contour_moment(vt, M)}
    params = edge.edge_parameters(vt)
    return {"M": M, "method": method, "value": edge.steepest_descent_moment(params, M)}


def cmd_edge_params(args):
    spec = _load_spec(args)
    return edge.edge_parameters(voiculescu(spec, args.N)).to_dict()


def cmd_universality_check(args):
    spec = _load_spec(args)
    p = edge.edge_parameters(voiculescu(spec, args.N))
    r = edge.universality_residual(p)
    out = {"residual": r, "tolerance": 1e-10, "passed": abs(r) < 1e-10, "params": p.to_dict()}
    if not out["passed"]:
        raise CheckFailed(out)
    return out


def _random_steps(rng: random.Random, kmax: int) -> comb.WeightedStepSystem:
    return comb.WeightedStepSystem({k: Fraction(rng.randint(1, 9), rng.randint(1, 9)) for k in range(-1, kmax + 1)})


def cmd_ballot_verify(args):
    rng = random.Random(args.seed if args.seed is not None else 0)
    rows, ok = [], True
    for L in range(1, (args.L or 10) + 1):
        steps = _random_steps(rng, 3)
        for y0 in range(0, L + 1):
            Z, good = comb.ballot_partition_functions(y0, L, steps)
            hit = good == Fraction(y0, L) * Z
            ok &= hit
            rows.append({"y0": y0, "L": L, "Z": Z, "Z_good": good, "passed": hit})
    out = {"passed": ok, "rows": rows}
    if not ok:
        raise CheckFailed(out)
    return out


def _theta(s):
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"--theta must be a rational number, got {s!r}") from exc


def cmd_dunkl_expand(args):
    spec = _load_spec(args)
    if args.M is None or args.N is None:
        raise SpecError("dunkl-expand needs --N and --M")
    ex = dunkl_moment(spec, args.N, _theta(args.theta), args.M, lowering=args.lowering)
    return {"N": args.N, "theta": ex.theta, "M": args.M, "lowering": args.lowering, "value": ex.moment,
            "ledger": ex.to_records()}


def _step_dist(args):
    spec = _load_spec(args)
    return spec, stochastics.step_distribution(spec, args.N)


def cmd_walk_mc(args):
    spec, dist = _step_dist(args)
    M = args.M or 10_000
    inc = stochastics.sample_excursions(dist, M, args.n, args.seed, args.threads)
    rows = []
    for t1, t2 in WINDOWS:
        est = stochastics.MCEstimate.from_samples(stochastics.downstep_fractions(inc, t1, t2))
        z = (est.mean - dist.p_down) / est.std_error if est.std_error > 0 else 0.0
        rows.append({"t1": t1, "t2": t2, "fraction": est.mean, "std_error": est.std_error, "z": z})
    return {"M": M, "n": args.n, "p_minus1": dist.p_down, "rows": rows}


def cmd_excursion_mc(args):
    spec, dist = _step_dist(args)
    M = args.M or 1024
    b = stochastics.excursion_area_brownian(args.n, args.n_grid, args.seed, args.threads)
    w = stochastics.excursion_area_walk(dist, M, args.n, (args.seed, 1), workers=args.threads)
    z = (b.mean - w.mean) / math.hypot(b.std_error, w.std_error)
    return {"exact": math.sqrt(math.pi / 8), "brownian": b.to_dict(), "walk": w.to_dict(), "z": z}


def cmd_airy_laplace(args):
    est = stochastics.airy_laplace_first_moment(args.T, args.beta, args.n, args.n_grid, args.seed, workers=args.threads)
    out = {"T": args.T, "beta": args.beta, "estimate": est.to_dict()}
    if args.beta == 2:
        out["airy_kernel"] = stochastics.airy2_laplace_exact(args.T)
    return out


def cmd_tridiag_mc(args):
    N, beta = args.N or 200, args.beta
    if args.kind == "laguerre_beta":
        L = args.L or N
        spec = EnsembleSpec.laguerre(L)
    else:
        L, spec = None, EnsembleSpec.semicircle()
    params = edge.edge_parameters(voiculescu(spec, N))
    top, lap = [], []
    for r in range(args.reps):
        s = ensembles.sample_spectrum(args.kind, N, L, beta, stochastics.make_rng(args.seed, r), top=min(N, 100))
        top.append(ensembles.rescaled_top(s.eigenvalues, N, params)[0])
        lap.append(ensembles.empirical_laplace(s, args.T, params))
    return {
        "kind": args.kind, "N": N, "L": L, "beta": beta, "reps": args.reps, "T": args.T,
        "params": params.to_dict(),
        "top_rescaled": stochastics.MCEstimate.from_samples(top).to_dict(),
        "laplace": stochastics.MCEstimate.from_samples(lap).to_dict(),
    }


def cmd_addition_mc(args):
    spec = _load_spec(args)
    N, beta = args.N or 2, int(args.beta)
    ev = ensembles.classical_addition_batch(spec, N, beta, args.reps, stochastics.make_rng(args.seed))
    rows = []
    for k in range(1, (args.M or 3) + 1):
        est = stochastics.MCEstimate.from_samples((ev**k).sum(axis=1))
        row = {"k": k, "mean": est.mean, "std_error": est.std_error}
        if N <= 4:
            row["dunkl"] = float(dunkl_joint_moment(spec, N, Fraction(beta, 2), [k]))
            row["z"] = (est.mean - row["dunkl"]) / est.std_error
        rows.append(row)
    return {"N": N, "beta": beta, "reps": args.reps, "rows": rows}


def cmd_verify_all(args):
    checks = []

    def check(name, ok):
        checks.append({"check": name, "passed": bool(ok)})

    sc = cumulants(EnsembleSpec.semicircle(), max_index=14)
    check("semicircle Catalan", all(moment_nc(sc, 2 * n) == comb.catalan(n) for n in range(1, 8)))
    mp = cumulants(EnsembleSpec.marchenko_pastur(1), max_index=10)
    check("MP Catalan", all(moment_coefficient(mp, M) == comb.catalan(M) for M in range(1, 11)))
    rng = random.Random(0)
    for _ in range(5):
        spec = EnsembleSpec.from_dict({
            "delta": str(Fraction(rng.randint(0, 4), rng.randint(1, 4))),
            "components": [{"alpha": "1", "gamma": str(Fraction(rng.randint(1, 5), rng.randint(1, 3)))}],
        })
        cum = cumulants(spec, max_index=8)
        same = all(
            moment_nc(cum, M) == moment_coefficient(cum, M)
            == sum(comb.walk_weight(w, cum) for w in comb.enumerate_walks(M))
            for M in range(1, 9)
        )
        check(f"cross-route moments {spec.to_dict()}", same)
        p = edge.edge_parameters(voiculescu(spec))
        check("universality identity", abs(edge.universality_residual(p)) < 1e-10)
    steps = _random_steps(rng, 3)
    check("ballot identity", all(
        (lambda zg: zg[1] == Fraction(y0, L) * zg[0])(comb.ballot_partition_functions(y0, L, steps))
        for L in range(1, 9) for y0 in range(L + 1)
    ))
    check("bridge series", all(
        comb.bridge_partition_enum(H, M, steps) == comb.bridge_partition_series(H, M, steps)
        for H in range(4) for M in range(1, 9)
    ))
    lag = EnsembleSpec.laguerre(1)
    check("Gamma(1) moments", all(
        dunkl_moment(lag, 1, 1, M).moment == math.factorial(M) for M in range(1, 7)
    ))
    out = {"passed": all(c["passed"] for c in checks), "checks": checks}
    if not out["passed"]:
        raise CheckFailed(out)
    return out


COMMANDS = {
    "cumulants": cmd_cumulants,
    "moments": cmd_moments,
    "edge-params": cmd_edge_params,
    "universality-check": cmd_universality_check,
    "ballot-verify": cmd_ballot_verify,
    "dunkl-expand": cmd_dunkl_expand,
    "walk-mc": cmd_walk_mc,
    "excursion-mc": cmd_excursion_mc,
    "airy-laplace": cmd_airy_laplace,
    "tridiag-mc": cmd_tridiag_mc,
    "addition-mc": cmd_addition_mc,
    "verify-all": cmd_verify_all,
}


# ---- plumbing ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; unknown keys are rejected")
    common.add_argument("--spec", help="ensemble spec JSON file")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", help="write here instead of stdout")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--no-timestamp", action="store_true")
    common.add_argument("--M", type=int)
    common.add_argument("--N", type=int)
    common.add_argument("--L", type=int)
    common.add_argument("--T", type=float, default=1.0)
    common.add_argument("--beta", type=float, default=2.0)
    common.add_argument("--theta", default="1")
    common.add_argument("--reps", type=int, default=200)
    common.add_argument("--n", "--n-paths", dest="n", type=int, default=1000)
    common.add_argument("--n-grid", type=int, default=1024)

    parser = _Parser(prog="betaedge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "cumulants":
            p.add_argument("--max-index", type=int, default=8)
        elif name == "moments":
            p.add_argument("--method", choices=["nc", "coeff", "contour", "asymptotic"], default="nc")
        elif name == "dunkl-expand":
            p.add_argument("--lowering", choices=["exact", "simplified"], default="exact")
        elif name == "tridiag-mc":
            p.add_argument("--kind", choices=["gaussian_beta", "laguerre_beta"], default="laguerre_beta")
    return parser


def _apply_config(parser, args, argv):
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read config {args.config}: {exc}") from exc
    known = set(vars(args)) - {"config", "command"}
    unknown = set(cfg) - known
    if unknown:
        raise SpecError(f"unknown config fields: {sorted(unknown)}")
    # command-line flags win over the file
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    flags = {a.dest: a.option_strings for a in sub.choices[args.command]._actions}
    given = {d for d, opts in flags.items() if any(t.split("=")[0] in opts for t in argv)}
    for key, value in cfg.items():
        if key not in given:
            setattr(args, key, value)
    return args


def _provenance(args) -> dict:
    prov = {
        "package": "betaedge",
        "version": _version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "seed": args.seed,
    }
    if not args.no_timestamp:
        prov["timestamp"] = datetime.now(timezone.utc).isoformat()
    return prov


def _rows(result):
    if isinstance(result, dict):
        for key in ("rows", "checks", "ledger"):
            if isinstance(result.get(key), list):
                return result[key]
        return [{"key": k, "value": v} for k, v in result.items()]
    return result


def _render(doc, fmt) -> str:
    doc = _jsonable(doc)
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    for k, v in sorted(doc["provenance"].items()):
        buf.write(f"# {k}={v}\n")
    rows = [r if isinstance(r, dict) else {"value": r} for r in _rows(doc["result"])]
    fields = list(dict.fromkeys(k for r in rows for k in r))
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand and write its report; return the exit code."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, args, argv)
        if os.environ.get(SEED_ENV):
            args.seed = int(os.environ[SEED_ENV])
        if args.command in STOCHASTIC and args.seed is None:
            raise SpecError(f"{args.command} is stochastic: pass --seed")
        code = 0
        try:
            result = COMMANDS[args.command](args)
        except CheckFailed as exc:
            result, code = exc.result, 1
        text = _render({"command": args.command, "provenance": _provenance(args), "result": result}, args.format)
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return code
    except (SpecError, OSError, ValueError) as exc:
        print(f"betaedge: error: {exc}", file=sys.stderr)
        return 2
    except BetaEdgeError as exc:
        print(f"betaedge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
