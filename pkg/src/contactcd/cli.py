"""Command line entry points: ``analyze``, ``verify``, ``simulate`` and ``models``.

Exit codes: 0 success, 1 a verification or simulation check failed, 2 usage or
model error.  Reports are JSON with sorted keys and contain no timing unless
``--timing`` is given, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .cd import FORMS, OBJECTIVES, CdError, analyze, cd_params, estimate_constants, gap_and_poincare
from .frame import ContactModel, FrameError
from .heatsim import (
    SimConfig,
    SimulationError,
    check_gradient_bound,
    dump_csv,
    estimate_semigroup,
    omega_bound,
    simulate_paths,
    variance_decay_rate,
)
from .jets import Polynomial
from .models import CATALOG, ModelError, catalog, dump_model, resolve
from .operators import verify_bochner, verify_cd, verify_converse

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CHECKS = ("completeness", "moment", "gradient", "variance", "first-variation")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    """Make a report JSON-safe: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def model_hash(model: ContactModel) -> str:
    return hashlib.sha256(json.dumps(_clean(dump_model(model)), sort_keys=True).encode()).hexdigest()[:16]


def envelope(command: str, model: ContactModel | None, parameters: dict, results: dict,
             residuals: dict | None = None) -> dict:
    env = {"tool": "contactcd", "version": __version__, "command": command, "parameters": parameters,
           "results": results}
    if model is not None:
        env["model"] = {**model.describe(), "hash": model_hash(model)}
    if residuals is not None:
        env["residuals"] = residuals
    return env


def _model(args) -> ContactModel:
    params = {k: getattr(args, k) for k in ("a", "b", "n") if getattr(args, k, None) is not None}
    name = args.model
    if name in CATALOG and not params and "(" not in name:
        params = dict(CATALOG[name].params)
    return resolve(name, **params)


def _test_function(model: ContactModel, args) -> Polynomial:
    """Default observable: a matrix entry on groups, a seeded random cubic on charts."""
    D = model.ambient_dim
    if model.kind == "lie":
        entry = args.entry if args.entry is not None else 1
        if not 0 <= entry < D:
            raise UsageError(f"--entry must lie in [0, {D})")
        return Polynomial.coordinate(entry, D)
    rng = np.random.default_rng([int(args.seed), 7])
    return Polynomial.random(rng, D, 3, n_terms=8, scale=0.5)


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> tuple[int, dict]:
    model = _model(args)
    rep = analyze(model, samples=args.samples, seed=args.seed, objective=args.objective, form=args.form)
    params = {"samples": args.samples, "seed": args.seed, "objective": args.objective, "form": args.form}
    return EXIT_OK, envelope("analyze", model, params, rep.to_dict())


def cmd_verify(args, ric_override=None) -> tuple[int, dict]:
    """Bochner, rescaled, converse and curvature-dimension sweeps.

    ``ric_override`` replaces the curvature matrix in the horizontal identity;
    tests use it to confirm that a corrupted formula makes the command fail.
    """
    model = _model(args)
    bo = verify_bochner(model, args.count, args.seed, ric_override=ric_override, tol=args.tol)
    cv = verify_converse(model, max(1, args.count // 2), args.seed, form=args.form, tol=args.tol)
    consts = estimate_constants(model, args.samples, args.seed)
    cdr = verify_cd(model, consts, args.count, args.seed, form=args.form, tol=args.tol)
    sweeps = {"bochner": bo, "converse": cv, "cd": cdr}
    ok = all(s.ok for s in sweeps.values())
    results = {"ok": ok, "failures": [f"{k}:{name}" for k, s in sweeps.items() for name in s.failures()]}
    residuals = {k: s.to_dict() for k, s in sweeps.items()}
    params = {"count": args.count, "seed": args.seed, "tol": args.tol, "samples": args.samples, "form": args.form}
    return (EXIT_OK if ok else EXIT_FAIL), envelope("verify", model, params, results, residuals)


def cmd_simulate(args) -> tuple[int, dict]:
    model = _model(args)
    check = args.check
    cfg = SimConfig(model, t=args.t, dt=args.dt, paths=args.paths, seed=args.seed,
                    escape_radius=args.radius if model.kind == "chart" else None)
    params = {"check": check, "t": args.t, "dt": args.dt, "paths": args.paths, "seed": args.seed,
              "radius": cfg.escape_radius}
    if check == "completeness":
        ens = simulate_paths(cfg)
        frac = ens.escaped_fraction
        limit = 0.0 if model.kind == "lie" else 1e-3
        res = {"escaped_fraction": frac, "limit": limit, "holds": frac <= limit, "meta": ens.meta}
        if args.csv:
            dump_csv(ens, args.csv)
    elif check == "moment":
        if model.kind != "chart" or not model.name.startswith("heisenberg"):
            raise UsageError("--check moment applies to heisenberg models")
        n2 = 2 * model.n
        D = model.ambient_dim
        f = sum((Polynomial.coordinate(i, D) * Polynomial.coordinate(i, D) for i in range(n2)), Polynomial.zero(D))
        est = estimate_semigroup(cfg, f)
        expected = 2.0 * n2 * args.t
        res = {**est, "expected": expected, "holds": abs(est["mean"] - expected) <= 3 * est["stderr"]}
    elif check == "gradient":
        c = estimate_constants(model, args.samples, args.seed)
        gp = gap_and_poincare(cd_params(c))
        if gp["sigma"] is None:
            raise UsageError("gradient bound needs a CD certificate with rho2 > 0")
        f = _test_function(model, args)
        times = args.times or [args.t]
        rows = [check_gradient_bound(SimConfig(model, t=t, dt=args.dt, paths=args.paths, seed=args.seed), f, gp,
                                     form=args.bound_form) for t in times]
        res = {"rows": rows, "holds": all(r["holds"] for r in rows), "sigma": gp["sigma"],
               "deltaCoeff": gp["deltaCoeff"], "form": args.bound_form}
    elif check == "variance":
        if model.kind != "lie" or not model.backend.compact:
            raise UsageError(f"--check variance needs a compact model; {model.name} is not")
        c = estimate_constants(model, args.samples, args.seed)
        gap = gap_and_poincare(cd_params(c))["gapLowerBound"]
        r = variance_decay_rate(cfg, _test_function(model, args), burn_in=args.burn_in)
        bound = None if gap is None else 2 * gap
        holds = True if bound is None or r["rateEstimate"] is None else r["rateEstimate"] >= bound - r["halfWidth"]
        res = {**r, "rateLowerBound": bound, "holds": holds}
    else:  # first-variation
        ens = simulate_paths(SimConfig(model, t=args.t, dt=args.dt, paths=args.paths, seed=args.seed,
                                       escape_radius=cfg.escape_radius, first_variation=True))
        norms = np.linalg.norm(ens.alpha, axis=(1, 2))
        b = omega_bound(model)
        bound = b["C1"] * math.exp(b["C2"] * args.t)
        mean, se = float(norms.mean()), float(norms.std(ddof=1) / math.sqrt(len(norms)))
        res = {"mean_norm": mean, "stderr": se, "bound": bound, **b, "holds": mean <= bound + 3 * se}
    code = EXIT_OK if res.get("holds", True) else EXIT_FAIL
    return code, envelope("simulate", model, params, res)


def cmd_models(args) -> tuple[int, dict]:
    return EXIT_OK, envelope("models", None, {}, {"models": catalog()})


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="contactcd", description="Curvature-dimension bounds on contact manifolds")
    p.add_argument("--version", action="version", version=f"contactcd {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=0):
        sp.add_argument("model", help="builtin name such as heisenberg, twisted(0,1) or a .json model file")
        sp.add_argument("--a", type=float)
        sp.add_argument("--b", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--seed", type=int, default=seed)
        sp.add_argument("--samples", type=int, default=64, help="sample points for the constants")
        sp.add_argument("--json", metavar="PATH", help="write the report here instead of stdout")
        sp.add_argument("--timing", action="store_true", help="add wall-clock time (breaks byte-identity)")

    a = sub.add_parser("analyze", help="constants, CD parameters and certificates")
    common(a)
    a.add_argument("--objective", choices=OBJECTIVES, default="spectral_gap")
    a.add_argument("--form", choices=FORMS, default="corrected")

    v = sub.add_parser("verify", help="identity and inequality sweeps")
    common(v)
    v.add_argument("--count", type=int, default=100)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--form", choices=FORMS, default="corrected",
                   help="check the corrected or the published inequality and converse")

    s = sub.add_parser("simulate", help="Monte Carlo checks of the heat semigroup")
    common(s)
    s.add_argument("--check", choices=CHECKS, default="completeness")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--times", type=float, nargs="+", help="several times for --check gradient")
    s.add_argument("--dt", type=float, default=0.02)
    s.add_argument("--paths", type=int, default=10_000)
    s.add_argument("--radius", type=float, default=100.0, help="escape radius for chart models")
    s.add_argument("--burn-in", type=float, default=6.0)
    s.add_argument("--entry", type=int, help="matrix entry used as observable on group models")
    s.add_argument("--bound-form", choices=("proof", "statement"), default="proof")
    s.add_argument("--csv", metavar="PATH", help="dump terminal points (completeness check)")

    m = sub.add_parser("models", help="list shipped models")
    m.add_argument("--json", metavar="PATH")
    m.add_argument("--timing", action="store_true")
    return p


COMMANDS = {"analyze": cmd_analyze, "verify": cmd_verify, "simulate": cmd_simulate, "models": cmd_models}


def run(argv=None, **hooks) -> tuple[int, str]:
    """Run a command and return ``(exit code, output text)`` without printing."""
    try:
        args = build_parser().parse_args(argv)
        start = time.perf_counter()
        fn = COMMANDS[args.command]
        code, report = fn(args, **hooks) if hooks else fn(args)
        if args.timing:
            report["timing"] = {"seconds": time.perf_counter() - start}
    except UsageError as exc:
        return EXIT_USAGE, json.dumps({"error": "usage", "message": str(exc)})
    except (ModelError, FrameError, SimulationError, CdError, ValueError) as exc:
        return EXIT_USAGE, json.dumps({"error": type(exc).__name__, "message": str(exc)})
    text = json.dumps(_clean(report), indent=1, sort_keys=True, ensure_ascii=False)
    if getattr(args, "json", None):
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return code, text


def main(argv=None) -> int:
    code, text = run(argv)
    stream = sys.stdout if code != EXIT_USAGE else sys.stderr
    if code == EXIT_USAGE or not _writes_file(argv):
        print(text, file=stream)
    return code


def _writes_file(argv) -> bool:
    argv = sys.argv[1:] if argv is None else argv
    return "--json" in argv or any(a.startswith("--json=") for a in argv)


if __name__ == "__main__":
    sys.exit(main())
