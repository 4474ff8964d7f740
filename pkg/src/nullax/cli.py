"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a verification check fails,
2 for unreadable input or bad usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import linearized as lin
from .expr import ExprError
from .library import (
    BUMPS_3D,
    BUMPS_SHELL,
    FIELDS_3D,
    FIELDS_SHELL,
    parse_fields,
)
from .nulllag3d import NullLagrangian3D, PotentialSet3D, total_divergence_P
from .shell import NullLagrangianShell, PotentialSetShell, total_divergence_P_shell
from .variational import ExprLagrangian, SumLagrangian, el_residual, invariance_test, sample_points, threads

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
LINEAR_EL_TOL = 1e-10


class InputError(Exception):
    pass


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read(path: str, inputs: dict) -> str:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from None
    inputs[path] = _digest(data)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        raise InputError(f"{path} is not UTF-8 text") from None


def _result(check: str, max_residual: float, tolerance: float, worst=None) -> dict:
    ok = bool(np.isfinite(max_residual)) and max_residual <= tolerance
    return {
        "check": check,
        "status": "pass" if ok else "fail",
        "max_residual": float(max_residual),
        "tolerance": float(tolerance),
        "worst_location": worst,
    }


def _map(fn, items):
    n = threads()
    if n > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(n) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


# -- suites ----------------------------------------------------------------------


def field_checks(L, divergence, specs, bumps, samples: int, seed: int, tol: float, quad: int, inv_tol: float) -> list:
    """EL residual, divergence identity and bump invariance for one Lagrangian."""
    rng = np.random.default_rng(seed)
    points = [sample_points(rng, samples, s.dim) for s in specs]

    def one(k):
        r = el_residual(L, specs[k], points[k])
        el = np.abs(r.values).max(axis=-1) / r.scale
        if divergence is not None:
            d = divergence(specs[k], points[k])
            dv = np.abs(d - r.lagrangian) / (1.0 + np.abs(r.lagrangian))
        else:
            dv = np.zeros_like(el)
        return el, dv

    per_spec = _map(one, list(range(len(specs))))
    out = []
    for name, idx in (("euler_lagrange", 0), ("divergence_identity", 1)):
        if idx == 1 and divergence is None:
            continue
        worst_val, worst = -1.0, None
        for k, vals in enumerate(per_spec):
            v = vals[idx]
            i = int(np.argmax(v))
            if v[i] > worst_val:
                worst_val = float(v[i])
                worst = {"field": specs[k].name or f"field {k + 1}", "x": [float(c) for c in points[k][i]]}
        out.append(_result(name, worst_val, tol, worst))

    if quad > 0 and bumps:
        spec = specs[min(1, len(specs) - 1)]
        worst_val, worst = -1.0, None
        for b, bump in enumerate(bumps):
            inv = invariance_test(L, spec, bump, quad)
            rel = inv.delta / (1.0 + abs(inv.base))
            if rel > worst_val:
                worst_val = rel
                worst = {"field": spec.name, "bump": b, "base": inv.base, "perturbed": inv.perturbed}
        out.append(_result("functional_invariance", worst_val, inv_tol, worst))
    return out


def _with_injection(L, src: str | None, dim: int):
    if not src:
        return L
    try:
        extra = ExprLagrangian(src, dim)
    except ExprError as e:
        raise InputError(f"--inject: {e}") from None
    return SumLagrangian([L, extra], [1.0, 1.0])


def run_verify3d(args, inputs: dict) -> tuple[dict, list]:
    p = PotentialSet3D.from_text(_read(args.file, inputs))
    specs = parse_fields(_read(args.fields, inputs), 3) if args.fields else list(FIELDS_3D)
    L = _with_injection(NullLagrangian3D(p), args.inject, 3)
    results = field_checks(
        L,
        lambda s, x: total_divergence_P(p, s, x),
        specs,
        BUMPS_3D,
        args.samples,
        args.seed,
        args.tol,
        args.quad,
        args.invariance_tol,
    )
    return _settings(args), results


def run_verifyshell(args, inputs: dict) -> tuple[dict, list]:
    p = PotentialSetShell.from_text(_read(args.file, inputs))
    specs = parse_fields(_read(args.fields, inputs), 2) if args.fields else list(FIELDS_SHELL)
    L = _with_injection(NullLagrangianShell(p), args.inject, 2)
    results = field_checks(
        L,
        lambda s, x: total_divergence_P_shell(p, s, x),
        specs,
        BUMPS_SHELL,
        args.samples,
        args.seed,
        args.tol,
        args.quad,
        args.invariance_tol,
    )
    return _settings(args), results


def linear_checks(t: lin.LinearTensors, mode: str, seed: int, samples: int) -> list:
    out = []
    if mode in ("check", "both"):
        ck = lin.check_null_conditions(t)
        worst = None
        if ck.violations:
            fam, idx, r = max(ck.violations, key=lambda v: abs(v[2]))
            worst = {"family": fam, "condition": lin.FAMILIES[fam], "index": list(idx)}
        out.append(_result("null_conditions", lin.max_condition_residual(t), lin.NULL_TOL, worst))
    if mode in ("el", "both"):
        basis = lin.cubic_basis()
        pts = np.random.default_rng(seed).uniform(0.0, 1.0, (samples, 3))
        worst_val, worst = -1.0, None
        for f in basis:
            r = np.abs(lin.el_residual_linear(t, f, pts)).max(axis=-1)
            i = int(np.argmax(r))
            if r[i] > worst_val:
                worst_val = float(r[i])
                worst = {"field": f.name, "x": [float(c) for c in pts[i]]}
        out.append(_result("euler_lagrange", worst_val, LINEAR_EL_TOL, worst))
    return out


def _load_tensors(text: str) -> lin.LinearTensors:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON: {e}") from None
    try:
        return lin.LinearTensors.from_json(data)
    except ValueError as e:
        raise InputError(str(e)) from None


def run_linearized(args, inputs: dict) -> tuple[dict, list]:
    t = _load_tensors(_read(args.file, inputs))
    settings = {"mode": args.mode, "seed": args.seed, "samples": args.samples, "tolerance": LINEAR_EL_TOL}
    return settings, linear_checks(t, args.mode, args.seed, args.samples)


def run_demo(args, inputs: dict) -> tuple[dict, list]:
    results = []
    det = PotentialSet3D.from_text("M[1] = y1")
    for r in field_checks(
        NullLagrangian3D(det),
        lambda s, x: total_divergence_P(det, s, x),
        list(FIELDS_3D),
        BUMPS_3D[:1],
        args.samples,
        args.seed,
        args.tol,
        args.quad,
        args.invariance_tol,
    ):
        r["check"] = "detF/" + r["check"]
        results.append(r)
    sh = PotentialSetShell.from_text("Phat[1] = y2")
    for r in field_checks(
        NullLagrangianShell(sh),
        lambda s, x: total_divergence_P_shell(sh, s, x),
        list(FIELDS_SHELL),
        BUMPS_SHELL[:1],
        args.samples,
        args.seed,
        args.tol,
        args.quad,
        args.invariance_tol,
    ):
        r["check"] = "shell_Phat/" + r["check"]
        results.append(r)
    for r in linear_checks(lin.jacobian_minor(), "both", args.seed, min(args.samples, 10)):
        r["check"] = "minorB/" + r["check"]
        results.append(r)
    return _settings(args), results


def _settings(args) -> dict:
    return {
        "seed": args.seed,
        "tolerance": args.tol,
        "quadrature_order": args.quad,
        "invariance_tolerance": args.invariance_tol,
        "samples": args.samples,
        "inject": getattr(args, "inject", None),
    }


# -- entry point -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, file: bool = True) -> None:
    if file:
        p.add_argument("file")
        p.add_argument("--fields", help="field file (chi[i] = ..., theta[i] = ..., blocks split by ---)")
        p.add_argument("--inject", help="extra Lagrangian term in x, y, t and F11..G33")
    p.add_argument("--samples", type=int, default=100, help="sample points per field")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--quad", type=int, default=16, help="Gauss-Legendre points per axis; 0 skips invariance")
    p.add_argument("--invariance-tol", type=float, default=1e-3)
    p.add_argument("--json", dest="json_out", help="also write the report to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nullax", description="Verify null Lagrangians of Cosserat media.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("verify3d", help="check a 3D potential set"))
    _common(sub.add_parser("verifyshell", help="check a shell potential set"))
    p = sub.add_parser("linearized", help="check linearized moduli from a JSON file")
    p.add_argument("file")
    p.add_argument("--mode", choices=("check", "el", "both"), default="both")
    p.add_argument("--samples", type=int, default=8, help="points per basis field in el mode")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--json", dest="json_out")
    _common(sub.add_parser("demo", help="run the built-in examples"), file=False)
    p = sub.add_parser("generate", help="write admissible linearized moduli as JSON")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="output file (default: stdout)")
    return parser


RUNNERS = {
    "verify3d": run_verify3d,
    "verifyshell": run_verifyshell,
    "linearized": run_linearized,
    "demo": run_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_PASS

    if args.command == "generate":
        text = json.dumps(lin.generate_admissible(args.seed).to_json(), indent=1)
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
        return EXIT_PASS

    start = time.perf_counter()
    inputs: dict = {}
    try:
        settings, results = RUNNERS[args.command](args, inputs)
    except (InputError, ExprError, ValueError) as e:
        print(f"nullax: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    status = "pass" if all(r["status"] == "pass" for r in results) else "fail"
    report = {
        "command": args.command,
        "inputs": inputs,
        "settings": settings,
        "results": results,
        "status": status,
        "wall_time": time.perf_counter() - start,
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.json_out:
        Path(args.json_out).write_text(text + "\n")
    return EXIT_PASS if status == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
