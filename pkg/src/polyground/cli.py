"""Command-line driver: polyground {solve,project,verify-pohozaev,logsob,norms,oracle}.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime as _dt
import logging
import math
import os
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import gamma

from . import __version__
from .box import check_am_gm_chain, plancherel_sides, random_band_limited
from .ground_state import InitError, SolverConfig, minimize, verify_result
from .inequalities import (
    bound_constant_check,
    c_nlog,
    chain_lemma_bound,
    classical_constant,
    classical_ls_gap,
    log_sobolev_sides,
    normalize,
    optimal_alpha,
)
from .io import SchemaError, load_field, read_json, report_text, save_field, write_report
from .nonlinearity import critical_exponent, from_label, regularize
from .radial import (
    DegenerateGridError,
    NonFiniteError,
    field_from_function,
    l2_norm_sq,
    make_grid,
    polyharmonic_seminorm_sq,
)
from .variational import (
    NotInPError,
    kinetic,
    manifold_report,
    pde_residual,
    pohozaev_deficit,
    potential,
    project_to_manifold,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("polyground")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        try:
            t = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
        except ValueError as exc:
            raise UsageError(f"SOURCE_DATE_EPOCH: not an integer: {epoch!r}") from exc
    else:
        t = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return t.isoformat()


def _thread_limit():
    raw = os.environ.get("POLYGROUND_THREADS")
    if raw is None or raw == "":
        return contextlib.nullcontext()
    try:
        k = int(raw)
    except ValueError as exc:
        raise UsageError(f"POLYGROUND_THREADS: expected a positive integer, got {raw!r}") from exc
    if k < 1:
        raise UsageError(f"POLYGROUND_THREADS: expected a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=k)


def _out_dir(args) -> Optional[Path]:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, command: str, extra: Optional[dict] = None) -> None:
    doc = {
        "command": command,
        "config_path": getattr(args, "config", None),
        "field_path": getattr(args, "field", None),
        "out_dir": str(args.out),
        "timestamp": _timestamp(),
        "tool_version": __version__,
        "seed": getattr(args, "seed", None),
    }
    if extra:
        doc.update(extra)
    write_report(doc, out / "manifest.json")


def _emit(doc: dict, out: Optional[Path], name: str) -> None:
    text = report_text(doc)
    sys.stdout.write(text)
    if out is not None:
        (out / name).write_text(text)


def _check_m(m: int, dim: int) -> None:
    if m < 1 or 2 * m >= dim:
        raise UsageError(f"--m: need 1 <= m and 2m < N={dim}, got {m}")


def _spec(label: str, dim: int, m: int):
    try:
        return from_label(label, two_star=critical_exponent(dim, m).two_star)
    except ValueError as exc:
        raise UsageError(f"--nl: {exc}") from exc


# -- subcommands ------------------------------------------------------------

def cmd_solve(args) -> int:
    doc = read_json(args.config)
    if not isinstance(doc, dict):
        raise SchemaError("document", "config must be a JSON object")
    if args.seed is not None:
        doc = dict(doc, seed=args.seed)
    try:
        cfg = SolverConfig.from_dict(doc)
        from_label(cfg.nonlinearity, two_star=critical_exponent(cfg.N, cfg.m).two_star)
    except (TypeError, ValueError) as exc:
        raise SchemaError("config", str(exc)) from exc
    out = _out_dir(args)
    if out is None:
        raise UsageError("solve requires --out")
    try:
        res = minimize(cfg)
    except InitError as exc:
        raise NumericalFailure(str(exc)) from exc
    spec = from_label(cfg.nonlinearity)
    ver = verify_result(res, spec, cfg.m)
    summary = res.summary()
    summary["config"] = cfg.to_dict()
    summary["verification"] = ver.to_dict()
    if res.converged:
        C = c_nlog(res.inf_J_estimate, cfg.N, cfg.m) if res.inf_J_estimate > 0 else None
        summary["C_nlog_estimate"] = C
    _write_manifest(out, args, "solve", {"seed": cfg.seed})
    write_report(summary, out / "result.json")
    write_report(res.energy.to_dict(), out / "energy.json")
    save_field(res.field, out / "field.json")
    sys.stdout.write(report_text({k: summary[k] for k in
                                  ("converged", "inf_J_estimate", "residual", "relative_deficit",
                                   "iterations", "message")}))
    if not res.converged:
        raise NumericalFailure(f"minimisation did not converge: {res.message}")
    return EXIT_OK


def cmd_project(args) -> int:
    u = load_field(args.field)
    _check_m(args.m, u.dim)
    spec = _spec(args.nl, u.dim, args.m)
    target = spec
    if args.eps is not None:
        try:
            target = regularize(spec, args.eps, critical_exponent(u.dim, args.m))
        except ValueError as exc:
            raise UsageError(f"--eps: {exc}") from exc
    try:
        v = project_to_manifold(u, target, args.m)
    except NotInPError as exc:
        raise NumericalFailure(str(exc)) from exc
    rep = manifold_report(v, target, args.m).to_dict()
    rep["applied_scaling"] = u.grid.radius / v.grid.radius
    rep["eps"] = args.eps
    out = _out_dir(args)
    if out is not None:
        _write_manifest(out, args, "project")
        save_field(v, out / "field.json")
    _emit(rep, out, "manifold.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    u = load_field(args.field)
    _check_m(args.m, u.dim)
    spec = _spec(args.nl, u.dim, args.m)
    K = kinetic(u, args.m)
    d = pohozaev_deficit(u, spec, args.m)
    rep = {
        "kinetic": K,
        "potential": potential(u, spec),
        "deficit": d,
        "relative_deficit": d / K if K > 0 else None,
        "residual": pde_residual(u, spec, args.m).rel_norm,
        "member": manifold_report(u, spec, args.m).member,
        "mass": l2_norm_sq(u),
    }
    if spec.label == "log" and rep["mass"] > 0:
        rep["sharpness_ratio"] = K / rep["mass"]
        rep["sharpness_target"] = u.dim / (2.0 * args.m)
    out = _out_dir(args)
    if out is not None:
        _write_manifest(out, args, "verify-pohozaev")
    _emit(rep, out, "pohozaev.json")
    return EXIT_OK


def cmd_logsob(args) -> int:
    u = load_field(args.field)
    N = u.dim
    _check_m(args.m, N)
    if (args.constant is None) == (args.from_solve is None):
        raise UsageError("logsob needs exactly one of --constant or --from-solve")
    if args.constant is not None:
        C = args.constant
        if not C > 0:
            raise UsageError(f"--constant: must be positive, got {C}")
        source = "given"
    else:
        doc = read_json(args.from_solve)
        if not isinstance(doc, dict) or "inf_J_estimate" not in doc:
            raise SchemaError("inf_J_estimate", f"missing in {args.from_solve}")
        inf_J = doc["inf_J_estimate"]
        if not isinstance(inf_J, (int, float)) or not inf_J > 0:
            raise SchemaError("inf_J_estimate", f"expected a positive number, got {inf_J!r}")
        C = c_nlog(float(inf_J), N, args.m)
        source = "c_nlog(inf_J_estimate), estimate"
    if l2_norm_sq(u) <= 0:
        raise UsageError("--field: zero field cannot be normalised")
    v = normalize(u)
    rep = log_sobolev_sides(v, C, N, args.m).to_dict()
    rep["constant_source"] = source
    rep["optimal_alpha"] = optimal_alpha(v, N, args.m)
    rep["chain"] = chain_lemma_bound(v, N, args.m, C).to_dict() if N > 2 * args.m else None
    out = _out_dir(args)
    if out is not None:
        _write_manifest(out, args, "logsob")
    _emit(rep, out, "logsob.json")
    return EXIT_OK


def cmd_norms(args) -> int:
    if args.m not in (1, 2, 3):
        raise UsageError(f"--m: box checks need 1 <= m <= 3, got {args.m}")
    if args.size not in (8, 16, 32, 64):
        raise UsageError(f"--size: must be 8, 16, 32 or 64, got {args.size}")
    if args.count < 1:
        raise UsageError("--count: must be positive")
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    worst, holds, pl = 0.0, True, 0.0
    for _ in range(args.count):
        u = random_band_limited(3, args.size, max(1, args.size // 4), rng)
        rep = check_am_gm_chain(u, args.m)
        holds = holds and rep.holds
        worst = max(worst, rep.worst_ratio)
        a, b = plancherel_sides(u)
        pl = max(pl, abs(a - b) / b)
    doc = {"m": args.m, "dim_box": 3, "size": args.size, "fields": args.count,
           "holds": holds, "worst_ratio": worst, "plancherel_max_rel_error": pl}
    out = _out_dir(args)
    if out is not None:
        _write_manifest(out, args, "norms")
    _emit(doc, out, "norms.json")
    return EXIT_OK if holds else EXIT_NUMERICAL


def gaussian_oracle(N: int, n: int = 2048, R: float = 12.0) -> dict:
    grid = make_grid(N, R, n)
    u = field_from_function(grid, lambda r: np.exp(-r * r / 2))
    rows = {}
    exact_l2 = math.pi ** (N / 2)
    rows["l2_norm_sq"] = (l2_norm_sq(u), exact_l2)
    for m in range(1, (N - 1) // 2 + 1):
        exact = exact_l2 * gamma(N / 2 + m) / gamma(N / 2)
        rows[f"seminorm_sq_m{m}"] = (polyharmonic_seminorm_sq(u, m), exact)
    v = normalize(u)
    exact_side = -(N / 4) * (1 + math.log(math.pi))
    rep = log_sobolev_sides(v, classical_constant(N, 1), N, 1)
    rows["classical_ls_lhs"] = (rep.lhs, exact_side)
    rows["classical_ls_rhs"] = (rep.rhs, exact_side)
    rows["classical_ls_gap"] = (classical_ls_gap(v, N), 0.0)
    out = {}
    for k, (val, exact) in rows.items():
        err = abs(val - exact) / abs(exact) if exact != 0 else abs(val)
        out[k] = {"value": val, "exact": exact,
                  "error": err, "error_kind": "relative" if exact != 0 else "absolute"}
    return {"case": f"gaussian-n{N}", "grid": {"n": n, "R": R}, "values": out}


def cmd_oracle(args) -> int:
    m = re.fullmatch(r"gaussian-n(\d+)", args.case or "")
    if not m:
        raise UsageError(f"--case: unknown oracle {args.case!r} (expected gaussian-n<N>, e.g. gaussian-n5)")
    N = int(m.group(1))
    if N < 3:
        raise UsageError("--case: dimension must be at least 3")
    doc = gaussian_oracle(N)
    out = _out_dir(args)
    if out is not None:
        _write_manifest(out, args, "oracle")
    _emit(doc, out, "oracle.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polyground", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"polyground {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="compute a ground-state candidate")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("project", help="dilate a field onto M (or M_eps with --eps)")
    s.add_argument("--field", required=True)
    s.add_argument("--nl", default="log")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("verify-pohozaev", help="Pohozaev deficit and PDE residual of a field")
    s.add_argument("--field", required=True)
    s.add_argument("--nl", default="log")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("logsob", help="both sides of the polyharmonic log-Sobolev inequality")
    s.add_argument("--field", required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--constant", type=float)
    s.add_argument("--from-solve", dest="from_solve")
    s.add_argument("--out")
    s.set_defaults(func=cmd_logsob)

    s = sub.add_parser("norms", help="Fourier norm chain on random periodic box fields")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--size", type=int, default=16)
    s.add_argument("--count", type=int, default=50)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_norms)

    s = sub.add_parser("oracle", help="closed-form Gaussian checks")
    s.add_argument("--case", default="gaussian-n5")
    s.add_argument("--out")
    s.set_defaults(func=cmd_oracle)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"polyground: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except (UsageError, SchemaError, NonFiniteError) as exc:
        print(f"polyground: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, DegenerateGridError, NotInPError) as exc:
        print(f"polyground: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"polyground: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
