"""Command line interface.

Every subcommand writes its results to ``--out-dir`` in the formats chosen
with ``--format`` and prints a short summary. Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 audit failure,
5 unclassified run, 1 anything else (for example an unwritable directory).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AlmgrenError, ConfigError, NumericError
from .report import (
    EXIT_AUDIT,
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_OTHER,
    EXIT_UNCLASSIFIED,
    FORMATS,
    dumps,
    emit,
    read_report,
    run_scenario,
    table_text,
    write_text,
)

__all__ = ["main", "build_parser", "resolve_threads"]


def resolve_threads(value: int | None) -> int:
    """``--threads`` wins, then ``ALMGREN_THREADS``, then 1."""
    if value is None:
        env = os.environ.get("ALMGREN_THREADS", "").strip()
        if not env:
            return 1
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"ALMGREN_THREADS must be an integer, got {env!r}") from exc
    if value < 1:
        raise ConfigError(f"thread count must be positive, got {value}")
    return int(value)


def _formats(text: str) -> tuple[str, ...]:
    out = tuple(f.strip().lower() for f in text.split(",") if f.strip())
    bad = [f for f in out if f not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"formats must be a comma list from {', '.join(FORMATS)}")
    return out


def _scenarios(names):
    from .scenarios import builtin_scenarios, get_scenario

    if not names:
        return list(builtin_scenarios().values())
    return [get_scenario(n) for n in names]


def _save(args, stem: str, payload: dict | None = None, table=None):
    """Write JSON and/or CSV for a subcommand; SVG only exists for run reports."""
    out = Path(args.out_dir)
    if payload is not None and "json" in args.format:
        write_text(out / f"{stem}.json", dumps(payload))
    if table is not None and "csv" in args.format:
        cols, rows = table
        write_text(out / f"{stem}.csv", table_text(cols, rows))


# ---- subcommands ------------------------------------------------------------
def cmd_eig(args) -> int:
    from .sphere_eig import eigenspace_basis, rayleigh_quotient

    rows, entries = [], []
    for m in range(1, args.m_max + 1):
        basis = eigenspace_basis(m, args.N, args.s)
        for f in basis:
            rq = rayleigh_quotient(f.polynomial, args.N, args.s)
            rows.append([f.degree, f.index + 1, f.eigenvalue, rq, f.residual(), repr(f.polynomial)])
            entries.append({"m": m, "degree": f.degree, "k": f.index + 1, "eigenvalue": f.eigenvalue, "rayleigh": rq, "residual": f.residual(), "polynomial": repr(f.polynomial)})
        print(f"m={m}: dimension {basis.dimension}, eigenvalue {basis.functions[0].eigenvalue if basis.dimension else float('nan'):.6g}")
    stem = f"eig_N{args.N}_s{args.s:g}"
    _save(args, stem, {"N": args.N, "s": args.s, "functions": entries}, (["degree", "k", "eigenvalue", "rayleigh", "residual", "polynomial"], rows))
    return EXIT_OK


def cmd_kernel(args) -> int:
    from .extension import build_kernel

    k = build_kernel(args.s)
    ok = k.ode_residual < 1e-8 and k.kappa_gap < 1e-6
    print(f"s={args.s:g}: kappa={k.kappa:.15g} oracle={k.kappa_oracle:.15g} gap={k.kappa_gap:.2e} ode residual={k.ode_residual:.2e}")
    payload = {"s": args.s, "kappa": k.kappa, "kappa_error": k.kappa_error, "kappa_oracle": k.kappa_oracle, "kappa_gap": k.kappa_gap, "ode_residual": k.ode_residual, "passed": ok}
    _save(args, f"kernel_s{args.s:g}", payload, (["xi", "psi", "dpsi"], np.column_stack([k.grid, k.psi_table, k.dpsi_table]).tolist()))
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_extend(args) -> int:
    from .extension import extend, neumann_trace
    from .fractional_op import apply_fractional_laplacian
    from .scenarios import setup

    worst_all = 0.0
    for sc in _scenarios(args.scenario):
        st = setup(sc)
        if st.u is None:
            print(f"{sc.name}: not a spectral solution, skipped")
            continue
        dom = st.domain
        lo = np.array([b[0] for b in dom.bounds])
        hi = np.array([b[1] for b in dom.bounds])
        frac = (np.arange(args.points) + 0.5) / args.points
        x = lo + np.outer(frac, hi - lo) if dom.N == 1 else lo + (hi - lo) * np.column_stack([frac, frac[::-1] * 0.8 + 0.1])
        trace = neumann_trace(extend(st.u, st.kernel), x)
        expected = st.kernel.kappa * apply_fractional_laplacian(st.u, sc.s)(x)
        rel = np.abs(trace.value - expected) / np.maximum(np.abs(expected), 1e-300)
        worst = float(rel.max())
        worst_all = max(worst_all, worst)
        print(f"{sc.name}: worst relative trace error {worst:.2e} over {len(x)} points")
        cols = [f"x{i + 1}" for i in range(dom.N)] + ["trace", "expected", "relative_error"]
        _save(args, f"{sc.name}_extend", {"scenario": sc.name, "worst_relative_error": worst}, (cols, np.column_stack([x, trace.value, expected, rel]).tolist()))
    return EXIT_OK if worst_all < 1e-4 else EXIT_AUDIT


def cmd_frequency(args) -> int:
    from .frequency import frequency_profile, monotonicity_audit
    from .scenarios import setup

    code = EXIT_OK
    for sc in _scenarios(args.scenario):
        st = setup(sc)
        prof = frequency_profile(st.problem, st.radii, args.threads)
        aud = monotonicity_audit(prof)
        print(f"{sc.name}: gamma={prof.gamma:.8f} (+-{prof.gamma_error:.1e}, {prof.gamma_method}) m0={prof.m0} classified={prof.classified} audit={'pass' if aud.passed else 'FAIL'}")
        payload = {
            "scenario": sc.name,
            "gamma": prof.gamma,
            "gamma_error": prof.gamma_error,
            "m0": prof.m0,
            "classified": prof.classified,
            "limit": prof.limit,
            "audit": {"checks": aud.checks, "witnesses": aud.witnesses},
        }
        rows = np.column_stack([prof.radii, prof.H, prof.D, prof.frequency, prof.eta]).tolist()
        _save(args, f"{sc.name}_frequency", payload, (["r", "H", "D", "N", "eta"], rows))
        if not prof.classified:
            code = max(code, EXIT_UNCLASSIFIED)
        elif not aud.passed:
            code = max(code, EXIT_AUDIT)
    return code


def cmd_blowup(args) -> int:
    from .blowup import blowup_analysis
    from .frequency import frequency_profile
    from .scenarios import setup

    code = EXIT_OK
    for sc in _scenarios(args.scenario):
        st = setup(sc)
        m0 = args.m0
        if m0 is None:
            m0 = frequency_profile(st.problem, st.radii, args.threads).m0
        bl = blowup_analysis(st.problem, m0, st.lambdas, threads=args.threads, route_tolerance=sc.route_tolerance)
        print(f"{sc.name}: m0={m0} beta={np.array2string(bl.beta_a.values, precision=8)} route gap={bl.route_gap:.1e} dominance={bl.dominance:.3g}")
        payload = {
            "scenario": sc.name,
            "m0": m0,
            "labels": bl.labels,
            "beta_route_a": bl.beta_a.values,
            "beta_route_b": bl.beta_b.values,
            "route_gap": bl.route_gap,
            "dominance": bl.dominance if np.isfinite(bl.dominance) else None,
            "classified": bl.classified,
            "flags": list(bl.flags),
        }
        rows = np.column_stack([bl.lambdas, bl.table, bl.discrepancy, bl.trace]).tolist()
        _save(args, f"{sc.name}_blowup", payload, (["lambda"] + list(bl.labels) + ["d", "trace_d"], rows))
        if not bl.classified:
            code = max(code, EXIT_UNCLASSIFIED)
    return code


def cmd_audit(args) -> int:
    from .diagnostics import inequality_audit

    summary = inequality_audit(n=args.n, seed=args.seed, margin=args.margin, threads=args.threads)
    for key in summary.counts:
        print(f"{key}: {summary.violations[key]} violations in {summary.counts[key]} cases, worst ratio {summary.worst_ratio.get(key, float('nan')):.3f}")
    payload = {
        "seed": args.seed,
        "n": args.n,
        "margin": summary.margin,
        "counts": summary.counts,
        "violations": summary.violations,
        "worst_ratio": summary.worst_ratio,
        "constants": summary.constants,
        "passed": summary.passed,
    }
    _save(args, "inequality_audit", payload)
    return EXIT_OK if summary.passed else EXIT_AUDIT


def cmd_run(args) -> int:
    code = EXIT_OK
    for sc in _scenarios(args.scenario):
        rep = run_scenario(sc, threads=args.threads)
        emit(rep, args.out_dir, args.format)
        v = rep.verdict
        failed = [k for k, ok in v["checks"].items() if not ok]
        print(
            f"{sc.name}: m0={v['m0']} gamma={v['gamma']:.8f} classified={v['classified']} "
            f"audits={'pass' if v['audits_passed'] else 'FAIL ' + ','.join(failed)} ({rep.timings['total']:.1f} s)"
        )
        code = max(code, rep.exit_code)
    return code


def cmd_report(args) -> int:
    code = EXIT_OK
    for path in args.reports:
        rep = read_report(path)
        emit(rep, args.out_dir, args.format, timing=False)
        print(f"{rep.name}: re-emitted {','.join(args.format)} to {args.out_dir}")
        code = max(code, rep.exit_code)
    return code


# ---- parser -------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: ALMGREN_THREADS or 1)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--format", type=_formats, default=FORMATS, help="comma list from csv,json,svg")

    p = argparse.ArgumentParser(prog="almgren", description="Boundary vanishing order via a frequency function.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eig", parents=[common], help="half-sphere eigenfunctions")
    e.add_argument("--N", type=int, default=2, choices=(1, 2))
    e.add_argument("--s", type=float, default=0.5)
    e.add_argument("--m-max", type=int, default=5)
    e.set_defaults(func=cmd_eig)

    k = sub.add_parser("kernel", parents=[common], help="extension kernel and Neumann constant")
    k.add_argument("--s", type=float, default=0.5)
    k.set_defaults(func=cmd_kernel)

    x = sub.add_parser("extend", parents=[common], help="Neumann trace check of the extension")
    x.add_argument("scenario", nargs="*", help="shipped scenario names or TOML paths (default: all shipped)")
    x.add_argument("--points", type=int, default=20)
    x.set_defaults(func=cmd_extend)

    f = sub.add_parser("frequency", parents=[common], help="frequency profile and monotonicity audit")
    f.add_argument("scenario", nargs="*")
    f.set_defaults(func=cmd_frequency)

    b = sub.add_parser("blowup", parents=[common], help="blow-up coefficients and profile convergence")
    b.add_argument("scenario", nargs="*")
    b.add_argument("--m0", type=int, default=None, help="order to blow up at (default: classified order)")
    b.set_defaults(func=cmd_blowup)

    a = sub.add_parser("audit", parents=[common], help="randomized inequality audit")
    a.add_argument("--n", type=int, default=100)
    a.add_argument("--seed", type=lambda v: int(v, 0), default=0xA1)
    a.add_argument("--margin", type=float, default=1.1)
    a.set_defaults(func=cmd_audit)

    r = sub.add_parser("run", parents=[common], help="full pipeline with CSV/JSON/SVG reports")
    r.add_argument("scenario", nargs="*")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("report", parents=[common], help="re-emit saved JSON reports")
    rp.add_argument("reports", nargs="+", help="JSON report files")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AlmgrenError as exc:  # pragma: no cover
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
