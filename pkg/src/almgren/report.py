"""Pipeline orchestration and report emission.

``run_scenario`` executes the whole chain on one scenario and returns a
``RunReport``. ``emit`` writes it as CSV (one row per radius), JSON (the full
report, schema ``almgren-report/1``) and SVG (log-log height and frequency
plots). Floats are written with 17 significant digits so that parsing the
JSON gives back the exact values. Wall-clock timings are written to a
separate file so the CSV and JSON stay byte-identical across runs and
thread counts.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import blowup_analysis, eigenfunctions_up_to, fourier_coefficients, labels
from .diagnostics import derivative_identity_check, pohozaev_check
from .errors import AlmgrenError, ConfigError
from .frequency import frequency_profile, monotonicity_audit
from .scenarios import Scenario, setup
from .straightening import verify_expansions

__all__ = [
    "SCHEMA",
    "CSV_COLUMNS",
    "RunReport",
    "run_scenario",
    "emit",
    "dumps",
    "loads",
    "read_report",
    "csv_text",
    "table_text",
    "write_text",
    "svg_text",
    "exit_code",
]

SCHEMA = "almgren-report/1"
CSV_COLUMNS = ("r", "H", "D", "N", "eta")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_AUDIT, EXIT_UNCLASSIFIED, EXIT_OTHER = 0, 2, 3, 4, 5, 1


# ---- serialization -----------------------------------------------------------
def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {x!r} in report")
    text = f"{x:.17g}"
    if all(c not in text for c in ".en"):
        text += ".0"
    return text


def _plain(obj):
    """Convert numpy containers and scalars to plain Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [pad + _encode(str(k), indent, level + 1) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with 17-significant-digit floats and stable key order."""
    return _encode(_plain(obj), 2, 0) + "\n"


def loads(text: str):
    return json.loads(text)


# ---- report --------------------------------------------------------------------
@dataclass
class RunReport:
    """Machine-readable outcome of one scenario run.

    Equality ignores the wall-clock timings, which are not serialized with
    the report.
    """

    scenario: dict
    profile: dict
    audit: dict
    blowup: dict
    diagnostics: dict
    verdict: dict
    schema: str = SCHEMA
    version: str = __version__
    timings: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "version": self.version,
            "scenario": self.scenario,
            "verdict": self.verdict,
            "profile": self.profile,
            "audit": self.audit,
            "blowup": self.blowup,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        if data.get("schema") != SCHEMA:
            raise ConfigError(f"unsupported report schema {data.get('schema')!r}")
        return cls(
            scenario=data["scenario"],
            profile=data["profile"],
            audit=data["audit"],
            blowup=data["blowup"],
            diagnostics=data["diagnostics"],
            verdict=data["verdict"],
            schema=data["schema"],
            version=data.get("version", ""),
        )

    @property
    def name(self) -> str:
        return str(self.scenario["name"])

    @property
    def exit_code(self) -> int:
        return exit_code(self.verdict)


def exit_code(verdict: dict) -> int:
    if not verdict.get("classified", False):
        return EXIT_UNCLASSIFIED
    if not verdict.get("audits_passed", False):
        return EXIT_AUDIT
    return EXIT_OK


def _stage(name: str, scenario: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except AlmgrenError as exc:
        raise type(exc)(f"[{name}] scenario {scenario}: {exc}") from exc


def run_scenario(sc: Scenario, threads: int = 1, m0: int | None = None) -> RunReport:
    """Execute the full pipeline on a scenario.

    Stages: build (basis, kernel, chart, reflection), frequency profile and
    monotonicity audit, blow-up at the classified order, and the diagnostics
    that need the scenario field (Pohozaev, derivative identities,
    straightening expansions).
    """
    name = sc.name
    t0 = time.perf_counter()
    times = {}
    st = _stage("setup", name, setup, sc)
    times["setup"] = time.perf_counter() - t0
    prob = st.problem
    r0 = st.domain.r0

    t = time.perf_counter()
    prof = _stage("frequency", name, frequency_profile, prob, st.radii, threads)
    aud = monotonicity_audit(prof)
    times["frequency"] = time.perf_counter() - t

    order = prof.m0 if m0 is None else int(m0)
    t = time.perf_counter()
    bl = _stage("blowup", name, blowup_analysis, prob, order, st.lambdas, None, 2, sc.route_tolerance, threads)
    funcs = eigenfunctions_up_to(prob.N, prob.s, order + 2)
    phis = np.array([fourier_coefficients(prob.field, float(r), funcs, prob.s, prob.orders) for r in prof.radii])
    times["blowup"] = time.perf_counter() - t

    t = time.perf_counter()
    r_poho = 0.8 * r0
    poho = _stage("diagnostics", name, pohozaev_check, prob, r_poho)
    deriv = _stage("diagnostics", name, derivative_identity_check, prob, 0.4 * r0)
    exp_radii = r0 * np.array([0.5, 0.25, 0.125, 0.0625])
    expn = verify_expansions(prob.cf, exp_radii)
    times["diagnostics"] = time.perf_counter() - t

    kernel = st.kernel
    d = bl.discrepancy
    decreasing = bool(np.all(np.diff(d) <= 1e-12 * max(float(d[0]), 1e-300)))
    checks = {
        "kernel": bool(kernel.ode_residual < 1e-8 and kernel.kappa_gap < 1e-6),
        "monotonicity": aud.passed,
        "route_agreement": bl.route_gap <= sc.route_tolerance,
        "dominance": bl.dominance >= 10.0,
        "below_order": bl.below_order < 0.05,
        "bessel": bl.bessel_ok,
        "normalization": bl.normalization_error < 1e-8,
        "profile_convergence": decreasing,
        "pohozaev": poho < 1e-3,
        "expansions": expn.passes(),
    }
    classified = bool(prof.classified and bl.classified and order == prof.m0)
    verdict = {
        "m0": order,
        "gamma": prof.gamma,
        "classified": classified,
        "beta": bl.beta_a.values,
        "audits_passed": all(checks.values()),
        "checks": checks,
    }
    verdict["exit_code"] = exit_code(verdict)

    profile = {
        "radii": prof.radii,
        "H": prof.H,
        "D": prof.D,
        "N": prof.frequency,
        "eta": prof.eta,
        "gamma": prof.gamma,
        "gamma_error": prof.gamma_error,
        "gamma_method": prof.gamma_method,
        "m0": prof.m0,
        "classified": prof.classified,
        "delta": prof.delta,
        "limit": prof.limit,
        "limit_error": prof.limit_error,
        "phi_labels": labels(funcs),
        "phi": phis,
    }
    audit = {
        "checks": aud.checks,
        "witnesses": {k: float(v) for k, v in aud.witnesses.items()},
        "doubling_worst_ratio": aud.details["doubling_worst_ratio"],
        "frequency_min": aud.details["frequency_min"],
        "frequency_lower_bound": prof.frequency_lower_bound(),
    }
    blow = {
        "lambdas": bl.lambdas,
        "labels": bl.labels,
        "table": bl.table,
        "beta_route_a": bl.beta_a.values,
        "beta_route_a_error": bl.beta_a.errors,
        "beta_route_b": bl.beta_b.values,
        "beta_route_b_error": bl.beta_b.errors,
        "beta_route_b_method": bl.beta_b.method,
        "empirical_rate": [x if math.isfinite(x) else None for x in bl.beta_b.rates],
        "route_gap": bl.route_gap,
        "discrepancy": bl.discrepancy,
        "profile_norm": bl.profile_norm,
        "trace_discrepancy": bl.trace,
        "trace_norm": bl.trace_norm,
        "dominance": bl.dominance if math.isfinite(bl.dominance) else None,
        "below_order": bl.below_order,
        "normalization_error": bl.normalization_error,
        "upsilon_scaled": bl.upsilon_scaled,
        "flags": list(bl.flags),
    }
    diag = {
        "kernel": {"kappa": kernel.kappa, "kappa_oracle": kernel.kappa_oracle, "kappa_gap": kernel.kappa_gap, "ode_residual": kernel.ode_residual},
        "weak_residual": st.weak_residual,
        "pohozaev": {"r": r_poho, "gap": poho},
        "derivative_identities": {"r": deriv.r, "gaps": deriv.gaps, "slack": deriv.slack},
        "expansions": {"radii": exp_radii, "slopes": {k: (v if math.isfinite(v) else None) for k, v in expn.slopes.items()}},
    }
    times["total"] = time.perf_counter() - t0
    return RunReport(sc.to_dict(), _plain(profile), _plain(audit), _plain(blow), _plain(diag), _plain(verdict), timings=times)


# ---- emitters -------------------------------------------------------------------
def table_text(columns, rows) -> str:
    """Generic CSV: floats with 17 significant digits, other cells as text."""

    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return _fmt_float(float(v))
        text = str(v)
        return '"' + text.replace('"', '""') + '"' if any(c in text for c in ',"\n') else text

    lines = [",".join(columns)] + [",".join(cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def csv_text(report: RunReport) -> str:
    """One row per radius: r, H, D, N, eta and the Fourier coefficients at r."""
    p = report.profile
    cols = list(CSV_COLUMNS) + list(p["phi_labels"])
    lines = [",".join(cols)]
    for i, r in enumerate(p["radii"]):
        row = [r, p["H"][i], p["D"][i], p["N"][i], p["eta"][i]] + list(p["phi"][i])
        lines.append(",".join(_fmt_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def blowup_csv_text(report: RunReport) -> str:
    """One row per blow-up scale: lambda, phi columns, d(lambda), trace discrepancy."""
    b = report.blowup
    cols = ["lambda"] + list(b["labels"]) + ["d", "trace_d"]
    lines = [",".join(cols)]
    for i, lam in enumerate(b["lambdas"]):
        row = [lam] + list(b["table"][i]) + [b["discrepancy"][i], b["trace_discrepancy"][i]]
        lines.append(",".join(_fmt_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _panel(xs, ys, x0, y0, w, h, title, xlabel, ylabel, line=None) -> list[str]:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    allx = xs
    ally = ys if line is None else np.concatenate([ys, line[1]])
    xmin, xmax = float(allx.min()), float(allx.max())
    ymin, ymax = float(ally.min()), float(ally.max())
    if ymax - ymin < 1e-12:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def px(x):
        return x0 + (x - xmin) / (xmax - xmin) * w

    def py(y):
        return y0 + h - (y - ymin) / (ymax - ymin) * h

    out = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>',
        f'<text x="{x0 + w / 2:.1f}" y="{y0 - 8}" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{x0 + w / 2:.1f}" y="{y0 + h + 30}" text-anchor="middle" font-size="11">{xlabel}</text>',
        f'<text x="{x0 - 40}" y="{y0 + h / 2:.1f}" text-anchor="middle" font-size="11" transform="rotate(-90 {x0 - 40} {y0 + h / 2:.1f})">{ylabel}</text>',
    ]
    for val in (ymin + pad, ymax - pad):
        out.append(f'<text x="{x0 - 4}" y="{py(val):.1f}" text-anchor="end" font-size="9">{val:.3g}</text>')
    for val in (xmin, xmax):
        out.append(f'<text x="{px(val):.1f}" y="{y0 + h + 14}" text-anchor="middle" font-size="9">{val:.3g}</text>')
    pts = " ".join(f"{px(x):.3f},{py(y):.3f}" for x, y in zip(xs, ys))
    out.append(f'<polyline class="data" fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{pts}"/>')
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{px(x):.3f}" cy="{py(y):.3f}" r="2.2" fill="#1f5fa8"/>')
    if line is not None:
        lx, ly = line
        out.append(
            f'<line class="fit" x1="{px(lx[0]):.3f}" y1="{py(ly[0]):.3f}" x2="{px(lx[1]):.3f}" y2="{py(ly[1]):.3f}" '
            'stroke="#c0392b" stroke-dasharray="5,3"/>'
        )
    return out


def svg_text(report: RunReport) -> str:
    """Two panels: log10 H against log10 r with the fitted slope 2 gamma, and
    the frequency against log10 r with the fitted limit."""
    p = report.profile
    r = np.asarray(p["radii"], float)
    H = np.asarray(p["H"], float)
    Nf = np.asarray(p["N"], float)
    g = float(p["gamma"])
    lr = np.log10(r)
    lh = np.log10(H)
    ends = np.array([lr.min(), lr.max()])
    lim = float(p["limit"])
    fit_h = (ends, 2.0 * g * ends + math.log10(lim))
    fit_n = (ends, np.array([g, g]))
    W, Hh = 820, 360
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hh}" viewBox="0 0 {W} {Hh}">',
        f'<title>{report.name}: gamma = {g:.6f}</title>',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    body += _panel(lr, lh, 70, 40, 310, 260, "height", "log10 r", "log10 H", fit_h)
    body += _panel(lr, Nf, 480, 40, 310, 260, "frequency", "log10 r", "N(r)", fit_n)
    body.append("</svg>")
    return "\n".join(body) + "\n"


FORMATS = ("csv", "json", "svg")


def emit(report: RunReport, out_dir, formats=FORMATS, timing: bool = True) -> list[Path]:
    """Write the requested formats to ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    bad = set(formats) - set(FORMATS)
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        stem = out / report.name
        if "csv" in formats:
            written.append(_write(stem.with_suffix(".csv"), csv_text(report)))
            written.append(_write(out / f"{report.name}_blowup.csv", blowup_csv_text(report)))
        if "json" in formats:
            written.append(_write(stem.with_suffix(".json"), dumps(report.to_dict())))
        if "svg" in formats:
            written.append(_write(stem.with_suffix(".svg"), svg_text(report)))
        if timing and report.timings:
            written.append(_write(out / f"{report.name}.timing.json", dumps({"wall_clock_seconds": report.timings})))
        return written
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_text(path, text: str) -> Path:
    """Write ``text`` to ``path``, creating parent directories."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return _write(path, text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_report(path) -> RunReport:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from exc
    try:
        data = loads(text)
    except ValueError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return RunReport.from_dict(data)
