"""Batch command-line front end.

Commands: verify, family, converge, identities. Exit status 0 means every
gate and check passed, 1 a usage or domain error, 2 an inequality or identity
failure, 3 a gate rejection.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import extrinsic as ex
from . import harness as hn
from . import slices as sl
from . import spacetime as st
from .config import RunConfig, load_config, parse_resolution
from .mesh import HarmonicProfile, build_grid

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_GATE = 0, 1, 2, 3
DEFAULTS_LINE = "defaults: m=1, lambda=1, grid 64x128, seed 0, threads 1"

FAMILY_COLUMNS = [
    "index", "family", "n_theta", "n_phi", "accepted", "reason",
    "lhs", "rhs", "gap", "killing_flux", "tolerance", "holds",
    "min_future_expansion", "min_past_expansion",
    "margin_spacelike", "margin_mean_convex", "margin_expansion", "margin_convex_static",
]
CONVERGENCE_COLUMNS = ["quantity", "n_theta", "n_phi", "value", "error", "order", "status"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    path.write_text(buf.getvalue())


def report_header(cfg: RunConfig) -> list[str]:
    res = ", ".join(f"{a}x{b}" for a, b in cfg.resolutions)
    lams = ", ".join(repr(x) for x in cfg.lambdas)
    return [
        f"gpverify {cfg.command}",
        f"m={cfg.m!r} lambdas=[{lams}] resolutions=[{res}] seed={cfg.seed} threads={cfg.threads}",
        f"tolerances: identity={cfg.tolerance('identity')!r} inequality={cfg.tolerance('inequality')!r}",
        DEFAULTS_LINE,
    ]


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(lines: list[str], path: Path | None = None) -> None:
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if path is not None:
        path.write_text(text)


def _ineq_tol(cfg: RunConfig, report: hn.InequalityReport) -> float:
    return max(cfg.tolerance("inequality"), 10.0 * abs(report.killing_flux))


# ---------------------------------------------------------------------------
# verify


def cmd_verify(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    spec = cfg.surface_spec()
    grid = build_grid(*cfg.resolutions[0])
    header = report_header(cfg)
    surface, reason, margins = hn.gate_surface(spec, grid)
    record = {"header": header, "config": cfg.model_dump(mode="json"), "surface": spec.to_dict()}
    if reason is not None:
        record.update(rejected=True, reason=reason, gate_margins=margins)
        _write_json(out / "report.json", record)
        code = EXIT_USAGE if reason.startswith(("domain", "invalid")) else EXIT_GATE
        _emit(header + [f"REJECTED: {reason}", f"exit {code}"], out / "summary.txt")
        return code

    report = hn.evaluate_surface(surface, margins)
    tol = _ineq_tol(cfg, report)
    id_tol = cfg.tolerance("identity")
    bad_ids = {k: v for k, v in report.identity_residuals.items() if not v <= id_tol}
    bad_links = {k: v for k, v in report.extra.get("chain_links", {}).items() if v < -tol}
    holds = report.gap >= -tol
    code = EXIT_OK if holds and not bad_ids and not bad_links else EXIT_FAIL
    record.update(report.to_dict(), tolerance=tol, holds=holds, rejected=False)
    _write_json(out / "report.json", record)

    lines = header + [
        f"family {report.family} at {grid.n_theta}x{grid.n_phi}",
        f"lhs = {report.lhs!r}",
        f"rhs = {report.rhs!r}",
        f"gap = {report.gap!r} (tolerance {tol!r}) {'PASS' if holds else 'FAIL'}",
        f"killing flux = {report.killing_flux!r}",
    ]
    for k in sorted(report.identity_residuals):
        v = float(report.identity_residuals[k])
        lines.append(f"{'PASS' if k not in bad_ids else 'FAIL'} identity {k}: {v!r}")
    for k, v in sorted(report.extra.get("chain_links", {}).items()):
        lines.append(f"{'PASS' if k not in bad_links else 'FAIL'} chain link {k}: {v!r}")
    lines.append(f"exit {code}")
    _emit(lines, out / "summary.txt")
    return code


# ---------------------------------------------------------------------------
# family


def family_rows(cfg: RunConfig) -> tuple[list[dict], int, int]:
    """CSV rows over every resolution; also (accepted count, violation count)."""
    fs = cfg.family_spec()
    rows, accepted, violations = [], 0, 0
    for nt, np_ in cfg.resolutions:
        grid = build_grid(nt, np_)
        for member, report in hn.run_family(fs, grid, cfg.threads):
            row = {
                "index": member.index,
                "family": fs.family.value,
                "n_theta": nt,
                "n_phi": np_,
                "accepted": member.accepted,
                "reason": member.reason or "",
            }
            if report is not None:
                tol = _ineq_tol(cfg, report)
                holds = report.gap >= -tol
                accepted += 1
                violations += not holds
                row.update(
                    lhs=report.lhs,
                    rhs=report.rhs,
                    gap=report.gap,
                    killing_flux=report.killing_flux,
                    tolerance=tol,
                    holds=holds,
                    min_future_expansion=report.min_future_expansion,
                    min_past_expansion=report.min_past_expansion,
                )
                for key, val in report.gate_margins.items():
                    row[f"margin_{key}"] = val
            rows.append(row)
    return rows, accepted, violations


def cmd_family(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    rows, accepted, violations = family_rows(cfg)
    _write_csv(out / "family.csv", FAMILY_COLUMNS, rows)
    gaps = [r["gap"] for r in rows if "gap" in r]
    min_gap = min(gaps) if gaps else None
    if accepted == 0:
        code = EXIT_GATE
    else:
        code = EXIT_FAIL if violations else EXIT_OK
    summary = {
        "header": report_header(cfg),
        "config": cfg.model_dump(mode="json"),
        "rows": len(rows),
        "accepted": accepted,
        "violations": violations,
        "min_gap": min_gap,
        "exit": code,
    }
    _write_json(out / "family_summary.json", summary)
    _emit(
        report_header(cfg)
        + [
            f"rows={len(rows)} accepted={accepted} violations={violations} "
            f"min_gap={'n/a' if min_gap is None else repr(min_gap)}",
            f"exit {code}",
        ],
        out / "summary.txt",
    )
    return code


# ---------------------------------------------------------------------------
# converge


def cmd_converge(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    spec = cfg.surface_spec()
    study = hn.convergence_study(spec, cfg.resolutions)
    flags = study.flags
    rows = []
    for name, series in study.series.items():
        for i, (nt, np_) in enumerate(series.resolutions):
            rows.append(
                {
                    "quantity": name,
                    "n_theta": nt,
                    "n_phi": np_,
                    "value": series.values[i],
                    "error": series.errors[i] if i < len(series.errors) else None,
                    "order": series.orders[i] if i < len(series.orders) else None,
                    "status": flags[name],
                }
            )
        lines = [f"# n_theta abs_error ({name})"]
        for (nt, _), err in zip(series.resolutions, series.errors):
            lines.append(f"{nt} {float(err)!r}")
        (out / f"plot_{name}.dat").write_text("\n".join(lines) + "\n")
    _write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS, rows)
    warnings = {k: v for k, v in flags.items() if v in ("inconclusive", "under-resolved")}
    _write_json(
        out / "convergence.json",
        {
            "header": report_header(cfg),
            "config": cfg.model_dump(mode="json"),
            "series": {k: s.to_dict() for k, s in study.series.items()},
            "flags": flags,
            "tail_fraction": study.tail_fraction,
            "warning": warnings or None,
        },
    )
    lines = report_header(cfg)
    for name, series in study.series.items():
        orders = ", ".join(f"{o:.2f}" for o in series.orders) or "-"
        lines.append(f"{name}: status={flags[name]} orders=[{orders}]")
    lines.append(f"spectral tail fraction = {study.tail_fraction!r}")
    if warnings:
        lines.append("WARNING: " + ", ".join(f"{k} {v}" for k, v in sorted(warnings.items())))
    lines.append("exit 0")
    _emit(lines, out / "summary.txt")
    return EXIT_OK


# ---------------------------------------------------------------------------
# identities


@dataclass(frozen=True)
class IdentityResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: max residual {self.residual:.3e} (tol {self.tolerance:.1e})"


def _radii(rng, m: float, lam: float, n: int) -> np.ndarray:
    lo = max(2.0 * m, sl.s0_root(m, lam)) if m > 0 else 0.0
    span = max(10.0 * m, 5.0)
    return lo + 1e-3 * max(m, 0.1) + rng.uniform(0, 1, n) * span


def christoffel_fd_residual(rng, m: float, n: int = 50) -> float:
    """Closed-form symbols against central differences of the metric."""
    scale = max(m, 0.5)
    r = 2.0 * m + scale * (0.5 + 5.0 * rng.uniform(0, 1, n))
    th = rng.uniform(0.3, math.pi - 0.3, n)
    h = 1e-5 * scale
    k = 1e-5
    dg = np.zeros((n, 4, 4, 4))
    dg[..., 1] = (st.metric_components(r + h, th, m) - st.metric_components(r - h, th, m)) / (2 * h)
    dg[..., 2] = (st.metric_components(r, th + k, m) - st.metric_components(r, th - k, m)) / (2 * k)
    ginv = np.linalg.inv(st.metric_components(r, th, m))
    # Gamma^m_ab = 1/2 g^mn (d_a g_nb + d_b g_na - d_n g_ab), dg[..., n, b, a] = d_a g_nb
    lower = 0.5 * (np.einsum("inba->inab", dg) + np.einsum("inab->inab", dg) - np.einsum("iabn->inab", dg))
    gam_fd = np.einsum("imn,inab->imab", ginv, lower)
    gam = st.christoffel(r, th, m)
    return float(np.max(np.abs(gam - gam_fd)) / max(1.0, np.max(np.abs(gam))))


def _sample_specs(m: float, lam: float) -> dict:
    R = 4.0 * m if m > 0 else 1.0
    bumpy = HarmonicProfile(R, ((2, 0, 0.05), (3, 1, 0.03)), relative=True)
    Rc = 5.0 * m if m > 0 else 1.0
    return {
        "static": sl.SurfaceSpec(sl.Family.STATIC_SLICE, m, u=bumpy),
        "umbilical": sl.SurfaceSpec(sl.Family.UMBILICAL_SLICE, m, u=bumpy, lam=lam),
        "null": sl.SurfaceSpec(sl.Family.NULL_CONE, m, u=bumpy),
        "convex": sl.SurfaceSpec(
            sl.Family.CONVEX_STATIC,
            m,
            sigma_hat=HarmonicProfile(Rc, ((2, 2, 0.04),), relative=True),
            tau=HarmonicProfile(0.0, ((1, 0, 0.1 * Rc), (2, 1, 0.05 * Rc))),
        ),
    }


def identity_suite(cfg: RunConfig) -> list[IdentityResult]:
    rng = np.random.default_rng(cfg.seed)
    m = cfg.m
    id_tol = cfg.tolerances.get("identity")

    def tol(default: float) -> float:
        return default if id_tol is None else id_tol

    results: list[IdentityResult] = []

    def add(name, residual, default_tol):
        results.append(IdentityResult(name, float(residual), tol(default_tol)))

    add("christoffel finite difference", christoffel_fd_residual(rng, m), 1e-6)
    grid = build_grid(*min(cfg.resolutions, key=lambda r: r[0] * r[1]))
    for lam in cfg.lambdas:
        tag = f" (lambda={lam!r})" if len(cfg.lambdas) > 1 else ""
        s = _radii(rng, m, lam, 100)
        umb = max(
            float(np.max(np.abs(ex.hypersurface_second_form(m, lam, float(x)) - lam * np.eye(3))))
            for x in s
        )
        add("umbilicity" + tag, umb, 1e-8)

        s = _radii(rng, m, lam, 1000)
        add("divergence" + tag, np.max(np.abs(sl.conformal_killing_divergence(s, m, lam))), 1e-12)

        s0 = sl.s0_root(m, lam)
        add("root" + tag, abs(lam**2 * s0**3 + s0 - 2.0 * m) / max(1.0, 2.0 * m), 1e-12)
        if m > 0:
            exact = sl.horizon_flux(m, lam)
            add("horizon flux" + tag, abs(sl.horizon_flux_extrapolated(m, lam) - exact) / exact, 1e-9)

        s = _radii(rng, m, lam, 1000)
        th = rng.uniform(0.2, math.pi - 0.2, s.size)
        add("isometry" + tag, sl.umbilical_isometry_residual(s, th, m, lam), 1e-12)

    specs = _sample_specs(m, cfg.lambdas[0])
    if m == 0:
        # the rho table is anchored at s = 4m, so the umbilical sample needs m > 0
        del specs["umbilical"]
    surfaces = {k: sl.build_from_spec(v, grid) for k, v in specs.items()}

    if m > 0:
        add("null generator", sl.null_generator_residual(_radii(rng, m, 1.0, 1000), m), 1e-12)

    conv = surfaces["convex"]
    _, proj = sl.project_surface(conv)
    pw = sl.projection_pointwise_identity(conv)
    area_deficit = max(0.0, (proj.area - proj.area_projected) / proj.area)
    add(
        "projection",
        max(proj.metric, proj.inverse_metric, proj.volume_element, pw.j_identity,
            pw.mean_curvature_relation, area_deficit),
        1e-9,
    )

    flux = max(
        abs(ex.killing_flux(surf)) / ex.mean_curvature_norm_integral(surf)
        for key, surf in surfaces.items() if key != "null"
    )
    add("killing flux", flux, 1e-8)

    jres = max(max(ex.j_identity_residuals(surf).values()) for surf in surfaces.values())
    add("J identities", jres, 1e-9)

    reduced, general = hn.static_slice_reduction(surfaces["static"])
    add("static reduction", abs(reduced - general) / abs(general), 1e-9)
    if "umbilical" in surfaces:
        dec = hn.umbilical_decomposition(surfaces["umbilical"])
        add("umbilical decomposition", dec.residual, 1e-8)
    return results


def cmd_identities(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    fault = (
        st.corrupted_christoffel() if cfg.fault_injection == "christoffel" else contextlib.nullcontext()
    )
    with fault:
        results = identity_suite(cfg)
    code = EXIT_OK if all(r.passed for r in results) else EXIT_FAIL
    header = report_header(cfg)
    if cfg.fault_injection:
        header.append(f"fault injection: {cfg.fault_injection}")
    _write_json(
        out / "identities.json",
        {
            "header": header,
            "config": cfg.model_dump(mode="json"),
            "identities": [
                {"name": r.name, "residual": r.residual, "tolerance": r.tolerance, "passed": r.passed}
                for r in results
            ],
            "exit": code,
        },
    )
    _emit(header + [r.line() for r in results] + [f"exit {code}"], out / "summary.txt")
    return code


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "verify": cmd_verify,
    "family": cmd_family,
    "converge": cmd_converge,
    "identities": cmd_identities,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpverify", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--resolution", action="append", metavar="T,P",
                   help="grid resolution; repeat for several")
    p.add_argument("--tolerance", action="append", metavar="KEY=VAL",
                   help="override a tolerance (identity, inequality)")
    return p


def _overrides(args) -> dict:
    out: dict = {}
    if args.out is not None:
        out["out"] = args.out
    if args.threads is not None:
        out["threads"] = args.threads
    if args.seed is not None:
        out["seed"] = args.seed
    if args.resolution:
        out["resolutions"] = [parse_resolution(r) for r in args.resolution]
    if args.tolerance:
        tols = {}
        for item in args.tolerance:
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"--tolerance expects KEY=VAL, got {item!r}")
            tols[key.strip()] = float(val)
        out["tolerances"] = tols
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = load_config(args.config, args.command, _overrides(args))
    except (ValidationError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[cfg.command](cfg)
    except (st.DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
