"""Command-line entry point wiring configs to module pipelines.

Exit codes: 0 success, 1 validation failure or failed check, 2 solver
non-convergence, 64 usage errors, 65 malformed CSV input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import Params, PowerCurve, SlitGeometry, geometry_from_json, profile_u_a_flat
from .operator import (
    Field,
    Grid2D,
    SolverConvergenceError,
    SolverSettings,
    dirichlet_solve,
    dump_csv,
    load_csv,
)

USAGE_EXIT = 64
CSV_EXIT = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _banner(args_ns, subcommand: str) -> str:
    # paths are runtime plumbing, not config: keep them out so identical
    # configs give byte-identical outputs wherever they are written
    skip = {"func", "out", "field", "quotient_field", "overlay", "config"}
    shown = {k: v for k, v in sorted(vars(args_ns).items())
             if k not in skip and v is not None}
    return f"slit-harmonic {__version__} {subcommand} {json.dumps(shown, default=str)}"


def _params_from(ns) -> Params:
    if (ns.a is None) == (ns.s is None):
        raise ValueError("provide exactly one of --a or --s")
    return Params.from_a(ns.a) if ns.a is not None else Params.from_s(ns.s)


def _settings_from(ns) -> SolverSettings:
    base = {}
    if getattr(ns, "config", None):
        base = json.loads(Path(ns.config).read_text())
    if getattr(ns, "tol", None) is not None:
        base["tol"] = ns.tol
    if getattr(ns, "max_iter", None) is not None:
        base["max_iter"] = ns.max_iter
    if getattr(ns, "omega", None) is not None:
        base["omega"] = ns.omega
    return SolverSettings.from_json(json.dumps(base))


def _outdir(ns) -> Path:
    out = Path(ns.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict, banner: str) -> None:
    doc = {"provenance": banner}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _max_workers() -> int | None:
    raw = os.environ.get("SLIT_HARMONIC_THREADS")
    if not raw:
        return None
    return max(1, int(raw))


def _geometry_from(ns) -> SlitGeometry:
    if getattr(ns, "geometry", None):
        return geometry_from_json(ns.geometry)
    amp = getattr(ns, "amplitude", None)
    alpha = getattr(ns, "alpha", None)
    if amp is not None:
        return SlitGeometry(mode="curve", gamma=PowerCurve(amp, 1.0 + (alpha or 0.5)),
                            holder_exponent=alpha or 0.5)
    return SlitGeometry(mode="flat")


def cmd_solve(ns) -> int:
    p = _params_from(ns)
    n = ns.grid_n
    h = 2.0 / n
    grid = Grid2D(nx=n + 1, ny=n // 2 + 1, h=h, origin=(-1.0, 0.0), reflection=True)
    geom = SlitGeometry(mode="flat")
    res = dirichlet_solve(geom, p, grid,
                          boundary=lambda x, y: profile_u_a_flat(p, x, y),
                          slit_value=0.0, settings=_settings_from(ns))
    out = _outdir(ns)
    banner = _banner(ns, "solve")
    dump_csv(res.field, out / "solution.csv", banner=banner)
    _write_json(out / "solve_report.json",
                {"iterations": res.iterations, "residual": res.residual,
                 "method": res.method, "grid_n": n, "a": p.a, "s": p.s}, banner)
    print(f"solve: method={res.method} iterations={res.iterations} "
          f"residual={res.residual:.3e}")
    return 0


def cmd_obstacle(ns) -> int:
    from .obstacle import (ObstacleProblem, blowup_slope, complementarity_audit,
                           free_boundary, preset_by_name, solve_obstacle)

    p = _params_from(ns)
    preset = preset_by_name(ns.obstacle, ns.amplitude, ns.width)
    n = ns.grid_n
    h = 4.0 / n
    grid = Grid2D(nx=n + 1, ny=n // 2 + 1, h=h, origin=(-2.0, 0.0), reflection=True)
    prob = ObstacleProblem(p, grid, preset)
    sol = solve_obstacle(prob, settings=_settings_from(ns))
    out = _outdir(ns)
    banner = _banner(ns, "obstacle")
    dump_csv(sol.field, out / "obstacle_solution.csv", banner=banner)

    fb = free_boundary(sol)
    with open(out / "free_boundary.csv", "w") as fh:
        fh.write(f"# {banner}\n")
        fh.write("x_f,side\n")
        for xf, side in fb:
            fh.write(f"{xf:.17g},{side:+d}\n")

    audit = complementarity_audit(sol, fb_margin=0.1)
    report = {
        "iterations": sol.iterations,
        "contact_nodes": int(sol.contact.sum()),
        "free_boundary": [[xf, side] for xf, side in fb],
        "admissibility_violation": audit.max_admissibility_violation,
        "stencil_residual_off_contact": audit.max_stencil_residual_off_contact,
        "min_contact_dual": audit.min_contact_dual,
        "max_offcontact_flux": audit.max_offcontact_flux,
    }
    if fb:
        scales = [0.25 / 2 ** k for k in range(4) if 0.25 / 2 ** k >= 4 * h]
        slopes = {}
        for side, label in ((+1, "right"), (-1, "left")):
            try:
                slopes[label] = blowup_slope(sol, side=side, scales=scales) \
                    if len(scales) >= 2 else None
            except ValueError:
                slopes[label] = None
        report["blowup_slopes"] = slopes
        report["blowup_target"] = 1.0 + p.s
    _write_json(out / "obstacle_report.json", report, banner)
    print(f"obstacle: contact={report['contact_nodes']} nodes, "
          f"free boundary at {[round(x, 5) for x, _ in fb]}")
    return 0


def cmd_spectral(ns) -> int:
    from .spectral import CircleQuadrature, gram_matrix, make_basis_list

    p = _params_from(ns)
    quad = CircleQuadrature(p.a)
    out = _outdir(ns)
    banner = _banner(ns, "spectral")
    jmax = ns.j_max
    G = gram_matrix(p, jmax, quad)
    with open(out / "gram.csv", "w") as fh:
        fh.write(f"# {banner}\n")
        names = ["const"] + [f"u{j}" for j in range(jmax + 1)]
        fh.write("," + ",".join(names) + "\n")
        for nm, row in zip(names, G):
            fh.write(nm + "," + ",".join(f"{v:.17g}" for v in row) + "\n")
    dev = float(np.max(np.abs(G - np.eye(jmax + 2))))

    basis = make_basis_list(jmax, p, quad)
    with open(out / "basis_coefficients.csv", "w") as fh:
        fh.write(f"# {banner}\n")
        fh.write("j,i,b_i\n")
        for u in basis:
            for i, b in enumerate(u.b):
                fh.write(f"{u.j},{i},{b:.17g}\n")

    if ns.dump_basis is not None:
        from .spectral import disk_grid
        u = basis[ns.dump_basis]
        g = disk_grid(ns.grid_n)
        dump_csv(Field.from_function(g, lambda x, y: u.evaluate(x, y), p),
                 out / f"basis_u{ns.dump_basis}.csv", banner=banner)

    ok = True
    if ns.check == "gram":
        ok = dev < 1e-6
        print(f"{'PASS' if ok else 'FAIL'} gram: max |G - I| = {dev:.3e} "
              f"(tolerance 1e-06)")
    _write_json(out / "spectral_report.json",
                {"j_max": jmax, "gram_deviation": dev,
                 "norm_omega": quad.norm_omega, "check": ns.check,
                 "passed": bool(ok)}, banner)
    return 0 if ok else 1


def cmd_basis_check(ns) -> int:
    from .operator import Field as F
    from .spectral import apply_La_bar, disk_grid, gross_flux_zip, make_basis, offaxis_mask

    p = _params_from(ns)
    out = _outdir(ns)
    banner = _banner(ns, "basis-check")
    rows = []
    ok = True
    for j in range(ns.j_max + 1):
        u = make_basis(j, p)
        sups, rels = [], []
        for n in (64, 128, 256):
            g = disk_grid(n)
            f = F.from_function(g, lambda x, y: u.evaluate(x, y), p)
            r = np.abs(apply_La_bar(f, p).values)
            X, Y = g.mesh()
            rr = np.hypot(X, Y)
            near = offaxis_mask(g, 4.0) & (rr < 0.95)
            fixed = near & (np.abs(X) >= 1.0 / 16.0) & (np.abs(Y) >= 1.0 / 16.0)
            gross = gross_flux_zip(f, p)
            sups.append(float(np.max(r[fixed])) if fixed.any() else 0.0)
            rels.append(float(np.max(r[near] * 4.0 * (X ** 2 + Y ** 2)[near])
                              / max(np.max(gross[near]), 1e-300)))
        if max(sups) < 1e-12:
            order = math.inf
        else:
            order = float(np.polyfit(np.log([1 / 32., 1 / 64., 1 / 128.]),
                                     np.log(np.maximum(sups, 1e-300)), 1)[0])
        good = (order >= 1.8 or max(sups) < 1e-12) and rels[-1] < 1e-3
        ok &= good
        rows.append((j, order, rels[-1], good))
        print(f"{'PASS' if good else 'FAIL'} j={j}: order={order:.2f} "
              f"rel_residual={rels[-1]:.2e}")
    with open(out / "basis_check.csv", "w") as fh:
        fh.write(f"# {banner}\n")
        fh.write("j,order,rel_residual,pass\n")
        for j, order, rel, good in rows:
            fh.write(f"{j},{order:.17g},{rel:.17g},{int(good)}\n")
    return 0 if ok else 1


def cmd_regularity(ns) -> int:
    from .analysis import homogeneity_slope, quotient_expand

    try:
        xs, ys, vals = load_csv(ns.field)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return CSV_EXIT
    grid = Grid2D(nx=len(xs), ny=len(ys), h=float(xs[1] - xs[0]),
                  origin=(float(xs[0]), float(ys[0])),
                  reflection=bool(abs(ys[0]) < 1e-12))
    f = Field(grid, vals)
    out = _outdir(ns)
    banner = _banner(ns, "regularity")
    center = tuple(float(v) for v in ns.center.split(","))
    scales = [float(v) for v in ns.scales.split(",")]
    report = {"center": list(center), "scales": scales}
    report["homogeneity_slope"] = homogeneity_slope(f, center, scales)
    if ns.quotient_field:
        try:
            _, _, uvals = load_csv(ns.quotient_field)
        except (ValueError, OSError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return CSV_EXIT
        U = Field(grid, uvals)
        fit = quotient_expand(f, U, k=ns.degree, center=center,
                              annuli=tuple(scales))
        report["quotient_coefficients"] = {
            f"x^{mu[0]} r^{m}": c for (mu, m), c in sorted(fit.poly.coeffs.items())}
        report["residual_exponent"] = fit.residual_exponent
        with open(out / "quotient_fit.csv", "w") as fh:
            fh.write(f"# {banner}\n")
            fh.write("radius,residual\n")
            for R, res in zip(fit.annulus_radii, fit.annulus_residuals):
                fh.write(f"{R:.17g},{res:.17g}\n")
    _write_json(out / "regularity_report.json", report, banner)
    print(f"regularity: slope={report['homogeneity_slope']:.4f}")
    return 0


def cmd_distance_check(ns) -> int:
    from .regdist import RegularizedDistance, verify_appendix_estimates

    p = _params_from(ns)
    geom = SlitGeometry(mode="curve",
                        gamma=PowerCurve(ns.amplitude, 1.0 + ns.alpha),
                        holder_exponent=ns.alpha)
    rd = RegularizedDistance(geom)
    rep = verify_appendix_estimates(rd, p, sample_count=ns.samples,
                                    seed=ns.seed, max_workers=_max_workers())
    out = _outdir(ns)
    banner = _banner(ns, "distance-check")
    _write_json(out / "appendix_report.json",
                {"alpha": rep.alpha, "estimates": rep.as_dict()}, banner)
    with open(out / "shell_maxima.csv", "w") as fh:
        fh.write(f"# {banner}\n")
        fh.write("estimate,shell_r,max_value\n")
        for r in rep.results:
            for rr, vv in zip(r.shell_r, r.shell_max):
                fh.write(f"{r.name},{rr:.17g},{vv:.17g}\n")
    for r in rep.results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: "
              f"exponent={r.exponent:.3f} (target {r.target}) C={r.constant:.3g}")
    return 0 if rep.all_passed() else 1


def cmd_barrier_check(ns) -> int:
    from .regdist import barrier_check

    p = _params_from(ns)
    rep = barrier_check(p, ns.alpha, grid_n=ns.grid_n, seed=ns.seed)
    out = _outdir(ns)
    banner = _banner(ns, "barrier-check")
    _write_json(out / "barrier_report.json",
                {"beta": rep.beta, "alpha": rep.alpha,
                 "min_margin_discrete": rep.min_margin_discrete,
                 "min_margin_continuum": rep.min_margin_continuum,
                 "nodes": rep.n_nodes, "passed": rep.passed}, banner)
    print(f"{'PASS' if rep.passed else 'FAIL'} barrier: beta={rep.beta:.3f} "
          f"c_discrete={rep.min_margin_discrete:.4f} "
          f"c_continuum={rep.min_margin_continuum:.4f}")
    return 0 if rep.passed else 1


def cmd_plot(ns) -> int:
    from .plotting import heatmap_svg, line_svg

    try:
        xs, ys, vals = load_csv(ns.field)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return CSV_EXIT
    overlay = []
    if ns.overlay:
        try:
            with open(ns.overlay) as fh:
                rows = [ln.strip() for ln in fh
                        if ln.strip() and not ln.startswith("#")]
            if not rows or not rows[0].startswith("x_f"):
                raise ValueError("overlay CSV must carry an x_f header")
            overlay = [(float(ln.split(",")[0]), 0.0) for ln in rows[1:]]
        except (ValueError, OSError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return CSV_EXIT
    if len(ys) == 1:
        svg = line_svg(xs, vals[0], title=Path(ns.field).name)
    else:
        svg = heatmap_svg(xs, ys, vals, title=Path(ns.field).name,
                          overlay_points=overlay)
    out = Path(ns.out or "field.svg")
    if out.is_dir():
        out = out / (Path(ns.field).stem + ".svg")
    out.write_text(svg + "\n")
    print(f"plot: wrote {out}")
    return 0


def build_parser() -> _Parser:
    top = _Parser(prog="slit-harmonic",
                  description="desk-scale checks for the weighted slit operator")
    sub = top.add_subparsers(dest="subcommand", required=True)

    def common(p, grid_default=256):
        p.add_argument("--a", type=float, default=None)
        p.add_argument("--s", type=float, default=None)
        p.add_argument("--grid-n", type=int, default=grid_default)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--omega", type=float, default=None)
        p.add_argument("--config", type=str, default=None,
                       help="solver settings JSON file")
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="flat slit Dirichlet solve with the "
                                     "profile boundary data")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("obstacle", help="thin-obstacle solve with audits")
    common(p)
    p.add_argument("--obstacle", choices=["quadratic", "bump", "cos"],
                   default="quadratic")
    p.add_argument("--amplitude", type=float, default=None)
    p.add_argument("--width", type=float, default=None)
    p.set_defaults(func=cmd_obstacle)

    p = sub.add_parser("spectral", help="basis tables and Gram check")
    common(p, grid_default=128)
    p.add_argument("--j-max", type=int, default=8)
    p.add_argument("--check", choices=["gram", "none"], default="gram")
    p.add_argument("--dump-basis", type=int, default=None)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("basis-check", help="discrete residual refinement of "
                                           "the homogeneous basis")
    common(p)
    p.add_argument("--j-max", type=int, default=8)
    p.set_defaults(func=cmd_basis_check)

    p = sub.add_parser("regularity", help="homogeneity and quotient fits on "
                                          "a field CSV")
    common(p)
    p.add_argument("--field", type=str, required=True)
    p.add_argument("--quotient-field", type=str, default=None)
    p.add_argument("--center", type=str, default="0,0")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--scales", type=str, default="0.5,0.25,0.125,0.0625")
    p.set_defaults(func=cmd_regularity)

    p = sub.add_parser("distance-check", help="regularized-distance estimate "
                                              "suite")
    common(p)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=cmd_distance_check)

    p = sub.add_parser("barrier-check", help="barrier sign condition")
    common(p)
    p.add_argument("--alpha", type=float, default=0.25)
    p.set_defaults(func=cmd_barrier_check)

    p = sub.add_parser("plot", help="render a field CSV as SVG")
    p.add_argument("field", type=str)
    p.add_argument("--overlay", type=str, default=None,
                   help="free-boundary CSV to overlay")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_plot)
    return top


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_EXIT
    try:
        return ns.func(ns)
    except SolverConvergenceError as exc:
        sys.stderr.write(f"solver did not converge: {exc}\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    raise SystemExit(run())
