"""Command-line entry points and file output."""
from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

import numpy as np

from . import analysis, fem, vtkio
from .config import (ConfigError, RunConfig, build_mesh, euler_characteristic,
                     parse_config)
from .geometry import PlanarDisk, Sphere, Torus
from .mesh import refine
from .segregation import ContinuationSchedule, eoc, run_continuation
from .solvers import smallest_eigenpair

RNG_ALGORITHM = "pcg64"
Y_PARTITION_ENERGY = 45.0 / 4.0

_CONFIG_FLAGS = [
    ("--surface", "surface", str, "sphere|torus|dziuk|disk|sector"),
    ("--radius", "radius", float, "sphere/disk radius"),
    ("--major-radius", "major_radius", float, "torus major radius"),
    ("--minor-radius", "minor_radius", float, "torus minor radius"),
    ("--sector-angle", "sector_angle", float, "sector opening angle (radians)"),
    ("--mesh-level", "mesh_level", int, "initial mesh refinement level"),
    ("--n-major", "n_major", int, "torus grid resolution (major)"),
    ("--n-minor", "n_minor", int, "torus grid resolution (minor)"),
    ("--m", "m", int, "number of partitions"),
    ("--eps0", "eps0", float, "initial penalty parameter"),
    ("--tau0", "tau0", float, "initial time step"),
    ("--shrink", None, float, "shrink factor for both epsilon and tau"),
    ("--eps-factor", "eps_factor", float, "epsilon shrink factor per level"),
    ("--tau-factor", "tau_factor", float, "tau shrink factor per level"),
    ("--levels", "levels", int, "number of continuation refinements"),
    ("--seed", "seed", int, "random seed"),
    ("--tol", "stop_tol", float, "energy stopping tolerance"),
    ("--max-steps", "max_steps", int, "step cap per stage"),
    ("--workers", "workers", int, "component-parallel worker count"),
    ("--out", "out", str, "output directory"),
]


def _add_config_flags(sp):
    sp.add_argument("--config", type=str, default=None,
                    help="key = value configuration file")
    for flag, _, typ, help_text in _CONFIG_FLAGS:
        sp.add_argument(flag, type=typ, default=None, help=help_text)


def _resolve_config(args):
    if args.config:
        config = parse_config(Path(args.config).read_text())
    else:
        config = RunConfig()
    if getattr(args, "shrink", None) is not None:
        config.eps_factor = args.shrink
        config.tau_factor = args.shrink
    for _, field_name, _, _ in _CONFIG_FLAGS:
        if field_name is None:
            continue
        value = getattr(args, field_name.replace("-", "_"), None)
        if value is not None:
            setattr(config, field_name, value)
    return config.validate()


def _out_dir(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule(config):
    return ContinuationSchedule(
        eps0=config.eps0, tau0=config.tau0, eps_factor=config.eps_factor,
        tau_factor=config.tau_factor, levels=config.levels,
        energy_stop_tol=config.stop_tol,
        max_steps_per_stage=config.max_steps,
    )


def _fmt(x):
    return format(float(x), ".17g")


def cmd_mesh(config):
    mesh = build_mesh(config)
    out = _out_dir(config)
    path = out / "mesh.vtk"
    vtkio.write_unstructured(path, mesh.vertices, mesh.triangles,
                             title=f"surfpart mesh surface={vtkio.surface_tag(mesh.geometry)}")
    print(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles} "
          f"h {mesh.h:.6g} -> {path}")
    return 0


def _combined_trace_csv(level_traces, m):
    buf = io.StringIO()
    cols = ["level", "step", "time", "energy", "energy_half", "s_eps"]
    cols += [f"lambda_{i + 1}" for i in range(m)]
    buf.write(",".join(cols) + "\n")
    for level, trace in level_traces:
        for r in trace.records:
            row = [str(level), str(r.step)] + [
                _fmt(v)
                for v in (r.time, r.energy, r.energy_half, r.s_eps, *r.lambdas)
            ]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _run_solve(config, write_snapshots=True):
    mesh = build_mesh(config)
    if not mesh.is_closed:
        raise ConfigError("the solve command requires a closed surface")
    out = _out_dir(config)
    level_traces = []

    def on_level(level, ensemble, trace):
        level_traces.append((level, trace))
        if write_snapshots:
            vtkio.write_snapshot(out / f"level_{level}.vtk", ensemble)

    result = run_continuation(mesh, config.m, _schedule(config), config.seed,
                              workers=config.workers,
                              heat_rel_tol=config.heat_rel_tol,
                              on_level=on_level)
    (out / "trace.csv").write_text(_combined_trace_csv(level_traces, config.m))
    return result, out


def _solve_summary(config, result):
    lines = ["surfpart solve summary", f"rng = {RNG_ALGORITHM}",
             f"reseeds = {result.ensemble.reseeds}", ""]
    lines.append(config.serialize().rstrip())
    lines.append("")
    lines.append("level  h        eps        tau        vertices  steps  "
                 "converged  energy      s_eps")
    for s in result.summaries:
        lines.append(
            f"{s.level:<6d} {s.h:<8.4g} {s.epsilon:<10.5g} {s.tau:<10.5g} "
            f"{s.n_vertices:<9d} {s.steps:<6d} {str(s.converged):<10s} "
            f"{s.energy:<11.6g} {s.s_eps:.6g}"
        )
    if result.summaries:
        ensemble = result.ensemble
        stiffness = fem.assemble_stiffness(ensemble.mesh)
        extraction = analysis.extract_partition(ensemble)
        classes = [f"{k}-gon" for k in extraction.edges_per_component]
        stats = analysis.eigenvalue_stats(ensemble, stiffness, classes)
        lines.append("")
        for key, (mean, std) in stats.items():
            lines.append(f"{key} eigenvalue: {mean:.6g} ({std:.3g})")
        last = result.summaries[-1]
        lines.append(f"S_eps: {last.s_eps:.6g}")
        lines.append(f"Total energy: {last.energy:.6g}")
    if result.failure:
        lines.append(f"FAILED: {result.failure}")
    return "\n".join(lines) + "\n"


def cmd_solve(config):
    result, out = _run_solve(config)
    summary = _solve_summary(config, result)
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return 0 if result.ok else 1


def study_eps_table(config):
    """Halving-epsilon continuation scored against the Y-partition energy."""
    config.m = 3
    config.surface = "sphere"
    config.eps_factor = 0.5
    config.tau_factor = 1.0 / np.sqrt(2.0)
    config.validate()
    result, out = _run_solve(config, write_snapshots=False)
    if not result.ok:
        raise RuntimeError(result.failure)
    eps = [s.epsilon for s in result.summaries]
    energy = [s.energy for s in result.summaries]
    s_eps = [s.s_eps for s in result.summaries]
    errors = [Y_PARTITION_ENERGY - e for e in energy]
    eoc_err = [float("nan")] + eoc(errors)
    eoc_s = [float("nan")] + eoc(s_eps)
    rows = list(zip(eps, energy, errors, eoc_err, s_eps, eoc_s))
    return rows, out


def cmd_study_eps(config):
    rows, out = study_eps_table(config)
    header = f"{'eps':>12s} {'energy':>10s} {'error':>10s} {'eoc':>8s} " \
             f"{'S_eps':>10s} {'eoc':>8s}"
    print(header)
    csv_lines = ["eps,energy,error,eoc_error,s_eps,eoc_s_eps"]
    for eps, energy, err, ee, s, es in rows:
        print(f"{eps:12.5e} {energy:10.4f} {err:10.4f} {ee:8.4f} "
              f"{s:10.4f} {es:8.4f}")
        csv_lines.append(",".join(_fmt(v) for v in (eps, energy, err, ee, s, es)))
    (out / "study_eps.csv").write_text("\n".join(csv_lines) + "\n")
    return 0


def cmd_study_h(config):
    """Convergence in mesh size at fixed penalty parameter."""
    config.eps_factor = 1.0
    config.validate()
    result, out = _run_solve(config, write_snapshots=False)
    if not result.ok:
        raise RuntimeError(result.failure)
    print(f"{'h':>10s} {'vertices':>9s} {'energy':>10s} {'S_eps':>10s}")
    csv_lines = ["h,vertices,energy,s_eps"]
    for s in result.summaries:
        print(f"{s.h:10.5g} {s.n_vertices:9d} {s.energy:10.4f} {s.s_eps:10.4f}")
        csv_lines.append(
            ",".join([_fmt(s.h), str(s.n_vertices), _fmt(s.energy), _fmt(s.s_eps)])
        )
    (out / "study_h.csv").write_text("\n".join(csv_lines) + "\n")
    return 0


def oracle_eigenvalues(config):
    """Smallest Dirichlet eigenvalue over successive refinements."""
    if config.surface not in ("disk", "sector"):
        raise ConfigError("the oracle command runs on disk or sector surfaces")
    mesh = build_mesh(config)
    lambdas, hs = [], []
    for _ in range(config.levels + 1):
        stiffness = fem.assemble_stiffness(mesh)
        mass = fem.assemble_mass(mesh)
        lam, _ = smallest_eigenpair(stiffness, mass, mesh.boundary_vertex)
        lambdas.append(lam)
        hs.append(mesh.h)
        mesh, _ = refine(mesh)
    # Richardson extrapolation assuming second-order convergence
    extrapolated = lambdas[-1] + (lambdas[-1] - lambdas[-2]) / 3.0
    diffs = np.abs(np.diff(lambdas))
    orders = eoc(list(diffs)) if len(diffs) >= 2 and np.all(diffs > 0) else []
    return hs, lambdas, extrapolated, orders


def cmd_oracle(config):
    hs, lambdas, extrapolated, orders = oracle_eigenvalues(config)
    print(f"{'h':>10s} {'lambda':>12s}")
    for h, lam in zip(hs, lambdas):
        print(f"{h:10.5g} {lam:12.6f}")
    print(f"extrapolated lambda: {extrapolated:.6f}")
    if orders:
        print("eoc:", " ".join(f"{o:.3f}" for o in orders))
    return 0


def cmd_analyze(config, snapshot_path):
    ensemble = vtkio.read_snapshot(snapshot_path)
    mesh = ensemble.mesh
    out = _out_dir(config)
    stiffness = fem.assemble_stiffness(mesh)
    extraction = analysis.extract_partition(ensemble)

    chi = {Sphere: 2, Torus: 0, PlanarDisk: 1}.get(type(mesh.geometry), 2)
    dual = analysis.dual_graph_check(extraction, chi)
    classes = [f"{k}-gon" for k in extraction.edges_per_component]
    stats = analysis.eigenvalue_stats(ensemble, stiffness, classes)

    point_data = {f"u_{i + 1}": ensemble.values[:, i] for i in range(ensemble.m)}
    for i in range(ensemble.m):
        point_data[f"v_{i + 1}"] = extraction.signed_indicators[:, i]
    tri_labels = extraction.labels[mesh.triangles]
    cell_labels = np.where(
        (tri_labels[:, 0] == tri_labels[:, 1]) & (tri_labels[:, 1] == tri_labels[:, 2]),
        tri_labels[:, 0], analysis.VOID,
    )
    vtkio.write_unstructured(out / "analysis.vtk", mesh.vertices, mesh.triangles,
                             point_data=point_data,
                             cell_data={"label": cell_labels},
                             title="surfpart partition analysis")

    all_curves, all_kappa = [], []
    for i in range(ensemble.m):
        curves = extraction.boundary_curves[i]
        samples = analysis.geodesic_curvature(
            extraction.signed_indicators[:, i], mesh, curves,
            extraction.junctions)
        all_curves.extend(curves)
        all_kappa.append(samples.kappa_g)
    if all_curves:
        vtkio.write_polylines(out / "boundaries.vtk", all_curves,
                              scalars=np.concatenate(all_kappa))

    lines = ["surfpart analysis report",
             f"m = {ensemble.m}, eps = {ensemble.epsilon:g}",
             f"junctions: {len(extraction.junctions)} "
             f"(max degree {dual.max_junction_degree})",
             f"edge counts per component: "
             f"{list(map(int, extraction.edges_per_component))}",
             f"dual stats n_k: { {k: v for k, v in sorted(extraction.dual_stats.items())} }"]
    if dual.assumption_violated:
        lines.append("dual-graph identity: assumption violated "
                     f"(junction of degree {dual.max_junction_degree})")
    else:
        verdict = "holds" if dual.holds else "FAILS"
        lines.append(f"dual-graph identity: {dual.lhs:g} vs {dual.rhs:g} "
                     f"({verdict}, chi = {chi})")
    csv_lines = ["class,mean_lambda,std_lambda"]
    for key, (mean, std) in stats.items():
        lines.append(f"{key} eigenvalue: {mean:.6g} ({std:.3g})")
        csv_lines.append(f"{key},{_fmt(mean)},{_fmt(std)}")
    report = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(report)
    (out / "stats.csv").write_text("\n".join(csv_lines) + "\n")
    print(report, end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="surfpart",
        description="Optimal eigenvalue partitions of surfaces by "
                    "eigenfunction segregation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("mesh", "generate a surface mesh and write it as VTK"),
        ("solve", "run the segregation continuation"),
        ("study-eps", "epsilon-convergence study against the Y-partition"),
        ("study-h", "mesh-convergence study at fixed epsilon"),
        ("oracle", "disk/sector Dirichlet eigenvalue oracle"),
        ("analyze", "analyse a solver snapshot"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        _add_config_flags(sp)
        if name == "analyze":
            sp.add_argument("snapshot", type=str, help="snapshot VTK file")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        if args.command == "mesh":
            return cmd_mesh(config)
        if args.command == "solve":
            return cmd_solve(config)
        if args.command == "study-eps":
            return cmd_study_eps(config)
        if args.command == "study-h":
            return cmd_study_h(config)
        if args.command == "oracle":
            return cmd_oracle(config)
        if args.command == "analyze":
            return cmd_analyze(config, args.snapshot)
    except (ConfigError, vtkio.VtkParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
