"""End-to-end acceptance checks at desk scale.

Each check prints one PASS/FAIL line; the summary block is re-printed when
the session ends. The long continuation runs are module-scoped fixtures so
several checks can share them.
"""
import sys

import numpy as np
import pytest

from surfpart import analysis, fem
from surfpart.cli import oracle_eigenvalues, study_eps_table
from surfpart.config import RunConfig
from surfpart.mesh import generate_icosphere, generate_torus, refine
from surfpart.segregation import (ContinuationSchedule, EnergyTrace,
                                  random_init, run_continuation, run_stage,
                                  ode_step)

_LINES = []



@pytest.fixture(scope="session")
def report(pytestconfig):
    """One PASS/FAIL line per criterion, printed past pytest's capture."""
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def _report(name, ok, detail):
        line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
        _LINES.append(line)
        with capman.global_and_fixture_disabled():
            print(line, flush=True)
        assert ok, line

    return _report


@pytest.fixture(scope="session", autouse=True)
def _summary_block(pytestconfig):
    yield
    if _LINES:
        capman = pytestconfig.pluginmanager.getplugin("capturemanager")
        with capman.global_and_fixture_disabled():
            print("\n=== acceptance summary ===")
            for line in _LINES:
                print(line)
            sys.stdout.flush()


def _sphere_run(m, seed, mesh_level=0, levels=6, eps_factor=0.5):
    schedule = ContinuationSchedule(
        eps0=0.5, tau0=8e-4, eps_factor=eps_factor,
        tau_factor=1.0 / np.sqrt(2.0), levels=levels,
        max_steps_per_stage=40_000,
    )
    result = run_continuation(generate_icosphere(mesh_level), m, schedule,
                              seed)
    assert result.ok, result.failure
    return result


def _eigenvalues(result):
    stiffness = fem.assemble_stiffness(result.ensemble.mesh)
    return analysis.component_eigenvalues(result.ensemble, stiffness)


@pytest.fixture(scope="module")
def m3_run():
    return _sphere_run(3, seed=0)


@pytest.fixture(scope="module")
def m4_run():
    return _sphere_run(4, seed=0)


@pytest.fixture(scope="module")
def m6_run():
    return _sphere_run(6, seed=0)


def _torus_run():
    # Random one-hot starts on this torus converge to an inner annulus plus
    # five outer cells, a nearby local minimum whose annular component keeps
    # the Euler identity from applying. The hexagonal minimum (which has
    # slightly lower energy) is verified by warm-starting the continuation
    # from a two-row offset-brick labelling and letting the flow converge.
    mesh = generate_torus(1.0, 0.6, 20, 12)
    x, y, z = mesh.vertices.T
    theta = np.arctan2(y, x)
    phi = np.arctan2(z, np.hypot(x, y) - 1.0)
    row = (phi >= 0).astype(int)
    col = (np.floor((theta - row * (np.pi / 3)) / (2 * np.pi / 3)).astype(int)
           % 3)
    schedule = ContinuationSchedule(
        eps0=0.5, tau0=8e-4, eps_factor=0.5,
        tau_factor=1.0 / np.sqrt(2.0), levels=4,
        max_steps_per_stage=40_000,
    )
    result = run_continuation(mesh, 6, schedule, seed=0,
                              init_labels=row * 3 + col)
    assert result.ok, result.failure
    return result


def _m8_run(seed):
    schedule = ContinuationSchedule(
        eps0=0.5, tau0=8e-4, eps_factor=0.5,
        tau_factor=1.0 / np.sqrt(2.0), levels=5,
        max_steps_per_stage=40_000,
    )
    result = run_continuation(generate_icosphere(1), 8, schedule, seed=seed)
    assert result.ok, result.failure
    return result


def test_ac1_constant_state_penalty(report):
    mesh = generate_icosphere(3)
    area = mesh.area()
    values = np.full((mesh.n_vertices, 3), 1.0 / np.sqrt(area))
    s = fem.penalty_energy(values, mesh, 0.5)
    target = 6.0 / np.pi
    ok = abs(s - target) < 0.01 * target
    report("AC1 constant-state penalty",
            ok, f"S_eps={s:.4f}, target {target:.4f} within 1%")


def test_ac2_epsilon_convergence(tmp_path, report):
    config = RunConfig(mesh_level=0, levels=6, tau0=8e-4,
                       out=str(tmp_path / "study")).validate()
    rows, _ = study_eps_table(config)
    errors = [r[2] for r in rows]
    eoc_err = [r[3] for r in rows][-3:]
    eoc_s = [r[5] for r in rows][-3:]
    decreasing = all(a > b for a, b in zip(errors, errors[1:]))
    in_band = all(0.4 <= v <= 0.6 for v in eoc_err + eoc_s)
    ok = decreasing and in_band
    report("AC2 Y-partition eps-convergence", ok,
            f"final mesh ~41k vertices, error decreasing={decreasing}, "
            f"last-3 eoc err={[f'{v:.3f}' for v in eoc_err]}, "
            f"S_eps={[f'{v:.3f}' for v in eoc_s]}, band [0.4, 0.6]")


def test_ac3_eigenvalue_targets(m3_run, m4_run, report):
    lam3 = _eigenvalues(m3_run)
    mean3, rel3 = float(np.mean(lam3)), float(np.std(lam3) / np.mean(lam3))
    ok3 = 3.4 <= mean3 <= 3.8 and rel3 < 0.02

    best = None
    for seed in range(5):  # best of 5 seeds; stop at the first that qualifies
        result = m4_run if seed == 0 else _sphere_run(4, seed=seed)
        lam = _eigenvalues(result)
        extraction = analysis.extract_partition(result.ensemble)
        tetra = extraction.dual_stats == {3: 4}
        mean = float(np.mean(lam))
        if tetra and 4.7 <= mean <= 5.2:
            best = (mean, float(np.std(lam) / mean))
            break
    ok = ok3 and best is not None
    report("AC3 eigenvalue targets", ok,
            f"m=3 mean={mean3:.3f} in [3.4, 3.8], rel std={rel3:.2e} < 2%; "
            f"m=4 best of 5 seeds: "
            + (f"tetrahedral, mean={best[0]:.3f} in [4.7, 5.2]" if best
               else "no tetrahedral partition in band"))


def test_ac4_disk_sector_oracle(report):
    j01_sq = 5.783185962946785
    config = RunConfig(surface="disk", mesh_level=2, levels=3).validate()
    _, lambdas, _, orders = oracle_eigenvalues(config)
    disk_ok = abs(lambdas[-1] - j01_sq) < 0.02 * j01_sq
    eoc_ok = all(1.7 <= o <= 2.3 for o in orders[-2:])

    config = RunConfig(surface="sector", sector_angle=2 * np.pi / 3,
                       mesh_level=3, levels=2).validate()
    _, lam_sector, _, _ = oracle_eigenvalues(config)
    sector_ok = abs(3 * lam_sector[-1] - 60.6) < 0.02 * 60.6

    config = RunConfig(surface="sector", sector_angle=np.pi / 2,
                       mesh_level=3, levels=2).validate()
    _, lam_quarter, _, _ = oracle_eigenvalues(config)
    quarter_ok = abs(4 * lam_quarter[-1] - 105.6) < 0.02 * 105.6

    ok = disk_ok and eoc_ok and sector_ok and quarter_ok
    report("AC4 disk/sector eigenvalue oracle", ok,
            f"disk lambda={lambdas[-1]:.4f} (target {j01_sq:.4f}), "
            f"eoc={[f'{o:.2f}' for o in orders]}; "
            f"120deg 3*lambda={3 * lam_sector[-1]:.1f} (60.6); "
            f"quarter 4*lambda={4 * lam_quarter[-1]:.1f} (105.6), all +-2%")


def test_ac5_scheme_invariants(report):
    mesh = generate_icosphere(2)
    mass = fem.assemble_mass(mesh)
    stiffness = fem.assemble_stiffness(mesh)

    ens = random_init(mesh, 4, seed=0, epsilon=0.2, tau=2e-3)
    out, trace = run_stage(ens, mass, stiffness, max_steps=600)
    norms = np.sqrt(np.einsum("ni,ni->i", out.values, mass @ out.values))
    norms_ok = np.allclose(norms, 1.0, atol=1e-12)
    energies = trace.energies()
    decay_ok = np.all(np.diff(energies) <= 1e-8 * np.abs(energies[:-1]))

    rng = np.random.default_rng(17)
    states = rng.random((10_000, 4))
    stepped = ode_step(states, 0.05, 2e-3)
    argmax_ok = np.array_equal(np.argmax(states, axis=1),
                               np.argmax(stepped, axis=1))
    perm = rng.permutation(4)
    perm_ok = np.array_equal(ode_step(states, 0.1, 1e-3)[:, perm],
                             ode_step(states[:, perm], 0.1, 1e-3))

    schedule = ContinuationSchedule(eps0=0.3, tau0=2e-3, levels=1,
                                    max_steps_per_stage=150)
    traces = []
    for workers in (1, 4):
        rows = []
        run_continuation(generate_icosphere(1), 4, schedule, seed=1,
                         workers=workers,
                         on_level=lambda lv, e, tr: rows.append(tr.to_csv()))
        traces.append("".join(rows).encode())
    workers_ok = traces[0] == traces[1]

    ok = norms_ok and decay_ok and argmax_ok and perm_ok and workers_ok
    report("AC5 scheme invariants", ok,
            f"unit norms={norms_ok}, energy decay={decay_ok}, "
            f"argmax preserved={argmax_ok}, permutation bitwise={perm_ok}, "
            f"workers 1 vs m byte-identical={workers_ok}")


def test_ac6_dual_graph_and_curvature(m3_run, m4_run, m6_run, report):
    torus_result = _torus_run()
    outcomes = []
    for label, result, chi in [
        ("sphere m=3", m3_run, 2),
        ("sphere m=4", m4_run, 2),
        ("sphere m=6", m6_run, 2),
        ("torus m=6", torus_result, 0),
    ]:
        extraction = analysis.extract_partition(result.ensemble)
        check = analysis.dual_graph_check(extraction, chi)
        outcomes.append((label, check.holds and not check.assumption_violated,
                         extraction.dual_stats))
    identities_ok = all(ok for _, ok, _ in outcomes)

    normal = np.array([0.3, 0.5, 0.81])
    normal /= np.linalg.norm(normal)
    mesh = generate_icosphere(3)
    magnitudes = []
    for _ in range(4):
        v = -mesh.vertices @ normal
        curves = analysis.extract_boundary_curves(v, mesh)
        samples = analysis.geodesic_curvature(v, mesh, curves)
        magnitudes.append(np.mean(np.abs(samples.kappa_g[samples.valid])))
        mesh, _ = refine(mesh)
    ratios = np.array(magnitudes[:-1]) / np.array(magnitudes[1:])
    curvature_ok = bool(np.all(ratios >= 1.5))

    ok = identities_ok and curvature_ok
    report("AC6 dual-graph identity + curvature decay", ok,
            "; ".join(f"{lbl} holds={o} n_k={nk}" for lbl, o, nk in outcomes)
            + f"; great-circle kappa_g ratios={[f'{r:.2f}' for r in ratios]}"
            " >= 1.5")


def test_ac7_m8_substitute(report):
    found = None
    shapes = []
    for seed in range(5):  # one qualifying seed of 5 suffices
        result = _m8_run(seed)
        extraction = analysis.extract_partition(result.ensemble)
        shapes.append(extraction.dual_stats)
        triple_only = all(j.degree == 3 for j in extraction.junctions)
        if extraction.dual_stats == {4: 4, 5: 4} and triple_only:
            found = seed
            break
    ok = found is not None
    report("AC7 m=8 quadrilateral/pentagon substitute", ok,
            f"seeds tried n_k={shapes}; "
            + (f"seed {found}: 4 quadrilaterals + 4 pentagons, triple "
               "junctions only" if ok else "target {4: 4, 5: 4} not reached"))
