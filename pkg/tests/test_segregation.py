import numpy as np
import pytest

from surfpart import fem
from surfpart.mesh import generate_disk, generate_icosphere
from surfpart.segregation import (ComponentEnsemble, ContinuationSchedule,
                                  ExtinctionError, check_interval, eoc,
                                  heat_step, normalize_step, ode_step,
                                  random_init, reported_energy, run_continuation,
                                  run_stage)

from conftest import y_partition_ensemble


def test_check_interval_rule():
    assert check_interval(8e-4) == 125
    assert check_interval(1e-3) == 100
    assert check_interval(10.0) == 1


def test_random_init_unit_norms_and_determinism(icosphere3):
    mass = fem.assemble_mass(icosphere3)
    ens = random_init(icosphere3, 3, seed=0, mass=mass)
    norms = np.sqrt(np.einsum("ni,ni->i", ens.values, mass @ ens.values))
    assert np.allclose(norms, 1.0, atol=1e-12)
    # nodal one-hot construction: at most one nonzero component per vertex
    assert np.all((ens.values > 0).sum(axis=1) == 1)
    again = random_init(icosphere3, 3, seed=0, mass=mass)
    assert np.array_equal(ens.values, again.values)


def test_random_init_rejects_small_m_and_open_mesh():
    mesh = generate_icosphere(1)
    with pytest.raises(ValueError):
        random_init(mesh, 1, seed=0)
    with pytest.raises(ValueError):
        random_init(generate_disk(1), 2, seed=0)


def test_ode_step_closed_form():
    values = np.array([[0.6, 0.3], [0.1, 0.9]])
    eps, tau = 0.2, 1e-3
    out = ode_step(values, eps, tau)
    s = np.sum(values**2, axis=1)
    expected = values * np.exp(-(2 * tau / eps**2)
                               * (s[:, None] - values**2))
    assert np.allclose(out, expected, rtol=1e-14)


def test_ode_step_preserves_argmax():
    rng = np.random.default_rng(5)
    values = rng.random((10_000, 4))
    out = ode_step(values, 0.05, 2e-3)
    assert np.array_equal(np.argmax(values, axis=1), np.argmax(out, axis=1))


def test_ode_step_permutation_equivariant_bitwise():
    rng = np.random.default_rng(9)
    values = rng.random((500, 5))
    perm = rng.permutation(5)
    direct = ode_step(values, 0.1, 1e-3)[:, perm]
    permuted = ode_step(values[:, perm], 0.1, 1e-3)
    assert np.array_equal(direct, permuted)


def test_heat_step_does_not_increase_dirichlet_energy(icosphere3):
    mass = fem.assemble_mass(icosphere3)
    stiffness = fem.assemble_stiffness(icosphere3)
    ens = random_init(icosphere3, 3, seed=1, tau=1e-3)
    out = heat_step(ens, mass, stiffness)
    for i in range(3):
        before = fem.dirichlet_energy(ens.values[:, i], stiffness)
        after = fem.dirichlet_energy(out[:, i], stiffness)
        assert after <= before + 1e-8


def test_normalize_step_flags_extinction():
    mesh = generate_icosphere(1)
    mass = fem.assemble_mass(mesh)
    values = np.ones((mesh.n_vertices, 2))
    values[:, 1] = 0.0
    with pytest.raises(ExtinctionError) as err:
        normalize_step(values, mass)
    assert err.value.component == 1


def test_run_stage_energy_decay_and_norms(icosphere3):
    mass = fem.assemble_mass(icosphere3)
    stiffness = fem.assemble_stiffness(icosphere3)
    ens = random_init(icosphere3, 3, seed=0, epsilon=0.25, tau=2e-3)
    out, trace = run_stage(ens, mass, stiffness, max_steps=400)
    energies = trace.energies()
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-8 * np.abs(energies[:-1]))
    norms = np.sqrt(np.einsum("ni,ni->i", out.values, mass @ out.values))
    assert np.allclose(norms, 1.0, atol=1e-12)
    assert np.all(out.values >= 0.0)


def test_run_stage_restart_at_minimizer_stops_immediately(icosphere3):
    mass = fem.assemble_mass(icosphere3)
    stiffness = fem.assemble_stiffness(icosphere3)
    ens = random_init(icosphere3, 3, seed=0, epsilon=0.25, tau=2e-3)
    ens, _ = run_stage(ens, mass, stiffness, max_steps=100_000)
    again, trace = run_stage(ens, mass, stiffness, max_steps=100_000)
    assert trace.converged
    assert len(trace.records) == 2  # initial record plus the first check


def test_constant_state_energy_reference(icosphere3):
    # near the epsilon = 0.5 minimiser the energy is dominated by S_eps
    mass = fem.assemble_mass(icosphere3)
    stiffness = fem.assemble_stiffness(icosphere3)
    area = icosphere3.area()
    values = np.full((icosphere3.n_vertices, 3), 1.0 / np.sqrt(area))
    report = reported_energy(values, icosphere3, 0.5, mass, stiffness)
    assert abs(report.s_eps - 6.0 / np.pi) < 0.01 * 6.0 / np.pi
    assert abs(report.energy - report.s_eps) < 1e-10
    assert abs(report.energy_half - report.s_eps) < 1e-10


def test_two_partition_hemispheres_equi_spectral(icosphere3):
    mass = fem.assemble_mass(icosphere3)
    stiffness = fem.assemble_stiffness(icosphere3)
    for seed in (0, 1, 2):
        ens = random_init(icosphere3, 2, seed=seed, epsilon=0.08, tau=2e-3)
        ens, _ = run_stage(ens, mass, stiffness, max_steps=40_000)
        lambdas = np.einsum("ni,ni->i", ens.values, stiffness @ ens.values)
        assert abs(lambdas[0] - lambdas[1]) < 0.02 * max(lambdas)


def test_y_partition_energy_reference(icosphere4):
    # analytic three-lune minimiser: each eigenvalue 15/4, total 45/4
    ens = y_partition_ensemble(icosphere4)
    stiffness = fem.assemble_stiffness(icosphere4)
    lambdas = np.einsum("ni,ni->i", ens.values, stiffness @ ens.values)
    assert np.allclose(lambdas, 3.75, rtol=0.02)


def test_continuation_refines_and_shrinks(icosphere3):
    schedule = ContinuationSchedule(eps0=0.4, tau0=4e-3, levels=2,
                                    max_steps_per_stage=50)
    seen = []
    result = run_continuation(generate_icosphere(1), 3, schedule, seed=0,
                              on_level=lambda lv, ens, tr: seen.append(lv))
    assert result.ok
    assert seen == [0, 1, 2]
    assert len(result.summaries) == 3
    assert result.ensemble.mesh.n_vertices == 642
    assert np.isclose(result.ensemble.epsilon, 0.4 * 0.5 ** 1.0)
    hs = [s.h for s in result.summaries]
    assert hs[0] > hs[1] > hs[2]


def test_eoc_halving():
    assert np.allclose(eoc([1.0, 0.5, 0.25]), [1.0, 1.0])
    with pytest.raises(ValueError):
        eoc([1.0, 0.0])


def test_schedule_validation():
    with pytest.raises(ValueError):
        ContinuationSchedule(eps0=-1.0)
    with pytest.raises(ValueError):
        ContinuationSchedule(eps_factor=1.5)
