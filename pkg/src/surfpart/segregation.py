"""Penalised eigenfunction-segregation gradient flow with operator splitting.

Each time step composes three phases: an implicit heat step per component,
an exact nodal ODE step for the competition penalty, and an L2
renormalisation. A continuation driver shrinks the penalty parameter and
time step while refining the mesh, restarting from the previous minimiser.
"""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .mesh import TriangulatedSurface, refine
from .solvers import DEFAULT_HEAT_TOL, SolverError, pcg_solve


class ExtinctionError(RuntimeError):
    """A component collapsed to the zero field."""

    def __init__(self, component):
        super().__init__(f"component {component} has zero L2 norm")
        self.component = component


@dataclass
class ComponentEnsemble:
    """The m nonnegative nodal fields together with flow parameters.

    After every full step each column has unit L2 norm and nonnegative
    nodal values.
    """

    values: np.ndarray  # (n_vertices, m)
    epsilon: float
    tau: float
    mesh: TriangulatedSurface
    step: int = 0
    reseeds: int = 0

    def __post_init__(self):
        if self.epsilon <= 0 or self.tau <= 0:
            raise ValueError("epsilon and tau must be positive")
        if self.values.shape[0] != self.mesh.n_vertices:
            raise ValueError("ensemble fields do not match the mesh")

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def time(self):
        return self.step * self.tau

    def copy(self):
        return ComponentEnsemble(self.values.copy(), self.epsilon, self.tau,
                                 self.mesh, self.step, self.reseeds)


@dataclass
class EnergyReport:
    """Energy bookkeeping at one instant.

    ``energy`` is the table-reporting convention (full Dirichlet term plus
    penalty); ``energy_half`` carries the 1/2 factor on the Dirichlet term.
    """

    energy: float
    energy_half: float
    s_eps: float
    lambdas: np.ndarray
    lambdas_eps: np.ndarray


@dataclass
class TraceRecord:
    step: int
    time: float
    energy: float
    energy_half: float
    s_eps: float
    lambdas: tuple


@dataclass
class EnergyTrace:
    records: list = field(default_factory=list)
    converged: bool = False

    def append(self, step, time, report):
        self.records.append(TraceRecord(step, time, report.energy,
                                        report.energy_half, report.s_eps,
                                        tuple(report.lambdas)))

    def energies(self):
        return np.array([r.energy for r in self.records])

    def to_csv(self):
        if not self.records:
            return ""
        m = len(self.records[0].lambdas)
        buf = io.StringIO()
        cols = ["step", "time", "energy", "energy_half", "s_eps"]
        cols += [f"lambda_{i + 1}" for i in range(m)]
        buf.write(",".join(cols) + "\n")
        for r in self.records:
            row = [str(r.step)] + [
                format(v, ".17g")
                for v in (r.time, r.energy, r.energy_half, r.s_eps, *r.lambdas)
            ]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


@dataclass
class ContinuationSchedule:
    """Shrink rule for the penalty parameter, time step and mesh.

    ``levels`` counts refinements: level 0 runs on the initial mesh, every
    later level runs after one uniform refinement with epsilon and tau
    multiplied by their shrink factors.
    """

    eps0: float = 0.5
    tau0: float = 8e-4
    eps_factor: float = 1.0 / np.sqrt(2.0)
    tau_factor: float = 1.0 / np.sqrt(2.0)
    levels: int = 0
    energy_stop_tol: float = 1e-6
    max_steps_per_stage: int = 500_000

    def __post_init__(self):
        if self.eps0 <= 0 or self.tau0 <= 0:
            raise ValueError("eps0 and tau0 must be positive")
        if not (0.0 < self.eps_factor <= 1.0 and 0.0 < self.tau_factor <= 1.0):
            raise ValueError("shrink factors must lie in (0, 1]")
        if self.levels < 0:
            raise ValueError("levels must be nonnegative")

    def epsilon_at(self, level):
        return self.eps0 * self.eps_factor**level

    def tau_at(self, level):
        return self.tau0 * self.tau_factor**level


def check_interval(tau):
    """Energy-evaluation cadence: one check per 0.1 units of flow time."""
    return max(1, int(round(0.1 / tau)))


def labeled_init(mesh, labels, m, epsilon=0.5, tau=8e-4, mass=None,
                 reseeds=0):
    """Nodal partition from a per-vertex label array (one-hot, normalised).

    The construction makes the penalty integrand vanish at every node.
    """
    if m < 2:
        raise ValueError("need at least 2 components")
    if not mesh.is_closed:
        raise ValueError("segregation flow requires a closed surface")
    labels = np.asarray(labels)
    if labels.shape != (mesh.n_vertices,):
        raise ValueError("labels must be one integer per vertex")
    if len(np.unique(labels)) != m:
        raise ValueError("every component needs nonempty support")
    values = np.zeros((mesh.n_vertices, m))
    values[np.arange(mesh.n_vertices), labels] = 1.0
    if mass is None:
        mass = fem.assemble_mass(mesh)
    values = normalize_step(values, mass)
    return ComponentEnsemble(values, epsilon, tau, mesh, reseeds=reseeds)


def random_init(mesh, m, seed, epsilon=0.5, tau=8e-4, mass=None):
    """Random nodal partition: one component equals 1 at each vertex.

    If a component ends up with empty support the seed is bumped
    deterministically and the reseed is recorded on the ensemble.
    """
    if m < 2:
        raise ValueError("need at least 2 components")
    reseeds = 0
    while True:
        rng = np.random.default_rng(seed + reseeds)
        labels = rng.integers(0, m, mesh.n_vertices)
        if len(np.unique(labels)) == m:
            break
        reseeds += 1
    return labeled_init(mesh, labels, m, epsilon, tau, mass=mass,
                        reseeds=reseeds)


def heat_operator(mass, stiffness, tau):
    return (mass.multiply(1.0 / tau) + stiffness).tocsr()


def _heat_solve_all(values, operator, mass, tau, rel_tol, workers):
    """Implicit Euler heat solves, one independent PCG per component."""
    out = np.empty_like(values)

    def solve(i):
        rhs = (mass @ values[:, i]) / tau
        x, report = pcg_solve(operator, rhs, x0=values[:, i], rel_tol=rel_tol)
        if not report.converged:
            raise SolverError(
                f"heat solve for component {i} stalled at residual "
                f"{report.final_residual_norm:.3e}"
            )
        out[:, i] = x

    indices = range(values.shape[1])
    if workers <= 1:
        for i in indices:
            solve(i)
    else:
        with ThreadPoolExecutor(max_workers=min(workers, values.shape[1])) as pool:
            list(pool.map(solve, indices))
    return out


def heat_step(ensemble, mass, stiffness, rel_tol=DEFAULT_HEAT_TOL, workers=1):
    """One implicit Euler step of the surface heat equation per component.

    The result is not renormalised and may slightly undershoot zero (no
    discrete maximum principle); Dirichlet energy does not increase.
    """
    operator = heat_operator(mass, stiffness, ensemble.tau)
    return _heat_solve_all(ensemble.values, operator, mass, ensemble.tau,
                           rel_tol, workers)


def ode_step(values, epsilon, tau):
    """Exact nodal solution of the competition ODE over one time step.

    All components read the same input (Jacobi update). The per-vertex sum
    of squares is accumulated in ascending value order, which makes the
    result bitwise equivariant under component permutations.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    u2 = values**2
    total = np.sum(np.sort(u2, axis=1), axis=1)
    with np.errstate(under="ignore"):
        factors = np.exp(-(2.0 * tau / epsilon**2) * (total[:, None] - u2))
    return values * factors


def normalize_step(values, mass):
    """Rescale every component to unit L2 norm on the triangulated surface."""
    norms = np.sqrt(np.einsum("ni,ni->i", values, mass @ values))
    dead = np.flatnonzero(norms == 0.0)
    if len(dead):
        raise ExtinctionError(int(dead[0]))
    return values / norms


def reported_energy(values, mesh, epsilon, mass, stiffness):
    """All energy conventions plus per-component eigenvalue estimates."""
    av = stiffness @ values
    lambdas = np.einsum("ni,ni->i", values, av)
    s_eps = fem.penalty_energy(values, mesh, epsilon)
    lambdas_eps = lambdas + fem.penalty_eigenvalue_terms(values, mesh, epsilon)
    total = float(np.sum(lambdas))
    return EnergyReport(
        energy=total + s_eps,
        energy_half=0.5 * total + s_eps,
        s_eps=s_eps,
        lambdas=lambdas,
        lambdas_eps=lambdas_eps,
    )


def run_stage(ensemble, mass, stiffness, stop_tol=1e-6, max_steps=500_000,
              heat_rel_tol=DEFAULT_HEAT_TOL, workers=1):
    """Iterate the three-step scheme until the energy stalls.

    The reported energy is evaluated every ``check_interval(tau)`` steps and
    the stage stops when its absolute change falls below ``stop_tol`` (or at
    the step cap). Returns the advanced ensemble and the energy trace.
    """
    tau, eps, mesh = ensemble.tau, ensemble.epsilon, ensemble.mesh
    interval = check_interval(tau)
    operator = heat_operator(mass, stiffness, tau)

    values = ensemble.values.copy()
    trace = EnergyTrace()
    report = reported_energy(values, mesh, eps, mass, stiffness)
    trace.append(ensemble.step, ensemble.step * tau, report)
    previous_energy = report.energy

    taken = 0
    while taken < max_steps:
        burst = min(interval, max_steps - taken)
        for _ in range(burst):
            values = _heat_solve_all(values, operator, mass, tau,
                                     heat_rel_tol, workers)
            np.clip(values, 0.0, None, out=values)  # undershoot is O(solver tol)
            values = ode_step(values, eps, tau)
            values = normalize_step(values, mass)
        taken += burst
        step = ensemble.step + taken
        report = reported_energy(values, mesh, eps, mass, stiffness)
        trace.append(step, step * tau, report)
        if abs(report.energy - previous_energy) < stop_tol:
            trace.converged = True
            break
        previous_energy = report.energy

    out = ComponentEnsemble(values, eps, tau, mesh, step=ensemble.step + taken,
                            reseeds=ensemble.reseeds)
    return out, trace


@dataclass
class LevelSummary:
    level: int
    h: float
    epsilon: float
    tau: float
    n_vertices: int
    steps: int
    converged: bool
    energy: float
    energy_half: float
    s_eps: float
    lambdas: tuple


@dataclass
class ContinuationResult:
    ensemble: ComponentEnsemble
    summaries: list
    failure: str | None = None

    @property
    def ok(self):
        return self.failure is None


def run_continuation(initial_mesh, m, schedule, seed, workers=1,
                     heat_rel_tol=DEFAULT_HEAT_TOL, on_level=None,
                     init_labels=None):
    """Drive the flow across the continuation schedule.

    Runs a stage per level; between levels the mesh is refined, the fields
    are prolonged and renormalised, and epsilon/tau shrink by their factors.
    A stage failure ends the run, keeping the completed levels. The start
    state is the one-hot random nodal partition for `seed`, or, when
    `init_labels` is given, the one-hot partition of that label array
    (warm start from a candidate partition).
    """
    mesh = initial_mesh
    mass = fem.assemble_mass(mesh)
    stiffness = fem.assemble_stiffness(mesh)
    if init_labels is not None:
        ensemble = labeled_init(mesh, init_labels, m, schedule.eps0,
                                schedule.tau0, mass=mass)
    else:
        ensemble = random_init(mesh, m, seed, schedule.eps0, schedule.tau0,
                               mass=mass)
    summaries = []
    for level in range(schedule.levels + 1):
        try:
            ensemble, trace = run_stage(
                ensemble, mass, stiffness,
                stop_tol=schedule.energy_stop_tol,
                max_steps=schedule.max_steps_per_stage,
                heat_rel_tol=heat_rel_tol, workers=workers,
            )
        except (ExtinctionError, SolverError) as exc:
            return ContinuationResult(ensemble, summaries,
                                      failure=f"level {level}: {exc}")
        last = trace.records[-1]
        summaries.append(LevelSummary(
            level=level, h=mesh.h, epsilon=ensemble.epsilon, tau=ensemble.tau,
            n_vertices=mesh.n_vertices, steps=ensemble.step,
            converged=trace.converged, energy=last.energy,
            energy_half=last.energy_half, s_eps=last.s_eps,
            lambdas=last.lambdas,
        ))
        if on_level is not None:
            on_level(level, ensemble, trace)
        if level < schedule.levels:
            mesh, pmap = refine(mesh)
            values = np.column_stack(
                [fem.prolong(ensemble.values[:, i], pmap) for i in range(m)]
            )
            mass = fem.assemble_mass(mesh)
            stiffness = fem.assemble_stiffness(mesh)
            values = normalize_step(values, mass)
            ensemble = ComponentEnsemble(
                values,
                ensemble.epsilon * schedule.eps_factor,
                ensemble.tau * schedule.tau_factor,
                mesh, step=0, reseeds=ensemble.reseeds,
            )
    return ContinuationResult(ensemble, summaries)


def eoc(errors):
    """Experimental orders of convergence under parameter halving."""
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        raise ValueError("eoc requires strictly positive errors")
    return list(np.log(errors[1:] / errors[:-1]) / np.log(0.5))
