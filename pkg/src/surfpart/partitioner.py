"""Scikit-learn style front end for the segregation flow."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from . import analysis, fem
from .mesh import TriangulatedSurface
from .segregation import ContinuationSchedule, run_continuation


class SpectralPartitioner(ClusterMixin, BaseEstimator):
    """Partition a closed surface by minimising summed first eigenvalues.

    Follows the fit/predict clustering convention: ``fit`` consumes a
    :class:`TriangulatedSurface` and exposes per-vertex ``labels_`` (the
    void band is labelled -1), per-component eigenvalue estimates and the
    final energy. Hyperparameters mirror the continuation schedule.
    """

    def __init__(self, m=3, eps0=0.5, tau0=8e-4,
                 eps_factor=1.0 / np.sqrt(2.0), tau_factor=1.0 / np.sqrt(2.0),
                 levels=3, seed=0, stop_tol=1e-6, max_steps=500_000,
                 workers=1):
        self.m = m
        self.eps0 = eps0
        self.tau0 = tau0
        self.eps_factor = eps_factor
        self.tau_factor = tau_factor
        self.levels = levels
        self.seed = seed
        self.stop_tol = stop_tol
        self.max_steps = max_steps
        self.workers = workers

    def fit(self, X, y=None):
        if not isinstance(X, TriangulatedSurface):
            raise TypeError("X must be a TriangulatedSurface")
        if not X.is_closed:
            raise ValueError("segregation flow requires a closed surface")
        schedule = ContinuationSchedule(
            eps0=self.eps0, tau0=self.tau0, eps_factor=self.eps_factor,
            tau_factor=self.tau_factor, levels=self.levels,
            energy_stop_tol=self.stop_tol,
            max_steps_per_stage=self.max_steps,
        )
        result = run_continuation(X, self.m, schedule, self.seed,
                                  workers=self.workers)
        if not result.ok:
            raise RuntimeError(f"continuation failed: {result.failure}")
        self.result_ = result
        self.ensemble_ = result.ensemble
        self.mesh_ = result.ensemble.mesh
        stiffness = fem.assemble_stiffness(self.mesh_)
        self.eigenvalues_ = analysis.component_eigenvalues(result.ensemble,
                                                           stiffness)
        last = result.summaries[-1]
        self.energy_ = last.energy
        self.s_eps_ = last.s_eps
        self.extraction_ = analysis.extract_partition(result.ensemble)
        self.labels_ = self.extraction_.labels
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    def predict(self, X=None):
        """Per-vertex labels of the fitted mesh (-1 marks the void band)."""
        if not hasattr(self, "labels_"):
            raise NotFittedError("call fit first")
        if X is not None and X is not self.mesh_:
            raise ValueError("can only predict on the fitted mesh")
        return self.labels_
