"""Dirichlet problem for vertex scale factors.

Interior scale factors are found as the root of the angle-defect map
``G_i(u) = 2*pi - sum of rescaled angles at v_i``, which is the gradient of a
locally strictly convex energy.  Its Jacobian is a cotangent-weighted
Laplacian, so Newton's method with backtracking converges quadratically for
acute lattices at small scale.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import (
    InfeasibleScaleField,
    InfeasibleTriangle,
    LineSearchFailure,
    MaxIterations,
    NotAcute,
)
from .geometry import corner_angles, corner_arguments, theta_partials

__all__ = [
    "SolverOptions",
    "SolveResult",
    "gradient",
    "hessian",
    "gradient_jacobian",
    "feasibility",
    "harmonic_extension",
    "solve_dirichlet",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass
class SolverOptions:
    gradient_tolerance: float = 1e-10
    max_iterations: int = 50
    line_search_shrink: float = 0.5
    initial_guess: np.ndarray | None = None
    max_line_search_steps: int = 60

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must lie in (0, 1)")


@dataclass
class SolveResult:
    u: np.ndarray
    iterations: int
    final_gradient_norm: float
    converged: bool
    history: list = field(default_factory=list)


def _angle_sums(sub, u):
    try:
        angles = corner_angles(sub.positions, sub.triangles, u)
    except InfeasibleTriangle as exc:
        raise InfeasibleScaleField(str(exc)) from None
    return np.bincount(sub.triangles.ravel(), weights=angles.ravel(), minlength=sub.n_vertices)


def gradient(sub, u):
    """Angle defect ``2*pi - angle sum`` at every interior vertex (ordered as ``sub.interior``)."""
    return TWO_PI - _angle_sums(sub, u)[sub.interior]


def _jacobian_entries(sub, u):
    try:
        dx, dy = theta_partials(*corner_arguments(sub.positions, sub.triangles, u))
    except InfeasibleTriangle as exc:
        raise InfeasibleScaleField(str(exc)) from None
    tris = sub.triangles
    rows, cols, vals = [], [], []
    for j in range(3):
        j1, j2 = (j + 1) % 3, (j + 2) % 3
        # d(angle_j)/du[j2] = dx, d(angle_j)/du[j1] = dy, d(angle_j)/du[j] = -(dx + dy)
        rows += [tris[:, j]] * 3
        cols += [tris[:, j2], tris[:, j1], tris[:, j]]
        vals += [-dx[:, j], -dy[:, j], dx[:, j] + dy[:, j]]
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def gradient_jacobian(sub, u):
    """Derivative of ``gradient`` w.r.t. all vertex values: ``(n_interior, n_vertices)`` CSR."""
    r, c, v = _jacobian_entries(sub, u)
    n = sub.n_vertices
    full = sparse.csr_matrix((v, (r, c)), shape=(n, n))
    return full[sub.interior]


def hessian(sub, u):
    """Jacobian of ``gradient`` restricted to interior unknowns (symmetric, CSR)."""
    return gradient_jacobian(sub, u)[:, sub.interior]


def feasibility(sub, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (sub.n_vertices,) or not np.all(np.isfinite(u)):
        return False
    try:
        corner_angles(sub.positions, sub.triangles, u)
    except InfeasibleTriangle:
        return False
    return True


def _graph_laplacian(sub):
    e = sub.edges
    n = sub.n_vertices
    adj = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    adj = (adj + adj.T).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return (sparse.diags(deg) - adj).tocsr()


def harmonic_extension(sub, boundary_values):
    """Extend boundary values to the interior with the combinatorial graph Laplacian."""
    u = np.zeros(sub.n_vertices)
    u[sub.boundary] = _boundary_array(sub, boundary_values)
    lap = _graph_laplacian(sub)
    ii, bb = sub.interior, sub.boundary
    rhs = -lap[ii][:, bb] @ u[bb]
    u[ii] = spsolve(lap[ii][:, ii].tocsc(), rhs)
    return u


def _boundary_array(sub, boundary_values):
    vals = np.asarray(boundary_values, dtype=float)
    if vals.ndim == 0:
        vals = np.full(len(sub.boundary), float(vals))
    elif vals.shape == (sub.n_vertices,):
        vals = vals[sub.boundary]
    elif vals.shape != (len(sub.boundary),):
        raise ValueError(
            f"boundary_values must have length {len(sub.boundary)} (boundary) "
            f"or {sub.n_vertices} (all vertices), got shape {vals.shape}"
        )
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary_values must be finite")
    return vals


def _require_acute(spec):
    for name, angle in zip(("alpha", "beta", "gamma"), spec.angles):
        if angle >= math.pi / 2:
            raise NotAcute(
                f"lattice angle {name} = {math.degrees(angle):.6g} deg is not strictly acute"
            )


def solve_dirichlet(sub, boundary_values, opts=None):
    """Interior scale factors with angle sums ``2*pi`` and the given boundary values.

    ``boundary_values`` is aligned with ``sub.boundary`` (or a full per-vertex
    array whose boundary entries are used, or a scalar).
    """
    opts = opts or SolverOptions()
    _require_acute(sub.spec)
    ub = _boundary_array(sub, boundary_values)
    interior = sub.interior

    if opts.initial_guess is not None:
        u = np.array(opts.initial_guess, dtype=float, copy=True)
        if u.shape != (sub.n_vertices,):
            raise ValueError("initial_guess must hold one value per vertex")
        u[sub.boundary] = ub
    else:
        u = harmonic_extension(sub, ub)
    if not feasibility(sub, u):
        raise InfeasibleScaleField("initial guess is infeasible")

    g = gradient(sub, u)
    gnorm = float(np.max(np.abs(g))) if len(g) else 0.0
    history = [gnorm]
    iterations = 0
    while gnorm > opts.gradient_tolerance:
        if iterations >= opts.max_iterations:
            raise MaxIterations(
                f"no convergence after {iterations} Newton steps (|G| = {gnorm:.3e})",
                SolveResult(u, iterations, gnorm, False, history),
            )
        step = spsolve(hessian(sub, u).tocsc(), -g)
        t = 1.0
        for _ in range(opts.max_line_search_steps):
            trial = u.copy()
            trial[interior] += t * step
            try:
                g_trial = gradient(sub, trial)
            except InfeasibleScaleField:
                g_trial = None
            if g_trial is not None:
                n_trial = float(np.max(np.abs(g_trial)))
                if n_trial < gnorm:
                    break
            t *= opts.line_search_shrink
        else:
            raise LineSearchFailure(
                f"no feasible decreasing step at iteration {iterations} (|G| = {gnorm:.3e})",
                SolveResult(u, iterations, gnorm, False, history),
            )
        u, g, gnorm = trial, g_trial, n_trial
        iterations += 1
        history.append(gnorm)
        log.debug("newton step %d: t=%g |G|=%.3e", iterations, t, gnorm)
    return SolveResult(u, iterations, gnorm, True, history)
