"""Convergence and Taylor-defect studies over a sequence of lattice scales."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import angle_sum_defect, get_map, predicted_constant
from .errors import DCPLError, InsufficientData
from .lattice import build_lattice_patch
from .layout import Normalization, layout
from .solver import solve_dirichlet

__all__ = [
    "ERROR_COLUMNS",
    "ROUNDOFF_FLOOR",
    "fit_rate",
    "richardson",
    "convergence_row",
    "ConvergenceReport",
    "run_convergence_study",
    "TaylorReport",
    "run_taylor_study",
    "worker_count",
]

ERROR_COLUMNS = ("err_u", "err_f", "err_dz", "err_dzbar", "err_psi", "err_c1", "holonomy")
# errors that never rise above this are rounding noise; no order is fitted
ROUNDOFF_FLOOR = 1e-10


def fit_rate(epsilons, errors):
    """Least-squares slope of ``log(error)`` against ``log(epsilon)``."""
    eps = np.asarray(epsilons, dtype=float)
    err = np.asarray(errors, dtype=float)
    if eps.shape != err.shape or eps.ndim != 1 or len(eps) < 2:
        raise InsufficientData("need two or more (epsilon, error) pairs of equal length")
    if np.any(eps <= 0) or np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise InsufficientData("epsilons and errors must be positive and finite")
    if np.ptp(eps) == 0:
        raise InsufficientData("epsilons must not all be equal")
    slope, _ = np.polyfit(np.log(eps), np.log(err), 1)
    return float(slope)


def richardson(epsilons, values):
    """Value at ``epsilon -> 0`` of the polynomial in ``epsilon**2`` through all points (Neville)."""
    h = np.asarray(epsilons, dtype=float) ** 2
    p = np.array(values, dtype=float)
    if len(h) == 0 or len(h) != len(p):
        raise InsufficientData("need matching, nonempty epsilons and values")
    n = len(h)
    for k in range(1, n):
        for i in range(n - k):
            # interpolate points i..i+k and evaluate at 0
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i])
    return float(p[0])


def convergence_row(cmap, spec, region, opts=None):
    """Solve, lay out and measure errors against ``cmap`` at one lattice scale."""
    sub = build_lattice_patch(spec, region)
    p = sub.positions
    cmap.check(p)
    exact = cmap.log_abs_fprime(p)
    res = solve_dirichlet(sub, exact[sub.boundary], opts)
    pl = layout(sub, res.u, Normalization.from_map(cmap, sub))
    img = pl.image_positions
    e = sub.edges
    mid = 0.5 * (p[e[:, 0]] + p[e[:, 1]])
    img_mid = 0.5 * (img[e[:, 0]] + img[e[:, 1]])
    err_f_vertices = float(np.max(np.abs(img - cmap.f(p))))
    err_f = max(err_f_vertices, float(np.max(np.abs(img_mid - cmap.f(mid)))))
    centroids = p[sub.triangles].mean(axis=1)
    a, b = pl.triangle_maps[:, 0], pl.triangle_maps[:, 1]
    arg_mid = np.imag(cmap.log_fprime(mid))
    dpsi = np.angle(np.exp(1j * (pl.edge_rotations - arg_mid)))
    d = p[e[:, 1]] - p[e[:, 0]]
    g1 = np.array([cmap.g_derivs(z)[0] for z in mid])
    # directional derivative of log|f'| = Re(g' * unit direction)
    c1 = np.abs((res.u[e[:, 1]] - res.u[e[:, 0]]) / np.abs(d) - (g1 * d / np.abs(d)).real)
    return {
        "epsilon": spec.epsilon,
        "err_u": float(np.max(np.abs(res.u - exact))),
        "err_f": float(err_f),
        "err_f_vertices": err_f_vertices,
        "err_dz": float(np.max(np.abs(a - cmap.fprime(centroids)))),
        "err_dzbar": float(np.max(np.abs(b))),
        "err_psi": float(np.max(np.abs(dpsi))),
        "err_c1": float(np.max(c1)),
        "holonomy": float(pl.holonomy_defect),
        "iterations": int(res.iterations),
        "n_vertices": int(sub.n_vertices),
        "diameter": float(sub.diameter),
    }


def _row_or_failure(args):
    cmap, spec, region, opts = args
    if isinstance(cmap, tuple):
        # (name, params) sent to a worker process; maps hold closures and do not pickle
        cmap = get_map(cmap[0], **dict(cmap[1]))
    try:
        return convergence_row(cmap, spec, region, opts)
    except DCPLError as exc:
        return {"epsilon": spec.epsilon, "failed": True, "error": type(exc).__name__, "message": str(exc)}


def worker_count():
    """Worker processes from ``DCPL_THREADS`` (default 1)."""
    raw = os.environ.get("DCPL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_rows(fn, jobs):
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _fit_orders(rows, columns):
    good = [r for r in rows if not r.get("failed")]
    orders = {}
    for col in columns:
        if len(good) < 3:
            orders[col] = None
            continue
        errs = np.array([r[col] for r in good])
        if np.max(errs) <= ROUNDOFF_FLOOR:
            orders[col] = None
            continue
        keep = errs > 0
        try:
            orders[col] = fit_rate(np.array([r["epsilon"] for r in good])[keep], errs[keep])
        except InsufficientData:
            orders[col] = None
    return orders


@dataclass
class ConvergenceReport:
    rows: list
    orders: dict
    map_name: str = ""
    notes: list = field(
        default_factory=lambda: [
            "err_c1 divides vertex differences by the edge length |v - w|",
            f"orders are null when fewer than 3 rows succeed or all errors are <= {ROUNDOFF_FLOOR:g}",
        ]
    )

    @property
    def failed_rows(self):
        return [r for r in self.rows if r.get("failed")]

    def to_dict(self):
        return {"map": self.map_name, "rows": self.rows, "orders": self.orders, "notes": self.notes}


def run_convergence_study(cmap, spec, region, epsilons, opts=None):
    """One fresh patch, solve and layout per scale; rows ordered as ``epsilons``."""
    portable = (cmap.name, cmap.params) if worker_count() > 1 else cmap
    jobs = [(portable, spec.with_epsilon(eps), region, opts) for eps in epsilons]
    rows = _map_rows(_row_or_failure, jobs)
    return ConvergenceReport(rows=rows, orders=_fit_orders(rows, ERROR_COLUMNS), map_name=cmap.name)


@dataclass
class TaylorReport:
    v0: complex
    rows: list
    predicted: float
    limit: float | None
    relative_deviation: float | None

    def to_dict(self):
        return {
            "v0": [self.v0.real, self.v0.imag],
            "rows": self.rows,
            "predicted_constant": self.predicted,
            "extrapolated_limit": self.limit,
            "relative_deviation": self.relative_deviation,
        }


def run_taylor_study(cmap, spec, v0, epsilons):
    """Angle-sum defect of ``log|f'|`` at ``v0`` for each scale and its extrapolated ``eps**4`` coefficient."""
    v0 = complex(v0)
    predicted = predicted_constant(cmap, v0, spec)
    rows = []
    for eps in epsilons:
        try:
            d = angle_sum_defect(cmap, v0, spec, eps)
            rows.append({"epsilon": eps, "defect": d, "defect_over_eps4": d / eps**4, "predicted_constant": predicted})
        except DCPLError as exc:
            rows.append(
                {
                    "epsilon": eps,
                    "defect": math.nan,
                    "defect_over_eps4": math.nan,
                    "predicted_constant": predicted,
                    "failed": True,
                    "error": type(exc).__name__,
                }
            )
    good = [r for r in rows if not r.get("failed")]
    limit = richardson([r["epsilon"] for r in good], [r["defect_over_eps4"] for r in good]) if good else None
    rel = None
    if limit is not None and predicted != 0:
        rel = abs(limit - predicted) / abs(predicted)
    return TaylorReport(v0, rows, predicted, limit, rel)
