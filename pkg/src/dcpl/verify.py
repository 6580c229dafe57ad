"""Barrier scale fields that bracket the discrete solution, and checks on them.

``w+ = log|f'| + eps^2 (M+ - C+|v|^2)`` and ``w- = log|f'| - eps^2 (M- - C-|v|^2)``
at interior vertices, both equal to ``log|f'|`` on the boundary.  With ``C``
large enough the angle sums of ``w+`` fall below ``2*pi`` and those of ``w-``
rise above it, so the angle-defect field points into the box between them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .analytic import predicted_constant
from .errors import InfeasibleTriangle
from .geometry import angle_sum_at

__all__ = [
    "BarrierConstants",
    "TrapSet",
    "BarrierReport",
    "InwardReport",
    "barrier_constants",
    "barrier_fields",
    "barrier_inequality_check",
    "inward_gradient_check",
    "in_trap",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BarrierConstants:
    m_plus: float
    m_minus: float
    c_plus: float
    c_minus: float


@dataclass(frozen=True, eq=False)
class TrapSet:
    lower: np.ndarray
    upper: np.ndarray
    epsilon: float
    constants: BarrierConstants

    @property
    def width(self):
        return float(np.max(self.upper - self.lower))


@dataclass
class BarrierReport:
    passed: bool
    n_checked: int
    violations: list = field(default_factory=list)
    margins_plus: np.ndarray | None = None  # angle sum of w+ minus 2*pi, per interior vertex
    margins_minus: np.ndarray | None = None
    width_within_epsilon: bool = True

    def to_dict(self):
        d = asdict(self)
        for k in ("margins_plus", "margins_minus"):
            arr = d.pop(k)
            d[f"max_{k}"] = None if arr is None else float(np.nanmax(arr))
            d[f"min_{k}"] = None if arr is None else float(np.nanmin(arr))
        return d


@dataclass
class InwardReport:
    passed: bool
    samples: int
    failures: list = field(default_factory=list)
    width_within_epsilon: bool = True

    def to_dict(self):
        return asdict(self)


def _lattice_sine_product(spec):
    return math.sin(spec.alpha) * math.sin(spec.beta) * math.sin(spec.gamma)


def barrier_constants(cmap, sub, spec=None, safety=2.0, floor=1.0):
    """Constants with ``4 sin a sin b sin c * C > safety * sup |predicted constant|``."""
    spec = spec or sub.spec
    pts = sub.positions[sub.interior]
    cmap.check(pts)
    sup = max((abs(predicted_constant(cmap, z, spec)) for z in pts), default=0.0)
    c = max(floor, safety * sup / (4.0 * _lattice_sine_product(spec)))
    m = c * float(np.max(np.abs(sub.positions)) ** 2) * 1.5
    return BarrierConstants(m, m, c, c)


def barrier_fields(cmap, sub, constants, epsilon=None):
    eps = sub.spec.epsilon if epsilon is None else float(epsilon)
    base = cmap.log_abs_fprime(sub.positions)
    r2 = np.abs(sub.positions) ** 2
    q_plus = np.zeros(sub.n_vertices)
    q_minus = np.zeros(sub.n_vertices)
    ii = sub.interior
    q_plus[ii] = eps**2 * (constants.m_plus - constants.c_plus * r2[ii])
    q_minus[ii] = -(eps**2) * (constants.m_minus - constants.c_minus * r2[ii])
    return TrapSet(lower=base + q_minus, upper=base + q_plus, epsilon=eps, constants=constants)


def in_trap(trapset, u, tol=0.0):
    u = np.asarray(u, dtype=float)
    return bool(np.all(trapset.lower - tol <= u) and np.all(u <= trapset.upper + tol))


def barrier_inequality_check(cmap, sub, trapset):
    """Angle sums of ``w+`` must be ``< 2*pi`` and of ``w-`` ``> 2*pi`` at every interior vertex."""
    n = len(sub.interior)
    plus = np.full(n, np.nan)
    minus = np.full(n, np.nan)
    violations = []
    for k, v in enumerate(sub.interior):
        v = int(v)
        for which, field_, out, sign in (("plus", trapset.upper, plus, -1), ("minus", trapset.lower, minus, 1)):
            try:
                out[k] = angle_sum_at(sub, field_, v) - TWO_PI
            except InfeasibleTriangle:
                violations.append({"vertex": v, "field": which, "reason": "infeasible"})
                continue
            if not sign * out[k] > 0:
                violations.append({"vertex": v, "field": which, "margin": float(out[k])})
    width_ok = trapset.width <= trapset.epsilon
    return BarrierReport(
        passed=not violations,
        n_checked=n,
        violations=violations,
        margins_plus=plus,
        margins_minus=minus,
        width_within_epsilon=width_ok,
    )


def inward_gradient_check(cmap, sub, trapset, sample_count=200, seed=0):
    """Sample boundary faces of the trap box and check the sign of the angle defect.

    On the face ``u_i = w+_i`` the defect ``2*pi - angle sum`` must be positive;
    on ``u_i = w-_i`` negative.
    """
    rng = np.random.default_rng(seed)
    lo, hi = trapset.lower, trapset.upper
    failures = []
    for s in range(sample_count):
        i = int(sub.interior[rng.integers(len(sub.interior))])
        upper_face = bool(rng.integers(2))
        u = lo + rng.random(sub.n_vertices) * (hi - lo)
        u[i] = hi[i] if upper_face else lo[i]
        try:
            defect = TWO_PI - angle_sum_at(sub, u, i)
        except InfeasibleTriangle:
            failures.append({"sample": s, "vertex": i, "face": "upper" if upper_face else "lower", "reason": "infeasible"})
            continue
        ok = defect > 0 if upper_face else defect < 0
        if not ok:
            failures.append(
                {"sample": s, "vertex": i, "face": "upper" if upper_face else "lower", "defect": float(defect)}
            )
    return InwardReport(
        passed=not failures,
        samples=sample_count,
        failures=failures,
        width_within_epsilon=trapset.width <= trapset.epsilon,
    )
