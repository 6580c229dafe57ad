"""Angle function of a triangle in logarithmic side-ratio coordinates.

``theta(x, y)`` is the angle opposite side ``a`` of a triangle whose other two
sides satisfy ``b/a = exp(-x/2)`` and ``c/a = exp(-y/2)``.  Increasing ``x``
shrinks side ``b``; the angle then grows at rate ``cot(angle opposite c)/2``
(and symmetrically for ``y``), which is exactly the cotangent weight of the
edge joining the two remaining corners.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateEdge, InfeasibleTriangle

__all__ = [
    "RADICAND_FLOOR",
    "theta",
    "theta_partials",
    "angle_from_lengths",
    "lambda_of",
    "rescaled_lengths",
    "triangle_inequalities_hold",
    "corner_arguments",
    "corner_angles",
    "rescaled_triangle_lengths",
    "angle_sum_at",
]

# Radicands below this are treated as degenerate; never clamp across the boundary.
RADICAND_FLOOR = 1e-15


def _half_angle_terms(a, b, c):
    """Factored numerator/denominator of tan^2 of the angle opposite ``a``."""
    num = (a - b + c) * (a + b - c)
    den = (b + c - a) * (a + b + c)
    return num, den


def _check(num, den):
    bad = ~((num > 0) & (den > 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = np.where(bad, 0.0, num / np.where(den > 0, den, 1.0))
    bad |= rad < RADICAND_FLOOR
    if np.any(bad):
        raise InfeasibleTriangle("side lengths violate a strict triangle inequality")
    return rad


def angle_from_lengths(a, b, c):
    """Angle opposite side ``a`` via the half-angle formula (vectorized)."""
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    rad = _check(*_half_angle_terms(a, b, c))
    out = 2.0 * np.arctan(np.sqrt(rad))
    return float(out) if out.ndim == 0 else out


def theta(x, y):
    """Angle opposite the unit side when the others are ``exp(-x/2)`` and ``exp(-y/2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return angle_from_lengths(1.0, np.exp(-x / 2), np.exp(-y / 2))


def theta_partials(x, y):
    """``(d theta/dx, d theta/dy)``.

    With ``a = 1, b = exp(-x/2), c = exp(-y/2)``: ``d/dx = cot(C)/2`` and
    ``d/dy = cot(B)/2`` where ``B``, ``C`` are the angles opposite ``b``, ``c``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b, c = np.broadcast_arrays(np.ones_like(x + y), np.exp(-x / 2), np.exp(-y / 2))
    _check(*_half_angle_terms(a, b, c))
    four_area = np.sqrt((a + b + c) * (-a + b + c) * (a - b + c) * (a + b - c))
    cot_b = (a * a + c * c - b * b) / four_area
    cot_c = (a * a + b * b - c * c) / four_area
    dx, dy = 0.5 * cot_c, 0.5 * cot_b
    if dx.ndim == 0:
        return float(dx), float(dy)
    return dx, dy


def lambda_of(pa, pb, pc):
    """``2 log(|pb - pc| / |pa - pb|)`` for a triangle with corners ``pa, pb, pc``."""
    num = abs(complex(pb) - complex(pc))
    den = abs(complex(pa) - complex(pb))
    if num == 0.0 or den == 0.0:
        raise DegenerateEdge("zero-length edge")
    return 2.0 * math.log(num / den)


def rescaled_lengths(lengths, u):
    """Edge lengths ``l_ij * exp((u_i + u_j)/2)``.

    ``lengths[..., j]`` is the length of the edge from corner ``j`` to corner
    ``j+1`` (mod 3); ``u[..., j]`` is the scale factor at corner ``j``.
    """
    lengths = np.asarray(lengths, dtype=float)
    u = np.asarray(u, dtype=float)
    return lengths * np.exp(0.5 * (u + np.roll(u, -1, axis=-1)))


def triangle_inequalities_hold(a, b, c):
    a, b, c = float(a), float(b), float(c)
    return a < b + c and b < a + c and c < a + b


def rescaled_triangle_lengths(positions, triangles, u):
    """Rescaled lengths ``(F, 3)``; column ``j`` is the edge from corner ``j`` to ``j+1``."""
    p = positions[triangles]
    lengths = np.abs(np.roll(p, -1, axis=1) - p)
    return rescaled_lengths(lengths, np.asarray(u, dtype=float)[triangles])


def corner_arguments(positions, triangles, u):
    """Arguments ``(x, y)`` of theta for every corner, each shaped ``(F, 3)``.

    For corner ``j`` with ccw successors ``j1, j2``: ``exp(-x/2)`` is the
    rescaled ratio ``|[j, j1]| / |[j1, j2]|`` and ``exp(-y/2)`` is
    ``|[j, j2]| / |[j1, j2]|``.  Hence ``x`` depends on ``u[j2] - u[j]`` and
    ``y`` on ``u[j1] - u[j]``.
    """
    p = positions[triangles]
    lengths = np.abs(np.roll(p, -1, axis=1) - p)
    if np.any(lengths == 0):
        raise DegenerateEdge("zero-length edge")
    uu = np.asarray(u, dtype=float)[triangles]
    loglen = np.log(lengths)
    x = np.empty(triangles.shape)
    y = np.empty(triangles.shape)
    for j in range(3):
        j1, j2 = (j + 1) % 3, (j + 2) % 3
        # lengths[:, j] is edge [j, j1]; lengths[:, j1] is [j1, j2]; lengths[:, j2] is [j2, j]
        x[:, j] = 2.0 * (loglen[:, j1] - loglen[:, j]) + uu[:, j2] - uu[:, j]
        y[:, j] = 2.0 * (loglen[:, j1] - loglen[:, j2]) + uu[:, j1] - uu[:, j]
    return x, y


def corner_angles(positions, triangles, u):
    """Angles ``(F, 3)`` at each corner of each rescaled triangle."""
    return theta(*corner_arguments(positions, triangles, u))


def angle_sum_at(sub, u, v0):
    """Sum of rescaled angles at interior vertex ``v0`` over its cyclic star."""
    u = np.asarray(u, dtype=float)
    star = sub.star(v0)
    if len(star) != 6:
        raise ValueError(f"vertex {v0} is not interior")
    p = sub.positions
    total = 0.0
    for v, vj, vk in star:
        x = lambda_of(p[v], p[vj], p[vk]) + u[vk] - u[v]
        y = lambda_of(p[v], p[vk], p[vj]) + u[vj] - u[v]
        total += theta(x, y)
    return total
