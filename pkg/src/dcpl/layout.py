"""Piecewise-linear map realizing a scale field.

Triangle frames (the image direction of one edge per triangle) are propagated
breadth-first from the seed edge by adding corner angles; vertex positions are
then integrated breadth-first from the origin along edges.  Each vertex is
frozen at its first placement and the mismatch that other triangles would
produce is reported as the holonomy defect instead of being redistributed.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTriangle,
    InfeasibleScaleField,
    InfeasibleTriangle,
    OrientationFlip,
    OutsideSupport,
)
from .geometry import corner_angles, rescaled_triangle_lengths

__all__ = [
    "Normalization",
    "PLMap",
    "layout",
    "edge_rotation",
    "triangle_derivatives",
    "wirtinger_coefficients",
    "evaluate",
    "holonomy_diagnostic",
]


@dataclass(frozen=True)
class Normalization:
    """Image of the origin vertex and absolute direction of the seed edge image."""

    image_of_origin: complex
    seed_direction: float

    @classmethod
    def identity(cls, sub):
        o = sub.positions[sub.origin]
        v0 = sub.positions[sub.seed_vertex]
        return cls(complex(o), cmath.phase(v0 - o))

    @classmethod
    def from_map(cls, cmap, sub):
        """``f(0)`` and ``arg(v0) + arg f'(v0/2)`` with 0 the lattice origin vertex."""
        o = complex(sub.positions[sub.origin])
        v0 = complex(sub.positions[sub.seed_vertex])
        return cls(complex(cmap.f(o)), cmath.phase(v0 - o) + cmap.arg_fprime((o + v0) / 2))


@dataclass(frozen=True, eq=False)
class PLMap:
    sub: object
    u: np.ndarray
    image_positions: np.ndarray
    triangle_maps: np.ndarray  # (F, 2): columns a (d/dz) and b (d/dzbar)
    edge_rotations: np.ndarray
    holonomy_defect: float


def _closure_defect(sub, angles, lengths, img):
    tris = sub.triangles
    worst = 0.0
    for j in range(3):
        j1, j2 = (j + 1) % 3, (j + 2) % 3
        p, q, r = img[tris[:, j]], img[tris[:, j1]], img[tris[:, j2]]
        redo = p + (lengths[:, j2] / lengths[:, j]) * (q - p) * np.exp(1j * angles[:, j])
        worst = max(worst, float(np.max(np.abs(redo - r))))
    return worst


def wirtinger_coefficients(src, img, triangles):
    """Coefficients ``(a, b)`` of ``z -> f(v0) + a (z - v0) + b conj(z - v0)`` per triangle."""
    v0, v1, v2 = (src[triangles[:, j]] for j in range(3))
    w0, w1, w2 = (img[triangles[:, j]] for j in range(3))
    d1, d2 = v1 - v0, v2 - v0
    e1, e2 = w1 - w0, w2 - w0
    den = np.conj(d1) * d2 - d1 * np.conj(d2)
    if np.any(np.abs(den) == 0):
        raise DegenerateTriangle("source triangle has zero area")
    a = (e2 * np.conj(d1) - e1 * np.conj(d2)) / den
    b = (e1 * d2 - e2 * d1) / den
    return a, b


def _edge_rotations(sub, img, norm):
    src = sub.positions
    e = sub.edges
    raw = np.angle((img[e[:, 1]] - img[e[:, 0]]) / (src[e[:, 1]] - src[e[:, 0]]))
    psi = np.full(sub.n_edges, np.nan)
    seed = sub.seed_edge
    o, v0 = src[sub.origin], src[sub.seed_vertex]
    target = norm.seed_direction - cmath.phase(v0 - o)
    psi[seed] = raw[seed] + 2 * math.pi * round((target - raw[seed]) / (2 * math.pi))

    edge_tris = sub.edge_triangles()
    queue = deque([seed])
    while queue:
        cur = queue.popleft()
        for f in edge_tris[cur]:
            if f < 0:
                continue
            for nb in sub.tri_edges[f]:
                if np.isnan(psi[nb]):
                    psi[nb] = raw[nb] + 2 * math.pi * round((psi[cur] - raw[nb]) / (2 * math.pi))
                    queue.append(nb)
    return psi


def _triangle_frames(sub, angles, seed_tri, seed_corner, seed_direction):
    """Image direction of the edge from corner 0 to corner 1 of every triangle.

    Propagated breadth-first across shared edges; only angles are added, so
    rounding errors accumulate additively.
    """
    tris = sub.triangles
    edge_tris = sub.edge_triangles()
    frames = np.full(sub.n_triangles, np.nan)

    def corner_direction(f, j):
        # direction of the image edge from corner j to corner j+1, given frames[f]
        d = frames[f]
        if j >= 1:
            d += math.pi - angles[f, 1]
        if j == 2:
            d += math.pi - angles[f, 2]
        return d

    # set the seed frame so that edge seed_corner -> seed_corner+1 points along seed_direction
    frames[seed_tri] = 0.0
    frames[seed_tri] = seed_direction - corner_direction(seed_tri, seed_corner)
    queue = deque([seed_tri])
    while queue:
        f = queue.popleft()
        for j in range(3):
            e = sub.tri_edges[f, j]
            for g in edge_tris[e]:
                if g < 0 or not np.isnan(frames[g]):
                    continue
                a = tris[f, j]
                # in g the shared edge runs b -> a; find the corner holding b
                jg = (list(tris[g]).index(a) + 2) % 3
                frames[g] = 0.0
                frames[g] = corner_direction(f, j) + math.pi - corner_direction(g, jg)
                queue.append(g)
    if np.isnan(frames).any():
        raise ValueError("triangle adjacency graph is not connected")
    return frames, corner_direction


def layout(sub, u, norm):
    """Lay out the image of ``sub`` under the PL map with scale factors ``u``."""
    u = np.asarray(u, dtype=float)
    try:
        angles = corner_angles(sub.positions, sub.triangles, u)
    except InfeasibleTriangle as exc:
        raise InfeasibleScaleField(str(exc)) from None
    lengths = rescaled_triangle_lengths(sub.positions, sub.triangles, u)
    tris = sub.triangles
    edge_tris = sub.edge_triangles()
    o, v0 = sub.origin, sub.seed_vertex

    seed_tri, seed_corner = None, None
    for f in edge_tris[sub.seed_edge]:
        if f < 0:
            continue
        j = list(tris[f]).index(o)
        if tris[f, (j + 1) % 3] == v0:
            seed_tri, seed_corner = f, j
    if seed_tri is None:
        raise ValueError("seed edge has no triangle on its left")
    frames, corner_direction = _triangle_frames(sub, angles, seed_tri, seed_corner, norm.seed_direction)

    # image vector of every edge, taken from the lowest-id incident triangle
    vec = np.zeros(sub.n_edges, dtype=complex)
    have = np.zeros(sub.n_edges, dtype=bool)
    for f in range(sub.n_triangles):
        for j in range(3):
            e = sub.tri_edges[f, j]
            if have[e]:
                continue
            a = tris[f, j]
            w = lengths[f, j] * cmath.exp(1j * corner_direction(f, j))
            vec[e] = w if a == sub.edges[e, 0] else -w
            have[e] = True

    nbrs = [[] for _ in range(sub.n_vertices)]
    for e, (a, b) in enumerate(sub.edges):
        nbrs[a].append((b, e, 1.0))
        nbrs[b].append((a, e, -1.0))
    img = np.full(sub.n_vertices, np.nan + 0j)
    img[o] = norm.image_of_origin
    queue = deque([o])
    while queue:
        a = queue.popleft()
        for b, e, sign in nbrs[a]:
            if np.isnan(img[b]):
                img[b] = img[a] + sign * vec[e]
                queue.append(b)

    w = img[tris]
    signed = (np.conj(w[:, 1] - w[:, 0]) * (w[:, 2] - w[:, 0])).imag
    if np.any(signed <= 0):
        raise OrientationFlip(f"{int(np.sum(signed <= 0))} image triangles are not counterclockwise")

    a, b = wirtinger_coefficients(sub.positions, img, tris)
    img.setflags(write=False)
    return PLMap(
        sub=sub,
        u=u.copy(),
        image_positions=img,
        triangle_maps=np.stack([a, b], axis=1),
        edge_rotations=_edge_rotations(sub, img, norm),
        holonomy_defect=_closure_defect(sub, angles, lengths, img),
    )


def edge_rotation(plmap, sub, edge):
    """Rotation angle (radians, unwrapped) carried by edge id ``edge``."""
    return float(plmap.edge_rotations[edge])


def triangle_derivatives(plmap, sub, triangle):
    """Wirtinger derivatives ``(d/dz, d/dzbar)`` of the map on triangle id ``triangle``."""
    tri = sub.triangles[[triangle]]
    a, b = wirtinger_coefficients(sub.positions, plmap.image_positions, tri)
    return complex(a[0]), complex(b[0])


def evaluate(plmap, sub, point):
    hit = sub.locate(point)
    if hit is None or hit[1].min() < -1e-12:
        raise OutsideSupport(f"point {point} is outside the support")
    f, bary = hit
    return complex(np.dot(bary, plmap.image_positions[sub.triangles[f]]))


def holonomy_diagnostic(plmap):
    """Largest distance between a frozen vertex and its re-derivation from any incident triangle."""
    sub = plmap.sub
    angles = corner_angles(sub.positions, sub.triangles, plmap.u)
    lengths = rescaled_triangle_lengths(sub.positions, sub.triangles, plmap.u)
    return _closure_defect(sub, angles, lengths, plmap.image_positions)
