"""Triangular lattices of congruent triangles and disc-shaped patches of them.

A lattice is generated by the translations ``t1 = eps*sin(beta)`` and
``t2 = eps*sin(gamma)*exp(i*alpha)``.  Every lattice cell ``(m, n)`` carries
two counterclockwise triangles::

    up   (k=0): (m, n), (m+1, n),   (m, n+1)
    down (k=1): (m+1, n), (m+1, n+1), (m, n+1)

The up triangle has angle alpha at ``(m, n)``, gamma at ``(m+1, n)`` and beta
at ``(m, n+1)``.  Triangles are addressed by the key ``(m, n, k)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import RegionTooSmall, TopologyFailure

__all__ = [
    "LatticeSpec",
    "Disc",
    "Polygon",
    "Subcomplex",
    "TopologyReport",
    "build_lattice_patch",
    "classify_vertices",
    "validate_disc_topology",
    "STAR_SLOTS",
]

# Triangle keys around vertex (m, n), counterclockwise, as offsets (dm, dn, k).
STAR_SLOTS = ((0, 0, 0), (-1, 0, 1), (-1, 0, 0), (-1, -1, 1), (0, -1, 0), (0, -1, 1))

_CORNERS = (
    ((0, 0), (1, 0), (0, 1)),  # up
    ((1, 0), (1, 1), (0, 1)),  # down
)


@dataclass(frozen=True)
class LatticeSpec:
    """Angles (radians), scale and origin of a congruent-triangle lattice."""

    alpha: float
    beta: float
    gamma: float
    epsilon: float
    origin_offset: complex = 0j

    def __post_init__(self):
        angles = (self.alpha, self.beta, self.gamma)
        if not all(0.0 < a < math.pi for a in angles):
            raise ValueError(f"lattice angles must lie in (0, pi), got {angles}")
        if abs(sum(angles) - math.pi) > 1e-12:
            raise ValueError(f"lattice angles must sum to pi, got sum {sum(angles)!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "origin_offset", complex(self.origin_offset))

    @classmethod
    def from_angles(cls, alpha, beta, epsilon, origin_offset=0j):
        """Build a spec from two angles; the third closes the triangle."""
        return cls(alpha, beta, math.pi - alpha - beta, epsilon, origin_offset)

    @classmethod
    def equilateral(cls, epsilon, origin_offset=0j):
        t = math.pi / 3
        return cls(t, t, math.pi - 2 * t, epsilon, origin_offset)

    @property
    def angles(self):
        return (self.alpha, self.beta, self.gamma)

    @property
    def strictly_acute(self):
        return all(a < math.pi / 2 for a in self.angles)

    @property
    def t1(self) -> complex:
        return complex(self.epsilon * math.sin(self.beta), 0.0)

    @property
    def t2(self) -> complex:
        return self.epsilon * math.sin(self.gamma) * complex(math.cos(self.alpha), math.sin(self.alpha))

    def with_epsilon(self, epsilon):
        return LatticeSpec(self.alpha, self.beta, self.gamma, epsilon, self.origin_offset)

    def position(self, m, n):
        """Plane position of lattice vertex ``(m, n)`` (scalars or arrays)."""
        return self.origin_offset + np.asarray(m) * self.t1 + np.asarray(n) * self.t2

    def lattice_coords(self, z):
        """Real lattice coordinates ``(s, t)`` with ``z = origin + s*t1 + t*t2``."""
        w = np.asarray(z, dtype=complex) - self.origin_offset
        t2 = self.t2
        t = w.imag / t2.imag
        s = (w.real - t * t2.real) / self.t1.real
        return s, t


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    convex = True

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    def contains(self, z, tol=1e-12):
        z = np.asarray(z, dtype=complex)
        return np.abs(z - self.center) <= self.radius * (1.0 + tol)

    def contains_interior(self, z):
        return bool(abs(complex(z) - self.center) < self.radius)

    def bbox(self):
        c, r = self.center, self.radius
        return c.real - r, c.imag - r, c.real + r, c.imag + r

    def contains_triangles(self, pts):
        # convex region: vertex containment implies triangle containment
        return np.all(self.contains(pts), axis=-1)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given by counterclockwise vertices."""

    vertices: tuple

    def __post_init__(self):
        verts = tuple(complex(v) for v in self.vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least three vertices")
        object.__setattr__(self, "vertices", verts)
        shape = self._shape
        if not shape.is_valid or shape.area <= 0:
            raise ValueError("polygon must be simple with nonempty interior")
        if not shapely.is_ccw(shape.exterior):
            raise ValueError("polygon vertices must be counterclockwise")

    @property
    def _shape(self):
        return shapely.Polygon([(v.real, v.imag) for v in self.vertices])

    @property
    def convex(self):
        shape = self._shape
        return abs(shape.convex_hull.area - shape.area) <= 1e-14 * shape.area

    def contains(self, z, tol=1e-12):
        z = np.asarray(z, dtype=complex)
        shape = shapely.buffer(self._shape, tol * math.sqrt(self._shape.area))
        return shapely.contains_xy(shape, z.real, z.imag)

    def contains_interior(self, z):
        z = complex(z)
        return bool(shapely.contains_xy(self._shape, z.real, z.imag))

    def bbox(self):
        return tuple(self._shape.bounds)

    def contains_triangles(self, pts):
        pts = np.asarray(pts, dtype=complex)
        ok = np.all(self.contains(pts), axis=-1)
        if self.convex or not ok.any():
            return ok
        shape = shapely.buffer(self._shape, 1e-12 * math.sqrt(self._shape.area))
        idx = np.nonzero(ok)[0]
        ring = np.stack([pts[idx].real, pts[idx].imag], axis=-1)
        tris = shapely.polygons(ring)
        ok[idx] = shapely.covers(shape, tris)
        return ok


# ---------------------------------------------------------------- subcomplex


def _triangle_vertex_coords(key):
    m, n, k = key
    return tuple((m + dm, n + dn) for dm, dn in _CORNERS[k])


def _edge_neighbors(key):
    """Keys of the three lattice triangles sharing an edge with ``key``."""
    m, n, k = key
    if k == 0:
        return ((m, n, 1), (m - 1, n, 1), (m, n - 1, 1))
    return ((m, n, 0), (m + 1, n, 0), (m, n + 1, 0))


@dataclass(frozen=True, eq=False)
class Subcomplex:
    """Finite union of lattice triangles.

    ``triangles`` holds counterclockwise vertex triples; ``tri_edges[f, j]`` is
    the id of the edge opposite corner ``j + 2`` (i.e. the edge from corner
    ``j`` to corner ``j + 1``).  ``origin`` is the index of lattice vertex
    ``(0, 0)`` (``None`` if absent) and ``seed_edge`` the id of the edge from
    ``origin`` to ``(1, 0)``.
    """

    spec: LatticeSpec
    keys: np.ndarray
    coords: np.ndarray
    positions: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    origin: int | None
    seed_edge: int | None
    vertex_index: dict = field(repr=False)
    key_index: dict = field(repr=False)

    @classmethod
    def from_keys(cls, spec, keys):
        keys = sorted(set(tuple(int(x) for x in k) for k in keys), key=lambda k: (k[1], k[0], k[2]))
        if not keys:
            raise RegionTooSmall("empty triangle set")
        coords = sorted({c for k in keys for c in _triangle_vertex_coords(k)}, key=lambda c: (c[1], c[0]))
        vindex = {c: i for i, c in enumerate(coords)}
        tris = np.array([[vindex[c] for c in _triangle_vertex_coords(k)] for k in keys], dtype=np.int64)
        coords_arr = np.array(coords, dtype=np.int64)
        positions = spec.position(coords_arr[:, 0], coords_arr[:, 1]).astype(complex)

        half = np.stack([tris, np.roll(tris, -1, axis=1)], axis=-1).reshape(-1, 2)
        undirected = np.sort(half, axis=1)
        edges, inverse = np.unique(undirected, axis=0, return_inverse=True)
        tri_edges = inverse.reshape(-1, 3)

        counts = np.bincount(tris.ravel(), minlength=len(coords))
        interior = np.nonzero(counts == 6)[0]
        boundary = np.nonzero(counts != 6)[0]

        origin = vindex.get((0, 0))
        seed_edge = None
        if origin is not None:
            other = vindex.get((1, 0))
            if other is not None:
                pair = np.array(sorted((origin, other)))
                hit = np.nonzero((edges == pair).all(axis=1))[0]
                if len(hit):
                    seed_edge = int(hit[0])
            if seed_edge is None:
                # first incident edge in counterclockwise order around the origin
                for dm, dn, k in STAR_SLOTS:
                    key = (dm, dn, k)
                    if key in set(keys):
                        f = keys.index(key)
                        j = list(tris[f]).index(origin)
                        seed_edge = int(tri_edges[f, j])
                        break

        for arr in (coords_arr, positions, tris, edges, tri_edges, interior, boundary):
            arr.setflags(write=False)
        keys_arr = np.array(keys, dtype=np.int64)
        keys_arr.setflags(write=False)
        return cls(
            spec=spec,
            keys=keys_arr,
            coords=coords_arr,
            positions=positions,
            triangles=tris,
            edges=edges,
            tri_edges=tri_edges,
            interior=interior,
            boundary=boundary,
            origin=origin,
            seed_edge=seed_edge,
            vertex_index=vindex,
            key_index={k: i for i, k in enumerate(keys)},
        )

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_triangles

    @property
    def seed_vertex(self):
        """The far end ``v0`` of the seed edge ``[0, v0]``."""
        a, b = self.edges[self.seed_edge]
        return int(b if a == self.origin else a)

    @property
    def diameter(self):
        p = self.positions
        hull = p[np.unique(self.edges[self.edge_triangle_counts() == 1])]
        if len(hull) == 0:
            hull = p
        return float(np.max(np.abs(hull[:, None] - hull[None, :])))

    def edge_triangle_counts(self):
        return np.bincount(self.tri_edges.ravel(), minlength=self.n_edges)

    def edge_triangles(self):
        """``(E, 2)`` triangle ids on each side of every edge (``-1`` if none)."""
        out = np.full((self.n_edges, 2), -1, dtype=np.int64)
        for f, es in enumerate(self.tri_edges):
            for e in es:
                out[e, 0 if out[e, 0] < 0 else 1] = f
        return out

    def incident_triangles(self, v):
        return np.nonzero((self.triangles == v).any(axis=1))[0]

    def star(self, v):
        """Triangles around ``v`` rotated so ``v`` comes first, in ccw order.

        Returns an ``(k, 3)`` array of vertex triples ``(v, v_j, v_{j+1})``.
        """
        m, n = self.coords[v]
        rows = []
        for dm, dn, k in STAR_SLOTS:
            f = self.key_index.get((m + dm, n + dn, k))
            if f is None:
                continue
            tri = list(self.triangles[f])
            j = tri.index(v)
            rows.append(tri[j:] + tri[:j])
        return np.array(rows, dtype=np.int64).reshape(-1, 3)

    def locate(self, point, tol=1e-12):
        """Index of a triangle containing ``point`` and its barycentric coords."""
        s, t = self.spec.lattice_coords(point)
        s, t = float(s), float(t)
        m0, n0 = math.floor(s), math.floor(t)
        best = None
        for dm in (0, -1, 1):
            for dn in (0, -1, 1):
                for k in (0, 1):
                    f = self.key_index.get((m0 + dm, n0 + dn, k))
                    if f is None:
                        continue
                    bary = _barycentric(self.positions[self.triangles[f]], complex(point))
                    if bary.min() >= -tol:
                        return f, bary
                    if best is None or bary.min() > best[1].min():
                        best = (f, bary)
        return None


def _barycentric(tri_pts, z):
    a, b, c = tri_pts
    d = ((b - a).conjugate() * (c - a)).imag
    lb = ((z - a).conjugate() * (c - a)).imag / d
    lc = ((b - a).conjugate() * (z - a)).imag / d
    return np.array([1.0 - lb - lc, lb, lc])


# ---------------------------------------------------------------- topology


@dataclass
class TopologyReport:
    euler_characteristic: int
    connected: bool
    nonmanifold_edges: list
    pinch_vertices: list
    passed: bool


def classify_vertices(sub):
    """Split vertex indices into (interior, boundary): interior means 6 incident triangles."""
    counts = np.bincount(sub.triangles.ravel(), minlength=sub.n_vertices)
    return set(np.nonzero(counts == 6)[0].tolist()), set(np.nonzero(counts != 6)[0].tolist())


def _link_is_single_fan(tris_at_v, v):
    succ = {}
    for tri in tris_at_v:
        tri = list(tri)
        j = tri.index(v)
        a, b = tri[(j + 1) % 3], tri[(j + 2) % 3]
        if a in succ:
            return False
        succ[a] = b
    if len(set(succ.values())) != len(succ):
        return False
    # a single path or a single cycle: walk from a start with no predecessor
    preds = set(succ.values())
    starts = [a for a in succ if a not in preds]
    if len(starts) > 1:
        return False
    start = starts[0] if starts else next(iter(succ))
    seen, cur = 0, start
    while cur in succ and seen <= len(succ):
        cur = succ[cur]
        seen += 1
        if cur == start:
            break
    return seen == len(succ)


def validate_disc_topology(sub):
    """Diagnose whether ``sub`` is a closed topological disc."""
    counts = sub.edge_triangle_counts()
    nonmanifold = np.nonzero(counts > 2)[0].tolist()

    F = sub.n_triangles
    ii, jj = [], []
    edge_tris = [[] for _ in range(sub.n_edges)]
    for f in range(F):
        for e in sub.tri_edges[f]:
            edge_tris[e].append(f)
    for ts in edge_tris:
        for a in ts:
            for b in ts:
                if a != b:
                    ii.append(a)
                    jj.append(b)
    adj = coo_matrix((np.ones(len(ii)), (ii, jj)), shape=(F, F))
    ncomp, _ = connected_components(adj, directed=False)

    by_vertex = [[] for _ in range(sub.n_vertices)]
    for tri in sub.triangles:
        for v in tri:
            by_vertex[v].append(tri)
    pinches = [v for v in range(sub.n_vertices) if not _link_is_single_fan(by_vertex[v], v)]

    chi = int(sub.euler_characteristic)
    passed = chi == 1 and ncomp == 1 and not nonmanifold and not pinches
    return TopologyReport(chi, ncomp == 1, nonmanifold, pinches, passed)


# ---------------------------------------------------------------- patch builder


def _component(keys, start):
    seen = {start}
    queue = deque([start])
    while queue:
        key = queue.popleft()
        for nb in _edge_neighbors(key):
            if nb in keys and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return seen


def _circular_runs(flags):
    """Maximal runs of True in a circular boolean sequence, as index lists."""
    n = len(flags)
    if all(flags):
        return [list(range(n))]
    start = next(i for i in range(n) if not flags[i])
    runs, cur = [], []
    for step in range(1, n + 1):
        i = (start + step) % n
        if flags[i]:
            cur.append(i)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def _pinch_removals(keys):
    removals = set()
    verts = sorted({c for k in keys for c in _triangle_vertex_coords(k)}, key=lambda c: (c[1], c[0]))
    for m, n in verts:
        slots = [(m + dm, n + dn, k) for dm, dn, k in STAR_SLOTS]
        runs = _circular_runs([s in keys for s in slots])
        if len(runs) <= 1:
            continue
        keep = max(runs, key=len)
        for run in runs:
            if run is not keep:
                removals.update(slots[i] for i in run)
    return removals


def build_lattice_patch(spec, region):
    """Largest disc-topology patch of lattice triangles inside ``region`` around vertex (0, 0)."""
    if not region.contains_interior(spec.origin_offset):
        raise RegionTooSmall("region does not contain the lattice origin in its interior")

    x0, y0, x1, y1 = region.bbox()
    corners = np.array([complex(x0, y0), complex(x1, y0), complex(x0, y1), complex(x1, y1)])
    s, t = spec.lattice_coords(corners)
    ms = np.arange(math.floor(s.min()) - 1, math.ceil(s.max()) + 2)
    ns = np.arange(math.floor(t.min()) - 1, math.ceil(t.max()) + 2)
    M, N = np.meshgrid(ms, ns, indexing="xy")
    M, N = M.ravel(), N.ravel()

    keys = set()
    for k, corners_k in enumerate(_CORNERS):
        pts = np.stack([spec.position(M + dm, N + dn) for dm, dn in corners_k], axis=-1)
        inside = region.contains_triangles(pts)
        keys.update((int(m), int(n), k) for m, n in zip(M[inside], N[inside]))

    star0 = [tuple(s) for s in STAR_SLOTS]
    if not all(k in keys for k in star0):
        raise RegionTooSmall("no complete star of the origin fits inside the region")

    comp = _component(keys, star0[0])
    for _ in range(len(comp) + 1):
        removals = _pinch_removals(comp)
        if not removals:
            break
        comp -= removals
        if not all(k in comp for k in star0):
            raise RegionTooSmall("origin is not an interior vertex after pruning")
        comp = _component(comp, star0[0])
    else:
        raise TopologyFailure("pruning did not reach disc topology")

    sub = Subcomplex.from_keys(spec, comp)
    report = validate_disc_topology(sub)
    if not report.passed:
        raise TopologyFailure(f"patch is not a disc: {report}")
    return sub
