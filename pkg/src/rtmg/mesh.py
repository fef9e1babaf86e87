"""Structured triangulations of the unit square and the L-shaped domain.

Level 0 is a grid of unit cells, each cut along the diagonal running from its
lower-left to its upper-right corner. Finer levels come from red refinement
(each triangle split into four through its edge midpoints), which keeps the
same diagonal pattern and halves the grid spacing.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ConfigurationError

DOMAINS = ("unit_square", "l_shape")

_ALIASES = {
    "unit_square": "unit_square",
    "square": "unit_square",
    "l_shape": "l_shape",
    "lshape": "l_shape",
    "l-shape": "l_shape",
}


def canonical_domain(tag):
    try:
        return _ALIASES[str(tag).lower()]
    except KeyError:
        raise ConfigurationError(f"unknown domain tag {tag!r}; expected one of {DOMAINS}") from None


@dataclass(eq=False)
class TriangleMesh:
    """Immutable-by-convention triangle mesh with edge connectivity.

    ``edge_of_triangle[t, j]`` is the global edge opposite local vertex ``j``
    and ``edge_sign[t, j]`` is +1 when that edge's global normal points out of
    triangle ``t``. Global normals rotate the edge direction (lower vertex
    index towards higher) by +90 degrees.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    level: int = 0
    h_grid: float = 1.0
    edges: np.ndarray = field(init=False)
    edge_of_triangle: np.ndarray = field(init=False)
    edge_sign: np.ndarray = field(init=False)
    edge_triangles: np.ndarray = field(init=False)
    boundary_edge_flags: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        tri = self.triangles
        # local edge j is opposite local vertex j: (v[j+1], v[j+2])
        a = tri[:, [1, 2, 0]]
        b = tri[:, [2, 0, 1]]
        lo = np.minimum(a, b).ravel()
        hi = np.maximum(a, b).ravel()
        pairs = np.column_stack([lo, hi])
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        self.edges = edges
        self.edge_of_triangle = inverse.reshape(-1, 3)
        self.edge_sign = np.where(a > b, 1, -1).astype(np.int64)

        ne = len(edges)
        counts = np.bincount(inverse, minlength=ne)
        if counts.max() > 2:
            raise ConfigurationError("non-manifold triangulation: an edge has more than 2 triangles")
        # edge_triangles[e] = (triangle where n_e is outward, other or -1)
        et = np.full((ne, 2), -1, dtype=np.int64)
        tids = np.repeat(np.arange(len(tri)), 3)
        signs = self.edge_sign.ravel()
        plus = signs > 0
        et[inverse[plus], 0] = tids[plus]
        et[inverse[~plus], 1] = tids[~plus]
        self.edge_triangles = et
        self.boundary_edge_flags = counts == 1
        for arr in (self.vertices, self.triangles, self.edges, self.edge_of_triangle,
                    self.edge_sign, self.edge_triangles, self.boundary_edge_flags):
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self):
        return self.signed_areas()

    @property
    def edge_lengths(self):
        p = self.vertices[self.edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @property
    def edge_normals(self):
        p = self.vertices[self.edges]
        d = p[:, 1] - p[:, 0]
        d = d / np.linalg.norm(d, axis=1)[:, None]
        return np.column_stack([-d[:, 1], d[:, 0]])

    @property
    def diameters(self):
        p = self.vertices[self.triangles]
        lens = np.stack([np.linalg.norm(p[:, i] - p[:, j], axis=1)
                         for i, j in ((0, 1), (1, 2), (2, 0))], axis=1)
        return lens.max(axis=1)

    def boundary_edges(self):
        return np.flatnonzero(self.boundary_edge_flags)

    def dump(self, path):
        """Write the plain-text ``v``/``t``/``e`` listing used by ``--dump-mesh``."""
        with open(path, "w") as fh:
            for x, y in self.vertices:
                fh.write(f"v {x:.17g} {y:.17g}\n")
            for i, j, k in self.triangles:
                fh.write(f"t {i} {j} {k}\n")
            for (i, j), bnd in zip(self.edges, self.boundary_edge_flags):
                fh.write(f"e {i} {j} {int(bnd)}\n")


def _split_cells(vertices, cells):
    """Cut each quadrilateral (ll, lr, ur, ul) along ll-ur."""
    tris = []
    for ll, lr, ur, ul in cells:
        tris.append((ll, lr, ur))
        tris.append((ll, ur, ul))
    return np.array(vertices, dtype=float), np.array(tris, dtype=np.int64)


def build_initial_mesh(domain_tag) -> TriangleMesh:
    domain = canonical_domain(domain_tag)
    if domain == "unit_square":
        verts = [(0, 0), (1, 0), (1, 1), (0, 1)]
        cells = [(0, 1, 2, 3)]
    else:
        verts = [(-1, -1), (0, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
        cells = [(0, 1, 3, 2), (2, 3, 6, 5), (3, 4, 7, 6)]
    v, t = _split_cells(verts, cells)
    return TriangleMesh(v, t, level=0, h_grid=1.0)


def refine_uniform(mesh: TriangleMesh) -> TriangleMesh:
    """Red refinement. Children of triangle ``t`` are ``4t, ..., 4t+3``; child
    ``j < 3`` keeps parent vertex ``j`` and child 3 is the middle triangle."""
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    t = mesh.triangles
    m = mesh.edge_of_triangle + nv  # m[:, j] is the midpoint opposite vertex j
    children = np.stack([
        np.column_stack([t[:, 0], m[:, 2], m[:, 1]]),
        np.column_stack([m[:, 2], t[:, 1], m[:, 0]]),
        np.column_stack([m[:, 1], m[:, 0], t[:, 2]]),
        np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
    ], axis=1).reshape(-1, 3)
    return TriangleMesh(vertices, children, level=mesh.level + 1, h_grid=mesh.h_grid / 2.0)


@dataclass(eq=False)
class MeshHierarchy:
    levels: List[TriangleMesh]
    child_map: List[np.ndarray]  # child_map[k] maps level-k triangles to their 4 children
    domain_tag: str

    @property
    def max_level(self):
        return len(self.levels) - 1

    def __getitem__(self, k):
        return self.levels[k]

    def __len__(self):
        return len(self.levels)

    def parent(self, k):
        """Parent (level k-1) triangle of each level-k triangle."""
        return np.arange(self.levels[k].n_triangles) // 4


def build_hierarchy(domain_tag, max_level: int) -> MeshHierarchy:
    if int(max_level) != max_level or max_level < 0:
        raise ConfigurationError(f"max_level must be a nonnegative integer, got {max_level!r}")
    domain = canonical_domain(domain_tag)
    levels = [build_initial_mesh(domain)]
    child_map = []
    for _ in range(int(max_level)):
        coarse = levels[-1]
        levels.append(refine_uniform(coarse))
        child_map.append(np.arange(4 * coarse.n_triangles).reshape(-1, 4))
    return MeshHierarchy(levels, child_map, domain)
