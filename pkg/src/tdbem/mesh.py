"""Closed oriented triangle meshes.

Provides the :class:`TriangleMesh` container with its edge-orientation
conventions, an ASCII loader, analytic generators for the three test
geometries (geodesic sphere, structured torus, star-based pyramid),
loop-star connectivity matrices and barycentric refinement.

Orientation conventions (used consistently by every other module):

* edge m connects ``v_minus < v_plus`` (global vertex index order);
* ``c_plus`` is the adjacent triangle whose winding traverses the edge
  from ``v_minus`` to ``v_plus``; ``c_minus`` the other one;
* triangle windings are counter-clockwise seen from outside (outward
  normals, positive enclosed volume).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    DegenerateTriangle,
    NotClosed,
    NotConnected,
    NotOrientable,
    ParseError,
)

__all__ = [
    "TriangleMesh",
    "RefinementMaps",
    "LoopStarConnectivity",
    "make_mesh",
    "load_mesh",
    "save_mesh",
    "generate_sphere",
    "generate_torus",
    "generate_star_pyramid",
    "build_connectivity",
    "barycentric_refine",
    "refine_mesh_1to4",
]


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass
class TriangleMesh:
    """A validated closed, oriented triangulated surface.

    Attributes
    ----------
    vertices : (N_v, 3) float array
        Vertex coordinates in meters.
    triangles : (N_f, 3) int array
        Vertex index triples in (outward) counter-clockwise winding.
    edges : (N_e, 2) int array
        Per edge (v_minus, v_plus) with v_minus < v_plus.
    edge_to_faces : (N_e, 2) int array
        Per edge (c_plus, c_minus) adjacent triangle indices.
    diameter : float
        Maximum pairwise vertex distance D > 0.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_to_faces: np.ndarray
    diameter: float

    # lazily computed geometry caches
    _areas: np.ndarray | None = field(default=None, repr=False)
    _normals: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_faces

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    def face_corners(self, f=None):
        """Corner coordinates, shape (N_f, 3, 3) (or (3,3) for one face)."""
        if f is None:
            return self.vertices[self.triangles]
        return self.vertices[self.triangles[f]]

    @property
    def areas(self) -> np.ndarray:
        if self._areas is None:
            c = self.face_corners()
            cr = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
            self._areas = 0.5 * np.linalg.norm(cr, axis=1)
        return self._areas

    @property
    def normals(self) -> np.ndarray:
        """Unit outward normals, shape (N_f, 3)."""
        if self._normals is None:
            c = self.face_corners()
            cr = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
            self._normals = cr / np.linalg.norm(cr, axis=1)[:, None]
        return self._normals

    @property
    def edge_lengths(self) -> np.ndarray:
        e = self.vertices[self.edges]
        return np.linalg.norm(e[:, 1] - e[:, 0], axis=1)

    @property
    def mean_edge_length(self) -> float:
        return float(np.mean(self.edge_lengths))

    def edge_lookup(self) -> dict:
        """Map (v_min, v_max) -> edge index."""
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}


@dataclass
class RefinementMaps:
    """Parent maps for a barycentric refinement.

    ``vertex_of_vertex[v]``, ``vertex_of_edge[e]``, ``vertex_of_face[f]``
    give the refined-mesh vertex index of, respectively, primal vertex v,
    the midpoint of primal edge e, and the barycenter of primal face f.
    ``parent_face[ft]`` maps each refined face to its primal face.
    """

    vertex_of_vertex: np.ndarray
    vertex_of_edge: np.ndarray
    vertex_of_face: np.ndarray
    parent_face: np.ndarray


@dataclass
class LoopStarConnectivity:
    """Sparse signed incidence matrices.

    Lambda : (N_e, N_v), row m has +1 at v_plus(m), -1 at v_minus(m).
    Sigma  : (N_e, N_f), row m has +1 at c_plus(m), -1 at c_minus(m).
    """

    Lambda: sp.csr_matrix
    Sigma: sp.csr_matrix


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------

def _build_edges(triangles: np.ndarray, num_vertices: int):
    """Derive edges / edge_to_faces and check closedness + orientability."""
    edge_faces: dict[tuple[int, int], list] = {}
    for f, (a, b, c) in enumerate(triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            edge_faces.setdefault(key, []).append((f, u < v))
    for key, lst in edge_faces.items():
        if len(lst) != 2:
            raise NotClosed(
                f"edge {key} has {len(lst)} adjacent faces (expected 2)"
            )
    edges = []
    e2f = []
    for key in sorted(edge_faces):
        (f0, fwd0), (f1, fwd1) = edge_faces[key]
        if fwd0 == fwd1:
            raise NotOrientable(
                f"edge {key} traversed twice in the same direction"
            )
        # c_plus traverses v_minus -> v_plus, i.e. in increasing-index order
        edges.append(key)
        e2f.append((f0, f1) if fwd0 else (f1, f0))
    return (
        np.asarray(edges, dtype=np.int64),
        np.asarray(e2f, dtype=np.int64),
    )


def _check_connected(num_faces: int, edge_to_faces: np.ndarray):
    adj = sp.coo_matrix(
        (
            np.ones(len(edge_to_faces)),
            (edge_to_faces[:, 0], edge_to_faces[:, 1]),
        ),
        shape=(num_faces, num_faces),
    )
    ncomp, _ = sp.csgraph.connected_components(adj, directed=False)
    if ncomp != 1:
        raise NotConnected(f"surface has {ncomp} connected components")


def _signed_volume(vertices: np.ndarray, triangles: np.ndarray) -> float:
    c = vertices[triangles]
    return float(np.einsum("ij,ij->", c[:, 0], np.cross(c[:, 1], c[:, 2])) / 6.0)


def _diameter(vertices: np.ndarray) -> float:
    # exact pairwise maximum; chunked so the (N_v, N_v) block stays small
    best = 0.0
    n = vertices.shape[0]
    step = 512
    for i in range(0, n, step):
        blk = vertices[i : i + step]
        d2 = np.sum((blk[:, None, :] - vertices[None, :, :]) ** 2, axis=2)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def make_mesh(vertices, triangles) -> TriangleMesh:
    """Validate raw arrays and build the full :class:`TriangleMesh`.

    Raises NotClosed / NotOrientable / NotConnected / DegenerateTriangle /
    ParseError (bad indices) per the validation contract.
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ParseError("vertices must be an (N, 3) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise ParseError("triangles must be an (N, 3) array")
    n_v = vertices.shape[0]
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= n_v:
        raise ParseError("triangle vertex index out of range")
    if any(len(set(t)) != 3 for t in triangles.tolist()):
        raise DegenerateTriangle("triangle with repeated vertex")

    edges, e2f = _build_edges(triangles, n_v)
    _check_connected(triangles.shape[0], e2f)

    mesh = TriangleMesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_to_faces=e2f,
        diameter=_diameter(vertices),
    )
    scale = mesh.diameter
    if scale <= 0:
        raise DegenerateTriangle("zero-diameter mesh")
    if np.any(mesh.areas < 1e-14 * scale * scale):
        raise DegenerateTriangle("triangle with (near-)zero area")
    if _signed_volume(vertices, triangles) <= 0:
        raise NotOrientable("windings are consistent but inward-facing")
    return mesh


# ---------------------------------------------------------------------------
# ASCII I/O
# ---------------------------------------------------------------------------

def load_mesh(path) -> TriangleMesh:
    """Read the minimal ASCII format.

    Layout: optional ``OFF`` header line; a counts line ``N_v N_f`` (a third
    number is permitted and ignored); N_v coordinate lines; N_f index lines
    (either ``i j k`` or OFF-style ``3 i j k``).  ``#`` starts a comment.
    """
    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    lines = []
    for ln in raw.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            lines.append(ln)
    if not lines:
        raise ParseError("empty mesh file")
    if lines[0].upper() == "OFF":
        lines = lines[1:]
    try:
        counts = [int(tok) for tok in lines[0].split()]
        n_v, n_f = counts[0], counts[1]
        verts = np.array(
            [[float(t) for t in ln.split()] for ln in lines[1 : 1 + n_v]]
        )
        tris = []
        for ln in lines[1 + n_v : 1 + n_v + n_f]:
            toks = [int(t) for t in ln.split()]
            if len(toks) == 4 and toks[0] == 3:
                toks = toks[1:]
            if len(toks) != 3:
                raise ParseError(f"bad face line: {ln!r}")
            tris.append(toks)
        if len(tris) != n_f or verts.shape != (n_v, 3):
            raise ParseError("truncated mesh file")
    except (ValueError, IndexError) as exc:
        raise ParseError(f"cannot parse mesh file: {exc}") from exc
    return make_mesh(verts, np.array(tris))


def save_mesh(mesh: TriangleMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_faces}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"{t[0]} {t[1]} {t[2]}\n")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

_ICO_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array(
    [
        [-1, _ICO_PHI, 0], [1, _ICO_PHI, 0], [-1, -_ICO_PHI, 0],
        [1, -_ICO_PHI, 0], [0, -1, _ICO_PHI], [0, 1, _ICO_PHI],
        [0, -1, -_ICO_PHI], [0, 1, -_ICO_PHI], [_ICO_PHI, 0, -1],
        [_ICO_PHI, 0, 1], [-_ICO_PHI, 0, -1], [-_ICO_PHI, 0, 1],
    ],
    dtype=np.float64,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def generate_sphere(radius: float, refinement: int) -> TriangleMesh:
    """Geodesic icosphere of frequency ``refinement`` (>= 1).

    Every icosahedron face is split into ``refinement**2`` lattice triangles
    and all points are projected to the sphere, giving
    N_v = 10 nu^2 + 2, N_e = 30 nu^2, N_f = 20 nu^2.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    nu = int(refinement)
    if nu < 1:
        raise ValueError("refinement must be >= 1")

    # global ids: 12 corners, then nu-1 points per icosahedron edge,
    # then interior lattice points per face
    ico_edges = {}
    for a, b, c in _ICO_FACES:
        for u, v in ((a, b), (b, c), (c, a)):
            ico_edges.setdefault((min(u, v), max(u, v)), None)
    ico_edges = {k: i for i, k in enumerate(sorted(ico_edges))}

    n_corner = 12
    n_edge_pts = len(ico_edges) * (nu - 1)
    verts = [None] * (n_corner + n_edge_pts)
    for i in range(12):
        verts[i] = _ICO_VERTS[i]

    def edge_point_id(u, v, t):
        """Point at parameter t/nu along directed icosahedron edge u->v."""
        if u < v:
            e, s = ico_edges[(u, v)], t
        else:
            e, s = ico_edges[(v, u)], nu - t
        return n_corner + e * (nu - 1) + (s - 1)

    tris = []
    next_id = n_corner + n_edge_pts
    for A, B, C in _ICO_FACES:
        pa, pb, pc = _ICO_VERTS[A], _ICO_VERTS[B], _ICO_VERTS[C]
        ids = {}
        for i in range(nu + 1):
            for j in range(nu + 1 - i):
                if i == 0 and j == 0:
                    g = A
                elif i == nu and j == 0:
                    g = B
                elif i == 0 and j == nu:
                    g = C
                elif j == 0:
                    g = edge_point_id(A, B, i)
                elif i == 0:
                    g = edge_point_id(A, C, j)
                elif i + j == nu:
                    g = edge_point_id(B, C, j)
                else:
                    g = next_id
                    next_id += 1
                    verts.append(None)
                ids[(i, j)] = g
                if verts[g] is None:
                    verts[g] = pa + (pb - pa) * (i / nu) + (pc - pa) * (j / nu)
        for i in range(nu):
            for j in range(nu - i):
                tris.append([ids[(i, j)], ids[(i + 1, j)], ids[(i, j + 1)]])
                if i + j < nu - 1:
                    tris.append(
                        [ids[(i + 1, j)], ids[(i + 1, j + 1)], ids[(i, j + 1)]]
                    )

    verts = np.asarray(verts, dtype=np.float64)
    verts *= radius / np.linalg.norm(verts, axis=1)[:, None]
    return make_mesh(verts, np.asarray(tris, dtype=np.int64))


def generate_torus(
    r_major: float, r_minor: float, n_u: int, n_v: int
) -> TriangleMesh:
    """Structured torus mesh: 2 n_u n_v triangles, genus 1."""
    if not (r_major > r_minor > 0):
        raise ValueError("need R_major > r_minor > 0")
    if n_u < 3 or n_v < 3:
        raise ValueError("need n_u, n_v >= 3")
    uu = 2 * np.pi * np.arange(n_u) / n_u
    vv = 2 * np.pi * np.arange(n_v) / n_v
    verts = np.empty((n_u * n_v, 3))
    for i, u in enumerate(uu):
        for j, v in enumerate(vv):
            w = r_major + r_minor * np.cos(v)
            verts[i * n_v + j] = (
                w * np.cos(u), w * np.sin(u), r_minor * np.sin(v)
            )
    tris = []
    for i in range(n_u):
        for j in range(n_v):
            p00 = i * n_v + j
            p10 = ((i + 1) % n_u) * n_v + j
            p01 = i * n_v + (j + 1) % n_v
            p11 = ((i + 1) % n_u) * n_v + (j + 1) % n_v
            tris.append([p00, p10, p11])
            tris.append([p00, p11, p01])
    return make_mesh(verts, np.asarray(tris, dtype=np.int64))


def generate_star_pyramid(
    height: float,
    r_outer: float,
    r_inner: float,
    n_points: int,
    refinement: int = 0,
) -> TriangleMesh:
    """Closed pyramid over a 2 n_points star polygon base.

    Base vertices alternate between radius r_outer and r_inner in the z = 0
    plane, the apex sits at (0, 0, height), and the base is fanned from its
    centroid.  ``refinement`` rounds of uniform 1-to-4 splitting follow;
    midpoints are kept in place so the star's sharp creases survive.
    """
    if not (r_outer > r_inner > 0):
        raise ValueError("need r_outer > r_inner > 0")
    if n_points < 3:
        raise ValueError("need n_points >= 3")
    if height <= 0:
        raise ValueError("need height > 0")
    n_base = 2 * n_points
    ang = np.pi * np.arange(n_base) / n_points
    rad = np.where(np.arange(n_base) % 2 == 0, r_outer, r_inner)
    verts = [np.array([0.0, 0.0, height]), np.array([0.0, 0.0, 0.0])]
    for a, r in zip(ang, rad):
        verts.append(np.array([r * np.cos(a), r * np.sin(a), 0.0]))
    apex, cen = 0, 1
    tris = []
    for k in range(n_base):
        b0 = 2 + k
        b1 = 2 + (k + 1) % n_base
        tris.append([apex, b0, b1])   # flank, outward
        tris.append([cen, b1, b0])    # base, outward (-z)
    mesh = make_mesh(np.asarray(verts), np.asarray(tris, dtype=np.int64))
    for _ in range(int(refinement)):
        mesh = refine_mesh_1to4(mesh)
    return mesh


def refine_mesh_1to4(mesh: TriangleMesh) -> TriangleMesh:
    """Uniform 1-to-4 refinement by edge midpoints (no reprojection)."""
    lut = mesh.edge_lookup()
    n_v = mesh.num_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    verts = np.vstack([mesh.vertices, mids])

    def mid(u, v):
        return n_v + lut[(min(u, v), max(u, v))]

    tris = []
    for a, b, c in mesh.triangles:
        mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend(
            [[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]]
        )
    return make_mesh(verts, np.asarray(tris, dtype=np.int64))


# ---------------------------------------------------------------------------
# connectivity and barycentric refinement
# ---------------------------------------------------------------------------

def build_connectivity(mesh: TriangleMesh) -> LoopStarConnectivity:
    """Signed node-edge (Lambda) and face-edge (Sigma) incidence matrices."""
    n_e = mesh.num_edges
    rows = np.repeat(np.arange(n_e), 2)
    lam = sp.coo_matrix(
        (
            np.tile([-1, 1], n_e),
            (rows, mesh.edges.ravel()),
        ),
        shape=(n_e, mesh.num_vertices),
        dtype=np.float64,
    ).tocsr()
    sig = sp.coo_matrix(
        (
            np.tile([1, -1], n_e),
            (rows, mesh.edge_to_faces.ravel()),
        ),
        shape=(n_e, mesh.num_faces),
        dtype=np.float64,
    ).tocsr()
    return LoopStarConnectivity(Lambda=lam, Sigma=sig)


def barycentric_refine(mesh: TriangleMesh):
    """Split every triangle into 6 through edge midpoints and barycenter.

    Returns ``(refined_mesh, maps)`` with :class:`RefinementMaps`.
    """
    n_v, n_e, n_f = mesh.num_vertices, mesh.num_edges, mesh.num_faces
    lut = mesh.edge_lookup()
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    bary = mesh.vertices[mesh.triangles].mean(axis=1)
    verts = np.vstack([mesh.vertices, mids, bary])

    vov = np.arange(n_v)
    voe = n_v + np.arange(n_e)
    vof = n_v + n_e + np.arange(n_f)

    tris = np.empty((6 * n_f, 3), dtype=np.int64)
    parent = np.repeat(np.arange(n_f), 6)
    for f, (a, b, c) in enumerate(mesh.triangles):
        g = vof[f]
        mab = voe[lut[(min(a, b), max(a, b))]]
        mbc = voe[lut[(min(b, c), max(b, c))]]
        mca = voe[lut[(min(c, a), max(c, a))]]
        tris[6 * f : 6 * f + 6] = [
            [a, mab, g], [mab, b, g], [b, mbc, g],
            [mbc, c, g], [c, mca, g], [mca, a, g],
        ]
    refined = make_mesh(verts, tris)
    maps = RefinementMaps(
        vertex_of_vertex=vov,
        vertex_of_edge=voe,
        vertex_of_face=vof,
        parent_face=parent,
    )
    return refined, maps
