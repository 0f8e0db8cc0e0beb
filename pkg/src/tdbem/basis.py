"""Div-conforming bases: RWG on the primal mesh, Buffa-Christiansen (BC)
duals on the barycentric refinement, and the mixed Gram matrix between
rotated RWG and BC.

Both bases are handled through one representation: coefficients with
respect to the RWG functions of whichever mesh they live on.  The BC
functions are fixed linear combinations of *refined-mesh* RWG functions
(matrix ``C``); the primal RWG functions are also exactly representable
on the refinement (matrix ``R``), which reduces every mixed integral to
a sparse refined-mesh Gram sandwich evaluated with exact polynomial
quadrature.

BC construction (per primal edge e = (v-, v+) with faces (c+, c-)): a
unit of flux crosses from the dual cell of v+ into the dual cell of v-
through the two rim edges at the midpoint of e (one half each), and at
each endpoint the current fans around the vertex through the 2N spoke
edges with linearly decreasing weights +-(1/2 - k/(2N)).  The resulting
divergence is uniform per barycentric sector around each endpoint —
div g_e = sigma_{v+} - sigma_{v-} with vertex-only charge profiles
sigma_v, mirroring the Lambda sign structure — which is exactly the
structural property the quasi-Helmholtz projector identity
p^Lambda G^{-1} P^Sigma = 0  rests on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import SingularGram
from .mesh import RefinementMaps, TriangleMesh, barycentric_refine

__all__ = [
    "RwgBasis",
    "BcBasis",
    "MixedGram",
    "build_rwg",
    "build_bc",
    "assemble_mixed_gram",
    "rotated_gram",
    "face_divergence",
    "total_divergence",
]


# ---------------------------------------------------------------------------
# RWG
# ---------------------------------------------------------------------------

@dataclass
class RwgBasis:
    """One RWG function per mesh edge, sign +1 on c_plus.

    Unit-flux normalization: f_m = +-(x - p)/(2A), so the flux across the
    shared edge is 1 and the per-triangle charge is +-1.  This is the
    normalization for which the plain +-1 incidence matrices Lambda and
    Sigma are exactly the loop and star maps (n x grad of a vertex hat has
    RWG coefficients Lambda[:, v]), which the quasi-Helmholtz projector
    identities rely on.

    ``face_edges[f, k]`` / ``face_signs[f, k]`` / ``face_opp[f, k]`` give,
    for local corner k of face f, the edge opposite that corner, the RWG
    sign of this face for that edge, and the opposite vertex (= corner k).
    """

    mesh: TriangleMesh
    lengths: np.ndarray          # (N_e,)
    face_edges: np.ndarray       # (N_f, 3) int
    face_signs: np.ndarray       # (N_f, 3) float +-1
    face_opp: np.ndarray         # (N_f, 3) int global vertex id

    @property
    def num_functions(self) -> int:
        return self.mesh.num_edges

    def eval_on_face(self, f: int, points: np.ndarray) -> np.ndarray:
        """Values of the three local RWG functions at ``points`` (n, 3).

        Returns (n, 3, 3): point, local function, component.
        """
        area = self.mesh.areas[f]
        out = np.empty((points.shape[0], 3, 3))
        for k in range(3):
            p = self.mesh.vertices[self.face_opp[f, k]]
            out[:, k, :] = self.face_signs[f, k] / (2 * area) * (points - p)
        return out

    def div_on_face(self, f: int) -> np.ndarray:
        """Constant divergences of the three local functions on face f."""
        return self.face_signs[f] / self.mesh.areas[f]

    def divergence_matrix(self) -> sp.csr_matrix:
        """(N_f, N_e) sparse map: coefficients -> per-face divergence."""
        n_f = self.mesh.num_faces
        rows = np.repeat(np.arange(n_f), 3)
        cols = self.face_edges.ravel()
        vals = (self.face_signs / self.mesh.areas[:, None]).ravel()
        return sp.coo_matrix(
            (vals, (rows, cols)), shape=(n_f, self.mesh.num_edges)
        ).tocsr()


def build_rwg(mesh: TriangleMesh) -> RwgBasis:
    lut = mesh.edge_lookup()
    n_f = mesh.num_faces
    face_edges = np.empty((n_f, 3), dtype=np.int64)
    face_signs = np.empty((n_f, 3))
    face_opp = np.empty((n_f, 3), dtype=np.int64)
    for f, tri in enumerate(mesh.triangles):
        for k in range(3):
            u, v = int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3])
            e = lut[(min(u, v), max(u, v))]
            face_edges[f, k] = e
            face_signs[f, k] = 1.0 if mesh.edge_to_faces[e, 0] == f else -1.0
            face_opp[f, k] = tri[k]
    lengths = mesh.edge_lengths
    return RwgBasis(
        mesh=mesh,
        lengths=lengths,
        face_edges=face_edges,
        face_signs=face_signs,
        face_opp=face_opp,
    )


# ---------------------------------------------------------------------------
# Buffa-Christiansen duals
# ---------------------------------------------------------------------------

@dataclass
class BcBasis:
    """BC functions as refined-RWG coefficient columns.

    ``coeffs`` (C): (N_e_refined, N_e) — BC function per primal edge.
    ``primal_rep`` (R): (N_e_refined, N_e) — primal RWG functions expressed
    exactly in the refined RWG space (used for mixed integrals).
    """

    primal_mesh: TriangleMesh
    refined_mesh: TriangleMesh
    maps: RefinementMaps
    rwg_refined: RwgBasis
    coeffs: sp.csr_matrix
    primal_rep: sp.csr_matrix

    @property
    def num_functions(self) -> int:
        return self.primal_mesh.num_edges


def _vertex_fans(mesh: TriangleMesh):
    """For each vertex, a dict face -> (edges at the vertex in that face)."""
    lut = mesh.edge_lookup()
    fans = [dict() for _ in range(mesh.num_vertices)]
    for f, tri in enumerate(mesh.triangles):
        for k in range(3):
            v = int(tri[k])
            u1, u2 = int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3])
            e1 = lut[(min(v, u1), max(v, u1))]
            e2 = lut[(min(v, u2), max(v, u2))]
            fans[v][f] = (e1, e2)
    return fans


def _walk_fan(mesh: TriangleMesh, fans, v: int, e_start: int, f_start: int):
    """Faces and crossing edges around vertex v, starting at f_start.

    Returns (faces, crossed) with faces[0] = f_start; crossed[t] is the
    edge between faces[t] and faces[t+1]; the walk leaves f_start across
    its vertex-v edge other than e_start and closes back through e_start.
    """
    faces, crossed = [f_start], []
    e_prev, f = e_start, f_start
    while True:
        e1, e2 = fans[v][f]
        e_next = e2 if e1 == e_prev else e1
        if e_next == e_start:
            break
        fa, fb = mesh.edge_to_faces[e_next]
        f = int(fb) if fa == f else int(fa)
        crossed.append(e_next)
        faces.append(f)
        e_prev = e_next
    return faces, crossed


def build_bc(mesh: TriangleMesh, refined=None) -> BcBasis:
    """Construct the BC dual basis (and the primal representation matrix)."""
    if refined is None:
        refined_mesh, maps = barycentric_refine(mesh)
    else:
        refined_mesh, maps = refined
    rwg_ref = build_rwg(refined_mesh)
    ref_lut = refined_mesh.edge_lookup()
    ref_lengths = refined_mesh.edge_lengths
    fans = _vertex_fans(mesh)
    vov, voe, vof = maps.vertex_of_vertex, maps.vertex_of_edge, maps.vertex_of_face

    rows, cols, vals = [], [], []

    def add_flux(p, q, from_face, flux, m):
        """Add ``flux`` across refined edge (p, q) leaving refined face
        ``from_face``, to BC function m."""
        e = ref_lut[(min(p, q), max(p, q))]
        sign = 1.0 if refined_mesh.edge_to_faces[e, 0] == from_face else -1.0
        rows.append(e)
        cols.append(m)
        vals.append(sign * flux)

    def sector_face(spoke_edge_id, prev_far_vertex):
        """Of the two refined faces at a spoke edge, the one containing
        ``prev_far_vertex`` (i.e. the sector before the spoke)."""
        fa, fb = refined_mesh.edge_to_faces[spoke_edge_id]
        if prev_far_vertex in refined_mesh.triangles[fa]:
            return int(fa), int(fb)
        return int(fb), int(fa)

    for m in range(mesh.num_edges):
        v_minus, v_plus = (int(x) for x in mesh.edges[m])
        c_plus, c_minus = (int(x) for x in mesh.edge_to_faces[m])
        mid_m = int(voe[m])

        # rim: half a unit of flux through each of the two rim edges,
        # directed out of the dual cell of v+ into the dual cell of v-,
        # so that int(div g_e) = +1 over the v+ cell (Lambda sign structure)
        for cf in (c_plus, c_minus):
            b = int(vof[cf])
            e = ref_lut[(min(mid_m, b), max(mid_m, b))]
            fa, fb = refined_mesh.edge_to_faces[e]
            from_face = int(fa) if vov[v_plus] in refined_mesh.triangles[fa] else int(fb)
            add_flux(mid_m, b, from_face, 0.5, m)

        # endpoint fans
        for v, s in ((v_plus, -1.0), (v_minus, 1.0)):
            faces, crossed = _walk_fan(mesh, fans, v, m, c_plus)
            n = len(faces)
            # spoke far vertices in walking order:
            # mid(e), bary(F0), mid(e0), bary(F1), ..., bary(F_{n-1})
            far = [mid_m]
            for t in range(n):
                far.append(int(vof[faces[t]]))
                if t < n - 1:
                    far.append(int(voe[crossed[t]]))
            # spoke k connects v to far[k]; flux s(1/2 - k/(2n)) flows from
            # the sector before it (containing far[k-1]) into the one after
            for k in range(1, 2 * n):
                e = ref_lut[(min(int(vov[v]), far[k]), max(int(vov[v]), far[k]))]
                before, _after = sector_face(e, far[k - 1])
                add_flux(int(vov[v]), far[k], before, s * (0.5 - k / (2.0 * n)), m)

    n_ref_e = refined_mesh.num_edges
    coeffs = sp.coo_matrix(
        (vals, (rows, cols)), shape=(n_ref_e, mesh.num_edges)
    ).tocsr()

    primal_rep = _primal_representation(mesh, refined_mesh, maps, rwg_ref)
    return BcBasis(
        primal_mesh=mesh,
        refined_mesh=refined_mesh,
        maps=maps,
        rwg_refined=rwg_ref,
        coeffs=coeffs,
        primal_rep=primal_rep,
    )


def _primal_representation(mesh, refined_mesh, maps, rwg_ref) -> sp.csr_matrix:
    """Exact refined-RWG coefficients of each primal RWG function.

    The unit-flux refined-RWG coefficient on a refined edge is the
    (continuous) normal flux of the primal function across that edge;
    fluxes of a linear field are midpoint-exact.
    """
    primal_rwg = build_rwg(mesh)
    parent = maps.parent_face
    rows, cols, vals = [], [], []
    verts = refined_mesh.vertices
    ref_len = refined_mesh.edge_lengths
    for e in range(refined_mesh.num_edges):
        a, b = refined_mesh.edges[e]
        f_plus = int(refined_mesh.edge_to_faces[e, 0])
        mid = 0.5 * (verts[a] + verts[b])
        nu = np.cross(verts[b] - verts[a], refined_mesh.normals[f_plus])
        nu /= np.linalg.norm(nu)
        cand = set()
        for rf in refined_mesh.edge_to_faces[e]:
            cand.update(primal_rwg.face_edges[parent[rf]].tolist())
        for m in cand:
            mp = int(mesh.edge_to_faces[m, 0])
            mm = int(mesh.edge_to_faces[m, 1])
            side = None
            for rf in refined_mesh.edge_to_faces[e]:
                if parent[rf] in (mp, mm):
                    side = int(parent[rf])
                    break
            if side is None:
                continue
            # evaluate f_m from a face where it is supported
            k = list(primal_rwg.face_edges[side]).index(m)
            sgn = primal_rwg.face_signs[side, k]
            p = mesh.vertices[primal_rwg.face_opp[side, k]]
            fval = sgn / (2 * mesh.areas[side]) * (mid - p)
            coef = float(fval @ nu) * ref_len[e]
            if coef != 0.0:
                rows.append(e)
                cols.append(int(m))
                vals.append(coef)
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(refined_mesh.num_edges, mesh.num_edges)
    ).tocsr()


# ---------------------------------------------------------------------------
# Gram matrices and divergences
# ---------------------------------------------------------------------------

def rotated_gram(rwg: RwgBasis) -> sp.csr_matrix:
    """Sparse same-mesh rotated Gram:  [G]_{ab} = <n x f_a, f_b>.

    Exact: the integrand is quadratic per face, integrated with the
    3-point edge-midpoint rule.
    """
    mesh = rwg.mesh
    rows, cols, vals = [], [], []
    for f in range(mesh.num_faces):
        corners = mesh.face_corners(f)
        pts = 0.5 * (corners + np.roll(corners, -1, axis=0))  # edge midpoints
        w = mesh.areas[f] / 3.0
        vf = rwg.eval_on_face(f, pts)          # (3 pts, 3 funcs, 3)
        nvf = np.cross(mesh.normals[f], vf)
        loc = np.einsum("pac,pbc->ab", nvf, vf) * w
        for a in range(3):
            for b in range(3):
                rows.append(rwg.face_edges[f, a])
                cols.append(rwg.face_edges[f, b])
                vals.append(loc[a, b])
    n = mesh.num_edges
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def face_divergence(rwg: RwgBasis, coeffs: np.ndarray) -> np.ndarray:
    """Per-face divergence of an RWG coefficient vector (or matrix)."""
    return rwg.divergence_matrix() @ coeffs


def total_divergence(rwg: RwgBasis, coeffs: np.ndarray) -> float:
    """Integral of the divergence over the whole surface."""
    return float(rwg.mesh.areas @ face_divergence(rwg, coeffs))


@dataclass
class MixedGram:
    """Dense mixed Gram [G]_{mn} = <n x f_m, g_n> with an LU solve."""

    matrix: np.ndarray
    _lu: tuple = field(default=None, repr=False)

    def _factor(self):
        if self._lu is None:
            self._lu = sla.lu_factor(self.matrix)
        return self._lu

    def solve(self, b: np.ndarray) -> np.ndarray:
        """G^{-1} b."""
        return sla.lu_solve(self._factor(), b)

    def solve_t(self, b: np.ndarray) -> np.ndarray:
        """G^{-T} b."""
        return sla.lu_solve(self._factor(), b, trans=1)

    def inv(self) -> np.ndarray:
        return self.solve(np.eye(self.matrix.shape[0]))

    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix))


def assemble_mixed_gram(rwg: RwgBasis, bc: BcBasis) -> MixedGram:
    """G = R^T Gref C, with Gref the refined-mesh rotated Gram (exact)."""
    gref = rotated_gram(bc.rwg_refined)
    G = np.asarray((bc.primal_rep.T @ gref @ bc.coeffs).todense())
    n = G.shape[0]
    s = np.linalg.svd(G, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise SingularGram(
            f"mixed Gram numerically singular: cond ~ {s[0] / max(s[-1], 1e-300):.2e}"
        )
    return MixedGram(matrix=G)
