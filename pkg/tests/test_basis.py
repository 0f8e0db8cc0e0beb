import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdbem import basis as bas, mesh as msh
from tdbem.mesh import build_connectivity


def _gauss_tri(order=4):
    """Simple tensorized quadrature on the reference triangle (exactness
    is not needed here, only for smoke integrals)."""
    # 6-point degree-4 rule
    w = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3) / 2
    a, b = 0.445948490915965, 0.091576213509771
    pts = np.array(
        [
            [a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
            [b, b], [1 - 2 * b, b], [b, 1 - 2 * b],
        ]
    )
    return pts, w


def _face_points(mesh, f, ref_pts):
    c = mesh.face_corners(f)
    return (
        c[0][None, :]
        + ref_pts[:, :1] * (c[1] - c[0])[None, :]
        + ref_pts[:, 1:] * (c[2] - c[0])[None, :]
    )


# ---------------------------------------------------------------- RWG

def test_rwg_counts_and_div(tet):
    rwg = bas.build_rwg(tet)
    assert rwg.num_functions == 6
    # total divergence of each RWG function is zero (equal/opposite charges)
    div = bas.face_divergence(rwg, np.eye(6))
    assert np.allclose(tet.areas @ div, 0.0, atol=1e-14)


def test_rwg_sign_matches_sigma(tet):
    rwg = bas.build_rwg(tet)
    con = build_connectivity(tet)
    # per-face charge of RWG m is exactly Sigma[m, f] (unit-flux normalization)
    div = bas.face_divergence(rwg, np.eye(6))  # (N_f, N_e)
    assert np.allclose(div.T * tet.areas[None, :], con.Sigma.toarray(), atol=1e-14)


def test_rwg_self_inner_product_positive(sphere2):
    rwg = bas.build_rwg(sphere2)
    pts, w = _gauss_tri()
    gram_diag = np.zeros(sphere2.num_edges)
    for f in range(sphere2.num_faces):
        xp = _face_points(sphere2, f, pts)
        vals = rwg.eval_on_face(f, xp)
        for k in range(3):
            e = rwg.face_edges[f, k]
            gram_diag[e] += 2 * sphere2.areas[f] * np.einsum(
                "p,pc,pc->", w, vals[:, k], vals[:, k]
            )
    assert np.all(gram_diag > 0)


def test_rwg_flux_continuity(sphere2):
    # the normal flux across the shared edge is continuous (div-conforming)
    # and equals 1 measured in the v- -> v+ x normal direction from each side
    rwg = bas.build_rwg(sphere2)
    for e in range(0, sphere2.num_edges, 37):
        vm, vp = sphere2.edges[e]
        mid = 0.5 * (sphere2.vertices[vm] + sphere2.vertices[vp])
        le = sphere2.edge_lengths[e]
        for f in sphere2.edge_to_faces[e]:
            k = list(rwg.face_edges[f]).index(e)
            val = rwg.eval_on_face(int(f), mid[None, :])[0, k]
            nu = np.cross(
                sphere2.vertices[vp] - sphere2.vertices[vm],
                sphere2.normals[f],
            )
            nu /= np.linalg.norm(nu)
            assert (val @ nu) * le == pytest.approx(1.0, abs=1e-12)


def test_loop_map_is_lambda(sphere2):
    """Columns of Lambda are the RWG coefficients of n x grad(vertex hat)."""
    rwg = bas.build_rwg(sphere2)
    con = build_connectivity(sphere2)
    v = 7
    coef = con.Lambda.toarray()[:, v]
    pts, w = _gauss_tri()
    for f in range(sphere2.num_faces):
        tri = sphere2.triangles[f]
        xp = _face_points(sphere2, f, pts)
        vals = rwg.eval_on_face(f, xp)
        combo = np.einsum("k,pkc->pc", coef[rwg.face_edges[f]], vals)
        if v not in tri:
            assert np.abs(combo).max() < 1e-12
            continue
        # gradient of the hat at v on this face
        c = sphere2.face_corners(f)
        k = list(tri).index(v)
        e_opp = c[(k + 2) % 3] - c[(k + 1) % 3]
        grad = np.cross(sphere2.normals[f], e_opp) / (2 * sphere2.areas[f])
        # flux of n x grad(hat) along the (v+ - v-) x n direction is
        # -Lambda[e, v], so the Lambda column represents -(n x grad hat)
        expect = -np.cross(sphere2.normals[f], grad)
        assert np.allclose(combo, expect[None, :], atol=1e-12)


# ---------------------------------------------------------------- BC

@pytest.fixture(scope="module")
def tet_bc(tet):
    return bas.build_bc(tet)


def test_bc_locality(tet, tet_bc):
    # support confined to the fans of the two endpoint vertices
    C = tet_bc.coeffs.toarray()
    rm = tet_bc.refined_mesh
    for m in range(tet.num_edges):
        vm, vp = tet.edges[m]
        for e in np.nonzero(C[:, m])[0]:
            verts = set()
            for f in rm.edge_to_faces[e]:
                pf = tet_bc.maps.parent_face[f]
                verts.update(tet.triangles[pf].tolist())
            assert vm in verts or vp in verts


def test_bc_total_divergence_zero(tet_bc):
    dv = bas.face_divergence(tet_bc.rwg_refined, tet_bc.coeffs.toarray())
    assert np.abs(tet_bc.refined_mesh.areas @ dv).max() < 1e-13


def test_bc_divergence_structure(sphere2):
    """div g_e = sigma_{v+} - sigma_{v-} with vertex-uniform sector charge."""
    bc = bas.build_bc(sphere2)
    rm = bc.refined_mesh
    con = build_connectivity(sphere2)
    vertex_degree = np.zeros(sphere2.num_vertices, dtype=int)
    for tri in sphere2.triangles:
        vertex_degree[tri] += 1
    for m in (0, 11, 57):
        charge = bas.face_divergence(bc.rwg_refined, bc.coeffs[:, m].toarray().ravel()) * rm.areas
        for v, s in zip(sphere2.edges[m], (-1.0, 1.0)):
            sectors = [
                f for f in range(rm.num_faces)
                if v in rm.triangles[f] and abs(charge[f]) > 1e-13
            ]
            assert len(sectors) == 2 * vertex_degree[v]
            assert np.allclose(
                charge[sectors], s / (2 * vertex_degree[v]), atol=1e-12
            )


def test_bc_sigma_combination_divergence_free(small_torus):
    bc = bas.build_bc(small_torus)
    con = build_connectivity(small_torus)
    rng = np.random.default_rng(3)
    x = con.Sigma @ rng.standard_normal(small_torus.num_faces)
    d = bas.face_divergence(bc.rwg_refined, bc.coeffs @ x)
    assert np.abs(d).max() < 1e-10 * np.abs(x).max()


def test_primal_representation_exact(sphere2):
    """R reproduces primal RWG: Gram computed via R matches direct assembly."""
    bc = bas.build_bc(sphere2)
    rwg = bas.build_rwg(sphere2)
    gref = bas.rotated_gram(bc.rwg_refined)
    via_r = (bc.primal_rep.T @ gref @ bc.primal_rep).toarray()
    direct = bas.rotated_gram(rwg).toarray()
    assert np.abs(via_r - direct).max() < 1e-13 * np.abs(direct).max()


# ---------------------------------------------------------------- mixed Gram

def test_gram_invertible_and_conditioned(tet, sphere2, small_torus):
    for m in (tet, sphere2, small_torus):
        bc = bas.build_bc(m)
        rwg = bas.build_rwg(m)
        G = bas.assemble_mixed_gram(rwg, bc)
        assert G.cond() < 50
        rng = np.random.default_rng(0)
        b = rng.standard_normal(m.num_edges)
        x = G.solve(b)
        assert np.linalg.norm(G.matrix @ x - b) < 1e-10 * np.linalg.norm(b)


def test_gram_identity_all_meshes(tet, sphere2, small_torus, small_pyramid):
    """p_Lambda G^{-1} P_Sigma = 0 — the identity the formulation rests on."""
    for m in (tet, sphere2, small_torus, small_pyramid):
        bc = bas.build_bc(m)
        rwg = bas.build_rwg(m)
        G = bas.assemble_mixed_gram(rwg, bc)
        con = build_connectivity(m)
        lam, sig = con.Lambda.toarray(), con.Sigma.toarray()
        Gi = G.inv()
        rel = np.abs(lam.T @ Gi @ sig).max() / np.abs(Gi).max()
        assert rel < 1e-12


def test_gram_scaling(tet):
    """With unit-flux normalization (values ~ 1/length) the mixed Gram is
    scale invariant: the 1/L^2 from the two basis values cancels the L^2
    of the area element."""
    bc = bas.build_bc(tet)
    G1 = bas.assemble_mixed_gram(bas.build_rwg(tet), bc).matrix
    big = msh.make_mesh(2.0 * tet.vertices, tet.triangles)
    bc2 = bas.build_bc(big)
    G2 = bas.assemble_mixed_gram(bas.build_rwg(big), bc2).matrix
    assert np.allclose(G2, G1, atol=1e-13)


def test_rotated_gram_antisymmetric(sphere2):
    g = bas.rotated_gram(bas.build_rwg(sphere2)).toarray()
    assert np.abs(g + g.T).max() < 1e-13 * np.abs(g).max()


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_gram_solve_linearity(seed):
    m = msh.generate_sphere(1.0, 1)
    bc = bas.build_bc(m)
    G = bas.assemble_mixed_gram(bas.build_rwg(m), bc)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, m.num_edges))
    a, b = rng.standard_normal(2)
    lhs = G.solve(a * x + b * y)
    rhs = a * G.solve(x) + b * G.solve(y)
    assert np.allclose(lhs, rhs, atol=1e-10)
