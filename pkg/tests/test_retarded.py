import numpy as np
import pytest

from tdbem import _radial, basis as bas, mesh as msh, temporal as tmp
from tdbem.errors import ConfigError
from tdbem.quadrature import (
    KIND_DL,
    KIND_HYP,
    KIND_SL,
    RadialComponent,
    build_component_tables,
    oracle_moments_angular,
    triangle_rule,
)
from tdbem.retarded import (
    FAMILY_NAMES,
    Medium,
    assemble_kernel_matrix,
    assemble_retarded_block,
    family_components,
)

DT = 0.35
C = 1.0


@pytest.fixture(scope="module")
def sph():
    return msh.generate_sphere(1.0, 2)


@pytest.fixture(scope="module")
def rwg(sph):
    return bas.build_rwg(sph)


def oracle_entry(rwg_basis, m, n, breaks, coeffs, kinds, n_q):
    """Independent evaluation of one matrix entry: same outer rule, inner
    moments from the angular-clipping oracle, combination re-derived here
    in plain numpy."""
    mesh = rwg_basis.mesh
    outer_b, outer_w = triangle_rule(n_q)
    total = 0.0
    for ft in mesh.edge_to_faces[m]:
        ft = int(ft)
        kt = list(rwg_basis.face_edges[ft]).index(m)
        tri_t = mesh.face_corners(ft)
        area_t = mesh.areas[ft]
        n_t = mesh.normals[ft]
        p_m = mesh.vertices[rwg_basis.face_opp[ft, kt]]
        s_m = rwg_basis.face_signs[ft, kt]
        pts = outer_b @ tri_t
        for fs in mesh.edge_to_faces[n]:
            fs = int(fs)
            ks = list(rwg_basis.face_edges[fs]).index(n)
            tri_s = mesh.face_corners(fs)
            n_s = mesh.normals[fs]
            area_s = mesh.areas[fs]
            p_n = mesh.vertices[rwg_basis.face_opp[fs, ks]]
            k_n = rwg_basis.face_signs[fs, ks] / (2 * area_s)
            d_n = rwg_basis.face_signs[fs, ks] / area_s
            parallel = np.linalg.norm(np.cross(n_t, n_s)) < 1e-9
            d_thresh = 1e-6 * mesh.mean_edge_length
            for g, x in enumerate(pts):
                wt = outer_w[g] * area_t
                fmx = s_m / (2 * area_t) * (x - p_m)
                dmx = s_m / area_t
                d_plane = abs((x - tri_s[0]) @ n_s)
                for c in range(len(kinds)):
                    if kinds[c] == KIND_DL and parallel and d_plane < d_thresh:
                        continue  # annihilated by the in-plane test value
                    I0, I1 = oracle_moments_angular(
                        x, tri_s, breaks, coeffs[c : c + 1]
                    )
                    if kinds[c] == KIND_HYP:
                        total += wt * dmx * d_n * I0[0]
                    elif kinds[c] == KIND_SL:
                        total += wt * fmx @ (k_n * (I1[0] - I0[0] * p_n))
                    else:
                        V = k_n * np.cross(I0[0] * x - I1[0], x - p_n)
                        total += wt * fmx @ V
    return total


def _edge_pairs(mesh):
    """A self pair, a touching pair, a near pair and a far pair."""
    m = 0
    faces0 = set(int(f) for f in mesh.edge_to_faces[m])
    touching = near = far = None
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    for n in range(1, mesh.num_edges):
        shares = bool(faces0 & set(int(f) for f in mesh.edge_to_faces[n]))
        dist = np.linalg.norm(mids[n] - mids[m])
        if shares and touching is None:
            touching = n
        elif not shares and dist < 0.8 and near is None:
            near = n
        elif dist > 1.8 and far is None:
            far = n
    return [(m, m), (m, touching), (m, near), (m, far)]


@pytest.mark.parametrize("family", FAMILY_NAMES)
@pytest.mark.parametrize("i", [1, 3])
def test_entries_match_oracle(rwg, family, i):
    t_max = 2.0 / C
    comps = family_components(family, DT, C, t_max)
    breaks, coeffs, kinds = build_component_tables(comps, i * DT, C)
    n_q = 7
    mat = assemble_retarded_block(rwg, family, i, DT, C, t_max, n_q=n_q)
    scale = np.abs(mat).max()
    assert scale > 0
    for m, n in _edge_pairs(rwg.mesh):
        ref = oracle_entry(rwg, m, n, breaks, coeffs, kinds, n_q)
        shares = bool(
            set(int(f) for f in rwg.mesh.edge_to_faces[m])
            & set(int(f) for f in rwg.mesh.edge_to_faces[n])
        )
        tol = 1e-6 if shares else 1e-8
        denom = max(abs(ref), 1e-3 * scale)
        assert abs(mat[m, n] - ref) / denom < tol, (family, i, m, n)


def test_blocks_vanish_beyond_support(rwg):
    """Blocks are bitwise zero once the retarded shell leaves the mesh."""
    d = rwg.mesh.diameter
    t_max = d / C
    k_max = int(np.ceil(t_max / DT))
    for family, extra in [("T", 1), ("K", 1), ("That", 2), ("Khat", 2)]:
        mat = assemble_retarded_block(
            rwg, family, k_max + extra, DT, C, t_max, n_q=1
        )
        assert not np.any(mat)


def test_ktilde_constant_late_blocks(rwg):
    """For late indices the pulse-integral signature saturates: the block
    becomes index-independent."""
    d = rwg.mesh.diameter
    t_max = d / C
    k_max = int(np.ceil(t_max / DT))
    a = assemble_retarded_block(rwg, "Ktilde", k_max + 1, DT, C, t_max, n_q=4)
    b = assemble_retarded_block(rwg, "Ktilde", k_max + 3, DT, C, t_max, n_q=4)
    assert np.allclose(a, b, atol=1e-13 * np.abs(a).max())
    assert np.abs(a).max() > 0


def test_outer_rule_convergence(rwg):
    """Entries converge as the outer rule is refined (the inner integral is
    semi-analytic, so the outer rule is the only quadrature error)."""
    t_max = 2.0 / C
    mats = {
        n_q: assemble_retarded_block(rwg, "T", 2, DT, C, t_max, n_q=n_q)
        for n_q in (4, 16, 36)
    }
    scale = np.abs(mats[36]).max()
    err_lo = np.abs(mats[4] - mats[36]).max() / scale
    err_hi = np.abs(mats[16] - mats[36]).max() / scale
    # the outer integrand has kinks where breakpoint spheres graze the
    # source triangles, so the convergence is algebraic, not spectral
    assert err_hi < 0.3 * err_lo
    assert err_hi < 0.05


def test_component_validation():
    with pytest.raises(ConfigError):
        from tdbem.retarded import _validate

        _validate([RadialComponent(KIND_SL, ((-2, tmp.hat(0.1)),), 1.0)])
    with pytest.raises(ConfigError):
        family_components("nope", 0.1, 1.0, 1.0)


def test_medium_constants():
    m = Medium(eps=4.0, mu=1.0)
    assert m.c == pytest.approx(0.5)
    assert m.eta == pytest.approx(0.5)
