"""Assembly of retarded boundary-operator interaction matrices.

Every matrix here is a time-block: entry (m, n) integrates, over the test
triangle (outer Gauss rule) and source triangle (semi-analytic radial
integration), a kernel of the form

    w(R) * { f_n(y),  (x - y) x f_n(y),  div f_n }     R = |x - y|

with w obtained by substituting the retarded time t_i - R/c into a
piecewise-polynomial temporal signature.  Six signature families are
provided, matching the three temporal shapes (pulse, hat, C^1 quadratic)
used by the marching scheme, for the single-layer (with or without the
hypersingular term) and double-layer operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _radial, temporal
from .basis import RwgBasis
from .errors import ConfigError
from ._sing_quad import (
    PAIR_EDGE,
    PAIR_IDENTICAL,
    PAIR_VERTEX,
    singular_pair_table,
)
from .quadrature import (
    KIND_DL,
    KIND_HYP,
    KIND_SL,
    RadialComponent,
    build_component_tables,
    triangle_rule,
)

__all__ = [
    "Medium",
    "family_components",
    "assemble_kernel_matrix",
    "assemble_retarded_block",
    "FAMILY_NAMES",
]

FAMILY_NAMES = ("T", "K", "That", "Khat", "Ttilde", "Ktilde")

_INV_4PI = 1.0 / (4.0 * np.pi)


@dataclass(frozen=True)
class Medium:
    """Homogeneous lossless medium."""

    eps: float
    mu: float

    @property
    def c(self) -> float:
        return 1.0 / np.sqrt(self.eps * self.mu)

    @property
    def eta(self) -> float:
        return np.sqrt(self.mu / self.eps)


def family_components(name: str, dt: float, c: float, t_max: float):
    """Kernel components of one signature family.

    * T      : single layer tested with the time-derivative hat — the
               hypersingular term is omitted because every use of this
               family is projector-sandwiched so that it drops exactly.
    * K      : double layer with the hat signature.
    * That   : single layer + hypersingular with the C^1 quadratic
               signature, scaled by t_max (the slow-time unit).
    * Khat   : double layer with the differentiated quadratic signature,
               scaled by t_max.
    * Ttilde : single layer with the pulse signature, scaled by
               1/t_max (time-integrated block; hypersingular term again
               dropped by the surrounding projectors).
    * Ktilde : double layer with the pulse signature and its running
               integral (constant for late blocks), scaled by 1/t_max.
    """
    if name == "T":
        h = temporal.hat(dt)
        return [
            RadialComponent(KIND_SL, ((-1, h.derivative()),), -_INV_4PI / c),
        ]
    if name == "K":
        h = temporal.hat(dt)
        return [
            RadialComponent(
                KIND_DL,
                ((-2, h.derivative().scaled(1.0 / c)), (-3, h)),
                -_INV_4PI,
            ),
        ]
    if name == "That":
        q = temporal.quad_spline(dt)
        qpp = q.derivative().derivative()
        return [
            RadialComponent(KIND_SL, ((-1, qpp),), -_INV_4PI * t_max / c),
            RadialComponent(KIND_HYP, ((-1, q),), -_INV_4PI * t_max * c),
        ]
    if name == "Khat":
        qp = temporal.quad_spline(dt).derivative()
        return [
            RadialComponent(
                KIND_DL,
                ((-2, qp.derivative().scaled(1.0 / c)), (-3, qp)),
                -_INV_4PI * t_max,
            ),
        ]
    if name == "Ttilde":
        p = temporal.pulse(dt)
        return [
            RadialComponent(KIND_SL, ((-1, p),), -_INV_4PI / (c * t_max)),
        ]
    if name == "Ktilde":
        p = temporal.pulse(dt)
        return [
            RadialComponent(
                KIND_DL,
                ((-2, p.scaled(1.0 / c)), (-3, temporal.ramp(dt))),
                -_INV_4PI / t_max,
            ),
        ]
    raise ConfigError(f"unknown kernel family {name!r}")


def _validate(components):
    for comp in components:
        for r_pow, _shape in comp.parts:
            if comp.kind in (KIND_SL, KIND_HYP) and r_pow != -1:
                raise ConfigError(
                    "single-layer / hypersingular components must have the "
                    "1/R kernel factor"
                )
            if comp.kind == KIND_DL and r_pow not in (-2, -3):
                raise ConfigError(
                    "double-layer components must have 1/R^2 or 1/R^3 factors"
                )


def _geometry(rwg: RwgBasis):
    m = rwg.mesh
    corners = np.ascontiguousarray(m.face_corners().astype(float))
    opp = np.ascontiguousarray(m.vertices[rwg.face_opp])
    cen = corners.mean(axis=1)
    rad = np.linalg.norm(corners - cen[:, None, :], axis=2).max(axis=1)
    return corners, m.areas.copy(), m.normals.copy(), opp, rwg.face_signs.copy(), cen, rad


def assemble_kernel_matrix(
    rwg_test: RwgBasis,
    rwg_src: RwgBasis,
    breaks: np.ndarray,
    coeffs: np.ndarray,
    kinds: np.ndarray,
    n_q: int = 4,
    seg_gauss: int = 16,
    far_dist: float = -1.0,
    inner_n_q: int = 7,
    chunk: int = 256,
    project=None,
    near_mode: int = 0,
    adapt_tol: float = 1e-9,
    adapt_far: float = 3.0,
    near_orders: tuple = (20, (24, 20), 14),
) -> np.ndarray:
    """Dense (N_e_test, N_e_src) interaction matrix for arbitrary Laurent
    kernel tables (shared break grid).

    far_dist < 0 uses the semi-analytic path for every pair; otherwise
    pairs with outer-point-to-centroid distance beyond far_dist use a
    plain inner Gauss rule with inner_n_q points.

    project, if given, is a pair of sparse maps (L, R) with L of shape
    (N_e_test, n_l) and R of shape (N_e_src, n_r): the returned matrix is
    the congruence L^T M R, accumulated chunk-wise so the full M is never
    stored (used for Galerkin matrices of bases expressed as coefficient
    columns over a refined edge space).

    near_mode upgrades the integration of near pairs for kernels whose
    integrand is smooth except where the two faces touch -- static
    kernels and saturated late-time tails, i.e. tables without breakpoint
    spheres crossing touching pairs:
      1 - touching pairs (identical / shared edge / shared vertex) via
          regularized 4-D quadrature tables of Gauss orders
          near_orders = (n_identical, n_edge, n_vertex), which turn the
          |x - y| singularity into an analytic integrand (the outer
          integrand alone has a log(distance-to-shared-edge) singularity
          that no fixed or uniformly refined outer rule resolves);
      2 - additionally, non-touching pairs closer than adapt_far times
          the sum of the two circumscribed radii via adaptive outer
          bisection with per-pair relative tolerance adapt_tol.
    """
    ne_t = rwg_test.num_functions
    ne_s = rwg_src.num_functions
    if project is None:
        out = np.zeros((ne_t, ne_s))
    else:
        out = np.zeros((project[0].shape[1], project[1].shape[1]))
    if coeffs.shape[1] == 0 or not np.any(coeffs):
        return out
    ct, at, nt, ot, st, _, _ = _geometry(rwg_test)
    cs, as_, ns, os_, ss, cen_s, rad_s = _geometry(rwg_src)
    edges_s = np.ascontiguousarray(rwg_src.face_edges)
    outer_b, outer_w = triangle_rule(n_q)
    inner_b, inner_w = triangle_rule(inner_n_q)
    gx, gw = np.polynomial.legendre.leggauss(seg_gauss)
    d_thresh = 1e-6 * rwg_src.mesh.mean_edge_length
    # cheap global support check
    dmax = np.linalg.norm(
        ct.reshape(-1, 3)[:, None, :] - np.array([cen_s.mean(axis=0)])[None, :, :],
        axis=2,
    ).max() + rad_s.max()
    if breaks[0] > dmax:
        return out
    tris_t = np.ascontiguousarray(rwg_test.mesh.triangles.astype(np.int64))
    tris_s = np.ascontiguousarray(rwg_src.mesh.triangles.astype(np.int64))
    same_mesh = 1 if rwg_test.mesh is rwg_src.mesh else 0
    if near_mode > 0:
        def _tab(case, spec):
            if isinstance(spec, tuple):
                return singular_pair_table(case, *spec)
            return singular_pair_table(case, spec)

        tab_id = _tab(PAIR_IDENTICAL, near_orders[0])
        tab_ed = _tab(PAIR_EDGE, near_orders[1])
        tab_vx = _tab(PAIR_VERTEX, near_orders[2])
        bary_a, w_a = triangle_rule(13)
    else:
        tab_id = tab_ed = tab_vx = np.zeros((1, 7))
        bary_a, w_a = triangle_rule(1)
    nf_t = rwg_test.mesh.num_faces
    faces = np.arange(nf_t, dtype=np.int64)
    fe_t = rwg_test.face_edges
    for start in range(0, nf_t, chunk):
        sel = faces[start : start + chunk]
        buf = np.zeros((len(sel), 3, ne_s))
        _radial.assemble_block_chunk(
            sel, ct, at, nt, ot, st,
            cs, as_, ns, os_, ss, edges_s,
            cen_s, rad_s,
            outer_b, outer_w,
            breaks, coeffs, kinds,
            gx, gw,
            d_thresh, far_dist,
            inner_b, inner_w,
            tris_t, tris_s, same_mesh, near_mode, adapt_tol, adapt_far,
            tab_id, tab_ed, tab_vx, bary_a, w_a,
            buf,
        )
        rows = fe_t[sel].ravel()
        vals = buf.reshape(-1, ne_s)
        if project is None:
            np.add.at(out, rows, vals)
        else:
            L, R = project
            out += L[rows].T @ (R.T @ vals.T).T
    return out


def assemble_retarded_block(
    rwg: RwgBasis,
    family: str,
    i: int,
    dt: float,
    c: float,
    t_max: float,
    n_q: int = 4,
    seg_gauss: int = 16,
    rwg_src: RwgBasis | None = None,
    near_mode: int = 0,
    adapt_tol: float = 1e-9,
    adapt_far: float = 3.0,
    near_orders: tuple = (20, (24, 20), 14),
) -> np.ndarray:
    """Time-block i of one signature family on a single mesh.

    near_mode (see assemble_kernel_matrix) is only valid for saturated
    late-time blocks whose kernel has no breakpoint sphere inside the
    mesh; it is used to make the constant tail consistent with the
    accurately-integrated static operators."""
    comps = family_components(family, dt, c, t_max)
    _validate(comps)
    breaks, coeffs, kinds = build_component_tables(comps, i * dt, c)
    return assemble_kernel_matrix(
        rwg, rwg_src if rwg_src is not None else rwg,
        breaks, coeffs, kinds, n_q=n_q, seg_gauss=seg_gauss,
        near_mode=near_mode, adapt_tol=adapt_tol, adapt_far=adapt_far,
        near_orders=near_orders,
    )
