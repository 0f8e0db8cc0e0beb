"""Quadrature rules and radial kernel representations.

Two layers:

* symmetric / collapsed Gauss rules on the reference triangle;
* "radial components": the spatial kernels of every integral operator in
  this package have the form  w(|x-y|) x {f_n, (x-y) x f_n, div f_n}
  with w a piecewise Laurent polynomial in R = |x-y| (powers R^-3..R^2),
  obtained by substituting the retarded time t_i - R/c into piecewise
  polynomial temporal signatures and dividing by the 1/R, 1/R^2, 1/R^3
  kernel factors.  This module builds those Laurent tables; the fast
  semi-analytic integrator in ``_radial`` consumes them.

Also provides the *brute-force oracle*: adaptive 2-D subdivision
quadrature for the inner integral, sharing nothing with the production
semi-analytic path except the Laurent tables themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "triangle_rule",
    "tanh_sinh_rule",
    "KIND_SL",
    "KIND_DL",
    "KIND_HYP",
    "RadialComponent",
    "build_component_tables",
    "eval_radial",
    "oracle_moments",
    "oracle_moments_angular",
]

KIND_SL = 0   # vector single layer: needs I0, I1, pairs with f_n
KIND_DL = 1   # double layer (x-y) cross f_n: needs I0, I1
KIND_HYP = 2  # scalar: pairs with div f_m div f_n, needs I0


# ---------------------------------------------------------------------------
# triangle rules (barycentric points, weights summing to 1)
# ---------------------------------------------------------------------------

def tanh_sinh_rule(n: int):
    """Tanh-sinh (double-exponential) rule on [0, 1] with about n nodes.

    Nodes cluster double-exponentially at both endpoints, so endpoint
    singularities of log / algebraic type are integrated to near machine
    precision with a few dozen nodes (e.g. 25 nodes give ~1e-13 on
    int_0^1 log x dx)."""
    delta = 6.26 / max(n - 1, 4)
    k = np.arange(-80, 81)
    with np.errstate(over="ignore"):
        s = np.sinh(k * delta)
        t = np.tanh(0.5 * np.pi * s)
        w = delta * 0.5 * np.pi * np.cosh(k * delta) / np.cosh(0.5 * np.pi * s) ** 2
    x = 0.5 * (t + 1.0)
    w = 0.5 * w
    keep = (x > 1e-15) & (x < 1.0 - 1e-15) & np.isfinite(w) & (w > 0)
    return np.ascontiguousarray(x[keep]), np.ascontiguousarray(w[keep])


def _sym_rule(groups):
    pts, w = [], []
    for weight, bary in groups:
        a = np.asarray(bary, float)
        perms = {tuple(p) for p in
                 [a, a[[0, 2, 1]], a[[1, 0, 2]], a[[1, 2, 0]],
                  a[[2, 0, 1]], a[[2, 1, 0]]]}
        for p in sorted(perms):
            pts.append(p)
            w.append(weight)
    return np.array(pts), np.array(w)


def _collapsed_rule(n):
    """n x n Gauss-Legendre collapsed onto the triangle (all positive)."""
    x, wx = np.polynomial.legendre.leggauss(n)
    u = (x + 1) / 2
    wu = wx / 2
    pts, w = [], []
    for i in range(n):
        for j in range(n):
            a = u[i]
            b = u[j] * (1 - u[i])
            pts.append((1 - a - b, a, b))
            w.append(2 * wu[i] * wu[j] * (1 - u[i]))
    return np.array(pts), np.array(w)


def triangle_rule(n_q: int):
    """Quadrature with (nominally) n_q points on the triangle.

    Returns (bary, weights): barycentric coordinates (m, 3) and weights
    summing to 1 (multiply by the triangle area).  n_q in {1, 3, 4, 6, 7,
    12, 13} gives standard rules with exactly that many points; any other
    value is realized as the smallest collapsed Gauss product rule with
    at least n_q points.
    """
    if n_q == 1:
        return np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    if n_q == 3:
        return _sym_rule([(1 / 3, (0.5, 0.5, 0.0))])
    if n_q == 4:
        return _collapsed_rule(2)
    if n_q == 6:
        a, b = 0.445948490915965, 0.091576213509771
        return _sym_rule(
            [
                (0.223381589678011, (a, a, 1 - 2 * a)),
                (0.109951743655322, (b, b, 1 - 2 * b)),
            ]
        )
    if n_q == 7:
        a = 0.470142064105115
        b = 0.101286507323456
        return _sym_rule(
            [
                (0.225, (1 / 3, 1 / 3, 1 / 3)),
                (0.132394152788506, (a, a, 1 - 2 * a)),
                (0.125939180544827, (b, b, 1 - 2 * b)),
            ]
        )
    if n_q == 12:
        a, b = 0.063089014491502, 0.249286745170910
        c1, c2 = 0.310352451033784, 0.053145049844817
        return _sym_rule(
            [
                (0.050844906370207, (a, a, 1 - 2 * a)),
                (0.116786275726379, (b, b, 1 - 2 * b)),
                (0.082851075618374, (c1, c2, 1 - c1 - c2)),
            ]
        )
    if n_q == 13:
        a, b = 0.260345966079040, 0.065130102902216
        c1, c2 = 0.312865496004874, 0.048690315425316
        return _sym_rule(
            [
                (-0.149570044467682, (1 / 3, 1 / 3, 1 / 3)),
                (0.175615257433208, (a, a, 1 - 2 * a)),
                (0.053347235608838, (b, b, 1 - 2 * b)),
                (0.077113760890257, (c1, c2, 1 - c1 - c2)),
            ]
        )
    n = int(np.ceil(np.sqrt(n_q)))
    return _collapsed_rule(n)


# ---------------------------------------------------------------------------
# radial Laurent component tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialComponent:
    """One additive kernel component.

    ``parts`` is a list of (r_power, shape) with r_power in {-1, -2, -3}:
    the component's spatial weight is  sum_parts shape(t_i - R/c) * R^r_power,
    scaled by ``prefactor``.
    """

    kind: int
    parts: tuple          # ((r_power, PiecewisePoly), ...)
    prefactor: float


def build_component_tables(components, t_i: float, c: float):
    """Merge components into one shared radial break grid.

    Returns (breaks, coeffs, kinds): breaks (nb,) ascending >= 0, coeffs
    (n_comp, nb-1, 6) with slot q holding the coefficient of R^(q-3),
    kinds (n_comp,).  Outside [breaks[0], breaks[-1]] every component
    vanishes.
    """
    pieces_per_comp = []
    all_breaks = set()
    for comp in components:
        plist = []
        for r_pow, shape in comp.parts:
            rb, rc = shape.retarded_radial(t_i, c)
            if len(rc):
                plist.append((r_pow, rb, rc))
                all_breaks.update(rb.tolist())
        pieces_per_comp.append(plist)
    if not all_breaks:
        return np.zeros(1), np.zeros((len(components), 0, 6)), np.array(
            [c.kind for c in components], dtype=np.int64
        )
    breaks = np.array(sorted(b for b in all_breaks if b >= 0.0))
    n_p = len(breaks) - 1
    coeffs = np.zeros((len(components), max(n_p, 0), 6))
    for ci, (comp, plist) in enumerate(zip(components, pieces_per_comp)):
        for r_pow, rb, rc in plist:
            for j in range(len(rc)):
                lo, hi = rb[j], rb[j + 1]
                sel = (breaks[:-1] >= lo - 1e-300) & (breaks[1:] <= hi + 1e-300)
                # map polynomial powers k -> Laurent slot k + r_pow + 3
                for k in range(rc.shape[1]):
                    q = k + r_pow + 3
                    if rc[j, k] != 0.0:
                        coeffs[ci, sel, q] += comp.prefactor * rc[j, k]
    kinds = np.array([c.kind for c in components], dtype=np.int64)
    return breaks, coeffs, kinds


def eval_radial(breaks, coeffs, R):
    """Evaluate each component's Laurent weight at radii R (vectorized).

    Returns (n_comp, len(R)).
    """
    R = np.atleast_1d(np.asarray(R, float))
    nc = coeffs.shape[0]
    out = np.zeros((nc, R.size))
    if coeffs.shape[1] == 0:
        return out
    idx = np.searchsorted(breaks, R, side="right") - 1
    ok = (idx >= 0) & (idx < coeffs.shape[1]) & (R > 0)
    for q in range(6):
        pw = R[ok] ** (q - 3)
        for ci in range(nc):
            out[ci, ok] += coeffs[ci, idx[ok], q] * pw
    return out


# ---------------------------------------------------------------------------
# brute-force oracle: adaptive 2-D subdivision of the source triangle
# ---------------------------------------------------------------------------

_ORACLE_RULE = triangle_rule(7)


def oracle_moments(
    x, tri, breaks, coeffs, rel_tol=1e-11, max_depth=16, coarse=None
):
    """Adaptive inner moments: I0_c = int w_c(|x-y|) dA_y and
    I1_c = int w_c(|x-y|) y dA_y over the triangle, by recursive uniform
    subdivision with a 7-point rule per cell.

    Deliberately naive and independent of the semi-analytic integrator.
    Accurate only for weights w that are *continuous* in R; use
    :func:`oracle_moments_angular` when w jumps at a breakpoint.
    Returns (I0 (nc,), I1 (nc, 3)).
    """
    x = np.asarray(x, float)
    tri = np.asarray(tri, float)
    nc = coeffs.shape[0]
    bary, wts = _ORACLE_RULE
    bary3, wts3 = triangle_rule(3)

    def cell_vals(corners):
        # corners: (m, 3, 3)
        pts = np.einsum("qk,mkc->mqc", bary, corners)
        area = 0.5 * np.linalg.norm(
            np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]),
            axis=1,
        )
        R = np.linalg.norm(pts - x[None, None, :], axis=2)  # (m, q)
        w = np.zeros((nc, R.shape[0], R.shape[1]))
        flat = eval_radial(breaks, coeffs, R.ravel())
        w = flat.reshape(nc, R.shape[0], R.shape[1])
        i0 = np.einsum("cmq,q,m->cm", w, wts, area)
        i1 = np.einsum("cmq,q,mqd,m->cmd", w, wts, pts, area)
        # coarse 3-point estimate for the error indicator
        pts3 = np.einsum("qk,mkc->mqc", bary3, corners)
        R3 = np.linalg.norm(pts3 - x[None, None, :], axis=2)
        w3 = eval_radial(breaks, coeffs, R3.ravel()).reshape(nc, R3.shape[0], -1)
        i0c = np.einsum("cmq,q,m->cm", w3, wts3, area)
        return i0, i1, i0c

    I0 = np.zeros(nc)
    I1 = np.zeros((nc, 3))
    active = tri[None, :, :]
    scale = None
    total_area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    for depth in range(max_depth):
        i0, i1, i0c = cell_vals(active)
        err = np.abs(i0 - i0c).max(axis=0)
        if scale is None:
            scale = max(np.abs(i0).sum(), 1e-300)
        areas = 0.5 * np.linalg.norm(
            np.cross(active[:, 1] - active[:, 0], active[:, 2] - active[:, 0]),
            axis=1,
        )
        # error budget proportional to cell area, so the total stays bounded
        good = err <= rel_tol * scale * areas / total_area
        if depth == max_depth - 1 or len(active) > 300_000:
            good = np.ones(len(active), bool)
        I0 += i0[:, good].sum(axis=1)
        I1 += i1[:, good].sum(axis=1)
        bad = active[~good]
        if not len(bad):
            break
        # split each bad cell into 4
        m01 = 0.5 * (bad[:, 0] + bad[:, 1])
        m12 = 0.5 * (bad[:, 1] + bad[:, 2])
        m20 = 0.5 * (bad[:, 2] + bad[:, 0])
        active = np.concatenate(
            [
                np.stack([bad[:, 0], m01, m20], axis=1),
                np.stack([m01, bad[:, 1], m12], axis=1),
                np.stack([m20, m12, bad[:, 2]], axis=1),
                np.stack([m01, m12, m20], axis=1),
            ]
        )
    return I0, I1


# ---------------------------------------------------------------------------
# second oracle: 1-D radial integration with exact angular clipping
# ---------------------------------------------------------------------------

def _allowed_arcs(tri2, rho):
    """Angular set {theta : rho * e(theta) inside tri2} as disjoint
    intervals in [0, 2 pi], via half-plane arc clipping."""
    two_pi = 2 * np.pi
    allowed = [(0.0, two_pi)]
    for k in range(3):
        p = tri2[k]
        q = tri2[(k + 1) % 3]
        e = q - p
        # outward normal of the (CCW) triangle edge
        n = np.array([e[1], -e[0]])
        nl = np.linalg.norm(n)
        if nl == 0.0:
            continue
        n /= nl
        # orient outward: the remaining corner must be on the inner side
        r = tri2[(k + 2) % 3]
        if np.dot(n, r - p) > 0:
            n = -n
        h = np.dot(n, p)
        ratio = h / rho
        if ratio >= 1.0:
            continue                      # whole circle inside this half-plane
        if ratio <= -1.0:
            return []                     # whole circle excluded
        alpha = np.arctan2(n[1], n[0]) % two_pi
        beta = np.arccos(ratio)
        # excluded arc: (alpha - beta, alpha + beta)
        cut = [( (alpha - beta) % two_pi, (alpha + beta) % two_pi )]
        if cut[0][0] > cut[0][1]:
            cut = [(cut[0][0], two_pi), (0.0, cut[0][1])]
        new_allowed = []
        for s, t in allowed:
            pieces = [(s, t)]
            for cs, ct in cut:
                nxt = []
                for a, b in pieces:
                    lo, hi = max(a, cs), min(b, ct)
                    if hi <= lo:
                        nxt.append((a, b))
                    else:
                        if a < lo:
                            nxt.append((a, lo))
                        if hi < b:
                            nxt.append((hi, b))
                pieces = nxt
            new_allowed.extend(pieces)
        allowed = [iv for iv in new_allowed if iv[1] - iv[0] > 0.0]
        if not allowed:
            return []
    return allowed


def oracle_moments_angular(x, tri, breaks, coeffs, rel_tol=1e-12):
    """Independent oracle for the same moments as :func:`oracle_moments`,
    correct also for weights with jumps.

    Reduces the surface integral to 1-D radial integrals of
    w(R) * R * (angular measure of the circle of in-plane radius
    sqrt(R^2 - d^2) inside the triangle), with the angular set computed by
    half-plane clipping — a construction disjoint from the production
    fan/antiderivative machinery.
    """
    x = np.asarray(x, float)
    tri = np.asarray(tri, float)
    nc = coeffs.shape[0]
    I0 = np.zeros(nc)
    Mc = np.zeros(nc)
    Ms = np.zeros(nc)
    if coeffs.shape[1] == 0:
        return I0, np.zeros((nc, 3))
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    n /= np.linalg.norm(n)
    ds = np.dot(x - tri[0], n)
    d = abs(ds)
    x0 = x - ds * n
    e1 = tri[1] - tri[0]
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    tri2 = np.array([[(tri[k] - x0) @ e1, (tri[k] - x0) @ e2] for k in range(3)])

    def integrand(R):
        out0 = np.zeros((nc, len(R)))
        outc = np.zeros((nc, len(R)))
        outs = np.zeros((nc, len(R)))
        w = eval_radial(breaks, coeffs, R)
        for idx, r in enumerate(R):
            rho2 = r * r - d * d
            if rho2 <= 0:
                continue
            rho = np.sqrt(rho2)
            arcs = _allowed_arcs(tri2, rho)
            if not arcs:
                continue
            theta = sum(t - s for s, t in arcs)
            cx = sum(np.sin(t) - np.sin(s) for s, t in arcs)
            cy = sum(np.cos(s) - np.cos(t) for s, t in arcs)
            out0[:, idx] = w[:, idx] * r * theta
            outc[:, idx] = w[:, idx] * r * rho * cx
            outs[:, idx] = w[:, idx] * r * rho * cy
        return out0, outc, outs

    gx, gw = np.polynomial.legendre.leggauss(20)

    def gauss(a, b):
        R = 0.5 * (a + b) + 0.5 * (b - a) * gx
        o0, oc, os_ = integrand(R)
        f = 0.5 * (b - a)
        return o0 @ gw * f, oc @ gw * f, os_ @ gw * f

    def adaptive(a, b, whole, depth, scale):
        mid = 0.5 * (a + b)
        left = gauss(a, mid)
        right = gauss(mid, b)
        err = max(
            np.abs(left[j] + right[j] - whole[j]).max() for j in range(3)
        )
        if err < rel_tol * scale or depth > 40 or b - a < 1e-14 * scale_r:
            return tuple(left[j] + right[j] for j in range(3))
        lo = adaptive(a, mid, left, depth + 1, scale)
        hi = adaptive(mid, b, right, depth + 1, scale)
        return tuple(lo[j] + hi[j] for j in range(3))

    # split radii: breakpoints plus geometric kink radii (corner distances
    # and line distances, combined with the height d)
    kinks = set(breaks.tolist())
    for k in range(3):
        kinks.add(float(np.hypot(np.linalg.norm(tri2[k]), d)))
        p = tri2[k]
        q = tri2[(k + 1) % 3]
        e = q - p
        l2 = e @ e
        if l2 > 0:
            h = abs(p[0] * q[1] - p[1] * q[0]) / np.sqrt(l2)
            kinks.add(float(np.hypot(h, d)))
    kinks.add(d)
    lo_r = max(float(breaks[0]), d)
    hi_r = float(breaks[-1])
    rmax_tri = max(np.hypot(np.linalg.norm(tri2[k]), d) for k in range(3))
    hi_r = min(hi_r, rmax_tri)
    scale_r = max(hi_r, 1.0)
    cuts = sorted({lo_r, hi_r} | {k for k in kinks if lo_r < k < hi_r})
    if hi_r <= lo_r:
        return I0, np.tile(x0, (nc, 1)) * I0[:, None]
    # scale for the absolute-versus-relative error switch
    probe = gauss(lo_r, hi_r)
    scale = max(np.abs(probe[0]).max(), 1e-300)
    for a, b in zip(cuts[:-1], cuts[1:]):
        whole = gauss(a, b)
        r0, rc, rs = adaptive(a, b, whole, 0, scale)
        I0 += r0
        Mc += rc
        Ms += rs
    I1 = x0[None, :] * I0[:, None] + e1[None, :] * Mc[:, None] + e2[None, :] * Ms[:, None]
    return I0, I1
