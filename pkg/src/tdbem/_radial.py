"""Semi-analytic integration of piecewise-Laurent radial kernels (numba).

Inner integrals over a source triangle of  w(|x-y|) * {1, y}  with w a
piecewise Laurent polynomial in R (powers R^-3..R^2, slot q <-> R^(q-3))
are reduced to a 1-D angular integral:

* project x onto the source plane (height d, foot x0);
* split the triangle into three signed fans (x0, corner_k, corner_{k+1});
* per fan, integrate radially in closed form using antiderivative tables
  A_m = int R^m dR and B_m = int R^m sqrt(R^2 - d^2) dR (the sqrt is the
  in-plane radius, R the true distance);
* split the angular range at the critical angles where a breakpoint
  sphere R = r_j crosses the fan's chord, so every angular sub-segment
  is smooth, then apply Gauss-Legendre per sub-segment.

Double-layer kernels (R^-3 / R^-2 powers) need special handling when x
lies (numerically) in the source plane:

* parallel test/source planes: the moment vector is normal to the plane
  and is annihilated by the in-plane test function -> contribution zero;
* non-parallel planes (x0 necessarily outside the triangle): 1-D adaptive
  radial quadrature with exact angular clipping of the circle against the
  triangle's half-planes.
"""

import numpy as np
from numba import njit, prange

_PI = np.pi
_TWO_PI = 2.0 * np.pi

# Gauss-Kronrod 7/15 pair: one 15-node evaluation yields the estimate
# (Kronrod weights) and an embedded error reference (Gauss weights).
_GK_POS = np.array(
    [
        0.991455371120813,
        0.949107912342759,
        0.864864423359769,
        0.741531185599394,
        0.586087235467691,
        0.405845151377397,
        0.207784955007898,
    ]
)
_GK_X = np.concatenate([-_GK_POS, [0.0], _GK_POS[::-1]])
_GK_WPOS = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
    ]
)
_GK_W = np.concatenate([_GK_WPOS, [0.209482141084728], _GK_WPOS[::-1]])
_G7_WPOS = np.array(
    [0.129484966168870, 0.279705391489277, 0.381830050505119]
)
_G7_W = np.zeros(15)
_G7_W[[1, 3, 5]] = _G7_WPOS
_G7_W[7] = 0.417959183673469
_G7_W[[9, 11, 13]] = _G7_WPOS[::-1]

@njit(cache=True)
def _fill_antider(R, d, FA, FB):
    """Antiderivative values at R: FA[q] = A_{q-2}(R), FB[q] = B_{q-2}(R)."""
    if R <= 0.0:
        for q in range(6):
            FA[q] = 0.0
            FB[q] = 0.0
        return
    d2 = d * d
    u2 = R * R - d2
    u = np.sqrt(u2) if u2 > 0.0 else 0.0
    lr = np.log(R + u)
    dln = d2 * lr
    FA[0] = -1.0 / R
    FA[1] = np.log(R)
    FA[2] = R
    FA[3] = 0.5 * R * R
    FA[4] = R * R * R / 3.0
    FA[5] = 0.25 * R * R * R * R
    ratio = d / R
    if ratio > 1.0:
        ratio = 1.0
    FB[0] = -u / R + lr
    FB[1] = u - d * np.arccos(ratio)
    FB[2] = 0.5 * (R * u - dln)
    FB[3] = u * u * u / 3.0
    FB[4] = 0.25 * R * u * u * u + 0.125 * d2 * (R * u - dln)
    FB[5] = u ** 5 / 5.0 + d2 * u ** 3 / 3.0


@njit(cache=True)
def _eval_laurent(breaks, coeffs, c, R):
    """w_c(R) by linear scan over the pieces."""
    n_p = coeffs.shape[1]
    for j in range(n_p):
        if breaks[j] < R <= breaks[j + 1]:
            val = 0.0
            for q in range(5, -1, -1):
                val = val * R + coeffs[c, j, q]
            return val / (R * R * R)
    return 0.0


@njit(cache=True)
def _subtract_arc(arcs, n_arcs, cs, ce, tmp):
    """Remove [cs, ce] from a disjoint arc list (no wrap-around inputs)."""
    m = 0
    for i in range(n_arcs):
        a = arcs[i, 0]
        b = arcs[i, 1]
        lo = a if a > cs else cs
        hi = b if b < ce else ce
        if hi <= lo:
            tmp[m, 0] = a
            tmp[m, 1] = b
            m += 1
        else:
            if a < lo:
                tmp[m, 0] = a
                tmp[m, 1] = lo
                m += 1
            if hi < b:
                tmp[m, 0] = hi
                tmp[m, 1] = b
                m += 1
    for i in range(m):
        arcs[i, 0] = tmp[i, 0]
        arcs[i, 1] = tmp[i, 1]
    return m


@njit(cache=True)
def _inside_arcs(A2, rho, arcs, tmp):
    """Angular set where the circle of radius rho (around the origin of the
    2-D frame) lies inside the triangle A2; returns the arc count."""
    n_arcs = 1
    arcs[0, 0] = 0.0
    arcs[0, 1] = _TWO_PI
    for k in range(3):
        px, py = A2[k, 0], A2[k, 1]
        qx, qy = A2[(k + 1) % 3, 0], A2[(k + 1) % 3, 1]
        ex, ey = qx - px, qy - py
        nl = np.sqrt(ex * ex + ey * ey)
        if nl == 0.0:
            continue
        nx = ey / nl
        ny = -ex / nl
        rx = A2[(k + 2) % 3, 0] - px
        ry = A2[(k + 2) % 3, 1] - py
        if nx * rx + ny * ry > 0.0:
            nx = -nx
            ny = -ny
        h = nx * px + ny * py
        ratio = h / rho
        if ratio >= 1.0:
            continue
        if ratio <= -1.0:
            return 0
        alpha = np.arctan2(ny, nx) % _TWO_PI
        beta = np.arccos(ratio)
        cs = (alpha - beta) % _TWO_PI
        ce = (alpha + beta) % _TWO_PI
        if cs <= ce:
            n_arcs = _subtract_arc(arcs, n_arcs, cs, ce, tmp)
        else:
            n_arcs = _subtract_arc(arcs, n_arcs, cs, _TWO_PI, tmp)
            n_arcs = _subtract_arc(arcs, n_arcs, 0.0, ce, tmp)
        if n_arcs == 0:
            return 0
    return n_arcs


@njit(cache=True)
def _ang_panel(A2, d, a, b, breaks, coeffs, kinds, gx, gw, arcs, tmp, out):
    """Radial Gauss panel [a, b] of the angular-clipping reduction for DL
    components; out[c] accumulates (I0, Mcos, Msin)."""
    nc = coeffs.shape[0]
    for c in range(nc):
        out[c, 0] = 0.0
        out[c, 1] = 0.0
        out[c, 2] = 0.0
    for g in range(len(gx)):
        R = 0.5 * (a + b) + 0.5 * (b - a) * gx[g]
        jac = 0.5 * (b - a) * gw[g]
        rho2 = R * R - d * d
        if rho2 <= 0.0:
            continue
        rho = np.sqrt(rho2)
        n_arcs = _inside_arcs(A2, rho, arcs, tmp)
        if n_arcs == 0:
            continue
        theta = 0.0
        cx = 0.0
        cy = 0.0
        for i in range(n_arcs):
            s = arcs[i, 0]
            t = arcs[i, 1]
            theta += t - s
            cx += np.sin(t) - np.sin(s)
            cy += np.cos(s) - np.cos(t)
        for c in range(nc):
            if kinds[c] != 1:
                continue
            w = _eval_laurent(breaks, coeffs, c, R)
            if w != 0.0:
                out[c, 0] += jac * w * R * theta
                out[c, 1] += jac * w * R * rho * cx
                out[c, 2] += jac * w * R * rho * cy


@njit(cache=True)
def _angular_dl_moments(
    x0, u1, u2, A2, d, breaks, coeffs, kinds, gx, gw,
    panW, panL, panR, stack, I0, I1,
):
    """Near-plane DL fallback: 1-D adaptive radial integration with exact
    angular clipping (handles weight jumps at breakpoint spheres exactly)."""
    nc = coeffs.shape[0]
    n_p = coeffs.shape[1]
    arcs = np.empty((16, 2))
    tmp = np.empty((16, 2))
    cuts = np.empty(n_p + 8)
    nct = 0
    for j in range(n_p + 1):
        cuts[nct] = breaks[j]
        nct += 1
    rmax_tri = 0.0
    for k in range(3):
        rr = np.sqrt(A2[k, 0] ** 2 + A2[k, 1] ** 2 + d * d)
        if rr > rmax_tri:
            rmax_tri = rr
        cuts[nct] = rr
        nct += 1
        px, py = A2[k, 0], A2[k, 1]
        qx, qy = A2[(k + 1) % 3, 0], A2[(k + 1) % 3, 1]
        l2 = (qx - px) ** 2 + (qy - py) ** 2
        if l2 > 0.0:
            h = abs(px * qy - py * qx) / np.sqrt(l2)
            cuts[nct] = np.sqrt(h * h + d * d)
            nct += 1
    cuts[nct] = d
    nct += 1
    for a_i in range(1, nct):
        key = cuts[a_i]
        b_i = a_i - 1
        while b_i >= 0 and cuts[b_i] > key:
            cuts[b_i + 1] = cuts[b_i]
            b_i -= 1
        cuts[b_i + 1] = key
    lo_all = breaks[0] if breaks[0] > d else d
    hi_all = breaks[n_p] if breaks[n_p] < rmax_tri else rmax_tri
    acc0 = np.zeros(nc)
    accc = np.zeros(nc)
    accs = np.zeros(nc)
    for m in range(nct - 1):
        a0 = cuts[m]
        b0 = cuts[m + 1]
        if a0 < lo_all:
            a0 = lo_all
        if b0 > hi_all:
            b0 = hi_all
        if b0 - a0 < 1e-15 * (hi_all + 1e-300):
            continue
        min_len = (b0 - a0) * 2.0 ** -14
        sp = 0
        stack[sp, 0] = a0
        stack[sp, 1] = b0
        sp += 1
        while sp > 0:
            sp -= 1
            a = stack[sp, 0]
            b = stack[sp, 1]
            _ang_panel(A2, d, a, b, breaks, coeffs, kinds, gx, gw, arcs, tmp, panW)
            mid = 0.5 * (a + b)
            _ang_panel(A2, d, a, mid, breaks, coeffs, kinds, gx, gw, arcs, tmp, panL)
            _ang_panel(A2, d, mid, b, breaks, coeffs, kinds, gx, gw, arcs, tmp, panR)
            err = 0.0
            scl = 1e-300
            for c in range(nc):
                for j3 in range(3):
                    ref = panL[c, j3] + panR[c, j3]
                    e = abs(ref - panW[c, j3])
                    if e > err:
                        err = e
                    scl += abs(panL[c, j3]) + abs(panR[c, j3])
            if err <= 1e-13 * scl or b - a < min_len or sp > len(stack) - 3:
                for c in range(nc):
                    acc0[c] += panL[c, 0] + panR[c, 0]
                    accc[c] += panL[c, 1] + panR[c, 1]
                    accs[c] += panL[c, 2] + panR[c, 2]
            else:
                stack[sp, 0] = a
                stack[sp, 1] = mid
                sp += 1
                stack[sp, 0] = mid
                stack[sp, 1] = b
                sp += 1
    for c in range(nc):
        if kinds[c] != 1:
            continue
        I0[c] = acc0[c]
        for dd in range(3):
            I1[c, dd] = x0[dd] * acc0[c] + u1[dd] * accc[c] + u2[dd] * accs[c]


@njit(cache=True)
def _theta_panel_gk(
    tha, delta, phi, p, d, t0, t1,
    breaks, coeffs, kinds, dl_skip,
    FAh, FBh, FAl, FBl, nodeV, outK, outG,
):
    """Gauss-Kronrod 7/15 panel over the angular sub-interval [t0, t1]
    (t parametrizes theta = tha + t * delta).  outK[c] gets the Kronrod
    estimate of (I0, Mcos, Msin), outG the embedded Gauss estimate.
    Antiderivative tables at shared piece boundaries are filled once per
    node."""
    nc = coeffs.shape[0]
    n_p = coeffs.shape[1]
    for c in range(nc):
        for j3 in range(3):
            outK[c, j3] = 0.0
            outG[c, j3] = 0.0
    half = 0.5 * (t1 - t0) * delta
    for g in range(15):
        tg = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * _GK_X[g]
        th = tha + tg * delta
        cth = np.cos(th)
        sth = np.sin(th)
        cdp = np.cos(th - phi)
        rho = p / cdp
        rmax = np.sqrt(rho * rho + d * d)
        for c in range(nc):
            nodeV[c, 0] = 0.0
            nodeV[c, 1] = 0.0
            nodeV[c, 2] = 0.0
        fresh = True
        for j in range(n_p):
            lo = breaks[j]
            hi = breaks[j + 1]
            if lo < d:
                lo = d
                fresh = True
            if hi > rmax:
                hi = rmax
            if hi <= lo:
                fresh = True
                continue
            if fresh:
                _fill_antider(lo, d, FAl, FBl)
            else:
                for q in range(6):
                    FAl[q] = FAh[q]
                    FBl[q] = FBh[q]
            _fill_antider(hi, d, FAh, FBh)
            fresh = hi != breaks[j + 1]
            for c in range(nc):
                if kinds[c] == 1 and dl_skip:
                    continue
                i0 = 0.0
                mb = 0.0
                for q in range(6):
                    cq = coeffs[c, j, q]
                    if cq != 0.0:
                        i0 += cq * (FAh[q] - FAl[q])
                        mb += cq * (FBh[q] - FBl[q])
                nodeV[c, 0] += i0
                nodeV[c, 1] += cth * mb
                nodeV[c, 2] += sth * mb
        wk = half * _GK_W[g]
        wg7 = half * _G7_W[g]
        for c in range(nc):
            for j3 in range(3):
                outK[c, j3] += wk * nodeV[c, j3]
                if wg7 != 0.0:
                    outG[c, j3] += wg7 * nodeV[c, j3]


@njit(cache=True)
def pair_moments(
    x, n_test, tri, breaks, coeffs, kinds, gx, gw, d_thresh, I0, I1,
    FAh, FBh, FAl, FBl, Mc, Ms, tcrit, panW, panL, panR, stack,
):
    """Moments I0_c = int w_c dA_y, I1_c = int w_c y dA_y over triangle."""
    nc = coeffs.shape[0]
    n_p = coeffs.shape[1]
    for c in range(nc):
        I0[c] = 0.0
        Mc[c] = 0.0
        Ms[c] = 0.0
        I1[c, 0] = 0.0
        I1[c, 1] = 0.0
        I1[c, 2] = 0.0
    if n_p == 0:
        return
    e01 = tri[1] - tri[0]
    e02 = tri[2] - tri[0]
    nx = e01[1] * e02[2] - e01[2] * e02[1]
    ny = e01[2] * e02[0] - e01[0] * e02[2]
    nz = e01[0] * e02[1] - e01[1] * e02[0]
    nl = np.sqrt(nx * nx + ny * ny + nz * nz)
    nx /= nl
    ny /= nl
    nz /= nl
    ds = (x[0] - tri[0, 0]) * nx + (x[1] - tri[0, 1]) * ny + (x[2] - tri[0, 2]) * nz
    d = abs(ds)
    x0 = np.empty(3)
    x0[0] = x[0] - ds * nx
    x0[1] = x[1] - ds * ny
    x0[2] = x[2] - ds * nz
    l01 = np.sqrt(e01[0] ** 2 + e01[1] ** 2 + e01[2] ** 2)
    u1 = e01 / l01
    u2 = np.empty(3)
    u2[0] = ny * u1[2] - nz * u1[1]
    u2[1] = nz * u1[0] - nx * u1[2]
    u2[2] = nx * u1[1] - ny * u1[0]
    A2 = np.empty((3, 2))
    for k in range(3):
        wx = tri[k, 0] - x0[0]
        wy = tri[k, 1] - x0[1]
        wz = tri[k, 2] - x0[2]
        A2[k, 0] = wx * u1[0] + wy * u1[1] + wz * u1[2]
        A2[k, 1] = wx * u2[0] + wy * u2[1] + wz * u2[2]
    has_dl = False
    for c in range(nc):
        if kinds[c] == 1:
            has_dl = True
    dl_mode = 0
    if has_dl and d < d_thresh:
        cpx = n_test[1] * nz - n_test[2] * ny
        cpy = n_test[2] * nx - n_test[0] * nz
        cpz = n_test[0] * ny - n_test[1] * nx
        if cpx * cpx + cpy * cpy + cpz * cpz < 1e-18:
            dl_mode = 1      # parallel planes: DL contribution annihilated
        else:
            dl_mode = 2      # rare: genuine near-plane pair, direct quad
    nb = len(breaks)
    for k in range(3):
        px, py = A2[k, 0], A2[k, 1]
        qx, qy = A2[(k + 1) % 3, 0], A2[(k + 1) % 3, 1]
        cr = px * qy - py * qx
        scale2 = px * px + py * py + qx * qx + qy * qy + 1e-300
        if abs(cr) < 1e-14 * scale2:
            continue
        tha = np.arctan2(py, px)
        thb = np.arctan2(qy, qx)
        delta = thb - tha
        if delta > _PI:
            delta -= _TWO_PI
        elif delta < -_PI:
            delta += _TWO_PI
        ex, ey = qx - px, qy - py
        l2 = ex * ex + ey * ey
        p = abs(cr) / np.sqrt(l2)
        tf = -(px * ex + py * ey) / l2
        fx, fy = px + tf * ex, py + tf * ey
        phi = np.arctan2(fy, fx)
        ntc = 0
        tcrit[ntc] = 0.0
        ntc += 1
        rmin_seg = np.sqrt(p * p + d * d)
        for j in range(nb):
            rj = breaks[j]
            if rj <= rmin_seg:
                continue
            rho2 = rj * rj - d * d
            ratio = p / np.sqrt(rho2)
            if ratio > 1.0:
                ratio = 1.0
            dth = np.arccos(ratio)
            for sgn in range(-1, 2, 2):
                thc = phi + sgn * dth
                for shift in range(-1, 2):
                    t = (thc + shift * _TWO_PI - tha) / delta
                    if 1e-12 < t < 1.0 - 1e-12:
                        tcrit[ntc] = t
                        ntc += 1
        tcrit[ntc] = 1.0
        ntc += 1
        # insertion sort of tcrit[:ntc]
        for a in range(1, ntc):
            key = tcrit[a]
            b = a - 1
            while b >= 0 and tcrit[b] > key:
                tcrit[b + 1] = tcrit[b]
                b -= 1
            tcrit[b + 1] = key
        dl_skip = dl_mode != 0
        for seg in range(ntc - 1):
            ts0 = tcrit[seg]
            ts1 = tcrit[seg + 1]
            if ts1 - ts0 < 1e-14:
                continue
            min_len = (ts1 - ts0) * 2.0 ** -12
            sp = 0
            stack[sp, 0] = ts0
            stack[sp, 1] = ts1
            sp += 1
            while sp > 0:
                sp -= 1
                a = stack[sp, 0]
                b = stack[sp, 1]
                _theta_panel_gk(
                    tha, delta, phi, p, d, a, b, breaks, coeffs, kinds,
                    dl_skip, FAh, FBh, FAl, FBl, panW, panL, panR,
                )
                err = 0.0
                scl = 1e-300
                for c in range(nc):
                    for comp3 in range(3):
                        e1c = abs(panL[c, comp3] - panR[c, comp3])
                        if e1c > err:
                            err = e1c
                        scl += abs(panL[c, comp3])
                if err <= 1e-12 * scl or b - a < min_len or sp > len(stack) - 3:
                    for c in range(nc):
                        I0[c] += panL[c, 0]
                        Mc[c] += panL[c, 1]
                        Ms[c] += panL[c, 2]
                else:
                    mid = 0.5 * (a + b)
                    stack[sp, 0] = a
                    stack[sp, 1] = mid
                    sp += 1
                    stack[sp, 0] = mid
                    stack[sp, 1] = b
                    sp += 1
    for c in range(nc):
        for dd in range(3):
            I1[c, dd] = x0[dd] * I0[c] + u1[dd] * Mc[c] + u2[dd] * Ms[c]
    if dl_mode == 2:
        _angular_dl_moments(
            x0, u1, u2, A2, d, breaks, coeffs, kinds, gx, gw,
            panW, panL, panR, stack, I0, I1,
        )


@njit(cache=True)
def _pair_block(
    xs, ws, npts,
    area_t, n_t, opp_t_f, signs_t_f,
    tri_s, area_s, opp_s_f, signs_s_f,
    breaks, coeffs, kinds,
    seg_gx, seg_gw, d_thresh,
    I0, I1, FAh, FBh, FAl, FBl, McA, MsA, tcrit, panW, panL, panR, stk,
    blk,
):
    """Accumulate the 3x3 local interaction block of one test/source face
    pair from a list of outer points xs with absolute weights ws (area
    jacobian included).  blk[m_loc, n_loc] is accumulated, not reset."""
    nc = coeffs.shape[0]
    for g in range(npts):
        x = xs[g]
        wt = ws[g]
        pair_moments(
            x, n_t, tri_s, breaks, coeffs, kinds, seg_gx, seg_gw,
            d_thresh, I0, I1, FAh, FBh, FAl, FBl, McA, MsA, tcrit,
            panW, panL, panR, stk,
        )
        for n_loc in range(3):
            kn = signs_s_f[n_loc] / (2.0 * area_s)
            dn = signs_s_f[n_loc] / area_s
            for c in range(nc):
                kc = kinds[c]
                if kc == 2:
                    val = dn * I0[c]
                    for m in range(3):
                        dm = signs_t_f[m] / area_t
                        blk[m, n_loc] += wt * dm * val
                else:
                    if kc == 0:
                        vv0 = kn * (I1[c, 0] - I0[c] * opp_s_f[n_loc, 0])
                        vv1 = kn * (I1[c, 1] - I0[c] * opp_s_f[n_loc, 1])
                        vv2 = kn * (I1[c, 2] - I0[c] * opp_s_f[n_loc, 2])
                    else:
                        wx = I0[c] * x[0] - I1[c, 0]
                        wy = I0[c] * x[1] - I1[c, 1]
                        wz = I0[c] * x[2] - I1[c, 2]
                        ax = x[0] - opp_s_f[n_loc, 0]
                        ay = x[1] - opp_s_f[n_loc, 1]
                        az = x[2] - opp_s_f[n_loc, 2]
                        vv0 = kn * (wy * az - wz * ay)
                        vv1 = kn * (wz * ax - wx * az)
                        vv2 = kn * (wx * ay - wy * ax)
                    for m in range(3):
                        sm = signs_t_f[m] / (2.0 * area_t)
                        blk[m, n_loc] += wt * sm * (
                            (x[0] - opp_t_f[m, 0]) * vv0
                            + (x[1] - opp_t_f[m, 1]) * vv1
                            + (x[2] - opp_t_f[m, 2]) * vv2
                        )


@njit(cache=True)
def _table_pair_block(
    tab, pt, ps,
    corners_t_f, corners_s_f, area_t, area_s,
    opp_t_f, signs_t_f, opp_s_f, signs_s_f,
    breaks, coeffs, kinds, skip_dl,
    blk,
):
    """Accumulate the 3x3 local block of one touching test/source pair
    from a precomputed regularized 4-D quadrature table.

    tab rows are (weight, barycentric x 0..2, barycentric y 0..2) with
    respect to feature-ordered corners; pt / ps map table corner k to the
    original local corner pt[k] / ps[k] of the test / source face (shared
    vertices first, in the same order on both).  Weights sum to 1/4 and
    are scaled here by (2 area_t)(2 area_s).

    skip_dl = 1 drops double-layer components: for an identical (planar)
    pair the rotated-test double-layer integrand vanishes pointwise, and
    the transform would otherwise integrate exact noise at cost."""
    nc = coeffs.shape[0]
    nrow = tab.shape[0]
    wscale = 4.0 * area_t * area_s
    x = np.empty(3)
    y = np.empty(3)
    fn = np.empty(3)
    vv = np.empty(3)
    for r in range(nrow):
        for dd in range(3):
            x[dd] = (
                tab[r, 1] * corners_t_f[pt[0], dd]
                + tab[r, 2] * corners_t_f[pt[1], dd]
                + tab[r, 3] * corners_t_f[pt[2], dd]
            )
            y[dd] = (
                tab[r, 4] * corners_s_f[ps[0], dd]
                + tab[r, 5] * corners_s_f[ps[1], dd]
                + tab[r, 6] * corners_s_f[ps[2], dd]
            )
        rx = x[0] - y[0]
        ry = x[1] - y[1]
        rz = x[2] - y[2]
        R = np.sqrt(rx * rx + ry * ry + rz * rz)
        if R <= 0.0:
            continue
        wt = tab[r, 0] * wscale
        for c in range(nc):
            kc = kinds[c]
            if skip_dl == 1 and kc == 1:
                continue
            w = _eval_laurent(breaks, coeffs, c, R)
            if w == 0.0:
                continue
            w *= wt
            if kc == 2:
                for n_loc in range(3):
                    dn = signs_s_f[n_loc] / area_s
                    for m in range(3):
                        dm = signs_t_f[m] / area_t
                        blk[m, n_loc] += w * dm * dn
            else:
                for n_loc in range(3):
                    kn = signs_s_f[n_loc] / (2.0 * area_s)
                    for dd in range(3):
                        fn[dd] = kn * (y[dd] - opp_s_f[n_loc, dd])
                    if kc == 0:
                        vv[0] = fn[0]
                        vv[1] = fn[1]
                        vv[2] = fn[2]
                    else:
                        vv[0] = ry * fn[2] - rz * fn[1]
                        vv[1] = rz * fn[0] - rx * fn[2]
                        vv[2] = rx * fn[1] - ry * fn[0]
                    for m in range(3):
                        sm = signs_t_f[m] / (2.0 * area_t)
                        blk[m, n_loc] += w * sm * (
                            (x[0] - opp_t_f[m, 0]) * vv[0]
                            + (x[1] - opp_t_f[m, 1]) * vv[1]
                            + (x[2] - opp_t_f[m, 2]) * vv[2]
                        )


@njit(cache=True)
def _pts_fixed_tri(c0, c1, c2, bary, bw, xs, ws):
    """Fixed symmetric rule on an arbitrary (sub-)triangle."""
    cx = (c1[1] - c0[1]) * (c2[2] - c0[2]) - (c1[2] - c0[2]) * (c2[1] - c0[1])
    cy = (c1[2] - c0[2]) * (c2[0] - c0[0]) - (c1[0] - c0[0]) * (c2[2] - c0[2])
    cz = (c1[0] - c0[0]) * (c2[1] - c0[1]) - (c1[1] - c0[1]) * (c2[0] - c0[0])
    area = 0.5 * np.sqrt(cx * cx + cy * cy + cz * cz)
    for g in range(len(bw)):
        for dd in range(3):
            xs[g, dd] = bary[g, 0] * c0[dd] + bary[g, 1] * c1[dd] + bary[g, 2] * c2[dd]
        ws[g] = bw[g] * area
    return len(bw)


@njit(cache=True)
def _adaptive_pair(
    tri_t,
    area_t, n_t, opp_t_f, signs_t_f,
    tri_s, area_s, opp_s_f, signs_s_f,
    breaks, coeffs, kinds,
    seg_gx, seg_gw, d_thresh,
    I0, I1, FAh, FBh, FAl, FBl, McA, MsA, tcrit, panW, panL, panR, stk,
    bary, bw, tol,
    xs, ws, tstack, blk,
):
    """Tolerance-driven 4-way bisection of the outer (test) triangle for a
    non-touching pair; each cell estimate uses the fixed rule (bary, bw)
    and the semi-analytic inner integral.  Accepts a cell when the parent
    vs children discrepancy is below tol * (pair scale) * (area fraction)."""
    cap = tstack.shape[0]
    eP = np.zeros((3, 3))
    n0 = _pts_fixed_tri(tri_t[0], tri_t[1], tri_t[2], bary, bw, xs, ws)
    _pair_block(
        xs, ws, n0, area_t, n_t, opp_t_f, signs_t_f,
        tri_s, area_s, opp_s_f, signs_s_f, breaks, coeffs, kinds,
        seg_gx, seg_gw, d_thresh, I0, I1, FAh, FBh, FAl, FBl,
        McA, MsA, tcrit, panW, panL, panR, stk, eP,
    )
    scl = 1e-300
    for m in range(3):
        for n in range(3):
            scl += abs(eP[m, n])
    tstack[0, 0] = tri_t[0, 0]
    tstack[0, 1] = tri_t[0, 1]
    tstack[0, 2] = tri_t[0, 2]
    tstack[0, 3] = tri_t[1, 0]
    tstack[0, 4] = tri_t[1, 1]
    tstack[0, 5] = tri_t[1, 2]
    tstack[0, 6] = tri_t[2, 0]
    tstack[0, 7] = tri_t[2, 1]
    tstack[0, 8] = tri_t[2, 2]
    for m in range(3):
        for n in range(3):
            tstack[0, 9 + 3 * m + n] = eP[m, n]
    sp = 1
    P = np.empty((3, 3))
    M = np.empty((3, 3))
    ct3 = np.empty((3, 3))
    esum = np.empty((3, 3))
    ech = np.empty((4, 3, 3))
    while sp > 0:
        sp -= 1
        for k in range(3):
            for dd in range(3):
                P[k, dd] = tstack[sp, 3 * k + dd]
        for k in range(3):
            for dd in range(3):
                M[k, dd] = 0.5 * (P[k, dd] + P[(k + 1) % 3, dd])
        for m in range(3):
            for n in range(3):
                esum[m, n] = 0.0
        for ch in range(4):
            if ch == 0:
                for dd in range(3):
                    ct3[0, dd] = P[0, dd]
                    ct3[1, dd] = M[0, dd]
                    ct3[2, dd] = M[2, dd]
            elif ch == 1:
                for dd in range(3):
                    ct3[0, dd] = M[0, dd]
                    ct3[1, dd] = P[1, dd]
                    ct3[2, dd] = M[1, dd]
            elif ch == 2:
                for dd in range(3):
                    ct3[0, dd] = M[2, dd]
                    ct3[1, dd] = M[1, dd]
                    ct3[2, dd] = P[2, dd]
            else:
                for dd in range(3):
                    ct3[0, dd] = M[0, dd]
                    ct3[1, dd] = M[1, dd]
                    ct3[2, dd] = M[2, dd]
            for m in range(3):
                for n in range(3):
                    ech[ch, m, n] = 0.0
            nch = _pts_fixed_tri(ct3[0], ct3[1], ct3[2], bary, bw, xs, ws)
            _pair_block(
                xs, ws, nch, area_t, n_t, opp_t_f, signs_t_f,
                tri_s, area_s, opp_s_f, signs_s_f, breaks, coeffs, kinds,
                seg_gx, seg_gw, d_thresh, I0, I1, FAh, FBh, FAl, FBl,
                McA, MsA, tcrit, panW, panL, panR, stk, ech[ch],
            )
            for m in range(3):
                for n in range(3):
                    esum[m, n] += ech[ch, m, n]
        diff = 0.0
        for m in range(3):
            for n in range(3):
                e = abs(tstack[sp, 9 + 3 * m + n] - esum[m, n])
                if e > diff:
                    diff = e
        cx = (P[1, 1] - P[0, 1]) * (P[2, 2] - P[0, 2]) - (P[1, 2] - P[0, 2]) * (
            P[2, 1] - P[0, 1]
        )
        cy = (P[1, 2] - P[0, 2]) * (P[2, 0] - P[0, 0]) - (P[1, 0] - P[0, 0]) * (
            P[2, 2] - P[0, 2]
        )
        cz = (P[1, 0] - P[0, 0]) * (P[2, 1] - P[0, 1]) - (P[1, 1] - P[0, 1]) * (
            P[2, 0] - P[0, 0]
        )
        frac = 0.5 * np.sqrt(cx * cx + cy * cy + cz * cz) / area_t
        if diff <= tol * scl * frac or frac < 2.0 ** -20 or sp > cap - 6:
            for m in range(3):
                for n in range(3):
                    blk[m, n] += esum[m, n]
        else:
            for ch in range(4):
                if ch == 0:
                    for dd in range(3):
                        tstack[sp, 0 + dd] = P[0, dd]
                        tstack[sp, 3 + dd] = M[0, dd]
                        tstack[sp, 6 + dd] = M[2, dd]
                elif ch == 1:
                    for dd in range(3):
                        tstack[sp, 0 + dd] = M[0, dd]
                        tstack[sp, 3 + dd] = P[1, dd]
                        tstack[sp, 6 + dd] = M[1, dd]
                elif ch == 2:
                    for dd in range(3):
                        tstack[sp, 0 + dd] = M[2, dd]
                        tstack[sp, 3 + dd] = M[1, dd]
                        tstack[sp, 6 + dd] = P[2, dd]
                else:
                    for dd in range(3):
                        tstack[sp, 0 + dd] = M[0, dd]
                        tstack[sp, 3 + dd] = M[1, dd]
                        tstack[sp, 6 + dd] = M[2, dd]
                for m in range(3):
                    for n in range(3):
                        tstack[sp, 9 + 3 * m + n] = ech[ch, m, n]
                sp += 1


def moments(x, n_test, tri, breaks, coeffs, kinds, seg_gauss=16, d_thresh=0.0):
    """Convenience wrapper around :func:`pair_moments` (allocates scratch)."""
    nc = coeffs.shape[0]
    I0 = np.empty(nc)
    I1 = np.empty((nc, 3))
    gx, gw = np.polynomial.legendre.leggauss(seg_gauss)
    pair_moments(
        np.asarray(x, float), np.asarray(n_test, float),
        np.ascontiguousarray(tri, dtype=float),
        breaks, coeffs, kinds, gx, gw, d_thresh, I0, I1,
        np.empty(6), np.empty(6), np.empty(6), np.empty(6),
        np.empty(nc), np.empty(nc), np.empty(2 * len(breaks) + 2),
        np.empty((nc, 3)), np.empty((nc, 3)), np.empty((nc, 3)),
        np.empty((64, 2)),
    )
    return I0, I1


@njit(cache=True, parallel=True)
def assemble_block_chunk(
    test_faces,
    corners_t, areas_t, normals_t, opp_t, signs_t,
    corners_s, areas_s, normals_s, opp_s, signs_s, edges_s,
    cen_s, rad_s,
    outer_b, outer_w,
    breaks, coeffs, kinds,
    seg_gx, seg_gw,
    d_thresh,
    far_dist,
    inner_b, inner_w,
    tris_t, tris_s, same_mesh, near_mode, adapt_tol, adapt_far,
    tab_id, tab_ed, tab_vx, bary_a, w_a,
    out,
):
    """Accumulate one chunk of test faces into out (n_chunk, 3, N_e_src).

    out[it, m_loc, e_src] is the contribution of this chunk's test face to
    the matrix row of its m_loc-th local basis function.  SL and DL
    components pair with the vector basis value at the outer point; HYP
    components pair with the surface divergences.

    near_mode selects the outer (test-side) integration for kernels whose
    outer integrand is singular only where the faces touch (static or
    saturated-tail kernels, no breakpoint spheres crossing near pairs):
      0 - fixed outer rule everywhere (retarded default);
      1 - touching pairs (identical / shared edge / shared vertex) via the
          regularized 4-D tables tab_id / tab_ed / tab_vx, fixed rule
          elsewhere;
      2 - additionally, non-touching pairs closer than
          adapt_far * (R_test + R_src) (circumscribed-radius sum) via
          tolerance-driven adaptive outer bisection (adapt_tol, per-pair
          relative).
    """
    n_chunk = len(test_faces)
    nf_s = corners_s.shape[0]
    nc = coeffs.shape[0]
    nq = outer_b.shape[0]
    nqi = inner_b.shape[0]
    b_lo = breaks[0]
    b_hi = breaks[len(breaks) - 1]
    n_pts_max = len(w_a) + 4
    for it in prange(n_chunk):
        ft = test_faces[it]
        I0 = np.empty(nc)
        I1 = np.empty((nc, 3))
        FAh = np.empty(6)
        FBh = np.empty(6)
        FAl = np.empty(6)
        FBl = np.empty(6)
        McA = np.empty(nc)
        MsA = np.empty(nc)
        tcrit = np.empty(2 * len(breaks) + 2)
        panW = np.empty((nc, 3))
        panL = np.empty((nc, 3))
        panR = np.empty((nc, 3))
        stk = np.empty((64, 2))
        x = np.empty(3)
        fm = np.empty((3, 3))
        vv = np.empty(3)
        y = np.empty(3)
        n_t = normals_t[ft]
        area_t = areas_t[ft]
        handled = np.zeros(nf_s, np.int8)
        if near_mode > 0:
            xs2 = np.empty((n_pts_max, 3))
            ws2 = np.empty(n_pts_max)
            blk = np.empty((3, 3))
            tstack = np.empty((512, 18))
            pt = np.empty(3, np.int64)
            ps = np.empty(3, np.int64)
            cen3 = np.empty(3)
            for dd in range(3):
                cen3[dd] = (
                    corners_t[ft, 0, dd]
                    + corners_t[ft, 1, dd]
                    + corners_t[ft, 2, dd]
                ) / 3.0
            rad_t = 0.0
            for a3 in range(3):
                rr = 0.0
                for dd in range(3):
                    e = corners_t[ft, a3, dd] - cen3[dd]
                    rr += e * e
                rr = np.sqrt(rr)
                if rr > rad_t:
                    rad_t = rr
            for fs in range(nf_s):
                dcx = cen3[0] - cen_s[fs, 0]
                dcy = cen3[1] - cen_s[fs, 1]
                dcz = cen3[2] - cen_s[fs, 2]
                dc = np.sqrt(dcx * dcx + dcy * dcy + dcz * dcz)
                ns = 0
                if same_mesh == 1:
                    for a3 in range(3):
                        for b3 in range(3):
                            if tris_t[ft, a3] == tris_s[fs, b3]:
                                ns += 1
                if ns == 0 and (
                    near_mode != 2 or dc > adapt_far * (rad_t + rad_s[fs])
                ):
                    continue
                handled[fs] = 1
                for m in range(3):
                    for n in range(3):
                        blk[m, n] = 0.0
                area_s = areas_s[fs]
                if ns == 3:
                    # identical pair: rotated-test double-layer integrand
                    # is pointwise zero on a flat face, so a DL-only
                    # kernel has no contribution at all
                    only_dl = True
                    for c in range(nc):
                        if kinds[c] != 1:
                            only_dl = False
                    if only_dl:
                        continue
                    for k in range(3):
                        pt[k] = k
                        ps[k] = k
                    _table_pair_block(
                        tab_id, pt, ps,
                        corners_t[ft], corners_s[fs], area_t, area_s,
                        opp_t[ft], signs_t[ft], opp_s[fs], signs_s[fs],
                        breaks, coeffs, kinds, 1, blk,
                    )
                elif ns == 2:
                    k = 0
                    ku_t = 0
                    ku_s = 0
                    for a3 in range(3):
                        match = -1
                        for b3 in range(3):
                            if tris_t[ft, a3] == tris_s[fs, b3]:
                                match = b3
                        if match >= 0:
                            pt[k] = a3
                            ps[k] = match
                            k += 1
                        else:
                            ku_t = a3
                    for b3 in range(3):
                        sh = False
                        for a3 in range(3):
                            if tris_s[fs, b3] == tris_t[ft, a3]:
                                sh = True
                        if not sh:
                            ku_s = b3
                    pt[2] = ku_t
                    ps[2] = ku_s
                    _table_pair_block(
                        tab_ed, pt, ps,
                        corners_t[ft], corners_s[fs], area_t, area_s,
                        opp_t[ft], signs_t[ft], opp_s[fs], signs_s[fs],
                        breaks, coeffs, kinds, 0, blk,
                    )
                elif ns == 1:
                    k0t = 0
                    k0s = 0
                    for a3 in range(3):
                        for b3 in range(3):
                            if tris_t[ft, a3] == tris_s[fs, b3]:
                                k0t = a3
                                k0s = b3
                    for k in range(3):
                        pt[k] = (k0t + k) % 3
                        ps[k] = (k0s + k) % 3
                    _table_pair_block(
                        tab_vx, pt, ps,
                        corners_t[ft], corners_s[fs], area_t, area_s,
                        opp_t[ft], signs_t[ft], opp_s[fs], signs_s[fs],
                        breaks, coeffs, kinds, 0, blk,
                    )
                else:
                    if dc - rad_s[fs] > b_hi or dc + rad_s[fs] < b_lo:
                        continue
                    _adaptive_pair(
                        corners_t[ft], area_t, n_t, opp_t[ft], signs_t[ft],
                        corners_s[fs], area_s, opp_s[fs], signs_s[fs],
                        breaks, coeffs, kinds, seg_gx, seg_gw, d_thresh,
                        I0, I1, FAh, FBh, FAl, FBl, McA, MsA, tcrit,
                        panW, panL, panR, stk, bary_a, w_a, adapt_tol,
                        xs2, ws2, tstack, blk,
                    )
                for n_loc in range(3):
                    e_src = edges_s[fs, n_loc]
                    for m in range(3):
                        out[it, m, e_src] += blk[m, n_loc]
        for g in range(nq):
            for dd in range(3):
                x[dd] = (
                    outer_b[g, 0] * corners_t[ft, 0, dd]
                    + outer_b[g, 1] * corners_t[ft, 1, dd]
                    + outer_b[g, 2] * corners_t[ft, 2, dd]
                )
            wt = outer_w[g] * area_t
            for m in range(3):
                s = signs_t[ft, m] / (2.0 * area_t)
                for dd in range(3):
                    fm[m, dd] = s * (x[dd] - opp_t[ft, m, dd])
            for fs in range(nf_s):
                if handled[fs] == 1:
                    continue
                dcx = x[0] - cen_s[fs, 0]
                dcy = x[1] - cen_s[fs, 1]
                dcz = x[2] - cen_s[fs, 2]
                dc = np.sqrt(dcx * dcx + dcy * dcy + dcz * dcz)
                if dc - rad_s[fs] > b_hi or dc + rad_s[fs] < b_lo:
                    continue
                if far_dist > 0.0 and dc > far_dist:
                    # smooth far pair: plain product Gauss for the moments
                    for c in range(nc):
                        I0[c] = 0.0
                        I1[c, 0] = 0.0
                        I1[c, 1] = 0.0
                        I1[c, 2] = 0.0
                    for gi in range(nqi):
                        for dd in range(3):
                            y[dd] = (
                                inner_b[gi, 0] * corners_s[fs, 0, dd]
                                + inner_b[gi, 1] * corners_s[fs, 1, dd]
                                + inner_b[gi, 2] * corners_s[fs, 2, dd]
                            )
                        rx = x[0] - y[0]
                        ry = x[1] - y[1]
                        rz = x[2] - y[2]
                        R = np.sqrt(rx * rx + ry * ry + rz * rz)
                        wq = inner_w[gi] * areas_s[fs]
                        for c in range(nc):
                            w = _eval_laurent(breaks, coeffs, c, R) * wq
                            if w != 0.0:
                                I0[c] += w
                                I1[c, 0] += w * y[0]
                                I1[c, 1] += w * y[1]
                                I1[c, 2] += w * y[2]
                else:
                    pair_moments(
                        x, n_t, corners_s[fs], breaks, coeffs, kinds,
                        seg_gx, seg_gw, d_thresh, I0, I1,
                        FAh, FBh, FAl, FBl, McA, MsA, tcrit,
                        panW, panL, panR, stk,
                    )
                area_s = areas_s[fs]
                for n_loc in range(3):
                    e_src = edges_s[fs, n_loc]
                    kn = signs_s[fs, n_loc] / (2.0 * area_s)
                    dn = signs_s[fs, n_loc] / area_s
                    for c in range(nc):
                        kc = kinds[c]
                        if kc == 2:
                            val = dn * I0[c]
                            for m in range(3):
                                dm = signs_t[ft, m] / area_t
                                out[it, m, e_src] += wt * dm * val
                        else:
                            if kc == 0:
                                for dd in range(3):
                                    vv[dd] = kn * (
                                        I1[c, dd] - I0[c] * opp_s[fs, n_loc, dd]
                                    )
                            else:
                                wx = I0[c] * x[0] - I1[c, 0]
                                wy = I0[c] * x[1] - I1[c, 1]
                                wz = I0[c] * x[2] - I1[c, 2]
                                ax = x[0] - opp_s[fs, n_loc, 0]
                                ay = x[1] - opp_s[fs, n_loc, 1]
                                az = x[2] - opp_s[fs, n_loc, 2]
                                vv[0] = kn * (wy * az - wz * ay)
                                vv[1] = kn * (wz * ax - wx * az)
                                vv[2] = kn * (wx * ay - wy * ax)
                            for m in range(3):
                                out[it, m, e_src] += wt * (
                                    fm[m, 0] * vv[0]
                                    + fm[m, 1] * vv[1]
                                    + fm[m, 2] * vv[2]
                                )
