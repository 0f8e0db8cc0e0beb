"""Singular Galerkin quadrature tables for touching triangle pairs.

For test/source triangles that are identical, share an edge, or share a
vertex, the 4-D Galerkin integrand is singular on the set {x = y} and no
tensor product of 2-D surface rules converges.  The classical remedy
(Sauter-Schwab type regularizing coordinates) is built here from first
principles:

* the product T x T of two reference simplices T = {0 <= b <= a <= 1}
  is triangulated into six 4-simplices by the staircase (product)
  triangulation, with the triangle vertices ordered so that the shared
  feature comes first -- this places the singular set {x = y} on faces
  of the 4-simplices;
* each 4-simplex is written as the join of its singular face (the convex
  hull of its product vertices with x = y) and the complementary face;
  in join coordinates (s, alpha, beta) the difference x - y equals
  s * delta(beta) with delta bounded away from zero, so the kernel
  singularity |x-y|^-k becomes s^-k and is cancelled by the s^dc factor
  of the join volume element;
* the resulting polynomial map [0,1]^4 -> T x T and its Jacobian are
  computed symbolically (sympy) and evaluated at tensor Gauss nodes.

The output is a table of rows (w, bx0, bx1, bx2, by0, by1, by2): weights
(summing to area(T)^2 = 1/4) and barycentric coordinates of the outer
and inner points with respect to the *feature-ordered* triangle corners.
The integrand transformed this way is analytic on the closed cube, so
the tensor Gauss rule converges exponentially in the 1-D order n.

Correctness is testable without any singular reference: the tables must
reproduce smooth 4-D integrals exactly (a change of variables is either
right or wrong independently of the integrand), the weights must sum to
1/4, and the map must cover T x T once.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["singular_pair_table", "PAIR_IDENTICAL", "PAIR_EDGE", "PAIR_VERTEX"]

PAIR_IDENTICAL = 3  # number of shared vertices
PAIR_EDGE = 2
PAIR_VERTEX = 1

# vertices of the reference triangle T in (a, b) coordinates,
# chi(a, b) = v0 + a (v1 - v0) + b (v2 - v1); vertex i <-> (a, b) below
_TRI_AB = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])


def _staircase_simplices():
    """The six 4-simplices of the staircase triangulation of T x T.

    Each simplex is the convex hull of the five product vertices along a
    monotone lattice path from (0, 0) to (2, 2) in the (i, j) grid of
    (x-vertex, y-vertex) indices."""
    paths = []

    def walk(i, j, path):
        if i == 2 and j == 2:
            paths.append(list(path))
            return
        if i < 2:
            walk(i + 1, j, path + [(i + 1, j)])
        if j < 2:
            walk(i, j + 1, path + [(i, j + 1)])

    walk(0, 0, [(0, 0)])
    return paths


def _singular_vertices(case):
    if case == PAIR_IDENTICAL:
        return {(0, 0), (1, 1), (2, 2)}
    if case == PAIR_EDGE:
        return {(0, 0), (1, 1)}
    if case == PAIR_VERTEX:
        return {(0, 0)}
    raise ValueError(f"not a touching-pair case: {case}")


def _stick(symbols):
    """Barycentric stick-breaking map of a d-simplex from d cube
    variables (d in {0, 1, 2, 3})."""
    import sympy as sp

    if len(symbols) == 0:
        return [sp.Integer(1)]
    if len(symbols) == 1:
        u = symbols[0]
        return [u, 1 - u]
    if len(symbols) == 2:
        u, v = symbols
        return [u, (1 - u) * v, (1 - u) * (1 - v)]
    u, v, w = symbols
    return [u, (1 - u) * v, (1 - u) * (1 - v) * w, (1 - u) * (1 - v) * (1 - w)]


# Gauss order for the join variable s and the singular-face parameters.
# Along these directions the transformed integrand is an exact polynomial
# of low degree (the difference x - y depends only on the complementary
# variables, see singular_pair_table), so a small fixed order is exact.
_N_SMOOTH = 4


@lru_cache(maxsize=None)
def _case_tables(case: int, n: int, n3: int):
    import sympy as sp

    def rule01(m):
        gx, gw = np.polynomial.legendre.leggauss(m)
        return 0.5 * (gx + 1.0), 0.5 * gw

    s, p1, p2, p3 = sp.symbols("s p1 p2 p3", nonnegative=True)
    sing = _singular_vertices(case)
    rows = []
    for path in _staircase_simplices():
        verts = [np.concatenate([_TRI_AB[i], _TRI_AB[j]]) for (i, j) in path]
        sing_idx = [k for k, ij in enumerate(path) if ij in sing]
        comp_idx = [k for k in range(5) if k not in sing_idx]
        ds = len(sing_idx) - 1
        dc = len(comp_idx) - 1
        if ds + dc != 3:
            raise AssertionError("join dimensions must sum to 3")
        params = [p1, p2, p3]
        alpha = _stick(params[:ds])
        beta = _stick(params[ds : ds + dc])
        z = [sp.Integer(0)] * 4
        lam = {}
        for a_k, k in zip(alpha, sing_idx):
            lam[k] = (1 - s) * a_k
        for b_k, k in zip(beta, comp_idx):
            lam[k] = s * b_k
        for k in range(5):
            for d in range(4):
                z[d] = z[d] + lam[k] * sp.Float(verts[k][d], 20)
        var = (s, p1, p2, p3)
        J = sp.Matrix(4, 4, lambda r, c: sp.diff(z[r], var[c]))
        detJ = sp.simplify(J.det())
        fz = sp.lambdify(var, z, "numpy")
        fj = sp.lambdify(var, detJ, "numpy")
        # order n only along the complementary-face directions (the only
        # ones the singular factor |x - y| / s depends on)
        orders = [_N_SMOOTH] * (1 + ds) + [n3 if dc == 3 else n] * dc
        orders += [1] * (4 - len(orders))
        nodes, wts = zip(*(rule01(m) for m in orders))
        S, P1, P2, P3 = np.meshgrid(*nodes, indexing="ij")
        W = np.einsum("i,j,k,l->ijkl", *wts)
        shape = S.shape
        Z = [np.broadcast_to(np.asarray(zz, float), shape) for zz in fz(S, P1, P2, P3)]
        Z = np.array(Z)
        detv = np.abs(np.broadcast_to(np.asarray(fj(S, P1, P2, P3), float), shape))
        ax, bx, ay, by = (Z[d].ravel() for d in range(4))
        w = (W * detv).ravel()
        keep = w > 1e-18
        rows.append(
            np.column_stack(
                [
                    w[keep],
                    1.0 - ax[keep],
                    ax[keep] - bx[keep],
                    bx[keep],
                    1.0 - ay[keep],
                    ay[keep] - by[keep],
                    by[keep],
                ]
            )
        )
    return np.ascontiguousarray(np.vstack(rows))


def singular_pair_table(case: int, n: int, n3: int | None = None) -> np.ndarray:
    """Quadrature table (m, 7) for one touching-pair case.

    Columns: weight, barycentric x (3), barycentric y (3), both with
    respect to feature-ordered corners (shared vertices first, in the
    same order on both triangles).  Weights sum to 1/4; multiply by
    (2 A_test)(2 A_src) for physical pairs.

    n is the Gauss order along the complementary-face directions, the
    only ones the regularized singular factor depends on: within each
    4-simplex x - y = s * delta(beta) with delta a function of the
    complementary variables alone, so for (piecewise-)power-law radial
    kernels the s and singular-face directions are exactly polynomial
    and use a small fixed order.  Convergence in n is geometric but
    its rate is set by complex zeros of |delta|^2, which for ordinary
    triangle shapes sit at distance ~0.2 from the real interval; n of
    roughly 16-32 gives 1e-9 .. 1e-12 relative accuracy.

    n3, if given, is a (usually smaller) order for the simplices whose
    complementary face is 3-dimensional: those cost n^3 points but carry
    a milder (vertex-like) singular factor and converge faster."""
    if n3 is None:
        n3 = n
    return _case_tables(int(case), int(n), int(n3))
