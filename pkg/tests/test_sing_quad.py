"""Tests of the regularized 4-D quadrature tables for touching pairs.

The change of variables behind a table is either right or wrong
independently of the integrand, so the load-bearing checks are exact:
smooth integrals must be reproduced to machine precision and the weights
must sum to the squared reference area.  The singular-integral checks
compare against an independent path: the semi-analytic inner integral
(validated elsewhere against brute-force quadrature) composed with an
edge-aligned double-exponential outer rule.
"""

import numpy as np
import pytest

from tdbem._radial import moments
from tdbem._sing_quad import (
    PAIR_EDGE,
    PAIR_IDENTICAL,
    PAIR_VERTEX,
    singular_pair_table,
)
from tdbem.quadrature import KIND_SL, tanh_sinh_rule, triangle_rule

T_MAIN = np.array([[0.0, 0.0, 0.0], [1.1, 0.0, 0.0], [0.2, 0.9, 0.0]])
T_EDGE = np.array([[0.0, 0.0, 0.0], [1.1, 0.0, 0.0], [0.4, -0.5, 0.6]])
T_VERT = np.array([[0.0, 0.0, 0.0], [-0.6, 0.8, 0.1], [-0.2, -0.4, 0.9]])

CASES = [
    (PAIR_IDENTICAL, T_MAIN, T_MAIN),
    (PAIR_EDGE, T_MAIN, T_EDGE),
    (PAIR_VERTEX, T_MAIN, T_VERT),
]


def _area(tri):
    return 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))


def _apply(tab, tri_t, tri_s, f):
    w = tab[:, 0] * (2.0 * _area(tri_t)) * (2.0 * _area(tri_s))
    x = tab[:, 1:4] @ tri_t
    y = tab[:, 4:7] @ tri_s
    return np.sum(w * f(x, y))


@pytest.mark.parametrize("case,tri_t,tri_s", CASES)
def test_weights_sum_to_quarter(case, tri_t, tri_s):
    tab = singular_pair_table(case, 8)
    assert tab[:, 0].sum() == pytest.approx(0.25, abs=1e-13)
    # barycentric coordinates are valid convex weights
    assert tab[:, 1:].min() > -1e-12
    assert np.allclose(tab[:, 1:4].sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(tab[:, 4:7].sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("case,tri_t,tri_s", CASES)
def test_reproduces_smooth_integrals_exactly(case, tri_t, tri_s):
    # product of two low-order polynomials, integrated exactly by a
    # tensor product of symmetric triangle rules
    def f(x, y):
        return (x[:, 0] + 2.0 * y[:, 1] + 0.3) ** 2

    b, wq = triangle_rule(13)
    xt = b @ tri_t
    xs = b @ tri_s
    ref = 0.0
    for i in range(len(wq)):
        ref += (
            wq[i]
            * _area(tri_t)
            * np.sum(wq * _area(tri_s) * (xt[i, 0] + 2.0 * xs[:, 1] + 0.3) ** 2)
        )
    val = _apply(singular_pair_table(case, 6), tri_t, tri_s, f)
    assert val == pytest.approx(ref, rel=1e-12)


def _inner_sl(x, tri):
    """Semi-analytic inner integral of 1/R over tri (independent path)."""
    breaks = np.array([0.0, 10.0])
    coeffs = np.zeros((1, 1, 6))
    coeffs[0, 0, 2] = 1.0  # 1/R slot
    kinds = np.array([KIND_SL], dtype=np.int64)
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    n = n / np.linalg.norm(n)
    I0, _ = moments(x, n, tri, breaks, coeffs, kinds)
    return I0[0]


def _oracle_sl(case, tri_t, tri_s, nts=31):
    """Outer tanh-sinh rule aligned with the shared feature, times the
    semi-analytic inner integral."""
    tsx, tsw = tanh_sinh_rule(nts)
    total = 0.0
    if case == PAIR_VERTEX:
        subtris = [(tri_t[0], tri_t[1], tri_t[2])]
        mode = "vertex"
    elif case == PAIR_EDGE:
        subtris = [(tri_t[0], tri_t[1], tri_t[2])]
        mode = "edge"
    else:
        cen = tri_t.mean(axis=0)
        subtris = [
            (tri_t[0], tri_t[1], cen),
            (tri_t[1], tri_t[2], cen),
            (tri_t[2], tri_t[0], cen),
        ]
        mode = "edge"
    for (va, vb, vc) in subtris:
        two_a = np.linalg.norm(np.cross(np.asarray(vb) - va, np.asarray(vc) - va))
        for i, s in enumerate(tsx):
            if s < 1e-14:
                continue
            for j, u in enumerate(tsx):
                if mode == "edge":
                    # s = 0 on the edge va-vb (the singular feature)
                    x = (1.0 - s) * (va + u * (np.asarray(vb) - va)) + s * np.asarray(vc)
                    w = two_a * (1.0 - s) * tsw[i] * tsw[j]
                else:
                    # s = 0 at the shared vertex va
                    x = va + s * (
                        (1.0 - u) * (np.asarray(vb) - va) + u * (np.asarray(vc) - va)
                    )
                    w = two_a * s * tsw[i] * tsw[j]
                total += w * _inner_sl(x, tri_s)
    return total


@pytest.mark.parametrize(
    "case,tri_t,tri_s,n,tol",
    [
        (PAIR_IDENTICAL, T_MAIN, T_MAIN, 24, 5e-9),
        (PAIR_EDGE, T_MAIN, T_EDGE, 24, 1e-9),
        (PAIR_VERTEX, T_MAIN, T_VERT, 14, 1e-9),
    ],
)
def test_singular_integral_matches_independent_oracle(case, tri_t, tri_s, n, tol):
    ref = _oracle_sl(case, tri_t, tri_s)
    val = _apply(
        singular_pair_table(case, n),
        tri_t,
        tri_s,
        lambda x, y: 1.0 / np.linalg.norm(x - y, axis=1),
    )
    assert val == pytest.approx(ref, rel=tol)


@pytest.mark.parametrize("case,tri_t,tri_s", CASES)
def test_geometric_convergence(case, tri_t, tri_s):
    # successive orders must contract: the n=24 vs n=28 difference has to
    # be far below the n=12 vs n=16 difference
    def f(x, y):
        return 1.0 / np.linalg.norm(x - y, axis=1)

    vals = {
        n: _apply(singular_pair_table(case, n), tri_t, tri_s, f)
        for n in (12, 16, 24, 28)
    }
    coarse = abs(vals[16] - vals[12])
    fine = abs(vals[28] - vals[24])
    assert fine < 1e-3 * coarse + 1e-14
