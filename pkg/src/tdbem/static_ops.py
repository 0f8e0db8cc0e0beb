"""Static (zero-wavenumber) boundary operators and the loop-star diagonal
preconditioner.

All three matrices are Galerkin matrices of 1/(4 pi R)-type kernels:

* single-layer part, weighted 1/D for dimensional consistency:
      [T0s]_{mn} = (1 / 4 pi D) iint  b_m(x) . b_n(y) / R
* hypersingular part, weighted D (after integrating the surface gradient
  by parts onto the test function):
      [T0h]_{mn} = (D / 4 pi) iint  div b_m(x) div b_n(y) / R
* static double-layer (magnetic-field) operator on RWG:
      [K0]_{mn} = -(1 / 4 pi) iint  f_m(x) . (x - y) x f_n(y) / R^3

The rotated-function testing of the weak forms collapses to the plain
dot products above because (n x a).(n x b) = a.b for tangential fields;
the principal value of the double-layer kernel over coplanar patches is
identically zero, which the semi-analytic integrator reproduces exactly.

The first two are assembled either on a plain RWG basis or on the dual
basis (coefficient columns over the refined edge space, contracted
chunk-wise so the refined dense matrix is never stored).  The dense-mesh
preconditioner combines their loop/star-projected images:

    P = pSH T0s pSH + pL T0h pL
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BcBasis, RwgBasis
from .errors import QuadratureFailure
from .projectors import ProjectorSet
from .quadrature import KIND_DL, KIND_HYP, KIND_SL
from .retarded import assemble_kernel_matrix

__all__ = [
    "StaticOperatorSet",
    "Preconditioner",
    "assemble_static_efio",
    "assemble_static_efio_rwg",
    "assemble_static_mfie",
    "build_static_operators",
]

_INV_4PI = 1.0 / (4.0 * np.pi)


def _static_tables(kind: int, r_pow: int, amplitude: float, r_max: float):
    """Single-piece Laurent tables for a constant-in-time kernel
    amplitude * R^r_pow on (0, r_max]."""
    breaks = np.array([0.0, r_max])
    coeffs = np.zeros((1, 1, 6))
    coeffs[0, 0, r_pow + 3] = amplitude
    kinds = np.array([kind], dtype=np.int64)
    return breaks, coeffs, kinds


def _check(mat: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(mat)):
        raise QuadratureFailure(f"non-finite entries in {what} assembly")
    return mat


def _assemble_single_kernel(
    rwg: RwgBasis,
    kind: int,
    r_pow: int,
    amplitude: float,
    n_q: int,
    inner_n_q: int,
    far_factor: float,
    project=None,
    near_mode: int = 1,
    adapt_tol: float = 1e-9,
    adapt_far: float = 3.0,
    near_orders: tuple = (20, (24, 20), 14),
) -> np.ndarray:
    mesh = rwg.mesh
    r_max = 1.001 * mesh.diameter
    breaks, coeffs, kinds = _static_tables(kind, r_pow, amplitude, r_max)
    far = far_factor * mesh.mean_edge_length if far_factor > 0 else -1.0
    return assemble_kernel_matrix(
        rwg, rwg, breaks, coeffs, kinds,
        n_q=n_q, far_dist=far, inner_n_q=inner_n_q, project=project,
        near_mode=near_mode, adapt_tol=adapt_tol, adapt_far=adapt_far,
        near_orders=near_orders,
    )


def assemble_static_efio_rwg(
    rwg: RwgBasis,
    D: float,
    n_q: int = 13,
    inner_n_q: int = 13,
    far_factor: float = 2.0,
):
    """(T0s, T0h) Galerkin matrices on a plain RWG basis.

    Touching pairs use the regularized 4-D tables (near_mode=1) at modest
    orders: the matrices feed the preconditioner, where a few digits
    suffice, and the touching-pair treatment keeps them symmetric and
    positive definite on any mesh."""
    orders = (8, 8, 6)
    t0s = _assemble_single_kernel(
        rwg, KIND_SL, -1, _INV_4PI / D, n_q, inner_n_q, far_factor,
        near_orders=orders,
    )
    t0h = _assemble_single_kernel(
        rwg, KIND_HYP, -1, _INV_4PI * D, n_q, inner_n_q, far_factor,
        near_orders=orders,
    )
    return _check(t0s, "static single-layer"), _check(t0h, "hypersingular")


def assemble_static_efio(
    bc: BcBasis,
    D: float,
    n_q: int = 13,
    inner_n_q: int = 13,
    far_factor: float = 2.0,
):
    """(T0s, T0h) Galerkin matrices on the dual basis.

    The dual functions are coefficient columns C over the refined edge
    space, so each matrix is the congruence C^T M C of the refined-mesh
    Galerkin matrix, contracted on the fly.
    """
    C = bc.coeffs
    orders = (8, 8, 6)
    t0s = _assemble_single_kernel(
        bc.rwg_refined, KIND_SL, -1, _INV_4PI / D,
        n_q, inner_n_q, far_factor, project=(C, C), near_orders=orders,
    )
    t0h = _assemble_single_kernel(
        bc.rwg_refined, KIND_HYP, -1, _INV_4PI * D,
        n_q, inner_n_q, far_factor, project=(C, C), near_orders=orders,
    )
    return _check(t0s, "static single-layer"), _check(t0h, "hypersingular")


def assemble_static_mfie(
    rwg: RwgBasis,
    n_q: int = 13,
    adapt_tol: float = 1e-9,
    far_factor: float = 3.0,
) -> np.ndarray:
    """Principal-value Galerkin matrix of the static double-layer operator
    on RWG (rotated-function tested).

    This matrix enters an exact algebraic identity (its loop-loop block
    vanishes for exact integration, which is what annihilates the
    projector-sandwiched late-time tail), so it is assembled with the
    fully error-controlled near scheme: regularized 4-D tables for
    touching pairs -- the outer integrand alone has a log(distance)
    singularity along shared edges that no fixed or uniformly-refined
    rule can resolve -- and adaptive outer bisection with per-pair
    relative tolerance adapt_tol for close non-touching pairs.
    """
    k0 = _assemble_single_kernel(
        rwg, KIND_DL, -3, -_INV_4PI, n_q, 13, far_factor,
        near_mode=2, adapt_tol=adapt_tol,
    )
    return _check(k0, "static double-layer")


@dataclass(frozen=True)
class StaticOperatorSet:
    """Static operator matrices for one mesh (dual-basis EFIO parts,
    RWG double layer) plus the diameter used for the dimensional weights."""

    T0s_bc: np.ndarray
    T0h_bc: np.ndarray
    K0_rwg: np.ndarray
    D: float


def build_static_operators(
    rwg: RwgBasis,
    bc: BcBasis,
    D: float | None = None,
    n_q: int = 13,
    inner_n_q: int = 13,
    far_factor: float = 2.0,
) -> StaticOperatorSet:
    if D is None:
        D = rwg.mesh.diameter
    t0s, t0h = assemble_static_efio(bc, D, n_q, inner_n_q, far_factor)
    k0 = assemble_static_mfie(rwg, n_q)
    return StaticOperatorSet(T0s_bc=t0s, T0h_bc=t0h, K0_rwg=k0, D=D)


class Preconditioner:
    """Loop-star diagonal dense-mesh preconditioner

        P = pSH T0s pSH + pL T0h pL

    built from the dual-basis static EFIO parts and the dual-side
    quasi-Helmholtz projectors.  Symmetric positive-definite, and
    block-diagonal with respect to the loop/star splitting (it commutes
    with any operator that is scalar on each of the two subspaces).
    """

    def __init__(self, ops: StaticOperatorSet, projectors: ProjectorSet):
        self.ops = ops
        self.projectors = projectors
        self._dense = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        pr = self.projectors
        sh = pr.apply_p_SigmaH(x)
        lm = pr.apply_p_Lambda(x)
        return (
            pr.apply_p_SigmaH(self.ops.T0s_bc @ sh)
            + pr.apply_p_Lambda(self.ops.T0h_bc @ lm)
        )

    def apply_star_part(self, x: np.ndarray) -> np.ndarray:
        pr = self.projectors
        return pr.apply_p_SigmaH(self.ops.T0s_bc @ pr.apply_p_SigmaH(x))

    def apply_loop_part(self, x: np.ndarray) -> np.ndarray:
        pr = self.projectors
        return pr.apply_p_Lambda(self.ops.T0h_bc @ pr.apply_p_Lambda(x))

    def dense(self) -> np.ndarray:
        if self._dense is None:
            psh = self.projectors.dense("pSigmaH")
            pl = self.projectors.dense("pLambda")
            self._dense = (
                psh @ self.ops.T0s_bc @ psh + pl @ self.ops.T0h_bc @ pl
            )
        return self._dense
