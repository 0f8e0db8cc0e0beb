"""Quasi-Helmholtz projectors.

RWG coefficient space:  P_Sigma  = Sigma (Sigma^T Sigma)^+ Sigma^T  (stars)
                        P_LambdaH = I - P_Sigma                     (loops + global)
BC coefficient space:   p_Lambda = Lambda (Lambda^T Lambda)^+ Lambda^T
                        p_SigmaH = I - p_Lambda

The pseudo-inverses are graph-Laplacian solves.  They are performed by a
grounded sparse factorization: the Laplacian of a connected surface has
nullspace span{1}, so pinning one unknown to zero and removing the mean
afterwards reproduces the Moore-Penrose action exactly on range(L),
which is where every right-hand side Sigma^T x / Lambda^T x lives
(Sigma 1 = Lambda 1 = 0).  Residuals are checked on every solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverDiverged
from .mesh import LoopStarConnectivity, TriangleMesh, build_connectivity

__all__ = ["ProjectorSet", "build_projectors"]


class _GroundedLaplacian:
    """Moore-Penrose solve of a connected-graph Laplacian A^T A."""

    def __init__(self, A: sp.csr_matrix, tolerance: float):
        self.A = A.tocsr()
        self.L = (self.A.T @ self.A).tocsc()
        self._solver = spla.splu(self.L[1:, 1:].tocsc())
        self.tolerance = tolerance

    def pinv_apply(self, b: np.ndarray) -> np.ndarray:
        """(A^T A)^+ b for b in range(A^T A) (i.e. b orthogonal to 1)."""
        b = np.asarray(b, dtype=np.float64)
        single = b.ndim == 1
        bm = b[:, None] if single else b.copy()
        # remove the nullspace component (roundoff: exact inputs are
        # already orthogonal to 1 since Sigma 1 = Lambda 1 = 0)
        bm = bm - bm.mean(axis=0, keepdims=True)
        z = np.empty_like(bm)
        z[0] = 0.0
        z[1:] = self._solver.solve(bm[1:])
        z -= z.mean(axis=0, keepdims=True)
        resid = self.L @ z - bm
        scale = np.linalg.norm(bm, axis=0)
        bad = np.linalg.norm(resid, axis=0) > self.tolerance * np.maximum(scale, 1e-300)
        if np.any(bad & (scale > 0)):
            raise SolverDiverged(
                "grounded Laplacian solve missed tolerance "
                f"{self.tolerance:g}"
            )
        return z[:, 0] if single else z


@dataclass
class ProjectorSet:
    """The four quasi-Helmholtz projectors for one mesh."""

    connectivity: LoopStarConnectivity
    tolerance: float = 1e-12
    _lap_sigma: _GroundedLaplacian = field(default=None, repr=False)
    _lap_lambda: _GroundedLaplacian = field(default=None, repr=False)
    _dense: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self._lap_sigma is None:
            self._lap_sigma = _GroundedLaplacian(
                self.connectivity.Sigma, self.tolerance
            )
        if self._lap_lambda is None:
            self._lap_lambda = _GroundedLaplacian(
                self.connectivity.Lambda, self.tolerance
            )

    # -- RWG side -----------------------------------------------------------

    def apply_P_Sigma(self, x: np.ndarray) -> np.ndarray:
        sig = self.connectivity.Sigma
        return sig @ self._lap_sigma.pinv_apply(sig.T @ x)

    def apply_P_LambdaH(self, x: np.ndarray) -> np.ndarray:
        return x - self.apply_P_Sigma(x)

    # -- BC side ------------------------------------------------------------

    def apply_p_Lambda(self, x: np.ndarray) -> np.ndarray:
        lam = self.connectivity.Lambda
        return lam @ self._lap_lambda.pinv_apply(lam.T @ x)

    def apply_p_SigmaH(self, x: np.ndarray) -> np.ndarray:
        return x - self.apply_p_Lambda(x)

    # -- dense images (diagnostics and dense block assembly) ----------------

    def dense(self, which: str) -> np.ndarray:
        """Dense projector matrix; which in {PSigma, PLambdaH, pLambda, pSigmaH}."""
        if which not in self._dense:
            n = self.connectivity.Sigma.shape[0]
            eye = np.eye(n)
            fn = {
                "PSigma": self.apply_P_Sigma,
                "PLambdaH": self.apply_P_LambdaH,
                "pLambda": self.apply_p_Lambda,
                "pSigmaH": self.apply_p_SigmaH,
            }[which]
            self._dense[which] = fn(eye)
        return self._dense[which]

    # -- diagnostics --------------------------------------------------------

    def identity_residuals(self, rng=None, n_trials: int = 5) -> dict:
        """Max residuals of the projector algebra on random vectors."""
        rng = np.random.default_rng(rng)
        n = self.connectivity.Sigma.shape[0]
        out = {
            "idempotent_PSigma": 0.0,
            "idempotent_pLambda": 0.0,
            "complementary_rwg": 0.0,
            "complementary_bc": 0.0,
            "annihilation_rwg": 0.0,
            "annihilation_bc": 0.0,
        }
        for _ in range(n_trials):
            x = rng.standard_normal(n)
            nx = np.linalg.norm(x)
            ps = self.apply_P_Sigma(x)
            pl = self.apply_p_Lambda(x)
            out["idempotent_PSigma"] = max(
                out["idempotent_PSigma"],
                np.linalg.norm(self.apply_P_Sigma(ps) - ps) / nx,
            )
            out["idempotent_pLambda"] = max(
                out["idempotent_pLambda"],
                np.linalg.norm(self.apply_p_Lambda(pl) - pl) / nx,
            )
            out["complementary_rwg"] = max(
                out["complementary_rwg"],
                np.linalg.norm(ps + self.apply_P_LambdaH(x) - x) / nx,
            )
            out["complementary_bc"] = max(
                out["complementary_bc"],
                np.linalg.norm(pl + self.apply_p_SigmaH(x) - x) / nx,
            )
            out["annihilation_rwg"] = max(
                out["annihilation_rwg"],
                np.linalg.norm(self.apply_P_LambdaH(ps)) / nx,
            )
            out["annihilation_bc"] = max(
                out["annihilation_bc"],
                np.linalg.norm(self.apply_p_SigmaH(pl)) / nx,
            )
        return out


def build_projectors(
    mesh_or_connectivity, tolerance: float = 1e-12
) -> ProjectorSet:
    con = mesh_or_connectivity
    if isinstance(con, TriangleMesh):
        con = build_connectivity(con)
    return ProjectorSet(connectivity=con, tolerance=tolerance)
