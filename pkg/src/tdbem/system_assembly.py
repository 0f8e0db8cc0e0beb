"""Assembly of the marching system: regularized blocks, right-hand sides,
and the classical baseline.

The regularized system solves for auxiliary unknowns (u, v) whose loop
component carries the current itself and whose star component carries its
running time integral.  Each block Q_i is a sum of four projector
sandwiches of 2x2 operator combinations:

    Q_i^{ll} = Tsh G^-1 . B_i         . P_LH     (plain hat blocks)
    Q_i^{ls} = Tsh G^-1 . Bhat_i      . P_S      (C^1-quadratic blocks)
    Q_i^{sl} = Tl  G^-1 P_LH . Btil_i . P_LH     (time-integrated blocks)
    Q_i^{ss} = Tl  G^-1 P_LH . B_i    . P_S

with Tsh / Tl the star / loop parts of the static preconditioner on the
dual basis, G the mixed Gram, P_LH / P_S the loop / star projectors on
the primal side, and B_i the 2x2 combination

    B_i = [[ eta T_i + eta' T_i',  -(K_i + K_i') ],
           [      K_i + K_i',      (1/eta) T_i + (1/eta') T_i' ]].

The time-integrated double-layer blocks saturate to a constant multiple
of the static double-layer matrix, which the middle loop projectors
annihilate for exact integration; those contributions (block indices
i > k_max - 1) are explicitly zeroed rather than left to numerical
cancellation.  Consequently Q_i = 0 exactly for i > k_max + 1.

The classical baseline discretizes the original coupled system with hat
trial functions and collocation in time.  Its hypersingular part has a
time signature with a constant late-time tail, handled as one extra
"tail" matrix applied to the running sum of past solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np
import scipy.sparse as sp
from scipy.special import erf

from .basis import MixedGram, RwgBasis
from .errors import ConfigError, DimensionMismatch
from .projectors import ProjectorSet
from .quadrature import KIND_DL, KIND_HYP, KIND_SL, RadialComponent, triangle_rule
from .retarded import (
    _INV_4PI,
    Medium,
    assemble_retarded_block,
    family_components,
)
from .static_ops import StaticOperatorSet
from . import temporal
from .quadrature import build_component_tables
from .retarded import assemble_kernel_matrix

__all__ = [
    "MediumPair",
    "PlaneWaveExcitation",
    "MotSystem",
    "SandwichSet",
    "build_sandwiches",
    "assemble_qi_blocks",
    "RhsAssembler",
    "assemble_classical_blocks",
    "ClassicalSystem",
    "classical_rhs",
    "project_field",
    "test_field_rotated",
]


# ---------------------------------------------------------------------------
# media and excitation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MediumPair:
    """Exterior (eps, mu) and interior (eps_p, mu_p) lossless media."""

    eps: float
    mu: float
    eps_p: float
    mu_p: float

    def __post_init__(self):
        for name in ("eps", "mu", "eps_p", "mu_p"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"medium parameter {name} must be positive")

    @property
    def exterior(self) -> Medium:
        return Medium(self.eps, self.mu)

    @property
    def interior(self) -> Medium:
        return Medium(self.eps_p, self.mu_p)

    @property
    def c(self) -> float:
        return self.exterior.c

    @property
    def c_p(self) -> float:
        return self.interior.c

    @property
    def eta(self) -> float:
        return self.exterior.eta

    @property
    def eta_p(self) -> float:
        return self.interior.eta

    @property
    def c_min(self) -> float:
        return min(self.c, self.c_p)

    def t_max(self, diameter: float) -> float:
        """Slow-time unit: light-crossing time of the scatterer in the
        slower medium."""
        return diameter / self.c_min

    @property
    def zero_contrast(self) -> bool:
        return self.eps == self.eps_p and self.mu == self.mu_p


@dataclass(frozen=True)
class PlaneWaveExcitation:
    """Gaussian-in-time plane wave.

    e(x, t) = (4A / (w sqrt(pi))) p exp(-z^2),
    z = 4 (c (t - t0) - k.x) / w,  h = (1/eta) k x e.

    ``w`` is a length (the spatial pulse width), ``t0`` a time.
    """

    amplitude: float
    polarization: np.ndarray
    direction: np.ndarray
    width: float
    t0: float

    def __post_init__(self):
        p = np.asarray(self.polarization, float)
        k = np.asarray(self.direction, float)
        if abs(np.linalg.norm(p) - 1.0) > 1e-12 or abs(np.linalg.norm(k) - 1.0) > 1e-12:
            raise ConfigError("polarization and direction must be unit vectors")
        if abs(p @ k) > 1e-12:
            raise ConfigError("polarization must be orthogonal to direction")
        if self.width <= 0:
            raise ConfigError("pulse width must be positive")
        object.__setattr__(self, "polarization", p)
        object.__setattr__(self, "direction", k)

    # -- closed forms -------------------------------------------------------

    def _z(self, x: np.ndarray, t: float, c: float) -> np.ndarray:
        return 4.0 * (c * (t - self.t0) - x @ self.direction) / self.width

    def e_field(self, x: np.ndarray, t: float, c: float) -> np.ndarray:
        z = self._z(x, t, c)
        amp = 4.0 * self.amplitude / (self.width * np.sqrt(np.pi))
        return amp * np.exp(-(z**2))[:, None] * self.polarization

    def h_field(self, x: np.ndarray, t: float, c: float, eta: float) -> np.ndarray:
        kxp = np.cross(self.direction, self.polarization)
        z = self._z(x, t, c)
        amp = 4.0 * self.amplitude / (self.width * np.sqrt(np.pi) * eta)
        return amp * np.exp(-(z**2))[:, None] * kxp

    def envelope_integral(
        self, x: np.ndarray, t_a: float, t_b: float, c: float
    ) -> np.ndarray:
        """Per-point scalar int_{t_a}^{t_b} of the Gaussian envelope; the
        total over the real line is A / c."""
        za = self._z(x, t_a, c)
        zb = self._z(x, t_b, c)
        return (self.amplitude / (2.0 * c)) * (erf(zb) - erf(za))

    def envelope_antiderivative(self, x: np.ndarray, t: float, c: float) -> np.ndarray:
        """Per-point scalar running integral of the Gaussian envelope."""
        z = self._z(x, t, c)
        return (self.amplitude / (2.0 * c)) * (1.0 + erf(z))

    def envelope_peak_decayed(
        self, x: np.ndarray, t: float, c: float, rel: float
    ) -> bool:
        """True once the whole surface is past the pulse and the envelope
        has fallen below ``rel`` of its peak everywhere."""
        z = self._z(x, t, c)
        zmin = z.min()
        return zmin > 0.0 and np.exp(-(zmin**2)) < rel


# ---------------------------------------------------------------------------
# field testing helpers
# ---------------------------------------------------------------------------

def _quad_points(rwg: RwgBasis, n_q: int):
    bary, wq = triangle_rule(n_q)
    mesh = rwg.mesh
    corners = mesh.face_corners()            # (F, 3, 3)
    pts = np.einsum("qa,fac->fqc", bary, corners)
    return pts.reshape(-1, 3), bary, wq


def _test_matrix(rwg: RwgBasis, n_q: int) -> sp.csr_matrix:
    """Sparse V of shape (N_e, 3 * F * n_q) such that for field samples
    F_flat = field(points).ravel(), (V @ F_flat)_m = int f_m . field ds."""
    bary, wq = triangle_rule(n_q)
    mesh = rwg.mesh
    nq = len(wq)
    rows, cols, vals = [], [], []
    for f in range(mesh.num_faces):
        corners = mesh.face_corners(f)
        pts = bary @ corners
        vf = rwg.eval_on_face(f, pts)          # (nq, 3 funcs, 3 comps)
        w = wq * mesh.areas[f]
        for a in range(3):
            m = rwg.face_edges[f, a]
            for q in range(nq):
                base = 3 * (f * nq + q)
                for cc in range(3):
                    rows.append(m)
                    cols.append(base + cc)
                    vals.append(w[q] * vf[q, a, cc])
    shape = (rwg.num_functions, 3 * mesh.num_faces * nq)
    return sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()


def project_field(rwg: RwgBasis, field_fn, n_q: int = 4) -> np.ndarray:
    """Vector of int f_m . field ds for a pointwise vector field."""
    pts, _, _ = _quad_points(rwg, n_q)
    V = _test_matrix(rwg, n_q)
    return V @ np.asarray(field_fn(pts), float).ravel()


def test_field_rotated(rwg: RwgBasis, field_fn, n_q: int = 4) -> np.ndarray:
    """Vector of <n x f_m, field x n> = - int f_m . field ds."""
    return -project_field(rwg, field_fn, n_q)


# ---------------------------------------------------------------------------
# projector / preconditioner sandwiches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichSet:
    """Dense left and right factors shared by all blocks and the RHS.

    left_loop  = (star part of preconditioner) G^-1
    left_star  = (loop part of preconditioner) G^-1 P_LH
    right_loop = P_LH,  right_star = P_S  (primal-side projectors)
    """

    left_loop: np.ndarray
    left_star: np.ndarray
    right_loop: np.ndarray
    right_star: np.ndarray


def build_sandwiches(
    ops: StaticOperatorSet, projectors: ProjectorSet, gram: MixedGram
) -> SandwichSet:
    psh = projectors.dense("pSigmaH")
    pl = projectors.dense("pLambda")
    p_lh = projectors.dense("PLambdaH")
    p_s = projectors.dense("PSigma")
    ginv = gram.inv()
    t_sh = psh @ ops.T0s_bc @ psh
    t_l = pl @ ops.T0h_bc @ pl
    return SandwichSet(
        left_loop=t_sh @ ginv,
        left_star=t_l @ ginv @ p_lh,
        right_loop=p_lh,
        right_star=p_s,
    )


def _combine(te, tp, ke, kp, medium: MediumPair):
    """2x2 coupled-operator combination of one exterior/interior block
    quadruple; any input may be None (treated as zero)."""
    n = next(m.shape[0] for m in (te, tp, ke, kp) if m is not None)
    z = np.zeros((n, n))
    te = z if te is None else te
    tp = z if tp is None else tp
    ke = z if ke is None else ke
    kp = z if kp is None else kp
    ks = ke + kp
    return (
        medium.eta * te + medium.eta_p * tp,
        -ks,
        ks,
        te / medium.eta + tp / medium.eta_p,
    )


def _sandwich(left, b11, b12, b21, b22, right):
    n = b11.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = left @ b11 @ right
    out[:n, n:] = left @ b12 @ right
    out[n:, :n] = left @ b21 @ right
    out[n:, n:] = left @ b22 @ right
    return out


# ---------------------------------------------------------------------------
# regularized blocks
# ---------------------------------------------------------------------------

@dataclass
class MotSystem:
    """Immutable marching data: dense blocks, RHS generator, bookkeeping."""

    Q_blocks: list
    rhs: "RhsAssembler"
    k_max: int
    dt: float
    t_max: float
    n_edges: int
    projectors: ProjectorSet = None

    @property
    def n_unknowns(self) -> int:
        return 2 * self.n_edges


def assemble_qi_blocks(
    rwg: RwgBasis,
    sandwiches: SandwichSet,
    medium: MediumPair,
    dt: float,
    t_max: float,
    n_q: int = 4,
    verbose: bool = False,
) -> list:
    """Dense blocks Q_0 ... Q_{k_max+1} of the regularized system."""
    k_max = int(ceil(t_max / dt))
    ne = rwg.num_functions
    if sandwiches.left_loop.shape != (ne, ne):
        raise DimensionMismatch("sandwich factors do not match the basis size")
    media = {"ext": medium.exterior, "int": medium.interior}
    same_media = medium.c == medium.c_p

    # family -> highest nonzero block index
    i_top = {
        "T": k_max, "K": k_max,
        "That": k_max + 1, "Khat": k_max + 1,
        "Ttilde": k_max - 1, "Ktilde": k_max - 1,
    }

    cache = {}

    def blk(fam, side, i):
        if i > i_top[fam]:
            return None
        key = (fam, "ext" if same_media else side, i)
        if key not in cache:
            cache[key] = assemble_retarded_block(
                rwg, fam, i, dt, media[side].c, t_max, n_q=n_q
            )
            if verbose:
                print(f"  block {fam}[{i}] ({side}) done", flush=True)
        return cache[key]

    blocks = []
    for i in range(k_max + 2):
        q = np.zeros((2 * ne, 2 * ne))
        # plain hat blocks feed both the ll and ss sandwiches
        pe, pp = blk("T", "ext", i), blk("T", "int", i)
        ke, kp = blk("K", "ext", i), blk("K", "int", i)
        if any(m is not None for m in (pe, pp, ke, kp)):
            b = _combine(pe, pp, ke, kp, medium)
            q += _sandwich(sandwiches.left_loop, *b, sandwiches.right_loop)
            q += _sandwich(sandwiches.left_star, *b, sandwiches.right_star)
        # quadratic-signature blocks: loop-tested, star-trial
        he, hp = blk("That", "ext", i), blk("That", "int", i)
        khe, khp = blk("Khat", "ext", i), blk("Khat", "int", i)
        if any(m is not None for m in (he, hp, khe, khp)):
            b = _combine(he, hp, khe, khp, medium)
            q += _sandwich(sandwiches.left_loop, *b, sandwiches.right_star)
        # time-integrated blocks: star-tested, loop-trial; the saturated
        # double-layer tail (i > k_max - 1) is annihilated by the middle
        # loop projectors analytically and therefore zeroed explicitly
        te, tp = blk("Ttilde", "ext", i), blk("Ttilde", "int", i)
        kte, ktp = blk("Ktilde", "ext", i), blk("Ktilde", "int", i)
        if any(m is not None for m in (te, tp, kte, ktp)):
            b = _combine(te, tp, kte, ktp, medium)
            q += _sandwich(sandwiches.left_star, *b, sandwiches.right_loop)
        blocks.append(q)
    return blocks


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

class RhsAssembler:
    """Per-step right-hand-side vectors of the regularized system.

    The loop part integrates the incident traces against the pulse in
    closed form (erf differences); the star part samples the running time
    integral of the traces at the collocation instant and is zeroed once
    the pulse has passed the whole surface (relative envelope threshold
    ``truncation_rel``).
    """

    def __init__(
        self,
        rwg: RwgBasis,
        sandwiches: SandwichSet,
        medium: MediumPair,
        exc: PlaneWaveExcitation,
        dt: float,
        t_max: float,
        n_q: int = 4,
        truncation_rel: float = 1e-14,
    ):
        self.rwg = rwg
        self.sand = sandwiches
        self.medium = medium
        self.exc = exc
        self.dt = dt
        self.t_max = t_max
        self.truncation_rel = truncation_rel
        self.points, _, _ = _quad_points(rwg, n_q)
        self.V = _test_matrix(rwg, n_q)
        self._truncated_from = None
        kxp = np.cross(exc.direction, exc.polarization)
        self._pol_e = exc.polarization
        self._pol_h = kxp / medium.eta

    def _tested_pair(self, scal: np.ndarray):
        """Rotated-tested (e-slot, h-slot) vectors for a field
        scal(x) * pol_e and scal(x) * pol_h."""
        fe = scal[:, None] * self._pol_e
        fh = scal[:, None] * self._pol_h
        return -(self.V @ fe.ravel()), -(self.V @ fh.ravel())

    def loop_part(self, i: int) -> np.ndarray:
        c = self.medium.c
        g = self.exc.envelope_integral(
            self.points, (i - 1) * self.dt, i * self.dt, c
        )
        ev, hv = self._tested_pair(g)
        L = self.sand.left_loop
        return np.concatenate([L @ ev, L @ hv]) / self.dt

    def star_part(self, i: int) -> np.ndarray:
        c = self.medium.c
        t = i * self.dt
        n = self.rwg.num_functions
        if self._truncated_from is not None and i >= self._truncated_from:
            return np.zeros(2 * n)
        if self.exc.envelope_peak_decayed(self.points, t, c, self.truncation_rel):
            if self._truncated_from is None:
                self._truncated_from = i
            return np.zeros(2 * n)
        g = self.exc.envelope_antiderivative(self.points, t, c)
        ev, hv = self._tested_pair(g)
        L = self.sand.left_star
        return np.concatenate([L @ ev, L @ hv]) / self.t_max

    def __call__(self, i: int) -> np.ndarray:
        return self.loop_part(i) + self.star_part(i)


# ---------------------------------------------------------------------------
# classical baseline
# ---------------------------------------------------------------------------

def _classical_components(op: str, dt: float, c: float):
    """Kernel components of the classical hat/collocation scheme.

    The single-layer part carries the differentiated hat over c; the
    hypersingular part carries c times the running integral of the hat
    (ramp-like, with constant tail dt); the double-layer part carries the
    hat itself.
    """
    h = temporal.hat(dt)
    if op == "T":
        return [
            RadialComponent(KIND_SL, ((-1, h.derivative()),), -_INV_4PI / c),
            RadialComponent(KIND_HYP, ((-1, h.antiderivative()),), -_INV_4PI * c),
        ]
    if op == "K":
        return [
            RadialComponent(
                KIND_DL, ((-2, h.derivative().scaled(1.0 / c)), (-3, h)), -_INV_4PI
            ),
        ]
    raise ConfigError(f"unknown classical operator {op!r}")


def _classical_block(rwg, op, i, dt, c, n_q):
    comps = _classical_components(op, dt, c)
    breaks, coeffs, kinds = build_component_tables(comps, i * dt, c)
    return assemble_kernel_matrix(rwg, rwg, breaks, coeffs, kinds, n_q=n_q)


@dataclass
class ClassicalSystem:
    """Finite blocks plus the constant tail matrix of the baseline."""

    blocks: list
    tail: np.ndarray
    k_max: int
    dt: float
    n_edges: int

    @property
    def n_unknowns(self) -> int:
        return 2 * self.n_edges


def assemble_classical_blocks(
    rwg: RwgBasis,
    medium: MediumPair,
    dt: float,
    n_q: int = 4,
    verbose: bool = False,
) -> ClassicalSystem:
    """Blocks B_0 ... B_{k_max+1} and the constant tail matrix C of the
    classical hat/collocation system.

    C is the saturated hypersingular contribution; B_i = C exactly for
    every i >= k_max + 2, so the history convolution beyond the stored
    blocks reduces to C times the running sum of older solutions.
    """
    t_max = medium.t_max(rwg.mesh.diameter)
    k_max = int(ceil(t_max / dt))
    media = {"ext": medium.exterior, "int": medium.interior}
    same_media = medium.c == medium.c_p
    cache = {}

    def blk(op, side, i):
        key = (op, "ext" if same_media else side, i)
        if key not in cache:
            cache[key] = _classical_block(rwg, op, i, dt, media[side].c, n_q)
            if verbose:
                print(f"  classical {op}[{i}] ({side}) done", flush=True)
        return cache[key]

    ne = rwg.num_functions
    blocks = []
    for i in range(k_max + 2):
        b = _combine(
            blk("T", "ext", i), blk("T", "int", i),
            blk("K", "ext", i), blk("K", "int", i),
            medium,
        )
        q = np.zeros((2 * ne, 2 * ne))
        q[:ne, :ne], q[:ne, ne:], q[ne:, :ne], q[ne:, ne:] = b
        blocks.append(q)
    i_sat = k_max + 2
    b = _combine(
        blk("T", "ext", i_sat), blk("T", "int", i_sat),
        blk("K", "ext", i_sat), blk("K", "int", i_sat),
        medium,
    )
    tail = np.zeros((2 * ne, 2 * ne))
    tail[:ne, :ne], tail[:ne, ne:], tail[ne:, :ne], tail[ne:, ne:] = b
    return ClassicalSystem(
        blocks=blocks, tail=tail, k_max=k_max, dt=dt, n_edges=ne
    )


def classical_rhs(
    rwg: RwgBasis,
    medium: MediumPair,
    exc: PlaneWaveExcitation,
    dt: float,
    n_q: int = 4,
):
    """Collocation RHS generator i -> (e-slot; h-slot) at t = i dt."""
    pts, _, _ = _quad_points(rwg, n_q)
    V = _test_matrix(rwg, n_q)
    c, eta = medium.c, medium.eta

    def rhs(i: int) -> np.ndarray:
        t = i * dt
        ev = -(V @ exc.e_field(pts, t, c).ravel())
        hv = -(V @ exc.h_field(pts, t, c, eta).ravel())
        return np.concatenate([ev, hv])

    return rhs
