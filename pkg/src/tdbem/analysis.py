"""Post-processing analyses: companion-matrix stability spectra,
condition-number sweeps, frequency-domain far fields from the marching
history, the Mie / Rayleigh sphere reference, and the projected exact
plane-wave traces on the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import spherical_jn, spherical_yn

from .basis import BcBasis, MixedGram, RwgBasis
from .errors import EigFailure
from .retarded import Medium
from .system_assembly import (
    MediumPair,
    PlaneWaveExcitation,
    project_field,
)

__all__ = [
    "CompanionSpectrum",
    "FarFieldPattern",
    "companion_spectrum",
    "condition_number",
    "condition_sweep",
    "pulse_spectrum",
    "gaussian_time_spectrum",
    "incident_spectrum_amplitude",
    "far_field",
    "dipole_far_field",
    "mie_reference",
    "exact_sphere_traces",
    "theta_cut",
]


# ---------------------------------------------------------------------------
# companion-matrix stability analysis
# ---------------------------------------------------------------------------

@dataclass
class CompanionSpectrum:
    """Eigenvalues of the one-step map of the marching recursion.

    With a constant-tail augmentation the running-sum state introduces
    structural eigenvalues at exactly 1 whose eigenvectors have no mass
    on the solution blocks; ``physical_mask`` excludes those (it is all
    True when no tail is present).
    """

    eigenvalues: np.ndarray
    system_size: int
    tail_mode: str  # "none" or "constant-tail-augmented"
    physical_mask: np.ndarray = None

    def __post_init__(self):
        if self.physical_mask is None:
            self.physical_mask = np.ones(len(self.eigenvalues), bool)

    @property
    def spectral_radius(self) -> float:
        lam = self.eigenvalues[self.physical_mask]
        return float(np.abs(lam).max()) if len(lam) else 0.0


def companion_spectrum(q_blocks, tail: np.ndarray | None = None) -> CompanionSpectrum:
    """Spectrum of the block companion matrix of

        w_i = -Q0^{-1} ( sum_{k=1}^{p} Q_k w_{i-k} [+ C s_i] ),
        s_i = s_{i-1} + w_{i-p}            (only with a tail matrix C),

    where p = len(q_blocks) - 1 and s is the running sum of solutions
    older than the stored history.
    """
    q0 = q_blocks[0]
    n = q0.shape[0]
    p = len(q_blocks) - 1
    if p == 0 and tail is None:
        return CompanionSpectrum(np.zeros(0, complex), n, "none")
    lu = sla.lu_factor(q0)
    a_blocks = [-sla.lu_solve(lu, q_blocks[k]) for k in range(1, p + 1)]
    if tail is None:
        m = p * n
        comp = np.zeros((m, m))
        for k, a in enumerate(a_blocks):
            comp[:n, k * n : (k + 1) * n] = a
        for k in range(1, p):
            comp[k * n : (k + 1) * n, (k - 1) * n : k * n] = np.eye(n)
        try:
            lam = sla.eigvals(comp)
        except Exception as exc:  # pragma: no cover - LAPACK failure
            raise EigFailure(str(exc)) from exc
        return CompanionSpectrum(lam, n, "none")
    # constant-tail augmentation: state (w_i, ..., w_{i-p+1}, s_i) with
    # s_{i+1} = s_i + w_{i+1-p}; the tail acts on s_{i+1}
    ct = -sla.lu_solve(lu, tail)
    m = (p + 1) * n
    comp = np.zeros((m, m))
    for k, a in enumerate(a_blocks):
        comp[:n, k * n : (k + 1) * n] = a
    comp[:n, (p - 1) * n : p * n] += ct       # tail acting on w_{i+1-p}
    comp[:n, p * n :] = ct                    # tail acting on s_i
    for k in range(1, p):
        comp[k * n : (k + 1) * n, (k - 1) * n : k * n] = np.eye(n)
    comp[p * n :, (p - 1) * n : p * n] = np.eye(n)
    comp[p * n :, p * n :] = np.eye(n)
    try:
        lam, vec = sla.eig(comp, right=True)
    except Exception as exc:  # pragma: no cover - LAPACK failure
        raise EigFailure(str(exc)) from exc
    # structural eigenvalue-1 modes live purely in the running-sum state
    w_mass = np.linalg.norm(vec[: p * n, :], axis=0)
    tot = np.linalg.norm(vec, axis=0)
    physical = w_mass > 1e-8 * tot
    return CompanionSpectrum(lam, n, "constant-tail-augmented", physical)


# ---------------------------------------------------------------------------
# conditioning
# ---------------------------------------------------------------------------

def condition_number(m: np.ndarray) -> float:
    """2-norm condition number via dense SVD."""
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[0] / s[-1])


def condition_sweep(parameter: str, values, q0_factory) -> list:
    """Per-value condition number of the step matrix.

    ``q0_factory(value)`` must return the dense Q0 for that parameter
    value; the result is a list of {parameter, value, cond} records.
    """
    out = []
    for v in values:
        q0 = q0_factory(v)
        out.append({"parameter": parameter, "value": v, "cond": condition_number(q0)})
    return out


# ---------------------------------------------------------------------------
# frequency transforms
# ---------------------------------------------------------------------------

def pulse_spectrum(omega: float, dt: float) -> complex:
    """Fourier transform (e^{-i omega t} convention) of the unit pulse
    supported on (-dt, 0)."""
    if omega == 0.0:
        return complex(dt)
    return (np.exp(1j * omega * dt) - 1.0) / (1j * omega)


def gaussian_time_spectrum(exc: PlaneWaveExcitation, omega: float, c: float) -> complex:
    """Closed-form transform of the temporal envelope at a point with
    zero propagation phase: integral of (4A / w sqrt(pi)) e^{-z(t)^2}
    e^{-i omega t} dt at k.x = 0."""
    a = 4.0 * c / exc.width
    return (exc.amplitude / c) * np.exp(
        -(omega**2) / (4.0 * a**2) - 1j * omega * exc.t0
    )


def incident_spectrum_amplitude(
    exc: PlaneWaveExcitation, omega: float, c: float
) -> float:
    """|E^in(omega)|: spectral amplitude of the incident plane wave."""
    return abs(gaussian_time_spectrum(exc, omega, c))


def _series_transform(series, omega: float, dt: float) -> np.ndarray:
    """sum_i x_i e^{-i omega i dt}, skipping the i = 0 zero state."""
    out = np.zeros(series[1].shape, complex)
    for i in range(1, len(series)):
        out += series[i] * np.exp(-1j * omega * i * dt)
    return out


# ---------------------------------------------------------------------------
# far fields
# ---------------------------------------------------------------------------

@dataclass
class FarFieldPattern:
    """Far-zone electric field pattern (coefficient of e^{-i kappa r}/r)."""

    frequency: float
    directions: np.ndarray          # (n, 3) unit vectors
    E_theta: np.ndarray             # (n,) complex
    E_phi: np.ndarray               # (n,) complex
    decayed: bool = True

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.abs(self.E_theta) ** 2 + np.abs(self.E_phi) ** 2)


def _sph_unit_vectors(directions: np.ndarray):
    """theta/phi unit vectors for each direction (z polar axis)."""
    d = np.asarray(directions, float)
    theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
    phi = np.arctan2(d[:, 1], d[:, 0])
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    e_t = np.stack([ct * cp, ct * sp, -st], axis=1)
    e_p = np.stack([-sp, cp, np.zeros_like(sp)], axis=1)
    return e_t, e_p


def theta_cut(n: int = 181, phi: float = 0.0) -> np.ndarray:
    """Unit directions sweeping theta in [0, pi] at fixed phi."""
    th = np.linspace(0.0, np.pi, n)
    return np.stack(
        [np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.cos(th)], axis=1
    )


def _radiation_vectors(rwg: RwgBasis, direction: np.ndarray, kappa: float, n_q: int):
    """Complex (3, N_e) map: R @ coeffs = int f(y) e^{i kappa rhat.y} ds."""
    from .quadrature import triangle_rule

    bary, wq = triangle_rule(n_q)
    mesh = rwg.mesh
    out = np.zeros((3, rwg.num_functions), complex)
    for f in range(mesh.num_faces):
        corners = mesh.face_corners(f)
        pts = bary @ corners
        vf = rwg.eval_on_face(f, pts)          # (nq, 3 funcs, 3 comps)
        phase = np.exp(1j * kappa * (pts @ direction)) * wq * mesh.areas[f]
        loc = np.einsum("q,qac->ca", phase, vf)
        for a in range(3):
            out[:, rwg.face_edges[f, a]] += loc[:, a]
    return out


def far_field(
    rwg: RwgBasis,
    sol,
    frequency: float,
    directions: np.ndarray,
    medium: Medium,
    dt: float,
    n_q: int = 4,
    decay_rel: float = 1e-8,
) -> FarFieldPattern:
    """Frequency-domain far field from the marching history.

    The loop and star current components are transformed separately
    (they are stored separately to preserve digits) and only combined
    inside the radiation integral.  E_inf(rhat) =
    (i kappa / 4 pi)(-eta (J - (rhat.J) rhat) + rhat x M) with
    J = int j e^{i kappa rhat.y} ds and kappa = omega / c.
    """
    omega = 2.0 * np.pi * frequency
    kappa = omega / medium.c
    p0 = pulse_spectrum(omega, dt)
    jl = _series_transform(sol.j_loop, omega, dt) * p0
    js = _series_transform(sol.j_star, omega, dt) * p0
    ml = _series_transform(sol.m_loop, omega, dt) * p0
    ms = _series_transform(sol.m_star, omega, dt) * p0

    # decay check: last-step current must be negligible vs the peak
    norms = [np.linalg.norm(sol.j_loop[i] + sol.j_star[i]) for i in range(1, len(sol.j_loop))]
    decayed = bool(norms and norms[-1] <= decay_rel * max(norms))

    d = np.atleast_2d(np.asarray(directions, float))
    e_t, e_p = _sph_unit_vectors(d)
    et = np.zeros(len(d), complex)
    ep = np.zeros(len(d), complex)
    pref = 1j * kappa / (4.0 * np.pi)
    for idx in range(len(d)):
        rhat = d[idx]
        rad = _radiation_vectors(rwg, rhat, kappa, n_q)
        j_hat = rad @ jl + rad @ js
        m_hat = rad @ ml + rad @ ms
        e_inf = pref * (
            -medium.eta * (j_hat - (rhat @ j_hat) * rhat) + np.cross(rhat, m_hat)
        )
        et[idx] = e_inf @ e_t[idx]
        ep[idx] = e_inf @ e_p[idx]
    return FarFieldPattern(frequency, d, et, ep, decayed)


def dipole_far_field(
    p_dipole: np.ndarray, directions: np.ndarray, kappa: float, eps: float
) -> FarFieldPattern:
    """Closed-form radiation pattern of a time-harmonic electric dipole:
    E_inf = (kappa^2 / 4 pi eps)(I - rhat rhat) p."""
    d = np.atleast_2d(np.asarray(directions, float))
    e_t, e_p = _sph_unit_vectors(d)
    et = np.zeros(len(d), complex)
    ep = np.zeros(len(d), complex)
    pref = kappa**2 / (4.0 * np.pi * eps)
    for idx in range(len(d)):
        rhat = d[idx]
        e_inf = pref * (p_dipole - (rhat @ p_dipole) * rhat)
        et[idx] = e_inf @ e_t[idx]
        ep[idx] = e_inf @ e_p[idx]
    return FarFieldPattern(0.0, d, et, ep)


# ---------------------------------------------------------------------------
# Mie / Rayleigh sphere reference
# ---------------------------------------------------------------------------

def _riccati(n_max: int, x: float):
    """psi_n(x) = x j_n(x), xi_n(x) = x (j_n - i y_n)(x) and derivatives."""
    n = np.arange(n_max + 1)
    jn = spherical_jn(n, x)
    jnp = spherical_jn(n, x, derivative=True)
    yn = spherical_yn(n, x)
    ynp = spherical_yn(n, x, derivative=True)
    psi = x * jn
    psip = jn + x * jnp
    hn = jn - 1j * yn
    hnp = jnp - 1j * ynp
    xi = x * hn
    xip = hn + x * hnp
    return psi, psip, xi, xip


def _angular_functions(n_max: int, cos_t: np.ndarray):
    """pi_n and tau_n angular functions, n = 1..n_max."""
    npts = len(cos_t)
    pi_n = np.zeros((n_max + 1, npts))
    tau_n = np.zeros((n_max + 1, npts))
    pi_n[1] = 1.0
    if n_max >= 2:
        pi_n[2] = 3.0 * cos_t
    for n in range(3, n_max + 1):
        pi_n[n] = ((2 * n - 1) * cos_t * pi_n[n - 1] - n * pi_n[n - 2]) / (n - 1)
    for n in range(1, n_max + 1):
        tau_n[n] = n * cos_t * pi_n[n] - (n + 1) * pi_n[n - 1]
    return pi_n[1:], tau_n[1:]


def mie_reference(
    radius: float,
    medium: MediumPair,
    frequency: float,
    directions: np.ndarray,
    n_max: int | None = None,
    rayleigh_switch: float = 1e-3,
) -> FarFieldPattern:
    """Unit-amplitude reference far field of a dielectric sphere
    (incidence +z, polarization +x), per unit incident spectral
    amplitude.  Below size parameter ``rayleigh_switch`` the static
    dipole-polarizability (Rayleigh) limit is used.
    """
    omega = 2.0 * np.pi * frequency
    kappa = omega / medium.c
    x = kappa * radius
    d = np.atleast_2d(np.asarray(directions, float))
    e_t, e_p = _sph_unit_vectors(d)
    theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
    phi = np.arctan2(d[:, 1], d[:, 0])
    eps_r = medium.eps_p / medium.eps
    mu_r = medium.mu_p / medium.mu
    if x < rayleigh_switch:
        # static polarizabilities; E_inf per unit incident amplitude
        a_r = (eps_r - 1.0) / (eps_r + 2.0)
        b_r = (mu_r - 1.0) / (mu_r + 2.0)
        c3 = kappa**2 * radius**3
        et = c3 * (a_r * np.cos(theta) + b_r) * np.cos(phi)
        ep = -c3 * (a_r + b_r * np.cos(theta)) * np.sin(phi)
        return FarFieldPattern(frequency, d, et.astype(complex), ep.astype(complex))
    m = np.sqrt(eps_r * mu_r)
    if n_max is None:
        n_max = int(np.ceil(x + 4.0 * x ** (1.0 / 3.0) + 10))
    a_n, b_n = _mie_ab(m, mu_r, x, n_max)
    pi_n, tau_n = _angular_functions(n_max, np.cos(theta))
    n = np.arange(1, n_max + 1)
    w = (2 * n + 1) / (n * (n + 1))
    s1 = np.einsum("n,nk->k", w * a_n, pi_n) + np.einsum("n,nk->k", w * b_n, tau_n)
    s2 = np.einsum("n,nk->k", w * a_n, tau_n) + np.einsum("n,nk->k", w * b_n, pi_n)
    et = (1j / kappa) * np.cos(phi) * s2
    ep = -(1j / kappa) * np.sin(phi) * s1
    return FarFieldPattern(frequency, d, et, ep)


def _mie_ab(m: float, mu_r: float, x: float, n_max: int):
    """Mie coefficients a_n (electric) and b_n (magnetic) of a
    penetrable sphere with relative refractive index m and relative
    permeability mu_r, size parameter x, in Riccati-Bessel form."""
    psi, psip, xi, xip = _riccati(n_max, x)
    psim, psimp, _, _ = _riccati(n_max, m * x)
    n = np.arange(1, n_max + 1)
    a = (m * psim[n] * psip[n] - mu_r * psi[n] * psimp[n]) / (
        m * psim[n] * xip[n] - mu_r * xi[n] * psimp[n]
    )
    b = (mu_r * psim[n] * psip[n] - m * psi[n] * psimp[n]) / (
        mu_r * psim[n] * xip[n] - m * xi[n] * psimp[n]
    )
    return a, b


# ---------------------------------------------------------------------------
# exact plane-wave traces on the sphere (zero-contrast oracle)
# ---------------------------------------------------------------------------

def exact_sphere_traces(
    exc: PlaneWaveExcitation,
    bc: BcBasis,
    gram: MixedGram,
    i: int,
    dt: float,
    medium: MediumPair,
    n_q: int = 4,
):
    """Projection of the exact zero-contrast solution
    (j, m) = (n x h^in, e^in x n) into the RWG coefficient space:

        (j_i; m_i) = -G^{-T} (h_i; e_i),
        [h_i]_m = int g_m . h^in(., i dt),  [e_i]_m = -int g_m . e^in.
    """
    t = i * dt
    c, eta = medium.c, medium.eta
    rr = bc.rwg_refined
    th = project_field(rr, lambda x: exc.h_field(x, t, c, eta), n_q)
    te = project_field(rr, lambda x: exc.e_field(x, t, c), n_q)
    h_vec = bc.coeffs.T @ th
    e_vec = -(bc.coeffs.T @ te)
    j_ext = -gram.solve_t(np.asarray(h_vec).ravel())
    m_ext = -gram.solve_t(np.asarray(e_vec).ravel())
    return j_ext, m_ext
