"""Piecewise-polynomial temporal shape functions.

The marching scheme uses three local shapes of timestep dt:

* pulse   p0 : indicator of (-dt, 0]
* hat     h0 : triangle on (-dt, dt)
* quad    q0 : C^1 piecewise quadratic on (-dt, 2dt),
               q0(t) = (1/dt) * integral p0(xi) h0(t + xi) dxi
* ramp    : running integral of p0 — (t + dt) on (-dt, 0], constant dt after

Shifted copies are u_i(t) = u_0(t - i dt).  All calculus on these shapes
(derivatives, antiderivatives, retarded-time substitution) is done on the
polynomial coefficients, never numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidTimestep

__all__ = [
    "PiecewisePoly",
    "pulse",
    "hat",
    "quad_spline",
    "ramp",
    "eval_temporal",
]


@dataclass(frozen=True)
class PiecewisePoly:
    """Piecewise polynomial in global coordinates with a constant tail.

    Value is 0 for t <= breaks[0], ``tail`` for t >= breaks[-1], and
    sum_k coeffs[j, k] t^k on (breaks[j], breaks[j+1]).
    """

    breaks: np.ndarray          # (n+1,) strictly increasing
    coeffs: np.ndarray          # (n, deg+1), ascending powers of t
    tail: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "breaks", np.asarray(self.breaks, float))
        object.__setattr__(self, "coeffs", np.atleast_2d(np.asarray(self.coeffs, float)))
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")

    # ------------------------------------------------------------------ eval

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t >= self.breaks[-1], self.tail, 0.0)
        idx = np.searchsorted(self.breaks, t, side="left") - 1
        inside = (idx >= 0) & (idx < len(self.coeffs)) & (t < self.breaks[-1])
        ti = t[inside]
        ci = self.coeffs[idx[inside]]
        acc = np.zeros_like(ti)
        for k in range(ci.shape[1] - 1, -1, -1):
            acc = acc * ti + ci[:, k]
        out[inside] = acc
        return out if out.shape else float(out)

    # ------------------------------------------------------------- calculus

    def derivative(self) -> "PiecewisePoly":
        """Piecewise derivative (jumps at kinks are ignored — only used on
        shapes whose assembly formulas are written kink-free)."""
        n, d = self.coeffs.shape
        if d == 1:
            return PiecewisePoly(self.breaks, np.zeros((n, 1)), 0.0)
        dc = self.coeffs[:, 1:] * np.arange(1, d)[None, :]
        return PiecewisePoly(self.breaks, dc, 0.0)

    def antiderivative(self) -> "PiecewisePoly":
        """Running integral from -infinity (value 0 before the support);
        the final value becomes the constant tail."""
        n, d = self.coeffs.shape
        ac = np.zeros((n, d + 1))
        ac[:, 1:] = self.coeffs / np.arange(1, d + 1)[None, :]
        run = 0.0
        for j in range(n):
            lo = self.breaks[j]
            val_lo = sum(ac[j, k] * lo**k for k in range(d + 1))
            ac[j, 0] = run - val_lo
            hi = self.breaks[j + 1]
            run = sum(ac[j, k] * hi**k for k in range(d + 1))
        return PiecewisePoly(self.breaks, ac, tail=run)

    def scaled(self, a: float) -> "PiecewisePoly":
        return PiecewisePoly(self.breaks, a * self.coeffs, a * self.tail)

    @property
    def support(self):
        return float(self.breaks[0]), float(self.breaks[-1])

    # ------------------------------------------ retarded-time substitution

    def retarded_radial(self, t_i: float, c: float):
        """Express u(t_i - R/c) as a piecewise polynomial in R >= 0.

        Returns (r_breaks, r_coeffs): ascending radial breakpoints and
        ascending-power coefficients in R.  A nonzero tail of u becomes a
        constant piece [0, R_first]; the function is 0 beyond r_breaks[-1].
        """
        n, d = self.coeffs.shape
        r_of_t = c * (t_i - self.breaks)      # decreasing
        pieces = []
        for j in range(n):
            r_lo, r_hi = r_of_t[j + 1], r_of_t[j]
            if r_hi <= 0:
                continue
            r_lo = max(r_lo, 0.0)
            if r_hi <= r_lo:
                continue
            # compose u_j(t_i - R/c): binomial expansion in R
            comp = np.zeros(d)
            for k in range(d):
                # coeffs[j,k] * (t_i - R/c)^k
                for p in range(k + 1):
                    comp[p] += (
                        self.coeffs[j, k]
                        * _binom(k, p)
                        * t_i ** (k - p)
                        * (-1.0 / c) ** p
                    )
            pieces.append((r_lo, r_hi, comp))
        pieces.sort(key=lambda pr: pr[0])
        if self.tail != 0.0 and r_of_t[-1] > 0:
            pieces.insert(
                0, (0.0, r_of_t[-1], np.array([self.tail] + [0.0] * (d - 1)))
            )
        if not pieces:
            return np.zeros(1), np.zeros((0, d))
        r_breaks = np.array([p[0] for p in pieces] + [pieces[-1][1]])
        r_coeffs = np.array([p[2] for p in pieces])
        return r_breaks, r_coeffs


def _binom(n, k):
    from math import comb

    return float(comb(n, k))


# ---------------------------------------------------------------------------
# the standard shapes
# ---------------------------------------------------------------------------

def _check_dt(dt):
    if dt <= 0:
        raise InvalidTimestep(f"dt must be positive, got {dt}")


def pulse(dt: float) -> PiecewisePoly:
    """p0: indicator of (-dt, 0]."""
    _check_dt(dt)
    return PiecewisePoly(np.array([-dt, 0.0]), np.array([[1.0]]))


def hat(dt: float) -> PiecewisePoly:
    """h0: triangle, 1 - |t|/dt on (-dt, dt)."""
    _check_dt(dt)
    return PiecewisePoly(
        np.array([-dt, 0.0, dt]),
        np.array([[1.0, 1.0 / dt], [1.0, -1.0 / dt]]),
    )


def quad_spline(dt: float) -> PiecewisePoly:
    """q0: the C^1 piecewise quadratic (1/dt) * (p0 correlated with h0).

    Branches: (t+dt)^2/(2 dt^2) on (-dt, 0); 1/2 + t/dt - t^2/dt^2 on
    (0, dt); (t - 2dt)^2/(2 dt^2) on (dt, 2dt).
    """
    _check_dt(dt)
    d2 = dt * dt
    return PiecewisePoly(
        np.array([-dt, 0.0, dt, 2 * dt]),
        np.array(
            [
                [0.5, 1.0 / dt, 0.5 / d2],
                [0.5, 1.0 / dt, -1.0 / d2],
                [2.0, -2.0 / dt, 0.5 / d2],
            ]
        ),
    )


def ramp(dt: float) -> PiecewisePoly:
    """Running integral of p0: t + dt on (-dt, 0], constant dt afterwards."""
    _check_dt(dt)
    return PiecewisePoly(np.array([-dt, 0.0]), np.array([[dt, 1.0]]), tail=dt)


_KINDS = {
    "pulse": pulse,
    "hat": hat,
    "quad": quad_spline,
    "ramp": ramp,
}


def eval_temporal(kind: str, i: int, t, dt: float):
    """Evaluate the shifted shape u_i(t) = u_0(t - i dt)."""
    try:
        u = _KINDS[kind](dt)
    except KeyError:
        raise ValueError(f"unknown temporal kind {kind!r}") from None
    return u(np.asarray(t, float) - i * dt)
