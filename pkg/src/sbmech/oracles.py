"""Closed-form and brute-force reference solutions used for verification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import SolverError

SQRT23 = math.sqrt(2.0 / 3.0)


@dataclass(frozen=True)
class KirschSolution:
    """Infinite plate with a traction-free circular hole under remote uniaxial ``sigma_inf`` along x.

    The stress field does not depend on the elastic constants; ``E`` and
    ``nu`` enter only the (plane-strain) displacement field.
    """

    R: float = 1.0
    sigma_inf: float = 1.0
    E: float = 1.0
    nu: float = 0.3

    def polar(self, r, theta):
        """Return ``(s_rr, s_tt, s_rt)`` at polar coordinates."""
        r = np.asarray(r, dtype=float)
        if np.any(r < self.R * (1.0 - 1e-12)):
            raise ValueError(f"Kirsch field undefined inside the hole (r < {self.R})")
        s = 0.5 * self.sigma_inf
        a2 = (self.R / r) ** 2
        a4 = a2 * a2
        c2 = np.cos(2.0 * theta)
        s2 = np.sin(2.0 * theta)
        s_rr = s * (1.0 - a2) + s * (1.0 - 4.0 * a2 + 3.0 * a4) * c2
        s_tt = s * (1.0 + a2) - s * (1.0 + 3.0 * a4) * c2
        s_rt = -s * (1.0 + 2.0 * a2 - 3.0 * a4) * s2
        return s_rr, s_tt, s_rt

    def stress(self, x, y):
        """Cartesian ``(s_xx, s_yy, s_xy)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        s_rr, s_tt, s_rt = self.polar(r, th)
        c = np.cos(th)
        s = np.sin(th)
        sxx = s_rr * c * c + s_tt * s * s - 2.0 * s_rt * s * c
        syy = s_rr * s * s + s_tt * c * c + 2.0 * s_rt * s * c
        sxy = (s_rr - s_tt) * s * c + s_rt * (c * c - s * s)
        return sxx, syy, sxy

    def displacement(self, x, y):
        """Plane-strain Cartesian displacement ``(u_x, u_y)``, zero at the hole center.

        With ``kappa = 3 - 4 nu``::

            u_r = s/(4 mu) [r ((kappa - 1)/2 + cos 2t) + R^2/r (1 + (kappa + 1) cos 2t) - R^4/r^3 cos 2t]
            u_t = s/(4 mu) [(1 - kappa) R^2/r - r - R^4/r^3] sin 2t
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        if np.any(r < self.R * (1.0 - 1e-12)):
            raise ValueError(f"Kirsch field undefined inside the hole (r < {self.R})")
        th = np.arctan2(y, x)
        mu = self.E / (2.0 * (1.0 + self.nu))
        kappa = 3.0 - 4.0 * self.nu
        R2 = self.R**2
        c2 = np.cos(2.0 * th)
        k = self.sigma_inf / (4.0 * mu)
        ur = k * (r * (0.5 * (kappa - 1.0) + c2) + R2 / r * (1.0 + (kappa + 1.0) * c2) - R2 * R2 / r**3 * c2)
        ut = k * ((1.0 - kappa) * R2 / r - r - R2 * R2 / r**3) * np.sin(2.0 * th)
        c = np.cos(th)
        s = np.sin(th)
        return ur * c - ut * s, ur * s + ut * c


def kirsch_stress(x, y, R=1.0, sigma_inf=1.0):
    return KirschSolution(R, sigma_inf).stress(x, y)


def j2_consistency_oracle(eta_trial_norm, alpha_n, sigma_y, H, theta, mu, K=None, tol=1e-12):
    """Plastic multiplier by plain bisection of the scalar consistency equation.

    Solves ``|eta_trial| - (2 mu + 2/3 (1 - theta) H) dg - sqrt(2/3) K(alpha_n + sqrt(2/3) dg) = 0``
    with ``K(a) = sigma_y + theta H a`` unless ``K`` is given.
    """
    if K is None:

        def K(a):
            return sigma_y + theta * H * a

    def g(dg):
        return eta_trial_norm - (2.0 * mu + 2.0 / 3.0 * (1.0 - theta) * H) * dg - SQRT23 * K(alpha_n + SQRT23 * dg)

    f_trial = g(0.0)
    if f_trial <= 0.0:
        raise ValueError(f"trial state is not plastic (f_trial={f_trial:g})")
    lo, hi = 0.0, f_trial / (2.0 * mu) * 10.0
    if g(hi) > 0.0:
        raise SolverError(f"no sign change in [0, {hi:g}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def smoothed_step_integral(profile, eps, n=20001):
    """Trapezoid integral of ``|d profile/ds|`` across the interface (should be 1)."""
    s = np.linspace(-4.0 * eps, 4.0 * eps, n)
    p = profile(s, eps)
    return float(np.sum(np.abs(np.diff(p))))
