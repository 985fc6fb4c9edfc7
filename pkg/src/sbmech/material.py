"""Material models that form a vector space.

Every model supports ``a + b``, ``a - b``, ``-a``, ``alpha * a`` and
``Model.zero()``, acting componentwise on the stored parameters.  Parameters
may be scalars or arrays with leading spatial axes, so a whole cell field of
models is a single model object and the algebra doubles as the field
restriction/prolongation used by multigrid (:func:`model_field_interpolate`).

Strains and stresses are symmetric ``(..., d, d)`` arrays; ``d`` is 2 or 3.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import ContractError, SolverError

SQRT23 = math.sqrt(2.0 / 3.0)


def _check_symmetric(eps):
    eps = np.asarray(eps, dtype=float)
    if eps.shape[-1] != eps.shape[-2]:
        raise ContractError(f"strain must be square in its last two axes, got {eps.shape}")
    scale = max(1.0, float(np.max(np.abs(eps)))) if eps.size else 1.0
    if not np.allclose(eps, np.swapaxes(eps, -1, -2), rtol=0.0, atol=1e-12 * scale):
        raise ContractError("strain tensor is not symmetric")
    return eps


def _eye(d):
    return np.eye(d)


def trace(t):
    return np.trace(t, axis1=-2, axis2=-1)


def dev(t):
    d = t.shape[-1]
    return t - (trace(t) / 3.0 if d == 3 else trace(t) / d)[..., None, None] * _eye(d)


def embed3(t2):
    """Embed in-plane (..., 2, 2) tensors into (..., 3, 3) with zero out-of-plane entries."""
    if t2.shape[-1] == 3:
        return t2
    out = np.zeros(t2.shape[:-2] + (3, 3))
    out[..., :2, :2] = t2
    return out


class _Algebra:
    """Componentwise vector-space operations over the dataclass fields."""

    _scalar_fields: tuple = ()
    _optional_fields: tuple = ()

    def _map2(self, other, fn):
        if type(other) is not type(self):
            return NotImplemented
        kw = {}
        for f in dataclasses.fields(self):
            if not f.init or f.name in ("debug",):
                continue
            a, b = getattr(self, f.name), getattr(other, f.name)
            if a is None and b is None:
                kw[f.name] = None
            else:
                a = 0.0 if a is None else a
                b = 0.0 if b is None else b
                kw[f.name] = fn(a, b)
        kw["debug"] = self.debug or other.debug
        return type(self)(**kw)

    def map(self, fn):
        """Apply ``fn`` to every stored parameter (used for field coarsening/refinement)."""
        kw = {}
        for f in dataclasses.fields(self):
            if not f.init or f.name == "debug":
                continue
            v = getattr(self, f.name)
            kw[f.name] = None if v is None else fn(np.asarray(v, dtype=float))
        kw["debug"] = self.debug
        return type(self)(**kw)

    def __add__(self, other):
        return self._map2(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._map2(other, lambda a, b: a - b)

    def __neg__(self):
        return self.map(lambda a: -a)

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        return self.map(lambda a: alpha * a)

    __rmul__ = __mul__


@dataclass
class IsotropicModel(_Algebra):
    """Linear isotropic elasticity stored as Lame constants plus an eigenstrain.

    ``W = 1/2 lam tr(e)^2 + mu tr(e^2)`` with ``e = eps - eps0``.  The
    energy is linear in ``(lam, mu)``, which is why Lame constants rather than
    ``(E, nu)`` are the stored coordinates.
    """

    lam: object
    mu: object
    eps0: Optional[np.ndarray] = None
    debug: bool = False

    @classmethod
    def zero(cls, ndim=None):
        return cls(0.0, 0.0, None)

    @classmethod
    def from_E_nu(cls, E, nu, eps0=None):
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = E / (2.0 * (1.0 + nu))
        return cls(lam, mu, eps0)

    def _guard(self):
        if self.debug and np.any(np.asarray(self.mu) < 0):
            raise ContractError("unphysical model (mu < 0) evaluated in debug mode")

    def _elastic_strain(self, eps):
        if self.eps0 is None:
            return eps
        e0 = np.asarray(self.eps0)
        d = eps.shape[-1]
        return eps - e0[..., :d, :d] if e0.shape[-1] != d else eps - e0

    def W(self, eps, check=True):
        eps = _check_symmetric(eps) if check else eps
        self._guard()
        e = self._elastic_strain(eps)
        tr = trace(e)
        return 0.5 * np.asarray(self.lam) * tr**2 + np.asarray(self.mu) * np.sum(e * e, axis=(-2, -1))

    def DW(self, eps, check=True):
        eps = _check_symmetric(eps) if check else eps
        self._guard()
        e = self._elastic_strain(eps)
        d = e.shape[-1]
        lam = np.asarray(self.lam)[..., None, None]
        mu = np.asarray(self.mu)[..., None, None]
        return lam * trace(e)[..., None, None] * _eye(d) + 2.0 * mu * e

    def DDW(self, eps, check=True):
        eps = _check_symmetric(eps) if check else eps
        self._guard()
        d = eps.shape[-1]
        I = _eye(d)
        ll = np.einsum("ij,kl->ijkl", I, I)
        sym = np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I)
        lam = np.asarray(self.lam)[..., None, None, None, None]
        mu = np.asarray(self.mu)[..., None, None, None, None]
        return (lam * ll + mu * sym) * np.ones(eps.shape[:-2])[..., None, None, None, None]


def quat_to_matrix(q):
    """Rotation matrices for (unnormalized) quaternions ``(..., 4)`` ordered (w, x, y, z)."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = (q[..., i] for i in range(4))
    R = np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        -2,
    )
    return R


@dataclass
class CubicModel(_Algebra):
    """Cubic elasticity with orientation stored as a quaternion.

    The quaternion is kept unnormalized under the algebra and normalized on
    evaluation.  The eigenstrain is given in the lab frame.  2-D strains are
    treated as plane strain: they are embedded in 3-D and the in-plane block of
    the result is returned.
    """

    C11: object
    C12: object
    C44: object
    q: object = (1.0, 0.0, 0.0, 0.0)
    eps0: Optional[np.ndarray] = None
    debug: bool = False

    @classmethod
    def zero(cls, ndim=None):
        return cls(0.0, 0.0, 0.0, np.zeros(4), None)

    def _crystal_stiffness(self):
        C11, C12, C44 = (np.asarray(v, dtype=float) for v in (self.C11, self.C12, self.C44))
        shape = np.broadcast_shapes(C11.shape, C12.shape, C44.shape)
        C = np.zeros(shape + (3, 3, 3, 3))
        for i in range(3):
            for j in range(3):
                if i == j:
                    C[..., i, i, i, i] = C11
                else:
                    C[..., i, i, j, j] = C12
                    C[..., i, j, i, j] = C44
                    C[..., i, j, j, i] = C44
        return C

    def _is_null(self):
        qn = np.linalg.norm(np.asarray(self.q, dtype=float), axis=-1)
        moduli = np.abs(np.asarray(self.C11)) + np.abs(np.asarray(self.C12)) + np.abs(np.asarray(self.C44))
        small = qn < 1e-12
        if np.any(small & (moduli != 0)):
            raise ContractError("cubic model with vanishing quaternion but nonzero moduli")
        return small

    def DDW(self, eps, check=True):
        eps = _check_symmetric(eps) if check else eps
        if self.debug and np.any(np.asarray(self.C44) < 0):
            raise ContractError("unphysical model (C44 < 0) evaluated in debug mode")
        null = self._is_null()
        q = np.where(np.asarray(null)[..., None], np.array([1.0, 0, 0, 0]), np.asarray(self.q, dtype=float))
        R = quat_to_matrix(q)
        C = np.einsum("...ia,...jb,...kc,...ld,...abcd->...ijkl", R, R, R, R, self._crystal_stiffness())
        d = eps.shape[-1]
        C = C[..., :d, :d, :d, :d]
        return np.broadcast_to(C, eps.shape[:-2] + (d,) * 4)

    def _elastic_strain(self, eps):
        if self.eps0 is None:
            return eps
        d = eps.shape[-1]
        return eps - np.asarray(self.eps0)[..., :d, :d]

    def DW(self, eps, check=True):
        eps = _check_symmetric(eps) if check else eps
        C = self.DDW(eps, check=False)
        return np.einsum("...ijkl,...kl->...ij", C, self._elastic_strain(eps))

    def W(self, eps, check=True):
        eps = _check_symmetric(eps) if check else eps
        e = self._elastic_strain(eps)
        return 0.5 * np.sum(self.DW(eps, check=False) * e, axis=(-2, -1))


# ---------------------------------------------------------------------------
# J2 plasticity


@dataclass
class J2State(_Algebra):
    """Internal variables: equivalent plastic strain, plastic strain, backstress."""

    alpha: object
    eps_p: np.ndarray
    beta: np.ndarray
    debug: bool = False

    @classmethod
    def zero(cls, shape=()):
        return cls(np.zeros(shape), np.zeros(tuple(shape) + (3, 3)), np.zeros(tuple(shape) + (3, 3)))


@dataclass
class J2Model(_Algebra):
    """Small-strain J2 plasticity with combined linear hardening.

    Yield strength ``K(alpha) = sigma_y + theta * H * alpha``; the backstress
    evolves with rate ``2/3 (1 - theta) H gamma n`` so ``theta = 1`` is pure
    isotropic hardening and ``theta = 0`` pure kinematic hardening.  A custom
    ``hardening`` callable ``K(alpha)`` (vectorized) replaces the linear law,
    in which case the consistency equation is solved by guarded Newton.
    """

    lam: object
    mu: object
    sigma_y: object
    H: object
    theta: object = 1.0
    debug: bool = False

    @classmethod
    def zero(cls, ndim=None):
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_E_nu(cls, E, nu, sigma_y, H, theta=1.0):
        iso = IsotropicModel.from_E_nu(E, nu)
        return cls(iso.lam, iso.mu, sigma_y, H, theta)

    @property
    def elastic(self) -> IsotropicModel:
        return IsotropicModel(self.lam, self.mu, debug=self.debug)

    def K(self, alpha):
        return np.asarray(self.sigma_y) + np.asarray(self.theta) * np.asarray(self.H) * alpha

    def yield_function(self, sigma, state: J2State):
        eta = dev(sigma) - state.beta
        return np.sqrt(np.sum(eta * eta, axis=(-2, -1))) - SQRT23 * self.K(state.alpha)


def _consistency_residual(dg, eta_norm, alpha_n, mu, H, theta, K):
    return eta_norm - (2.0 * mu + 2.0 / 3.0 * (1.0 - theta) * H) * dg - SQRT23 * K(alpha_n + SQRT23 * dg)


def _solve_consistency_general(eta_norm, alpha_n, mu, H, theta, K, tol=1e-14, maxit=100):
    """Scalar consistency solve: Newton guarded by a bisection bracket."""
    f0 = _consistency_residual(0.0, eta_norm, alpha_n, mu, H, theta, K)
    lo, hi = 0.0, max(f0 / (2.0 * mu), 0.0) * 10.0 + 1e-300
    if _consistency_residual(hi, eta_norm, alpha_n, mu, H, theta, K) > 0:
        raise SolverError(
            f"consistency solve failed to bracket: eta={eta_norm:g}, alpha={alpha_n:g}, f_trial={f0:g}"
        )
    x = f0 / (2.0 * mu + 2.0 / 3.0 * H)
    x = min(max(x, lo), hi)
    for _ in range(maxit):
        r = _consistency_residual(x, eta_norm, alpha_n, mu, H, theta, K)
        if abs(r) <= tol * max(1.0, eta_norm):
            return x
        if r > 0:
            lo = x
        else:
            hi = x
        h = 1e-8 * max(abs(x), 1e-12)
        dr = (_consistency_residual(x + h, eta_norm, alpha_n, mu, H, theta, K) - r) / h
        xn = x - r / dr if dr < 0 else 0.5 * (lo + hi)
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        x = xn
    return x


def j2_radial_return(model: J2Model, eps_new, state: J2State, hardening: Optional[Callable] = None):
    """Return-mapping update for J2 plasticity (vectorized over leading axes).

    The deviatoric trial stress is ``s_n + 2 mu (e_new - e_n)``, written here
    in the equivalent form ``2 mu (dev eps_new - eps_p_n)``.  Strains may be
    2-D (plane strain, embedded in 3-D) or 3-D; the returned stress is 3-D.

    Returns
    -------
    sigma : ndarray (..., 3, 3)
    new_state : J2State
    dgamma : ndarray
        Plastic multiplier increment, zero where the step is elastic.
    """
    eps = embed3(np.asarray(eps_new, dtype=float))
    mu = np.asarray(model.mu, dtype=float)
    lam = np.asarray(model.lam, dtype=float)
    H = np.asarray(model.H, dtype=float)
    theta = np.asarray(model.theta, dtype=float)
    kappa = lam + 2.0 * mu / 3.0

    s_trial = 2.0 * mu[..., None, None] * (dev(eps) - state.eps_p)
    eta_trial = s_trial - state.beta
    eta_norm = np.sqrt(np.sum(eta_trial * eta_trial, axis=(-2, -1)))
    K = hardening if hardening is not None else model.K
    f_trial = eta_norm - SQRT23 * K(np.asarray(state.alpha))

    plastic = f_trial > 0
    if hardening is None:
        dgamma = np.where(plastic, f_trial / (2.0 * mu + 2.0 / 3.0 * H), 0.0)
    else:
        dgamma = np.zeros(np.shape(f_trial))
        shape = np.shape(f_trial)
        for idx in zip(*np.nonzero(np.atleast_1d(plastic))) if shape else ([()] if plastic else []):
            dgamma[idx] = _solve_consistency_general(
                float(eta_norm[idx]),
                float(np.asarray(state.alpha)[idx]),
                float(np.broadcast_to(mu, shape)[idx]),
                float(np.broadcast_to(H, shape)[idx]),
                float(np.broadcast_to(theta, shape)[idx]),
                hardening,
            )
    safe = np.where(eta_norm > 0, eta_norm, 1.0)
    n = eta_trial / safe[..., None, None]
    dg = np.asarray(dgamma)[..., None, None]

    new_state = J2State(
        alpha=np.asarray(state.alpha) + SQRT23 * dgamma,
        eps_p=state.eps_p + dg * n,
        beta=state.beta + (2.0 / 3.0) * ((1.0 - theta) * H)[..., None, None] * dg * n,
    )
    s_new = s_trial - 2.0 * mu[..., None, None] * dg * n
    sigma = s_new + (kappa * trace(eps))[..., None, None] * np.eye(3)
    return sigma, new_state, dgamma


# ---------------------------------------------------------------------------
# Model fields


def _coarsen_array(a, ndim):
    out = a
    for ax in range(ndim):
        sl0 = [slice(None)] * out.ndim
        sl1 = [slice(None)] * out.ndim
        sl0[ax] = slice(0, None, 2)
        sl1[ax] = slice(1, None, 2)
        out = 0.5 * (out[tuple(sl0)] + out[tuple(sl1)])
    return out


def _refine_array(a, ndim):
    out = a
    for ax in range(ndim):
        out = np.repeat(out, 2, axis=ax)
    return out


def model_field_interpolate(model, ratio, ndim):
    """Coarsen (``ratio=2``) or refine (``ratio=0.5``) a cell field of models.

    Coarsening averages the ``2**ndim`` children with the model algebra;
    refinement injects the parent into every child.  Scalar (uniform)
    parameters pass through unchanged.
    """

    def fn(a):
        if a.ndim < ndim:
            return a
        return _coarsen_array(a, ndim) if ratio == 2 else _refine_array(a, ndim)

    if ratio not in (2, 0.5):
        raise ValueError("ratio must be 2 (coarsen) or 0.5 (refine)")
    if isinstance(model, np.ndarray):
        return fn(model)
    return model.map(fn)
