"""Relaxation system models.

A relaxation system is a one-dimensional hyperbolic balance law

    w_t + F(w)_x = Q(w),      w = (u, v) in R^n x R^r,

whose source has the block structure Q = (0_n, q) and vanishes exactly on
the equilibrium manifold v = v*(u), with d_v q stable there. This module
defines the system container, the equilibrium solve, the reduced
(equilibrium) conservation law u_t + f*(u)_x = 0, and the builtin models
(Jin-Xin and the Broadwell gas in conserved coordinates).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .errors import (
    DimensionMismatch,
    DomainViolation,
    NoConvergence,
    SingularJacobian,
    UnknownModel,
)

_FD_STEP = np.cbrt(np.finfo(float).eps)  # ~6.1e-6, optimal for central differences


def _central_jacobian(fun, w, m_out):
    """Central finite-difference Jacobian of fun: R^N -> R^m_out at w."""
    w = np.asarray(w, dtype=float)
    N = w.size
    J = np.zeros((m_out, N))
    for j in range(N):
        h = _FD_STEP * (1.0 + abs(w[j]))
        wp = w.copy()
        wm = w.copy()
        wp[j] += h
        wm[j] -= h
        J[:, j] = (np.asarray(fun(wp)) - np.asarray(fun(wm))) / (2.0 * h)
    return J


@dataclass(frozen=True)
class RelaxationSystem:
    """Immutable container for one relaxation system.

    ``flux`` and ``source_q`` are pure callables on full states w in R^N;
    ``jac_flux`` / ``jac_source`` may be None, in which case central
    finite differences with step cbrt(eps)*(1+|w|) are used.
    ``domain_box`` is an (N, 2) array of [lo, hi] per component.
    """

    name: str
    n: int
    r: int
    flux: Callable
    source_q: Callable
    domain_box: np.ndarray
    jac_flux: Callable | None = None
    jac_source: Callable | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        box = np.asarray(self.domain_box, dtype=float)
        if box.shape != (self.N, 2):
            raise DimensionMismatch(
                f"domain_box must be ({self.N}, 2), got {box.shape}"
            )
        object.__setattr__(self, "domain_box", box)

    @property
    def N(self):
        return self.n + self.r

    def split(self, w):
        w = np.asarray(w, dtype=float)
        return w[: self.n], w[self.n :]

    def q(self, w):
        return np.asarray(self.source_q(np.asarray(w, dtype=float)), dtype=float)

    def source(self, w):
        """Full source Q(w) = (0_n, q(w))."""
        out = np.zeros(self.N)
        out[self.n :] = self.q(w)
        return out

    def dF(self, w):
        w = np.asarray(w, dtype=float)
        if self.jac_flux is not None:
            return np.asarray(self.jac_flux(w), dtype=float)
        return _central_jacobian(self.flux, w, self.N)

    def dq(self, w):
        """Jacobian of q, shape (r, N)."""
        w = np.asarray(w, dtype=float)
        if self.jac_source is not None:
            return np.asarray(self.jac_source(w), dtype=float)
        return _central_jacobian(self.source_q, w, self.r)

    def dQ(self, w):
        """Jacobian of the full source, shape (N, N) with zero upper rows."""
        out = np.zeros((self.N, self.N))
        out[self.n :, :] = self.dq(w)
        return out

    def in_domain(self, w, slack=0.0):
        w = np.asarray(w, dtype=float)
        lo = self.domain_box[:, 0] - slack
        hi = self.domain_box[:, 1] + slack
        return bool(np.all(w >= lo) and np.all(w <= hi))

    def require_domain(self, w):
        if not self.in_domain(w):
            raise DomainViolation(f"state {np.asarray(w)} outside domain box of {self.name}")

    def sample_states(self, rng, count):
        """Uniform random states inside the domain box."""
        lo = self.domain_box[:, 0]
        hi = self.domain_box[:, 1]
        return lo + (hi - lo) * rng.random((count, self.N))

    def hyperbolicity_gap(self, w):
        """Minimum eigenvalue gap of dF(w); eigenvalues must be real.

        Returns (min_gap, eigenvalues sorted). Raises if complex.
        """
        lam = np.linalg.eigvals(self.dF(w))
        if np.max(np.abs(lam.imag)) > 1e-8 * (1.0 + np.max(np.abs(lam))):
            raise SingularJacobian(
                f"dF({np.asarray(w)}) has complex eigenvalues; not strictly hyperbolic"
            )
        lam = np.sort(lam.real)
        gap = np.min(np.diff(lam)) if len(lam) > 1 else np.inf
        return gap, lam


@dataclass(frozen=True)
class EquilibriumPoint:
    """Solution of q(u, v) = 0 with spectral data of d_v q."""

    u: np.ndarray
    v_star: np.ndarray
    convergence_residual: float
    dvq_eigs: np.ndarray

    @property
    def w(self):
        return np.concatenate([self.u, self.v_star])

    @property
    def source_decay_rate(self):
        """-max Re eig of d_v q; positive for admissible equilibria."""
        return -float(np.max(self.dvq_eigs.real))


def equilibrium_solve(sys: RelaxationSystem, u, v_guess, tol=1e-12, max_iter=50):
    """Damped Newton solve of v -> q(u, v) = 0 starting from v_guess."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v_guess, dtype=float)).copy()
    if u.size != sys.n or v.size != sys.r:
        raise DimensionMismatch("u/v_guess sizes do not match the system")
    if not sys.in_domain(np.concatenate([u, v]), slack=0.0):
        raise DomainViolation("initial guess outside domain box")

    scale = 1.0 + float(np.max(np.abs(np.concatenate([u, v]))))
    w = np.concatenate([u, v])
    res = sys.q(w)
    for _ in range(max_iter):
        if np.max(np.abs(res)) <= tol * scale:
            break
        dvq = sys.dq(w)[:, sys.n :]
        cond = np.linalg.cond(dvq)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularJacobian(f"d_v q condition number {cond:.2e} at v={v}")
        step = np.linalg.solve(dvq, -res)
        # step halving until the residual decreases
        alpha = 1.0
        base = np.max(np.abs(res))
        for _ in range(30):
            v_try = v + alpha * step
            w_try = np.concatenate([u, v_try])
            if sys.in_domain(w_try, slack=0.1 * scale):
                res_try = sys.q(w_try)
                if np.max(np.abs(res_try)) < base:
                    v, w, res = v_try, w_try, res_try
                    break
            alpha *= 0.5
        else:
            raise NoConvergence("equilibrium Newton: no acceptable damped step")
    else:
        raise NoConvergence(
            f"equilibrium Newton did not reach tol in {max_iter} iterations"
        )

    dvq = sys.dq(np.concatenate([u, v]))[:, sys.n :]
    eigs = np.linalg.eigvals(dvq)
    return EquilibriumPoint(
        u=u.copy(),
        v_star=v.copy(),
        convergence_residual=float(np.max(np.abs(res))),
        dvq_eigs=eigs,
    )


class ReducedSystem:
    """Equilibrium conservation law u_t + f*(u)_x = 0 derived from a
    relaxation system, with f*(u) = f(u, v*(u)).

    The Jacobian d f* uses the implicit-function formula
    A11 - A12 q2^{-1} q1 evaluated on the equilibrium manifold.
    """

    def __init__(self, sys: RelaxationSystem, v_guess=None):
        self.sys = sys
        self._v_guess = (
            np.zeros(sys.r) if v_guess is None else np.asarray(v_guess, dtype=float)
        )
        self._cache = {}

    def equilibrium(self, u):
        key = np.asarray(u, dtype=float).tobytes()
        eq = self._cache.get(key)
        if eq is None:
            guess = self._v_guess
            # warm-start from the nearest cached equilibrium
            if self._cache:
                us = [np.frombuffer(k) for k in self._cache]
                dists = [np.linalg.norm(np.asarray(u) - uu) for uu in us]
                guess = self._cache[list(self._cache)[int(np.argmin(dists))]].v_star
            eq = equilibrium_solve(self.sys, u, guess)
            self._cache[key] = eq
        return eq

    def v_star(self, u):
        return self.equilibrium(u).v_star

    def flux_star(self, u):
        eq = self.equilibrium(u)
        return np.asarray(self.sys.flux(eq.w), dtype=float)[: self.sys.n]

    def jac_star(self, u):
        eq = self.equilibrium(u)
        n = self.sys.n
        dF = self.sys.dF(eq.w)
        dq = self.sys.dq(eq.w)
        A11, A12 = dF[:n, :n], dF[:n, n:]
        q1, q2 = dq[:, :n], dq[:, n:]
        return A11 - A12 @ np.linalg.solve(q2, q1)

    def dv_star(self, u):
        """Jacobian of the equilibrium map, dv*/du = -q2^{-1} q1."""
        eq = self.equilibrium(u)
        dq = self.sys.dq(eq.w)
        q1, q2 = dq[:, : self.sys.n], dq[:, self.sys.n :]
        return -np.linalg.solve(q2, q1)

    def eigen(self, u):
        """Eigenvalues (ascending) and unit right eigenvectors of d f*(u)."""
        a = self.jac_star(u)
        lam, R = np.linalg.eig(a)
        if np.max(np.abs(lam.imag)) > 1e-8 * (1.0 + np.max(np.abs(lam))):
            raise SingularJacobian(f"d f*({u}) has complex eigenvalues")
        order = np.argsort(lam.real)
        lam = lam.real[order]
        R = R.real[:, order]
        R /= np.linalg.norm(R, axis=0)
        return lam, R


def reduced_flux(sys: RelaxationSystem, u, v_guess=None):
    """(f*(u), d f*(u)) for a single state u."""
    red = ReducedSystem(sys, v_guess)
    return red.flux_star(u), red.jac_star(u)


def boosted(sys: RelaxationSystem, speed: float) -> RelaxationSystem:
    """The same physics in a frame moving with the given speed: the flux
    becomes F(w) - speed*w while the source is unchanged. Used to bring a
    traveling shock to rest."""
    s = float(speed)
    if s == 0.0:
        return sys
    base_flux = sys.flux
    base_jf = sys.jac_flux

    def flux(w):
        return np.asarray(base_flux(w), dtype=float) - s * np.asarray(w, dtype=float)

    jac_flux = None
    if base_jf is not None:
        def jac_flux(w):
            return np.asarray(base_jf(w), dtype=float) - s * np.eye(sys.N)

    return RelaxationSystem(
        name=f"{sys.name}@frame{s:+.6g}",
        n=sys.n,
        r=sys.r,
        flux=flux,
        source_q=sys.source_q,
        domain_box=sys.domain_box,
        jac_flux=jac_flux,
        jac_source=sys.jac_source,
        params={**sys.params, "frame_speed": s},
    )


def _parse_scalar_flux(expr):
    """Compile a scalar flux expression f(u) given as a string or callable.

    Returns (f, fprime) as vectorized callables.
    """
    if callable(expr):
        f = expr

        def fprime(u):
            h = _FD_STEP * (1.0 + abs(u))
            return (f(u + h) - f(u - h)) / (2.0 * h)

        return f, fprime
    usym = sp.Symbol("u")
    fexpr = sp.sympify(expr)
    f = sp.lambdify(usym, fexpr, "numpy")
    fprime = sp.lambdify(usym, sp.diff(fexpr, usym), "numpy")
    return (lambda u: float(f(u))), (lambda u: float(fprime(u)))


def jin_xin(a=1.0, f="u**2/2", tau=1.0, domain_halfwidth=2.0):
    """Jin-Xin relaxation of a scalar conservation law:

        u_t + v_x = 0,
        v_t + a^2 u_x = (f(u) - v)/tau.
    """
    if a <= 0 or tau <= 0:
        raise ValueError("jin_xin requires a > 0 and tau > 0")
    fval, fprime = _parse_scalar_flux(f)
    a2 = float(a) ** 2
    inv_tau = 1.0 / float(tau)

    def flux(w):
        return np.array([w[1], a2 * w[0]])

    def source_q(w):
        return np.array([(fval(w[0]) - w[1]) * inv_tau])

    def jac_flux(w):
        return np.array([[0.0, 1.0], [a2, 0.0]])

    def jac_source(w):
        return np.array([[fprime(w[0]) * inv_tau, -inv_tau]])

    box = np.array([[-domain_halfwidth, domain_halfwidth]] * 2)
    return RelaxationSystem(
        name="jin_xin",
        n=1,
        r=1,
        flux=flux,
        source_q=source_q,
        domain_box=box,
        jac_flux=jac_flux,
        jac_source=jac_source,
        params={"a": float(a), "tau": float(tau), "f": str(f)},
    )


def broadwell():
    """Broadwell discrete-velocity gas in conserved coordinates.

    Kinetic densities (f+, f0, f-) with speeds (+1, 0, -1) and collision
    term f0^2 - f+ f- map to u1 = f+ + 2 f0 + f- (mass),
    u2 = f+ - f- (momentum), v = f0. In these coordinates

        u1_t + u2_x = 0,
        u2_t + (u1 - 2v)_x = 0,
        v_t = q(u, v),      q = (u1^2 - u2^2)/4 - u1 v,

    so the source is exactly (0, 0, q). The flux Jacobian is constant and
    singular (the zero kinetic speed), with eigenvalues {-1, 0, +1}.
    """

    def flux(w):
        return np.array([w[1], w[0] - 2.0 * w[2], 0.0])

    def source_q(w):
        u1, u2, v = w
        return np.array([(u1 * u1 - u2 * u2) / 4.0 - u1 * v])

    def jac_flux(w):
        return np.array([[0.0, 1.0, 0.0], [1.0, 0.0, -2.0], [0.0, 0.0, 0.0]])

    def jac_source(w):
        u1, u2, v = w
        return np.array([[u1 / 2.0 - v, -u2 / 2.0, -u1]])

    box = np.array([[0.5, 9.0], [-3.5, 3.5], [-0.5, 3.5]])
    return RelaxationSystem(
        name="broadwell",
        n=2,
        r=1,
        flux=flux,
        source_q=source_q,
        domain_box=box,
        jac_flux=jac_flux,
        jac_source=jac_source,
    )


def builtin_model(name, **params):
    """Construct a builtin model by name ('jin_xin' or 'broadwell')."""
    if name == "jin_xin":
        return jin_xin(**params)
    if name == "broadwell":
        if params:
            raise ValueError("broadwell takes no parameters")
        return broadwell()
    raise UnknownModel(f"no builtin model named {name!r}")
