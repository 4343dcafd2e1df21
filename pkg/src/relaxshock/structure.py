"""Structural hypothesis verification: symmetrizers, skew compensators,
coupling and characteristic-field checks, with quantitative margins.

The searches are small linear-matrix-inequality feasibility problems
(state dimension <= ~10), solved by least squares on the linear equality
constraints followed by subgradient ascent on the smallest eigenvalue.
No external SDP solver is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GenuineNonlinearityFailure,
    Infeasible,
    SpectralGapViolation,
)
from .model import ReducedSystem, RelaxationSystem

PASS_MARGIN_FACTOR = 1e-8   # positivity margins must exceed this * scale
EQUALITY_TOL_FACTOR = 1e-10  # structural equalities hold to this * scale


# ---------------------------------------------------------------------------
# symmetric / skew parameterizations


def _sym_from_params(p, N):
    A = np.zeros((N, N))
    idx = 0
    for i in range(N):
        for j in range(i, N):
            A[i, j] = p[idx]
            A[j, i] = p[idx]
            idx += 1
    return A


def _sym_param_dim(N):
    return N * (N + 1) // 2

def _skew_from_params(k, N):
    K = np.zeros((N, N))
    idx = 0
    for i in range(N):
        for j in range(i + 1, N):
            K[i, j] = k[idx]
            K[j, i] = -k[idx]
            idx += 1
    return K


def _skew_param_dim(N):
    return N * (N - 1) // 2


def _sym_basis(N):
    dim = _sym_param_dim(N)
    return [_sym_from_params(np.eye(dim)[i], N) for i in range(dim)]


def _skew_basis(N):
    dim = _skew_param_dim(N)
    return [_skew_from_params(np.eye(dim)[i], N) for i in range(dim)]


def _symmetry_constraint_rows(B, N):
    """Rows of the linear map p -> offdiag entries of A0(p) B - (A0(p) B)^T."""
    basis = _sym_basis(N)
    rows = []
    for i in range(N):
        for j in range(i + 1, N):
            rows.append([ (E @ B - B.T @ E)[i, j] for E in basis ])
    if not rows:
        return np.zeros((0, _sym_param_dim(N)))
    return np.asarray(rows)


def _nullspace(C, rtol=1e-10):
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] == 0 or C.size == 0:
        return np.eye(C.shape[1])
    _, s, Vt = np.linalg.svd(C)
    tol = rtol * (s[0] if len(s) else 1.0)
    rank = int(np.sum(s > tol))
    return Vt[rank:].T


def _max_min_eig_affine(c0, Z, N, rng, iters=300, restarts=4):
    """Maximize lambda_min(A0(c0 + Z t)) by subgradient ascent.

    c0, columns of Z are symmetric-parameter vectors; the affine slice
    typically encodes a trace normalization. Returns (best_p, best_margin).
    """

    def margin(p):
        w = np.linalg.eigvalsh(_sym_from_params(p, N))
        return w[0]

    def subgrad(p):
        A = _sym_from_params(p, N)
        w, V = np.linalg.eigh(A)
        v = V[:, 0]
        g = np.array([v @ (_sym_from_params(col, N) @ v) for col in Z.T])
        return g

    best_p = c0.copy()
    best_m = margin(best_p)
    if Z.shape[1] == 0:
        return best_p, best_m
    scale = 1.0 + np.linalg.norm(c0)
    for trial in range(restarts + 1):
        t = np.zeros(Z.shape[1]) if trial == 0 else 0.3 * scale * rng.standard_normal(Z.shape[1])
        p = c0 + Z @ t
        for it in range(iters):
            g = subgrad(p)
            gn = np.linalg.norm(g)
            if gn < 1e-14:
                break
            p = p + (0.3 * scale / np.sqrt(1.0 + it)) * (Z @ (g / gn))
            m = margin(p)
            if m > best_m:
                best_m, best_p = m, p.copy()
    return best_p, best_m


def _max_min_eig_skew(S0, sys_dF, N, rng, iters=1000, restarts=4, step0=None):
    """Maximize lambda_min(S0 + sym(K dF)) over skew K by subgradient ascent."""
    basis = _skew_basis(N)
    mats = [0.5 * (E @ sys_dF + (E @ sys_dF).T) for E in basis]

    def assemble(k):
        M = S0.copy()
        for ki, Si in zip(k, mats):
            M = M + ki * Si
        return M

    def margin(k):
        return np.linalg.eigvalsh(assemble(k))[0]

    scale = max(np.linalg.norm(S0), 1e-12)
    step0 = step0 or 0.5 * scale
    dim = len(basis)
    best_k = np.zeros(dim)
    best_m = margin(best_k)
    for trial in range(restarts + 1):
        k = np.zeros(dim) if trial == 0 else 0.2 * scale * rng.standard_normal(dim)
        for it in range(iters):
            M = assemble(k)
            w, V = np.linalg.eigh(M)
            v = V[:, 0]
            g = np.array([v @ (Si @ v) for Si in mats])
            gn = np.linalg.norm(g)
            if gn < 1e-14:
                break
            k = k + (step0 / np.sqrt(1.0 + it)) * (g / gn)
            m = margin(k)
            if m > best_m:
                best_m, best_k = m, k.copy()
    return best_k, best_m


# ---------------------------------------------------------------------------
# symmetrizer


@dataclass
class Symmetrizer:
    """Positive definite A0 with A0 dF symmetric (and A0 dQ symmetric at
    the anchor state), found by constrained max-margin search."""

    A0: np.ndarray
    anchor: np.ndarray
    positivity_margin: float
    symmetry_residual: float
    params: np.ndarray = field(repr=False)
    dissipativity_c: float | None = None

    @property
    def N(self):
        return self.A0.shape[0]

    def recompute_margin(self):
        return float(np.linalg.eigvalsh(self.A0)[0])


def _solve_symmetrizer_at(sys: RelaxationSystem, W, seed_params=None, rng=None):
    """Pointwise symmetrizer solve at state W.

    Constraints: A0 dF(W) symmetric and A0 dQ(W) symmetric; trace(A0) = N.
    With a seed, picks the constraint-satisfying matrix closest to the
    seed (continuous tracking); otherwise maximizes the smallest
    eigenvalue. Returns (params, margin, residual).
    """
    N = sys.N
    W = np.asarray(W, dtype=float)
    C = np.vstack([
        _symmetry_constraint_rows(sys.dF(W), N),
        _symmetry_constraint_rows(sys.dQ(W), N),
    ])
    Z = _nullspace(C)
    if Z.shape[1] == 0:
        raise Infeasible("symmetry constraints admit only A0 = 0", best_margin=0.0)
    # trace functional on the null space
    tr = np.array([np.trace(_sym_from_params(col, N)) for col in Z.T])
    if np.linalg.norm(tr) < 1e-12:
        raise Infeasible(
            "no trace-positive solution of the symmetry constraints; "
            "positive definite A0 impossible",
            best_margin=0.0,
        )
    c0 = Z @ (tr * (N / (tr @ tr)))   # trace(A0(c0)) = N
    Zn = _nullspace(tr[None, :])      # directions preserving the trace
    Zslice = Z @ Zn if Zn.shape[1] else np.zeros((Z.shape[0], 0))

    if seed_params is not None:
        # least-squares projection of the seed onto the constraint slice
        t = Zslice.T @ (seed_params - c0) if Zslice.shape[1] else np.zeros(0)
        p = c0 + (Zslice @ t if Zslice.shape[1] else 0.0)
        margin = float(np.linalg.eigvalsh(_sym_from_params(p, N))[0])
    else:
        rng = rng or np.random.default_rng(0)
        p, margin = _max_min_eig_affine(c0, Zslice, N, rng)
    A0 = _sym_from_params(p, N)
    res = max(
        np.max(np.abs(A0 @ sys.dF(W) - (A0 @ sys.dF(W)).T)),
        np.max(np.abs(A0 @ sys.dQ(W) - (A0 @ sys.dQ(W)).T)),
    )
    return p, float(margin), float(res)


def find_symmetrizer(sys: RelaxationSystem, W0, rng=None) -> Symmetrizer:
    """Search a symmetric positive definite A0 with A0 dF(W0) symmetric
    and A0 dQ(W0) symmetric, maximizing the smallest eigenvalue under
    trace normalization. Raises Infeasible with the best margin if no
    positive definite solution exists."""
    rng = rng or np.random.default_rng(0)
    W0 = np.asarray(W0, dtype=float)
    p, margin, res = _solve_symmetrizer_at(sys, W0, rng=rng)
    scale = 1.0 + np.linalg.norm(sys.dF(W0))
    if margin <= PASS_MARGIN_FACTOR * scale:
        raise Infeasible(
            f"no positive definite symmetrizer at {W0}; best margin {margin:.3e}",
            best_margin=margin,
            best_candidate=_sym_from_params(p, sys.N),
        )
    return Symmetrizer(
        A0=_sym_from_params(p, sys.N),
        anchor=W0,
        positivity_margin=margin,
        symmetry_residual=res,
        params=p,
    )


def symmetrizer_field(sys: RelaxationSystem, states, seed: Symmetrizer):
    """A0 evaluated along a sequence of states, tracked continuously from
    the seed symmetrizer (nearest constraint-satisfying matrix to the
    previous one). Returns array of shape (len(states), N, N)."""
    states = np.asarray(states, dtype=float)
    out = np.zeros((len(states), sys.N, sys.N))
    p_prev = seed.params
    for i, W in enumerate(states):
        p, margin, _ = _solve_symmetrizer_at(sys, W, seed_params=p_prev)
        if margin <= 0:
            raise Infeasible(
                f"tracked symmetrizer loses definiteness at sample {i}",
                best_margin=margin,
            )
        out[i] = _sym_from_params(p, sys.N)
        p_prev = p
    return out


# ---------------------------------------------------------------------------
# hypothesis A1: dissipativity of A0 dQ at the end states


@dataclass
class A1Report:
    c: float
    per_state: list
    passed: bool
    degenerate: bool = False


def _largest_dissipativity_c(S, G, scale):
    """Largest c with S + c G <= 0 (S = sym(A0 dQ), G = dQ^T dQ >= 0).

    The comparison carries a small positive slack so that directions on
    which both S and G vanish do not poison the bisection with rounding
    noise.
    """
    tol = 1e-11 * (np.linalg.norm(S) + np.linalg.norm(G) + 1e-30)
    lam_s = np.linalg.eigvalsh(S)[-1]
    if np.max(np.abs(G)) < 1e-14 * scale:
        # no relaxation at all: inequality vacuous
        return np.inf, lam_s <= 1e-12 * scale
    if lam_s > 1e-10 * scale:
        return -np.inf, False
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if np.linalg.eigvalsh(S + hi * G)[-1] > tol:
            break
        hi *= 2.0
        if hi > 1e12:
            return hi, True
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.linalg.eigvalsh(S + mid * G)[-1] <= tol:
            lo = mid
        else:
            hi = mid
    return lo, lo > 0.0


def check_A1(symzer_by_state, sys: RelaxationSystem, states) -> A1Report:
    """Largest c with Re<w, A0 dQ(W) w> <= -c |dQ(W) w|^2 at each given
    state; passes iff c > 0 at all of them.

    ``symzer_by_state`` is either a single Symmetrizer (used at every
    state) or a list matching ``states``.
    """
    states = [np.asarray(W, dtype=float) for W in np.atleast_2d(states)]
    if isinstance(symzer_by_state, Symmetrizer):
        symzers = [symzer_by_state] * len(states)
    else:
        symzers = list(symzer_by_state)
    per_state = []
    degenerate = False
    cs = []
    for W, sz in zip(states, symzers):
        dQ = sys.dQ(W)
        A0 = sz.A0 if isinstance(sz, Symmetrizer) else np.asarray(sz)
        S = 0.5 * (A0 @ dQ + (A0 @ dQ).T)
        G = dQ.T @ dQ
        scale = 1.0 + np.linalg.norm(A0) * (1.0 + np.linalg.norm(dQ))
        c, ok = _largest_dissipativity_c(S, G, scale)
        if np.isinf(c):
            degenerate = True
        per_state.append({"state": W.tolist(), "c": c, "passed": bool(ok)})
        cs.append(c)
    finite = [c for c in cs if np.isfinite(c)]
    c_overall = min(finite) if finite else np.inf
    passed = all(e["passed"] for e in per_state)
    return A1Report(c=float(c_overall), per_state=per_state, passed=passed,
                    degenerate=degenerate)


# ---------------------------------------------------------------------------
# genuine coupling and the compensator (hypothesis A2)


def genuine_coupling(sys: RelaxationSystem, W0, tol_factor=1e-8):
    """True iff no unit eigenvector of dF(W0) lies in ker dQ(W0).

    Returns (passed, min_ratio, offending_eigenvector_or_None).
    """
    W0 = np.asarray(W0, dtype=float)
    dF = sys.dF(W0)
    dQ = sys.dQ(W0)
    lam, V = np.linalg.eig(dF)
    norm_dQ = np.linalg.norm(dQ)
    tol = tol_factor * max(norm_dQ, 1e-30)
    worst = np.inf
    offender = None
    for i in range(sys.N):
        s = np.real(V[:, i])
        s = s / np.linalg.norm(s)
        val = np.linalg.norm(dQ @ s)
        if val < worst:
            worst = val
            offender = s
    passed = worst > tol
    return passed, float(worst), (None if passed else offender)


@dataclass
class Compensator:
    """Constant skew matrix K with sym(K dF - A0 dQ) positive definite at
    the anchor state."""

    K: np.ndarray
    margin: float
    anchor: np.ndarray
    holds_along_profile: bool | None = None
    worst_profile_margin: float | None = None

    def recompute_margin(self, sys: RelaxationSystem, A0):
        M = self.K @ sys.dF(self.anchor) - np.asarray(A0) @ sys.dQ(self.anchor)
        return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def compensator_margin(K, A0, sys: RelaxationSystem, W):
    M = K @ sys.dF(W) - np.asarray(A0) @ sys.dQ(W)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def find_compensator(symzer: Symmetrizer, sys: RelaxationSystem, W_plus,
                     rng=None, iters=1000) -> Compensator:
    """Maximize lambda_min(sym(K dF - A0 dQ)) at W_plus over constant skew
    K. Raises Infeasible (Shizuta-Kawashima failure) if the best margin is
    not positive."""
    rng = rng or np.random.default_rng(0)
    W_plus = np.asarray(W_plus, dtype=float)
    dF = sys.dF(W_plus)
    dQ = sys.dQ(W_plus)
    S0 = -0.5 * (symzer.A0 @ dQ + (symzer.A0 @ dQ).T)
    k, margin = _max_min_eig_skew(S0, dF, sys.N, rng, iters=iters)
    scale = 1.0 + np.linalg.norm(dF) + np.linalg.norm(S0)
    if margin <= PASS_MARGIN_FACTOR * scale:
        raise Infeasible(
            f"Shizuta-Kawashima compensator search failed; best margin {margin:.3e}",
            best_margin=float(margin),
            best_candidate=_skew_from_params(k, sys.N),
        )
    return Compensator(K=_skew_from_params(k, sys.N), margin=float(margin),
                       anchor=W_plus)


def compensator_along_states(comp: Compensator, symzer_states, sys, states):
    """Worst margin of sym(K dF - A0 dQ) over a state sample (A0 tracked
    along the states)."""
    worst = np.inf
    for A0, W in zip(symzer_states, states):
        worst = min(worst, compensator_margin(comp.K, A0, sys, W))
    return float(worst)


# ---------------------------------------------------------------------------
# reduced-system structure (hypotheses B1-B3)


@dataclass
class CharData:
    """Principal characteristic data of the reduced convection matrix."""

    u_samples: np.ndarray
    alpha0: np.ndarray
    r0: np.ndarray
    eta: np.ndarray
    c0: float

    @property
    def eta_sign(self):
        return float(np.sign(self.eta[len(self.eta) // 2]))


def check_B3(red: ReducedSystem, u_range, c0_cap=1.0, fd_step=1e-5) -> CharData:
    """Identify the single near-zero eigenvalue alpha_0 of d f* on the
    sample range, verify the 1 : 2 spectral-gap structure, and compute
    eta = grad(alpha_0) . r_0 by a central difference along r_0.

    Raises SpectralGapViolation or GenuineNonlinearityFailure.
    """
    u_range = np.atleast_2d(np.asarray(u_range, dtype=float))
    n = red.sys.n
    alpha0 = np.zeros(len(u_range))
    r0 = np.zeros((len(u_range), n))
    eta = np.zeros(len(u_range))
    c0 = c0_cap
    prev_r = None
    for i, u in enumerate(u_range):
        lam, R = red.eigen(u)
        j = int(np.argmin(np.abs(lam)))
        others = np.delete(np.abs(lam), j)
        if others.size:
            c0_here = min(np.min(others) / 2.0, c0_cap)
            if np.abs(lam[j]) >= c0_here:
                raise SpectralGapViolation(
                    f"at u={u}: |alpha0|={np.abs(lam[j]):.3e} not below "
                    f"c0={c0_here:.3e} with others >= 2 c0"
                )
            c0 = min(c0, c0_here)
        r = R[:, j]
        if prev_r is not None and r @ prev_r < 0:
            r = -r
        elif prev_r is None and r[np.argmax(np.abs(r))] < 0:
            r = -r
        prev_r = r
        alpha0[i] = lam[j]
        r0[i] = r

        d = fd_step * (1.0 + np.linalg.norm(u))

        def small_eig(uu):
            lam2, _ = red.eigen(uu)
            return lam2[int(np.argmin(np.abs(lam2 - lam[j])))]

        eta[i] = (small_eig(u + d * r) - small_eig(u - d * r)) / (2.0 * d)

    if np.min(np.abs(eta)) < 1e-8 or np.min(eta) * np.max(eta) <= 0:
        raise GenuineNonlinearityFailure(
            f"eta in [{eta.min():.3e}, {eta.max():.3e}] vanishes or changes sign"
        )
    return CharData(u_samples=u_range, alpha0=alpha0, r0=r0, eta=eta, c0=float(c0))


def _reduced_symmetrizer_at(jac_star, n, seed_params=None, rng=None):
    """Pointwise solve for a0 spd with a0 * jac_star symmetric, trace n."""
    C = _symmetry_constraint_rows(jac_star, n)
    Z = _nullspace(C)
    if Z.shape[1] == 0:
        raise Infeasible("reduced symmetry constraints admit only a0 = 0")
    tr = np.array([np.trace(_sym_from_params(col, n)) for col in Z.T])
    if np.linalg.norm(tr) < 1e-12:
        raise Infeasible("no trace-positive reduced symmetrizer")
    c0 = Z @ (tr * (n / (tr @ tr)))
    Zn = _nullspace(tr[None, :])
    Zslice = Z @ Zn if Zn.shape[1] else np.zeros((Z.shape[0], 0))
    if seed_params is not None:
        t = Zslice.T @ (seed_params - c0) if Zslice.shape[1] else np.zeros(0)
        p = c0 + (Zslice @ t if Zslice.shape[1] else 0.0)
    else:
        rng = rng or np.random.default_rng(0)
        p, _ = _max_min_eig_affine(c0, Zslice, n, rng)
    return p


@dataclass
class ReducedStructure:
    """Symmetrizer / compensator data of the reduced conservation law.

    The reduced Shizuta-Kawashima margin is evaluated in symmetrized
    coordinates: lambda_min( b0_tilde + sym(k a_tilde) ) with
    a_tilde = a0^(1/2) df* a0^(-1/2) and b0_tilde = a0^(1/2) b0 a0^(-1/2).
    """

    a0: np.ndarray
    a0_params: np.ndarray
    k_tilde: np.ndarray
    b0: np.ndarray
    b0_psd_margin: float
    rsk_margin: float
    char_data: CharData
    anchor_u: np.ndarray

    def a0_at(self, red: ReducedSystem, u):
        p = _reduced_symmetrizer_at(red.jac_star(u), red.sys.n,
                                    seed_params=self.a0_params)
        return _sym_from_params(p, red.sys.n)


def reduced_symmetrizer_field(red: ReducedSystem, u_states, seed_params):
    n = red.sys.n
    out = np.zeros((len(u_states), n, n))
    p_prev = seed_params
    for i, u in enumerate(np.atleast_2d(u_states)):
        p = _reduced_symmetrizer_at(red.jac_star(u), n, seed_params=p_prev)
        out[i] = _sym_from_params(p, n)
        p_prev = p
    return out


def matrix_sqrt_spd(A):
    w, V = np.linalg.eigh(np.asarray(A))
    if w[0] <= 0:
        raise Infeasible(f"matrix not positive definite (min eig {w[0]:.3e})")
    return (V * np.sqrt(w)) @ V.T


def reduced_structure(red: ReducedSystem, u0, b0_matrix, u_range=None,
                      c0_cap=1.0, rng=None) -> ReducedStructure:
    """Assemble the reduced-system structure report at base state u0.

    ``b0_matrix`` is the effective viscosity at the corresponding
    equilibrium (computed by the reduction module; passed in to keep this
    module free of that dependency).
    """
    rng = rng or np.random.default_rng(0)
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    n = red.sys.n
    if u_range is None:
        u_range = u0[None, :]
    p = _reduced_symmetrizer_at(red.jac_star(u0), n, rng=rng)
    a0 = _sym_from_params(p, n)
    if np.linalg.eigvalsh(a0)[0] <= 0:
        raise Infeasible("reduced symmetrizer a0 not positive definite")
    b0 = np.asarray(b0_matrix, dtype=float)
    sym_a0b0 = 0.5 * (a0 @ b0 + (a0 @ b0).T)
    b0_psd_margin = float(np.linalg.eigvalsh(sym_a0b0)[0])

    s = matrix_sqrt_spd(a0)
    s_inv = np.linalg.inv(s)
    a_t = s @ red.jac_star(u0) @ s_inv
    b_t = s @ b0 @ s_inv
    b_t = 0.5 * (b_t + b_t.T)
    k, rsk = _max_min_eig_skew(b_t, a_t, n, rng)
    char = check_B3(red, u_range, c0_cap=c0_cap)
    return ReducedStructure(
        a0=a0,
        a0_params=p,
        k_tilde=_skew_from_params(k, n),
        b0=b0,
        b0_psd_margin=b0_psd_margin,
        rsk_margin=float(rsk),
        char_data=char,
        anchor_u=u0,
    )


# ---------------------------------------------------------------------------
# constructive symmetrizer reduction (block-triangular change of coordinates)


def appendix_symmetrizer_path(sys: RelaxationSystem, W0, symzer=None, rng=None):
    """Constructive route from weak simultaneous symmetrizability plus
    genuine coupling to the reduced symmetrizer and viscosity.

    Builds a block-upper-triangular T with T A0 T^T block diagonal,
    passes to the right-symmetrizer form, extracts the relaxing-block
    source q_tilde (verified symmetric negative definite), and returns
    the reduced data including the viscosity candidate
    b0 = -(A0_11~)^{-1} A12~ qtilde^{-1} A12~^T, whose kernel equals
    ker(A12~^T).
    """
    rng = rng or np.random.default_rng(0)
    W0 = np.asarray(W0, dtype=float)
    n, N = sys.n, sys.N
    if symzer is None:
        symzer = find_symmetrizer(sys, W0, rng=rng)
    A0 = symzer.A0
    dF = sys.dF(W0)
    dQ = sys.dQ(W0)
    scale = 1.0 + np.linalg.norm(A0) * (np.linalg.norm(dF) + np.linalg.norm(dQ))

    A11, A12 = A0[:n, :n], A0[:n, n:]
    A21, A22 = A0[n:, :n], A0[n:, n:]
    X = -np.linalg.solve(A22.T, A12.T).T  # X = -A12 A22^{-1}
    T = np.eye(N)
    T[:n, n:] = X
    A0_hat = T @ A0 @ T.T
    offdiag = np.max(np.abs(A0_hat[:n, n:]))
    if offdiag > EQUALITY_TOL_FACTOR * scale * 10:
        raise Infeasible(f"block elimination failed, offdiag {offdiag:.2e}")
    B1 = A0_hat[:n, :n]
    B2 = A0_hat[n:, n:]

    Tinv_T = np.linalg.inv(T.T)
    F_hat = Tinv_T @ dF @ T.T
    Q_hat = Tinv_T @ dQ @ T.T

    A0_tilde = np.linalg.inv(A0_hat)     # block diagonal, spd
    A_tilde = F_hat @ A0_tilde           # symmetric
    Q_tilde = Q_hat @ A0_tilde
    q_tilde = Q_tilde[n:, n:]
    q1_res = np.max(np.abs(Q_tilde[n:, :n]))

    sym_res = max(
        np.max(np.abs(A_tilde - A_tilde.T)),
        np.max(np.abs(q_tilde - q_tilde.T)),
        q1_res,
    )
    q_eigs = np.linalg.eigvalsh(0.5 * (q_tilde + q_tilde.T))
    if q_eigs[-1] >= 0:
        raise Infeasible(
            f"relaxing-block source not negative definite (max eig {q_eigs[-1]:.3e})"
        )

    A_t11 = A_tilde[:n, :n]
    A_t12 = A_tilde[:n, n:]
    a0_red = np.linalg.inv(A0_tilde[:n, :n])   # left symmetrizer of the reduced system
    a_red = np.linalg.solve(A0_tilde[:n, :n], A_t11)
    b0_red = -np.linalg.solve(
        A0_tilde[:n, :n], A_t12 @ np.linalg.solve(q_tilde, A_t12.T)
    )
    return {
        "T": T,
        "A0_tilde": A0_tilde,
        "q_tilde": q_tilde,
        "q_tilde_eigs": q_eigs,
        "a0": a0_red,
        "a_reduced": a_red,
        "b0": b0_red,
        "A12_tilde": A_t12,
        "symmetry_residual": float(sym_res),
    }


def kernel_match(Bmat, Cmat, rtol=1e-8):
    """True iff ker(B) == ker(C) numerically (same dimension, aligned)."""
    B = np.asarray(Bmat, dtype=float)
    C = np.asarray(Cmat, dtype=float)

    def kernel(M):
        _, s, Vt = np.linalg.svd(M)
        tol = rtol * (s[0] if s.size and s[0] > 0 else 1.0)
        return Vt[np.sum(s > tol):].T

    kb, kc = kernel(B), kernel(C)
    if kb.shape[1] != kc.shape[1]:
        return False
    if kb.shape[1] == 0:
        return True
    # principal angles
    sv = np.linalg.svd(kb.T @ kc, compute_uv=False)
    return bool(np.all(sv > 1.0 - 1e-8))


# ---------------------------------------------------------------------------
# aggregate report


@dataclass
class StructureReport:
    model: str
    symmetrizer: Symmetrizer
    a1: A1Report
    coupling_passed: bool
    coupling_min: float
    compensator: Compensator
    reduced: ReducedStructure
    flags: dict

    @property
    def all_passed(self):
        return all(self.flags.values())

    def to_dict(self):
        return {
            "model": self.model,
            "A0": self.symmetrizer.A0.tolist(),
            "A0_positivity_margin": self.symmetrizer.positivity_margin,
            "A0_symmetry_residual": self.symmetrizer.symmetry_residual,
            "A1_c": self.a1.c if np.isfinite(self.a1.c) else None,
            "A1_per_state": self.a1.per_state,
            "genuine_coupling_min": self.coupling_min,
            "K": self.compensator.K.tolist(),
            "A2_margin": self.compensator.margin,
            "a0": self.reduced.a0.tolist(),
            "B1_psd_margin": self.reduced.b0_psd_margin,
            "B2_margin": self.reduced.rsk_margin,
            "B3_c0": self.reduced.char_data.c0,
            "B3_eta_range": [float(self.reduced.char_data.eta.min()),
                             float(self.reduced.char_data.eta.max())],
            "flags": {k: bool(v) for k, v in self.flags.items()},
        }


def verify_hypotheses(sys: RelaxationSystem, u_minus, u_plus, v_guess=None,
                      b0_matrix=None, u_range=None, c0_cap=1.0,
                      rng=None) -> StructureReport:
    """Run the full hypothesis battery for the pair of end states.

    ``b0_matrix`` (effective viscosity at the midpoint equilibrium) comes
    from the reduction module; the cli wires the two together.
    """
    rng = rng or np.random.default_rng(0)
    red = ReducedSystem(sys, v_guess)
    u_minus = np.atleast_1d(np.asarray(u_minus, dtype=float))
    u_plus = np.atleast_1d(np.asarray(u_plus, dtype=float))
    u_mid = 0.5 * (u_minus + u_plus)
    W_minus = red.equilibrium(u_minus).w
    W_plus = red.equilibrium(u_plus).w
    W_mid = red.equilibrium(u_mid).w

    symzer = find_symmetrizer(sys, W_mid, rng=rng)
    sz_minus = Symmetrizer(
        A0=_sym_from_params(
            _solve_symmetrizer_at(sys, W_minus, seed_params=symzer.params)[0], sys.N),
        anchor=W_minus, positivity_margin=0.0, symmetry_residual=0.0,
        params=symzer.params)
    sz_plus = Symmetrizer(
        A0=_sym_from_params(
            _solve_symmetrizer_at(sys, W_plus, seed_params=symzer.params)[0], sys.N),
        anchor=W_plus, positivity_margin=0.0, symmetry_residual=0.0,
        params=symzer.params)
    a1 = check_A1([sz_minus, sz_plus], sys, [W_minus, W_plus])
    coupling_ok, coupling_min, _ = genuine_coupling(sys, W_mid)
    comp = find_compensator(sz_plus, sys, W_plus, rng=rng)

    if u_range is None:
        span = np.linalg.norm(u_plus - u_minus)
        ts = np.linspace(-0.75, 0.75, 7)
        u_range = np.array([u_mid + t * (u_plus - u_minus) for t in ts]) \
            if span > 0 else u_mid[None, :]
    if b0_matrix is None:
        from .reduction import block_partition, chapman_enskog
        bp = block_partition(sys, W_mid)
        b0_matrix = chapman_enskog(bp, 0.0).b0
    reduced = reduced_structure(red, u_mid, b0_matrix, u_range=u_range,
                                c0_cap=c0_cap, rng=rng)

    scale = 1.0 + np.linalg.norm(sys.dF(W_mid))
    flags = {
        "A1": a1.passed,
        "A2": comp.margin > PASS_MARGIN_FACTOR * scale,
        "genuine_coupling": coupling_ok,
        "B1": reduced.b0_psd_margin >= -1e-12,
        "B2": reduced.rsk_margin > PASS_MARGIN_FACTOR * scale,
        "B3": True,  # check_B3 raises on failure
    }
    return StructureReport(
        model=sys.name,
        symmetrizer=symzer,
        a1=a1,
        coupling_passed=coupling_ok,
        coupling_min=coupling_min,
        compensator=comp,
        reduced=reduced,
        flags=flags,
    )
