"""Spectral stability via Evans-function winding numbers, cross-checked
by a discretized eigensolver.

The eigenvalue problem lam*w + (dF(W)w)' - dQ(W)w = 0 is written as a
first-order system in the conservative variable Z = dF(W) w. Where dF is
invertible this is Z' = (dQ - lam) dF^{-1} Z; where dF is singular with
constant kernel (discrete-kinetic standing frames) the kernel components
of w are solved algebraically from the corresponding rows and eliminated,
leaving a lower-dimensional system that never inverts dF.

Evans values are computed by propagating orthonormal bases of the
unstable subspace from the left and the stable subspace from the right
(midpoint-exponential steps, QR re-orthonormalization with positive-real
diagonal so that all rescalings are winding-neutral), with initial
subspaces continued along the spectral contour by eigenvalue tracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    AlgebraicBlockSingular,
    EssentialSpectrumHit,
    PhaseJump,
    RankChange,
    StiffnessFailure,
)
from .grids import Grid, graded_grid
from .profile import ShockProfile

_RANK_TOL = 1e-9


# ---------------------------------------------------------------------------
# first-order formulation


@dataclass
class EigenvalueODE:
    """First-order formulation of the eigenvalue equation at fixed lam."""

    lam: complex
    dim: int
    kind: str                    # "full" or "eliminated"
    assembler: "SpectralAssembler"
    algebraic_margin: float | None = None

    def coefficient(self, x):
        """System matrix M(x, lam) of Z' = M Z at scalar position x."""
        A = self.assembler
        pieces = A.pieces_at(np.atleast_1d(float(x)))
        return A.coefficient_batch(pieces, np.array([self.lam]))[0, 0]


class SpectralAssembler:
    """Profile-bound factory for the first-order eigenvalue system.

    Precomputes the lam-independent coefficient pieces at arbitrary x and
    assembles M(x, lam) batched over lam values.
    """

    def __init__(self, profile: ShockProfile):
        self.profile = profile
        sys = profile.system
        self.N = sys.N
        dF_samples = np.array([sys.dF(W) for W in profile.W])
        dF0 = dF_samples[len(dF_samples) // 2]
        self.dF_constant = bool(
            np.max(np.abs(dF_samples - dF0)) <= 1e-11 * (1.0 + np.max(np.abs(dF0)))
        )
        svals = np.linalg.svd(dF0, compute_uv=False)
        self.singular = svals[-1] < _RANK_TOL * svals[0]
        if self.singular:
            if not self.dF_constant:
                # variable singular dF would need x-dependent kernel data
                ranks = {int(np.sum(np.linalg.svd(A, compute_uv=False)
                                    > _RANK_TOL * svals[0])) for A in dF_samples}
                raise RankChange(
                    f"dF singular and not constant along the profile (ranks {ranks})"
                )
            U, S, Vt = np.linalg.svd(dF0)
            rank = int(np.sum(S > _RANK_TOL * S[0]))
            self.kind = "eliminated"
            self.dim = rank
            self.U_s = U[:, :rank]
            self.U_m = U[:, rank:]
            self.V_s = Vt[:rank].T
            self.V_m = Vt[rank:].T
            self.Sigma_inv = np.diag(1.0 / S[:rank])
        else:
            # invertibility must hold along the whole profile
            conds = np.array([np.linalg.cond(A) for A in dF_samples])
            if np.max(conds) > 1e10:
                raise RankChange("dF nearly singular at some profile states")
            self.kind = "full"
            self.dim = self.N

    # -- lam-independent data -------------------------------------------------

    def pieces_at(self, xs):
        """Coefficient pieces at positions xs: dict of stacked arrays."""
        xs = np.asarray(xs, dtype=float)
        W = self.profile.interpolate(xs)
        sys = self.profile.system
        dQ = np.array([sys.dQ(Wi) for Wi in W])
        out = {"dQ": dQ}
        if self.kind == "full":
            dFinv = np.array([np.linalg.inv(sys.dF(Wi)) for Wi in W])
            out["dFinv"] = dFinv
        return out

    def end_pieces(self, side):
        W = self.profile.W_minus if side < 0 else self.profile.W_plus
        sys = self.profile.system
        out = {"dQ": np.array([sys.dQ(W)])}
        if self.kind == "full":
            out["dFinv"] = np.array([np.linalg.inv(sys.dF(W))])
        return out

    # -- assembly --------------------------------------------------------------

    def coefficient_batch(self, pieces, lams):
        """M(x_k, lam_j) as an array of shape (npos, nlam, dim, dim)."""
        lams = np.asarray(lams, dtype=complex)
        dQ = pieces["dQ"]
        npos = dQ.shape[0]
        nlam = len(lams)
        eye = np.eye(self.N)
        if self.kind == "full":
            dFinv = pieces["dFinv"]
            # (dQ - lam) dF^{-1}
            A = dQ[:, None, :, :] - lams[None, :, None, None] * eye
            return np.einsum("pqij,pjk->pqik", A, dFinv)
        # eliminated system
        Us, Um, Vs, Vm, Sinv = self.U_s, self.U_m, self.V_s, self.V_m, self.Sigma_inv
        out = np.empty((npos, nlam, self.dim, self.dim), dtype=complex)
        for p in range(npos):
            dQp = dQ[p]
            Um_dQ = Um.T @ dQp
            Us_dQ = Us.T @ dQp
            for q, lam in enumerate(lams):
                blk = lam * (Um.T @ Vm) - Um_dQ @ Vm
                cond = np.linalg.cond(blk)
                if not np.isfinite(cond) or cond > 1e12:
                    raise AlgebraicBlockSingular(
                        f"algebraic block singular at lam={lam:.6g}"
                    )
                rhs = (lam * (Um.T @ Vs) - Um_dQ @ Vs) @ Sinv
                G = -np.linalg.solve(blk, rhs)
                core = Us_dQ - lam * Us.T
                out[p, q] = core @ (Vs @ Sinv + Vm @ G)
        return out

    def kernel_recovery(self, lam, Z):
        """Kernel-direction components y and full state w from Z (batched
        along the leading axis) at one end state; eliminated systems only."""
        if self.kind != "eliminated":
            raise RankChange("kernel recovery only applies to eliminated systems")
        raise NotImplementedError

    def apply_operator_pieces(self, xs):
        """dF(W), dQ(W) sampled at xs for residual reassembly."""
        W = self.profile.interpolate(xs)
        sys = self.profile.system
        dF = np.array([sys.dF(Wi) for Wi in W])
        dQ = np.array([sys.dQ(Wi) for Wi in W])
        return dF, dQ


def first_order_system(profile: ShockProfile, lam) -> EigenvalueODE:
    """First-order eigenvalue system at spectral parameter lam.

    Raises RankChange for variable-rank flux Jacobians and
    AlgebraicBlockSingular when lam collides with the algebraic spectrum
    of the eliminated block.
    """
    asm = SpectralAssembler(profile)
    lam = complex(lam)
    margin = None
    if asm.kind == "eliminated":
        # probe the algebraic block along the profile
        margins = []
        for W in profile.W[:: max(1, len(profile.W) // 64)]:
            dQp = profile.system.dQ(W)
            blk = lam * (asm.U_m.T @ asm.V_m) - asm.U_m.T @ dQp @ asm.V_m
            margins.append(np.min(np.abs(np.linalg.eigvals(blk))))
        margin = float(min(margins))
        if margin < 1e-10:
            raise AlgebraicBlockSingular(
                f"lam={lam:.6g} lies in the algebraic spectrum range"
            )
    return EigenvalueODE(lam=lam, dim=asm.dim, kind=asm.kind, assembler=asm,
                         algebraic_margin=margin)


def manufactured_residual(profile: ShockProfile, lam, w_func, wprime_func,
                          n_points):
    """Consistency check of the first-order assembly on an analytic field.

    Reassembles lam*w + (dF w)' - dQ w from the first-order variables with
    the derivative taken by the grid stencil, and compares against the
    direct evaluation with the analytic derivative. Returns the maximum
    mismatch; it converges at the stencil order as n_points grows.
    """
    asm = SpectralAssembler(profile)
    lam = complex(lam)
    L = profile.grid.x[-1]
    grid = Grid(np.linspace(-0.7 * L, 0.7 * L, int(n_points)))
    xs = grid.x
    w = np.array([w_func(x) for x in xs], dtype=complex)
    wp = np.array([wprime_func(x) for x in xs], dtype=complex)
    dF, dQ = asm.apply_operator_pieces(xs)
    if not asm.dF_constant:
        raise RankChange("manufactured test assumes a constant flux Jacobian")
    direct = lam * w + np.einsum("kij,kj->ki", dF, wp) \
        - np.einsum("kij,kj->ki", dQ, w)

    Z = np.einsum("kij,kj->ki", dF, w)
    dZ = grid.deriv(Z)
    if asm.kind == "full":
        assembled = lam * w + dZ - np.einsum("kij,kj->ki", dQ, w)
    else:
        Us, Um = asm.U_s, asm.U_m
        # dynamical rows: U_s^T (lam w + (dF w)' - dQ w); algebraic rows idem
        dyn = (lam * w + dZ - np.einsum("kij,kj->ki", dQ, w)) @ Us
        alg = lam * (w @ Um) - np.einsum("kij,kj->ki", dQ, w) @ Um
        assembled = dyn @ Us.T + alg @ Um.T
    return float(np.max(np.abs(assembled - direct)))


# ---------------------------------------------------------------------------
# Evans function machinery


def _track_groups(eigs_seq, labels0):
    """Propagate a group labelling along a sequence of eigenvalue sets by
    nearest-distance matching. Returns labels per step."""
    labels = [np.asarray(labels0)]
    for k in range(1, len(eigs_seq)):
        prev, cur = eigs_seq[k - 1], eigs_seq[k]
        d = len(cur)
        cost = np.abs(cur[:, None] - prev[None, :])
        lab = np.empty(d, dtype=int)
        used = set()
        order = np.argsort(cost.min(axis=1))
        for i in order:
            js = np.argsort(cost[i])
            for j in js:
                if j not in used:
                    lab[i] = labels[-1][j]
                    used.add(j)
                    break
        labels.append(lab)
    return labels


def _projector(V, Vinv, mask):
    return V[:, mask] @ Vinv[mask, :]


def _positive_qr(B):
    """QR with positive real diagonal of R; returns (Q, log det R)."""
    Q, R = np.linalg.qr(B)
    d = np.diagonal(R, axis1=-2, axis2=-1).copy()
    d = np.where(np.abs(d) < 1e-300, 1.0, d)
    ph = d / np.abs(d)
    Q = Q * ph.conj()[..., None, :]
    logdet = np.sum(np.log(np.abs(d)), axis=-1)
    return Q, logdet


class EvansSolver:
    """Evans-function evaluator for one profile.

    Propagation runs on a thinned copy of the profile grid with
    midpoint-exponential steps; all lam samples of one request are
    propagated together (vectorized eigendecompositions).
    """

    def __init__(self, profile: ShockProfile, n_prop=700, rtol_expm=1e-12):
        self.profile = profile
        self.asm = SpectralAssembler(profile)
        g = profile.grid
        idx = np.unique(np.round(np.linspace(0, g.n - 1, min(n_prop, g.n))).astype(int))
        self.x_nodes = g.x[idx]
        i0 = int(np.argmin(np.abs(self.x_nodes)))
        self.i_zero = i0
        mids = 0.5 * (self.x_nodes[:-1] + self.x_nodes[1:])
        self.h_steps = np.diff(self.x_nodes)
        self.mid_pieces = self.asm.pieces_at(mids)
        self.end_minus = self.asm.end_pieces(-1)
        self.end_plus = self.asm.end_pieces(+1)

    # -- end-state splitting ---------------------------------------------------

    def _end_eigs(self, side, lams):
        pieces = self.end_minus if side < 0 else self.end_plus
        M = self.asm.coefficient_batch(pieces, lams)[0]
        vals, vecs = np.linalg.eig(M)
        return M, vals, vecs

    def _splitting(self, lams_ordered, anchor_index=0):
        """Tracked partitions of the end-state spatial eigenvalues, with
        the group of interest labelled 1 (unstable at -inf, stable at
        +inf), classified at the anchor sample by sign."""
        out = {}
        for side in (-1, +1):
            _, vals, _ = self._end_eigs(side, lams_ordered)
            anchor = vals[anchor_index]
            re = anchor.real
            tol = 1e-12 * (1.0 + np.max(np.abs(anchor)))
            if np.min(np.abs(re)) <= tol:
                raise EssentialSpectrumHit(
                    f"anchor lambda={lams_ordered[anchor_index]:.4g} has a "
                    f"neutral spatial mode on side {side:+d}"
                )
            labels0 = (re > 0).astype(int) if side < 0 else (re < 0).astype(int)
            seq_fwd = [vals[i] for i in range(anchor_index, len(lams_ordered))]
            labels_fwd = _track_groups(seq_fwd, labels0)
            seq_bwd = [vals[i] for i in range(anchor_index, -1, -1)]
            labels_bwd = _track_groups(seq_bwd, labels0)
            labels = list(reversed(labels_bwd))[:-1] + labels_fwd
            out[side] = (vals, labels)
        km = int(np.sum(out[-1][1][anchor_index]))
        kp = int(np.sum(out[+1][1][anchor_index]))
        if km + kp != self.asm.dim:
            raise EssentialSpectrumHit(
                f"inconsistent splitting: k-={km}, k+={kp}, dim={self.asm.dim}"
            )
        self.k_minus, self.k_plus = km, kp
        return out

    def _initial_bases(self, side, lams, splitting):
        vals, labels = splitting[side]
        _, _, vecs = self._end_eigs(side, lams)
        k = self.k_minus if side < 0 else self.k_plus
        d = self.asm.dim
        # reference frame: columns of the identity, chosen for robustness
        best_ref, best_score = None, -1.0
        rng = np.random.default_rng(12345)
        candidates = [np.eye(d)[:, :k]] + [
            np.linalg.qr(rng.standard_normal((d, k)))[0] for _ in range(3)
        ]
        P_list = []
        for j in range(len(lams)):
            mask = labels[j].astype(bool)
            if int(mask.sum()) != k:
                raise EssentialSpectrumHit(
                    f"subspace dimension changed along the contour on side {side:+d}"
                )
            Vinv = np.linalg.inv(vecs[j])
            P_list.append(_projector(vecs[j], Vinv, mask))
        for ref in candidates:
            score = min(
                np.linalg.svd(P @ ref, compute_uv=False)[-1] for P in P_list
            )
            if score > best_score:
                best_score, best_ref = score, ref
        if best_score < 1e-6:
            raise EssentialSpectrumHit(
                "no reference frame stays transversal to the tracked subspace"
            )
        bases = np.empty((len(lams), d, k), dtype=complex)
        for j, P in enumerate(P_list):
            Q, _ = _positive_qr(P @ best_ref)
            bases[j] = Q
        return bases

    # -- propagation -----------------------------------------------------------

    def _propagate(self, side, lams, bases, mu_sum):
        """March the bases from the boundary to x ~ 0.

        Each step removes the gauge factor exp(h * mu_sum), the summed
        end-state rates of the tracked group: a continuous, single-valued
        scalar along any closed contour, so it never changes winding
        numbers, while it cancels the bulk phase gradient that would
        otherwise alias the contour sampling. Returns (B, log magnitude);
        the reported Evans values are gauge-fixed accordingly.
        """
        nlam = len(lams)
        if side < 0:
            step_ids = range(0, self.i_zero)
            direction = +1.0
        else:
            step_ids = range(len(self.h_steps) - 1, self.i_zero - 1, -1)
            direction = -1.0
        B = bases.copy()
        logmag = np.zeros(nlam)
        pieces_keys = {k: v for k, v in self.mid_pieces.items()}
        for i in step_ids:
            pieces_i = {k: v[i:i + 1] for k, v in pieces_keys.items()}
            M = self.asm.coefficient_batch(pieces_i, lams)[0]
            h = direction * self.h_steps[i]
            w, V = np.linalg.eig(h * M)
            gauge = h * mu_sum
            args = w - gauge[:, None]
            extra = np.max(args.real, axis=1)
            expw = np.exp(args - extra[:, None])
            try:
                Vinv = np.linalg.inv(V)
            except np.linalg.LinAlgError as exc:
                raise StiffnessFailure(
                    f"defective propagator at step {i}: {exc}"
                ) from exc
            E = np.einsum("qij,qj,qjk->qik", V, expw, Vinv)
            B = E @ B
            Q, logdet = _positive_qr(B)
            B = Q
            logmag += gauge.real + extra + logdet
        return B, logmag

    def _group_rate_sum(self, side, lams, splitting):
        vals, labels = splitting[side]
        out = np.empty(len(lams), dtype=complex)
        for j in range(len(lams)):
            out[j] = vals[j][labels[j].astype(bool)].sum()
        return out

    def samples(self, lams_ordered, anchor_index=0, require_loop_consistency=False):
        """Evans samples (unit-phase value and log magnitude) for an
        ordered array of lam values with subspace continuation.

        With ``require_loop_consistency`` (closed contours), verify that
        the tracked eigenvalue partition returns to itself after the loop;
        a mismatch means the contour encloses a branch point of the
        spatial eigenvalues, where a winding number is not defined.
        """
        lams = np.asarray(lams_ordered, dtype=complex)
        splitting = self._splitting(lams, anchor_index)
        if require_loop_consistency and abs(lams[0] - lams[-1]) < 1e-14 * (1 + abs(lams[0])):
            for side in (-1, +1):
                vals, labels = splitting[side]
                first = set(np.nonzero(labels[0])[0])
                # match last sample's eigenvalues back to the first sample's
                cost = np.abs(vals[-1][:, None] - vals[0][None, :])
                perm = np.argmin(cost, axis=1)
                last = {perm[i] for i in np.nonzero(labels[-1])[0]}
                if first != last:
                    raise EssentialSpectrumHit(
                        "eigenvalue tracking is not single-valued around the "
                        "contour (encloses a branch point of the spatial "
                        "eigenvalues); shrink the contour"
                    )
        Bm = self._initial_bases(-1, lams, splitting)
        Bp = self._initial_bases(+1, lams, splitting)
        Bm0, lm = self._propagate(-1, lams, Bm, self._group_rate_sum(-1, lams, splitting))
        Bp0, lp = self._propagate(+1, lams, Bp, self._group_rate_sum(+1, lams, splitting))
        full = np.concatenate([Bm0, Bp0], axis=2)
        if full.shape[1] != full.shape[2]:
            raise EssentialSpectrumHit("subspace dimensions do not fill the space")
        dets = np.linalg.det(full)
        out = []
        for j, lam in enumerate(lams):
            mag = np.abs(dets[j])
            phase = dets[j] / mag if mag > 0 else 0.0 + 0.0j
            out.append(EvansSample(
                lam=complex(lam),
                phase=complex(phase),
                log_mag=float(np.log(max(mag, 1e-300)) + lm[j] + lp[j]),
                conditioning={"k_minus": self.k_minus, "k_plus": self.k_plus},
            ))
        return out


@dataclass
class EvansSample:
    """One Evans evaluation: D = phase * exp(log_mag)."""

    lam: complex
    phase: complex
    log_mag: float
    conditioning: dict = field(default_factory=dict)

    @property
    def value_scaled(self):
        return self.phase * np.exp(self.log_mag)


def evans(profile: ShockProfile, lam, solver: EvansSolver | None = None,
          anchor=None) -> EvansSample:
    """Single Evans sample, continued from a safe real anchor point."""
    solver = solver or EvansSolver(profile)
    lam = complex(lam)
    if anchor is None:
        anchor = max(1.0, 4.0 * abs(lam))
    path = _continuation_path(anchor, lam)
    return solver.samples(path, anchor_index=0)[-1]


def _continuation_path(anchor, target, n=12):
    anchor = complex(anchor)
    target = complex(target)
    ts = np.linspace(0.0, 1.0, n)
    return anchor + (target - anchor) * ts


# ---------------------------------------------------------------------------
# contours and winding numbers


@dataclass
class Contour:
    """Closed contour given as parameterized segments traversed in order."""

    segments: list           # list of callables t in [0,1] -> complex
    n_init: int = 16
    description: str = ""

    def initial_params(self):
        return [np.linspace(0.0, 1.0, self.n_init) for _ in self.segments]


def half_annulus_contour(r_in, R, n_init=16):
    """Positively-oriented boundary of {Re >= 0, r_in <= |lam| <= R},
    starting and anchored at lam = R."""
    def outer_up(t):
        return R * np.exp(1j * (0.5 * np.pi * t))

    def axis_down(t):
        return 1j * (R + t * (r_in - R))

    def inner(t):
        return r_in * np.exp(1j * (0.5 * np.pi - np.pi * t))

    def axis_out(t):
        return -1j * (r_in + t * (R - r_in))

    def outer_close(t):
        return R * np.exp(1j * (-0.5 * np.pi + 0.5 * np.pi * t))

    return Contour(
        segments=[outer_up, axis_down, inner, axis_out, outer_close],
        n_init=n_init,
        description=f"half-annulus r_in={r_in:.3g} R={R:.3g}",
    )


def circle_contour(radius, n_init=24):
    """Full circle around the origin, anchored at lam = radius."""
    def seg(t):
        return radius * np.exp(2j * np.pi * t)

    return Contour(segments=[seg], n_init=n_init,
                   description=f"circle radius={radius:.3g}")


@dataclass
class SpectralVerdict:
    contour_description: str
    winding_number: int
    phase_residual: float
    samples: list
    eigensolver_count: int | None = None
    translation: dict | None = None
    excluded_radius: float | None = None
    outer_radius: float | None = None
    stable: bool | None = None

    def to_dict(self):
        return {
            "contour": self.contour_description,
            "winding_number": self.winding_number,
            "phase_residual": self.phase_residual,
            "eigensolver_count": self.eigensolver_count,
            "translation": self.translation,
            "excluded_radius": self.excluded_radius,
            "outer_radius": self.outer_radius,
            "stable": self.stable,
            "n_samples": len(self.samples),
        }

    def export_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re_lam", "im_lam", "re_D", "im_D", "log_mag"])
            for s in self.samples:
                writer.writerow([
                    f"{s.lam.real:.17g}", f"{s.lam.imag:.17g}",
                    f"{s.phase.real:.17g}", f"{s.phase.imag:.17g}",
                    f"{s.log_mag:.17g}",
                ])


def winding_number(profile: ShockProfile, contour: Contour,
                   solver: EvansSolver | None = None,
                   phase_threshold=0.45 * np.pi,
                   max_points=4000, max_rounds=14) -> SpectralVerdict:
    """Integer winding of the Evans function around a closed contour,
    with adaptive refinement until consecutive phase increments are below
    the threshold."""
    solver = solver or EvansSolver(profile)
    params = contour.initial_params()

    def gather(params):
        lams, seg_of = [], []
        for si, (seg, ts) in enumerate(zip(contour.segments, params)):
            use = ts if si == len(contour.segments) - 1 else ts[:-1]
            for t in use:
                lams.append(seg(t))
                seg_of.append((si, t))
        lams.append(contour.segments[0](params[0][0]))   # close the loop
        seg_of.append((0, params[0][0]))
        return np.asarray(lams), seg_of

    for round_ in range(max_rounds):
        lams, seg_of = gather(params)
        samples = solver.samples(lams, anchor_index=0,
                                 require_loop_consistency=True)
        phases = np.array([s.phase for s in samples])
        dphi = np.angle(phases[1:] / phases[:-1])
        bad = np.abs(dphi) >= phase_threshold
        if not bad.any():
            total = float(np.sum(dphi))
            w = int(np.round(total / (2 * np.pi)))
            residual = abs(total - 2 * np.pi * w)
            return SpectralVerdict(
                contour_description=contour.description,
                winding_number=w,
                phase_residual=float(residual),
                samples=samples,
            )
        if len(lams) >= max_points:
            break
        # insert parameter midpoints around offending increments
        new_params = [list(ts) for ts in params]
        for idx in np.nonzero(bad)[0]:
            si, t_right = seg_of[idx + 1]
            si_left, t_left = seg_of[idx]
            if si == si_left:
                new_params[si].append(0.5 * (t_left + t_right))
            else:
                # increment spans a segment joint: refine both sides
                new_params[si_left].append(0.5 * (t_left + 1.0))
                new_params[si].append(0.5 * t_right)
        params = [np.unique(np.asarray(ts)) for ts in new_params]
    raise PhaseJump(
        f"phase increments above threshold after {max_points} contour points; "
        "contour may pass near a zero"
    )


def translation_circle(profile: ShockProfile, radius, solver=None,
                       max_shrink=8, **kwargs):
    """Winding number on a circle around the origin, shrinking the radius
    (halving, up to max_shrink times) until the circle no longer encloses
    a branch point of the spatial eigenvalues. Returns the verdict; its
    excluded_radius field records the radius actually used."""
    solver = solver or EvansSolver(profile)
    r = float(radius)
    last_exc = None
    for _ in range(max_shrink + 1):
        try:
            v = winding_number(profile, circle_contour(r), solver, **kwargs)
            v.excluded_radius = r
            return v
        except EssentialSpectrumHit as exc:
            last_exc = exc
            r *= 0.5
    raise EssentialSpectrumHit(
        f"no branch-point-free circle found down to radius {r:.3e}"
    ) from last_exc


def translation_mode_data(profile: ShockProfile, solver=None, delta=None):
    """Evans value at 0 and a one-sided derivative along the real axis,
    relative to the profile's spectral scale."""
    solver = solver or EvansSolver(profile)
    eps = max(profile.eps, 1e-6)
    delta = delta or max(1e-7, 0.05 * eps ** 2)
    anchor = max(1.0, 10 * delta)
    path = np.concatenate([
        np.geomspace(anchor, 2 * delta, 24), [delta * 2, delta, 0.0]])
    samples = solver.samples(path, anchor_index=0)
    s0 = samples[-1]
    s1 = samples[-2]
    s2 = samples[-3]
    base = max(s.log_mag for s in (s0, s1, s2))
    v0 = s0.phase * np.exp(s0.log_mag - base)
    v1 = s1.phase * np.exp(s1.log_mag - base)
    v2 = s2.phase * np.exp(s2.log_mag - base)
    dprime = (4.0 * v1 - v2 - 3.0 * v0) / (2.0 * delta)
    return {
        "D0_log_mag": s0.log_mag,
        "D0_phase": s0.phase,
        "Dprime0_scaled": complex(dprime),
        "Dprime0_log_mag": float(np.log(max(abs(dprime), 1e-300)) + base),
        "delta": float(delta),
        "base_log_mag": float(base),
    }


# ---------------------------------------------------------------------------
# discretized eigensolver (independent cross-check)


def _build_operator(profile: ShockProfile, grid: Grid):
    """Dense discretization of L w = -(dF(W) w)' + dQ(W) w with one-sided
    stencils and outflow-consistent boundary treatment: incoming
    characteristic components at each boundary are penalized (SAT-style),
    which removes spurious reflected boundary modes."""
    sys = profile.system
    N = sys.N
    xs = grid.x
    W = profile.interpolate(xs)
    dF = np.array([sys.dF(Wi) for Wi in W])
    dQ = np.array([sys.dQ(Wi) for Wi in W])
    D1 = grid.d1.toarray()
    n = grid.n
    L = np.zeros((n * N, n * N))
    # derivative acts on the field (dF w); dF evaluated at the stencil's
    # source point
    for a in range(N):
        for b in range(N):
            L[a::N, b::N] -= D1 * dF[:, a, b][None, :]
    for i in range(n):
        L[i * N:(i + 1) * N, i * N:(i + 1) * N] += dQ[i]

    for side, i_b in ((-1, 0), (+1, n - 1)):
        A = dF[i_b]
        lam_c, V = np.linalg.eig(A)
        lam_c, V = lam_c.real, V.real
        incoming = lam_c > _RANK_TOL if side < 0 else lam_c < -_RANK_TOL
        if not incoming.any():
            continue
        Vinv = np.linalg.inv(V)
        P_in = (V[:, incoming] * np.abs(lam_c[incoming])) @ Vinv[incoming, :]
        h_edge = grid.h[0] if side < 0 else grid.h[-1]
        tau = 2.0 / h_edge
        blk = slice(i_b * N, (i_b + 1) * N)
        L[blk, blk] -= tau * P_in
    return L


def _collect_eigs(profile, half_length, n_points, region_radius,
                  edge_tol=0.25):
    grid = graded_grid(half_length, n_points,
                       min(max(half_length / 8.0, 1.0),
                           10.0 / max(profile.eps, 1e-3)))
    L = _build_operator(profile, grid)
    vals, vecs = sla.eig(L)
    keep = np.abs(vals) <= region_radius
    out = []
    N = profile.system.N
    fine = Grid(np.interp(np.linspace(0, 1, 2 * grid.n - 1),
                          np.linspace(0, 1, grid.n), grid.x))
    L_fine = _build_operator(profile, fine)
    interior = slice(int(0.05 * fine.n) * N, (fine.n - int(0.05 * fine.n)) * N)
    for j in np.nonzero(keep)[0]:
        v = vecs[:, j].reshape(grid.n, N)
        # boundary concentration: modes pinned at the edges are artifacts
        mass = np.abs(v) ** 2
        total = mass.sum()
        edge = int(0.08 * grid.n)
        edge_mass = mass[:edge].sum() + mass[-edge:].sum()
        entry = {
            "lam": complex(vals[j]),
            "edge_fraction": float(edge_mass / total),
            "residual": np.inf,
        }
        if entry["edge_fraction"] <= edge_tol:
            vf = np.empty((fine.n, N), dtype=complex)
            for a in range(N):
                vf[:, a] = np.interp(fine.x, grid.x, v[:, a].real) \
                    + 1j * np.interp(fine.x, grid.x, v[:, a].imag)
            flat = vf.ravel()
            resid = (L_fine @ flat - vals[j] * flat)[interior]
            entry["residual"] = float(
                np.linalg.norm(resid) / max(np.linalg.norm(flat), 1e-300))
        out.append(entry)
    return grid, out


def discretized_spectrum(profile: ShockProfile, region_radius,
                         n_points=501, residual_tol=5e-3,
                         match_tol=None, edge_tol=0.25):
    """Eigenvalues of the discretized linearized operator inside the disk
    |lam| <= region_radius, filtered for robustness.

    Robust modes must (i) carry little boundary mass, (ii) have a small
    cross-discretization residual, and (iii) persist when the domain is
    extended by 1.5x. Returns a dict with all candidates, the robust
    list, and the measured translation-mode grid tolerance.
    """
    L0 = profile.grid.x[-1]
    grid, cands = _collect_eigs(profile, L0, n_points, region_radius)
    _, cands_long = _collect_eigs(profile, 1.5 * L0, n_points, region_radius)
    long_vals = np.array([c["lam"] for c in cands_long]) if cands_long else np.array([])
    if match_tol is None:
        match_tol = max(1e-5, 10.0 * _translation_grid_tol(profile, grid))
    robust = []
    for c in cands:
        if c["edge_fraction"] > edge_tol or c["residual"] > residual_tol:
            continue
        if long_vals.size:
            dist = np.min(np.abs(long_vals - c["lam"]))
            if dist > match_tol * (1.0 + abs(c["lam"])):
                continue
        else:
            continue
        robust.append(c)
    gtol = _translation_grid_tol(profile, grid)
    return {
        "candidates": cands,
        "robust": robust,
        "grid_tol": gtol,
        "region_radius": region_radius,
        "match_tol": match_tol,
    }


def _translation_grid_tol(profile, grid):
    """Residual of the translation mode on the eigensolver grid: the scale
    below which discrete eigenvalues cannot be distinguished from 0."""
    if profile.is_constant:
        return 1e-14
    sys = profile.system
    W = profile.interpolate(grid.x)
    W1 = profile.interpolate_deriv(grid.x)
    dF = np.array([sys.dF(Wi) for Wi in W])
    dQ = np.array([sys.dQ(Wi) for Wi in W])
    dFv = np.einsum("kij,kj->ki", dF, W1)
    Lv = -grid.deriv(dFv) + np.einsum("kij,kj->ki", dQ, W1)
    return float(grid.norm2(Lv) / max(grid.norm2(W1), 1e-300))


def count_inside(spec_result, r_in, R, re_min=0.0, slack=0.0):
    """Number of robust eigenvalues inside the half-annulus region."""
    cnt = 0
    for c in spec_result["robust"]:
        lam = c["lam"]
        if r_in <= abs(lam) <= R and lam.real >= re_min - slack:
            cnt += 1
    return cnt
