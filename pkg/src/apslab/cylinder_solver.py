"""The model operator sigma_0 (d/dt + A) on the finite cylinder [0, rho].

Sections are eigenmode series with exponential-polynomial time profiles, so
the per-mode solves R_lambda, the right inverse S_0, the extension operator,
full boundary-value solves, and every analytic identity (Green, energy, the
reference-isomorphism residual) are computed in closed form.  A 64-point
t-grid cross-check guards the antiderivative bookkeeping.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .expoly import Profile, first_order_solve
from .spectral_core import (
    BasisMismatchError,
    BoundarySection,
    EigenmodeBasis,
    SigmaZero,
    check_norm,
)
from .boundary_conditions import AdjointCondition, BoundaryCondition, adjoint

RANK_THRESHOLD = 1e-9  # relative singular-value cutoff for rank decisions
CONSISTENCY_TOL = 1e-9


class SolverError(ValueError):
    """Raised for invalid cylinder problem or section data."""


class CylinderSection:
    """An eigenmode series with one exponential-polynomial profile per fiber slot."""

    def __init__(self, basis: EigenmodeBasis, rho: float, profiles: Optional[dict] = None):
        if rho <= 0:
            raise SolverError("cylinder length must be positive")
        self.basis = basis
        self.rho = float(rho)
        self.profiles: dict = {}
        for mode_id, profs in (profiles or {}).items():
            if mode_id not in basis:
                raise BasisMismatchError(f"mode_id {mode_id} not in basis")
            profs = list(profs)
            if len(profs) != basis.fiber_dim(mode_id):
                raise SolverError(f"need one profile per fiber slot at mode {mode_id}")
            for p in profs:
                if (p.t0, p.t1) != (0.0, self.rho):
                    raise SolverError("profiles must live on [0, rho]")
            if not all(p.is_zero() for p in profs):
                self.profiles[mode_id] = profs

    @staticmethod
    def zero(basis: EigenmodeBasis, rho: float) -> "CylinderSection":
        return CylinderSection(basis, rho)

    @staticmethod
    def single_mode(
        basis: EigenmodeBasis, rho: float, mode_id: int, profile: Profile, fiber_index: int = 0
    ) -> "CylinderSection":
        profs = [Profile.zero(0.0, rho) for _ in range(basis.fiber_dim(mode_id))]
        profs[fiber_index] = profile
        return CylinderSection(basis, rho, {mode_id: profs})

    def is_zero(self) -> bool:
        return not self.profiles

    def _mode_profiles(self, mode_id: int) -> list[Profile]:
        if mode_id in self.profiles:
            return self.profiles[mode_id]
        return [Profile.zero(0.0, self.rho)] * self.basis.fiber_dim(mode_id)

    def trace(self, t: float) -> BoundarySection:
        coeffs = {
            mid: np.array([p(t) for p in profs]) for mid, profs in self.profiles.items()
        }
        return BoundarySection(self.basis, coeffs)

    def trace0(self) -> BoundarySection:
        return self.trace(0.0)

    def trace_rho(self) -> BoundarySection:
        return self.trace(self.rho)

    def __add__(self, other: "CylinderSection") -> "CylinderSection":
        if not self.basis.same_modes(other.basis) or self.rho != other.rho:
            raise BasisMismatchError("sections over different cylinders")
        out = {}
        for mid in set(self.profiles) | set(other.profiles):
            a = self._mode_profiles(mid)
            b = other._mode_profiles(mid)
            out[mid] = [pa + pb for pa, pb in zip(a, b)]
        return CylinderSection(self.basis, self.rho, out)

    def __sub__(self, other: "CylinderSection") -> "CylinderSection":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "CylinderSection":
        return CylinderSection(
            self.basis,
            self.rho,
            {mid: [p.scale(c) for p in profs] for mid, profs in self.profiles.items()},
        )

    def deriv_plus_a(self) -> "CylinderSection":
        """(d/dt + A) applied per mode, exactly."""
        out = {}
        for mid, profs in self.profiles.items():
            lam = self.basis.eigenvalue(mid)
            out[mid] = [p.derivative() + p.scale(lam) for p in profs]
        return CylinderSection(self.basis, self.rho, out)

    def l2_inner(self, other: "CylinderSection") -> complex:
        """Exact cylinder L^2 product, blockwise over shared mode ids."""
        total = 0.0 + 0.0j
        for mid, profs in self.profiles.items():
            if mid in other.profiles:
                for pa, pb in zip(profs, other.profiles[mid]):
                    total += pa.l2_inner(pb)
        return total

    def l2_norm_sq(self) -> float:
        return float(np.real(self.l2_inner(self)))

    def grid_l2_norm_sq(self, n: int = 64) -> float:
        """Trapezoid cross-check of the exact L^2 norm on an n-point t-grid."""
        ts = np.linspace(0.0, self.rho, n)
        total = 0.0
        for profs in self.profiles.values():
            for p in profs:
                vals = np.abs(np.array([p(t) for t in ts])) ** 2
                total += float(np.trapezoid(vals, ts))
        return total

    def sup_on_grid(self, n: int = 64) -> float:
        best = 0.0
        for profs in self.profiles.values():
            for p in profs:
                best = max(best, p.sup_on_grid(n))
        return best

    def on_basis(self, basis: EigenmodeBasis) -> "CylinderSection":
        if not self.basis.same_modes(basis):
            raise BasisMismatchError("cannot move section to a different mode lattice")
        return CylinderSection(basis, self.rho, self.profiles)


def _sigma_move(sec: CylinderSection, sigma0: SigmaZero, block_of, target_of) -> CylinderSection:
    out: dict = {}
    rho = sec.rho
    for mid, profs in sec.profiles.items():
        t = target_of(mid)
        S = block_of(mid)
        moved = []
        for r in range(S.shape[0]):
            acc = Profile.zero(0.0, rho)
            for c in range(S.shape[1]):
                if S[r, c] != 0:
                    acc = acc + profs[c].scale(S[r, c])
            moved.append(acc)
        if t in out:
            out[t] = [a + b for a, b in zip(out[t], moved)]
        else:
            out[t] = moved
    return CylinderSection(sec.basis, rho, out)


def sigma_apply(sec: CylinderSection, sigma0: SigmaZero) -> CylinderSection:
    """Apply sigma_0 fiberwise at every time (mode j content moves to tau(j))."""
    if not sigma0.basis.same_modes(sec.basis):
        raise BasisMismatchError("sigma_0 and section disagree on mode lattice")
    return _sigma_move(sec, sigma0, lambda j: sigma0.blocks[j], sigma0.tau)


def model_apply(sec: CylinderSection, sigma0: SigmaZero) -> CylinderSection:
    """D_0 Phi = sigma_0 (d/dt + A) Phi, exact."""
    return sigma_apply(sec.deriv_plus_a(), sigma0)


def model_adjoint_apply(sec: CylinderSection, sigma0: SigmaZero) -> CylinderSection:
    """D_0^* Psi for Psi over the adjoint-side basis: -sigma_0^* (d/dt + A-tilde) Psi."""
    as0 = sigma0.adjoint_sigma()
    if not as0.basis.same_modes(sec.basis):
        raise BasisMismatchError("adjoint section must live over the adjoint-side lattice")
    return model_apply(sec.on_basis(as0.basis), as0)


def r_lambda(lam: float, rhs: Profile) -> Profile:
    """The per-mode solve f' + lam f = rhs with f(0) = 0 for lam >= 0, f(rho) = 0 for lam < 0."""
    return first_order_solve(lam, rhs)


def s0_apply(psi: CylinderSection, sigma0: SigmaZero) -> CylinderSection:
    """The reference right inverse: S_0 Psi solves D_0 Phi = Psi with the split trace conditions."""
    g = _sigma_move(
        psi,
        sigma0,
        lambda m: np.linalg.inv(sigma0.blocks[sigma0.tau_inv(m)]),
        sigma0.tau_inv,
    )
    out = {}
    for mid, profs in g.profiles.items():
        lam = g.basis.eigenvalue(mid)
        out[mid] = [first_order_solve(lam, p) for p in profs]
    return CylinderSection(psi.basis, psi.rho, out)


def cutoff_profile(r: float, rho: float) -> Profile:
    """The C^1 cubic cutoff: 1 on [0, r/3], smoothstep down on [r/3, 2r/3], 0 beyond."""
    if not 0 < r <= rho:
        raise SolverError("cutoff radius must satisfy 0 < r <= rho")
    a, b = r / 3.0, 2.0 * r / 3.0
    h = r / 3.0
    # chi(t) = 1 - 3u^2 + 2u^3 with u = (t - a)/h, expanded in powers of t
    c0 = 1.0 - 3.0 * a * a / h**2 - 2.0 * a**3 / h**3
    c1 = 6.0 * a / h**2 + 6.0 * a * a / h**3
    c2 = -3.0 / h**2 - 6.0 * a / h**3
    c3 = 2.0 / h**3
    mid_terms = [(c0, 0, 0.0), (c1, 1, 0.0), (c2, 2, 0.0), (c3, 3, 0.0)]
    if rho > b:
        return Profile([0.0, a, b, rho], [[(1.0, 0, 0.0)], mid_terms, []])
    return Profile([0.0, a, b], [[(1.0, 0, 0.0)], mid_terms])


def extension_apply(phi: BoundarySection, r: float, rho: float) -> CylinderSection:
    """The extension (E phi)(t) = chi(t) exp(-t|A|) phi; trace at 0 is exactly phi."""
    chi = cutoff_profile(r, rho)
    out = {}
    for mid, vec in phi.coeffs.items():
        lam = abs(phi.basis.eigenvalue(mid))
        decay = Profile.exponential(1.0, -lam, 0.0, rho)
        base = chi.multiply(decay)
        out[mid] = [base.scale(a) for a in vec]
    return CylinderSection(phi.basis, rho, out)


@dataclasses.dataclass
class CylinderProblem:
    """The model operator on [0, rho] with boundary conditions at both ends.

    The left condition is expressed over the boundary operator A, the right
    one over the adapted operator -A (the negated basis).
    """

    basis: EigenmodeBasis
    sigma0: SigmaZero
    rho: float
    left: BoundaryCondition
    right: BoundaryCondition

    def __post_init__(self):
        if self.rho <= 0:
            raise SolverError("cylinder length must be positive")
        if not self.sigma0.basis.same_modes(self.basis):
            raise BasisMismatchError("sigma_0 disagrees with the problem basis")
        self.sigma0 = self.sigma0.on_basis(self.basis)
        if not self.left.basis.same_modes(self.basis):
            raise BasisMismatchError("left condition disagrees with the problem basis")
        for m in self.basis.modes:
            if abs(self.left.basis.eigenvalue(m.mode_id) - m.eigenvalue) > 1e-12:
                raise SolverError("left condition must be expressed over A")
        if not self.right.basis.same_modes(self.basis):
            raise BasisMismatchError("right condition disagrees with the problem basis")
        for m in self.basis.modes:
            if abs(self.right.basis.eigenvalue(m.mode_id) + m.eigenvalue) > 1e-12:
                raise SolverError("right condition must be expressed over -A")

    def on_basis(self, basis: EigenmodeBasis) -> "CylinderProblem":
        """Regenerate the whole problem over an extending basis (truncation certificates)."""
        return CylinderProblem(
            basis,
            self.sigma0.on_lattice(basis),
            self.rho,
            self.left.on_basis(basis),
            self.right.on_basis(basis.negated()),
        )


def adjoint_problem(P: CylinderProblem) -> CylinderProblem:
    """The adjoint boundary-value problem, whose kernel is the cokernel of P."""
    ab = P.sigma0.adjoint_basis()
    as0 = P.sigma0.adjoint_sigma()
    left_ad = adjoint(P.left, P.sigma0).condition
    neg_sigma = P.sigma0.negated_boundary()
    right_ad = adjoint(P.right.on_basis(neg_sigma.basis), neg_sigma).condition
    return CylinderProblem(ab, as0, P.rho, left_ad.on_basis(ab), right_ad)


@dataclasses.dataclass
class SolveResult:
    particular: Optional[CylinderSection]
    kernel_basis: list
    obstruction_basis: list
    residuals: dict
    consistent: bool


def _homogeneous_profile(lam: float, rho: float) -> Profile:
    """e^{-lam t}, normalized at the end where it is largest (bounded by 1)."""
    if lam >= 0:
        return Profile.exponential(1.0, -lam, 0.0, rho)
    return Profile.exponential(math.exp(lam * rho), -lam, 0.0, rho)


def _homogeneous_scales(basis: EigenmodeBasis, rho: float) -> tuple:
    """Per-coordinate values of the normalized homogeneous solutions at t=0 and t=rho."""
    d0 = np.zeros(basis.total_dim)
    dr = np.zeros(basis.total_dim)
    for m in basis.modes:
        off = basis.offset(m.mode_id)
        lam = m.eigenvalue
        if lam >= 0:
            v0, vr = 1.0, math.exp(-lam * rho)
        else:
            v0, vr = math.exp(lam * rho), 1.0
        d0[off : off + m.fiber_dim] = v0
        dr[off : off + m.fiber_dim] = vr
    return d0, dr


def _right_permutation(basis: EigenmodeBasis, nb: EigenmodeBasis) -> np.ndarray:
    """Index array p with x_nb = x_basis[p] for dense vectors over the two orderings."""
    perm = np.zeros(basis.total_dim, dtype=int)
    for m in basis.modes:
        src = basis.offset(m.mode_id)
        dst = nb.offset(m.mode_id)
        perm[dst : dst + m.fiber_dim] = np.arange(src, src + m.fiber_dim)
    return perm


def homogeneous_constraint_matrix(P: CylinderProblem) -> np.ndarray:
    """The stacked boundary constraints on normalized homogeneous coefficients.

    A coefficient vector c (primal dense ordering) gives the homogeneous
    solution sum_j c_j h_j(t) phi_j; the rows express membership of the
    traces in the left and right conditions.
    """
    basis = P.basis
    d0, dr = _homogeneous_scales(basis, P.rho)
    NL = P.left.perp_span_matrix()
    NR = P.right.perp_span_matrix()
    perm = _right_permutation(basis, P.right.basis)
    rows = []
    if NL.size:
        rows.append(NL.conj().T * d0[np.newaxis, :])
    if NR.size:
        # re-express the right rows in primal ordering, then scale by the t=rho values
        block = np.zeros((NR.shape[1], basis.total_dim), dtype=complex)
        block[:, perm] = NR.conj().T
        rows.append(block * dr[np.newaxis, :])
    if not rows:
        return np.zeros((0, basis.total_dim), dtype=complex)
    return np.vstack(rows)


def _kernel_coefficients(M: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal nullspace columns of M (dim columns if M is empty)."""
    if M.shape[0] == 0:
        return np.eye(dim, dtype=complex)
    u, s, vh = np.linalg.svd(M)
    if s.size:
        rank = int(np.sum(s > RANK_THRESHOLD * s[0]))
    else:
        rank = 0
    return vh[rank:, :].conj().T


def _coeffs_to_section(basis: EigenmodeBasis, rho: float, c: np.ndarray) -> CylinderSection:
    out = {}
    for m in basis.modes:
        off = basis.offset(m.mode_id)
        block = c[off : off + m.fiber_dim]
        if np.any(block != 0):
            h = _homogeneous_profile(m.eigenvalue, rho)
            out[m.mode_id] = [h.scale(a) for a in block]
    return CylinderSection(basis, rho, out)


def homogeneous_kernel(P: CylinderProblem) -> list:
    """All solutions of D_0 Phi = 0 meeting both boundary conditions."""
    M = homogeneous_constraint_matrix(P)
    K = _kernel_coefficients(M, P.basis.total_dim)
    return [_coeffs_to_section(P.basis, P.rho, K[:, i]) for i in range(K.shape[1])]


def solve_bvp(
    P: CylinderProblem, psi: CylinderSection, compute_obstructions: bool = True
) -> SolveResult:
    """General solve: Phi = S_0 Psi + homogeneous part fitted to both conditions."""
    if not psi.basis.same_modes(P.basis) or psi.rho != P.rho:
        raise BasisMismatchError("right-hand side disagrees with the problem")
    psi = psi.on_basis(P.basis)
    phi_p = s0_apply(psi, P.sigma0)
    M = homogeneous_constraint_matrix(P)
    NL = P.left.perp_span_matrix()
    NR = P.right.perp_span_matrix()
    x0 = phi_p.trace0().to_dense(P.basis)
    xr = phi_p.trace_rho().to_dense(P.right.basis)
    rhs_parts = []
    if NL.size:
        rhs_parts.append(-(NL.conj().T @ x0))
    if NR.size:
        rhs_parts.append(-(NR.conj().T @ xr))
    rhs = np.concatenate(rhs_parts) if rhs_parts else np.zeros(0, dtype=complex)

    K = _kernel_coefficients(M, P.basis.total_dim)
    kernel = [_coeffs_to_section(P.basis, P.rho, K[:, i]) for i in range(K.shape[1])]

    residuals = {}
    particular = None
    consistent = True
    if M.shape[0]:
        c, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        gap = float(np.linalg.norm(M @ c - rhs))
        residuals["constraint_residual"] = gap
        consistent = gap <= CONSISTENCY_TOL * (1.0 + float(np.linalg.norm(rhs)))
        if consistent:
            particular = phi_p + _coeffs_to_section(P.basis, P.rho, c)
    else:
        particular = phi_p
        residuals["constraint_residual"] = 0.0

    if particular is not None:
        check = model_apply(particular, P.sigma0) - psi
        residuals["operator_residual"] = math.sqrt(max(check.l2_norm_sq(), 0.0))

    obstructions = []
    if compute_obstructions:
        obstructions = homogeneous_kernel(adjoint_problem(P))
    return SolveResult(particular, kernel, obstructions, residuals, consistent)


# -- analytic identities ----------------------------------------------------

def riso_residual(phi: CylinderSection, sigma0: SigmaZero, grid: int = 64) -> float:
    """Sup-grid residual of Phi - S_0 D_0 Phi = exp(-tA) Q_{[0,oo)} Phi(0).

    Requires the right-end hypothesis: the strictly-lower spectral part of
    the trace at rho vanishes.
    """
    tr = phi.trace_rho()
    bad = 0.0
    for mid, vec in tr.coeffs.items():
        if phi.basis.eigenvalue(mid) < 0:
            bad = max(bad, float(np.max(np.abs(vec))))
    if bad > 1e-12 * (1.0 + math.sqrt(phi.l2_norm_sq())):
        raise SolverError("right-end hypothesis violated: lower trace at rho is nonzero")
    lhs = phi - s0_apply(model_apply(phi, sigma0), sigma0)
    tr0 = phi.trace0()
    rhs_profiles = {}
    for mid, vec in tr0.coeffs.items():
        lam = phi.basis.eigenvalue(mid)
        if lam >= 0:
            h = Profile.exponential(1.0, -lam, 0.0, phi.rho)
            rhs_profiles[mid] = [h.scale(a) for a in vec]
    rhs = CylinderSection(phi.basis, phi.rho, rhs_profiles)
    return (lhs - rhs).sup_on_grid(grid)


def greens_residual(phi: CylinderSection, psi: CylinderSection, sigma0: SigmaZero) -> complex:
    """(D_0 Phi, Psi) - (Phi, D_0^* Psi) minus the two-ended boundary term, exact.

    Psi lives over the adjoint-side basis; the boundary term is
    -(sigma_0 Phi(0), Psi(0)) + (sigma_0 Phi(rho), Psi(rho)).
    """
    dphi = model_apply(phi, sigma0)
    dpsi = model_adjoint_apply(psi, sigma0)
    lhs = dphi.l2_inner(psi) - phi.l2_inner(dpsi)

    def pair(a: BoundarySection, b: BoundarySection) -> complex:
        total = 0.0 + 0.0j
        for mid, vec in a.coeffs.items():
            if mid in b.coeffs:
                total += complex(np.sum(vec * np.conj(b.coeffs[mid])))
        return total

    s0_tr0 = sigma0.apply(phi.trace0())
    s0_trr = sigma0.apply(phi.trace_rho())
    rhs = -pair(s0_tr0, psi.trace0()) + pair(s0_trr, psi.trace_rho())
    return lhs - rhs


def energy_identity_residual(phi: CylinderSection) -> float:
    """Sum over modes of |int |f'+lam f|^2 - (||f'||^2 + lam^2||f||^2 + lam boundary)|."""
    total = 0.0
    rho = phi.rho
    for mid, profs in phi.profiles.items():
        lam = phi.basis.eigenvalue(mid)
        for f in profs:
            df = f.derivative()
            lhs = (df + f.scale(lam)).l2_norm_sq()
            boundary = abs(f(rho)) ** 2 - abs(f(0.0)) ** 2
            rhs = df.l2_norm_sq() + lam * lam * f.l2_norm_sq() + lam * boundary
            total += abs(lhs - rhs)
    return total


def ode_bound_check(lam: float, rhs: Profile) -> dict:
    """The a-priori L^2 and H^1 bounds for f = r_lambda(lam, rhs), with slack."""
    f = first_order_solve(lam, rhs)
    g_sq = rhs.l2_norm_sq()
    f_sq = f.l2_norm_sq()
    df_sq = f.derivative().l2_norm_sq()
    rho = rhs.t1 - rhs.t0
    if lam != 0:
        l2_bound = g_sq / (lam * lam)
        h1_bound = (4.0 + 1.0 / (lam * lam)) * g_sq
    else:
        l2_bound = (rho * rho / 2.0) * g_sq
        h1_bound = (1.0 + rho * rho / 2.0) * g_sq
    h1_sq = f_sq + df_sq
    return {
        "lambda": lam,
        "l2_sq": f_sq,
        "l2_bound": l2_bound,
        "l2_slack": l2_bound - f_sq,
        "h1_sq": h1_sq,
        "h1_bound": h1_bound,
        "h1_slack": h1_bound - h1_sq,
        "pass": f_sq <= l2_bound + 1e-12 and h1_sq <= h1_bound + 1e-12,
    }


def extension_bound_probe(samples: list, cut: float, r: float, rho: float) -> float:
    """Max over samples of the graph-norm/check-norm ratio of the extension operator."""
    if not samples:
        raise SolverError("extension bound probe needs at least one sample")
    worst = 0.0
    for phi in samples:
        denom = check_norm(phi, cut) ** 2
        if denom == 0.0:
            continue
        e = extension_apply(phi, r, rho)
        graph_sq = e.l2_norm_sq() + e.deriv_plus_a().l2_norm_sq()
        worst = max(worst, graph_sq / denom)
    if worst == 0.0:
        raise SolverError("extension bound probe needs a nonzero sample")
    return worst


def random_cylinder_section(
    basis: EigenmodeBasis,
    rng: np.random.Generator,
    rho: float,
    n_modes: int = 4,
    n_terms: int = 2,
    max_abs_eigenvalue: Optional[float] = None,
) -> CylinderSection:
    """A seeded random section with small exponential-polynomial profiles."""
    pool = [
        m
        for m in basis.modes
        if max_abs_eigenvalue is None or abs(m.eigenvalue) <= max_abs_eigenvalue
    ]
    if not pool:
        raise SolverError("no modes available for sampling")
    chosen = rng.choice(len(pool), size=min(n_modes, len(pool)), replace=False)
    out = {}
    for idx in np.atleast_1d(chosen):
        m = pool[int(idx)]
        profs = []
        for _ in range(m.fiber_dim):
            terms = []
            for _ in range(n_terms):
                c = complex(rng.standard_normal(), rng.standard_normal())
                p = int(rng.integers(0, 3))
                mu = complex(rng.standard_normal(), rng.standard_normal())
                # keep exponents well away from the resonance -lambda, where the
                # closed-form particular solution is ill-conditioned
                if abs(mu + m.eigenvalue) < 0.1:
                    mu += 0.2
                terms.append((c, p, mu))
            profs.append(Profile.from_terms(terms, 0.0, rho))
        out[m.mode_id] = profs
    return CylinderSection(basis, rho, out)
