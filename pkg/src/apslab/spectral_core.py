"""Eigenmode model of the boundary: sections, Sobolev/hybrid norms, projections, pairings.

The boundary operator A is given purely by spectral data: a finite list of
eigenmodes (eigenvalue, multiplicity) over one or more circle components,
truncated at |lambda| <= lambda_max.  All norms are exact finite sums over
section support; there is no quadrature anywhere in this module.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Iterable, Optional

import numpy as np

IDENTITY_TOL = 1e-12


class BasisMismatchError(ValueError):
    """Raised when two sections (or a section and an operator) disagree on the mode lattice."""


@dataclasses.dataclass(frozen=True)
class Interval:
    """A real interval with explicit endpoint openness; endpoints may be +-inf."""

    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = False

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, lo_closed = self.lo, self.lo_closed
        else:
            lo, lo_closed = other.lo, other.lo_closed
        if self.hi < other.hi or (self.hi == other.hi and not self.hi_closed):
            hi, hi_closed = self.hi, self.hi_closed
        else:
            hi, hi_closed = other.hi, other.hi_closed
        return Interval(lo, hi, lo_closed, hi_closed)

    def complement_pieces(self) -> list["Interval"]:
        """The complement of the interval in R, as up to two intervals."""
        pieces = []
        if self.lo > -math.inf or not self.lo_closed:
            pieces.append(Interval(-math.inf, self.lo, False, not self.lo_closed))
        if self.hi < math.inf or not self.hi_closed:
            pieces.append(Interval(self.hi, math.inf, not self.hi_closed, False))
        return pieces

    @staticmethod
    def below(a: float) -> "Interval":
        """(-inf, a) — the default lower spectral half."""
        return Interval(-math.inf, a, False, False)

    @staticmethod
    def at_least(a: float) -> "Interval":
        """[a, inf) — the default upper spectral half."""
        return Interval(a, math.inf, True, False)


@dataclasses.dataclass(frozen=True)
class Mode:
    mode_id: int
    component_id: str
    eigenvalue: float
    fiber_dim: int

    def __post_init__(self):
        if self.fiber_dim < 1:
            raise ValueError("fiber_dim must be a positive integer")
        if not math.isfinite(self.eigenvalue):
            raise ValueError("eigenvalue must be finite")


class EigenmodeBasis:
    """Finite truncation of the spectral decomposition of the boundary operator A.

    ``pairings`` optionally records a mode involution (used by transmission
    doublings and chiral families).  ``extend_fn`` regenerates the basis at a
    larger truncation; it is what makes 2N truncation certificates possible.
    """

    def __init__(
        self,
        modes: Iterable[Mode],
        band_limit: float,
        pairings: Optional[dict] = None,
        extend_fn: Optional[Callable[[int], "EigenmodeBasis"]] = None,
    ):
        modes = sorted(modes, key=lambda m: (m.component_id, m.eigenvalue, m.mode_id))
        if not modes:
            raise ValueError("basis must contain at least one mode")
        ids = [m.mode_id for m in modes]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate mode_id: {dup[0]}")
        self.modes = tuple(modes)
        self.band_limit = float(band_limit)
        self.lambda_max = max(abs(m.eigenvalue) for m in modes)
        if not (0.0 <= self.band_limit < self.lambda_max):
            raise ValueError("band_limit must satisfy 0 <= band_limit < lambda_max")
        self.pairings = dict(pairings) if pairings else None
        self._extend_fn = extend_fn
        self._by_id = {m.mode_id: m for m in self.modes}
        offsets = {}
        pos = 0
        for m in self.modes:
            offsets[m.mode_id] = pos
            pos += m.fiber_dim
        self._offsets = offsets
        self.total_dim = pos
        self.components = tuple(sorted({m.component_id for m in self.modes}))

    def mode(self, mode_id: int) -> Mode:
        return self._by_id[mode_id]

    def __contains__(self, mode_id: int) -> bool:
        return mode_id in self._by_id

    def eigenvalue(self, mode_id: int) -> float:
        return self._by_id[mode_id].eigenvalue

    def fiber_dim(self, mode_id: int) -> int:
        return self._by_id[mode_id].fiber_dim

    def offset(self, mode_id: int) -> int:
        return self._offsets[mode_id]

    def modes_in(self, interval: Interval) -> list[Mode]:
        return [m for m in self.modes if interval.contains(m.eigenvalue)]

    def same_modes(self, other: "EigenmodeBasis") -> bool:
        """True if the two bases share the same mode lattice (ids and fiber dims).

        Eigenvalues may differ; coefficient-level operations only need the lattice.
        """
        if len(self.modes) != len(other.modes):
            return False
        return all(
            m.mode_id in other._by_id and other._by_id[m.mode_id].fiber_dim == m.fiber_dim
            for m in self.modes
        )

    def negated(self) -> "EigenmodeBasis":
        """The same mode lattice with all eigenvalues negated (adapted operator -A)."""
        modes = [dataclasses.replace(m, eigenvalue=-m.eigenvalue) for m in self.modes]
        parent = self

        def extend(factor: int) -> "EigenmodeBasis":
            return parent.extended(factor).negated()

        ext = extend if self._extend_fn is not None else None
        return EigenmodeBasis(modes, self.band_limit, pairings=self.pairings, extend_fn=ext)

    def with_eigenvalues(self, eig: dict) -> "EigenmodeBasis":
        """Replace eigenvalues mode-by-mode (no extension support)."""
        modes = [dataclasses.replace(m, eigenvalue=float(eig[m.mode_id])) for m in self.modes]
        return EigenmodeBasis(modes, self.band_limit, pairings=self.pairings)

    def extended(self, factor: int = 2) -> "EigenmodeBasis":
        """Regenerate the basis at ``factor`` times the truncation parameter."""
        if self._extend_fn is None:
            raise ValueError("basis carries no extension rule; cannot certify truncation")
        return self._extend_fn(factor)

    def cut_above(self, x: float) -> float:
        """A cut c with {lambda < c} = {lambda <= x} on this basis.

        Returns the midpoint between x and the smallest eigenvalue above x
        (or x + 1 if none), so the choice is deterministic and stays correct
        under basis extension as long as extension does not insert eigenvalues
        into the gap — true for all lattice families used here.
        """
        above = [m.eigenvalue for m in self.modes if m.eigenvalue > x]
        return 0.5 * (x + min(above)) if above else x + 1.0

    @staticmethod
    def lattice(
        n: int,
        shift: float = 0.0,
        fiber_dim: int = 1,
        band_limit: float = 2.0,
        component_id: str = "c0",
        spacing: float = 1.0,
    ) -> "EigenmodeBasis":
        """Spectrum spacing*Z + shift truncated to indices |j| <= n; mode_id = lattice index."""
        if n < 1:
            raise ValueError("lattice size must be >= 1")
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        modes = [
            Mode(
                mode_id=j,
                component_id=component_id,
                eigenvalue=spacing * j + shift,
                fiber_dim=fiber_dim,
            )
            for j in range(-n, n + 1)
        ]

        def extend(factor: int) -> "EigenmodeBasis":
            return EigenmodeBasis.lattice(
                n * factor, shift, fiber_dim, band_limit, component_id, spacing
            )

        return EigenmodeBasis(modes, band_limit, extend_fn=extend)

    def doubled(self) -> "EigenmodeBasis":
        """Two-copy doubling with eigenvalues negated on the second copy.

        Copy-1 mode ids are 2*id, copy-2 ids are 2*id + 1; ``pairings`` records
        the copy1 <-> copy2 involution used by transmission conditions.
        """
        modes = []
        pairings = {}
        for m in self.modes:
            i1, i2 = 2 * m.mode_id, 2 * m.mode_id + 1
            modes.append(
                Mode(i1, m.component_id + ".copy1", m.eigenvalue, m.fiber_dim)
            )
            modes.append(
                Mode(i2, m.component_id + ".copy2", -m.eigenvalue, m.fiber_dim)
            )
            pairings[i1] = i2
            pairings[i2] = i1
        parent = self

        def extend(factor: int) -> "EigenmodeBasis":
            return parent.extended(factor).doubled()

        ext = extend if self._extend_fn is not None else None
        return EigenmodeBasis(modes, self.band_limit, pairings=pairings, extend_fn=ext)


class BoundarySection:
    """A finite Fourier series over an eigenmode basis (element of the dense test space)."""

    def __init__(self, basis: EigenmodeBasis, coeffs: Optional[dict] = None):
        self.basis = basis
        self.coeffs = {}
        if coeffs:
            for mode_id, vec in coeffs.items():
                if mode_id not in basis:
                    raise BasisMismatchError(f"mode_id {mode_id} not in basis")
                arr = np.asarray(vec, dtype=complex).reshape(-1)
                if arr.shape[0] != basis.fiber_dim(mode_id):
                    raise BasisMismatchError(
                        f"coefficient length {arr.shape[0]} != fiber_dim for mode {mode_id}"
                    )
                if np.any(arr != 0):
                    self.coeffs[mode_id] = arr.copy()

    @staticmethod
    def zero(basis: EigenmodeBasis) -> "BoundarySection":
        return BoundarySection(basis)

    @staticmethod
    def unit(basis: EigenmodeBasis, mode_id: int, fiber_index: int = 0) -> "BoundarySection":
        vec = np.zeros(basis.fiber_dim(mode_id), dtype=complex)
        vec[fiber_index] = 1.0
        return BoundarySection(basis, {mode_id: vec})

    def support(self) -> list[int]:
        return sorted(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def copy(self) -> "BoundarySection":
        return BoundarySection(self.basis, self.coeffs)

    def coeff(self, mode_id: int) -> np.ndarray:
        if mode_id in self.coeffs:
            return self.coeffs[mode_id]
        return np.zeros(self.basis.fiber_dim(mode_id), dtype=complex)

    def __add__(self, other: "BoundarySection") -> "BoundarySection":
        if not self.basis.same_modes(other.basis):
            raise BasisMismatchError("sections over different mode lattices")
        out = dict(self.coeffs)
        for mid, vec in other.coeffs.items():
            out[mid] = out.get(mid, 0) + vec
        return BoundarySection(self.basis, out)

    def __sub__(self, other: "BoundarySection") -> "BoundarySection":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "BoundarySection":
        return BoundarySection(self.basis, {m: c * v for m, v in self.coeffs.items()})

    def to_dense(self, basis: Optional[EigenmodeBasis] = None) -> np.ndarray:
        basis = basis or self.basis
        out = np.zeros(basis.total_dim, dtype=complex)
        for mid, vec in self.coeffs.items():
            off = basis.offset(mid)
            out[off : off + vec.shape[0]] = vec
        return out

    @staticmethod
    def from_dense(basis: EigenmodeBasis, vec: np.ndarray) -> "BoundarySection":
        coeffs = {}
        for m in basis.modes:
            off = basis.offset(m.mode_id)
            block = np.asarray(vec[off : off + m.fiber_dim], dtype=complex)
            if np.any(block != 0):
                coeffs[m.mode_id] = block
        return BoundarySection(basis, coeffs)

    def on_basis(self, basis: EigenmodeBasis) -> "BoundarySection":
        """Reinterpret the same coefficients over another basis with the same lattice."""
        if not self.basis.same_modes(basis):
            raise BasisMismatchError("cannot move section to a different mode lattice")
        return BoundarySection(basis, self.coeffs)


class SigmaZero:
    """The boundary symbol sigma_0, mode-block and t-independent.

    ``targets`` is a mode bijection tau: sigma_0 maps the fiber of mode j into
    the fiber of mode tau(j) with the invertible block ``blocks[j]``.  The
    identity bijection is the ordinary per-mode case; the chiral setups use the
    (+lambda <-> -lambda) pairing.  Blocks must be conformal (unitary times one
    positive scale shared across modes), which keeps adjoint boundary
    conditions in canonical mode-aligned graph form.
    """

    def __init__(
        self,
        basis: EigenmodeBasis,
        blocks: dict,
        targets: Optional[dict] = None,
        skew_unitary: bool = False,
        extend_fn: Optional[Callable[["EigenmodeBasis"], "SigmaZero"]] = None,
    ):
        self.basis = basis
        self.extend_fn = extend_fn
        self.targets = {m.mode_id: m.mode_id for m in basis.modes}
        if targets:
            self.targets.update(targets)
        if sorted(self.targets) != sorted(set(self.targets.values())):
            raise ValueError("sigma_0 targets must form a mode bijection")
        self.sources = {t: s for s, t in self.targets.items()}
        self.blocks = {}
        scale = None
        for m in basis.modes:
            if m.mode_id not in blocks:
                raise ValueError(f"missing sigma_0 block for mode {m.mode_id}")
            S = np.asarray(blocks[m.mode_id], dtype=complex)
            if S.ndim == 0:
                S = S.reshape(1, 1)
            kt = basis.fiber_dim(self.targets[m.mode_id])
            if S.shape != (kt, m.fiber_dim):
                raise ValueError(f"sigma_0 block shape mismatch at mode {m.mode_id}")
            gram = S.conj().T @ S
            c2 = float(np.real(np.trace(gram)) / m.fiber_dim)
            if c2 <= 0 or np.max(np.abs(gram - c2 * np.eye(m.fiber_dim))) > 1e-10 * max(c2, 1.0):
                raise ValueError(f"sigma_0 block at mode {m.mode_id} is not conformal")
            if scale is None:
                scale = c2
            elif abs(c2 - scale) > 1e-10 * max(scale, 1.0):
                raise ValueError("sigma_0 blocks must share one conformal scale")
            self.blocks[m.mode_id] = S
        self.scale = math.sqrt(scale)
        self.skew_unitary = bool(skew_unitary)
        if skew_unitary:
            self._check_skew_unitary()

    def _check_skew_unitary(self):
        if abs(self.scale - 1.0) > IDENTITY_TOL:
            raise ValueError("skew-unitary sigma_0 must be unitary")
        for j, S in self.blocks.items():
            t = self.targets[j]
            if self.targets[t] != j:
                raise ValueError("skew-unitary sigma_0 requires an involutive mode pairing")
            # sigma_0^* = -sigma_0 as operators: block of sigma_0^* from t to j is S^*,
            # block of -sigma_0 from t to j is -blocks[t].
            if np.max(np.abs(S.conj().T + self.blocks[t])) > IDENTITY_TOL:
                raise ValueError(f"sigma_0^* != -sigma_0 at mode {j}")

    @staticmethod
    def scalar(basis: EigenmodeBasis, value: complex) -> "SigmaZero":
        blocks = {m.mode_id: value * np.eye(m.fiber_dim) for m in basis.modes}
        skew = abs(value * np.conj(value) - 1.0) < IDENTITY_TOL and abs(value.real) < IDENTITY_TOL
        return SigmaZero(
            basis,
            blocks,
            skew_unitary=skew,
            extend_fn=lambda nb: SigmaZero.scalar(nb, value),
        )

    def tau(self, mode_id: int) -> int:
        return self.targets[mode_id]

    def tau_inv(self, mode_id: int) -> int:
        return self.sources[mode_id]

    def _map(self, phi: BoundarySection, block_of, target_of) -> BoundarySection:
        out = {}
        for mid, vec in phi.coeffs.items():
            t = target_of(mid)
            out[t] = out.get(t, 0) + block_of(mid) @ vec
        return BoundarySection(phi.basis, out)

    def apply(self, phi: BoundarySection) -> BoundarySection:
        if not self.basis.same_modes(phi.basis):
            raise BasisMismatchError("sigma_0 and section disagree on mode lattice")
        return self._map(phi, lambda j: self.blocks[j], self.tau)

    def inv_apply(self, phi: BoundarySection) -> BoundarySection:
        if not self.basis.same_modes(phi.basis):
            raise BasisMismatchError("sigma_0 and section disagree on mode lattice")
        return self._map(
            phi,
            lambda m: np.linalg.inv(self.blocks[self.tau_inv(m)]),
            self.tau_inv,
        )

    def star_apply(self, phi: BoundarySection) -> BoundarySection:
        """Apply sigma_0^* (moves mode tau(j) content to mode j with block S_j^*)."""
        return self._map(
            phi,
            lambda m: self.blocks[self.tau_inv(m)].conj().T,
            self.tau_inv,
        )

    def star_inv_apply(self, phi: BoundarySection) -> BoundarySection:
        """Apply (sigma_0^*)^{-1} = (sigma_0^{-1})^* (moves mode j to tau(j))."""
        return self._map(
            phi,
            lambda j: np.linalg.inv(self.blocks[j].conj().T),
            self.tau,
        )

    def eigen_negating(self) -> bool:
        """True if tau sends each mode to one with the negated eigenvalue."""
        return all(
            abs(self.basis.eigenvalue(self.tau(j)) + self.basis.eigenvalue(j)) <= IDENTITY_TOL
            for j in self.targets
        )

    def adjoint_basis(self) -> EigenmodeBasis:
        """The eigenmode basis of the adapted operator on the adjoint side.

        A-tilde = -(sigma_0^*)^{-1} A sigma_0^* is mode-diagonal with eigenvalue
        -lambda_{tau^{-1}(m)} on mode m.
        """
        eig = {m: -self.basis.eigenvalue(self.tau_inv(m)) for m in self.targets}
        return self.basis.with_eigenvalues(eig)

    def adjoint_sigma(self) -> "SigmaZero":
        """-sigma_0^*, the boundary symbol of the adjoint model operator."""
        basis = self.adjoint_basis()
        blocks = {m: -self.blocks[self.tau_inv(m)].conj().T for m in self.targets}
        targets = {m: self.tau_inv(m) for m in self.targets}
        return SigmaZero(basis, blocks, targets=targets, skew_unitary=self.skew_unitary)

    def on_basis(self, basis: EigenmodeBasis) -> "SigmaZero":
        """The same coefficient-level map, reinterpreted over another lattice-equal basis."""
        if not self.basis.same_modes(basis):
            raise BasisMismatchError("sigma_0 cannot move to a different mode lattice")
        return SigmaZero(
            basis,
            self.blocks,
            targets=self.targets,
            skew_unitary=self.skew_unitary,
            extend_fn=self.extend_fn,
        )

    def negated_boundary(self) -> "SigmaZero":
        """-sigma_0 over the negated basis: the boundary symbol at the far cylinder end."""
        nb = self.basis.negated()
        blocks = {j: -S for j, S in self.blocks.items()}
        parent = self

        def ext(new_nb: "EigenmodeBasis") -> "SigmaZero":
            return parent.on_lattice(new_nb.negated()).negated_boundary().on_basis(new_nb)

        extf = ext if self.extend_fn is not None else None
        return SigmaZero(
            nb, blocks, targets=self.targets, skew_unitary=self.skew_unitary, extend_fn=extf
        )

    def on_lattice(self, basis: EigenmodeBasis) -> "SigmaZero":
        """Move to a lattice-equal basis, or regenerate on an extended one."""
        if self.basis.same_modes(basis):
            return self.on_basis(basis)
        if self.extend_fn is not None:
            return self.extend_fn(basis)
        raise BasisMismatchError("sigma_0 carries no extension rule for this lattice")


def sobolev_norm(phi: BoundarySection, s: float) -> float:
    """H^s norm: (sum |a_j|^2 (1 + lambda_j^2)^s)^{1/2}, exact over the support."""
    total = 0.0
    for mid, vec in phi.coeffs.items():
        lam = phi.basis.eigenvalue(mid)
        total += float(np.sum(np.abs(vec) ** 2)) * (1.0 + lam * lam) ** s
    return math.sqrt(total)


def project(phi: BoundarySection, interval: Interval) -> BoundarySection:
    """Spectral projection Q_I: keep modes with eigenvalue in I."""
    return BoundarySection(
        phi.basis,
        {m: v for m, v in phi.coeffs.items() if interval.contains(phi.basis.eigenvalue(m))},
    )


def check_norm(phi: BoundarySection, cut: float) -> float:
    """The hybrid norm mixing H^{1/2} below the cut with H^{-1/2} above it."""
    low = project(phi, Interval(-math.inf, cut, False, True))
    high = project(phi, Interval(cut, math.inf, False, False))
    return math.sqrt(sobolev_norm(low, 0.5) ** 2 + sobolev_norm(high, -0.5) ** 2)


def hat_norm(phi: BoundarySection, cut: float) -> float:
    """The dual hybrid norm: exponents of ``check_norm`` swapped."""
    low = project(phi, Interval(-math.inf, cut, False, True))
    high = project(phi, Interval(cut, math.inf, False, False))
    return math.sqrt(sobolev_norm(low, -0.5) ** 2 + sobolev_norm(high, 0.5) ** 2)


def l2_pairing(phi: BoundarySection, psi: BoundarySection) -> complex:
    """The L^2 product sum_j a_j conj(b_j), blockwise over shared modes."""
    if not phi.basis.same_modes(psi.basis):
        raise BasisMismatchError("l2_pairing requires sections over the same mode lattice")
    total = 0.0 + 0.0j
    for mid, vec in phi.coeffs.items():
        if mid in psi.coeffs:
            total += complex(np.sum(vec * np.conj(psi.coeffs[mid])))
    return total


def beta_pairing(phi: BoundarySection, psi: BoundarySection, sigma0: SigmaZero) -> complex:
    """beta(phi, psi) = -(sigma_0 phi, psi), the trace pairing of Green's formula."""
    return -l2_pairing(sigma0.apply(phi), psi.on_basis(sigma0.basis))


def random_section(
    basis: EigenmodeBasis,
    rng: np.random.Generator,
    max_abs_eigenvalue: Optional[float] = None,
    n_modes: int = 6,
) -> BoundarySection:
    """A seeded random finite section, optionally band-restricted."""
    pool = [
        m
        for m in basis.modes
        if max_abs_eigenvalue is None or abs(m.eigenvalue) <= max_abs_eigenvalue
    ]
    if not pool:
        raise ValueError("no modes available for sampling")
    chosen = rng.choice(len(pool), size=min(n_modes, len(pool)), replace=False)
    coeffs = {}
    for idx in np.atleast_1d(chosen):
        m = pool[int(idx)]
        vec = rng.standard_normal(m.fiber_dim) + 1j * rng.standard_normal(m.fiber_dim)
        coeffs[m.mode_id] = vec
    return BoundarySection(basis, coeffs)


def norm_equivalence_probe(samples: list, cut1: float, cut2: float) -> dict:
    """Empirical equivalence constants between the hybrid norms for two cut points.

    Returns min/max of check_norm(., cut1) / check_norm(., cut2) over the
    nonzero samples.
    """
    if cut1 >= cut2:
        raise ValueError("probe requires cut1 < cut2")
    ratios = []
    for phi in samples:
        n2 = check_norm(phi, cut2)
        if n2 == 0.0:
            continue
        ratios.append(check_norm(phi, cut1) / n2)
    if not ratios:
        raise ValueError("probe needs at least one nonzero sample")
    return {
        "min_ratio": min(ratios),
        "max_ratio": max(ratios),
        "count": len(ratios),
    }
