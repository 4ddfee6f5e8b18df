"""Exact calculus of piecewise exponential-polynomial time profiles.

A profile is a finite sum of terms c * t^p * exp(mu * t) on each piece of a
partition of [t0, t1].  Sums, products, derivatives, definite integrals, and
first-order solves f' + lam*f = g all stay inside this class, so every
integral used by the cylinder solver is closed-form.  Resonant right-hand
sides (mu = -lam) are handled by the polynomial degree bump.
"""

from __future__ import annotations

import bisect
import cmath
import math
from typing import Iterable, Sequence

import numpy as np

RES_TOL = 1e-12  # |mu + lam| below this counts as resonant


def _merge_terms(terms: Iterable[tuple]) -> list[tuple]:
    acc: dict = {}
    for c, p, mu in terms:
        key = (int(p), complex(mu))
        acc[key] = acc.get(key, 0j) + complex(c)
    return [(c, p, mu) for (p, mu), c in sorted(acc.items(), key=lambda kv: (kv[0][0], kv[0][1].real, kv[0][1].imag)) if c != 0]


def _eval_terms(terms: Sequence[tuple], t: float) -> complex:
    return sum(c * t**p * cmath.exp(mu * t) for c, p, mu in terms)


def _int_power_exp(j: int, mu: complex, h: float) -> complex:
    """The integral of s^j * exp(mu s) over [0, h], numerically stable in mu.

    A power series in mu*h for small arguments avoids the catastrophic
    cancellation of the 1/mu recursion near mu = 0.
    """
    z = mu * h
    if abs(z) < 0.5:
        total = 0j
        term = 1.0 + 0j  # z^n / n!
        for n in range(40):
            total += term / (j + n + 1)
            term *= z / (n + 1)
            if abs(term) < 1e-20 * max(1.0, abs(total)):
                break
        return h ** (j + 1) * total
    e = cmath.exp(z)
    acc = (e - 1.0) / mu
    for k in range(1, j + 1):
        acc = (h**k * e - k * acc) / mu
    return acc


def _definite_integral(c: complex, p: int, mu: complex, a: float, b: float) -> complex:
    """The integral of c * t^p * exp(mu t) over [a, b]."""
    if mu == 0:
        return c * (b ** (p + 1) - a ** (p + 1)) / (p + 1)
    h = b - a
    acc = 0j
    for j in range(p + 1):
        acc += math.comb(p, j) * a ** (p - j) * _int_power_exp(j, mu, h)
    return c * cmath.exp(mu * a) * acc


class Profile:
    """Piecewise exponential-polynomial function on [breaks[0], breaks[-1]]."""

    def __init__(self, breaks: Sequence[float], pieces: Sequence[Sequence[tuple]]):
        breaks = [float(b) for b in breaks]
        if len(breaks) < 2 or any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ValueError("breaks must be strictly increasing with at least two entries")
        if len(pieces) != len(breaks) - 1:
            raise ValueError("need exactly one piece per interval")
        self.breaks = tuple(breaks)
        self.pieces = [_merge_terms(p) for p in pieces]

    # -- constructors ------------------------------------------------------
    @staticmethod
    def from_terms(terms: Sequence[tuple], t0: float, t1: float) -> "Profile":
        return Profile([t0, t1], [list(terms)])

    @staticmethod
    def constant(c: complex, t0: float, t1: float) -> "Profile":
        return Profile.from_terms([(c, 0, 0.0)], t0, t1)

    @staticmethod
    def zero(t0: float, t1: float) -> "Profile":
        return Profile([t0, t1], [[]])

    @staticmethod
    def exponential(c: complex, mu: complex, t0: float, t1: float) -> "Profile":
        return Profile.from_terms([(c, 0, mu)], t0, t1)

    @property
    def t0(self) -> float:
        return self.breaks[0]

    @property
    def t1(self) -> float:
        return self.breaks[-1]

    def is_zero(self) -> bool:
        return all(not p for p in self.pieces)

    # -- pointwise ---------------------------------------------------------
    def _piece_index(self, t: float) -> int:
        i = bisect.bisect_right(self.breaks, t) - 1
        return min(max(i, 0), len(self.pieces) - 1)

    def __call__(self, t: float) -> complex:
        return _eval_terms(self.pieces[self._piece_index(t)], t)

    # -- algebra -----------------------------------------------------------
    def _aligned(self, other: "Profile") -> tuple:
        if (self.t0, self.t1) != (other.t0, other.t1):
            raise ValueError("profiles live on different intervals")
        breaks = sorted(set(self.breaks) | set(other.breaks))
        mids = [(a + b) / 2 for a, b in zip(breaks, breaks[1:])]
        mine = [self.pieces[self._piece_index(m)] for m in mids]
        theirs = [other.pieces[other._piece_index(m)] for m in mids]
        return breaks, mine, theirs

    def __add__(self, other: "Profile") -> "Profile":
        breaks, mine, theirs = self._aligned(other)
        return Profile(breaks, [list(a) + list(b) for a, b in zip(mine, theirs)])

    def __sub__(self, other: "Profile") -> "Profile":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "Profile":
        return Profile(self.breaks, [[(c * a, p, mu) for a, p, mu in terms] for terms in self.pieces])

    def conj(self) -> "Profile":
        return Profile(
            self.breaks,
            [[(np.conj(a), p, np.conj(mu)) for a, p, mu in terms] for terms in self.pieces],
        )

    def multiply(self, other: "Profile") -> "Profile":
        breaks, mine, theirs = self._aligned(other)
        out = []
        for a_terms, b_terms in zip(mine, theirs):
            prod = [
                (ca * cb, pa + pb, mua + mub)
                for ca, pa, mua in a_terms
                for cb, pb, mub in b_terms
            ]
            out.append(prod)
        return Profile(breaks, out)

    def derivative(self) -> "Profile":
        out = []
        for terms in self.pieces:
            d = []
            for c, p, mu in terms:
                if p > 0:
                    d.append((c * p, p - 1, mu))
                if mu != 0:
                    d.append((c * mu, p, mu))
            out.append(d)
        return Profile(self.breaks, out)

    # -- integration -------------------------------------------------------
    def integral(self) -> complex:
        """Exact definite integral over the whole interval."""
        total = 0j
        for (a, b), terms in zip(zip(self.breaks, self.breaks[1:]), self.pieces):
            for c, p, mu in terms:
                total += _definite_integral(c, p, mu, a, b)
        return total

    def l2_inner(self, other: "Profile") -> complex:
        """Integral of self * conj(other), exact."""
        return self.multiply(other.conj()).integral()

    def l2_norm_sq(self) -> float:
        return float(np.real(self.l2_inner(self)))

    def grid_values(self, n: int = 64) -> np.ndarray:
        ts = np.linspace(self.t0, self.t1, n)
        return np.array([self(t) for t in ts])

    def sup_on_grid(self, n: int = 64) -> float:
        return float(np.max(np.abs(self.grid_values(n)))) if n else 0.0


def _particular_terms(lam: float, terms: Sequence[tuple]) -> list[tuple]:
    """Terms of one particular solution of f' + lam f = sum of given terms."""
    out = []
    for c, p, mu in terms:
        alpha = mu + lam
        if abs(alpha) < RES_TOL:
            # resonance: integrate the polynomial factor (degree bump)
            out.append((c / (p + 1), p + 1, mu))
            continue
        coeffs = [0j] * (p + 1)
        coeffs[p] = c / alpha
        for i in range(p - 1, -1, -1):
            coeffs[i] = -(i + 1) * coeffs[i + 1] / alpha
        out.extend((a, i, mu) for i, a in enumerate(coeffs) if a != 0)
    return out


def first_order_solve(lam: float, rhs: Profile) -> Profile:
    """The solution f of f' + lam f = rhs with f(t0) = 0 for lam >= 0, f(t1) = 0 for lam < 0.

    This is the integral operator (R_lam g)(t) = int_{t0}^t g(s) e^{lam(s-t)} ds
    for lam >= 0 and its backward counterpart for lam < 0, evaluated in closed
    form piece by piece with continuity matching at the breakpoints.
    """
    particulars = [_particular_terms(lam, terms) for terms in rhs.pieces]
    n = len(particulars)
    consts = [0j] * n
    if lam >= 0:
        value = 0j  # f(t0) = 0
        for i in range(n):
            a = rhs.breaks[i]
            consts[i] = (value - _eval_terms(particulars[i], a)) * cmath.exp(lam * a)
            b = rhs.breaks[i + 1]
            value = _eval_terms(particulars[i], b) + consts[i] * cmath.exp(-lam * b)
    else:
        value = 0j  # f(t1) = 0
        for i in range(n - 1, -1, -1):
            b = rhs.breaks[i + 1]
            consts[i] = (value - _eval_terms(particulars[i], b)) * cmath.exp(lam * b)
            a = rhs.breaks[i]
            value = _eval_terms(particulars[i], a) + consts[i] * cmath.exp(-lam * a)
    pieces = []
    for i in range(n):
        terms = list(particulars[i])
        if consts[i] != 0:
            terms.append((consts[i], 0, -lam))
        pieces.append(terms)
    return Profile(rhs.breaks, pieces)
