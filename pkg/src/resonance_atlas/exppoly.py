"""Exponential polynomials D(zeta) = sum_j P_j(zeta) exp(beta_j zeta).

Builds the modified characteristic determinant of a point configuration by
the permutation expansion, canonicalizes term lists with cancellation
detection, and provides evaluation (with an overflow-safe scaled form),
exact differentiation, and the numeric Gamma-matrix oracle.

Convention: the public resonance variable is k; an ExpPoly always lives in
the variable zeta = -i k.  The substitution k = i*zeta is applied exactly
once, at module boundaries (see as_k_function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npp

from .geometry import PointConfig, distance_matrix, BRUTE_FORCE_CAP

FOUR_PI = 4.0 * math.pi
# freq_tol = FREQ_TOL_FACTOR * diam when building from a configuration.
FREQ_TOL_FACTOR = 1e-9
COEFF_TOL = 1e-9
# exp() overflows IEEE doubles just above this exponent.
EXP_CAP = 700.0


@dataclass(frozen=True)
class CancellationReport:
    """Frequencies that vanished entirely and (frequency, degree) pairs whose
    coefficient was dropped as numerically cancelled."""

    cancelled: Tuple[float, ...] = ()
    dropped: Tuple[Tuple[float, int], ...] = ()


@dataclass(frozen=True)
class ExpPoly:
    """Canonical term list: strictly increasing frequencies, coefficient
    lists lowest-degree first with nonzero leading coefficient."""

    terms: Tuple[Tuple[float, Tuple[complex, ...]], ...]
    cancellation: Optional[CancellationReport] = field(
        default=None, compare=False, repr=False)

    @property
    def frequencies(self) -> Tuple[float, ...]:
        return tuple(f for f, _ in self.terms)

    def poly(self, freq: float, tol: float = 0.0) -> Tuple[complex, ...]:
        """Coefficients at the given frequency; empty if absent (the trivial
        polynomial convention)."""
        for f, c in self.terms:
            if abs(f - freq) <= tol:
                return c
        return ()

    def degree(self, freq: float, tol: float = 0.0) -> int:
        c = self.poly(freq, tol)
        return len(c) - 1 if c else -1

    def leading(self, freq: float, tol: float = 0.0) -> complex:
        c = self.poly(freq, tol)
        if not c:
            raise KeyError(f"frequency {freq} not present")
        return c[-1]

    def eval_scaled(self, zeta):
        """Value as (mantissa, exponent): D(zeta) = mantissa * exp(exponent).

        The exponent is real; it absorbs max_j beta_j*Re(zeta) so the
        mantissa never overflows for any rectangle the root finder visits.
        Vectorized over arrays of zeta.
        """
        z = np.asarray(zeta, dtype=complex)
        if not self.terms:
            return np.zeros_like(z), np.zeros(z.shape, dtype=float)
        freqs = np.array([f for f, _ in self.terms])
        exps = np.multiply.outer(z.real, freqs)  # (..., nterms)
        s = exps.max(axis=-1)
        acc = np.zeros_like(z)
        for i, (f, coeffs) in enumerate(self.terms):
            p = npp.polyval(z, np.array(coeffs))
            acc = acc + p * np.exp(f * z - s)
        return acc, s

    def eval(self, zeta):
        """Plain complex value; saturates to inf when exp(beta*zeta)
        overflows the double range (check eval_scaled for the exact value)."""
        m, s = self.eval_scaled(zeta)
        with np.errstate(over="ignore"):
            out = m * np.exp(np.minimum(s, EXP_CAP) * 1.0) * np.exp(
                np.maximum(s - EXP_CAP, 0.0))
        if np.ndim(zeta) == 0:
            return complex(out)
        return out

    __call__ = eval

    def derivative(self) -> "ExpPoly":
        """Termwise (beta, P) -> (beta, beta*P + P'), re-canonicalized."""
        raw: List[Tuple[float, np.ndarray]] = []
        for f, coeffs in self.terms:
            c = np.array(coeffs)
            raw.append((f, f * c))
            if len(c) > 1:
                raw.append((f, npp.polyder(c)))
        out, _ = canonicalize(raw, freq_tol=0.0, coeff_tol=COEFF_TOL)
        return out

    def to_json(self) -> list:
        return [
            {"frequency": f, "coeffs": [[c.real, c.imag] for c in coeffs]}
            for f, coeffs in self.terms
        ]

    @staticmethod
    def from_json(data: Sequence[dict]) -> "ExpPoly":
        terms = tuple(
            (float(t["frequency"]),
             tuple(complex(re, im) for re, im in t["coeffs"]))
            for t in data)
        return ExpPoly(terms)


def evaluate(D: ExpPoly, zeta):
    return D.eval(zeta)


def derivative(D: ExpPoly) -> ExpPoly:
    return D.derivative()


def effective_size(D: ExpPoly) -> float:
    """W = -beta_0, the frequency span of the canonical form."""
    if not D.terms:
        raise ValueError("empty exponential polynomial has no size")
    return -D.terms[0][0]


def canonicalize(
    raw_terms: Iterable[Tuple[float, Sequence[complex]]],
    freq_tol: float,
    coeff_tol: float = COEFF_TOL,
) -> Tuple[ExpPoly, CancellationReport]:
    """Merge raw (frequency, coefficients) contributions into canonical form.

    Frequencies closer than freq_tol are merged.  Within a merged group a
    final coefficient is dropped when its magnitude falls below coeff_tol
    times the largest contribution at that degree, which is how an exact
    cancellation computed in floating point is recognized.  Returns the
    canonical ExpPoly and a report of cancelled frequencies and dropped
    degrees.
    """
    items = sorted(((float(f), np.asarray(c, dtype=complex))
                    for f, c in raw_terms), key=lambda t: t[0])
    cancelled: List[float] = []
    dropped: List[Tuple[float, int]] = []
    out: List[Tuple[float, Tuple[complex, ...]]] = []
    i = 0
    while i < len(items):
        j = i + 1
        while j < len(items) and items[j][0] - items[j - 1][0] <= freq_tol:
            j += 1
        group = items[i:j]
        width = max(len(c) for _, c in group)
        total = np.zeros(width, dtype=complex)
        peak = np.zeros(width, dtype=float)
        weight = -1.0
        rep = group[0][0]
        for f, c in group:
            total[:len(c)] += c
            np.maximum(peak[:len(c)], np.abs(c), out=peak[:len(c)])
            w = float(np.abs(c).max()) if len(c) else 0.0
            if w > weight:
                weight = w
                rep = f
        keep = np.abs(total) >= coeff_tol * peak
        for d in range(width):
            if peak[d] > 0.0 and not keep[d]:
                dropped.append((rep, d))
        total[~keep] = 0.0
        nz = np.nonzero(total)[0]
        if len(nz) == 0:
            if peak.max() > 0.0:
                cancelled.append(rep)
            i = j
            continue
        out.append((rep, tuple(total[: nz[-1] + 1])))
        i = j
    report = CancellationReport(tuple(cancelled), tuple(dropped))
    return ExpPoly(tuple(out), cancellation=report), report


def _signed_permutations(n: int):
    """Heap's algorithm; each successive permutation differs by one
    transposition, so the sign alternates and never needs recomputing."""
    perm = list(range(n))
    sign = 1
    yield tuple(perm), sign
    c = [0] * n
    i = 0
    while i < n:
        if c[i] < i:
            if i % 2 == 0:
                perm[0], perm[i] = perm[i], perm[0]
            else:
                perm[c[i]], perm[i] = perm[i], perm[c[i]]
            sign = -sign
            yield tuple(perm), sign
            c[i] += 1
            i = 0
        else:
            c[i] = 0
            i += 1


def build_characteristic_exppoly(
    config: PointConfig,
    freq_tol: Optional[float] = None,
    coeff_tol: float = COEFF_TOL,
) -> ExpPoly:
    """Permutation expansion of D(zeta) = (-4 pi)^N det Gamma(i zeta).

    Each permutation sigma contributes
        sign(sigma) * K1(sigma) * exp(alpha(sigma) zeta)
                    * prod over fixed j of (-zeta - A_j),
    with A_j = 4 pi a_j, alpha(sigma) = -sum of moved-pair distances and
    K1(sigma) the product of their reciprocals.  Frequencies are accumulated
    as exactly rounded sums of the sorted distance multiset, so permutations
    that move the same distances produce bitwise-identical frequencies and
    cancel exactly before the tolerance merge.
    """
    n = config.n
    if n > BRUTE_FORCE_CAP:
        raise ValueError(f"N={n} exceeds the expansion cap {BRUTE_FORCE_CAP}")
    dist = distance_matrix(config)
    A = np.array([FOUR_PI * a for a in config.strengths])
    diam = float(dist.max()) if n > 1 else 0.0
    if freq_tol is None:
        freq_tol = FREQ_TOL_FACTOR * diam

    # Product of (-zeta - A_j) over every subset of centers, keyed by bitmask.
    subset_poly = {0: np.ones(1, dtype=complex)}
    for j in range(n):
        factor = np.array([-A[j], -1.0], dtype=complex)
        for mask in list(subset_poly):
            subset_poly[mask | (1 << j)] = np.convolve(
                subset_poly[mask], factor)

    acc: dict = {}  # (frequency, fixed-point mask) -> scalar sum
    for perm, sign in _signed_permutations(n):
        moved = [j for j in range(n) if perm[j] != j]
        if moved:
            dvals = sorted(dist[j][perm[j]] for j in moved)
            freq = -math.fsum(dvals)
            scal = sign / math.prod(dvals)
        else:
            freq = 0.0
            scal = 1.0
        mask = 0
        for j in range(n):
            if perm[j] == j:
                mask |= 1 << j
        key = (freq, mask)
        acc[key] = acc.get(key, 0.0) + scal

    raw = [(freq, scal * subset_poly[mask])
           for (freq, mask), scal in acc.items()]
    out, _ = canonicalize(raw, freq_tol=freq_tol, coeff_tol=coeff_tol)
    return out


def gamma_matrix(config: PointConfig, z: complex) -> np.ndarray:
    """Gamma_{a,Y}(z): diagonal a_j - iz/(4 pi), off-diagonal
    -exp(iz l)/(4 pi l)."""
    n = config.n
    dist = distance_matrix(config)
    G = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i == j:
                G[i, j] = config.strengths[i] - 1j * z / FOUR_PI
            else:
                lij = dist[i][j]
                G[i, j] = -np.exp(1j * z * lij) / (FOUR_PI * lij)
    return G


def det_gamma(config: PointConfig, z: complex) -> complex:
    """Numeric determinant of Gamma_{a,Y}(z) (LU with partial pivoting)."""
    return complex(np.linalg.det(gamma_matrix(config, z)))


class KPlaneFunction:
    """Adapter exposing an ExpPoly as a function of k = i*zeta.

    Used by the root finder, which works in whatever plane its callable
    lives in; f(k) = D(-i k) and f'(k) = -i D'(-i k).
    """

    def __init__(self, D: ExpPoly):
        self.D = D
        self._Dp = D.derivative()

    def eval_scaled(self, k):
        return self.D.eval_scaled(-1j * np.asarray(k, dtype=complex))

    def __call__(self, k):
        return self.D.eval(-1j * np.asarray(k, dtype=complex))

    @property
    def derivative_fn(self) -> "_KPlaneDerivative":
        return _KPlaneDerivative(self._Dp)


class _KPlaneDerivative:
    def __init__(self, Dp: ExpPoly):
        self.Dp = Dp

    def eval_scaled(self, k):
        m, s = self.Dp.eval_scaled(-1j * np.asarray(k, dtype=complex))
        return -1j * m, s

    def __call__(self, k):
        return -1j * self.Dp.eval(-1j * np.asarray(k, dtype=complex))


def as_k_function(D: ExpPoly) -> Tuple[KPlaneFunction, "_KPlaneDerivative"]:
    """(f, f') pair in the k-plane for root searches over resonances."""
    f = KPlaneFunction(D)
    return f, f.derivative_fn
