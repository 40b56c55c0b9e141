"""1-D photonic crystals: piecewise-constant permittivity on a line,
transfer-matrix characteristic function, exponential-sum form with optical
length frequencies, and the commensurable lattice reduction.

State vector (f, f'/(ik n)) with n the refractive index of the current
medium; the normalized derivative keeps every matrix entry bounded for
real k regardless of layer count.  Within a layer of index n and width d:

    [f; g](x + d) = [[cos(k n d), i sin(k n d)],
                     [i sin(k n d), cos(k n d)]] [f; g](x)

Crossing an interface from index n_a to n_b multiplies g by n_a/n_b.
Radiation states: outgoing to the left is f = e^{-i k n x}, giving
(f, g) direction (1, -1); outgoing to the right gives (1, 1).  The
characteristic function is the 2x2 determinant pairing the transported
left state with the right state; its zeros are the resonances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .qgraph import (CommensurableForm, ExpSum, GraphError,
                     IncommensurableError, commensurable_reduce,
                     ORIGIN_PUNCTURE)
from .rootfind import ResonanceMultiset, SearchRect, find_zeros

LAYER_CAP = 12


class CrystalError(Exception):
    pass


@dataclass(frozen=True)
class CrystalSpec:
    """breakpoints x_0 < ... < x_N; permittivities eps_0 .. eps_{N+1},
    where eps_0 and eps_{N+1} fill the outer half-lines."""

    breakpoints: Tuple[float, ...]
    permittivities: Tuple[float, ...]

    def __init__(self, breakpoints, permittivities):
        bp = tuple(float(x) for x in breakpoints)
        eps = tuple(float(e) for e in permittivities)
        if len(bp) < 1:
            raise CrystalError("need at least one breakpoint")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise CrystalError("breakpoints must be strictly increasing")
        if len(eps) != len(bp) + 1:
            raise CrystalError(
                f"{len(bp)} breakpoints need {len(bp) + 1} permittivities, "
                f"got {len(eps)}")
        if any(e <= 0 for e in eps):
            raise CrystalError("permittivities must be positive")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "permittivities", eps)

    @property
    def n_layers(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def indices(self) -> Tuple[float, ...]:
        return tuple(math.sqrt(e) for e in self.permittivities)

    @property
    def optical_lengths(self) -> Tuple[float, ...]:
        n = self.indices
        return tuple((b2 - b1) * n[j + 1]
                     for j, (b1, b2) in enumerate(zip(self.breakpoints,
                                                      self.breakpoints[1:])))

    def to_json(self) -> dict:
        return {"breakpoints": list(self.breakpoints),
                "permittivities": list(self.permittivities)}

    @staticmethod
    def from_json(data: dict) -> "CrystalSpec":
        return CrystalSpec(data["breakpoints"], data["permittivities"])


def transfer_matrix(crystal: CrystalSpec, k) -> np.ndarray:
    """Product of interface and propagation matrices taking the state just
    left of x_0 (medium 0) to just right of x_N (medium N+1).  Vectorized:
    an array k gives a stacked (..., 2, 2) result."""
    k = np.asarray(k, dtype=complex)
    if np.any(k == 0):
        raise CrystalError("k = 0 is excluded")
    n = crystal.indices
    M = np.zeros(k.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = 1.0
    M[..., 1, 1] = 1.0
    for j in range(crystal.n_layers + 1):
        iface = np.zeros(k.shape + (2, 2), dtype=complex)
        iface[..., 0, 0] = 1.0
        iface[..., 1, 1] = n[j] / n[j + 1]
        M = iface @ M
        if j < crystal.n_layers:
            d = crystal.breakpoints[j + 1] - crystal.breakpoints[j]
            delta = k * n[j + 1] * d
            prop = np.empty(k.shape + (2, 2), dtype=complex)
            prop[..., 0, 0] = np.cos(delta)
            prop[..., 0, 1] = 1j * np.sin(delta)
            prop[..., 1, 0] = 1j * np.sin(delta)
            prop[..., 1, 1] = np.cos(delta)
            M = prop @ M
    return M


def f_oracle(crystal: CrystalSpec, k):
    """Characteristic function: transported left-outgoing state paired
    against the right-outgoing direction."""
    karr = np.asarray(k, dtype=complex)
    M = transfer_matrix(crystal, karr)
    ms = M[..., :, 0] - M[..., :, 1]
    val = ms[..., 0] - ms[..., 1]
    return val if val.shape else complex(val)


class CrystalDeterminant:
    """Vectorized oracle for the root finder."""

    def __init__(self, crystal: CrystalSpec):
        self.crystal = crystal

    def __call__(self, z):
        return f_oracle(self.crystal, z)


def _expsum_matmul(A, B):
    out = [[ExpSum(()), ExpSum(())], [ExpSum(()), ExpSum(())]]
    for i in range(2):
        for j in range(2):
            acc = ExpSum(())
            for l in range(2):
                acc = acc + A[i][l] * B[l][j]
            out[i][j] = acc
    return out


def crystal_exppoly(crystal: CrystalSpec) -> ExpSum:
    """Exponential-sum form of the characteristic function; frequencies
    are signed sums of optical lengths and the coefficients come out real.
    Identical to f_oracle (not just up to a factor), since both expand the
    same matrix product."""
    if crystal.n_layers > LAYER_CAP:
        raise CrystalError(
            f"{crystal.n_layers} layers exceed the cap {LAYER_CAP}")
    n = crystal.indices
    half = ExpSum.constant(0.5)
    M = [[ExpSum.constant(1.0), ExpSum(())],
         [ExpSum(()), ExpSum.constant(1.0)]]
    for j in range(crystal.n_layers + 1):
        iface = [[ExpSum.constant(1.0), ExpSum(())],
                 [ExpSum(()), ExpSum.constant(n[j] / n[j + 1])]]
        M = _expsum_matmul(iface, M)
        if j < crystal.n_layers:
            b = (crystal.breakpoints[j + 1] - crystal.breakpoints[j]) * n[j + 1]
            # cos d = (e^{ibk} + e^{-ibk})/2, i sin d = (e^{ibk} - e^{-ibk})/2
            cos = (ExpSum.monomial(b, (1.0,))
                   + ExpSum.monomial(-b, (1.0,))) * half
            isin = (ExpSum.monomial(b, (1.0,))
                    + ExpSum.monomial(-b, (-1.0,))) * half
            prop = [[cos, isin], [isin, cos]]
            M = _expsum_matmul(prop, M)
    left = [M[0][0] - M[0][1], M[1][0] - M[1][1]]
    return left[0] - left[1]


@dataclass(frozen=True)
class CrystalReport:
    multiset: ResonanceMultiset
    form: Optional[CommensurableForm]
    min_xi_modulus: Optional[float]
    lattice_residual: Optional[float]
    strip_depth: float

    @property
    def commensurable(self) -> bool:
        return self.form is not None


def crystal_resonances(crystal: CrystalSpec, rect: SearchRect,
                       tol: float = 1e-9) -> CrystalReport:
    """Certified zeros of the transfer-matrix characteristic function in
    the rectangle, plus the exact lattice when optical lengths are
    rationally related.  min |xi| > 1 corresponds to the absence of real
    resonances."""
    if rect.contains(0j, pad=ORIGIN_PUNCTURE):
        raise CrystalError(
            "search rectangle must exclude a neighborhood of k = 0")
    f = CrystalDeterminant(crystal)
    ms = find_zeros(f, None, rect, tol)
    form = None
    min_xi = None
    resid = None
    F = crystal_exppoly(crystal)
    if len(F.frequencies) >= 2:
        try:
            form = commensurable_reduce(F)
            min_xi = form.min_modulus
            pts = form.lattice_points(ms.region)
            resid = 0.0
            for z, _m in ms.zeros:
                if pts:
                    resid = max(resid,
                                min(abs(z - k) for _, k in pts))
                else:
                    resid = math.inf
        except IncommensurableError:
            form = None
    depth = max((-z.imag for z, _ in ms.zeros), default=0.0)
    return CrystalReport(ms, form, min_xi, resid, depth)
