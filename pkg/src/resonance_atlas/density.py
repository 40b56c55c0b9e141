"""Counting functions and empirical densities over resonance multisets.

Counts are exact over a certified region; densities are finite-radius
least-squares slopes of count versus radius.  The logarithmic counting
function uses the boundary curve Im k = -mu ln(|Re k| + 1); mu = +inf is
the sentinel under which the strip covers everything and the count reduces
to the plain ball count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .rootfind import ResonanceMultiset, SearchRect, count_zeros

AXIS_TOL = 1e-9
MATCH_RADIUS_CAP = 1.0


class DensityError(Exception):
    pass


def mirror_double(res: ResonanceMultiset, axis_tol: float = AXIS_TOL,
                  gap_certified: bool = False) -> ResonanceMultiset:
    """Extend a right-half-plane multiset by the k -> -conj(k) mirror.

    Valid when the underlying determinant has real coefficients in the
    appropriate sense (real strength tuples, real graph/crystal data), so
    the zero set is symmetric.  Zeros within axis_tol of the imaginary
    axis are kept once.  The region becomes the mirrored hull, which is
    only honest when the search reached the imaginary axis; a region
    starting at x0 > 0 leaves the strip |Re k| < x0 unexamined, and the
    caller must certify it empty (gap_certified) before mirroring.
    """
    x0, x1, y0, y1 = res.region.bounds
    if x0 > axis_tol and not gap_certified:
        raise DensityError(
            f"region starts at Re k = {x0} > 0; certify the strip "
            f"|Re k| < {x0} holds no zeros before mirroring")
    if x0 < -axis_tol:
        raise DensityError(
            f"region reaches Re k = {x0} < 0; mirroring would double-count")
    zeros: List[Tuple[complex, int]] = []
    for z, m in res.zeros:
        if z.real > axis_tol:
            zeros.append((z, m))
            zeros.append((complex(-z.real, z.imag), m))
        else:
            zeros.append((complex(0.0, z.imag) if abs(z.real) <= axis_tol
                          else z, m))
    hi = max(abs(x0), abs(x1))
    region = SearchRect.from_bounds(-hi, hi, y0, y1)
    zeros.sort(key=lambda t: (t[0].real, t[0].imag))
    return ResonanceMultiset(tuple(zeros), region, res.residual_bound)


def extend_region(res: ResonanceMultiset, f, extra: SearchRect
                  ) -> ResonanceMultiset:
    """Enlarge the certified region after proving the extra rectangle holds
    no zeros of f.  The new region is the bounding box of both."""
    n = count_zeros(f, extra)
    if n != 0:
        raise DensityError(
            f"extension rectangle contains {n} zeros; region not extendable")
    x0, x1, y0, y1 = res.region.bounds
    a0, a1, b0, b1 = extra.bounds
    region = SearchRect.from_bounds(min(x0, a0), max(x1, a1),
                                    min(y0, b0), max(y1, b1))
    return ResonanceMultiset(res.zeros, region, res.residual_bound)


def certified_radius(res: ResonanceMultiset) -> float:
    """Largest R with the closed lower-half disk of radius R inside the
    region.  Counting functions only see Im k <= 0 content; systems with
    genuine upper-half zeros must be handled with explicit regions."""
    x0, x1, y0, y1 = res.region.bounds
    if y1 < -AXIS_TOL:
        return 0.0
    return max(0.0, min(-x0, x1, -y0))


def _check_radius(res: ResonanceMultiset, R: float):
    if R <= 0:
        raise DensityError("radius must be positive")
    cert = certified_radius(res)
    if R > cert * (1 + 1e-12):
        raise DensityError(
            f"radius {R} exceeds certified radius {cert}")


def _check_strip_radius(res: ResonanceMultiset, mu: float, gamma: float,
                        R: float):
    """The counted set {|k| <= R, Im k >= -mu ln(|Re k|+1) - gamma} is much
    shallower than the half-disk, so it certifies at larger radii: the
    region must span |Re k| <= R, reach the real axis, and be at least
    min(R, mu ln(R+1) + gamma) deep."""
    if R <= 0:
        raise DensityError("radius must be positive")
    if mu < 0 or gamma < 0:
        raise DensityError("mu and gamma must be nonnegative")
    x0, x1, y0, y1 = res.region.bounds
    if y1 < -AXIS_TOL:
        raise DensityError("region top must reach the real axis")
    slack = 1 + 1e-12
    if R > min(x1, -x0) * slack:
        raise DensityError(
            f"radius {R} exceeds the certified span {min(x1, -x0)}")
    depth = min(R, mu * math.log(R + 1.0) + gamma)
    if depth > -y0 * slack:
        raise DensityError(
            f"counting depth {depth} exceeds the region depth {-y0}")


def strip_radius_cap(res: ResonanceMultiset, mu: float,
                     gamma: float = 0.0) -> float:
    """Largest R accepted by the strip certificate for this mu, gamma.

    R is accepted when R <= span and min(R, mu ln(R+1) + gamma) <= depth;
    the curve branch solves mu ln(R+1) + gamma <= depth for R."""
    x0, x1, y0, _ = res.region.bounds
    span = min(x1, -x0)
    depth = -y0
    if span <= 0 or depth <= 0:
        return 0.0
    if mu == 0:
        curve_cap = span if gamma <= depth else 0.0
    elif math.isinf(mu) or gamma > depth:
        curve_cap = 0.0
    else:
        curve_cap = math.expm1((depth - gamma) / mu)
    return min(span, max(depth, curve_cap))


def count_ball(res: ResonanceMultiset, R: float) -> int:
    """#{|k| <= R} with multiplicity."""
    _check_radius(res, R)
    return sum(m for z, m in res.zeros if abs(z) <= R)


def count_log(res: ResonanceMultiset, mu: float, R: float) -> int:
    """#{Im k >= -mu ln(|Re k| + 1), |k| <= R}; mu = +inf counts the ball."""
    if math.isinf(mu) and mu > 0:
        return count_ball(res, R)
    _check_strip_radius(res, mu, 0.0, R)
    return sum(m for z, m in res.zeros
               if abs(z) <= R and z.imag >= -mu * math.log(abs(z.real) + 1.0))


def count_strip(res: ResonanceMultiset, mu: float, gamma: float,
                R: float) -> int:
    """#{Im k >= -mu ln(|Re k| + 1) - gamma, |k| <= R}."""
    _check_strip_radius(res, mu, gamma, R)
    return sum(m for z, m in res.zeros
               if abs(z) <= R
               and z.imag >= -mu * math.log(abs(z.real) + 1.0) - gamma)


@dataclass(frozen=True)
class DensityFit:
    slope: float
    intercept: float
    rms_residual: float
    radii: Tuple[float, ...]
    counts: Tuple[int, ...]


def fit_density(samples: Sequence[Tuple[float, int]]) -> DensityFit:
    """Least-squares slope of count versus R.

    Needs at least 5 radii spanning a factor of 4; the count grows like
    slope*R + O(1), so the intercept absorbs the bounded part.
    """
    radii = [r for r, _ in samples]
    counts = [c for _, c in samples]
    if len(set(radii)) < 5:
        raise DensityError("need at least 5 distinct radii")
    if max(radii) < 4 * min(radii):
        raise DensityError("radii must span a factor >= 4")
    coef = np.polyfit(radii, counts, 1)
    pred = np.polyval(coef, radii)
    rms = float(np.sqrt(np.mean((np.array(counts) - pred) ** 2)))
    return DensityFit(float(coef[0]), float(coef[1]), rms,
                      tuple(radii), tuple(counts))


def radius_grid(r_min: float, r_max: float, ratio: float = 1.3
                ) -> Tuple[float, ...]:
    """Geometric grid used for finite-radius density fits."""
    if not (r_max > r_min > 0):
        raise DensityError("need 0 < r_min < r_max")
    out = [r_min]
    while out[-1] * ratio < r_max:
        out.append(out[-1] * ratio)
    out.append(r_max)
    return tuple(out)


@dataclass(frozen=True)
class DensityProfile:
    """Fitted log-strip density at each grid value of mu."""

    mus: Tuple[float, ...]
    fits: Tuple[DensityFit, ...]

    @property
    def slopes(self) -> Tuple[float, ...]:
        return tuple(f.slope for f in self.fits)


def log_density_profile(res: ResonanceMultiset, mus: Sequence[float],
                        radii: Sequence[float]) -> DensityProfile:
    fits = []
    for mu in mus:
        fits.append(fit_density([(R, count_log(res, mu, R)) for R in radii]))
    return DensityProfile(tuple(float(m) for m in mus), tuple(fits))


def jump_grid(slopes: Sequence[float]) -> Tuple[float, ...]:
    """mu sample points bracketing each candidate jump location: the
    diagram slopes widened by 20 percent plus midpoints between them."""
    vals: List[float] = []
    for mu in slopes:
        vals.extend([0.7 * mu, 0.85 * mu, 1.15 * mu, 1.3 * mu])
    ordered = sorted(set(s for s in slopes))
    for a, b in zip(ordered, ordered[1:]):
        vals.append((a + b) / 2)
    return tuple(sorted(set(v for v in vals if v > 0)))


@dataclass(frozen=True)
class Jump:
    mu: float
    height: float


def detect_jumps(profile: DensityProfile, min_height: float) -> Tuple[Jump, ...]:
    """Jumps of the fitted density along the mu grid: midpoints of adjacent
    grid values whose fitted slopes differ by at least min_height."""
    out = []
    for (m0, f0), (m1, f1) in zip(zip(profile.mus, profile.fits),
                                  zip(profile.mus[1:], profile.fits[1:])):
        h = f1.slope - f0.slope
        if h >= min_height:
            out.append(Jump((m0 + m1) / 2, h))
    return tuple(out)


@dataclass(frozen=True)
class ChainMatch:
    chain_index: int
    t: int
    predicted: complex
    found: complex
    residual: float


@dataclass(frozen=True)
class MatchReport:
    matches: Tuple[ChainMatch, ...]
    unmatched_zeros: Tuple[complex, ...]
    unmatched_predictions: Tuple[Tuple[int, int, complex], ...]

    def for_chain(self, chain_index: int) -> List[ChainMatch]:
        return sorted((m for m in self.matches
                       if m.chain_index == chain_index),
                      key=lambda m: m.t)

    def residual_sequence(self, chain_index: int) -> List[Tuple[int, float]]:
        return [(m.t, m.residual) for m in self.for_chain(chain_index)]


def _match_radius(t: int) -> float:
    # Chain predictions carry an o(1) error that decays roughly like
    # ln(t)/t; the acceptance radius shrinks accordingly so matches stay
    # unambiguous once chains separate.
    return min(MATCH_RADIUS_CAP, 2.5 / (t + 1))


def match_chains(res: ResonanceMultiset, sequences) -> MatchReport:
    """Greedy nearest-neighbor matching of located zeros to predicted chain
    points, radius shrinking in t.  Zeros of multiplicity m consume up to m
    predictions."""
    x0, x1, y0, y1 = res.region.bounds
    pad = 1.0
    preds: List[Tuple[int, int, complex]] = []
    for ci, seq in enumerate(sequences):
        for (t, k) in seq.terms:
            if x0 - pad <= k.real <= x1 + pad and y0 - pad <= k.imag <= y1 + pad:
                preds.append((ci, int(t), complex(k)))
    expanded: List[complex] = []
    for z, m in res.zeros:
        expanded.extend([z] * m)
    expanded.sort(key=lambda z: (abs(z), z.real, z.imag))
    used = [False] * len(preds)
    matches: List[ChainMatch] = []
    unmatched_zeros: List[complex] = []
    for z in expanded:
        best: Optional[int] = None
        best_d = math.inf
        for i, (ci, t, k) in enumerate(preds):
            if used[i]:
                continue
            d = abs(k - z)
            if d < best_d:
                best, best_d = i, d
        if best is not None and best_d <= _match_radius(preds[best][1]):
            used[best] = True
            ci, t, k = preds[best]
            matches.append(ChainMatch(ci, t, k, z, best_d))
        else:
            unmatched_zeros.append(z)
    unmatched_preds = tuple(p for p, u in zip(preds, used) if not u)
    return MatchReport(tuple(sorted(matches,
                                    key=lambda m: (m.chain_index, m.t))),
                       tuple(unmatched_zeros), unmatched_preds)


def density_csv(res: ResonanceMultiset, mus: Sequence[float],
                gammas: Sequence[float], radii: Sequence[float]) -> str:
    """Rows (mu, gamma, R, count) over the requested grids."""
    lines = ["mu,gamma,R,count"]
    for mu in mus:
        for g in gammas:
            for R in radii:
                c = count_strip(res, mu, g, R)
                lines.append(f"{float(mu)!r},{float(g)!r},{float(R)!r},{c}")
    return "\n".join(lines) + "\n"
