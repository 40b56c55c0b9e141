"""Certified zero location in rectangles by the argument principle.

Counting is done by phase continuation along the rectangle boundary (no
contour integrals of f'/f), with adaptive refinement until every phase step
is below a cap.  Location is recursive quad subdivision driven by the
counts, with Newton (or secant) refinement and multiplicity assignment.
All evaluation goes through mantissa/exponent pairs so exponential
polynomials with huge dynamic range never overflow.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

PHASE_STEP_CAP = math.pi / 2
BOUNDARY_DEPTH_CAP = 40
MAX_BOUNDARY_POINTS = 1 << 18
SUBDIVISION_DEPTH_CAP = 40
INFLATION_STEP = 1e-6
DEFAULT_TOL = 1e-9
# Split-point perturbations tried when a zero sits on a subdivision line.
SPLIT_FRACTIONS = (0.5, 0.5 + 1e-4, 0.5 - 1e-4, 0.5 + 2.3e-4, 0.5 - 2.3e-4)


class RootfindError(Exception):
    pass


class BoundaryZeroError(RootfindError):
    """A zero sits on or too close to a counting boundary."""


class LostZeroError(RootfindError):
    """Subdivision counts stopped adding up; a zero was lost or duplicated."""


class RefineError(RootfindError):
    def __init__(self, message: str, last: complex):
        super().__init__(f"{message} (last iterate {last})")
        self.last = last


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get("RESONANCE_ATLAS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SearchRect:
    center: complex
    half_width: float
    half_height: float

    def __post_init__(self):
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("rectangle half-widths must be positive")

    @staticmethod
    def from_bounds(x0: float, x1: float, y0: float, y1: float) -> "SearchRect":
        if not (x1 > x0 and y1 > y0):
            raise ValueError("degenerate rectangle bounds")
        return SearchRect(complex((x0 + x1) / 2, (y0 + y1) / 2),
                          (x1 - x0) / 2, (y1 - y0) / 2)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        c = self.center
        return (c.real - self.half_width, c.real + self.half_width,
                c.imag - self.half_height, c.imag + self.half_height)

    @property
    def diameter(self) -> float:
        return 2.0 * math.hypot(self.half_width, self.half_height)

    def inflate(self, factor: float) -> "SearchRect":
        return SearchRect(self.center, self.half_width * factor,
                          self.half_height * factor)

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        x0, x1, y0, y1 = self.bounds
        return (x0 - pad <= z.real <= x1 + pad
                and y0 - pad <= z.imag <= y1 + pad)

    def corners(self) -> np.ndarray:
        x0, x1, y0, y1 = self.bounds
        return np.array([complex(x0, y0), complex(x1, y0),
                         complex(x1, y1), complex(x0, y1)])

    def split(self, fx: float, fy: float) -> Tuple["SearchRect", ...]:
        """Four subrectangles with the split point at the given fractions."""
        x0, x1, y0, y1 = self.bounds
        xm = x0 + fx * (x1 - x0)
        ym = y0 + fy * (y1 - y0)
        return (SearchRect.from_bounds(x0, xm, y0, ym),
                SearchRect.from_bounds(xm, x1, y0, ym),
                SearchRect.from_bounds(x0, xm, ym, y1),
                SearchRect.from_bounds(xm, x1, ym, y1))


@dataclass(frozen=True)
class ResonanceMultiset:
    """Zeros with multiplicity inside a certified region.  residual_bound is
    the largest scale-relative |f| over the reported zeros."""

    zeros: Tuple[Tuple[complex, int], ...]
    region: SearchRect
    residual_bound: float

    @property
    def total(self) -> int:
        return sum(m for _, m in self.zeros)

    def locations(self) -> List[complex]:
        return [z for z, _ in self.zeros]

    def to_csv(self) -> str:
        lines = ["re,im,multiplicity"]
        for z, m in sorted(self.zeros, key=lambda t: (t[0].real, t[0].imag)):
            lines.append(f"{z.real!r},{z.imag!r},{m}")
        return "\n".join(lines) + "\n"


class _Fn:
    """Uniform access to a function handle: either a plain vectorized
    callable or an object with eval_scaled returning (mantissa, exponent)."""

    def __init__(self, f):
        self.raw = f
        self.scaled_form = hasattr(f, "eval_scaled")

    def scaled(self, z):
        z = np.asarray(z, dtype=complex)
        if self.scaled_form:
            m, s = self.raw.eval_scaled(z)
            return np.asarray(m, dtype=complex), np.broadcast_to(
                np.asarray(s, dtype=float), np.shape(m)).copy()
        v = np.asarray(self.raw(z), dtype=complex)
        return v, np.zeros(v.shape, dtype=float)

    def logabs(self, z):
        m, s = self.scaled(z)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(m)) + s

    def mantissa(self, z):
        m, _ = self.scaled(z)
        return m


def _wrap_phase(d: np.ndarray) -> np.ndarray:
    return (d + math.pi) % (2.0 * math.pi) - math.pi


def _boundary_points(rect: SearchRect, ts: np.ndarray) -> np.ndarray:
    corners = rect.corners()
    edge = np.minimum((ts * 4).astype(int), 3)
    local = ts * 4 - edge
    a = corners[edge]
    b = corners[(edge + 1) % 4]
    return a * (1 - local) + b * local


# An interval is trusted only if |f| changes by at most this fraction
# across it.  A wrapped phase step can hide a full turn of 2*pi when the
# boundary passes close to a zero between two samples; bounding the
# relative change of f forbids that, because hiding a turn forces |f|
# through a dip the endpoints would have to ignore.
RELATIVE_CHANGE_CAP = 0.25

# A single dominating exponential rotates the phase at a steady rate
# while |f| stays level, so an equally spaced start can alias a whole
# number of turns in every interval at once and pass both per-interval
# tests above.  No sample-based test can see this; only the local
# derivative bounds how many turns an interval can hide.  A short
# complex step estimates |f'/f| at each starting sample (its modulus is
# direction independent for analytic f), and the start grid is spaced
# so each interval holds at most RATE_TARGET radians of estimated
# change before refinement begins.
PROBE_STEP_FRACTION = 1e-6
RATE_TARGET = 0.2
INTERVAL_POINT_CAP = 1 << 11


def _rate_densified(fn: _Fn, rect: SearchRect, ts, zs, m, s):
    perimeter = 8.0 * (rect.half_width + rect.half_height)
    h = PROBE_STEP_FRACTION * perimeter
    mh, sh = fn.scaled(zs + h)
    if np.any(mh == 0) or not np.all(np.isfinite(mh)):
        raise BoundaryZeroError("zero or non-finite value on the boundary")
    with np.errstate(divide="ignore"):
        dmag = np.log(np.abs(mh)) - np.log(np.abs(m)) + (sh - s)
    dphi = _wrap_phase(np.angle(mh) - np.angle(m))
    rate = np.hypot(dmag, dphi) / h
    span = np.abs(np.roll(zs, -1) - zs)
    need = span * np.maximum(rate, np.roll(rate, -1)) / RATE_TARGET
    counts = np.clip(np.ceil(need).astype(int) - 1, 0, INTERVAL_POINT_CAP)
    total = int(counts.sum())
    if total == 0:
        return ts, zs, m, s
    if ts.size + total > MAX_BOUNDARY_POINTS:
        raise BoundaryZeroError(
            "boundary sampling budget exceeded; a zero is too close to "
            "the contour")
    gaps = (np.roll(ts, -1) - ts) % 1.0
    gaps[gaps == 0.0] = 1.0
    fresh = []
    for i in np.nonzero(counts)[0]:
        step = gaps[i] / (counts[i] + 1)
        fresh.append((ts[i] + step * np.arange(1, counts[i] + 1)) % 1.0)
    tn = np.concatenate(fresh)
    zn = _boundary_points(rect, tn)
    mn, sn = fn.scaled(zn)
    if np.any(mn == 0) or not np.all(np.isfinite(mn)):
        raise BoundaryZeroError("zero or non-finite value on the boundary")
    ts = np.concatenate([ts, tn])
    zs = np.concatenate([zs, zn])
    m = np.concatenate([m, mn])
    s = np.concatenate([s, sn])
    order = np.argsort(ts, kind="stable")
    return ts[order], zs[order], m[order], s[order]


def _winding(fn: _Fn, rect: SearchRect, step_cap: float) -> int:
    ts = np.linspace(0.0, 1.0, 64, endpoint=False)
    zs = _boundary_points(rect, ts)
    m, s = fn.scaled(zs)
    if np.any(m == 0) or not np.all(np.isfinite(m)):
        raise BoundaryZeroError("zero or non-finite value on the boundary")
    ts, zs, m, s = _rate_densified(fn, rect, ts, zs, m, s)
    chord_floor = 1e-13 * 8.0 * (rect.half_width + rect.half_height)
    prev_n: Optional[int] = None
    for _depth in range(BOUNDARY_DEPTH_CAP):
        if ts.size > MAX_BOUNDARY_POINTS:
            raise BoundaryZeroError(
                "boundary sampling budget exceeded; a zero is too close to "
                "the contour")
        m2, s2, z2 = np.roll(m, -1), np.roll(s, -1), np.roll(zs, -1)
        diffs = _wrap_phase(np.angle(m2) - np.angle(m))
        sc = np.maximum(s, s2)
        with np.errstate(over="ignore"):
            delta = np.abs(m2 * np.exp(s2 - sc) - m * np.exp(s - sc))
            fmin = np.minimum(np.abs(m) * np.exp(s - sc),
                              np.abs(m2) * np.exp(s2 - sc))
        bad = (np.abs(diffs) >= step_cap) | (
            (delta > RELATIVE_CHANGE_CAP * fmin)
            & (np.abs(z2 - zs) > chord_floor))
        gaps = (np.roll(ts, -1) - ts) % 1.0
        gaps[gaps == 0.0] = 1.0
        if not bad.any():
            w = diffs.sum() / (2.0 * math.pi)
            n = round(w)
            if abs(w - n) > 0.1:
                raise RootfindError(
                    f"winding number {w} not close to an integer")
            # One extra full bisection round must reproduce the count.
            if prev_n is not None and n == prev_n:
                return int(n)
            prev_n = int(n)
            mids = (ts + gaps / 2.0) % 1.0
        else:
            prev_n = None
            mids = (ts + gaps / 2.0)[bad] % 1.0
        zm = _boundary_points(rect, mids)
        mm, sm = fn.scaled(zm)
        if np.any(mm == 0) or not np.all(np.isfinite(mm)):
            raise BoundaryZeroError("zero or non-finite value on the boundary")
        ts = np.concatenate([ts, mids])
        zs = np.concatenate([zs, zm])
        m = np.concatenate([m, mm])
        s = np.concatenate([s, sm])
        order = np.argsort(ts, kind="stable")
        ts, zs, m, s = ts[order], zs[order], m[order], s[order]
    raise BoundaryZeroError(
        f"phase continuation did not settle after depth {BOUNDARY_DEPTH_CAP}")


def _count(fn: _Fn, rect: SearchRect,
           step_cap: float = PHASE_STEP_CAP) -> Tuple[int, SearchRect]:
    """Winding count with deterministic inflation retries for boundaries
    that hit a zero.  Returns the count and the rectangle actually used."""
    last: Optional[BoundaryZeroError] = None
    for j in range(6):
        r = rect if j == 0 else rect.inflate(1.0 + INFLATION_STEP * j)
        try:
            return _winding(fn, r, step_cap), r
        except BoundaryZeroError as e:
            last = e
    raise BoundaryZeroError(
        f"boundary kept hitting a zero after 5 inflations: {last}")


def count_zeros(f, rect: SearchRect,
                boundary_step_cap: float = PHASE_STEP_CAP) -> int:
    """Number of zeros (with multiplicity) of f inside the rectangle."""
    n, _ = _count(_Fn(f), rect, boundary_step_cap)
    return n


def _log_tol_target(fpn: Optional[_Fn], fn: _Fn, z: complex, tol: float,
                    secant_slope: Optional[float]) -> float:
    """log of tol*max(1, |f'(z)|*|z|), the convergence target."""
    if fpn is not None:
        lfp = float(fpn.logabs(z))
    elif secant_slope is not None and secant_slope > 0:
        lfp = math.log(secant_slope)
    else:
        lfp = 0.0
    mag = lfp + math.log(max(abs(z), 1e-300))
    return math.log(tol) + max(0.0, mag)


def refine(f, fprime, seed: complex, tol: float = DEFAULT_TOL,
           max_iter: int = 100, multiplicity: int = 1) -> complex:
    """Damped Newton (secant when fprime is None) from the seed.

    Stops when |f(z)| <= tol * max(1, |f'(z)| |z|).  For a known root
    multiplicity m the step is multiplied by m, restoring quadratic
    convergence at multiple zeros.
    """
    fn = _Fn(f)
    fpn = _Fn(fprime) if fprime is not None else None
    z = complex(seed)
    fm, fs = fn.scaled(z)
    fm, fs = complex(fm), float(fs)
    if fm == 0:
        return z
    logf = math.log(abs(fm)) + fs
    zp: Optional[complex] = None
    fmp, fsp = 0j, 0.0
    stall = 0
    for _ in range(max_iter):
        secant_slope = None
        if fpn is not None:
            dm, ds = fpn.scaled(z)
            dm, ds = complex(dm), float(ds)
            if dm == 0:
                raise RefineError("derivative vanished", z)
            step = (fm / dm) * math.exp(min(fs - ds, 700.0))
        else:
            if zp is None:
                zp = z + 1e-7 * (abs(z) + 1.0)
                fmp_, fsp_ = fn.scaled(zp)
                fmp, fsp = complex(fmp_), float(fsp_)
            sc = max(fs, fsp)
            den = fm * math.exp(fs - sc) - fmp * math.exp(fsp - sc)
            if den == 0:
                raise RefineError("secant denominator vanished", z)
            step = fm * math.exp(fs - sc) * (z - zp) / den
            if z != zp:
                secant_slope = abs(den) * math.exp(sc) / abs(z - zp)
        step *= multiplicity
        lam = 1.0
        improved = False
        while lam >= 1.0 / 1024:
            zn = z - lam * step
            gm, gs = fn.scaled(zn)
            gm, gs = complex(gm), float(gs)
            logg = math.log(abs(gm)) + gs if gm != 0 else -math.inf
            if logg < logf:
                improved = True
                break
            lam /= 2.0
        if not improved:
            stall += 1
            if stall >= 2:
                raise RefineError("no residual decrease", z)
            zn, gm, gs = z - step / 1024, fm, fs
            logg = logf
        else:
            stall = 0
        zp, fmp, fsp = z, fm, fs
        z, fm, fs, logf = zn, gm, gs, logg
        if fm == 0:
            return z
        if logf <= _log_tol_target(fpn, fn, z, tol, secant_slope):
            return z
    raise RefineError(f"no convergence in {max_iter} iterations", z)


def _try_refine(fn_raw, fp_raw, seed, tol, multiplicity=1):
    try:
        return refine(fn_raw, fp_raw, seed, tol, multiplicity=multiplicity)
    except RefineError:
        return None


def _polish_cluster(f_raw, fp_raw, seed, n):
    """Push a multiple-zero estimate to the double-precision noise floor.

    A residual target below the evaluation noise is unreachable, so Newton
    stalls there; the last iterate is the best available location.
    """
    try:
        return refine(f_raw, fp_raw, seed, 1e-15, max_iter=40, multiplicity=n)
    except RefineError as e:
        return e.last


def _locate(fn: _Fn, f_raw, fp_raw, rect: SearchRect, n: int, tol: float,
            scale0: float, depth: int, executor) -> List[Tuple[complex, int]]:
    if n == 0:
        return []
    if n == 1:
        z = _try_refine(f_raw, fp_raw, rect.center, tol)
        if z is not None and rect.contains(z, pad=1e-12 * scale0):
            return [(z, 1)]
    elif rect.diameter <= 0.05 * scale0:
        # A persistent cluster is usually one multiple zero; modified
        # Newton plus a recount certifies it without deep subdivision.
        # The recount box grows on a ladder because an m-fold zero is only
        # determined to about the m-th root of the evaluation noise.
        z = _try_refine(f_raw, fp_raw, rect.center, tol, multiplicity=n)
        if z is not None:
            z = _polish_cluster(f_raw, fp_raw, z, n)
        if z is not None and rect.contains(z, pad=1e-12 * scale0):
            rho = max(8 * tol, 1e-12 * scale0)
            while rho <= 0.25 * rect.diameter:
                box = SearchRect(z, rho, rho)
                try:
                    got, _ = _count(fn, box)
                except BoundaryZeroError:
                    got = -1
                if got == n:
                    return [(z, n)]
                if got > 0:
                    break  # partially resolved: subdivision can separate it
                rho *= 100.0
    if rect.diameter < tol:
        return [(rect.center, n)]
    if depth >= SUBDIVISION_DEPTH_CAP:
        raise LostZeroError(f"subdivision depth cap at {rect}")
    for fr in SPLIT_FRACTIONS:
        quads = rect.split(fr, fr)
        try:
            if executor is not None and depth == 0:
                counted = list(executor.map(lambda q: _count(fn, q), quads))
            else:
                counted = [_count(fn, q) for q in quads]
        except BoundaryZeroError:
            continue
        if sum(c for c, _ in counted) != n:
            continue
        out: List[Tuple[complex, int]] = []
        for (cnt, used), _q in zip(counted, quads):
            out.extend(_locate(fn, f_raw, fp_raw, used, cnt, tol,
                               scale0, depth + 1, executor))
        return out
    raise LostZeroError(
        f"could not partition {n} zeros of {rect} cleanly")


def _cluster(zeros: List[Tuple[complex, int]],
             tol: float) -> List[Tuple[complex, int]]:
    zeros = sorted(zeros, key=lambda t: (t[0].real, t[0].imag))
    out: List[List] = []
    for z, m in zeros:
        if out and abs(z - out[-1][0]) <= tol:
            prev_z, prev_m = out[-1]
            out[-1] = [(prev_z * prev_m + z * m) / (prev_m + m), prev_m + m]
        else:
            out.append([z, m])
    return [(complex(z), int(m)) for z, m in out]


def find_zeros(f, fprime, rect: SearchRect,
               tol: float = DEFAULT_TOL) -> ResonanceMultiset:
    """All zeros of f in the rectangle, with multiplicities, certified by
    argument-principle counts at every subdivision level."""
    fn = _Fn(f)
    total, used = _count(fn, rect)
    threads = _n_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            found = _locate(fn, f, fprime, used, total, tol,
                            used.diameter, 0, ex)
    else:
        found = _locate(fn, f, fprime, used, total, tol,
                        used.diameter, 0, None)
    found = _cluster(found, tol)
    if sum(m for _, m in found) != total:
        raise LostZeroError(
            f"located {sum(m for _, m in found)} of {total} zeros")
    if found:
        residual = float(np.max(np.abs(fn.mantissa(
            np.array([z for z, _ in found])))))
    else:
        residual = 0.0
    return ResonanceMultiset(tuple(found), used, residual)
