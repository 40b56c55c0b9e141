"""Distribution diagrams: the upper concave envelope of the frequency/degree
points of an exponential polynomial, the slope/multiplicity data (mu_n, r_n),
segment polynomials q_n with their roots omega, predicted asymptotic
resonance sequences, strip membership, and structure classifiers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npp

from .exppoly import ExpPoly, effective_size
from .geometry import SizeProfile

TWO_PI = 2.0 * math.pi
# Collinearity slack for hull membership, relative to the diagram extent.
HULL_EPS = 1e-12
# Clustering tolerance for repeated omega roots.
OMEGA_CLUSTER_TOL = 1e-7


class DiagramError(Exception):
    """Internal inconsistency between two routes to the same quantity."""


@dataclass(frozen=True)
class DiagramPoint:
    beta: float
    degree: int
    leading: complex


@dataclass(frozen=True)
class Segment:
    left: DiagramPoint
    right: DiagramPoint
    mu: float
    r: int
    q: Tuple[complex, ...]                     # lowest degree first
    omegas: Tuple[Tuple[complex, int], ...]    # (root, multiplicity)
    incident: Tuple[DiagramPoint, ...]


@dataclass(frozen=True)
class DistributionDiagram:
    points: Tuple[DiagramPoint, ...]
    segments: Tuple[Segment, ...]

    @property
    def M(self) -> int:
        return len(self.segments)

    @property
    def slopes(self) -> Tuple[float, ...]:
        return tuple(s.mu for s in self.segments)

    def polyline_value(self, beta: float) -> Optional[float]:
        """Height of the polygonal line at abscissa beta, None outside."""
        for s in self.segments:
            if s.left.beta - 1e-15 <= beta <= s.right.beta + 1e-15:
                t = (beta - s.left.beta) / (s.right.beta - s.left.beta)
                return s.left.degree + t * (s.right.degree - s.left.degree)
        if self.points and abs(beta - self.points[0].beta) <= 1e-15:
            return float(self.points[0].degree)
        return None


def _cross(a: DiagramPoint, b: DiagramPoint, c: DiagramPoint) -> float:
    return (b.beta - a.beta) * (c.degree - a.degree) \
        - (b.degree - a.degree) * (c.beta - a.beta)


def _cluster_roots(roots: np.ndarray, tol: float) -> Tuple[Tuple[complex, int], ...]:
    order = np.lexsort((roots.imag, roots.real))
    out: List[List[complex]] = []
    for r in roots[order]:
        if out and abs(r - out[-1][-1]) <= tol:
            out[-1].append(r)
        else:
            out.append([r])
    return tuple((complex(np.mean(c)), len(c)) for c in out)


def build_diagram(D: ExpPoly) -> DistributionDiagram:
    """Upper concave hull of the points (beta_j, deg P_j) by monotone chain.

    Hull vertices split the envelope into segments; interior points lying on
    a segment (within HULL_EPS relative slack) still contribute to its
    segment polynomial q_n but are not endpoints.
    """
    terms = D.terms if hasattr(D, "terms") else tuple(D)
    if not terms:
        raise ValueError("cannot build a diagram from an empty ExpPoly")
    pts = tuple(DiagramPoint(f, len(c) - 1, c[-1]) for f, c in terms)
    if len(pts) == 1:
        return DistributionDiagram(pts, ())

    span_b = pts[-1].beta - pts[0].beta
    span_d = max(abs(p.degree - q.degree) for p in pts for q in pts)
    eps = HULL_EPS * max(1.0, span_b * max(1, span_d))

    hull: List[DiagramPoint] = []
    for p in pts:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= -eps:
            hull.pop()
        hull.append(p)

    segments = []
    for left, right in zip(hull, hull[1:]):
        mu = (right.degree - left.degree) / (right.beta - left.beta)
        incident = tuple(
            p for p in pts
            if left.beta - eps <= p.beta <= right.beta + eps
            and abs(_cross(left, right, p)) <= eps)
        # a negative slope puts the lower degree at the right endpoint;
        # index q from whichever endpoint is lower so both orientations work
        r = abs(right.degree - left.degree)
        base = min(left.degree, right.degree)
        q = np.zeros(r + 1, dtype=complex)
        for p in incident:
            q[p.degree - base] += p.leading
        omegas: Tuple[Tuple[complex, int], ...] = ()
        if r >= 1:
            roots = np.roots(q[::-1])
            dq = npp.polyder(q)
            for _ in range(1):  # one Newton polish pass
                val = npp.polyval(roots, q)
                der = npp.polyval(roots, dq)
                ok = np.abs(der) > 1e-30
                roots[ok] = roots[ok] - val[ok] / der[ok]
            omegas = _cluster_roots(roots, OMEGA_CLUSTER_TOL)
        segments.append(Segment(left, right, mu, r, tuple(q), omegas, incident))

    for s1, s2 in zip(segments, segments[1:]):
        if not s1.mu > s2.mu:
            raise DiagramError("hull slopes not strictly decreasing")
    return DistributionDiagram(pts, tuple(segments))


def ln_upper_cut(w: complex) -> complex:
    """Principal log with the branch fixed to Arg = +pi on the negative
    real axis (ties at the cut break upward)."""
    w = complex(w)
    if w == 0:
        raise ValueError("log of zero")
    if w.imag == 0.0 and w.real < 0.0:
        return complex(math.log(abs(w.real)), math.pi)
    return cmath.log(w)


@dataclass(frozen=True)
class PredictedSequence:
    mu: float
    omega: complex
    sign: int                      # +1 or -1
    terms: Tuple[Tuple[int, complex], ...]   # (t, predicted k)

    def as_dict(self) -> Dict[int, complex]:
        return dict(self.terms)


def predicted_resonances(
    mu: float, omega: complex, sign: int, t_range: Sequence[int]
) -> PredictedSequence:
    """Asymptotic chain in the k-plane:
    k/mu = s*2*pi*t - i ln t - s*pi/2 - i ln(2*pi*mu) + i Ln(omega),
    with s the sign and Ln the +pi-branch principal log."""
    if omega == 0:
        raise ValueError("omega must be nonzero")
    if mu <= 0:
        raise ValueError("mu must be positive")
    s = 1 if sign >= 0 else -1
    base = -1j * math.log(TWO_PI * mu) + 1j * ln_upper_cut(omega) - s * math.pi / 2
    terms = []
    for t in t_range:
        if t < 1:
            raise ValueError("t must be a positive integer")
        k = mu * (s * TWO_PI * t - 1j * math.log(t) + base)
        terms.append((int(t), complex(k)))
    return PredictedSequence(mu, complex(omega), s, tuple(terms))


def chains_for_diagram(
    diag: DistributionDiagram, t_range: Sequence[int]
) -> List[PredictedSequence]:
    """Both sign families for every segment root, skipping neutral segments."""
    out = []
    for seg in diag.segments:
        if seg.mu <= 0:
            continue
        for root, mult in seg.omegas:
            for sign in (+1, -1):
                out.append(predicted_resonances(seg.mu, root, sign, t_range))
    return out


def density_jumps(diag: DistributionDiagram) -> List[Tuple[float, float]]:
    """(mu_n, jump) pairs; the jump of the logarithmic density at mu_n is
    r_n/(pi mu_n), which equals the segment width over pi."""
    out = []
    for seg in diag.segments:
        width = seg.right.beta - seg.left.beta
        jump = width / math.pi
        if seg.mu > 0:
            alt = seg.r / (math.pi * seg.mu)
            if abs(alt - jump) > 1e-9 * max(1.0, abs(jump)):
                raise DiagramError("jump height mismatch between routes")
        out.append((seg.mu, jump))
    return out


def r_narrow(diag: DistributionDiagram, sizes: SizeProfile,
             tol: float = 1e-9) -> int:
    """Number of narrow-resonance chains, computed two independent ways.

    Route 1: the multiplicity r_M of the last (smallest slope) segment.
    Route 2: the maximal m in [2, N] with Size_m = m*diam and the point
    (-Size_m, N-m) on the polygonal line.  Disagreement is a hard error.
    """
    if diag.M == 0:
        raise ValueError("diagram has no segments")
    r_from_diagram = diag.segments[-1].r

    n = sizes.n
    diam = sizes.diameter
    best = None
    for m in range(2, n + 1):
        if abs(sizes.sizes[m] - m * diam) > tol * max(1.0, m * diam):
            continue
        height = diag.polyline_value(-sizes.sizes[m])
        if height is None:
            continue
        if abs(height - (n - m)) <= 1e-6 * max(1, n):
            best = m
    if best is None:
        raise DiagramError("no qualifying m found for the narrow count")
    if best != r_from_diagram:
        raise DiagramError(
            f"narrow-resonance count mismatch: diagram gives "
            f"{r_from_diagram}, size characterization gives {best}")
    return r_from_diagram


@dataclass(frozen=True)
class StructureReport:
    A3: bool
    A5: bool
    detail: Tuple[Tuple[int, dict], ...]   # per m: presence and degrees


def check_A3_A5(D: ExpPoly, sizes: SizeProfile,
                freq_tol: Optional[float] = None) -> StructureReport:
    """Per m in {0, 2, .., N}: is -Size_m a frequency of D, and does its
    polynomial have degree exactly N - m."""
    n = sizes.n
    if freq_tol is None:
        freq_tol = 1e-9 * max(1.0, sizes.diameter)
    detail = []
    ok: Dict[int, bool] = {}
    for m in [0] + list(range(2, n + 1)):
        target = -sizes.sizes[m]
        deg = D.degree(target, tol=freq_tol)
        present = deg >= 0
        good = present and deg == n - m
        ok[m] = good
        detail.append((m, {
            "size": sizes.sizes[m],
            "frequency_present": present,
            "degree": deg if present else None,
            "degree_expected": n - m,
            "ok": good,
        }))
    a3 = all(ok[m] for m in range(3, n + 1)) if n >= 3 else True
    a5 = all(ok.values())
    return StructureReport(A3=a3, A5=a5, detail=tuple(detail))


def strip_membership(k: complex, mu: float, w: float) -> bool:
    """Whether k, mapped to zeta = -ik, lies in the logarithmic strip
    |Re(zeta + mu ln zeta)| <= w.  Only Re of the log enters, so the branch
    convention (Arg = +pi on the cut) affects nothing but zeta = 0."""
    if w < 0:
        raise ValueError("strip half-width must be nonnegative")
    zeta = -1j * complex(k)
    if zeta == 0:
        return False
    return abs(zeta.real + mu * math.log(abs(zeta))) <= w


def fit_strip_width(ks: Sequence[complex], mu: float) -> float:
    """Empirical half-width: max |Re(zeta + mu ln zeta)| over the points."""
    vals = []
    for k in ks:
        zeta = -1j * complex(k)
        if zeta == 0:
            continue
        vals.append(abs(zeta.real + mu * math.log(abs(zeta))))
    if not vals:
        raise ValueError("no usable points for a strip fit")
    return max(vals)


def diagram_to_json(diag: DistributionDiagram) -> dict:
    return {
        "points": [
            {"beta": p.beta, "degree": p.degree,
             "leading": [p.leading.real, p.leading.imag]}
            for p in diag.points
        ],
        "segments": [
            {
                "mu": s.mu,
                "r": s.r,
                "left": [s.left.beta, s.left.degree],
                "right": [s.right.beta, s.right.degree],
                "q": [[c.real, c.imag] for c in s.q],
                "omegas": [
                    {"value": [w.real, w.imag], "multiplicity": m}
                    for w, m in s.omegas
                ],
            }
            for s in diag.segments
        ],
        "M": diag.M,
    }
