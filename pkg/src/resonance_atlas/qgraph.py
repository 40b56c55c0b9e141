"""Noncompact quantum graphs: resonance matrix assembly, symbolic
determinants over an exponential-sum ring, commensurable reduction to a
polynomial in e^{i beta k} with exact resonance lattices, and structural
classification of the determinant through the distribution diagram.

Edge ansatz on an internal edge of length rho, parametrized by x in
[0, rho] with the u-endpoint at x = 0:

    f(x) = A e^{ikx} + B e^{ik(rho - x)}

Both exponentials stay bounded in the closed lower half-plane, which keeps
the assembled matrix well conditioned where resonances live.  A lead is
parametrized outward from its anchor, g(x) = C e^{ikx} (radiation: no
incoming exponential).  Values and outgoing derivatives divided by ik:

    at x=0:    value A + B u,   flux A - B u        (u = e^{ik rho})
    at x=rho:  value A u + B,   flux B - A u
    lead:      value C,         flux C

Kirchhoff rows (continuity plus vanishing flux sum) are divided by ik, so
their exponential-sum entries carry constant coefficients.  KSH rows
(U - I) Psi + i (U + I) Psi' = 0 are left undivided; with Psi' = ik * flux
they become (U - I) Psi - k (U + I) flux and carry degree-1 polynomial
coefficients in k.

Vertex channel ordering (fixes the meaning of each U row/column): internal
edges in listed order contribute a channel per endpoint lying at the
vertex, u-endpoint slot before v-endpoint slot for a loop; then leads
anchored at the vertex in listed order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .diagram import (DistributionDiagram, build_diagram, ln_upper_cut,
                      OMEGA_CLUSTER_TOL)
from .exppoly import ExpPoly
from .rootfind import ResonanceMultiset, SearchRect, find_zeros

UNITARY_TOL = 1e-10
FREQ_MERGE_TOL = 1e-9
COEFF_DROP_TOL = 1e-11
DET_DIM_CAP = 12
DENOMINATOR_CAP = 10 ** 6
RATIONAL_TOL = 1e-9
# Any float ratio is rational with a large enough denominator; what makes a
# lattice usable is coarseness.  Reductions needing a finer polynomial than
# this are reported as incommensurable.
POLY_DEGREE_CAP = 1000
SPURIOUS_XI_TOL = 1e-6
ORIGIN_PUNCTURE = 1e-6


class GraphError(Exception):
    pass


class IncommensurableError(GraphError):
    """Frequency ratios fail rational reconstruction under the denominator
    cap; the exact-lattice reduction does not apply."""


class PolynomialCoefficientError(GraphError):
    """The exponential sum carries z-dependent coefficients; the
    constant-coefficient lattice reduction does not apply."""


class KSHStructureError(GraphError):
    """A negative-slope (advanced) segment appeared for a unitary-coupling
    graph; zeros would accumulate in the upper half-plane, which unitary
    couplings forbid, so the assembly is inconsistent."""


def _trim(coeffs: Sequence[complex]) -> Tuple[complex, ...]:
    out = list(coeffs)
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class ExpSum:
    """Canonical finite sum  Sigma_l C_l(z) e^{i b_l z}  with strictly
    increasing real frequencies b_l and polynomial coefficients C_l stored
    lowest-degree-first."""

    terms: Tuple[Tuple[float, Tuple[complex, ...]], ...]

    @staticmethod
    def from_terms(raw: Sequence[Tuple[float, Sequence[complex]]],
                   freq_tol: float = FREQ_MERGE_TOL) -> "ExpSum":
        items = sorted((float(b), _trim(c)) for b, c in raw)
        items = [(b, c) for b, c in items if c]
        if not items:
            return ExpSum(())
        peak = max(max(abs(x) for x in c) for _, c in items)
        merged: List[Tuple[float, List[complex]]] = []
        for b, c in items:
            if merged and b - merged[-1][0] <= freq_tol:
                acc = merged[-1][1]
                for i, x in enumerate(c):
                    if i < len(acc):
                        acc[i] += x
                    else:
                        acc.append(x)
            else:
                merged.append((b, list(c)))
        out = []
        for b, c in merged:
            kept = _trim(x if abs(x) > COEFF_DROP_TOL * peak else 0
                         for x in c)
            if kept:
                out.append((b, kept))
        return ExpSum(tuple(out))

    @staticmethod
    def constant(value: complex) -> "ExpSum":
        return ExpSum.from_terms([(0.0, (complex(value),))])

    @staticmethod
    def monomial(b: float, coeffs: Sequence[complex]) -> "ExpSum":
        return ExpSum.from_terms([(b, tuple(complex(x) for x in coeffs))])

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def frequencies(self) -> Tuple[float, ...]:
        return tuple(b for b, _ in self.terms)

    @property
    def constant_coefficients(self) -> bool:
        return all(len(c) == 1 for _, c in self.terms)

    def __add__(self, other: "ExpSum") -> "ExpSum":
        return ExpSum.from_terms(list(self.terms) + list(other.terms))

    def __neg__(self) -> "ExpSum":
        return ExpSum(tuple((b, tuple(-x for x in c)) for b, c in self.terms))

    def __sub__(self, other: "ExpSum") -> "ExpSum":
        return self + (-other)

    def __mul__(self, other: "ExpSum") -> "ExpSum":
        raw = []
        for b1, c1 in self.terms:
            for b2, c2 in other.terms:
                raw.append((b1 + b2, tuple(np.convolve(c1, c2))))
        return ExpSum.from_terms(raw)

    def scale(self, s: complex) -> "ExpSum":
        if s == 0:
            return ExpSum(())
        return ExpSum(tuple((b, tuple(s * x for x in c))
                            for b, c in self.terms))

    def eval(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros(z.shape, dtype=complex)
        for b, c in self.terms:
            acc = acc + np.polyval(list(c)[::-1], z) * np.exp(1j * b * z)
        return acc if acc.shape else complex(acc)

    def __call__(self, z):
        return self.eval(z)

    def to_exppoly(self) -> ExpPoly:
        """Zeta-plane form D(zeta) = e^{b_0 zeta} F(i zeta), where b_0 is
        the smallest frequency.  Frequencies become b_0 - b_l <= 0, so the
        physical decaying chains show up as positive diagram slopes, the
        same orientation as the point-interaction determinants."""
        if self.is_zero:
            raise GraphError("zero exponential sum has no canonical form")
        b0 = self.terms[0][0]
        raw = []
        for b, c in self.terms:
            raw.append((b0 - b,
                        tuple(x * (1j ** m) for m, x in enumerate(c))))
        return ExpPoly(tuple(sorted(raw)))

    def normalized_coefficients(self) -> Tuple[Tuple[complex, ...], ...]:
        """Coefficients divided by the smallest nonzero magnitude among
        them; for Kirchhoff determinants these are integers."""
        mags = [abs(x) for _, c in self.terms for x in c if x != 0]
        if not mags:
            return ()
        s = min(mags)
        return tuple(tuple(x / s for x in c) for _, c in self.terms)


Coupling = Union[str, Dict[object, np.ndarray]]


@dataclass(frozen=True)
class GraphSpec:
    """Metric graph with internal edges and outward leads.

    vertices: hashable labels.  edges: (u, v, length) with length > 0.
    leads: anchor labels, one entry per lead.  coupling: "kirchhoff" or a
    mapping from vertex label to a unitary matrix whose dimension is the
    vertex degree under the channel ordering in the module docstring.
    """

    vertices: Tuple[object, ...]
    edges: Tuple[Tuple[object, object, float], ...]
    leads: Tuple[object, ...]
    coupling: Coupling = "kirchhoff"

    def __init__(self, vertices, edges, leads, coupling="kirchhoff"):
        vertices = tuple(vertices)
        edges = tuple((u, v, float(l)) for u, v, l in edges)
        leads = tuple(leads)
        if len(set(vertices)) != len(vertices):
            raise GraphError("duplicate vertex labels")
        vs = set(vertices)
        for u, v, l in edges:
            if u not in vs or v not in vs:
                raise GraphError(f"edge endpoint not a vertex: {(u, v)}")
            if not (l > 0):
                raise GraphError(f"edge length must be positive, got {l}")
        for v in leads:
            if v not in vs:
                raise GraphError(f"lead anchor not a vertex: {v}")
        if isinstance(coupling, str):
            if coupling != "kirchhoff":
                raise GraphError(f"unknown coupling {coupling!r}")
        else:
            coupling = {v: np.asarray(U, dtype=complex)
                        for v, U in dict(coupling).items()}
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "leads", leads)
        object.__setattr__(self, "coupling", coupling)
        if not isinstance(coupling, str):
            for v in vertices:
                d = self.degree(v)
                if d == 0:
                    continue
                U = coupling.get(v)
                if U is None:
                    raise GraphError(f"no unitary given for vertex {v}")
                if U.shape != (d, d):
                    raise GraphError(
                        f"unitary at {v} has shape {U.shape}, degree is {d}")
                err = np.linalg.norm(U.conj().T @ U - np.eye(d))
                if err > UNITARY_TOL:
                    raise GraphError(
                        f"matrix at {v} is not unitary: ||U*U - I|| = {err:.2e}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_leads(self) -> int:
        return len(self.leads)

    @property
    def dim(self) -> int:
        return 2 * self.n_edges + self.n_leads

    def degree(self, v) -> int:
        d = 0
        for u, w, _ in self.edges:
            d += (u == v) + (w == v)
        d += sum(1 for a in self.leads if a == v)
        return d

    def channels(self, v) -> List[Tuple[str, int, str]]:
        """Channels at v in canonical order: ("edge", j, "u"|"v") then
        ("lead", m, "")."""
        out: List[Tuple[str, int, str]] = []
        for j, (u, w, _) in enumerate(self.edges):
            if u == v:
                out.append(("edge", j, "u"))
            if w == v:
                out.append(("edge", j, "v"))
        for m, a in enumerate(self.leads):
            if a == v:
                out.append(("lead", m, ""))
        return out

    def to_json(self) -> dict:
        coupling = self.coupling
        if isinstance(coupling, str):
            cj: object = coupling
        else:
            cj = {str(v): [[[x.real, x.imag] for x in row] for row in U]
                  for v, U in coupling.items()}
        return {
            "vertices": list(self.vertices),
            "edges": [{"u": u, "v": v, "length": l}
                      for u, v, l in self.edges],
            "leads": [{"v": v, "count": c}
                      for v, c in _lead_counts(self.leads)],
            "coupling": cj,
        }

    @staticmethod
    def from_json(data: dict) -> "GraphSpec":
        vertices = data["vertices"]
        edges = [(e["u"], e["v"], e["length"]) for e in data["edges"]]
        leads: List[object] = []
        for item in data["leads"]:
            leads.extend([item["v"]] * int(item.get("count", 1)))
        coupling = data.get("coupling", "kirchhoff")
        if not isinstance(coupling, str):
            coupling = {
                _match_label(vertices, v):
                    np.array([[complex(re, im) for re, im in row]
                              for row in mat])
                for v, mat in coupling.items()}
        return GraphSpec(vertices, edges, leads, coupling)


def _lead_counts(leads: Sequence[object]) -> List[Tuple[object, int]]:
    out: List[Tuple[object, int]] = []
    for v in leads:
        if out and out[-1][0] == v:
            out[-1] = (v, out[-1][1] + 1)
        else:
            out.append((v, 1))
    return out


def _match_label(vertices, key):
    for v in vertices:
        if str(v) == str(key):
            return v
    return key


def _value_flux(graph: GraphSpec, channel) -> Tuple[List[Tuple[int, ExpSum]],
                                                    List[Tuple[int, ExpSum]]]:
    """(column, ExpSum) entries of the value and of the outgoing
    derivative divided by ik, for one vertex channel."""
    kind, idx, end = channel
    one = ExpSum.constant(1.0)
    if kind == "lead":
        col = 2 * graph.n_edges + idx
        return [(col, one)], [(col, one)]
    rho = graph.edges[idx][2]
    u = ExpSum.monomial(rho, (1.0,))
    ca, cb = 2 * idx, 2 * idx + 1
    if end == "u":
        return [(ca, one), (cb, u)], [(ca, one), (cb, -u)]
    return [(ca, u), (cb, one)], [(ca, -u), (cb, one)]


def _entry_matrix(graph: GraphSpec) -> List[List[ExpSum]]:
    dim = graph.dim
    if dim == 0:
        raise GraphError("graph has no edges or leads")
    zero = ExpSum(())
    rows: List[List[ExpSum]] = []
    kirchhoff = isinstance(graph.coupling, str)
    for v in graph.vertices:
        chans = graph.channels(v)
        if not chans:
            continue
        vals = []
        flux = []
        for ch in chans:
            a, b = _value_flux(graph, ch)
            vals.append(a)
            flux.append(b)
        if kirchhoff:
            for i in range(len(chans) - 1):
                row = [zero] * dim
                for col, e in vals[i]:
                    row[col] = row[col] + e
                for col, e in vals[i + 1]:
                    row[col] = row[col] - e
                rows.append(row)
            row = [zero] * dim
            for f in flux:
                for col, e in f:
                    row[col] = row[col] + e
            rows.append(row)
        else:
            U = graph.coupling[v]
            d = len(chans)
            A = U - np.eye(d)
            # Psi' = ik * flux, and i(U+I)(ik flux) = -k (U+I) flux.
            B = U + np.eye(d)
            for i in range(d):
                row = [zero] * dim
                for c in range(d):
                    if A[i, c] != 0:
                        s = ExpSum.constant(A[i, c])
                        for col, e in vals[c]:
                            row[col] = row[col] + s * e
                    if B[i, c] != 0:
                        s = ExpSum.monomial(0.0, (0.0, -B[i, c]))
                        for col, e in flux[c]:
                            row[col] = row[col] + s * e
                rows.append(row)
    if len(rows) != dim:
        raise GraphError(
            f"assembled {len(rows)} rows for dimension {dim}")
    return rows


def assemble_A(graph: GraphSpec, z: complex) -> np.ndarray:
    """Numeric resonance matrix A(z); rows are the vertex conditions
    applied to the edge/lead ansatz coefficients (A_j, B_j, C_m)."""
    if z == 0:
        raise GraphError("k = 0 is excluded")
    entries = _entry_matrix(graph)
    dim = graph.dim
    A = np.empty((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            A[i, j] = entries[i][j].eval(complex(z))
    return A


class GraphDeterminant:
    """Vectorized det A(z) for the root finder."""

    def __init__(self, graph: GraphSpec):
        self.graph = graph
        self.entries = _entry_matrix(graph)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        dim = self.graph.dim
        M = np.empty(flat.shape + (dim, dim), dtype=complex)
        for i in range(dim):
            for j in range(dim):
                M[:, i, j] = self.entries[i][j].eval(flat)
        d = np.linalg.det(M).reshape(z.shape)
        return d if d.shape else complex(d)


def symbolic_det(graph: GraphSpec) -> ExpSum:
    """Determinant of A over the exponential-sum ring, by Laplace expansion
    along rows with minors memoized on the active column set."""
    dim = graph.dim
    if dim > DET_DIM_CAP:
        raise GraphError(
            f"dimension {dim} exceeds the symbolic cap {DET_DIM_CAP}")
    entries = _entry_matrix(graph)
    memo: Dict[int, ExpSum] = {0: ExpSum.constant(1.0)}

    def minor(mask: int) -> ExpSum:
        if mask in memo:
            return memo[mask]
        row = dim - bin(mask).count("1")
        acc = ExpSum(())
        sign = 1.0
        for j in range(dim):
            if not (mask >> j) & 1:
                continue
            e = entries[row][j]
            if not e.is_zero:
                acc = acc + (e * minor(mask & ~(1 << j))).scale(sign)
            sign = -sign
        memo[mask] = acc
        return acc

    return minor((1 << dim) - 1)


@dataclass(frozen=True)
class CommensurableForm:
    """F(z) = 0 rewritten as P(w) = 0 with w = e^{i beta z}; the zero set
    is the union of exact lattices beta k = 2 pi t - i Ln|xi| + Arg xi over
    the retained roots xi of P."""

    beta: float
    degrees: Tuple[int, ...]
    poly: Tuple[complex, ...]
    xi_roots: Tuple[Tuple[complex, int], ...]
    spurious: Tuple[complex, ...]

    @property
    def min_modulus(self) -> float:
        return min(abs(x) for x, _ in self.xi_roots)

    @property
    def has_embedded(self) -> bool:
        return any(abs(abs(x) - 1.0) <= SPURIOUS_XI_TOL
                   for x, _ in self.xi_roots)

    def lattice(self, xi: complex, t_range) -> List[Tuple[int, complex]]:
        out = []
        for t in t_range:
            val = (2 * math.pi * t - 1j * math.log(abs(xi))
                   + _arg0(xi)) / self.beta
            out.append((int(t), complex(val)))
        return out

    def lattice_points(self, rect: SearchRect, pad: float = 1e-9
                       ) -> List[Tuple[complex, complex]]:
        """(xi, k) for every lattice point inside the rectangle."""
        x0, x1, y0, y1 = rect.bounds
        out = []
        for xi, mult in self.xi_roots:
            t_lo = math.floor((self.beta * x0 - _arg0(xi))
                              / (2 * math.pi)) - 1
            t_hi = math.ceil((self.beta * x1 - _arg0(xi))
                             / (2 * math.pi)) + 1
            for t in range(t_lo, t_hi + 1):
                _, k = self.lattice(xi, [t])[0]
                if (x0 - pad <= k.real <= x1 + pad
                        and y0 - pad <= k.imag <= y1 + pad):
                    out.append((xi, k))
        return out


def _arg0(x: complex) -> float:
    a = cmath.phase(x)
    if a == -math.pi:
        return math.pi
    return a


def _cluster_xi(roots: np.ndarray, tol: float) -> List[Tuple[complex, int]]:
    order = np.lexsort((roots.imag, roots.real))
    out: List[List] = []
    for r in roots[order]:
        if out and abs(r - out[-1][0] / out[-1][1]) <= tol:
            out[-1][0] += r
            out[-1][1] += 1
        else:
            out.append([r, 1])
    return [(complex(s / c), int(c)) for s, c in out]


def commensurable_reduce(F: ExpSum, tol: float = RATIONAL_TOL
                         ) -> CommensurableForm:
    """Rational reconstruction of frequency ratios by continued fractions
    (denominator cap 10^6); beta is the coarsest lattice spacing with
    b_l - b_0 = beta d_l, d_l integer."""
    if F.is_zero:
        raise GraphError("zero exponential sum")
    if not F.constant_coefficients:
        raise PolynomialCoefficientError(
            "polynomial coefficients: lattice reduction not applicable")
    bs = F.frequencies
    if len(bs) < 2:
        raise GraphError("single-frequency sum has no zeros")
    deltas = [b - bs[0] for b in bs[1:]]
    base = deltas[0]
    fracs: List[Fraction] = []
    for d in deltas:
        fr = Fraction(d / base).limit_denominator(DENOMINATOR_CAP)
        if abs(float(fr) - d / base) > tol * max(1.0, abs(d / base)):
            raise IncommensurableError(
                f"frequency ratio {d / base} is not rational under the "
                f"denominator cap")
        fracs.append(fr)
    q = 1
    for fr in fracs:
        q = q * fr.denominator // math.gcd(q, fr.denominator)
    nums = [fr.numerator * (q // fr.denominator) for fr in fracs]
    g = 0
    for n in nums:
        g = math.gcd(g, n)
    beta = base * g / q
    degrees = [0] + [n // g for n in nums]
    if max(degrees) > POLY_DEGREE_CAP:
        raise IncommensurableError(
            f"frequency ratios reduce to a lattice of {max(degrees)} "
            f"steps, beyond the workable cap {POLY_DEGREE_CAP}; treating "
            f"the lengths as incommensurable")
    coeffs = [0j] * (max(degrees) + 1)
    for (b, c), d in zip(F.terms, degrees):
        coeffs[d] += c[0]
    roots = np.roots(list(coeffs)[::-1]) if len(coeffs) > 1 else np.array([])
    clustered = _cluster_xi(np.asarray(roots, dtype=complex),
                            OMEGA_CLUSTER_TOL)
    kept = tuple((x, m) for x, m in clustered
                 if abs(x) >= 1.0 - SPURIOUS_XI_TOL)
    spurious = tuple(x for x, m in clustered
                     if abs(x) < 1.0 - SPURIOUS_XI_TOL for _ in range(m))
    if not kept:
        raise GraphError("no resonance-generating roots retained")
    return CommensurableForm(float(beta), tuple(degrees), tuple(coeffs),
                             kept, spurious)


@dataclass(frozen=True)
class KSHReport:
    """Distribution-diagram classification of a graph determinant, in the
    zeta-plane orientation of ExpSum.to_exppoly: positive slopes carry the
    logarithmic (retarded) chains, a zero slope is the neutral strip."""

    mu_max: float
    segments: Tuple[Tuple[float, int, Tuple[Tuple[complex, int], ...]], ...]
    neutral_strip: bool
    diagram: DistributionDiagram


def classify_KSH(F: ExpSum, slope_tol: float = 1e-9) -> KSHReport:
    D = F.to_exppoly()
    diag = build_diagram(D)
    segments = []
    neutral = False
    mu_max = 0.0
    for seg in diag.segments:
        if seg.mu < -slope_tol:
            raise KSHStructureError(
                f"negative slope {seg.mu}: zeros accumulate in the upper "
                f"half-plane, assembly is inconsistent")
        if abs(seg.mu) <= slope_tol:
            neutral = True
            continue
        mu_max = max(mu_max, seg.mu)
        segments.append((seg.mu, seg.r, seg.omegas))
    return KSHReport(mu_max, tuple(segments), neutral, diag)


def graph_resonances(graph: GraphSpec, rect: SearchRect,
                     tol: float = 1e-9) -> ResonanceMultiset:
    """Certified zeros of det A(z) in the rectangle; a puncture of radius
    1e-6 around z = 0 must lie outside, since k = 0 is excluded from the
    model."""
    if rect.contains(0j, pad=ORIGIN_PUNCTURE):
        raise GraphError(
            "search rectangle must exclude a neighborhood of k = 0")
    f = GraphDeterminant(graph)
    return find_zeros(f, None, rect, tol)
