"""Point-configuration metrics: distances, m-sizes, structural predicates.

A configuration is a finite set of distinct centers in R^3 together with one
complex strength per center.  The m-size of a configuration is the maximal
total displacement sum(|y_j - y_sigma(j)|) over permutations sigma moving
exactly m points; it controls the frequency content of the characteristic
determinant built in the exppoly module.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

# Absolute floor for the pairwise-separation check in PointConfig.
SEPARATION_TOL = 1e-12
# Relative tolerance for distance-equality predicates (diameter pairs, A6).
DISTANCE_EQ_TOL = 1e-9
# Largest N for which the factorial m-size enumeration is allowed.
BRUTE_FORCE_CAP = 9


@dataclass(frozen=True)
class PointConfig:
    """Centers y_1..y_N in R^3 with complex strengths a_1..a_N."""

    centers: Tuple[Tuple[float, float, float], ...]
    strengths: Tuple[complex, ...]

    def __init__(self, centers: Iterable[Sequence[float]], strengths: Iterable[complex]):
        pts = tuple(tuple(float(c) for c in p) for p in centers)
        st = tuple(complex(a) for a in strengths)
        if len(pts) < 1:
            raise ValueError("need at least one center")
        if any(len(p) != 3 for p in pts):
            raise ValueError("centers must be 3-vectors")
        if len(st) != len(pts):
            raise ValueError(
                f"got {len(pts)} centers but {len(st)} strengths")
        object.__setattr__(self, "centers", pts)
        object.__setattr__(self, "strengths", st)
        arr = self.points_array()
        if len(pts) > 1:
            d = _pairwise(arr)
            off = d[np.triu_indices(len(pts), k=1)]
            if off.min() <= SEPARATION_TOL:
                raise ValueError("centers must be pairwise distinct "
                                 f"(min separation {off.min():.3e})")

    @property
    def n(self) -> int:
        return len(self.centers)

    def points_array(self) -> np.ndarray:
        return np.array(self.centers, dtype=float)


def _pairwise(arr: np.ndarray) -> np.ndarray:
    diff = arr[:, None, :] - arr[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def distance_matrix(config: PointConfig) -> np.ndarray:
    """Symmetric N x N matrix of pairwise distances, zero diagonal."""
    return _pairwise(config.points_array())


def diameter(config: PointConfig) -> float:
    if config.n < 2:
        return 0.0
    return float(distance_matrix(config).max())


def diameter_pair(config: PointConfig) -> Tuple[int, int]:
    """Indices (i, j), i < j, of one pair realizing the diameter."""
    d = distance_matrix(config)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    return (int(min(i, j)), int(max(i, j)))


def cycle_notation(perm: Sequence[int]) -> str:
    """Cycle string for a permutation given in one-line form, 1-based.

    Fixed points are omitted; the identity renders as 'id'.
    """
    n = len(perm)
    seen = [False] * n
    parts = []
    for i in range(n):
        if seen[i] or perm[i] == i:
            seen[i] = True
            continue
        cyc = []
        j = i
        while not seen[j]:
            seen[j] = True
            cyc.append(j + 1)
            j = perm[j]
        parts.append("[" + " ".join(str(v) for v in cyc) + "]")
    return "".join(parts) if parts else "id"


@dataclass(frozen=True)
class SizeResult:
    value: float
    witness: Optional[Tuple[int, ...]]  # one-line permutation, None for m=1
    cycles: str


def _derangements(indices: Tuple[int, ...]):
    """Permutations of `indices` onto itself without fixed points."""
    for img in itertools.permutations(indices):
        if all(a != b for a, b in zip(indices, img)):
            yield img


def size_m(config: PointConfig, m: int) -> SizeResult:
    """Size_m: max over permutations with exactly m non-fixed points of the
    displacement sum, plus a witnessing permutation.

    Size_0 = 0 and, by the standing convention, Size_1 = diam (there is no
    permutation moving exactly one point, so no witness exists for m = 1).
    """
    n = config.n
    if not 0 <= m <= n:
        raise ValueError(f"m={m} out of range [0, {n}]")
    if n > BRUTE_FORCE_CAP:
        raise ValueError(
            f"N={n} exceeds the brute-force cap {BRUTE_FORCE_CAP}")
    ident = tuple(range(n))
    if m == 0:
        return SizeResult(0.0, ident, "id")
    if m == 1:
        return SizeResult(diameter(config), None, "(diameter by convention)")
    dist = distance_matrix(config)
    best = -1.0
    best_perm = None
    for moved in itertools.combinations(range(n), m):
        for img in _derangements(moved):
            s = math.fsum(dist[a][b] for a, b in zip(moved, img))
            if s > best:
                perm = list(ident)
                for a, b in zip(moved, img):
                    perm[a] = b
                best = s
                best_perm = tuple(perm)
    assert best_perm is not None
    return SizeResult(best, best_perm, cycle_notation(best_perm))


@dataclass(frozen=True)
class SizeProfile:
    """Size_m for m = 0..N, with the diameter and the m-size witnesses."""

    sizes: Tuple[float, ...]            # index m
    diameter: float
    witnesses: Tuple[Optional[Tuple[int, ...]], ...] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.sizes) - 1


def size_profile(config: PointConfig) -> SizeProfile:
    results = [size_m(config, m) for m in range(config.n + 1)]
    return SizeProfile(
        sizes=tuple(r.value for r in results),
        diameter=diameter(config),
        witnesses=tuple(r.witness for r in results),
    )


def is_collinear(config: PointConfig, tol: float = DISTANCE_EQ_TOL) -> bool:
    """True iff every center lies within tol*diam of the line through a
    diameter-realizing pair."""
    if config.n < 2:
        raise ValueError("collinearity needs at least two points")
    if config.n == 2:
        return True
    arr = config.points_array()
    i, j = diameter_pair(config)
    p, q = arr[i], arr[j]
    axis = q - p
    dlen = np.linalg.norm(axis)
    rel = arr - p
    cross = np.cross(rel, axis)
    dist_to_line = np.linalg.norm(cross, axis=1) / dlen
    return bool(np.all(dist_to_line <= tol * dlen))


def check_A4(profile: SizeProfile) -> bool:
    """Strict concavity of the size increments:
    Size_m - Size_{m-1} > Size_{m+1} - Size_m > 0 for 2 <= m <= N-1.
    Vacuously true for N = 2.  Ties count as failure.
    """
    s = profile.sizes
    n = profile.n
    if n < 2:
        raise ValueError("profile too small")
    for m in range(2, n):
        left = s[m] - s[m - 1]
        right = s[m + 1] - s[m]
        if not (left > right > 0.0):
            return False
    return True


def _is_y4_shape(d: np.ndarray, diam: float, tol_abs: float) -> bool:
    """Whether 4 points (6-distance matrix d) admit a cyclic ordering with
    all four sides equal to diam and both diagonals strictly shorter."""
    for order in ((0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 1, 3)):
        a, b, c, e = order
        sides = (d[a, b], d[b, c], d[c, e], d[e, a])
        diags = (d[a, c], d[b, e])
        if all(abs(s - diam) <= tol_abs for s in sides) and \
                all(g < diam - tol_abs for g in diags):
            return True
    return False


def check_A6(config: PointConfig, tol: float = DISTANCE_EQ_TOL) -> bool:
    """True iff some 4 distinct centers split into two disjoint pairs both
    realizing the diameter, while the 4-point subset cannot be reordered
    into the quad-cancellation shape (four diam sides, shorter diagonals).
    """
    if config.n < 4:
        raise ValueError("A6 needs at least four centers")
    dist = distance_matrix(config)
    diam = diameter(config)
    tol_abs = tol * diam
    for quad in itertools.combinations(range(config.n), 4):
        a, b, c, e = quad
        splits = (((a, b), (c, e)), ((a, c), (b, e)), ((a, e), (b, c)))
        has_double_diam = any(
            abs(dist[p][q] - diam) <= tol_abs and abs(dist[r][s] - diam) <= tol_abs
            for (p, q), (r, s) in splits)
        if not has_double_diam:
            continue
        sub = dist[np.ix_(quad, quad)]
        if not _is_y4_shape(sub, diam, tol_abs):
            return True
    return False
