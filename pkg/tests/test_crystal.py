"""Photonic crystal characteristic functions: transfer matrices,
exponential-sum expansion, and exact resonance lattices."""

import cmath
import math

import numpy as np
import pytest

from resonance_atlas.crystal import (CrystalError, CrystalSpec,
                                     crystal_exppoly, crystal_resonances,
                                     f_oracle, transfer_matrix)
from resonance_atlas.qgraph import commensurable_reduce
from resonance_atlas.rootfind import SearchRect


def slab():
    return CrystalSpec((0.0, 1.0), (1.0, 4.0, 1.0))


def three_layer():
    return CrystalSpec((0.0, 0.5, 1.0, 2.0), (1.0, 4.0, 9.0, 2.25, 1.0))


def random_crystal(rng):
    n = int(rng.integers(1, 5))
    bp = np.sort(rng.uniform(0.0, 3.0, size=n + 1))
    while np.min(np.diff(bp)) < 0.05:
        bp = np.sort(rng.uniform(0.0, 3.0, size=n + 1))
    eps = rng.uniform(0.5, 6.0, size=n + 2)
    return CrystalSpec(tuple(bp), tuple(eps))


class TestSpec:
    def test_validation(self):
        with pytest.raises(CrystalError):
            CrystalSpec((), (1.0,))
        with pytest.raises(CrystalError):
            CrystalSpec((0.0, 0.0), (1.0, 2.0, 1.0))
        with pytest.raises(CrystalError):
            CrystalSpec((0.0, 1.0), (1.0, 2.0))
        with pytest.raises(CrystalError):
            CrystalSpec((0.0, 1.0), (1.0, -2.0, 1.0))

    def test_derived_quantities(self):
        c = three_layer()
        assert c.n_layers == 3
        assert c.indices == pytest.approx((1.0, 2.0, 3.0, 1.5, 1.0))
        assert c.optical_lengths == pytest.approx((1.0, 1.5, 1.5))

    def test_json_round_trip(self):
        c = three_layer()
        assert CrystalSpec.from_json(c.to_json()) == c


class TestTransferMatrix:
    def test_unimodular_for_matched_outer_media(self):
        for c in (slab(), three_layer()):
            M = transfer_matrix(c, 1.3 - 0.4j)
            assert complex(np.linalg.det(M)) == pytest.approx(1.0, abs=1e-12)

    def test_slab_closed_form(self):
        rng = np.random.default_rng(2)
        for _ in range(6):
            k = complex(rng.uniform(-4, 4), rng.uniform(-1, 1))
            want = 2 * cmath.cos(2 * k) - 2.5j * cmath.sin(2 * k)
            assert f_oracle(slab(), k) == pytest.approx(want, rel=1e-12)

    def test_origin_excluded(self):
        with pytest.raises(CrystalError):
            f_oracle(slab(), 0.0)


class TestExpansion:
    def test_slab_terms_exact(self):
        F = crystal_exppoly(slab())
        assert F.frequencies == (-2.0, 2.0)
        assert F.terms[0][1] == (pytest.approx(2.25 + 0j),)
        assert F.terms[1][1] == (pytest.approx(-0.25 + 0j),)

    def test_uniform_medium_single_monomial(self):
        F = crystal_exppoly(CrystalSpec((0.0, 1.0), (1.0, 1.0, 1.0)))
        assert len(F.terms) == 1
        assert F.terms[0][0] == pytest.approx(-1.0)
        assert F.terms[0][1] == (pytest.approx(2.0 + 0j),)

    def test_matches_oracle_on_random_crystals(self):
        rng = np.random.default_rng(13)
        for _ in range(8):
            c = random_crystal(rng)
            F = crystal_exppoly(c)
            for _ in range(5):
                k = complex(rng.uniform(-4, 4), rng.uniform(-1.2, 1.2))
                if abs(k) < 0.1:
                    continue
                want = f_oracle(c, k)
                assert abs(F(k) - want) <= 1e-9 * max(1.0, abs(want))

    def test_real_coefficients(self):
        rng = np.random.default_rng(29)
        for _ in range(4):
            F = crystal_exppoly(random_crystal(rng))
            for _, coeffs in F.terms:
                assert all(abs(x.imag) < 1e-10 * max(1.0, abs(x))
                           for x in coeffs)

    def test_layer_cap(self):
        bp = tuple(float(i) for i in range(15))
        eps = tuple([1.0] + [2.0, 3.0] * 7 + [1.0])
        with pytest.raises(CrystalError):
            crystal_exppoly(CrystalSpec(bp, eps))


class TestSlabResonances:
    def test_lattice_depth_and_spacing(self):
        rect = SearchRect.from_bounds(0.3, 8.0, -1.5, -0.01)
        rep = crystal_resonances(slab(), rect)
        assert rep.commensurable
        assert rep.form.beta == pytest.approx(4.0)
        xi = rep.form.xi_roots
        assert len(xi) == 1 and xi[0][0] == pytest.approx(9.0 + 0j)
        depth = math.log(9.0) / 4.0
        res = sorted(rep.multiset.locations(), key=lambda z: z.real)
        assert len(res) == 5
        for z in res:
            assert z.imag == pytest.approx(-depth, abs=1e-7)
        gaps = [b.real - a.real for a, b in zip(res, res[1:])]
        assert gaps == pytest.approx([math.pi / 2] * 4, abs=1e-7)
        assert rep.lattice_residual < 1e-7

    def test_no_real_resonances(self):
        # min |xi| = 9 > 1 forbids zeros on the real axis; check a thin
        # strip around it as well
        rect = SearchRect.from_bounds(0.3, 8.0, -0.05, 0.5)
        rep = crystal_resonances(slab(), rect)
        assert rep.multiset.total == 0


class TestThreeLayer:
    def test_frozen_reduction(self):
        F = crystal_exppoly(three_layer())
        assert F.frequencies == pytest.approx((-4.0, -2.0, 1.0, 2.0, 4.0))
        form = commensurable_reduce(F)
        assert form.beta == pytest.approx(1.0)
        assert form.degrees == (0, 2, 5, 6, 8)
        assert form.spurious == ()
        assert form.min_modulus == pytest.approx(1.2963409678742386)
        assert not form.has_embedded

    def test_zeros_sit_on_the_lattice(self):
        rect = SearchRect.from_bounds(0.3, 8.0, -1.5, -0.01)
        rep = crystal_resonances(three_layer(), rect)
        assert rep.multiset.total == 10
        assert rep.lattice_residual < 1e-7
        # deepest chain comes from the xi root of largest modulus
        max_mod = max(abs(x) for x, _ in rep.form.xi_roots)
        assert rep.strip_depth == pytest.approx(math.log(max_mod), abs=1e-7)
        # the t = 1 member of the positive-real-xi chain
        shallow = min(rep.multiset.locations(), key=lambda z: -z.imag)
        assert shallow == pytest.approx(
            2 * math.pi - 1j * math.log(1.2963409678742386), abs=1e-7)

    def test_incommensurable_crystal_has_no_form(self):
        c = CrystalSpec((0.0, 1.0, 1.0 + math.pi / 2), (1.0, 4.0, 9.0, 1.0))
        rect = SearchRect.from_bounds(0.5, 4.0, -1.0, -0.01)
        rep = crystal_resonances(c, rect)
        assert not rep.commensurable
        assert rep.lattice_residual is None

    def test_origin_puncture_enforced(self):
        with pytest.raises(CrystalError):
            crystal_resonances(slab(),
                               SearchRect.from_bounds(-1.0, 1.0, -1.0, 1.0))
