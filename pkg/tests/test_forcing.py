import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lattice_oracle import generates_z2, random_symmetric_set, span_ball
from ns2dlab.forcing import (
    FORCING_SPANNING, FORCING_AXES, FORCING_EVEN, Classification, Mode, as_modes, check_conditions, classify,
    dual_periods, gcd_of_determinants, generated_lattice, is_symmetric, lattice_ball, parse_modes,
    symmetrize, zinfty_ball, zn_step,
)


def S(*pts):
    return frozenset(Mode(*p) for p in pts)


modes = st.tuples(st.integers(-5, 5), st.integers(-5, 5)).filter(lambda k: k != (0, 0))
mode_sets = st.lists(modes, min_size=1, max_size=5).map(symmetrize)


class TestSymmetrize:
    def test_adds_negatives(self):
        assert symmetrize([(1, 0), (1, 1)]) == S((1, 0), (-1, 0), (1, 1), (-1, -1))

    def test_already_symmetric(self):
        assert symmetrize([(1, 0), (-1, 0)]) == S((1, 0), (-1, 0))

    def test_single(self):
        assert symmetrize([(2, 3)]) == S((2, 3), (-2, -3))

    @given(st.lists(modes, min_size=1, max_size=6))
    def test_idempotent(self, pts):
        once = symmetrize(pts)
        assert is_symmetric(once)
        assert symmetrize(once) == once

    def test_rejects_origin_and_empty(self):
        with pytest.raises(ValueError):
            as_modes([(0, 0)])
        with pytest.raises(ValueError):
            as_modes([])

    def test_parse(self):
        assert parse_modes("1,0;-1,0; 1,1;-1,-1") == FORCING_SPANNING


class TestLattice:
    def test_spanning_set(self):
        basis, g = generated_lattice(FORCING_SPANNING)
        assert g == 1
        assert abs(basis[0][0] * basis[1][1]) == 1

    def test_even_set(self):
        basis, g = generated_lattice(FORCING_EVEN)
        assert g == 4
        assert [tuple(b) for b in basis] == [(2, 0), (0, 2)]

    def test_collinear(self):
        basis, g = generated_lattice(S((1, 0), (-1, 0)))
        assert g == 0
        assert len(basis) == 1

    @given(mode_sets)
    def test_basis_spans_same_points(self, z0):
        # every forced mode lies in the lattice, and the basis vectors are in the span
        assert all(k in lattice_ball(z0, 8) for k in z0 if k.norm2 <= 64)
        basis, g = generated_lattice(z0)
        if g:
            assert lattice_ball(z0, 9) == frozenset(span_ball(z0, 9))

    @given(mode_sets)
    def test_gcd_one_iff_spanning(self, z0):
        assert (gcd_of_determinants(z0) == 1) == generates_z2(z0)


class TestConditions:
    def test_reference_sets(self):
        assert check_conditions(FORCING_SPANNING) == (True, True)
        assert check_conditions(FORCING_AXES) == (False, True)
        assert check_conditions(FORCING_EVEN) == (True, False)


class TestRecursion:
    def test_spanning_step(self):
        assert zn_step(FORCING_SPANNING, FORCING_SPANNING) == S((2, 1), (0, 1), (0, -1), (-2, -1))

    def test_axes_step_empty(self):
        assert zn_step(FORCING_AXES, FORCING_AXES) == frozenset()

    @given(mode_sets)
    def test_empty_prev(self, z0):
        assert zn_step(frozenset(), z0) == frozenset()

    def test_spanning_ball(self):
        expected = S((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1),
                     (2, 0), (-2, 0), (0, 2), (0, -2))
        assert zinfty_ball(FORCING_SPANNING, 2) == expected

    def test_axes_ball(self):
        assert zinfty_ball(FORCING_AXES, 5) == FORCING_AXES

    def test_even_ball(self):
        expected = S((2, 0), (-2, 0), (0, 2), (0, -2), (2, 2), (-2, -2), (2, -2), (-2, 2))
        assert zinfty_ball(FORCING_EVEN, 3) == expected

    def test_equal_norm_sets_stay_put(self):
        z0 = symmetrize([(3, 4), (5, 0), (0, 5)])
        assert zinfty_ball(z0, 12) == z0


class TestClassify:
    def test_reference_sets(self):
        assert classify(FORCING_SPANNING).classification is Classification.FULL_SPACE
        assert classify(FORCING_AXES).classification is Classification.FINITE_OU
        r = classify(FORCING_EVEN)
        assert r.classification is Classification.PROPER_SUBLATTICE
        assert [tuple(b) for b in r.lattice_basis] == [(2, 0), (0, 2)]

    def test_even_periods_are_pi(self):
        # fields on the even lattice are pi-periodic in both arguments
        r = classify(FORCING_EVEN)
        assert r.periods == ((Fraction(1, 2), Fraction(0)), (Fraction(0), Fraction(1, 2)))

    def test_skew_lattice_periods(self):
        basis = ((Mode(2, 0), Mode(1, 3)))
        per = dual_periods(basis)
        for v in per:
            for b in basis:
                assert (b[0] * v[0] + b[1] * v[1]).denominator == 1

    @given(mode_sets)
    def test_full_space_iff_a1_and_a2(self, z0):
        r = classify(z0)
        assert (r.classification is Classification.FULL_SPACE) == (r.a1 and r.a2)
        collinear = r.gcd_det == 0
        equal_norms = not r.a1
        assert (r.classification is Classification.FINITE_OU) == (collinear or equal_norms)

    def test_json_roundtrip(self):
        d = json.loads(classify(FORCING_EVEN).to_json())
        assert d["classification"] == "ProperSublattice"
        assert d["periods_over_2pi"] == [["1/2", "0"], ["0", "1/2"]]


def test_random_sets_match_flood_fill():
    rng = np.random.default_rng(0)
    for _ in range(300):
        z0 = random_symmetric_set(rng)
        assert (gcd_of_determinants(z0) == 1) == generates_z2(z0)
