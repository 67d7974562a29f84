import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from graftlab.cylinders import (
    GridError,
    GridRegion,
    NotchedCylinder,
    StraightCylinder,
    collar_modulus,
    collar_modulus_bounds,
    collar_width,
    crossing_length,
    distance_across_bound,
    grid_modulus,
    grid_modulus_bounds,
    largest_straight_subcylinder,
    pinching_bound,
    teichmuller_bounds,
    teichmuller_modulus,
)


@pytest.mark.parametrize("ell", [0.01, 0.3, 1.0, 2.0, 3.0])
def test_collar_modulus_against_root_finding(ell):
    w = collar_width(ell)
    assert math.sinh(w) * math.sinh(ell / 2) == pytest.approx(1.0)
    # sec(m ell / 2) = cosh(w), solved numerically
    m = mpmath.findroot(lambda m: mpmath.sec(m * ell / 2) - mpmath.cosh(w), math.pi / ell - 0.5)
    assert collar_modulus(ell) == pytest.approx(float(m), rel=1e-12)


@given(st.floats(min_value=1e-6, max_value=math.pi - 1e-6))
def test_collar_sandwich(ell):
    lo, hi, m = collar_modulus_bounds(ell)
    assert lo - 1e-12 <= m <= hi + 1e-12


def test_collar_domain():
    for bad in (0.0, -1.0, math.pi, 4.0):
        with pytest.raises(ValueError):
            collar_modulus_bounds(bad)


def test_pinching_and_distance_examples():
    assert pinching_bound(4.0) == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        pinching_bound(0.0)
    assert distance_across_bound(2.0, 1.0) == 0.0
    assert distance_across_bound(6.0, 1.0) == pytest.approx(math.log(5.0))
    with pytest.raises(ValueError):
        distance_across_bound(6.0, 0.0)


@pytest.mark.parametrize("t,c", [(3.0, 0.5), (6.0, 1.0), (10.0, 2.0), (20.0, 15.0)])
def test_crossing_length_against_quadrature(t, c):
    ell = math.pi / t
    b = t / 2 - 1
    u = (math.pi - ell * (c + 2 * b)) / 2
    v = (math.pi - ell * c) / 2
    ref = quad(lambda y: 1 / math.cos(y), u, v, epsabs=1e-13, epsrel=1e-13)[0]
    assert crossing_length(t, c, ell) == pytest.approx(ref, rel=1e-10)
    assert distance_across_bound(t, c) <= crossing_length(t, c, ell) + 1e-12


@pytest.mark.parametrize("b", [0.25, 1.0, 2.0, 4.0])
def test_teichmuller_modulus_against_mpmath(b):
    mpmath.mp.dps = 40
    m = 1 / (1 + mpmath.e ** (2 * mpmath.pi * b))
    ref = mpmath.ellipk(1 - m) / (2 * mpmath.ellipk(m))
    assert teichmuller_modulus(b) == pytest.approx(float(ref), rel=1e-13)
    lo, hi = teichmuller_bounds(b)
    assert lo <= teichmuller_modulus(b) <= hi


def test_straight_cylinder_is_exact():
    assert StraightCylinder(2.0, 0.0, 3.0).modulus == 1.5
    with pytest.raises(ValueError):
        StraightCylinder(1.0, 1.0, 1.0)
    for n in (16, 32):
        est = grid_modulus_bounds(GridRegion.straight(1.5, n))
        assert est.lower == pytest.approx(1.5, rel=1e-12)
        assert est.upper == pytest.approx(1.5, rel=1e-12)


def _wavy(n):
    return GridRegion.between(lambda x: 0.1 * np.sin(2 * np.pi * x), lambda x: 1 + 0.1 * np.cos(4 * np.pi * x), n)


def test_enclosure_tightens_under_refinement():
    gaps = []
    for n in (16, 32, 64):
        est = grid_modulus_bounds(_wavy(n))
        assert est.lower <= est.upper
        gaps.append(est.upper - est.lower)
    assert gaps[0] > gaps[1] > gaps[2]


def test_teichmuller_enclosure_contains_oracle():
    est = grid_modulus_bounds(GridRegion.teichmuller(1.0, 64))
    assert est.lower < teichmuller_modulus(1.0) < est.upper
    assert est.value == est.upper


def test_monotone_under_inclusion():
    r = NotchedCylinder(1.5, (0.0, 1, 0.0), ((0.25, 0.25, -1),)).region(64)
    base = grid_modulus_bounds(r)
    smaller = r.mask.copy()
    smaller[:8, 40] = False  # a second slit from the lower wall
    shrunk = grid_modulus_bounds(GridRegion(smaller, r.y0))
    assert shrunk.lower < base.lower
    assert shrunk.upper < base.upper


def test_region_text_roundtrip(tmp_path):
    r = NotchedCylinder.random(np.random.default_rng(4)).region(64)
    p = tmp_path / "r.txt"
    r.save(p)
    back = GridRegion.load(p)
    assert np.array_equal(back.mask, r.mask) and back.y0 == r.y0


@pytest.mark.parametrize(
    "text",
    [
        "nope\n",
        "graftlab-region 1\ncolumns 4 rows 1\n4#\n",
        "graftlab-region 1\ncolumns 4 rows 2 y0 0\n4#\n",
        "graftlab-region 1\ncolumns 4 rows 1 y0 0\n3#\n",
        "graftlab-region 1\ncolumns 4 rows 1 y0 0\n2# 2x\n",
    ],
)
def test_region_parse_errors(text):
    with pytest.raises(GridError):
        GridRegion.loads(text)


def test_bad_topologies_raise():
    n = 16
    cut = np.ones((8, n), bool)
    cut[:, 3] = False  # a wall joining both boundaries
    hole = np.ones((8, n), bool)
    hole[4, 8] = False
    split = np.ones((8, n), bool)
    split[4, :] = False
    for mask in (cut, hole, split):
        r = GridRegion(mask)
        assert not r.is_essential()
        with pytest.raises(GridError):
            grid_modulus(r)


def _band_scan(region):
    # try every pair of wall-bearing rows (padding included) and keep the widest wall-free gap
    full = region.mask.all(axis=1)
    rows = np.concatenate([[False], full, [False]])
    best = 0.0
    for a in range(len(rows)):
        for b in range(a + 1, len(rows)):
            if not rows[a] and not rows[b] and rows[a + 1 : b].all() and b - a > 1:
                best = max(best, (b - a) * region.h)
    return best


@pytest.mark.parametrize("seed", range(5))
def test_largest_straight_against_band_scan(seed):
    r = NotchedCylinder.random(np.random.default_rng(seed)).region(64)
    assert largest_straight_subcylinder(r) == pytest.approx(_band_scan(r))


def test_largest_straight_in_teichmuller_ring():
    r = GridRegion.teichmuller(1.0, 32)
    assert largest_straight_subcylinder(r) == pytest.approx(1.0)
    assert largest_straight_subcylinder(r) >= grid_modulus(r) - 1


@pytest.mark.parametrize("seed", range(3))
def test_non_squeezing_on_notched_cylinders(seed):
    r = NotchedCylinder.random(np.random.default_rng(seed)).region(64)
    assert largest_straight_subcylinder(r) >= grid_modulus(r) - 1
