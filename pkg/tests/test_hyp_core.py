import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_sl2
from graftlab.hyp_core import (
    ClassificationError,
    Geodesic,
    GeometryError,
    IdealPoint,
    MobiusMap,
    axis,
    classify,
    distance,
    fixed_points,
    from_disk,
    from_klein,
    orthogeodesic,
    point_on,
    position_on,
    to_disk,
    to_klein,
)

angles = st.floats(-3.0, 3.0)
coords = st.floats(-3.0, 3.0, allow_nan=False)
heights = st.floats(0.05, 5.0)


def hyperbolic_from(seed):
    rng = np.random.default_rng(seed)
    while True:
        m = MobiusMap.from_array(random_sl2(rng))
        if classify(m)[0] == "hyperbolic" and classify(m)[1] > 0.05:
            return m


def test_normalization_det_one_and_nonnegative_trace():
    m = MobiusMap(-2.0, -1.0, -1.0, -1.0)
    assert m.a * m.d - m.b * m.c == pytest.approx(1.0, abs=1e-12)
    assert m.trace >= 0
    with pytest.raises(ValueError):
        MobiusMap(1.0, 2.0, 2.0, 1.0)


def test_classify_examples():
    h = MobiusMap(math.exp(0.5), 0.0, 0.0, math.exp(-0.5))
    assert classify(h)[0] == "hyperbolic"
    assert classify(h)[1] == pytest.approx(1.0, abs=1e-14)
    assert classify(MobiusMap(1.0, 1.0, 0.0, 1.0)) == ("parabolic", 0.0)
    assert classify(MobiusMap(math.cos(0.3), math.sin(0.3), -math.sin(0.3), math.cos(0.3)))[0] == "elliptic"
    assert classify(MobiusMap.identity())[0] == "identity"


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_translation_length_is_conjugation_invariant(s1, s2):
    m = hyperbolic_from(s1)
    g = MobiusMap.from_array(random_sl2(np.random.default_rng(s2)))
    l0 = classify(m)[1]
    l1 = classify(g @ m @ g.inverse())[1]
    assert abs(l1 - l0) <= 1e-10 * max(1.0, l0) * max(1.0, np.abs(g.as_array()).max() ** 4)


def test_conjugation_invariance_fifty_random():
    rng = np.random.default_rng(7)
    m = MobiusMap(2.0, 1.0, 1.0, 1.0)
    for _ in range(50):
        g = MobiusMap.from_array(random_sl2(rng))
        assert classify(g @ m @ g.inverse())[1] == pytest.approx(classify(m)[1], abs=1e-10)


def test_axis_examples():
    assert axis(MobiusMap(math.exp(0.5), 0.0, 0.0, math.exp(-0.5))) == Geodesic(0.0, math.inf)
    assert axis(MobiusMap(1.0, 1.0, 0.0, 1.0)) == IdealPoint(math.inf)
    with pytest.raises(ClassificationError):
        axis(MobiusMap(math.cos(0.3), math.sin(0.3), -math.sin(0.3), math.cos(0.3)))
    with pytest.raises(ClassificationError):
        axis(MobiusMap.identity())


@given(st.integers(0, 10_000))
def test_axis_endpoints_are_fixed_roots(seed):
    m = hyperbolic_from(seed)
    g = axis(m)
    for x in (g.start, g.end):
        if math.isinf(x):
            assert abs(m.c) < 1e-12
            continue
        assert m.c * x * x + (m.d - m.a) * x - m.b == pytest.approx(0.0, abs=1e-8 * max(1.0, x * x))
        assert m(x) == pytest.approx(x, rel=1e-8, abs=1e-8)
    # the translation moves points toward the end
    z = point_on(g, 0.0)
    assert position_on(g, m(z)) == pytest.approx(classify(m)[1], abs=1e-8)


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_axis_is_equivariant(s1, s2):
    m = hyperbolic_from(s1)
    g = MobiusMap.from_array(random_sl2(np.random.default_rng(s2), 0.7))
    a0, a1 = axis(m), axis(g @ m @ g.inverse())
    for p, q in ((a0.start, a1.start), (a0.end, a1.end)):
        gp = g(p)
        if math.isinf(gp) or math.isinf(q):
            assert math.isinf(gp) or abs(gp) > 1e8
            continue
        assert gp == pytest.approx(q, rel=1e-9, abs=1e-9)


def test_fixed_points_parabolic_at_infinity():
    assert fixed_points(MobiusMap(1.0, 3.0, 0.0, 1.0)) == [math.inf]


def test_orthogeodesic_concentric():
    R = 3.0
    seg = orthogeodesic(Geodesic(-1.0, 1.0), Geodesic(-R, R))
    assert seg.foot_a == pytest.approx(1j)
    assert seg.foot_b == pytest.approx(R * 1j)
    assert seg.length == pytest.approx(math.log(R))


def test_orthogeodesic_symmetric_foot():
    # the geodesic (1, 4) is symmetric about the unit-speed inversion fixing 2i
    seg = orthogeodesic(Geodesic(0.0, math.inf), Geodesic(1.0, 4.0))
    assert seg.foot_a == pytest.approx(2j)


def test_orthogeodesic_to_cusp():
    seg = orthogeodesic(Geodesic(0.0, math.inf), IdealPoint(3.0))
    assert seg.foot_a == pytest.approx(3j)
    assert math.isinf(seg.length)
    seg2 = orthogeodesic(IdealPoint(-2.0), Geodesic(0.0, math.inf))
    assert seg2.foot_b == pytest.approx(2j)


def test_orthogeodesic_degenerate():
    with pytest.raises(GeometryError):
        orthogeodesic(Geodesic(0.0, 2.0), Geodesic(1.0, 3.0))
    with pytest.raises(GeometryError):
        orthogeodesic(Geodesic(0.0, 2.0), Geodesic(2.0, 5.0))
    with pytest.raises(GeometryError):
        orthogeodesic(Geodesic(0.0, math.inf), IdealPoint(0.0))
    with pytest.raises(GeometryError):
        orthogeodesic(IdealPoint(0.0), IdealPoint(1.0))


def _unit_tangent(g: Geodesic, s: float, h=1e-6):
    p, q = point_on(g, s - h), point_on(g, s + h)
    return (q - p) / abs(q - p)


@given(st.floats(-5, 5), st.floats(0.1, 3), st.floats(0.05, 4), st.floats(0.1, 6))
def test_orthogeodesic_random_pair_is_orthogonal_and_minimal(x0, r0, gap, width):
    a = Geodesic(x0 - r0, x0 + r0)
    b = Geodesic(x0 + r0 + gap, x0 + r0 + gap + width)
    seg = orthogeodesic(a, b)
    # feet lie on the carriers
    for g, f in ((a, seg.foot_a), (b, seg.foot_b)):
        c = 0.5 * (g.start + g.end)
        assert abs(f - c) == pytest.approx(0.5 * abs(g.end - g.start), rel=1e-9)
    # orthogonality: the perpendicular's tangent at each foot is normal to the carrier
    perp = Geodesic(*_endpoints_through(seg.foot_a, seg.foot_b))
    for g, f in ((a, seg.foot_a), (b, seg.foot_b)):
        s_g, s_p = position_on(g, f), position_on(perp, f)
        dot = (_unit_tangent(g, s_g) * _unit_tangent(perp, s_p).conjugate()).real
        assert abs(dot) < 1e-5
    # brute-force minimum over samples is not below the reported length
    ss = np.linspace(-6, 6, 241)
    pa = np.array([point_on(a, s) for s in ss])
    pb = np.array([point_on(b, s) for s in ss])
    dmin = min(distance(p, q) for p in pa[::4] for q in pb[::4])
    assert seg.length <= dmin + 1e-9


def _endpoints_through(p: complex, q: complex):
    if abs(p.real - q.real) < 1e-14:
        return p.real, math.inf
    c = (abs(p) ** 2 - abs(q) ** 2) / (2 * (p.real - q.real))
    r = abs(p - c)
    return c - r, c + r


def test_distance_examples():
    assert distance(1j, 1j) == 0.0
    assert distance(1j, math.e * 1j) == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        distance(1j, 0.5 + 0j)


@given(coords, heights, coords, heights, coords, heights)
def test_distance_triangle_inequality(x1, y1, x2, y2, x3, y3):
    p, q, r = complex(x1, y1), complex(x2, y2), complex(x3, y3)
    assert distance(p, r) <= distance(p, q) + distance(q, r) + 1e-9
    assert distance(p, q) == pytest.approx(distance(q, p))


@given(coords, heights)
def test_model_conversions_roundtrip(x, y):
    z = complex(x, y)
    assert from_disk(to_disk(z)) == pytest.approx(z, rel=1e-9)
    assert from_klein(to_klein(z)) == pytest.approx(z, rel=1e-7)


@given(st.integers(0, 10_000), coords, heights)
def test_isometries_preserve_distance(seed, x, y):
    g = MobiusMap.from_array(random_sl2(np.random.default_rng(seed), 0.7))
    p, q = complex(x, y), 1j
    assert distance(g(p), g(q)) == pytest.approx(distance(p, q), rel=1e-7, abs=1e-9)
    # |g'(z)| = Im g(z) / Im z for isometries
    assert g.derivative_scale(p) == pytest.approx(g(p).imag / p.imag, rel=1e-9)


def test_power_has_scaled_translation():
    m = MobiusMap(2.0, 1.0, 1.0, 1.0)
    half = m.power(0.5)
    assert (half @ half).distance_to(m) < 1e-12
    assert classify(half)[1] == pytest.approx(0.5 * classify(m)[1])
