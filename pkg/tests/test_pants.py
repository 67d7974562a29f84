import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graftlab.hyp_core import MobiusMap, classify
from graftlab.pants import (
    DegenerateLengthError,
    FNCoords,
    MarkedGroup,
    PantsDecomposition,
    StructureError,
    build_group,
    four_punctured_sphere,
    genus_two,
    group_distance,
    half_twist,
    half_twist_distance,
    hexagon_side,
    measure_fn,
    punctured_torus,
    twice_punctured_torus,
)

DECOMPOSITIONS = {
    "punctured_torus": punctured_torus,
    "twice_punctured_torus": twice_punctured_torus,
    "four_punctured_sphere": four_punctured_sphere,
    "genus_two": genus_two,
}


def test_hexagon_symmetric():
    a = 0.8
    s = hexagon_side(a, a, a)
    assert math.cosh(s) == pytest.approx(math.cosh(a) * (1 + math.cosh(a)) / math.sinh(a) ** 2, rel=1e-14)


def test_hexagon_unit_against_high_precision():
    mpmath.mp.dps = 40
    ref = mpmath.acosh((mpmath.cosh(1) + mpmath.cosh(1) ** 2) / mpmath.sinh(1) ** 2)
    assert hexagon_side(1.0, 1.0, 1.0) == pytest.approx(float(ref), rel=1e-14)


def test_hexagon_cusp_limit():
    s = hexagon_side(1.0, 1.0, 0.0)
    assert math.cosh(s) == pytest.approx((1 + math.cosh(1) ** 2) / math.sinh(1) ** 2, rel=1e-14)
    assert hexagon_side(1.0, 1.0, 1e-7) == pytest.approx(s, abs=1e-12)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, -0.1)])
def test_hexagon_rejects_nonpositive(args):
    with pytest.raises(ValueError):
        hexagon_side(*args)


@given(st.floats(-10, 10))
def test_half_twist_range_and_period(t):
    h = half_twist(t)
    assert 0 <= h < 0.5
    assert half_twist_distance(h, t + 0.5) < 1e-12


def test_half_twist_distance_is_circular():
    assert half_twist_distance(0.01, 0.49) == pytest.approx(0.02)
    assert half_twist_distance(0.1, 0.1) == 0.0


def test_decomposition_counts_and_errors():
    assert punctured_torus().genus == 1
    assert genus_two().genus == 2
    assert four_punctured_sphere().euler_characteristic == -2
    with pytest.raises(StructureError):
        PantsDecomposition({"P": ["a+", "b-", "@p"]})
    with pytest.raises(StructureError):
        PantsDecomposition({"P": ["a+", "a-"]})
    with pytest.raises(StructureError):
        PantsDecomposition({"P": ["a+", "a-", "x"]})
    with pytest.raises(StructureError):
        PantsDecomposition({"P": ["a+", "a-", "@p"]}, ["z"])


def test_decomposition_and_coords_json_roundtrip():
    pd = twice_punctured_torus()
    pd2 = PantsDecomposition.from_json(pd.to_json())
    assert pd2.pants == pd.pants and pd2.E == pd.E
    fn = FNCoords({"a": 1.0, "b": 2.0}, {"a": 0.1, "b": -0.3})
    assert FNCoords.from_json(fn.to_json()) == fn
    with pytest.raises(ValueError):
        FNCoords({"a": 0.0}, {"a": 0.0})


def _sl2(m: MobiusMap) -> np.ndarray:
    return m.as_array()


def test_punctured_torus_commutator_trace():
    g = build_group(FNCoords({"a": 2.0}, {"a": 0.0}), punctured_torus())
    x, y = _sl2(g.generators["P.c0"]), _sl2(g.generators["t:a"])
    comm = np.linalg.inv(y) @ np.linalg.inv(x) @ y @ x
    # the commutator trace does not depend on the signs of the lifts
    assert np.trace(comm) == pytest.approx(-2.0, abs=1e-9)
    assert classify(g.peripheral(punctured_torus().cusps["@p"]))[0] == "parabolic"


def test_zero_twist_measures_zero():
    for name, make in DECOMPOSITIONS.items():
        pd = make()
        fn = FNCoords({c: 1.0 for c in pd.curves}, {c: 0.0 for c in pd.curves})
        out = measure_fn(build_group(fn, pd), pd)
        for c in pd.curves:
            assert half_twist_distance(out.twists[c], 0.0) < 1e-9, name


def test_four_punctured_sphere_mirror_symmetry():
    # reflection in the imaginary axis conjugates the zero-twist group into itself up to inverses
    pd = four_punctured_sphere()
    g = build_group(FNCoords({"g": 1.0}, {"g": 0.0}), pd)
    refl = lambda m: MobiusMap(m.a, -m.b, -m.c, m.d)  # noqa: E731
    mirrored = MarkedGroup({k: refl(v) for k, v in g.generators.items()}, g.pants, g.curve_sides, g.relations)
    traces = sorted(abs(m.trace) for m in g.generators.values())
    assert sorted(abs(m.trace) for m in mirrored.generators.values()) == pytest.approx(traces)
    out = measure_fn(build_group(FNCoords({"g": 1.0}, {"g": 0.2}), pd), pd)
    out_neg = measure_fn(build_group(FNCoords({"g": 1.0}, {"g": -0.2}), pd), pd)
    assert half_twist_distance(out.twists["g"] + out_neg.twists["g"], 0.0) < 1e-9


@given(
    st.sampled_from(sorted(DECOMPOSITIONS)),
    st.lists(st.floats(0.2, 4.0), min_size=3, max_size=3),
    st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3),
)
def test_fn_round_trip(name, lengths, twists):
    pd = DECOMPOSITIONS[name]()
    fn = FNCoords(dict(zip(pd.curves, lengths)), dict(zip(pd.curves, twists)))
    g = build_group(fn, pd)
    # the residual is entrywise, so it scales with the size of the generators
    scale = max(1.0, max(np.abs(m.as_array()).max() for m in g.generators.values())) ** 2
    assert g.relation_residual() < 1e-9 * scale
    out = measure_fn(g, pd)
    for c in pd.curves:
        assert out.lengths[c] == pytest.approx(fn.lengths[c], rel=1e-9)
        assert half_twist_distance(out.twists[c], fn.twists[c]) < 1e-9


def test_round_trip_hundred_random():
    rng = np.random.default_rng(0)
    pd = twice_punctured_torus()
    for _ in range(100):
        fn = FNCoords({c: float(rng.uniform(0.1, 5)) for c in pd.curves}, {c: float(rng.uniform(-1, 1)) for c in pd.curves})
        out = measure_fn(build_group(fn, pd), pd)
        for c in pd.curves:
            assert out.lengths[c] == pytest.approx(fn.lengths[c], rel=1e-9)
            assert half_twist_distance(out.twists[c], fn.twists[c]) < 1e-9


def test_quarter_twist_and_half_shift():
    pd = punctured_torus()
    out = measure_fn(build_group(FNCoords({"a": 1.5}, {"a": 0.25}), pd), pd)
    assert out.twists["a"] == pytest.approx(0.25, abs=1e-9)
    out2 = measure_fn(build_group(FNCoords({"a": 1.5}, {"a": 0.75}), pd), pd)
    assert half_twist_distance(out.twists["a"], out2.twists["a"]) < 1e-9


def test_length_is_curve_translation_length():
    pd = genus_two()
    g = build_group(FNCoords({"a": 1.0, "b": 2.0, "c": 3.0}, {"a": 0.1, "b": 0.2, "c": 0.3}), pd)
    out = measure_fn(g, pd)
    for c in pd.curves:
        assert out.lengths[c] == classify(g.curve_element(c))[1]


def test_group_distance():
    pd = punctured_torus()
    g = build_group(FNCoords({"a": 1.0}, {"a": 0.1}), pd)
    assert group_distance(g, g) == 0.0
    eps = 1e-6
    bumped = dict(g.generators)
    m = bumped["P.c0"]
    bumped["P.c0"] = MobiusMap(m.a + eps, m.b, m.c, (1 + m.b * m.c) / (m.a + eps))
    d = group_distance(g, MarkedGroup(bumped, g.pants, g.curve_sides, g.relations))
    assert eps / 10 < d < 10 * eps * max(1.0, abs(m.d / m.a))
    other = MarkedGroup({"X": m}, {}, {})
    with pytest.raises(StructureError):
        group_distance(g, other)


def test_parabolic_curve_is_degenerate():
    pd = punctured_torus()
    g = build_group(FNCoords({"a": 1.0}, {"a": 0.0}), pd)
    gens = dict(g.generators)
    gens["P.c0"] = MobiusMap(1.0, 1.0, 0.0, 1.0)
    with pytest.raises(DegenerateLengthError):
        measure_fn(MarkedGroup(gens, g.pants, g.curve_sides, g.relations), pd)


def test_conjugation_keeps_traces():
    pd = twice_punctured_torus()
    g = build_group(FNCoords({"a": 1.0, "b": 2.0}, {"a": 0.1, "b": 0.3}), pd)
    h = g.conjugate(MobiusMap(2.0, 1.0, 3.0, 2.0))
    for k in g.generators:
        assert abs(h.generators[k].trace) == pytest.approx(abs(g.generators[k].trace), abs=1e-10)
    out, out_h = measure_fn(g, pd), measure_fn(h, pd)
    for c in pd.curves:
        assert half_twist_distance(out.twists[c], out_h.twists[c]) < 1e-9
