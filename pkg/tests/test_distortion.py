import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graftlab.distortion import (
    C1,
    C2,
    CertificateError,
    DomainError,
    StripMapSpec,
    audit_map,
    bound_displacement,
    bound_fprime,
    bound_fprime_real,
    bound_fsecond,
    buffer_for_epsilon,
    buffer_profile,
    empirical_distortion,
    random_strip_map,
)


def test_constants_against_mpmath():
    mpmath.mp.dps = 50
    c1 = mpmath.sqrt(8 / mpmath.pi)
    c2 = 8 * mpmath.pi * mpmath.e ** (5 * mpmath.pi) * (c1 + 1)
    assert C1 == float(c1)
    assert C2 == pytest.approx(float(c2), rel=1e-15)


def test_bound_formulas_and_domains():
    b = 6.0
    assert bound_fprime(b) == C1
    assert bound_fsecond(1.0, b) == pytest.approx(C2 * math.exp(-2 * math.pi * 5))
    assert bound_fprime_real(b) == pytest.approx(C2 * 7 * math.exp(-12 * math.pi))
    assert bound_displacement(0.0, b) == pytest.approx(C2 * 50 * math.exp(-12 * math.pi))
    for fn, args in [
        (bound_fprime, (3.0,)),
        (bound_fprime_real, (2.0,)),
        (bound_fsecond, (3.0, 6.0)),
        (bound_displacement, (-3.5, 6.0)),
    ]:
        with pytest.raises(DomainError):
            fn(*args)


def test_displacement_bound_tends_to_buffer_profile():
    c = 5.0
    for b in (20.0, 40.0):
        ratio = bound_displacement(b - c, b) / (C2 * math.exp(-2 * math.pi * c))
        assert ratio == pytest.approx(1.0, abs=(b + 1) ** 2 * math.exp(-2 * math.pi * (b - c)) + 1e-12)
    # at b = c the bound is exactly the buffer profile
    assert bound_displacement(0.0, c) == pytest.approx(buffer_profile(c))


@given(st.floats(0.0, 2.0), st.floats(4.0, 10.0))
def test_fsecond_squares_with_distance_to_edge(y, b):
    # the bound at y equals the bound at 0 times e^{2 pi |y|}
    if y < b - 3:
        assert bound_fsecond(y, b) == pytest.approx(bound_fsecond(0.0, b) * math.exp(2 * math.pi * y))
        assert bound_fsecond(y, b) >= bound_fsecond(0.0, b)


def test_buffer_for_epsilon():
    assert buffer_for_epsilon(buffer_profile(5.0)) == pytest.approx(5.0, abs=1e-9)
    eps = 1e-3
    c = buffer_for_epsilon(eps)
    assert buffer_profile(c) <= eps < buffer_profile(c - 0.01)
    assert c == pytest.approx(4.8301712063581534, abs=1e-9)
    # halving eps costs about log 2 / 2 pi once c is large
    big = buffer_for_epsilon(1e-40)
    step = buffer_for_epsilon(0.5e-40) - big
    assert step == pytest.approx(math.log(2) / (2 * math.pi), rel=0.02)
    with pytest.raises(ValueError):
        buffer_for_epsilon(0.0)


def test_identity_has_no_distortion():
    assert empirical_distortion(StripMapSpec(8.0), 4.0) == 0.0
    row = audit_map(StripMapSpec(8.0), 4.0)
    assert row.passed and row.margin == row.bound


def test_single_mode_sup():
    b, c = 6.0, 4.0
    a = math.exp(-2 * math.pi * b) / (4 * math.pi)
    spec = StripMapSpec(b, ((1, a),))
    sup = empirical_distortion(spec, c)
    exact = a * (math.exp(2 * math.pi * (b - c)) + 1)  # attained at x = 1/2, y = -(b - c)
    # the Lipschitz correction adds at most diag * pi relative to the sup, diag about 0.031
    assert exact <= sup <= exact * (1 + 0.11)


@pytest.mark.parametrize("seed", range(5))
def test_strip_maps_are_equivariant(seed):
    rng = np.random.default_rng(seed)
    spec = random_strip_map(rng, 5.0)
    assert 0.2 < spec.certificate < 0.95
    z = rng.uniform(0, 1, 20) + 1j * rng.uniform(-4, 4, 20)
    assert np.allclose(spec(z + 1), spec(z) + 1)
    assert abs(spec(0.0)) < 1e-15
    # derivatives against central differences
    h = 1e-6
    assert np.allclose(spec.derivative(z), (spec(z + h) - spec(z - h)) / (2 * h), rtol=1e-6)
    assert np.allclose(
        spec.second_derivative(z), (spec.derivative(z + h) - spec.derivative(z - h)) / (2 * h), rtol=1e-5
    )


def test_certificate_required():
    spec = StripMapSpec(5.0, ((1, 1.0),))
    with pytest.raises(CertificateError):
        empirical_distortion(spec, 4.0)
    with pytest.raises(DomainError):
        empirical_distortion(StripMapSpec(5.0), 2.0)
    with pytest.raises(ValueError):
        StripMapSpec(5.0, ((0, 1.0),))


def test_json_roundtrip():
    spec = random_strip_map(np.random.default_rng(1), 6.0)
    assert StripMapSpec.from_json(json.loads(json.dumps(spec.to_json()))) == spec


def test_sine_lower_bound():
    rng = np.random.default_rng(7)
    s = rng.uniform(math.log(2), 6, 10_000) * rng.choice([-1, 1], 10_000)
    zeta = rng.uniform(-10, 10, 10_000) + 1j * s
    assert np.all(np.abs(np.sin(zeta)) ** 2 >= np.exp(2 * np.abs(s)) / 8)


@pytest.mark.parametrize("seed", range(10))
def test_random_maps_satisfy_all_bounds(seed):
    rng = np.random.default_rng(seed)
    b = float(rng.uniform(4, 8))
    spec = random_strip_map(rng, b)
    row = audit_map(spec, buffer_for_epsilon(1e-3))
    assert row.passed
    assert row.lemma_violations == 0
    assert row.empirical <= 1e-3 or b < row.c
