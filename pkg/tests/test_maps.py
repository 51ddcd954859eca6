import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renormlab.maps import (CylinderPoint, DomainError, Family, MapSpec, R_SPEC, derivative,
                            eval_complex, eval_lift, lift_complex, verify_critical_cubic)

TWO_PI = 2 * math.pi
SPECS = [MapSpec("RigidRotation", 0.3), MapSpec("Arnold", 0.61),
         MapSpec("PerturbedArnold", 0.61, 0.05), MapSpec("PerturbedArnold", 0.2, -0.02)]


@pytest.mark.parametrize("spec,x,expected", [
    (MapSpec("Arnold", 0.0), 0.0, 0.0),
    (MapSpec("Arnold", 0.25), 0.0, 0.25),
    (MapSpec("RigidRotation", 0.6180339887498949), 0.5, 1.1180339887498949),
])
def test_eval_lift_examples(spec, x, expected):
    assert eval_lift(spec, x) == pytest.approx(expected, abs=1e-15)


def test_perturbed_lift_matches_formula():
    spec = MapSpec("PerturbedArnold", 0.4, 0.03)
    x = np.linspace(-1, 2, 101)
    s = np.sin(TWO_PI * x)
    np.testing.assert_allclose(eval_lift(spec, x), x + 0.4 - s / TWO_PI + 0.03 * s ** 3, atol=1e-15)


def test_invalid_perturbation_rejected():
    with pytest.raises(ValueError):
        MapSpec("PerturbedArnold", 0.3, 0.06)
    with pytest.raises(ValueError):
        MapSpec("Arnold", 0.3, 0.01)


@pytest.mark.parametrize("spec", SPECS)
def test_lift_periodicity(spec):
    x = np.random.default_rng(1).uniform(-3, 3, 1000)
    assert np.max(np.abs(eval_lift(spec, x + 1) - eval_lift(spec, x) - 1)) <= 1e-12


@pytest.mark.parametrize("spec", SPECS)
def test_lift_monotone(spec):
    y = eval_lift(spec, np.linspace(0, 1, 10_000))
    assert np.all(np.diff(y) >= 0)


@pytest.mark.parametrize("spec", SPECS)
def test_schwarz_reflection_and_real_agreement(spec):
    rng = np.random.default_rng(2)
    z = rng.uniform(0, 1, 1000) + 1j * rng.uniform(-0.9, 0.9, 1000)
    np.testing.assert_allclose(lift_complex(spec, np.conj(z)), np.conj(lift_complex(spec, z)), atol=1e-12)
    x = rng.uniform(0, 1, 1000)
    np.testing.assert_allclose(lift_complex(spec, x + 0j).real, eval_lift(spec, x), atol=1e-12)


def test_eval_complex_examples():
    f = MapSpec("Arnold", 0.0)
    w = eval_complex(f, CylinderPoint(0, 0))
    assert (w.x, w.y) == (0.0, 0.0)
    z = CylinderPoint(0.3, 0.2)
    assert eval_complex(f, z.conjugate()).y == pytest.approx(-eval_complex(f, z).y, abs=1e-15)
    g = MapSpec("Arnold", 0.606)
    w = eval_complex(g, CylinderPoint(0, 0.01))
    assert abs(w.y) > 0
    # Cauchy-Riemann via finite differences
    h = 1e-6
    z0 = complex(0, 0.01)
    dx = (lift_complex(g, z0 + h) - lift_complex(g, z0 - h)) / (2 * h)
    dy = (lift_complex(g, z0 + 1j * h) - lift_complex(g, z0 - 1j * h)) / (2j * h)
    assert abs(dx - dy) < 1e-8


def test_eval_complex_outside_annulus():
    with pytest.raises(DomainError):
        eval_complex(MapSpec("Arnold", 0.1), CylinderPoint(0.2, R_SPEC))


def test_cylinder_point_reduced():
    p = CylinderPoint(2.25, -0.5)
    assert p.x == 0.25 and p.y == -0.5


@pytest.mark.parametrize("theta", [0.0, 0.37])
def test_derivative_examples(theta):
    f = MapSpec("Arnold", theta)
    assert derivative(f, 0.0, 1) == 0.0
    assert derivative(f, 0.0, 3) == pytest.approx(TWO_PI ** 2, rel=1e-15)
    assert derivative(f, 0.5, 1) == pytest.approx(2.0, abs=1e-15)


@pytest.mark.parametrize("spec", SPECS[1:])
@pytest.mark.parametrize("order", [1, 2])
def test_derivative_against_finite_difference(spec, order):
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-5
    lower = (lambda t: eval_lift(spec, t)) if order == 1 else (lambda t: derivative(spec, t, 1))
    fd = (lower(x + h) - lower(x - h)) / (2 * h)
    np.testing.assert_allclose(derivative(spec, x, order), fd, atol=1e-7)


def test_third_derivative_against_finite_difference():
    spec = MapSpec("PerturbedArnold", 0.2, 0.04)
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-5
    fd = (derivative(spec, x + h, 2) - derivative(spec, x - h, 2)) / (2 * h)
    np.testing.assert_allclose(derivative(spec, x, 3), fd, atol=1e-5)


def test_derivative_order_checked():
    with pytest.raises(ValueError):
        derivative(MapSpec("Arnold", 0.1), 0.0, 4)


@pytest.mark.parametrize("spec,passes", [
    (MapSpec("Arnold", 0.3), True),
    (MapSpec("PerturbedArnold", 0.3, 0.05), True),
    (MapSpec("RigidRotation", 0.3), False),
])
def test_verify_critical_cubic(spec, passes):
    rep = verify_critical_cubic(spec)
    assert rep.passed is passes
    if spec.family is Family.ARNOLD:
        assert rep.d3 == pytest.approx(TWO_PI ** 2)


@settings(max_examples=60, deadline=None)
@given(b=st.floats(-0.05, 0.05), x=st.floats(0, 1))
def test_perturbed_derivative_factorization(b, x):
    # F' = sin^2(pi x) (2 + 24 pi b cos^2(pi x) cos(2 pi x)), non-negative for |b| <= 0.05
    if b <= -1 / (12 * math.pi):
        return
    spec = MapSpec("PerturbedArnold", 0.1, b)
    s, c = math.sin(math.pi * x), math.cos(math.pi * x)
    expected = s * s * (2 + 24 * math.pi * b * c * c * math.cos(2 * math.pi * x))
    assert derivative(spec, x, 1) == pytest.approx(expected, abs=1e-12)
    assert expected >= -1e-15
