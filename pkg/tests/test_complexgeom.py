import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renormlab.complexgeom import (PoincareRegion, cubic_growth_check, cubic_growth_samples,
                                   modulus_lower_bound, poincare_contains, prop33_inequality_fit,
                                   pullback_cloud, quasi_invariance_measure, return_disk,
                                   round_annulus_bound, round_annulus_modulus, visual_angle)
from renormlab.fitting import FitError
from renormlab.maps import DomainError, MapSpec, iterate_complex
from renormlab.partition import return_structure


@pytest.mark.parametrize("z,theta,inside", [
    (0.5 + 0.49j, math.pi / 2, True),
    (0.5 + 0.51j, math.pi / 2, False),
    (0.5 + 0.5j, math.pi / 4, True),
    (0.5 - 0.49j, math.pi / 2, True),
    (0.3 + 0j, math.pi / 2, False),
])
def test_poincare_examples(z, theta, inside):
    assert bool(poincare_contains(PoincareRegion((0.0, 1.0), theta), z)) is inside


def test_right_angle_is_diameter_disk():
    rng = np.random.default_rng(3)
    z = rng.uniform(-0.2, 1.2, 1000) + 1j * rng.uniform(-0.7, 0.7, 1000)
    z = z[np.abs(np.abs(z - 0.5) - 0.5) > 1e-9]
    region = PoincareRegion((0.0, 1.0), math.pi / 2)
    np.testing.assert_array_equal(poincare_contains(region, z), np.abs(z - 0.5) < 0.5)


@settings(max_examples=50, deadline=None)
@given(t1=st.floats(0.1, 3.0), t2=st.floats(0.1, 3.0))
def test_poincare_monotone(t1, t2):
    lo, hi = sorted((t1, t2))
    rng = np.random.default_rng(4)
    z = rng.uniform(-1, 2, 400) + 1j * rng.uniform(-2, 2, 400)
    small = poincare_contains(PoincareRegion((0.0, 1.0), hi), z)
    big = poincare_contains(PoincareRegion((0.0, 1.0), lo), z)
    assert np.all(~small | big)


def test_membership_matches_visual_angle():
    region = PoincareRegion((0.0, 1.0), math.pi / 3)
    rng = np.random.default_rng(5)
    z = rng.uniform(-0.5, 1.5, 500) + 1j * rng.uniform(0.01, 1.5, 500)
    ang = visual_angle((0.0, 1.0), z)
    far = np.abs(ang - math.pi / 3) > 1e-9
    np.testing.assert_array_equal(poincare_contains(region, z)[far], (ang >= math.pi / 3)[far])


def test_boundary_points_see_theta():
    region = PoincareRegion((0.2, 0.5), 1.1)
    b = region.boundary(50)
    np.testing.assert_allclose(visual_angle(region.J, b), 1.1, atol=1e-12)


def test_region_validation():
    with pytest.raises(ValueError):
        PoincareRegion((1.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        PoincareRegion((0.0, 1.0), math.pi)


def test_identity_loses_nothing():
    q = quasi_invariance_measure(lambda z: z, (0.25, 0.29), math.pi / 3)
    assert q.loss == 0.0


def test_rigid_rotation_loses_nothing():
    rot = MapSpec("RigidRotation", 0.3)
    q = quasi_invariance_measure(rot, (0.25, 0.29), math.pi / 3)
    assert q.loss <= 1e-12


@pytest.fixture(scope="module")
def losses(arnold_golden):
    return {L: quasi_invariance_measure(arnold_golden, (0.25, 0.25 + L), math.pi / 3).loss
            for L in (0.04, 0.02, 0.01)}


def test_loss_positive_and_superlinear(losses):
    assert all(v > 0 for v in losses.values())
    assert losses[0.04] / losses[0.02] >= 2
    assert losses[0.02] / losses[0.01] >= 2


def test_loss_near_critical_interval(arnold_golden, golden_cf):
    rs = return_structure(arnold_golden, golden_cf, 12)
    L = abs(rs.disp[12])
    J = (L, 2 * L)               # an I_12-sized interval next to c
    q = quasi_invariance_measure(arnold_golden, J, math.pi / 3)
    assert q.loss > 0
    assert q.loss / (math.pi / 3) <= 1.0


def test_quasi_invariance_length_guard(arnold_golden):
    with pytest.raises(ValueError):
        quasi_invariance_measure(arnold_golden, (0.1, 0.2), 1.0)


def test_cubic_harness():
    res = cubic_growth_samples(lambda z: z ** 3, 2.0, 10.0 ** 3, 500)
    assert abs(res.C - 1.0) <= 1e-12


def test_cubic_harness_too_few():
    with pytest.raises(DomainError):
        cubic_growth_samples(lambda z: z ** 3, 2.0, 1.0, 500)


@pytest.fixture(scope="module")
def cubic(arnold_golden, golden_cf):
    return {n: cubic_growth_check(arnold_golden, golden_cf, n) for n in (6, 8, 10)}


def test_cubic_growth(cubic):
    Cs = [r.C for r in cubic.values()]
    assert all(C > 0 for C in Cs)
    assert all(r.count >= 50 for r in cubic.values())
    assert max(Cs) / min(Cs) <= 4


def test_cubic_rejects_rotation(golden_cf):
    with pytest.raises(ValueError):
        cubic_growth_check(MapSpec("RigidRotation", 0.6), golden_cf, 6)


@pytest.mark.parametrize("m", [4, 6, 8])
def test_return_disk(arnold_golden, golden_cf, m):
    d = return_disk(arnold_golden, golden_cf, m)
    rs = return_structure(arnold_golden, golden_cf, m)
    assert d.contains(0.0)
    assert d.contains(complex(rs.disp[m + 1]) * 0.999)
    ratio = 2 * d.radius / abs(rs.disp[m])
    assert 1 <= ratio <= 5


@pytest.fixture(scope="module")
def cloud10(arnold_golden, golden_cf):
    return pullback_cloud(arnold_golden, golden_cf, 10, 3)


def test_pullback_inverse_correct(cloud10):
    assert cloud10.residual <= 1e-9
    assert cloud10.x.size >= 30


def test_real_samples_land_in_f_In(cloud10):
    real = cloud10.z.imag == 0
    assert real.any()
    assert np.all(cloud10.y[real] <= 1.0)


def test_pullback_fit_slope_stable(arnold_golden, golden_cf):
    a = prop33_inequality_fit(arnold_golden, golden_cf, 10, 3)
    b = prop33_inequality_fit(arnold_golden, golden_cf, 12, 3)
    assert np.isfinite([a.slope, a.intercept, a.r2]).all()
    assert 0.5 <= a.slope / b.slope <= 2


def test_pullback_guards(arnold_golden, golden_cf):
    with pytest.raises(ValueError):
        pullback_cloud(arnold_golden, golden_cf, 8, 5)


def test_pullback_csv(cloud10):
    buf = io.StringIO()
    cloud10.to_csv(buf)
    assert buf.getvalue().startswith("re_z,im_z,value\r\n")


def test_modulus_examples():
    R = math.exp(2 * math.pi)
    assert round_annulus_modulus(R) == pytest.approx(1.0)
    b = round_annulus_bound(R)
    assert b.lower == pytest.approx(4 / math.pi * ((R - 1) / (2 * R)) ** 2)
    assert b.lower == pytest.approx(0.317, abs=1e-3)
    assert modulus_lower_bound(1.0, 1.0).lower == 4 / math.pi
    assert modulus_lower_bound(1e-9, 1.0).lower < 1e-17


def test_modulus_errors():
    with pytest.raises(DomainError):
        modulus_lower_bound(2.0, 1.0)
    with pytest.raises(DomainError):
        modulus_lower_bound(0.0, 1.0)


@pytest.mark.parametrize("R", np.geomspace(1.01, 1e4, 20))
def test_modulus_bound_below_truth(R):
    assert round_annulus_bound(R).lower <= round_annulus_modulus(R)


@settings(max_examples=100, deadline=None)
@given(sep=st.floats(1e-6, 1.0), diam=st.floats(1e-6, 10.0))
def test_modulus_formula_exact(sep, diam):
    if sep > diam:
        return
    assert modulus_lower_bound(sep, diam).lower == 4.0 / math.pi * (sep / diam) ** 2
