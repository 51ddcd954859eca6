import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renormlab.fitting import FitError
from renormlab.rigidity import (ConjugacyError, OrbitConjugacy, orbit_conjugacy, qs_distortion,
                                qs_profile, rigidity_fit, rigidity_scan, scaling_ratios)
from renormlab.maps import MapSpec
from renormlab.partition import CertificationError
from renormlab.rotation import ContinuedFraction, tuned_map

GAMMA = (np.sqrt(5) - 1) / 2


@pytest.fixture(scope="module")
def rigid_golden(golden_cf):
    return tuned_map("RigidRotation", golden_cf)


@pytest.fixture(scope="module")
def pair10(arnold_golden, perturbed_golden, golden_cf):
    return orbit_conjugacy(arnold_golden, perturbed_golden, golden_cf, 10)


def test_self_pairing_is_identity(arnold_golden, golden_cf):
    oc = orbit_conjugacy(arnold_golden, arnold_golden, golden_cf, 8)
    np.testing.assert_array_equal(oc.x, oc.y)


def test_rigid_pairing_identity(rigid_golden, golden_cf):
    oc = orbit_conjugacy(rigid_golden, rigid_golden, golden_cf, 10)
    np.testing.assert_array_equal(oc.x, oc.y)
    assert qs_distortion(oc, 4) == 1.0


def test_arnold_vs_perturbed_certified(pair10):
    assert np.all(np.diff(pair10.x) > 0)
    assert np.all(np.diff(pair10.y) > 0)
    assert len(pair10) > 100


def test_symmetry(arnold_golden, perturbed_golden, golden_cf, pair10):
    back = orbit_conjugacy(perturbed_golden, arnold_golden, golden_cf, 10)
    inv = pair10.inverse()
    np.testing.assert_array_equal(back.x, inv.x)
    np.testing.assert_array_equal(back.y, inv.y)
    np.testing.assert_array_equal(back.index, inv.index)


def test_mismatched_rotation_numbers(arnold_golden, arnold_silver, golden_cf):
    with pytest.raises((ConjugacyError, CertificationError)):
        orbit_conjugacy(arnold_golden, arnold_silver, golden_cf, 10)


def test_conjugacy_csv(pair10):
    buf = io.StringIO()
    pair10.to_csv(buf)
    assert buf.getvalue().startswith("i,x,y\r\n0,0.0,0.0\r\n")


def test_qs_identity_exactly_one(pair10):
    ident = OrbitConjugacy(pair10.x, pair10.x, pair10.index, pair10.level)
    prof = qs_profile(ident, 6)
    assert prof and all(v == 1.0 for v in prof.values())


def test_qs_needs_pairs(arnold_golden, perturbed_golden, golden_cf):
    oc = orbit_conjugacy(arnold_golden, perturbed_golden, golden_cf, 6)
    with pytest.raises(ValueError):
        qs_profile(oc, 4)


def test_qs_stable_in_n(arnold_golden, perturbed_golden, golden_cf):
    vals = [qs_distortion(orbit_conjugacy(arnold_golden, perturbed_golden, golden_cf, n), 6)
            for n in (10, 12, 14)]
    assert all(1 < v < np.inf for v in vals)
    assert max(vals) / min(vals) <= 1.05


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-3.0, 3.0))
def test_qs_rotation_invariant(pair10, c):
    moved = OrbitConjugacy(pair10.x, pair10.y + c, pair10.index, pair10.level)
    a, b = qs_profile(pair10, 4), qs_profile(moved, 4)
    assert a.keys() == b.keys()
    for k in a:
        assert b[k] == pytest.approx(a[k], rel=1e-9)


def test_rigid_scaling_is_gamma(golden_cf):
    rot = MapSpec("RigidRotation", GAMMA)
    np.testing.assert_allclose(scaling_ratios(rot, golden_cf, 10), GAMMA, rtol=1e-9)


def test_golden_scaling_settles(arnold_golden, golden_cf):
    s = scaling_ratios(arnold_golden, golden_cf, 16)
    d = np.abs(np.diff(s))
    assert d[-4:].max() < 0.01 * d[:4].max()
    assert abs(s[-1] - GAMMA) > 0.1        # a different limit from the rigid one


def test_silver_scaling_settles(arnold_silver, silver_cf):
    s = scaling_ratios(arnold_silver, silver_cf, 9)
    d = np.abs(np.diff(s))
    assert d[-3:].max() < 0.1 * d[0]
    golden = scaling_ratios(tuned_map("Arnold", ContinuedFraction.constant(1, 20)),
                            ContinuedFraction.constant(1, 20), 12)
    assert abs(s[-1] - golden[-1]) > 0.05


def test_fit_same_map(arnold_golden, golden_cf):
    with pytest.raises(FitError, match="all differences zero"):
        rigidity_fit(arnold_golden, arnold_golden, golden_cf, 4, 12)


def test_fit_rigid_pair(rigid_golden, golden_cf):
    with pytest.raises(FitError):
        rigidity_fit(rigid_golden, rigid_golden, golden_cf, 4, 12)


def test_fit_span_guard(arnold_golden, perturbed_golden, golden_cf):
    with pytest.raises(ValueError):
        rigidity_fit(arnold_golden, perturbed_golden, golden_cf, 4, 7)


def test_fit_converges(arnold_golden, perturbed_golden, golden_cf):
    scan = rigidity_scan(arnold_golden, perturbed_golden, golden_cf, 4, 12)
    assert scan.fit.slope < 0
    assert scan.fit.r2 >= 0.8
    buf = io.StringIO()
    scan.to_csv(buf)
    assert buf.getvalue().splitlines()[0] == "n,rho_n,diff,log_diff"
