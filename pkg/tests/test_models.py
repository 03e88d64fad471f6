import numpy as np
import pytest

import oracles as O
from confstat import kinematics_at, models
from confstat.conformal import grid_points
from confstat.errors import ConfigError, NormalizationError, SignatureError


def _grid(model, n=5):
    lo, hi = model.reference_region
    pts = grid_points(lo, hi, n)
    return pts[model.contains(pts)]


@pytest.mark.parametrize("family", O.SHIPPED)
def test_documented_expectations_hold_on_grid(family):
    m = models.instantiate(family)
    pts = _grid(m)
    s = kinematics_at(m, pts)
    e = m.expectations
    theta = np.broadcast_to(np.asarray(e["theta"](pts), float), s.theta.shape)
    assert np.max(np.abs(s.theta - theta)) < 1e-8
    for flag, norm in (("shear_vanishes", s.shear_norm), ("rotation_vanishes", s.rotation_norm), ("accel_vanishes", s.accel_norm)):
        if e[flag]:
            assert np.max(norm) < 1e-8, flag
        else:
            assert np.max(norm) > 1e-3, flag
    if "rotation_norm" in e:
        assert np.allclose(s.rotation_norm, e["rotation_norm"], atol=1e-8)


@pytest.mark.parametrize("family", O.SHIPPED)
def test_expectation_flags_match_brute_force_oracle(family, rng):
    m = models.instantiate(family)
    for p in O.random_points(m, 3, rng):
        b = O.brute_force_kinematics(m, p)
        assert abs(b["theta"] - float(np.asarray(m.expectations["theta"](p)))) < 1e-6
        if m.expectations["shear_vanishes"]:
            assert np.max(np.abs(b["shear"])) < 1e-6
        if m.expectations["rotation_vanishes"]:
            assert np.max(np.abs(b["rotation"])) < 1e-6


def test_goedel_rotation_magnitude_pinned_by_oracle(goedel):
    p = np.array([0.3, 0.2, 0.1, -0.4])
    b = O.brute_force_kinematics(goedel, p)
    s = kinematics_at(goedel, p)
    from confstat.geometry import frame_norm

    oracle_norm = frame_norm(b["rotation"], s.g_inv, s.V)
    assert oracle_norm == pytest.approx(goedel.expectations["rotation_norm"], rel=1e-6)
    assert oracle_norm == pytest.approx(np.sqrt(2.0) * 1.0, rel=1e-6)


def test_flrw_parameters(flrw):
    assert flrw.params["H"] == 0.1
    p = np.array([[0.5, 0.1, 0.2, 0.3]])
    assert kinematics_at(flrw, p).theta[0] == pytest.approx(0.3, abs=1e-14)
    assert flrw.expectations["connecting_function"](p)[0] == pytest.approx(np.exp(0.05), rel=1e-14)


def test_unknown_family_and_bad_parameters():
    with pytest.raises(ConfigError):
        models.instantiate("schwarzschild")
    with pytest.raises(ConfigError):
        models.instantiate("minkowski_boosted", beta=1.5)


def test_custom_copy_matches_builtin_bit_for_bit(mink, rng):
    custom = models.register_custom(mink.metric, mink.observer, mink.lo, mink.hi, name="copy")
    pts = O.random_points(mink, 20, rng)
    a, b = kinematics_at(mink, pts), kinematics_at(custom, pts)
    for name in ("theta", "shear", "rotation", "accel", "rho", "d_rho", "nabla"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_custom_wrong_signature_rejected():
    with pytest.raises(SignatureError) as exc:
        models.register_custom(
            lambda x: [[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]],
            lambda x: [1.0, 0, 0, 0],
            [-1] * 4,
            [1] * 4,
        )
    assert exc.value.event is not None


def test_custom_unnormalized_observer_rejected():
    with pytest.raises(NormalizationError, match="-4"):
        models.register_custom(
            lambda x: [[-1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]],
            lambda x: [2.0, 0, 0, 0],
            [-1] * 4,
            [1] * 4,
        )


def test_custom_past_pointing_observer_rejected():
    with pytest.raises(NormalizationError, match="future"):
        models.register_custom(
            lambda x: [[-1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]],
            lambda x: [-1.0, 0, 0, 0],
            [-1] * 4,
            [1] * 4,
        )


def test_custom_box_validation():
    with pytest.raises(ConfigError):
        models.register_custom(lambda x: None, lambda x: None, [0, 0, 0, 0], [1, 1, 1, 0])


def test_contains_uses_extra_predicate():
    m = models.instantiate("minkowski_rotating")
    assert m.contains([0.0, 0.1, 0.1, 0.0])
    r = 1.0 / m.params["Omega"]
    assert not m.contains([0.0, 0.8 * r, 0.8 * r, 0.0])
    assert m.axis("y") == 2
    with pytest.raises(ConfigError):
        m.axis("r")
