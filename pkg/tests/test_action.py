import numpy as np
import pytest

from annulus_action.action import (FLOW_AREA_TOL, AREA_TOL, ActionField, Normalization,
                                   action_value, calabi, default_area_tol, flux,
                                   flux_by_displacement, invariants, mean_action_of_measure)
from annulus_action.mapdef import parse_map_line
from annulus_action.surface import CoverPath, PrimitiveForm

RNG = np.random.default_rng(11)
PTS = np.column_stack([RNG.uniform(0, 1, 12), RNG.uniform(0, 1, 12)])


@pytest.mark.parametrize("a1, a0", [(1.0, 0.0), (0.5, 0.1), (-2.0, 0.3)])
def test_twist_action_closed_form(a1, a0):
    # f*(x dy) - x dy = a1 x dx, so g = a1 x^2 / 2 + const with g = theta1 at x = 1
    g = ActionField(parse_map_line(f"twist({a1}, {a0})"))
    ref = a1 * PTS[:, 0] ** 2 / 2 + (a1 + a0) - a1 / 2
    assert np.allclose(g.values(PTS), ref, atol=1e-12, rtol=0)
    assert calabi(g) == pytest.approx(a1 / 6 + a1 / 2 + a0, abs=1e-10)


def test_rotation_action_is_constant():
    g = ActionField(parse_map_line("rotation(0.3)"))
    assert np.allclose(g.values(PTS), 0.3, atol=1e-14)
    assert flux(g.map).flux == pytest.approx(0.3, abs=1e-14)


def test_normalizations():
    m = parse_map_line("twist(1, 0)")
    lower = ActionField(m, normalization=Normalization("lower"))
    assert action_value(lower, (0.0, 0.4)) == pytest.approx(0.0, abs=1e-15)
    assert action_value(lower, (1.0, 0.4)) == pytest.approx(0.5, abs=1e-13)
    pinned = ActionField(m, normalization=Normalization((0.5, 0.2), 7.0))
    assert action_value(pinned, (0.5, 0.9)) == pytest.approx(7.0, abs=1e-13)
    assert action_value(pinned, (1.0, 0.0)) == pytest.approx(7.375, abs=1e-13)
    assert "point" in pinned.normalization.describe()


def test_increment_matches_values(ex25_field):
    a, b = (0.2, 0.1), (0.6, 1.7)
    path = CoverPath.polyline([a, (0.9, 0.4), (0.4, -0.3), b])
    inc = ex25_field.increment(path)
    va, vb = ex25_field.values([a, b])
    assert inc == pytest.approx(vb - va, abs=1e-9)


def test_bump_twist_action_is_shift_invariant():
    # rotating about a center moves no area across radial lines far away
    m = parse_map_line("bump_twist((0.5, 0.5), 0.3, bump(r^2 / 0.09))")
    g = ActionField(m)
    far = np.array([[0.5, 0.05], [0.05, 0.5], [0.95, 0.9]])
    assert np.allclose(g.values(far), 0.0, atol=1e-12)


def test_flux_two_routes_composite():
    m = parse_map_line("compose(rotation(0.3), bump_twist((0.5, 0.5), 0.2, bump(r^2 / 0.04)), "
                       "twist(0.5, 0.1))")
    fr = flux(m)
    assert fr.path_gap < 1e-10
    assert fr.flux == pytest.approx(flux_by_displacement(m), abs=1e-9)
    assert fr.flux == pytest.approx(0.3 + 0.25 + 0.1, abs=1e-9)


def test_shifted_form_changes_g_by_coboundary():
    m = parse_map_line("twist(1, 0)")
    base = ActionField(m, normalization=Normalization((0.0, 0.0), 0.0))
    S = "sin(2 * pi * y) / 5"
    shifted = ActionField(m, PrimitiveForm("beta0").shifted(0.0, S),
                          Normalization((0.0, 0.0), 0.0))
    # g' - g = S o f - S + const; the constant vanishes at the anchor (fixed by f)
    x, y = PTS[:, 0], PTS[:, 1]
    diff = shifted.values(PTS) - base.values(PTS)
    ref = (np.sin(2 * np.pi * (y + x)) - np.sin(2 * np.pi * y)) / 5
    assert np.allclose(diff, ref, atol=1e-11)


def test_mean_action_of_measure_variants(twist_field):
    assert mean_action_of_measure(twist_field, "lebesgue") == pytest.approx(2 / 3, abs=1e-10)
    assert mean_action_of_measure(twist_field, [[0.5, 0.0], [0.5, 0.5]]) == \
        pytest.approx(0.625, abs=1e-13)
    with pytest.raises(ValueError):
        mean_action_of_measure(twist_field, "counting")


def test_default_area_tol():
    assert default_area_tol(parse_map_line("twist(1, 0)")) == AREA_TOL
    assert default_area_tol(parse_map_line("flow(x^2 * (1 - x)^2, 1, 0.1)")) == FLOW_AREA_TOL


def test_invariants_dict():
    inv = invariants(parse_map_line("twist(1, 0.25) on annulus[-1, 1]"))
    assert inv["theta0"] == pytest.approx(-0.75) and inv["theta1"] == pytest.approx(1.25)
    assert inv["F"] == pytest.approx(0.5, abs=1e-12)
    assert inv["g_A1"] == pytest.approx(1.25, abs=1e-13)
    assert inv["form"] == "x dy"

