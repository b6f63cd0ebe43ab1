import numpy as np
import pytest

from annulus_action.errors import (AreaPreservationError, NotRigidNearBoundary, ParseError,
                                   ValidationError)
from annulus_action.mapdef import (compose, detect_boundary_rotations, jacobian,
                                   parse_map_line, parse_map_spec)

CLOSED_FORM = [
    "twist(1, 0)",
    "twist(1, 0.25) on annulus[-1, 1]",
    "rotation(0.3)",
    "compose(rotation(0.3), twist(0.5, 0.1))",
    "bump_twist((0.5, 0.5), 0.3, 2 * bump(r / 0.3))",
    "compose(rotation(0.3), bump_twist((0.5, 0.5), 0.2, bump(r^2 / 0.04)), twist(0.5, 0.1))",
    "disk_twist(1, 0)",
    "compose(disk_rotation(0.1), bump_twist((0.5, 0.2), 0.3, bump(r / 0.3)))",
]


def _grid(chart, n=24):
    u = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(chart.x_min + (chart.x_max - chart.x_min) * u, u + 0.01, indexing="ij")
    return X.ravel(), Y.ravel()


@pytest.mark.parametrize("text", CLOSED_FORM)
def test_area_preserving_closed_form(text):
    m = parse_map_line(text)
    x, y = _grid(m.chart)
    assert np.max(np.abs(m.area_jacobian(x, y) - 1.0)) <= 1e-9


@pytest.mark.parametrize("text", CLOSED_FORM[:6])
def test_jacobian_matches_finite_differences(text):
    m = parse_map_line(text)
    x, y = _grid(m.chart, 7)
    x = np.clip(x, m.chart.x_min + 1e-4, m.chart.x_max - 1e-4)
    _, _, J = m.lift_jacobian(x, y)
    h = 1e-6
    Xp, Dp = m.lift(x + h, y)
    Xm, Dm = m.lift(x - h, y)
    assert np.allclose(J[:, 0, 0], (Xp - Xm) / (2 * h), atol=1e-6)
    assert np.allclose(J[:, 1, 0], (Dp - Dm) / (2 * h), atol=1e-6)
    Xp, Dp = m.lift(x, y + h)
    Xm, Dm = m.lift(x, y - h)
    assert np.allclose(J[:, 0, 1], (Xp - Xm) / (2 * h), atol=1e-6)
    assert np.allclose(J[:, 1, 1], 1.0 + (Dp - Dm) / (2 * h), atol=1e-6)


def test_twist_closed_form():
    m = parse_map_line("twist(1, 0.25) on annulus[-1, 1]")
    X, D = m.lift(np.array([-1.0, 0.0, 0.5]), np.array([0.2, 0.4, 0.9]))
    assert X.tolist() == [-1.0, 0.0, 0.5]
    assert D.tolist() == [-0.75, 0.25, 0.75]


def test_compose_rightmost_first():
    # twist then rotation vs rotation then twist differ only through x, which
    # neither changes, so probe with a bump that moves x
    bump = parse_map_line("bump_twist((0.5, 0.5), 0.3, bump(r / 0.3))")
    rot = parse_map_line("rotation(0.25)")
    p = np.array([[0.55, 0.45]])
    after = compose(rot, bump)(p)
    before = compose(bump, rot)(p)
    assert np.allclose(after, rot(bump(p)))
    assert np.allclose(before, bump(rot(p)))
    assert not np.allclose(after, before)


def test_isotopy_scales_parameters():
    m = parse_map_line("compose(rotation(0.3), twist(1, 0))")
    X, D = m.lift(np.array([0.5]), np.array([0.0]), t=0.5)
    assert D[0] == pytest.approx(0.5 * 0.3 + 0.5 * 0.5)


@pytest.mark.parametrize("text, thetas", [
    ("twist(1, 0)", (0.0, 1.0)),
    ("twist(1, 0.25) on annulus[-1, 1]", (-0.75, 1.25)),
    ("rotation(0.3)", (0.3, 0.3)),
    ("compose(rotation(0.3), bump_twist((0.5, 0.5), 0.2, bump(r / 0.2)))", (0.3, 0.3)),
])
def test_boundary_rotations(text, thetas):
    br = detect_boundary_rotations(parse_map_line(text))
    assert br.thetas == pytest.approx(thetas, abs=1e-15)


def test_rigid_bands():
    br = detect_boundary_rotations(parse_map_line("rotation(0.3)"))
    assert br.band_lower > 0.2 and br.band_upper > 0.2
    br = detect_boundary_rotations(parse_map_line("twist(1, 0)"))
    assert br.band_lower == 0.0 and br.band_upper == 0.0


def test_not_rigid_boundary():
    m = parse_map_line("flow(sin(2 * pi * y) * x, 0.1, 0.05)")
    with pytest.raises(NotRigidNearBoundary):
        detect_boundary_rotations(m)


def test_flow_area_jacobian():
    m = parse_map_line("flow(x^2 * (1 - x)^2 * sin(2 * pi * y), 0.5, 0.05)")
    x, y = _grid(m.chart, 10)
    assert np.max(np.abs(m.area_jacobian(x, y) - 1.0)) <= 1e-5


@pytest.mark.parametrize("text, exc, match", [
    ("twist(1)", ParseError, "arity"),
    ("flow(x + z, 1)", ValidationError, "unknown identifier 'z'"),
    ("disk_twist(1, 0) on annulus[0, 1]", ValidationError, "disk leaf"),
    ("bump_twist((0.5, 0.5), 0.6, bump(r / 0.6))", ValidationError, "inside the annulus"),
    ("bump_twist((0.5, 0.5), 0.3, 1 + r)", ValidationError, "vanish"),
    ("bump_twist(0.5, 0.3, bump(r))", ValidationError, "pair"),
    ("flow(x, 1, -0.1)", ValidationError, "positive"),
    ("twist(1, 0) on torus", ParseError, "unknown chart"),
])
def test_map_errors(text, exc, match):
    with pytest.raises(exc, match=match):
        parse_map_line(text)


def test_area_check_rejects_bad_map(monkeypatch):
    from annulus_action import mapdef
    orig = mapdef._Shear.jac

    def bad_jac(self, x, y):
        X, D, J = orig(self, x, y)
        J = J.copy()
        J[..., 0, 0] *= 1.01
        return X, D, J
    monkeypatch.setattr(mapdef._Shear, "jac", bad_jac)
    with pytest.raises(AreaPreservationError):
        parse_map_line("twist(1, 0)")


def test_hash_and_text_round_trip():
    m = parse_map_line("compose(rotation(1/sqrt(2)), twist(1, 0.25)) on annulus[-1, 1]")
    again = parse_map_spec(m.to_text())
    assert again == m
    assert again.hash == m.hash
    assert m.hash != parse_map_line("twist(1, 0.25) on annulus[-1, 1]").hash


def test_call_reduces_angle():
    m = parse_map_line("rotation(0.75)")
    assert np.allclose(m(np.array([0.5, 0.5])), [0.5, 0.25])
    assert jacobian(m, np.array([0.5, 0.5])).shape == (2, 2)
