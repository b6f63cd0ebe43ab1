"""End-to-end checks, one marker per acceptance criterion.

Run ``pytest tests/test_acceptance.py`` to get the PASS/FAIL summary.
"""
import math
import warnings
from fractions import Fraction
from math import gcd

import numpy as np
import pytest

from annulus_action import analysis as AN
from annulus_action.action import (ActionField, action_difference_check, calabi,
                                   composition_additivity_check, exact_shift_check, flux,
                                   flux_by_displacement)
from annulus_action.cli import main
from annulus_action.embedding import calabi_of_fa, center_action, embed, orbit_action_transform
from annulus_action.hull import convex_hull
from annulus_action.mapdef import detect_boundary_rotations, parse_map_line
from annulus_action.orbits import ActionTable, birkhoff_many, find_periodic_orbits
from annulus_action.specfile import load_spec
from annulus_action.surface import CoverPath, line_integrals

from conftest import fixture_text
from hull_oracle import brute_hull_vertices

COMPOSITE = ("compose(rotation(0.3), bump_twist((0.5, 0.5), 0.2, bump(r^2 / 0.04)), "
             "twist(0.5, 0.1))")
A_VALUES = (0.0, 0.5, 1.0, 2.0, 10.0)


@pytest.fixture(scope="module")
def composite():
    return parse_map_line(COMPOSITE)


@pytest.fixture(scope="module")
def twist_atlas(twist, twist_field):
    return find_periodic_orbits(twist, k_max=5, grid=16, field=twist_field)


@pytest.fixture(scope="module")
def ex25_atlas(ex25, ex25_field):
    return find_periodic_orbits(ex25, k_max=2, grid=16, field=ex25_field)


def _twist_orbit(atlas, k, m):
    return next(o for o in atlas if (o.k, o.m) == (k, m))


# 1 -------------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_example_4_1_closed_forms():
    spec = load_spec(fixture_text("example_4_1.spec"))
    m = spec.map
    br = detect_boundary_rotations(m)
    assert br.theta_upper == pytest.approx(1.25, abs=1e-8)
    assert br.theta_lower == pytest.approx(-0.75, abs=1e-8)
    assert flux(m).flux == pytest.approx(0.5, abs=1e-8)
    rng = np.random.default_rng(41)
    pts = np.column_stack([rng.uniform(-1, 1, 50), rng.uniform(0, 1, 50)])
    g = ActionField(m, normalization=spec.normalization).values(pts)
    assert np.max(np.abs(g - (pts[:, 0] ** 2 / 2 + 0.75))) <= 1e-8


# 2 -------------------------------------------------------------------------

def _random_path(rng, a, b, chart):
    # any polyline in the strip between fixed lifts is homotopic to any other
    n = int(rng.integers(1, 4))
    mid = np.column_stack([rng.uniform(chart.x_min, chart.x_max, n),
                           rng.uniform(-1.0, 2.0, n)])
    return CoverPath.polyline([a, *map(tuple, mid), b])


@pytest.mark.criterion(2)
@pytest.mark.parametrize("which", ["twist", "ex25"])
def test_path_independence(which, twist_field, ex25_field):
    fld = twist_field if which == "twist" else ex25_field
    chart = fld.chart
    rng = np.random.default_rng(2)
    paths = []
    for _ in range(20):
        a = (rng.uniform(chart.x_min, chart.x_max), rng.uniform(-1.0, 2.0))
        b = (rng.uniform(chart.x_min, chart.x_max), rng.uniform(-1.0, 2.0))
        paths += [_random_path(rng, a, b, chart) for _ in range(3)]
    # one batched quadrature over all 60 paths
    segs = [s for p in paths for s in p.segments]
    owner = np.repeat(np.arange(len(paths)), [len(p.segments) for p in paths])
    incs = np.zeros(len(paths))
    np.add.at(incs, owner, line_integrals(segs, fld.oneform, fld.tol, chart))
    incs = incs.reshape(20, 3)
    assert np.max(incs.max(axis=1) - incs.min(axis=1)) <= 1e-8


# 3 -------------------------------------------------------------------------

@pytest.mark.criterion(3)
@pytest.mark.parametrize("which", ["twist", "ex25", "composite"])
def test_inner_boundary_value_is_flux(which, twist_field, ex25_field, composite):
    fld = {"twist": twist_field, "ex25": ex25_field}.get(which) or ActionField(composite)
    g_lo, g_hi = fld.boundary_values
    br = detect_boundary_rotations(fld.map)
    assert g_hi == pytest.approx(br.theta_upper, abs=1e-12)
    assert g_lo == pytest.approx(flux(fld.map).flux, abs=1e-8)


# 4 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def embedded():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {a: embed(parse_map_line("twist(1, 0)"), a) for a in A_VALUES}


@pytest.mark.criterion(4)
@pytest.mark.parametrize("a", A_VALUES)
def test_embedding_two_routes(a, embedded, twist_atlas):
    dm = embedded[a]
    pairs = [center_action(dm), calabi_of_fa(dm)]
    pairs += [orbit_action_transform(dm, o) for o in twist_atlas]
    for direct, formula in pairs:
        assert direct == pytest.approx(formula, abs=1e-6)


@pytest.mark.criterion(4)
def test_embedding_spot_values(embedded, twist_atlas):
    dm = embedded[1.0]
    assert center_action(dm)[0] == pytest.approx(0.25, abs=1e-6)
    assert calabi_of_fa(dm)[0] == pytest.approx(5 / 12, abs=1e-6)
    assert orbit_action_transform(dm, _twist_orbit(twist_atlas, 2, 1))[0] == \
        pytest.approx(9 / 16, abs=1e-6)


# 5 -------------------------------------------------------------------------

@pytest.mark.criterion(5)
def test_sandwich(twist, twist_field, twist_atlas):
    cal = calabi(twist_field)
    v = AN.check_sandwich(twist, twist_field, twist_atlas, tol=1e-6, cal=cal)
    lo, hi = v.hypothesis_values["min_action"], v.hypothesis_values["max_action"]
    assert lo == pytest.approx(0.5, abs=1e-6)
    assert cal == pytest.approx(2 / 3, abs=1e-6)
    assert hi == pytest.approx(1.0, abs=1e-6)
    assert lo <= cal <= hi and v.status == AN.WITNESS


# 6 -------------------------------------------------------------------------

@pytest.mark.criterion(6)
def test_main_theorem_twist(twist, twist_field, twist_atlas):
    assert twist_atlas.k_max <= 5
    vs = {v.name: v for v in AN.check_main_theorem(twist, twist_field, twist_atlas)}
    for name in ("bullet 1", "bullet 3"):
        assert vs[name].status == AN.WITNESS
        assert vs[name].witness.k <= 5


@pytest.mark.criterion(6)
def test_main_theorem_ex25(ex25, ex25_field, ex25_atlas):
    assert len(ex25_atlas) >= 1
    vs = AN.check_main_theorem(ex25, ex25_field, ex25_atlas)
    assert any(v.status == AN.WITNESS for v in vs)
    inv = AN.compute_invariants(ex25, ex25_field)
    assert all(AN.recheck(v, inv) for v in vs)


# 7 -------------------------------------------------------------------------

@pytest.mark.criterion(7)
@pytest.mark.parametrize("which", ["twist", "ex25", "composite"])
def test_flux_two_routes(which, twist, ex25, composite):
    m = {"twist": twist, "ex25": ex25, "composite": composite}[which]
    assert flux(m).flux == pytest.approx(flux_by_displacement(m, tol=1e-8), abs=1e-6)


# 8 -------------------------------------------------------------------------

@pytest.mark.criterion(8)
@pytest.mark.parametrize("c", [0.5, -0.3])
def test_action_difference(c, twist, twist_atlas):
    orbits = [o for o in twist_atlas if o.k >= 2][:4]
    assert len(orbits) >= 3
    for lhs, rhs in action_difference_check(twist, c, (1.0, 0.0), orbits):
        assert lhs == pytest.approx(rhs, abs=1e-8)


@pytest.mark.criterion(8)
def test_action_difference_spot_value(twist, twist_atlas):
    (lhs, rhs), = action_difference_check(twist, 0.5, (1.0, 0.0), [_twist_orbit(twist_atlas, 2, 1)])
    assert lhs == pytest.approx(-0.25, abs=1e-8)
    assert rhs == pytest.approx(-0.25, abs=1e-8)


# 9 -------------------------------------------------------------------------

@pytest.mark.criterion(9)
@pytest.mark.parametrize("text", ["twist(1, 0)", COMPOSITE])
def test_exact_shift(text):
    fld = ActionField(parse_map_line(text))
    assert exact_shift_check(fld, "sin(2*pi*y) * x^2 / 3 + cos(2*pi*y) / 7", n_orbits=6) < 1e-8


@pytest.mark.criterion(9)
@pytest.mark.parametrize("f1, f2", [("rotation(0.3)", "rotation(0.45)"),
                                    ("twist(1, 0)", "rotation(0.3)")])
def test_composition_additivity(f1, f2):
    lhs, rhs = composition_additivity_check(parse_map_line(f1), parse_map_line(f2), (0.4, 0.3))
    assert abs(lhs - rhs) < 1e-8


# 10 ------------------------------------------------------------------------

@pytest.mark.criterion(10)
def test_example_4_2_single_point():
    spec = load_spec(fixture_text("example_4_2.spec"))
    m, t = spec.map, spec.tasks
    c = 1 / math.sqrt(2)
    fld = ActionField(m)
    atlas = find_periodic_orbits(m, k_max=12, grid=t["grid"], field=fld)
    assert len(atlas) == 0
    rng = np.random.default_rng(t["seed"])
    starts = rng.uniform(0, 1, (t["birkhoff_starts"], 2))
    samples = birkhoff_many(m, fld, starts, t["birkhoff_n"])
    d = AN.diagram_for(m, atlas, samples, (), AN.compute_invariants(m, fld))
    for p in d.points:
        assert abs(p.rho - c) <= 1e-10 and abs(p.action - c) <= 1e-10
    assert len(d.hull) == 1


# 11 ------------------------------------------------------------------------

@pytest.mark.criterion(11)
def test_example_4_3_rotation_constant_action_varies():
    spec = load_spec(fixture_text("example_4_3.spec"))
    m, t = spec.map, spec.tasks
    assert (t["birkhoff_starts"], t["birkhoff_n"]) == (100, 4000)
    fld = ActionField(m)
    rng = np.random.default_rng(t["seed"])
    # uniform in area on the unit disk
    starts = np.column_stack([np.sqrt(rng.uniform(0, 1, 100)), rng.uniform(0, 1, 100)])
    table = ActionTable(fld)
    samples = birkhoff_many(m, fld, starts, 4000, table)
    rho = np.array([s.rho_estimate for s in samples])
    act = np.array([s.action_average for s in samples])
    assert np.max(np.abs(rho - 0.25)) <= 1e-3
    # the spread survives the worst spline error at both extremes
    assert act.max() - act.min() - 2 * table.max_error > 0.1


# 12 ------------------------------------------------------------------------

@pytest.mark.criterion(12)
def test_twist_orbits_match_analytic_set(twist_atlas):
    # x = m/k circles for every reduced m/k in [0, 1] with k <= 5
    expected = {(k, m) for k in range(1, 6) for m in range(k + 1) if gcd(m, k) == 1}
    got = [(o.k, o.m) for o in twist_atlas]
    assert sorted(got) == sorted(expected)
    for o in twist_atlas:
        assert np.all(o.points[:, 0] == pytest.approx(o.m / o.k, abs=1e-12))
        assert Fraction(o.m, o.k) == o.rho


@pytest.mark.criterion(12)
def test_hull_matches_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(25):
        pts = rng.uniform(-1, 1, (100, 2))
        assert set(convex_hull(pts)) == brute_hull_vertices(pts)


# 13 ------------------------------------------------------------------------

def _det_gap(m, n=32):
    c = m.chart
    u = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c.x_min + (c.x_max - c.x_min) * u, u, indexing="ij")
    return float(np.max(np.abs(m.area_jacobian(X.ravel(), Y.ravel()) - 1.0)))


@pytest.mark.criterion(13)
@pytest.mark.parametrize("name", ["twist.spec", "example_4_1.spec", "example_4_2.spec",
                                  "example_4_3.spec"])
def test_closed_form_area(name):
    assert _det_gap(load_spec(fixture_text(name)).map) <= 1e-9


@pytest.mark.criterion(13)
def test_flow_area(ex25):
    assert _det_gap(ex25, 16) <= 1e-5


@pytest.mark.criterion(13)
@pytest.mark.parametrize("spec, cmd, extra", [
    ("twist.spec", "verify", []),
    ("twist.spec", "diagram", ["--format", "svg"]),
    ("example_2_5.spec", "orbits", ["--kmax", "1"]),
])
def test_workers_byte_identical(tmp_path, spec, cmd, extra):
    src = tmp_path / spec
    src.write_text(fixture_text(spec))
    outputs = set()
    for w in (1, 4, 8):
        out = tmp_path / f"w{w}"
        assert main([cmd, "--spec", str(src), "--out", str(out), "--workers", str(w), *extra]) == 0
        outputs.add(tuple(sorted((f.name, f.read_bytes()) for f in out.iterdir())))
    assert len(outputs) == 1
