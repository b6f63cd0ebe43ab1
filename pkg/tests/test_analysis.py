import math

import numpy as np
import pytest

from annulus_action import analysis as AN
from annulus_action.action import ActionField
from annulus_action.hull import convex_hull
from annulus_action.mapdef import parse_map_line
from annulus_action.orbits import Atlas, BirkhoffSample, PeriodicOrbit, find_periodic_orbits


@pytest.fixture(scope="module")
def twist_atlas(twist, twist_field):
    return find_periodic_orbits(twist, k_max=5, grid=16, field=twist_field)


@pytest.fixture(scope="module")
def twist_inv(twist, twist_field):
    return AN.compute_invariants(twist, twist_field)


def _orbit(rho_m, rho_k, action):
    return PeriodicOrbit(np.zeros((rho_k, 2)), rho_k, rho_m, action, 0.0)


def test_invariants(twist_inv):
    assert twist_inv.theta0 == 0.0 and twist_inv.theta1 == 1.0
    assert twist_inv.F == pytest.approx(0.5, abs=1e-12)
    assert twist_inv.Cal == pytest.approx(2 / 3, abs=1e-10)
    assert twist_inv.g_lower == pytest.approx(0.5, abs=1e-12)


def test_sandwich(twist, twist_field, twist_atlas, twist_inv):
    v = AN.check_sandwich(twist, twist_field, twist_atlas, cal=twist_inv.Cal)
    assert v.status == AN.WITNESS
    assert v.hypothesis_values["min_action"] == pytest.approx(0.5)
    assert v.hypothesis_values["max_action"] == pytest.approx(1.0)
    assert AN.recheck(v, twist_inv)


def test_sandwich_empty_atlas(twist, twist_field):
    v = AN.check_sandwich(twist, twist_field, Atlas(k_max=3), cal=0.5)
    assert v.status == AN.NO_WITNESS and "empty atlas" in v.notes[0]


def test_main_theorem_on_twist(twist, twist_field, twist_atlas, twist_inv):
    vs = {v.name: v for v in AN.check_main_theorem(twist, twist_field, twist_atlas,
                                                   a_values=(0.0, 0.5, 1.0, math.inf),
                                                   inv=twist_inv)}
    assert vs["bullet 1"].status == AN.WITNESS
    assert vs["bullet 2"].status == AN.WITNESS
    assert vs["bullet 3"].status == AN.WITNESS
    for name in ("bullet 1 (mirror)", "bullet 2 (mirror)", "bullet 3 (mirror)"):
        assert vs[name].status == AN.NOT_MET
    # bullet 1 witness really satisfies A >= Cal
    assert vs["bullet 1"].witness.mean_action >= twist_inv.Cal - 1e-6
    for v in vs.values():
        assert AN.recheck(v, twist_inv), v.name
        assert set(v.to_dict()) >= {"name", "status", "witness", "slack"}


def test_a_family_line_and_hypothesis(twist_inv):
    # at rho = theta0 the a-line passes through (Cal + a(2F - theta0))/(1 + a)
    for a in (0.0, 0.5, 2.0):
        assert AN.a_line(twist_inv, a, twist_inv.theta0) == pytest.approx(
            (twist_inv.Cal + a * (2 * twist_inv.F - twist_inv.theta0)) / (1 + a))
    assert AN.a_hypothesis(twist_inv, 0.0) == 1       # Cal > F
    assert AN.a_hypothesis(twist_inv, math.inf) == 1  # F > theta0
    with pytest.raises(ValueError):
        AN.a_line(twist_inv, math.inf, 0.0)


def test_a_family_no_witness():
    inv = AN.Invariants(0.0, 1.0, 0.5, 2 / 3, 0.5)
    atlas = Atlas([_orbit(1, 2, 0.1)], k_max=2)
    v, = AN.check_a_family(inv, atlas, (0.0,))
    assert v.status == AN.NO_WITNESS


def test_recheck_catches_bad_witness():
    inv = AN.Invariants(0.0, 1.0, 0.5, 2 / 3, 0.5)
    bad = AN.TheoremVerdict("bullet 1", "F < Cal", {}, "", AN.WITNESS, witness=_orbit(1, 2, 0.1))
    assert not AN.recheck(bad, inv)


def test_conjecture_readings(twist, twist_field, twist_atlas, twist_inv):
    vs = AN.check_conjecture(twist, twist_field, twist_atlas, inv=twist_inv)
    assert [v.name for v in vs] == ["conjecture (derived reading)", "conjecture (rotation reading)"]
    assert all(v.status == AN.WITNESS for v in vs)


def test_disk_statement_on_embedded_twist(twist, twist_atlas):
    import warnings
    from annulus_action.embedding import embed
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dm = embed(twist, 1.0)
    v = AN.check_hutchings_disk(dm, twist_atlas)
    # Cal(f_1) = 5/12 < 1
    assert v.hypothesis_values["Cal"] == pytest.approx(5 / 12, abs=1e-8)
    assert v.status == AN.WITNESS and v.slack >= 0


def test_disk_map_native():
    m = parse_map_line("disk_twist(1, 0)")
    fld = ActionField(m)
    atlas = find_periodic_orbits(m, k_max=3, grid=16, field=fld)
    v = AN.check_disk_map(m, fld, atlas)
    assert v.status == AN.WITNESS


def test_diagram(twist, twist_atlas, twist_inv):
    samples = [BirkhoffSample((0.3, 0.0), 10, 0.3, 0.545, 0.0)]
    d = AN.diagram_for(twist, twist_atlas, samples, (0.0, 1.0, math.inf), twist_inv)
    kinds = [p.kind for p in d.points]
    assert kinds.count("lebesgue") == 1 and kinds.count("birkhoff") == 1
    leb = d.lebesgue
    assert (leb.rho, leb.action) == pytest.approx((0.5, 2 / 3))
    assert AN.hull_contains_all(d)
    assert set(d.hull) == set(convex_hull([(p.rho, p.action) for p in d.points]))
    assert [l["a"] for l in d.a_lines] == [0.0, 1.0, math.inf]
    assert d.a_lines[1]["slope"] == -1.0
    assert d.rho_range == pytest.approx((0.0, 1.0))


def test_diagram_needs_points():
    with pytest.raises(ValueError):
        AN.build_diagram([])
