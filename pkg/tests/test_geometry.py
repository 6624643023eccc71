import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsndetect import geometry as g
from wsndetect.config import CANONICAL_REGION_ORDER, canonical_roi, canonical_sensors
from wsndetect.errors import ConfigError, CoverageError, DomainError

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def boolean_dep(sensors, roi=SQUARE, r_d=1.0):
    return g.Deployment(np.asarray(sensors, float), np.asarray(roi, float), 1.0, 1.0,
                        g.SensingModel.boolean(r_d))


def test_rho_boolean_cutoff_inclusive():
    m = g.SensingModel.boolean(1.0)
    assert g.rho(m, 1.0) == 1.0
    assert g.rho(m, 1.0 + 1e-12) == 0.0
    assert g.rho(m, 0.0) == 1.0


def test_rho_power_law_clamped():
    m = g.SensingModel.power_law(2.0)
    assert g.rho(m, 0.0) == 1.0
    assert g.rho(m, 0.5) == 1.0
    assert g.rho(m, 2.0) == pytest.approx(0.25)
    assert g.rho(m, math.inf) == 0.0


def test_rho_rejects_negative_distance():
    with pytest.raises(DomainError):
        g.rho(g.SensingModel.power_law(), -0.1)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.5, 4))
def test_rho_non_increasing(d1, d2, eta):
    lo, hi = sorted((d1, d2))
    for m in (g.SensingModel.power_law(eta), g.SensingModel.boolean(1.3)):
        assert g.rho(m, lo) >= g.rho(m, hi)
        assert 0.0 <= g.rho(m, hi) <= 1.0


def test_ranges_power_law_closed_form():
    dep = g.Deployment(canonical_sensors(), canonical_roi(), 1.0, 1.0, g.SensingModel.power_law(2.0))
    r = g.compute_ranges(dep, 1.0, 1.0 / 9.0)
    assert r.r_d == pytest.approx(1.0)
    assert r.r_i == pytest.approx(1.5)
    # detection range: the largest distance still giving mean >= mu1
    dep4 = g.Deployment(canonical_sensors(), canonical_roi(), 4.0, 1.0, g.SensingModel.power_law(2.0))
    assert g.compute_ranges(dep4, 1.0, 0.5).r_d == pytest.approx(2.0)


def test_omega_inverse_round_trip():
    m = g.SensingModel.power_law(2.0)
    assert g.omega0_for_influence_range(m, 1.0, 1.5) == pytest.approx(1.0 / 9.0)


@given(st.floats(0.05, 0.95), st.floats(1.0, 10.0), st.floats(1.0, 3.0))
def test_influence_range_definition(omega, h_e, eta):
    dep = g.Deployment([[0.0, 0.0]], SQUARE, h_e, 1.0, g.SensingModel.power_law(eta))
    r = g.compute_ranges(dep, 1.0, omega)
    assert r.r_i >= r.r_d
    lhs = 2 * g.rho(dep.model, r.r_i)
    rhs = (1 - omega) * g.rho(dep.model, r.r_d)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_ranges_boolean():
    dep = boolean_dep([[0.5, 0.5]])
    r = g.compute_ranges(dep, 1.0, 0.3)
    assert r.r_d == r.r_i == 1.0


def test_ranges_reject_mu1_above_signal():
    with pytest.raises(ConfigError):
        g.compute_ranges(boolean_dep([[0.5, 0.5]]), 2.0, 0.5)


def test_deployment_validation():
    with pytest.raises(ConfigError):
        boolean_dep([[2.0, 2.0]])
    with pytest.raises(ConfigError):
        g.Deployment([[0.5, 0.5]], SQUARE, 1.0, 0.0, g.SensingModel.boolean())


def test_single_sensor_partition():
    dep = boolean_dep([[0.5, 0.5]])
    p = g.build_partition(dep, g.compute_ranges(dep, 1.0, 0.5), 0.02)
    assert p.n_regions == 1
    assert p.sets == [frozenset({1})]
    assert p.region(1).area == pytest.approx(1.0, abs=1e-9)


def test_two_sensor_partition_lexicographic():
    dep = boolean_dep([[0.0, 0.5], [1.0, 0.5]], r_d=0.8)
    p = g.build_partition(dep, g.compute_ranges(dep, 1.0, 0.5), 0.01)
    assert p.sets == [frozenset({1}), frozenset({1, 2}), frozenset({2})]


def test_coverage_hole_names_point():
    dep = boolean_dep([[0.0, 0.0]], r_d=0.5)
    with pytest.raises(CoverageError) as info:
        g.build_partition(dep, g.compute_ranges(dep, 1.0, 0.5), 0.05)
    x, y = info.value.point
    assert math.hypot(x, y) > 0.5
    assert "coverage" in str(info.value)


@pytest.mark.parametrize("h", [0.01, 0.005])
def test_hexagon_partition_sets(h):
    dep = boolean_dep(canonical_sensors(), canonical_roi())
    p = g.build_partition(dep, g.compute_ranges(dep, 1.0, 0.5), h, order=CANONICAL_REGION_ORDER)
    assert p.sets == [frozenset(s) for s in CANONICAL_REGION_ORDER]


def test_hexagon_partition_areas_sum_to_roi(hex_boolean):
    total = sum(r.area for r in hex_boolean.regions)
    assert total == pytest.approx(hex_boolean.deployment.polygon.area, rel=0.01)


def test_partition_matches_pointwise_oracle(hex_boolean):
    # classify random points directly from distances and compare with the partition
    rng = np.random.default_rng(5)
    dep = hex_boolean.deployment
    pts = rng.uniform(-1, 1, size=(3000, 2))
    pts = pts[dep.contains(pts)]
    for x in pts[:500]:
        d = np.sqrt(((dep.sensors - x) ** 2).sum(axis=1))
        cover = frozenset(int(i) + 1 for i in range(dep.n) if d[i] <= 1.0)
        assert hex_boolean.region(hex_boolean.locate(x)).sensors == cover


def test_reference_points_lie_in_their_regions(hex_boolean, hex_pathloss):
    for part in (hex_boolean, hex_pathloss):
        for r in part.regions:
            assert g.detection_cover_set(part.deployment, part.ranges, r.reference) == r.sensors


def test_pathloss_partition_has_same_sets(hex_boolean, hex_pathloss):
    assert hex_boolean.sets == hex_pathloss.sets


def test_influence_cover_contains_detection_cover(hex_pathloss):
    dep, ranges = hex_pathloss.deployment, hex_pathloss.ranges
    for r in hex_pathloss.regions:
        x = g.worst_case_point(hex_pathloss, r.region_id)
        assert r.sensors <= g.influence_cover_set(dep, ranges, x)


def test_influence_cover_outside_roi():
    dep = boolean_dep([[0.5, 0.5]])
    with pytest.raises(DomainError):
        g.influence_cover_set(dep, g.compute_ranges(dep, 1.0, 0.5), (3.0, 3.0))


def test_worst_case_point_maximises_min_distance(hex_boolean):
    r = hex_boolean.region(2)
    x = np.array(g.worst_case_point(hex_boolean, 2))
    sens = hex_boolean.deployment.sensors[np.array(sorted(r.sensors)) - 1]
    best = np.sqrt(((sens - x) ** 2).sum(axis=1)).min()
    d = np.sqrt(((r.points[:, None, :] - sens[None]) ** 2).sum(axis=2)).min(axis=1)
    assert best == pytest.approx(d.max())


def test_partition_csv(tmp_path, hex_boolean):
    path = tmp_path / "p.csv"
    hex_boolean.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "region_id,sensor_set,reference_x,reference_y,area_estimate"
    assert len(lines) == 13
    assert lines[1].startswith('1,"1,3,4,6",')


def test_mask_round_trip():
    for s in ({1}, {1, 3, 7}, set(range(1, 63))):
        assert g._bits_to_set(g.set_to_mask(s)) == frozenset(s)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95)), min_size=2, max_size=5))
def test_random_partition_refinement_invariant(points):
    # sets found at two resolutions agree, up to slivers thinner than the coarse grid
    dep = boolean_dep(points, r_d=1.5)
    ranges = g.compute_ranges(dep, 1.0, 0.5)
    fine = g.build_partition(dep, ranges, 0.01)
    coarse = g.build_partition(dep, ranges, 0.02)
    assert set(coarse.sets) <= set(fine.sets)
    for r in fine.regions:
        if r.area > 0.01:
            assert r.sensors in coarse.sets
