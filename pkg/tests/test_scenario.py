"""Scenario loading and validation."""

import json

import pytest

from tgsim.scenario import (
    GeometryError,
    SchemaError,
    bundled_scenario,
    load_scenario,
    scenario_from_dict,
)


@pytest.fixture
def base():
    return bundled_scenario("construction_site").to_dict()


def test_construction_site_geometry():
    scn = bundled_scenario("construction_site")
    assert abs(scn.start_goal_distance() - 60.0) <= 2.0
    assert scn.contains(*scn.start_pose[:2])
    assert not scn.in_obstacle(*scn.start_pose[:2])
    assert scn.contains(*scn.goal_xy)
    assert scn.goal_radius == 1.0
    assert scn.limits.v_max == pytest.approx(5.0 / 3.6)
    assert scn.handover_delay_ms == 35700.0


def test_round_trip_dict(base):
    scn = scenario_from_dict(base)
    assert scn.to_dict() == base


def test_goal_inside_obstacle_rejected(base):
    base["goal"] = {"x": 34.0, "y": 2.0, "radius": 1.0}
    with pytest.raises(GeometryError):
        scenario_from_dict(base)


def test_start_outside_bounds_rejected(base):
    base["start_pose"] = [100.0, 0.0, 0.0]
    with pytest.raises(GeometryError):
        scenario_from_dict(base)


def test_empty_obstacles_is_valid_open_field(base):
    base["obstacles"] = []
    scn = scenario_from_dict(base)
    assert scn.obstacles == ()


def test_missing_fields_schema_error(base):
    del base["limits"]
    with pytest.raises(SchemaError):
        scenario_from_dict(base)


def test_bad_polygon_schema_error(base):
    base["bounds"] = [[0, 0], [1, 1]]
    with pytest.raises(SchemaError):
        scenario_from_dict(base)


def test_load_from_file(tmp_path, base):
    p = tmp_path / "scn.json"
    p.write_text(json.dumps(base))
    scn = load_scenario(p)
    assert scn.name == "construction_site"


def test_malformed_json_schema_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_scenario(p)


def test_cw_polygons_normalized(base):
    base["obstacles"] = [list(reversed(base["obstacles"][0]))]
    scn = scenario_from_dict(base)
    from tgsim.geometry import polygon_area_signed
    assert polygon_area_signed(scn.obstacles[0]) > 0
