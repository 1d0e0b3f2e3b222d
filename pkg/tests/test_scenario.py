import json

import pytest

from iofm import scenario
from iofm.errors import ScenarioError


@pytest.mark.parametrize("name", scenario.BUNDLED)
def test_bundled_scenarios_are_valid(name):
    sc = scenario.load(name)
    assert scenario.validate_document(sc.raw) == []
    assert sc.events


def _fig1_doc():
    text, _ = scenario.read_source("fig1-mixed")
    return json.loads(text)


def _codes(doc):
    with pytest.raises(ScenarioError) as info:
        scenario.build(doc)
    return {v.code for v in info.value.violations}


def test_dangling_reference():
    doc = _fig1_doc()
    doc["topology"]["components"].append({"id": "ghost", "owner": "P9"})
    assert "dangling-reference" in _codes(doc)


def test_unknown_event_type():
    doc = _fig1_doc()
    doc["simulation"]["events"].append({"tick": 3, "type": "meteor"})
    assert _codes(doc) == {"event-type"}


def test_event_on_unknown_component():
    doc = _fig1_doc()
    doc["simulation"]["events"].append({"tick": 3, "type": "fault", "component": "nope"})
    assert "dangling-reference" in _codes(doc)


def test_missing_section():
    doc = _fig1_doc()
    del doc["management"]
    assert _codes(doc) == {"missing-section"}


def test_empty_file(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("  \n")
    with pytest.raises(ScenarioError, match="empty"):
        scenario.load(p)


def test_json_error_reports_line_and_text(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "name": "x",\n  "topology": {,\n}\n')
    with pytest.raises(ScenarioError) as info:
        scenario.load(p)
    msg = str(info.value)
    assert ":3:" in msg and '"topology": {,' in msg


def test_unreadable_path(tmp_path):
    with pytest.raises(ScenarioError):
        scenario.load(tmp_path / "absent.json")


def test_with_seed_keeps_everything_else():
    sc = scenario.load("fig1-mixed")
    other = sc.with_seed(99)
    assert other.seed == 99 and other.events == sc.events and other.network is sc.network


def test_defaults_fill_in():
    sc = scenario.load("geant-heterarchy")
    assert sc.thresholds["isolateTicks"] == scenario.DEFAULT_THRESHOLDS["isolateTicks"]
    assert set(sc.automation) == set(scenario.DEFAULT_AUTOMATION)
