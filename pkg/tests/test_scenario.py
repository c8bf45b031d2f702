import json

import pytest

from pbstages.fixtures import fixture_names, load_fixture
from pbstages.scenario import (
    ScenarioError,
    document_to_dict,
    dump_scenario,
    parse_scenario,
    parse_scenario_dict,
    write_scenario,
)


def minimal_scenario(**overrides):
    data = {
        "format": "pb-scenario",
        "version": 1,
        "instance": {
            "budget": 3,
            "projects": [
                {"id": 1, "cost": 1},
                {"id": 2, "cost": 2},
                {"id": 3, "cost": 3},
            ],
        },
        "agents": [
            {"id": 1, "ranking": [1, 2, 3], "awareness": [1, 2]},
            {"id": 2, "ranking": [3, 2, 1]},
        ],
        "proposals": [[1, 2], [3]],
    }
    data.update(overrides)
    return data


class TestParsing:
    def test_minimal_document(self):
        doc = parse_scenario_dict(minimal_scenario())
        assert doc.instance.budget == 3
        assert doc.agents[0].awareness == frozenset({1, 2})
        assert doc.awareness[1] == frozenset({1, 2, 3})
        assert doc.proposals == (frozenset({1, 2}), frozenset({3}))

    def test_cost_above_budget_rejected(self):
        data = minimal_scenario()
        data["instance"]["projects"][2]["cost"] = 4
        with pytest.raises(ScenarioError, match="exceeding the budget"):
            parse_scenario_dict(data)

    def test_dangling_proposal_id_rejected(self):
        with pytest.raises(ScenarioError, match="unknown project ids"):
            parse_scenario_dict(minimal_scenario(proposals=[[1, 9], [3]]))

    def test_ranking_must_be_permutation(self):
        data = minimal_scenario()
        data["agents"][0]["ranking"] = [1, 2]
        with pytest.raises(ScenarioError, match="permutation"):
            parse_scenario_dict(data)

    def test_proposal_outside_awareness_rejected(self):
        data = minimal_scenario(proposals=[[1, 3], [3]])
        with pytest.raises(ScenarioError, match="outside the agent's awareness"):
            parse_scenario_dict(data)

    def test_asymmetric_table_metric_rejected(self):
        data = minimal_scenario(
            metric={"kind": "table", "entries": [[1, 2, 1.0], [2, 1, 2.0], [1, 3, 1.0], [2, 3, 1.0]]}
        )
        with pytest.raises(ScenarioError, match="asymmetric"):
            parse_scenario_dict(data)

    def test_malformed_json_reports_location(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ScenarioError, match="malformed JSON"):
            parse_scenario(path)

    def test_duplicate_agent_ids_rejected(self):
        data = minimal_scenario()
        data["agents"][1]["id"] = 1
        with pytest.raises(ScenarioError, match="duplicate agent id"):
            parse_scenario_dict(data)

    def test_agent_ids_must_be_positional(self):
        data = minimal_scenario()
        data["agents"][1]["id"] = 7
        with pytest.raises(ScenarioError, match="1..n in order"):
            parse_scenario_dict(data)


class TestRoundTrip:
    @pytest.mark.parametrize("name", fixture_names())
    def test_fixture_round_trip_identity(self, name):
        doc = load_fixture(name)
        rebuilt = parse_scenario_dict(document_to_dict(doc))
        assert rebuilt == doc

    @pytest.mark.parametrize("name", fixture_names())
    def test_serialisation_is_byte_stable(self, name):
        doc = load_fixture(name)
        once = dump_scenario(doc)
        twice = dump_scenario(parse_scenario_dict(json.loads(once)))
        assert once == twice

    def test_file_round_trip(self, tmp_path):
        doc = load_fixture("example1")
        path = tmp_path / "scenario.json"
        write_scenario(doc, path)
        assert parse_scenario(path) == doc
