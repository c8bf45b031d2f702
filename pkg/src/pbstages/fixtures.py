"""Bundled scenarios with recorded expectations, and the check runner.

Each fixture is a scenario document whose ``checks`` list records what the
rules and checkers are expected to produce on it.  A check marked
``"required": false`` is *informational*: its recorded value is a known
documented discrepancy kept for reference, and the suite reports the
computed value next to it instead of failing.

Two informational records exist in the bundle: the representation-tie
scenario (where two shortlists share the exact score 11/3 and canonical
tie-breaking selects the one not originally recorded) and the clustering
scenario (whose recorded cluster list names a project nobody proposed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from pbstages.core import Caps, Instance, ValidationError
from pbstages.allocation import PriorityTieBreak, allocation_rule
from pbstages.preferences import ideal_set
from pbstages.scenario import AgentSpec, ScenarioDocument
from pbstages.shortlisting import (
    equal_representation,
    k_median,
    k_median_outcome,
    nomination,
    representation_score,
)
from pbstages.strategy import StageGame, check_fssp, check_manipulation
from pbstages.verification import (
    check_second_stage_sp,
    find_representative_domination,
    ids_list,
)


def _fs(*pids: int) -> frozenset[int]:
    return frozenset(pids)


def _ranking(prefix, m):
    return tuple(list(prefix) + [p for p in range(1, m + 1) if p not in prefix])


def _projects(costs: dict[int, int], coords: dict[int, tuple] | None = None):
    from pbstages.core import Project

    return [
        Project(pid, cost, None if coords is None else coords.get(pid))
        for pid, cost in sorted(costs.items())
    ]


def shortlist_rule_for(doc: ScenarioDocument, name: str, k: int | None, caps: Caps):
    if name == "nomination":
        return nomination
    if name == "equal-representation":
        if k is None:
            raise ValidationError("equal-representation needs k")
        return lambda instance, proposals: equal_representation(instance, proposals, k, caps)
    if name == "k-median":
        if k is None:
            raise ValidationError("k-median needs k")
        metric = doc.metric()
        if metric is None:
            raise ValidationError("k-median needs a metric (coordinates or a table)")
        return lambda instance, proposals: k_median(instance, proposals, k, metric, caps)
    raise ValidationError(f"unknown shortlisting rule {name!r}")


SHORTLIST_RULES = ("nomination", "equal-representation", "k-median")


# ---------------------------------------------------------------------------
# Fixture builders


def _ten_project_scenario() -> ScenarioDocument:
    costs = {i: 1 for i in range(1, 11)}
    instance = Instance(_projects(costs), 3)
    prefixes = {
        1: [1, 4, 5, 10],
        2: [1, 2, 6, 4],
        3: [1, 2, 7, 4],
        4: [1, 3, 8, 5],
        5: [1, 3, 9, 5],
    }
    awareness = {
        1: _fs(1, 4, 5, 10),
        2: _fs(2, 6),
        3: _fs(2, 7),
        4: _fs(3, 8),
        5: _fs(3, 9),
    }
    agents = tuple(
        AgentSpec(i, _ranking(prefixes[i], 10), awareness[i]) for i in range(1, 6)
    )
    proposals = tuple(
        ideal_set(instance, agent.ranking, agent.awareness) for agent in agents
    )
    return ScenarioDocument(instance=instance, agents=agents, proposals=proposals)


def example1() -> ScenarioDocument:
    doc = _ten_project_scenario()
    checks = (
        {
            "id": "nomination-shortlist",
            "kind": "shortlist",
            "rule": "nomination",
            "expect": {"shortlist": list(range(1, 10))},
        },
        {
            "id": "equal-representation-shortlist",
            "kind": "shortlist",
            "rule": "equal-representation",
            "k": 2,
            "expect": {"shortlist": [1, 2, 3, 4, 6, 7]},
        },
        {
            "id": "greedy-allocation",
            "kind": "allocation",
            "rule": "greedy-approval",
            "shortlist": list(range(1, 10)),
            "ballots": "truthful",
            "expect": {"allocation": [1, 2, 3]},
        },
        {
            "id": "maximising-allocation",
            "kind": "allocation",
            "rule": "approval-maximising",
            "shortlist": list(range(1, 10)),
            "ballots": "truthful",
            "expect": {"allocation": [1, 2, 3]},
        },
        {
            "id": "end-to-end",
            "kind": "end-to-end",
            "shortlist_rule": "nomination",
            "allocation_rule": "greedy-approval",
            "expect": {"shortlist": list(range(1, 10)), "allocation": [1, 2, 3]},
        },
    )
    config = {"shortlist_rule": "nomination", "allocation_rule": "greedy-approval", "model": "overlap"}
    return ScenarioDocument(
        instance=doc.instance, agents=doc.agents, proposals=doc.proposals,
        config=config, checks=checks,
    )


def nomination_anticipative() -> ScenarioDocument:
    doc = _ten_project_scenario()
    checks = (
        {
            "id": "withheld-favourite",
            "kind": "manipulation",
            "shortlist_rule": "nomination",
            "allocation_rule": "greedy-approval",
            "model": "overlap",
            "mode": "anticipative",
            "agent": 1,
            "deviation": [4, 5, 10],
            "expect": {
                "verdict": "successful",
                "baseline_outcome": [1, 2, 3],
                "deviation_outcome": [2, 4, 5],
            },
        },
    )
    config = {"shortlist_rule": "nomination", "allocation_rule": "greedy-approval",
              "model": "overlap", "mode": "anticipative"}
    return ScenarioDocument(
        instance=doc.instance, agents=doc.agents, proposals=doc.proposals,
        config=config, checks=checks,
    )


def theorem_rfssp() -> ScenarioDocument:
    instance = Instance(_projects({1: 1, 2: 1}), 1)
    agents = (
        AgentSpec(1, (2, 1), _fs(1)),
        AgentSpec(2, (1, 2), _fs(2)),
    )
    checks = []
    for srule, k in (("nomination", None), ("equal-representation", 2)):
        for arule in ("greedy-approval", "approval-maximising"):
            tag = f"{srule}-k{k}" if k else srule
            for mode in ("pessimistic", "anticipative"):
                checks.append(
                    {
                        "id": f"restricted-{mode}-{tag}-{arule}",
                        "kind": "fssp",
                        "variant": "restricted",
                        "mode": mode,
                        "shortlist_rule": srule,
                        "k": k,
                        "allocation_rule": arule,
                        "model": "overlap",
                        "expect": {
                            "status": "counterexample-found",
                            "agent": 1,
                            "deviation": [],
                        },
                    }
                )
            for mode in ("pessimistic", "optimistic", "anticipative"):
                checks.append(
                    {
                        "id": f"unrestricted-{mode}-{tag}-{arule}",
                        "kind": "fssp",
                        "variant": "unrestricted",
                        "mode": mode,
                        "shortlist_rule": srule,
                        "k": k,
                        "allocation_rule": arule,
                        "model": "overlap",
                        "expect": {"status": "holds-on-suite"},
                    }
                )
    config = {"shortlist_rule": "nomination", "allocation_rule": "greedy-approval",
              "model": "overlap", "variant": "restricted", "mode": "pessimistic"}
    return ScenarioDocument(
        instance=instance, agents=agents,
        proposals=(_fs(1), _fs(2)),
        config=config, checks=tuple(checks),
    )


def equal_representation_tie() -> ScenarioDocument:
    instance = Instance(_projects({1: 1, 2: 2, 3: 1, 4: 1}), 2)
    agents = (
        AgentSpec(1, (3, 4, 2, 1), _fs(1, 2, 3, 4)),
        AgentSpec(2, (1, 2, 3, 4), _fs(1, 2)),
        AgentSpec(3, (2, 1, 3, 4), _fs(2)),
    )
    proposals = (_fs(3, 4), _fs(1, 2), _fs(2))
    checks = (
        {
            "id": "score-of-recorded-shortlist",
            "kind": "score",
            "subset": [2],
            "expect": {"score": "11/3"},
        },
        {
            "id": "score-of-computed-shortlist",
            "kind": "score",
            "subset": [1, 3],
            "expect": {"score": "11/3"},
        },
        {
            "id": "truthful-shortlist",
            "kind": "shortlist",
            "rule": "equal-representation",
            "k": 1,
            "expect": {"shortlist": [1, 3]},
        },
        {
            "id": "recorded-truthful-shortlist",
            "kind": "shortlist",
            "rule": "equal-representation",
            "k": 1,
            "required": False,
            "note": "recorded shortlist ties at exact score 11/3 with {1, 3}; "
            "canonical set tie-breaking selects {1, 3}",
            "expect": {"shortlist": [2]},
        },
        {
            "id": "deviating-shortlist",
            "kind": "shortlist",
            "rule": "equal-representation",
            "k": 1,
            "proposals": [[1, 3], [1, 2], [2]],
            "expect": {"shortlist": [1, 3]},
        },
        {
            "id": "unrestricted-pessimistic",
            "kind": "fssp",
            "variant": "unrestricted",
            "mode": "pessimistic",
            "shortlist_rule": "equal-representation",
            "k": 1,
            "allocation_rule": "greedy-approval",
            "model": "overlap",
            "expect": {"status": "holds-on-suite"},
        },
        {
            "id": "unrestricted-optimistic",
            "kind": "fssp",
            "variant": "unrestricted",
            "mode": "optimistic",
            "shortlist_rule": "equal-representation",
            "k": 1,
            "allocation_rule": "greedy-approval",
            "model": "overlap",
            "expect": {"status": "holds-on-suite"},
        },
    )
    config = {"shortlist_rule": "equal-representation", "k": 1,
              "allocation_rule": "greedy-approval", "model": "overlap"}
    return ScenarioDocument(
        instance=instance, agents=agents, proposals=proposals,
        config=config, checks=checks,
    )


def kmedian_relocation() -> ScenarioDocument:
    root3 = math.sqrt(3.0)
    coords = {
        1: (0.0, 1.0),
        2: (0.0, -1.0),
        3: (-root3, 0.0),
        4: (-1.0 / root3, 0.0),
        5: (4.0, 0.0),
        6: (4.0, 1.0),
        7: (4.0, -1.0),
    }
    instance = Instance(_projects({i: 1 for i in range(1, 8)}, coords), 3)
    agents = (
        AgentSpec(1, (1, 2, 3, 5, 4, 6, 7), _fs(1, 2, 3, 5)),
        AgentSpec(2, (4, 6, 7, 1, 2, 3, 5), _fs(4, 6, 7)),
    )
    proposals = (_fs(1, 2, 3), _fs(4, 6, 7))
    checks = (
        {
            "id": "truthful-shortlist",
            "kind": "shortlist",
            "rule": "k-median",
            "k": 1,
            "expect": {"shortlist": [4, 6, 7]},
        },
        {
            "id": "deviating-shortlist",
            "kind": "shortlist",
            "rule": "k-median",
            "k": 1,
            "proposals": [[1, 2, 5], [4, 6, 7]],
            "expect": {"shortlist": [1, 2, 5]},
        },
        {
            "id": "recorded-truthful-clusters",
            "kind": "clusters",
            "k": 1,
            "required": False,
            "note": "the recorded cluster list names a project nobody proposed; "
            "the computed clustering is the only valid one at the minimal radius",
            "expect": {"partitions": [[[1, 2, 3, 4], [5], [6]]]},
        },
        {
            "id": "relocation-pessimistic",
            "kind": "manipulation",
            "shortlist_rule": "k-median",
            "k": 1,
            "allocation_rule": "greedy-approval",
            "model": "overlap",
            "mode": "pessimistic",
            "agent": 1,
            "deviation": [1, 2, 5],
            "expect": {"verdict": "successful"},
        },
    )
    config = {"shortlist_rule": "k-median", "k": 1,
              "allocation_rule": "greedy-approval", "model": "overlap"}
    return ScenarioDocument(
        instance=instance, agents=agents, proposals=proposals,
        metric_spec={"kind": "euclidean"}, config=config, checks=checks,
    )


def unit_priority_tiebreak() -> ScenarioDocument:
    instance = Instance(_projects({i: 1 for i in range(1, 8)}), 4)
    agents = (
        AgentSpec(1, _ranking([1, 2, 3, 4], 7), None),
        AgentSpec(2, _ranking([4, 5, 6, 7], 7), None),
    )
    checks = (
        {
            "id": "priority-policy-manipulable",
            "kind": "ssp",
            "rule": "approval-maximising",
            "tiebreak": "document",
            "model": "overlap",
            "approximate": False,
            "search": "fixed-others",
            "expect": {
                "status": "counterexample-found",
                "agent": 1,
                "manipulator_ballot": [1, 2, 3],
                "manipulated_outcome": [1, 2, 3, 5],
            },
        },
        {
            "id": "canonical-strategyproof",
            "kind": "ssp",
            "rule": "approval-maximising",
            "model": "overlap",
            "approximate": False,
            "search": "full",
            "expect": {"status": "holds-on-suite"},
        },
    )
    config = {"allocation_rule": "approval-maximising", "model": "overlap"}
    return ScenarioDocument(
        instance=instance, agents=agents,
        tiebreak=PriorityTieBreak((_fs(1, 2, 3, 5), _fs(4, 5, 6, 7))),
        config=config, checks=checks,
    )


def maximiser_approx_gap() -> ScenarioDocument:
    costs = {1: 4, 2: 4, 3: 4, 4: 6, 5: 6, 6: 3, 7: 3, 8: 3}
    instance = Instance(_projects(costs), 12)
    agents = (
        AgentSpec(1, _ranking([6, 7, 8], 8), None),
        AgentSpec(2, _ranking([4, 5], 8), None),
        AgentSpec(3, _ranking([1, 2, 3], 8), None),
    )
    checks = []
    for model in ("overlap", "cost"):
        checks.append(
            {
                "id": f"approx-gap-{model}",
                "kind": "ssp",
                "rule": "approval-maximising",
                "model": model,
                "approximate": True,
                "search": "fixed-others",
                "agents": [1],
                "deviations": [[5, 6, 7]],
                "expect": {
                    "status": "counterexample-found",
                    "agent": 1,
                    "manipulator_ballot": [5, 6, 7],
                    "truthful_outcome": [1, 2, 3],
                    "manipulated_outcome": [5, 6, 7],
                },
            }
        )
        checks.append(
            {
                "id": f"approx-gap-search-{model}",
                "kind": "ssp",
                "rule": "approval-maximising",
                "model": model,
                "approximate": True,
                "search": "fixed-others",
                "expect": {"status": "counterexample-found"},
            }
        )
    config = {"allocation_rule": "approval-maximising", "model": "overlap"}
    return ScenarioDocument(
        instance=instance, agents=agents, config=config, checks=tuple(checks)
    )


def kmedian_domination() -> ScenarioDocument:
    coords = {1: (0.0, 0.0), 2: (1.0, 0.0), 3: (10.0, 0.0)}
    instance = Instance(_projects({1: 1, 2: 1, 3: 1}, coords), 2)
    agents = (
        AgentSpec(1, (2, 1, 3), _fs(2)),
        AgentSpec(2, (2, 3, 1), _fs(2)),
        AgentSpec(3, (1, 2, 3), _fs(1, 2)),
        AgentSpec(4, (3, 1, 2), _fs(3)),
    )
    proposals = (_fs(2), _fs(2), _fs(1, 2), _fs(3))
    checks = (
        {
            "id": "shortlist-ignores-support",
            "kind": "shortlist",
            "rule": "k-median",
            "k": 1,
            "expect": {"shortlist": [1, 3]},
        },
        {
            "id": "dominating-set-exists",
            "kind": "domination",
            "shortlist_rule": "k-median",
            "k": 1,
            "expect": {"found": True, "dominating": [2, 3]},
        },
    )
    config = {"shortlist_rule": "k-median", "k": 1,
              "allocation_rule": "greedy-approval", "model": "overlap"}
    return ScenarioDocument(
        instance=instance, agents=agents, proposals=proposals,
        metric_spec={"kind": "euclidean"}, config=config, checks=checks,
    )


def greedy_overlap_gap() -> ScenarioDocument:
    instance = Instance(_projects({1: 3, 2: 3, 3: 1, 4: 1, 5: 1}), 6)
    agents = (
        AgentSpec(1, (2, 3, 4, 5, 1), None),
        AgentSpec(2, (1, 2, 3, 4, 5), None),
        AgentSpec(3, (1, 2, 3, 4, 5), None),
    )
    ballots = (_fs(2, 3, 4, 5), _fs(1), _fs(1))
    checks = (
        {
            "id": "overlap-gap",
            "kind": "ssp",
            "rule": "greedy-approval",
            "model": "overlap",
            "approximate": True,
            "search": "fixed-others",
            "expect": {
                "status": "counterexample-found",
                "agent": 1,
                "manipulator_ballot": [3],
                "truthful_outcome": [1, 2],
                "manipulated_outcome": [1, 3, 4, 5],
            },
        },
        {
            "id": "cost-model-safe",
            "kind": "ssp",
            "rule": "greedy-approval",
            "model": "cost",
            "approximate": True,
            "search": "fixed-others",
            "expect": {"status": "holds-on-suite"},
        },
    )
    config = {"allocation_rule": "greedy-approval", "model": "overlap"}
    return ScenarioDocument(
        instance=instance, agents=agents, ballots=ballots,
        config=config, checks=checks,
    )


FIXTURES = {
    "example1": example1,
    "nomination-anticipative": nomination_anticipative,
    "theorem-rfssp": theorem_rfssp,
    "equal-representation-tie": equal_representation_tie,
    "kmedian-relocation": kmedian_relocation,
    "unit-priority-tiebreak": unit_priority_tiebreak,
    "maximiser-approx-gap": maximiser_approx_gap,
    "kmedian-domination": kmedian_domination,
    "greedy-overlap-gap": greedy_overlap_gap,
}


def fixture_names() -> tuple[str, ...]:
    return tuple(FIXTURES)


def load_fixture(name: str) -> ScenarioDocument:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ValidationError(
            f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}"
        ) from None


# ---------------------------------------------------------------------------
# Check runner


@dataclass
class CheckResult:
    check_id: str
    kind: str
    status: str  # "pass" | "fail" | "informational"
    expected: dict
    computed: dict
    note: str | None = None

    def to_jsonable(self) -> dict:
        return {
            "id": self.check_id,
            "kind": self.kind,
            "status": self.status,
            "expected": self.expected,
            "computed": self.computed,
            "note": self.note,
        }


def _doc_proposals(doc: ScenarioDocument, check: dict):
    if "proposals" in check:
        return tuple(doc.instance.check_subset(p, "proposals") for p in check["proposals"])
    if doc.proposals is None:
        raise ValidationError("scenario has no proposal profile")
    return doc.proposals


def _truthful_ballots(doc: ScenarioDocument, instance: Instance):
    return tuple(
        ideal_set(instance, [p for p in agent.ranking if p in instance])
        for agent in doc.agents
    )


def _allocation_rule_for(doc: ScenarioDocument, check: dict, caps: Caps):
    policy = doc.tiebreak if check.get("tiebreak") == "document" else None
    return allocation_rule(check["rule"], policy, caps)


def _build_game(doc: ScenarioDocument, check: dict, caps: Caps) -> StageGame:
    return StageGame(
        instance=doc.instance,
        shortlist_rule=shortlist_rule_for(doc, check["shortlist_rule"], check.get("k"), caps),
        allocation_rule=allocation_rule(check["allocation_rule"], None, caps),
        rankings=doc.rankings,
        awareness=doc.awareness,
        model=check.get("model", doc.config.get("model", "overlap")),
        proposals=doc.proposals,
    )


def run_check(doc: ScenarioDocument, check: dict, caps: Caps = Caps()) -> CheckResult:
    """Execute one recorded expectation against the document."""
    kind = check["kind"]
    expect = check.get("expect", {})
    computed: dict = {}

    if kind == "shortlist":
        rule = shortlist_rule_for(doc, check["rule"], check.get("k"), caps)
        computed["shortlist"] = ids_list(rule(doc.instance, _doc_proposals(doc, check)))
    elif kind == "clusters":
        metric = doc.metric()
        if metric is None:
            raise ValidationError("clusters check needs a metric")
        outcome = k_median_outcome(
            doc.instance, _doc_proposals(doc, check), check["k"], metric, caps
        )
        computed["partitions"] = sorted(
            sorted(sorted(c) for c in part.clusters) for part in outcome.partitions
        )
        computed["shortlist"] = ids_list(outcome.shortlist)
        computed["radius"] = outcome.ell
    elif kind == "allocation":
        base = (
            doc.instance
            if check.get("shortlist") in (None, "all")
            else doc.instance.restrict(check["shortlist"])
        )
        ballots = (
            _truthful_ballots(doc, base)
            if check.get("ballots", "truthful") == "truthful"
            else tuple(base.check_subset(b, "ballots") for b in check["ballots"])
        )
        rule = _allocation_rule_for(doc, check, caps)
        computed["allocation"] = ids_list(rule(base, ballots))
    elif kind == "end-to-end":
        srule = shortlist_rule_for(doc, check["shortlist_rule"], check.get("k"), caps)
        shortlist = srule(doc.instance, _doc_proposals(doc, check))
        base = doc.instance.restrict(shortlist)
        arule = allocation_rule(check["allocation_rule"], None, caps)
        computed["shortlist"] = ids_list(shortlist)
        computed["allocation"] = ids_list(arule(base, _truthful_ballots(doc, base)))
    elif kind == "score":
        if doc.proposals is None:
            raise ValidationError("score check needs a proposal profile")
        score = representation_score(_fs(*check["subset"]), doc.proposals)
        computed["score"] = str(score)
    elif kind == "manipulation":
        game = _build_game(doc, check, caps)
        result = check_manipulation(
            game,
            doc.agent_index(check["agent"]),
            _fs(*check["deviation"]),
            check["mode"],
            caps,
        )
        computed["verdict"] = result.verdict
        if result.witness:
            computed["baseline_outcome"] = result.witness["baseline_outcome"]
            computed["deviation_outcome"] = result.witness["deviation_outcome"]
        computed["witness"] = result.witness
    elif kind == "fssp":
        game = _build_game(doc, check, caps)
        verdict = check_fssp(game, check["variant"], check["mode"], caps)
        computed["status"] = verdict.status
        if verdict.witness:
            computed["agent"] = verdict.witness["agent"]
            computed["deviation"] = verdict.witness["deviation"]
        computed["witness"] = verdict.witness
    elif kind == "ssp":
        rule = _allocation_rule_for(doc, check, caps)
        agent_ids = check.get("agents")
        verdict = check_second_stage_sp(
            rule,
            doc.instance,
            doc.rankings,
            check.get("model", "overlap"),
            approximate=bool(check.get("approximate", False)),
            search=check.get("search", "auto"),
            caps=caps,
            ballots=doc.ballots,
            agents=None if agent_ids is None else [doc.agent_index(a) for a in agent_ids],
            deviations=None
            if check.get("deviations") is None
            else [_fs(*d) for d in check["deviations"]],
        )
        computed["status"] = verdict.status
        if verdict.witness:
            w = verdict.witness
            computed["agent"] = w["agent"]
            computed["manipulator_ballot"] = w["profile"][w["agent"] - 1]
            computed["truthful_outcome"] = w["truthful_outcome"]
            computed["manipulated_outcome"] = w["manipulated_outcome"]
        computed["witness"] = verdict.witness
    elif kind == "domination":
        rule = shortlist_rule_for(doc, check["shortlist_rule"], check.get("k"), caps)
        proposals = _doc_proposals(doc, check)
        shortlist = rule(doc.instance, proposals)
        dominating = find_representative_domination(doc.instance, proposals, shortlist, caps)
        computed["found"] = dominating is not None
        if dominating is not None:
            computed["dominating"] = ids_list(dominating)
        computed["shortlist"] = ids_list(shortlist)
    else:
        raise ValidationError(f"unknown check kind {kind!r}")

    matches = all(computed.get(key) == value for key, value in expect.items())
    required = check.get("required", True)
    if matches:
        status = "pass"
    elif required:
        status = "fail"
    else:
        status = "informational"
    return CheckResult(
        check_id=check.get("id", kind),
        kind=kind,
        status=status,
        expected=expect,
        computed=computed,
        note=check.get("note"),
    )


def run_fixture(name: str, caps: Caps = Caps()) -> list[CheckResult]:
    doc = load_fixture(name)
    return [run_check(doc, check, caps) for check in doc.checks]


def run_bundled_suite(caps: Caps = Caps()) -> dict[str, list[CheckResult]]:
    """Run every bundled fixture's checks; the suite's exit contract is
    zero failures and exactly the documented informational records."""
    return {name: run_fixture(name, caps) for name in FIXTURES}
