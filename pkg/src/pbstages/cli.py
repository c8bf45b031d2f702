"""Command-line front end.

Every command reads a scenario (from a file or a bundled fixture), runs
rules or checkers on it, and emits a JSON report that embeds the scenario
and the exact configuration, so any report can be replayed byte-for-byte
later.  Verdicts live in the report; the exit code only distinguishes
completed runs (0), validation errors (2), and resource-limit refusals (3).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from pbstages.core import Caps, NoPartitionError, ResourceLimitError, ValidationError
from pbstages.allocation import ALLOCATION_RULES, allocation_rule
from pbstages.fixtures import (
    SHORTLIST_RULES,
    fixture_names,
    load_fixture,
    run_check,
    shortlist_rule_for,
)
from pbstages.preferences import ideal_set
from pbstages.scenario import (
    ScenarioDocument,
    document_to_dict,
    parse_scenario,
    parse_scenario_dict,
)
from pbstages.shortlisting import k_median_outcome
from pbstages.strategy import MODES, VARIANTS, StageGame, check_fssp
from pbstages.suites import allocation_cases, shortlisting_cases
from pbstages.verification import (
    aggregate,
    check_allocation_axiom,
    check_non_wasteful,
    check_representation_efficiency,
    check_second_stage_sp,
    ids_list,
)

REPORT_FORMAT = "pb-report"
REPORT_VERSION = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbstages",
        description="Two-stage participatory budgeting rules and checkers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_source: bool = True) -> None:
        if needs_source:
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("--scenario", help="path to a scenario JSON file")
            src.add_argument(
                "--fixture", choices=fixture_names(), help="bundled scenario name"
            )
        p.add_argument("--output", help="write the report to this file instead of stdout")
        p.add_argument("--no-timing", action="store_true", help="omit timing from the report")
        p.add_argument("--seed", type=int, default=0, help="seed for sampled searches")
        p.add_argument("--cap-subset-search", type=int, default=Caps.subset_search)
        p.add_argument("--cap-partitions", type=int, default=Caps.partitions)
        p.add_argument("--cap-domination", type=int, default=Caps.domination)
        p.add_argument("--cap-ballots", type=int, default=Caps.ballots)
        p.add_argument("--cap-profiles", type=int, default=Caps.profiles)
        p.add_argument("--cap-maximisers", type=int, default=Caps.maximisers)

    def metric_flag(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--metric",
            choices=("document", "euclidean", "table"),
            default="document",
            help="override the scenario's metric kind (euclidean needs "
            "coordinates; table needs a distance table in the scenario)",
        )

    p = sub.add_parser("shortlist", help="run a shortlisting rule on the scenario's proposals")
    p.add_argument("--rule", choices=SHORTLIST_RULES, required=True)
    p.add_argument("--k", type=int)
    metric_flag(p)
    common(p)

    p = sub.add_parser("allocate", help="run an allocation rule on the scenario's ballots")
    p.add_argument("--rule", choices=ALLOCATION_RULES, required=True)
    p.add_argument(
        "--tiebreak",
        choices=("canonical", "document"),
        default="canonical",
        help="use the scenario's priority tie-break list instead of the canonical rule",
    )
    common(p)

    p = sub.add_parser("end-to-end", help="shortlist, then vote truthfully, then allocate")
    p.add_argument("--rule", choices=SHORTLIST_RULES, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--allocation-rule", choices=ALLOCATION_RULES, required=True)
    metric_flag(p)
    common(p)

    p = sub.add_parser("check-axiom", help="check a rule axiom on the scenario or a random suite")
    p.add_argument(
        "--axiom",
        required=True,
        choices=(
            "non-wasteful",
            "representation-efficiency",
            "exhaustive",
            "unanimous",
            "strongly-unanimous",
        ),
    )
    p.add_argument("--rule", required=True, help="shortlisting or allocation rule name")
    p.add_argument("--k", type=int)
    p.add_argument("--suite", type=int, default=0, help="additionally check N random cases")
    metric_flag(p)
    common(p)

    p = sub.add_parser("check-ssp", help="search for a voting-stage manipulation")
    p.add_argument("--rule", choices=ALLOCATION_RULES, required=True)
    p.add_argument("--model", choices=("overlap", "cost"), default="overlap")
    p.add_argument("--approximate", action="store_true")
    p.add_argument("--search", choices=("auto", "full", "fixed-others", "sample"), default="auto")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument(
        "--tiebreak", choices=("canonical", "document"), default="canonical"
    )
    common(p)

    p = sub.add_parser("check-fssp", help="search for a proposal-stage manipulation")
    p.add_argument("--rule", choices=SHORTLIST_RULES, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--allocation-rule", choices=ALLOCATION_RULES, required=True)
    p.add_argument("--model", choices=("overlap", "cost"), default="overlap")
    p.add_argument("--variant", choices=VARIANTS, required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    metric_flag(p)
    common(p)

    p = sub.add_parser("replay", help="re-run a report and verify it reproduces")
    p.add_argument("report", help="path to a report JSON file")
    p.add_argument("--output", help="write the replay report to this file")
    p.add_argument("--no-timing", action="store_true")

    p = sub.add_parser("paper-suite", help="run every bundled fixture against its records")
    common(p, needs_source=False)

    return parser


def _caps(args: argparse.Namespace) -> Caps:
    return Caps(
        subset_search=args.cap_subset_search,
        partitions=args.cap_partitions,
        domination=args.cap_domination,
        ballots=args.cap_ballots,
        profiles=args.cap_profiles,
        maximisers=args.cap_maximisers,
    )


def _load_document(args: argparse.Namespace) -> tuple[ScenarioDocument, dict]:
    if getattr(args, "fixture", None):
        doc, source = load_fixture(args.fixture), {"fixture": args.fixture}
    else:
        doc, source = parse_scenario(args.scenario), {"scenario": args.scenario}
    return _apply_metric_override(doc, getattr(args, "metric", "document")), source


def _apply_metric_override(doc: ScenarioDocument, kind: str) -> ScenarioDocument:
    if kind in (None, "document"):
        return doc
    if kind == "table":
        if doc.metric_spec is None or doc.metric_spec.get("kind") != "table":
            raise ValidationError("--metric table needs a distance table in the scenario")
        return doc
    doc = dataclasses.replace(doc, metric_spec={"kind": "euclidean"})
    doc.metric()
    return doc


def _truthful_ballots(doc: ScenarioDocument, instance):
    return tuple(
        ideal_set(instance, [p for p in agent.ranking if p in instance])
        for agent in doc.agents
    )


def execute(command: str, doc: ScenarioDocument, options: dict, caps: Caps) -> dict:
    """Run one command on a document; pure given (command, options, caps)."""
    if command == "shortlist":
        rule = shortlist_rule_for(doc, options["rule"], options.get("k"), caps)
        if doc.proposals is None:
            raise ValidationError("scenario has no proposal profile")
        shortlist = rule(doc.instance, doc.proposals)
        outcome = {"shortlist": ids_list(shortlist)}
        if options["rule"] == "k-median":
            detail = k_median_outcome(
                doc.instance, doc.proposals, options["k"], doc.metric(), caps
            )
            outcome["radius"] = detail.ell
            outcome["partitions"] = [
                [sorted(c) for c in part.clusters] for part in detail.partitions
            ]
        return outcome

    if command == "allocate":
        policy = doc.tiebreak if options.get("tiebreak") == "document" else None
        rule = allocation_rule(options["rule"], policy, caps)
        ballots = doc.ballots or _truthful_ballots(doc, doc.instance)
        return {
            "ballots": [ids_list(b) for b in ballots],
            "allocation": ids_list(rule(doc.instance, ballots)),
        }

    if command == "end-to-end":
        srule = shortlist_rule_for(doc, options["rule"], options.get("k"), caps)
        if doc.proposals is None:
            raise ValidationError("scenario has no proposal profile")
        shortlist = srule(doc.instance, doc.proposals)
        base = doc.instance.restrict(shortlist)
        ballots = _truthful_ballots(doc, base)
        arule = allocation_rule(options["allocation_rule"], None, caps)
        return {
            "shortlist": ids_list(shortlist),
            "ballots": [ids_list(b) for b in ballots],
            "allocation": ids_list(arule(base, ballots)),
        }

    if command == "check-axiom":
        return _check_axiom(doc, options, caps)

    if command == "check-ssp":
        policy = doc.tiebreak if options.get("tiebreak") == "document" else None
        rule = allocation_rule(options["rule"], policy, caps)
        verdict = check_second_stage_sp(
            rule,
            doc.instance,
            doc.rankings,
            options["model"],
            approximate=options["approximate"],
            search=options["search"],
            caps=caps,
            ballots=doc.ballots,
            samples=options.get("samples", 2000),
            seed=options.get("seed", 0),
        )
        return {"verdict": verdict.to_jsonable()}

    if command == "check-fssp":
        game = StageGame(
            instance=doc.instance,
            shortlist_rule=shortlist_rule_for(doc, options["rule"], options.get("k"), caps),
            allocation_rule=allocation_rule(options["allocation_rule"], None, caps),
            rankings=doc.rankings,
            awareness=doc.awareness,
            model=options["model"],
            proposals=doc.proposals,
        )
        verdict = check_fssp(game, options["variant"], options["mode"], caps)
        return {"verdict": verdict.to_jsonable()}

    raise ValidationError(f"unknown command {command!r}")


def _check_axiom(doc: ScenarioDocument, options: dict, caps: Caps) -> dict:
    axiom = options["axiom"]
    name = options["rule"]
    seed = options.get("seed", 0)
    suite = options.get("suite", 0)
    if axiom in ("non-wasteful", "representation-efficiency"):
        rule = shortlist_rule_for(doc, name, options.get("k"), caps)
        check = (
            check_non_wasteful
            if axiom == "non-wasteful"
            else lambda r, i, p: check_representation_efficiency(r, i, p, caps)
        )
        verdicts = []
        if doc.proposals is not None:
            verdicts.append(check(rule, doc.instance, doc.proposals))
        if suite:
            if name == "k-median":
                raise ValidationError(
                    "random suites are not supported for k-median (the scenario's "
                    "metric does not cover generated instances); omit --suite"
                )
            for instance, proposals in shortlisting_cases(seed, suite, max_projects=5):
                verdicts.append(check(rule, instance, proposals))
        verdict = aggregate(verdicts, {"axiom": axiom, "rule": name, "suite": suite, "seed": seed})
        return {"verdict": verdict.to_jsonable()}
    rule = allocation_rule(name, None, caps)
    cases = list(allocation_cases(seed, suite or 200, axiom))
    verdict = check_allocation_axiom(rule, axiom, cases)
    verdict.params = {"axiom": axiom, "rule": name, "suite": suite or 200, "seed": seed}
    return {"verdict": verdict.to_jsonable()}


def _run_paper_suite(caps: Caps) -> dict:
    fixtures = {}
    informational = []
    failures = []
    for name in fixture_names():
        doc = load_fixture(name)
        results = [run_check(doc, check, caps) for check in doc.checks]
        fixtures[name] = [r.to_jsonable() for r in results]
        for r in results:
            if r.status == "informational":
                informational.append(f"{name}/{r.check_id}")
            elif r.status == "fail":
                failures.append(f"{name}/{r.check_id}")
    return {
        "fixtures": fixtures,
        "informational": informational,
        "failures": failures,
        "ok": not failures,
    }


def _emit(report: dict, output: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _replay(args: argparse.Namespace) -> dict:
    try:
        stored = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read report {args.report}: {exc}") from exc
    for key in ("command", "options", "caps", "document", "results"):
        if key not in stored:
            raise ValidationError(f"report is missing the {key!r} field")
    caps = Caps(**stored["caps"])
    command = stored["command"]
    if command == "paper-suite":
        fresh = _run_paper_suite(caps)
    else:
        doc = parse_scenario_dict(stored["document"], where="report.document")
        fresh = execute(command, doc, stored["options"], caps)
    matches = fresh == stored["results"]
    return {
        "replayed_command": command,
        "reproduces": matches,
        "results": fresh,
    }


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        if args.command == "replay":
            results = _replay(args)
            report = {
                "format": REPORT_FORMAT,
                "version": REPORT_VERSION,
                "command": "replay",
                "source": {"report": args.report},
                "results": results,
                "status": "completed",
            }
        elif args.command == "paper-suite":
            caps = _caps(args)
            results = _run_paper_suite(caps)
            report = {
                "format": REPORT_FORMAT,
                "version": REPORT_VERSION,
                "command": "paper-suite",
                "options": {"seed": args.seed},
                "caps": caps.__dict__,
                "document": None,
                "results": results,
                "status": "completed",
            }
        else:
            caps = _caps(args)
            doc, source = _load_document(args)
            options = {
                key: value
                for key, value in vars(args).items()
                if key
                not in {
                    "command", "scenario", "fixture", "output", "no_timing", "metric",
                    "cap_subset_search", "cap_partitions", "cap_domination",
                    "cap_ballots", "cap_profiles", "cap_maximisers",
                }
            }
            results = execute(args.command, doc, options, caps)
            report = {
                "format": REPORT_FORMAT,
                "version": REPORT_VERSION,
                "command": args.command,
                "source": source,
                "options": options,
                "caps": caps.__dict__,
                "document": document_to_dict(doc),
                "results": results,
                "status": "completed",
            }
        if not args.no_timing:
            report["timing_ms"] = round((time.perf_counter() - started) * 1000.0, 3)
        _emit(report, args.output)
        return 0
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, NoPartitionError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
