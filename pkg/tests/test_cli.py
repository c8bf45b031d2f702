import json

from pbstages.cli import main
from pbstages.fixtures import load_fixture
from pbstages.scenario import write_scenario


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


class TestCommands:
    def test_end_to_end_example(self, capsys):
        code, report = run_cli(
            capsys,
            "end-to-end", "--fixture", "example1",
            "--rule", "nomination", "--allocation-rule", "greedy-approval",
            "--no-timing",
        )
        assert code == 0
        assert report["results"]["shortlist"] == list(range(1, 10))
        assert report["results"]["allocation"] == [1, 2, 3]

    def test_shortlist_with_radius_details(self, capsys):
        code, report = run_cli(
            capsys,
            "shortlist", "--fixture", "kmedian-relocation",
            "--rule", "k-median", "--k", "1", "--no-timing",
        )
        assert code == 0
        assert report["results"]["shortlist"] == [4, 6, 7]
        assert report["results"]["partitions"] == [[[1, 2, 3, 4], [6], [7]]]

    def test_allocate_with_document_tiebreak(self, capsys):
        code, report = run_cli(
            capsys,
            "allocate", "--fixture", "unit-priority-tiebreak",
            "--rule", "approval-maximising", "--tiebreak", "document",
            "--no-timing",
        )
        assert code == 0
        assert report["results"]["allocation"] == [4, 5, 6, 7]

    def test_check_fssp_reports_witness(self, capsys):
        code, report = run_cli(
            capsys,
            "check-fssp", "--fixture", "theorem-rfssp",
            "--rule", "nomination", "--allocation-rule", "greedy-approval",
            "--variant", "restricted", "--mode", "pessimistic", "--no-timing",
        )
        assert code == 0
        verdict = report["results"]["verdict"]
        assert verdict["status"] == "counterexample-found"
        assert verdict["witness"]["agent"] == 1
        assert verdict["witness"]["deviation"] == []

    def test_check_ssp_on_scenario_file(self, capsys, tmp_path):
        path = tmp_path / "scenario.json"
        write_scenario(load_fixture("greedy-overlap-gap"), path)
        code, report = run_cli(
            capsys,
            "check-ssp", "--scenario", str(path),
            "--rule", "greedy-approval", "--model", "overlap",
            "--approximate", "--search", "fixed-others", "--no-timing",
        )
        assert code == 0
        assert report["results"]["verdict"]["status"] == "counterexample-found"

    def test_check_axiom_refuses_kmedian_suite(self, capsys):
        code = main([
            "check-axiom", "--fixture", "kmedian-relocation",
            "--axiom", "non-wasteful", "--rule", "k-median", "--k", "2",
            "--suite", "10",
        ])
        assert code == 2

    def test_check_axiom_kmedian_on_document(self, capsys):
        code, report = run_cli(
            capsys,
            "check-axiom", "--fixture", "kmedian-relocation",
            "--axiom", "non-wasteful", "--rule", "k-median", "--k", "2",
            "--no-timing",
        )
        assert code == 0
        assert report["results"]["verdict"]["status"] == "holds-on-suite"

    def test_check_axiom_allocation_suite(self, capsys):
        code, report = run_cli(
            capsys,
            "check-axiom", "--fixture", "example1",
            "--axiom", "unanimous", "--rule", "greedy-approval",
            "--suite", "50", "--no-timing",
        )
        assert code == 0
        assert report["results"]["verdict"]["status"] == "holds-on-suite"

    def test_paper_suite_flags_documented_discrepancies(self, capsys):
        code, report = run_cli(capsys, "paper-suite", "--no-timing")
        assert code == 0
        results = report["results"]
        assert results["ok"] is True
        assert results["failures"] == []
        assert sorted(results["informational"]) == [
            "equal-representation-tie/recorded-truthful-shortlist",
            "kmedian-relocation/recorded-truthful-clusters",
        ]


class TestReplayAndStability:
    def test_reports_byte_stable(self, capsys, tmp_path):
        argv = [
            "end-to-end", "--fixture", "example1",
            "--rule", "nomination", "--allocation-rule", "greedy-approval",
            "--no-timing",
        ]
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        assert main(argv + ["--output", str(first)]) == 0
        assert main(argv + ["--output", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_replay_reproduces_report(self, capsys, tmp_path):
        report_path = tmp_path / "report.json"
        code = main([
            "check-fssp", "--fixture", "theorem-rfssp",
            "--rule", "nomination", "--allocation-rule", "greedy-approval",
            "--variant", "restricted", "--mode", "anticipative",
            "--no-timing", "--output", str(report_path),
        ])
        assert code == 0
        code, replay = run_cli(capsys, "replay", str(report_path), "--no-timing")
        assert code == 0
        assert replay["results"]["reproduces"] is True

    def test_replay_detects_tampering(self, capsys, tmp_path):
        report_path = tmp_path / "report.json"
        main([
            "shortlist", "--fixture", "example1", "--rule", "nomination",
            "--no-timing", "--output", str(report_path),
        ])
        data = json.loads(report_path.read_text())
        data["results"]["shortlist"] = [1, 2]
        report_path.write_text(json.dumps(data))
        code, replay = run_cli(capsys, "replay", str(report_path), "--no-timing")
        assert code == 0
        assert replay["results"]["reproduces"] is False


class TestExitCodes:
    def test_validation_error_is_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "pb-scenario", "version": 1}')
        code = main(["shortlist", "--scenario", str(path), "--rule", "nomination"])
        assert code == 2
        assert "validation error" in capsys.readouterr().err

    def test_resource_limit_is_3(self, capsys):
        code = main([
            "shortlist", "--fixture", "example1",
            "--rule", "equal-representation", "--k", "1",
            "--cap-subset-search", "2",
        ])
        assert code == 3
        assert "resource limit" in capsys.readouterr().err

    def test_counterexample_still_exits_0(self, capsys):
        code = main([
            "check-fssp", "--fixture", "theorem-rfssp",
            "--rule", "nomination", "--allocation-rule", "approval-maximising",
            "--variant", "restricted", "--mode", "pessimistic", "--no-timing",
        ])
        assert code == 0
