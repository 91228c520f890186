import json

import pytest
from fastapi.testclient import TestClient

from src import cli
from src.app import app
from src.checker.witness import Witness
from src.config.settings import settings
from src.diagnostics import ConfigMismatch, StageError
from src.ifa.labels import load_target_config
from src.pipeline.report import (
    INCOMPLETE_MARKER,
    attribute_witness,
    compare_modes,
    load_report,
    render_table,
    write_report,
)
from src.pipeline.runner import run, run_modes
from src.pipeline.store import list_runs, persist_report, reset_store, run_records
from src.schemas.report import PropertyRecord, Report
from src.schemas.run import Mode, RunConfig
from src.software.assembler import assemble_file
from tests.conftest import FIXTURES, PROGRAMS

MUX = str(FIXTURES / "mux.json")
BLOCKS = str(FIXTURES / "blocks.json")
MINIRV = str(FIXTURES / "minirv_labels.json")


def _report(mode: Mode, verdicts: dict[str, str], fingerprint=None) -> Report:
    report = Report(design="core", mode=mode, fingerprint=fingerprint or {"target": "core.json", "limits": {}})
    report.records = [
        PropertyRecord(name=name, path_id=name, source="k", sink="o", mode=mode, verdict=v) for name, v in verdicts.items()
    ]
    report.recount()
    return report


def _by_sink(report: Report) -> dict[str, str]:
    return {r.sink.split("[")[0]: r.verdict for r in report.records}


def _verdicts(report: Report) -> dict[str, str]:
    return {r.name: r.verdict for r in report.records}


class TestRun:
    def test_mux_report_files(self, tmp_path):
        report = run(RunConfig(target=MUX, output_dir=str(tmp_path), parallelism=1))
        assert report.design == "mux"
        assert report.summary.covered == 1
        (record,) = report.records
        assert record.method == "bmc"
        assert record.bound == 0
        for name in ("report.json", "report.jsonl", "summary.txt", "props/manifest.json", "assumptions/none.psl"):
            assert (tmp_path / name).exists(), name
        assert (tmp_path / "witnesses" / f"{record.name}.txt").exists()
        assert not (tmp_path / INCOMPLETE_MARKER).exists()
        assert load_report(tmp_path) == report
        assert cli.exit_code([report]) == cli.EXIT_COVERED

    def test_select(self):
        full = run(RunConfig(target=BLOCKS, parallelism=1))
        (record,) = full.records
        picked = run(RunConfig(target=BLOCKS, select=[record.path_id[:6]], parallelism=1))
        assert [r.name for r in picked.records] == [record.name]
        assert run(RunConfig(target=BLOCKS, select=["cover_nothing"])).records == []

    def test_failed_stage_leaves_incomplete_report(self, tmp_path):
        with pytest.raises(StageError) as exc:
            run(RunConfig(target=MUX, mode=Mode.LEGAL, output_dir=str(tmp_path)))
        assert exc.value.stage == "assumptions"
        assert (tmp_path / INCOMPLETE_MARKER).exists()
        assert load_report(tmp_path).incomplete

    def test_program_required(self):
        with pytest.raises(ValueError, match="needs a program"):
            RunConfig(target=MINIRV, mode=Mode.USED)

    def test_run_modes_subdirectories(self, tmp_path):
        reports = run_modes(RunConfig(target=MUX, output_dir=str(tmp_path), parallelism=1), (Mode.NONE,))
        assert len(reports) == 1
        assert (tmp_path / "none" / "report.json").exists()


class TestAudit:
    def test_violation(self):
        audit = compare_modes(
            [_report(Mode.USED, {"a": "covered", "b": "uncoverable"}), _report(Mode.NONE, {"a": "uncoverable", "b": "covered"})]
        )
        assert audit.modes == [Mode.NONE, Mode.USED]
        assert [(v.name, v.weaker, v.stronger) for v in audit.violations] == [("a", Mode.NONE, Mode.USED)]
        assert not audit.ok

    def test_unknown_is_undecided(self):
        audit = compare_modes([_report(Mode.NONE, {"a": "uncoverable"}), _report(Mode.STACK, {"a": "unknown"})])
        assert audit.ok
        assert [v.name for v in audit.undecided] == ["a"]

    def test_growth(self):
        audit = compare_modes(
            [
                _report(Mode.NONE, {"a": "covered", "b": "covered"}),
                _report(Mode.LEGAL, {"a": "uncoverable", "b": "covered"}),
                _report(Mode.JUMPS, {"a": "uncoverable", "b": "uncoverable"}),
            ]
        )
        assert audit.ok
        assert audit.uncoverable == {"none": 0, "legal": 1, "jumps": 2}

    def test_mismatch(self):
        with pytest.raises(ConfigMismatch):
            compare_modes([_report(Mode.NONE, {}), _report(Mode.LEGAL, {}, {"target": "other.json", "limits": {}})])
        with pytest.raises(ConfigMismatch):
            compare_modes([_report(Mode.NONE, {})])

    def test_table(self):
        text = render_table([_report(Mode.LEGAL, {"a": "covered"}), _report(Mode.NONE, {"a": "covered", "b": "unknown"})])
        lines = text.splitlines()
        assert lines[0].split() == ["Mode", "none", "legal"]
        assert set(lines[1]) == {"-"}
        rows = {line.split()[0]: line.split()[-2:] for line in lines[2:]}
        assert rows["Covered"] == ["1", "1"]
        assert rows["Unknown"] == ["1", "0"]


class TestStore:
    def test_persist_and_list(self, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, "sqlite_db_path", str(tmp_path / "runs.db"))
        reset_store()
        try:
            run_id = persist_report(_report(Mode.LEGAL, {"a": "covered", "b": "uncoverable"}))
            (row,) = list_runs()
            assert row["id"] == run_id
            assert (row["mode"], row["covered"], row["uncoverable"]) == ("legal", 1, 1)
            assert [r["name"] for r in run_records(run_id)] == ["a", "b"]
            assert run_records(run_id + 1) == []
        finally:
            reset_store()


class TestCli:
    def test_paths(self, capsys, tmp_path):
        out = tmp_path / "paths.jsonl"
        assert cli.main(["paths", "--target", MUX, "--out", str(out)]) == cli.EXIT_CLEAN
        assert "secret[3:0] -> out[3:0]" in capsys.readouterr().out
        assert len(out.read_text().splitlines()) == 2

    def test_props(self, capsys, tmp_path):
        assert cli.main(["props", "--target", BLOCKS, "--out", str(tmp_path)]) == cli.EXIT_CLEAN
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert len(manifest) == 1

    def test_assume(self, capsys):
        args = ["assume", "--target", MINIRV, "--program", str(PROGRAMS / "naive.s"), "--mode", "used"]
        assert cli.main(args) == cli.EXIT_CLEAN
        out = capsys.readouterr().out
        assert "assume_legal: assume {" in out
        assert "assume_used: assume {" in out

    def test_check_covered(self, capsys):
        assert cli.main(["check", "--target", MUX, "-j", "1"]) == cli.EXIT_COVERED
        assert "covered" in capsys.readouterr().out

    def test_run_and_audit(self, tmp_path):
        assert cli.main(["run", "--target", MUX, "--out", str(tmp_path / "r"), "-j", "1"]) == cli.EXIT_COVERED
        write_report(_report(Mode.NONE, {"a": "uncoverable"}), tmp_path / "n")
        write_report(_report(Mode.LEGAL, {"a": "covered"}), tmp_path / "l")
        assert cli.main(["audit", str(tmp_path / "n"), str(tmp_path / "l")]) == cli.EXIT_ERROR
        write_report(_report(Mode.LEGAL, {"a": "uncoverable"}), tmp_path / "l")
        assert cli.main(["audit", str(tmp_path / "n"), str(tmp_path / "l")]) == cli.EXIT_CLEAN

    def test_diagnostics_json(self, capsys, tmp_path):
        code = cli.main(["--diagnostics-json", "paths", "--target", str(tmp_path / "missing.json")])
        assert code == cli.EXIT_ERROR
        diag = json.loads(capsys.readouterr().err.strip())
        assert diag["code"] == "label-config"
        assert diag["severity"] == "error"

    def test_mode_without_program(self, capsys):
        assert cli.main(["check", "--target", MINIRV, "--mode", "used"]) == cli.EXIT_ERROR
        assert "needs a program" in capsys.readouterr().err

    def test_exit_code_precedence(self):
        covered = _report(Mode.NONE, {"a": "covered"})
        unknown = _report(Mode.NONE, {"a": "unknown"})
        broken = _report(Mode.NONE, {})
        broken.incomplete = True
        assert cli.exit_code([covered, unknown]) == cli.EXIT_COVERED
        assert cli.exit_code([unknown]) == cli.EXIT_ERROR
        assert cli.exit_code([covered, broken]) == cli.EXIT_ERROR
        assert cli.exit_code([_report(Mode.NONE, {"a": "uncoverable"})]) == cli.EXIT_CLEAN


class TestApi:
    def test_health(self):
        with TestClient(app) as client:
            assert client.get("/health").json() == {"status": "ok"}

    def test_paths(self):
        with TestClient(app) as client:
            response = client.post("/paths", json={"target": BLOCKS})
            assert response.status_code == 200
            body = response.json()
            assert body["design"] == "blocks"
            assert body["paths"][0]["route"] == "s2 -> s3 -> s4 -> s5 -> s6 -> s7 -> s8"
            assert not body["truncated"]

    def test_bad_target(self, tmp_path):
        with TestClient(app) as client:
            response = client.post("/paths", json={"target": str(tmp_path / "missing.json")})
            assert response.status_code == 422
            assert response.json()["detail"]["code"] == "label-config"

    def test_cache_clear(self):
        with TestClient(app) as client:
            assert client.post("/cache/clear").json() == {"status": "caches cleared"}


class TestAttribution:
    def test_fetches_map_to_lines_in_cycle_order(self):
        core = load_target_config(MINIRV).core
        program = assemble_file(PROGRAMS / "naive.s")
        rows = [{"imem_addr": a, "imem_rdata": program.words[a]} for a in (0x10, 0x14)]
        witness = Witness(initial={}, aux_initial={}, inputs=[{}, {}], signals=rows)
        fetches = attribute_witness(witness, program, core)
        assert [f.cycle for f in fetches] == [0, 1]
        assert [f.address for f in fetches] == [0x10, 0x14]
        assert [f.line for f in fetches] == [program.line_at(0x10), program.line_at(0x14)]
        assert all(f.mapped and f.line for f in fetches)

    def test_without_a_program_nothing_maps(self):
        core = load_target_config(MINIRV).core
        program = assemble_file(PROGRAMS / "naive.s")
        rows = [{"imem_addr": 0x10, "imem_rdata": program.words[0x10]}, {"imem_addr": 0x14, "imem_rdata": 0}]
        witness = Witness(initial={}, aux_initial={}, inputs=[{}, {}], signals=rows)
        assert [(f.mapped, f.line) for f in attribute_witness(witness, None, core)] == [(False, None)] * 2
        assert [f.mapped for f in attribute_witness(witness, program, core)] == [True, False]


@pytest.mark.slow
class TestMiniRv:
    """Verdicts on the fixture core under each software mode."""

    def _run(self, mode, program=None, trigger=None):
        config = RunConfig(
            target=MINIRV,
            program=str(PROGRAMS / f"{program}.s") if program else None,
            trigger=trigger,
            mode=mode,
        )
        return run(config)

    def test_five_paths(self):
        report = self._run(Mode.NONE)
        assert report.paths == 5
        assert _by_sink(report) == {
            "dmem_wdata": "covered",
            "dmem_addr": "covered",
            "kmem_addr": "covered",
            "imem_addr": "covered",
            "dbg_out": "uncoverable",
        }

    def test_naive_modes(self):
        reports = run_modes(
            RunConfig(target=MINIRV, program=str(PROGRAMS / "naive.s")), (Mode.LEGAL, Mode.USED, Mode.JUMPS, Mode.STACK)
        )
        legal, used, jumps, stack = (_by_sink(r) for r in reports)
        assert legal["kmem_addr"] == "covered"
        assert used["dmem_wdata"] == used["dmem_addr"] == "covered"
        assert used["kmem_addr"] == used["imem_addr"] == used["dbg_out"] == "uncoverable"
        for verdicts in (jumps, stack):
            assert verdicts["dmem_wdata"] == "covered"
            assert {v for s, v in verdicts.items() if s != "dmem_wdata"} == {"uncoverable"}
        assert compare_modes(reports).ok

    def test_naive_witness_points_at_the_store(self):
        report = self._run(Mode.STACK, "naive")
        record = next(r for r in report.records if r.sink.startswith("dmem_wdata"))
        mapped = [f.line for f in record.attribution if f.mapped]
        assert any("ldk" in line for line in mapped)
        assert "sw t2, 0(a0)" in mapped[-1]

    def test_patched(self):
        for mode in (Mode.USED, Mode.STACK):
            assert set(_by_sink(self._run(mode, "patched")).values()) == {"uncoverable"}

    @pytest.mark.parametrize("trigger", [0x5A, 0x13])
    def test_trojan(self, trigger):
        report = self._run(Mode.STACK, "trojan", trigger)
        assert _by_sink(report)["dmem_wdata"] == "covered"

    def test_decoder_without_trap(self):
        target = str(FIXTURES / "decoder_notrap.json")
        none = run(RunConfig(target=target))
        legal = run(RunConfig(target=target, mode=Mode.LEGAL))
        assert [r.verdict for r in none.records] == ["covered"]
        assert [r.verdict for r in legal.records] == ["uncoverable"]

    def test_full_escalation(self):
        report = self._run(Mode.FULL, "naive")
        by_sink = {r.sink.split("[")[0]: r for r in report.records}
        assert by_sink["kmem_addr"].stages == ["used"]
        assert by_sink["kmem_addr"].verdict == "uncoverable"
        assert by_sink["dmem_wdata"].stages == ["used", "jumps", "stack"]
        assert by_sink["dmem_wdata"].mode == Mode.STACK
        assert by_sink["dmem_wdata"].verdict == "covered"

    def test_legal_changes_nothing(self):
        reports = run_modes(RunConfig(target=MINIRV), (Mode.NONE, Mode.LEGAL))
        none, legal = (_verdicts(r) for r in reports)
        assert none == legal
        assert compare_modes(reports).ok

    def test_full_is_cheaper_than_separate_modes(self):
        program = str(PROGRAMS / "naive.s")
        full = run(RunConfig(target=MINIRV, program=program, mode=Mode.FULL))
        separate = run_modes(RunConfig(target=MINIRV, program=program), (Mode.USED, Mode.JUMPS, Mode.STACK))
        assert full.summary.sat_queries < sum(r.summary.sat_queries for r in separate)
        assert _verdicts(full) == _verdicts(separate[-1])

    def test_parallelism_does_not_change_verdicts(self):
        runs = [run(RunConfig(target=MINIRV, parallelism=n)) for n in (1, 4, 16)]
        assert _verdicts(runs[0]) == _verdicts(runs[1]) == _verdicts(runs[2])

    def test_patched_under_full(self):
        summary = self._run(Mode.FULL, "patched").summary
        assert (summary.covered, summary.unknown, summary.uncoverable) == (0, 0, 5)

    def test_trojan_under_full_for_any_trigger(self):
        covered = [set(self._run(Mode.FULL, "trojan", t).names_with("covered")) for t in (0x5A, 0x13, 0x00, 0x7F)]
        assert covered[0]
        assert all(c == covered[0] for c in covered)

    def test_unprogrammed_witness_is_unmapped(self):
        report = self._run(Mode.NONE)
        record = next(r for r in report.records if r.verdict == "covered")
        assert record.attribution
        assert not any(f.mapped or f.line for f in record.attribution)
