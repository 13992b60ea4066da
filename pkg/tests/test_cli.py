"""End-to-end command-line behavior and exit codes."""

import json

import pytest
from click.testing import CliRunner

from timeanchor.cli import cli, main


QUICK_SPEC = {
    "name": "quick",
    "simulation": {
        "seed": 31,
        "miner_count": 2,
        "adversary_strategy": {"kind": "honest"},
        "mean_block_interval": 120,
        "run_length": 25,
    },
    "tsa_fleet": [{"backend": "rfc3161_style"}],
    "verifier": {"encoding": "op_return", "rounds": 2, "chained": True},
}

CENSORED_SPEC = {
    "name": "blackout",
    "simulation": {
        "seed": 33,
        "miner_count": 1,
        "adversary_strategy": {"kind": "censor_commitments"},
        "mean_block_interval": 120,
        "run_length": 25,
    },
    "tsa_fleet": [{"backend": "rfc3161_style"}],
    "verifier": {"rounds": 1, "starvation_budget": 4},
}


@pytest.fixture
def runner():
    return CliRunner()


def write_spec(tmp_path, spec, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec), encoding="utf-8")
    return str(path)


def stamp_run(runner, tmp_path, spec=QUICK_SPEC):
    spec_path = write_spec(tmp_path, spec)
    out = tmp_path / "run"
    result = runner.invoke(cli, ["stamp", "--spec", spec_path,
                                 "--out", str(out)])
    return result, out


class TestSimulate:
    def test_writes_chain_and_events(self, runner, tmp_path):
        spec_path = write_spec(tmp_path, QUICK_SPEC)
        out = tmp_path / "sim"
        result = runner.invoke(cli, ["simulate", "--spec", spec_path,
                                     "--out", str(out)])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["blocks"] == 25
        assert (out / "chain.jsonl").exists()
        assert (out / "events.jsonl").exists()

    def test_seed_override_changes_output(self, runner, tmp_path):
        spec_path = write_spec(tmp_path, QUICK_SPEC)
        chains = []
        for i, seed in enumerate(["41", "43"]):
            out = tmp_path / f"sim{i}"
            result = runner.invoke(cli, ["simulate", "--spec", spec_path,
                                         "--out", str(out), "--seed", seed])
            assert result.exit_code == 0
            chains.append((out / "chain.jsonl").read_text())
        assert chains[0] != chains[1]

    def test_bundled_scenario_name_resolves(self, runner, tmp_path):
        out = tmp_path / "bundled"
        result = runner.invoke(cli, ["simulate", "--spec", "skewed_tsa",
                                     "--out", str(out)])
        assert result.exit_code == 0, result.output

    def test_missing_spec_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(cli, ["simulate", "--spec",
                                     str(tmp_path / "nope.json")])
        assert result.exit_code == 64


class TestStampVerify:
    def test_stamp_then_verify_clean(self, runner, tmp_path):
        result, out = stamp_run(runner, tmp_path)
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["proofs"] == 2 and not summary["starved"]
        proofs = sorted((out / "proofs").glob("proof_*.json"))
        assert len(proofs) == 2
        store = out / "trust_store.json"
        for proof in proofs:
            verdict = runner.invoke(cli, ["verify", str(proof),
                                          "--trust-store", str(store)])
            assert verdict.exit_code == 0, verdict.output
            report = json.loads(verdict.output)
            assert report["valid"] and report["all_timestamps_ok"]

    def test_verify_truncated_proof_exits_1(self, runner, tmp_path):
        _, out = stamp_run(runner, tmp_path)
        proof = sorted((out / "proofs").glob("proof_*.json"))[0]
        proof.write_text(proof.read_text()[:200], encoding="utf-8")
        result = runner.invoke(cli, ["verify", str(proof), "--trust-store",
                                     str(out / "trust_store.json")])
        assert result.exit_code == 1

    def test_verify_untrusted_store_exits_1(self, runner, tmp_path):
        _, out = stamp_run(runner, tmp_path)
        proof = sorted((out / "proofs").glob("proof_*.json"))[0]
        empty = tmp_path / "empty_store.json"
        empty.write_text("{}", encoding="utf-8")
        result = runner.invoke(cli, ["verify", str(proof),
                                     "--trust-store", str(empty)])
        assert result.exit_code == 1

    def test_starved_stamp_exits_3(self, runner, tmp_path):
        result, _ = stamp_run(runner, tmp_path, CENSORED_SPEC)
        assert result.exit_code == 3
        assert json.loads(result.output)["starved"]

    def test_missing_trust_store_is_usage_error(self, runner, tmp_path):
        _, out = stamp_run(runner, tmp_path)
        proof = sorted((out / "proofs").glob("proof_*.json"))[0]
        result = runner.invoke(cli, ["verify", str(proof), "--trust-store",
                                     str(tmp_path / "missing.json")])
        assert result.exit_code == 64


class TestAudit:
    def test_clean_proof(self, runner, tmp_path):
        _, out = stamp_run(runner, tmp_path)
        proof = sorted((out / "proofs").glob("proof_*.json"))[0]
        result = runner.invoke(cli, ["audit", str(proof), "--trust-store",
                                     str(out / "trust_store.json")])
        assert result.exit_code == 0
        assert json.loads(result.output)["result"] == "clean"

    def test_skewed_tsa_produces_evidence_file(self, runner, tmp_path):
        out = tmp_path / "skewed"
        result = runner.invoke(cli, ["stamp", "--spec", "skewed_tsa",
                                     "--out", str(out)])
        assert result.exit_code == 0, result.output
        proof = sorted((out / "proofs").glob("proof_*.json"))[0]
        store = str(out / "trust_store.json")
        audit = runner.invoke(cli, ["audit", str(proof),
                                    "--trust-store", store])
        assert audit.exit_code == 2, audit.output
        payload = json.loads(audit.output)
        assert payload["result"] == "misbehavior"
        evidence_path = payload["evidence"]
        recheck = runner.invoke(cli, ["audit", evidence_path,
                                      "--trust-store", store,
                                      "--verify-evidence"])
        assert recheck.exit_code == 0, recheck.output
        assert json.loads(recheck.output)["evidence_valid"]

    def test_tampered_evidence_exits_1(self, runner, tmp_path):
        out = tmp_path / "skewed"
        runner.invoke(cli, ["stamp", "--spec", "skewed_tsa", "--out", str(out)])
        proof = sorted((out / "proofs").glob("proof_*.json"))[0]
        store = str(out / "trust_store.json")
        payload = json.loads(
            runner.invoke(cli, ["audit", str(proof),
                                "--trust-store", store]).output
        )
        evidence = json.loads(open(payload["evidence"]).read())
        evidence["causal_chain"]["r0"] = "ff" * 16
        bad = tmp_path / "bad_evidence.json"
        bad.write_text(json.dumps(evidence), encoding="utf-8")
        result = runner.invoke(cli, ["audit", str(bad), "--trust-store", store,
                                     "--verify-evidence"])
        assert result.exit_code == 1


class TestReport:
    def test_csv_and_figures_written(self, runner, tmp_path):
        _, out = stamp_run(runner, tmp_path)
        result = runner.invoke(cli, ["report", "--out", str(out)])
        assert result.exit_code == 0, result.output
        written = json.loads(result.output)
        assert (out / "report.csv").exists()
        assert (out / "window_widths.png").stat().st_size > 0
        assert (out / "timeline.png").stat().st_size > 0
        assert any(p.endswith("report.csv") for p in written.values())

    def test_csv_contents(self, runner, tmp_path):
        import csv
        _, out = stamp_run(runner, tmp_path)
        runner.invoke(cli, ["report", "--out", str(out), "--no-figures"])
        with open(out / "report.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        for row in rows:
            assert row["valid"] == "True"
            assert int(row["window_end"]) > int(row["window_start"])

    def test_no_figures_flag(self, runner, tmp_path):
        _, out = stamp_run(runner, tmp_path)
        result = runner.invoke(cli, ["report", "--out", str(out),
                                     "--no-figures"])
        assert result.exit_code == 0
        assert not (out / "window_widths.png").exists()

    def test_missing_dir_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(cli, ["report", "--out",
                                     str(tmp_path / "absent")])
        assert result.exit_code != 0


class TestMainEntry:
    def test_usage_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate"])  # missing required --spec
        assert exc.value.code == 64

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 64
