"""Command-line interface.

Exit codes are a stable API: 0 success/clean, 1 structural failure,
2 timestamp violation detected, 3 commitment starved, 64 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .accountability import AuditError, MisbehaviorEvidence, audit_proof, verify_evidence
from .protocol import FreshnessProof, verify_proof
from .report import generate_report
from .scenario import (
    ScenarioError,
    load_scenario,
    run_simulate,
    run_stamp,
    summarize,
    write_outputs,
)
from .tsa import TrustStore

EXIT_OK = 0
EXIT_STRUCTURAL = 1
EXIT_TIMESTAMP = 2
EXIT_STARVED = 3
EXIT_USAGE = 64


def _load_spec(spec: str, seed):
    try:
        loaded = load_scenario(spec)
    except (ScenarioError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    return loaded.with_seed(seed) if seed is not None else loaded


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_USAGE)


def _load_trust_store(path: str) -> TrustStore:
    text = _read_text(path)
    try:
        return TrustStore.from_json(text)
    except (ValueError, KeyError) as exc:
        click.echo(f"error: bad trust store {path}: {exc}", err=True)
        sys.exit(EXIT_USAGE)


def _load_proof(path: str) -> FreshnessProof:
    text = _read_text(path)
    try:
        return FreshnessProof.from_json(text)
    except (ValueError, KeyError, IndexError) as exc:
        click.echo(f"error: unparseable proof {path}: {exc}", err=True)
        sys.exit(EXIT_STRUCTURAL)


@click.group()
def cli() -> None:
    """Strengthened blockchain timestamps: simulate, stamp, verify, audit."""


@cli.command()
@click.option("--spec", required=True,
              help="Scenario spec path or bundled scenario name.")
@click.option("--out", "out_dir", default="out", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
def simulate(spec: str, out_dir: str, seed) -> None:
    """Run the network simulation and write chain + event log."""
    loaded = _load_spec(spec, seed)
    sim = run_simulate(loaded)
    write_outputs(loaded, Path(out_dir), sim)
    summary = summarize(sim)
    click.echo(json.dumps({"scenario": loaded.name, **summary}))


@cli.command()
@click.option("--spec", required=True,
              help="Scenario spec path or bundled scenario name.")
@click.option("--out", "out_dir", default="out", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
def stamp(spec: str, out_dir: str, seed) -> None:
    """Run the embedded verifier and write one proof file per round."""
    loaded = _load_spec(spec, seed)
    result = run_stamp(loaded)
    write_outputs(loaded, Path(out_dir), result.sim, result.proofs,
                  result.trust_store)
    summary = summarize(result.sim)
    summary["proofs"] = len(result.proofs)
    summary["starved"] = result.starved
    click.echo(json.dumps({"scenario": loaded.name, **summary}))
    if result.starved:
        sys.exit(EXIT_STARVED)


@cli.command()
@click.argument("proof_path", type=str)
@click.option("--trust-store", "trust_store_path", required=True, type=str)
@click.option("--format", "fmt", type=click.Choice(["json"]), default="json",
              show_default=True)
def verify(proof_path: str, trust_store_path: str, fmt: str) -> None:
    """Verify a proof file; exit 2 if valid but a timestamp check fails."""
    store = _load_trust_store(trust_store_path)
    proof = _load_proof(proof_path)
    report = verify_proof(proof, store)
    click.echo(report.to_json())
    if not report.valid:
        sys.exit(EXIT_STRUCTURAL)
    if not report.all_timestamps_ok:
        sys.exit(EXIT_TIMESTAMP)


@cli.command()
@click.argument("proof_path", type=str)
@click.option("--trust-store", "trust_store_path", required=True, type=str)
@click.option("--out", "out_path", default=None, type=str,
              help="Where to write evidence JSON (default: alongside input).")
@click.option("--verify-evidence", "evidence_mode", is_flag=True,
              help="Treat PROOF_PATH as an evidence file and re-check it.")
def audit(proof_path: str, trust_store_path: str, out_path, evidence_mode) -> None:
    """Audit a proof for TSA self-contradiction (T0 > T1)."""
    store = _load_trust_store(trust_store_path)
    if evidence_mode:
        text = _read_text(proof_path)
        try:
            evidence = MisbehaviorEvidence.from_json(text)
        except (ValueError, KeyError) as exc:
            click.echo(f"error: unparseable evidence: {exc}", err=True)
            sys.exit(EXIT_STRUCTURAL)
        ok = verify_evidence(evidence, store)
        click.echo(json.dumps({"evidence_valid": ok}))
        if not ok:
            sys.exit(EXIT_STRUCTURAL)
        return
    proof = _load_proof(proof_path)
    try:
        evidence = audit_proof(proof, store)
    except AuditError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STRUCTURAL)
    if evidence is None:
        click.echo(json.dumps({"result": "clean"}))
        return
    target = Path(out_path) if out_path else Path(proof_path).with_suffix(
        ".evidence.json"
    )
    target.write_text(evidence.to_json() + "\n", encoding="utf-8")
    click.echo(json.dumps({"result": "misbehavior", "evidence": str(target),
                           "verdict": evidence.verdict}))
    sys.exit(EXIT_TIMESTAMP)


@cli.command()
@click.option("--out", "run_dir", required=True,
              type=click.Path(file_okay=False, exists=True),
              help="Directory produced by the stamp command.")
@click.option("--trust-store", "trust_store_path", default=None, type=str)
@click.option("--no-figures", is_flag=True, help="Skip PNG rendering.")
def report(run_dir: str, trust_store_path, no_figures: bool) -> None:
    """Summarize a stamp run as CSV plus figures."""
    try:
        written = generate_report(
            Path(run_dir),
            Path(trust_store_path) if trust_store_path else None,
            figures=not no_figures,
        )
    except (FileNotFoundError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    click.echo(json.dumps(written))


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)


if __name__ == "__main__":
    main()
