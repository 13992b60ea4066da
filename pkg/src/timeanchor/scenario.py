"""Reproducible end-to-end scenarios: simulation + TSA fleet + verifier.

A scenario spec is a JSON document that fully determines a run; two
executions of the same spec produce byte-identical chain, event, and
proof files.  Six scenarios ship with the package (honest_baseline,
shifted_miner, late_inclusion, censor_partial, skewed_tsa, multi_tsa)
and double as the acceptance suite's reference runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .chain_sim import (
    ObserverView,
    Simulation,
    SimulationConfig,
    write_chain,
    write_events,
)
from .core import h
from .protocol import (
    CommitmentStarved,
    FreshnessProof,
    NonceSource,
    Verifier,
)
from .tsa import TimestampAuthority, TrustStore

BUNDLED_SCENARIOS = (
    "honest_baseline",
    "shifted_miner",
    "late_inclusion",
    "censor_partial",
    "skewed_tsa",
    "multi_tsa",
)


class ScenarioError(ValueError):
    """Raised on malformed scenario specs."""


@dataclass(frozen=True)
class TsaSpec:
    backend: str
    clock_offset: int = 0
    step_after_issuances: Optional[int] = None
    step_delta: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "TsaSpec":
        return cls(
            backend=data["backend"],
            clock_offset=int(data.get("clock_offset", 0)),
            step_after_issuances=data.get("step_after_issuances"),
            step_delta=int(data.get("step_delta", 0)),
        )


@dataclass(frozen=True)
class VerifierSpec:
    encoding: str = "op_return"
    rounds: int = 1
    chained: bool = True
    starvation_budget: int = 6

    @classmethod
    def from_dict(cls, data: dict) -> "VerifierSpec":
        return cls(
            encoding=data.get("encoding", "op_return"),
            rounds=int(data.get("rounds", 1)),
            chained=bool(data.get("chained", True)),
            starvation_budget=int(data.get("starvation_budget", 6)),
        )


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    simulation: SimulationConfig
    tsa_fleet: Tuple[TsaSpec, ...]
    verifier: VerifierSpec
    outputs: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        try:
            return cls(
                name=data.get("name", "unnamed"),
                simulation=SimulationConfig.from_dict(data["simulation"]),
                tsa_fleet=tuple(
                    TsaSpec.from_dict(t) for t in data.get("tsa_fleet", [])
                ),
                verifier=VerifierSpec.from_dict(data.get("verifier", {})),
                outputs=dict(data.get("outputs", {})),
            )
        except KeyError as exc:
            raise ScenarioError(f"scenario spec missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        return cls.from_dict(json.loads(text))

    def with_seed(self, seed: int) -> "ScenarioSpec":
        sim = SimulationConfig(
            **{**self.simulation.__dict__, "seed": seed}
        )
        return ScenarioSpec(
            name=self.name,
            simulation=sim,
            tsa_fleet=self.tsa_fleet,
            verifier=self.verifier,
            outputs=self.outputs,
        )

    def output_path(self, key: str, default: str) -> str:
        return self.outputs.get(key, default)


def load_scenario(spec: str) -> ScenarioSpec:
    """Load a scenario from a file path or a bundled scenario name."""
    path = Path(spec)
    if path.is_file():
        return ScenarioSpec.from_json(path.read_text(encoding="utf-8"))
    if spec in BUNDLED_SCENARIOS:
        text = (
            resources.files("timeanchor.scenarios")
            .joinpath(f"{spec}.json")
            .read_text(encoding="utf-8")
        )
        return ScenarioSpec.from_json(text)
    raise ScenarioError(
        f"no such scenario file or bundled scenario: {spec!r} "
        f"(bundled: {', '.join(BUNDLED_SCENARIOS)})"
    )


def build_tsas(spec: ScenarioSpec) -> Tuple[List[TimestampAuthority], TrustStore]:
    """Deterministic TSA fleet; key seeds derive from the scenario seed."""
    tsas = []
    for i, ts in enumerate(spec.tsa_fleet):
        tsa_id = f"tsa{i:02d}".encode()
        key_seed = h(
            b"scenario-tsa" + tsa_id + spec.simulation.seed.to_bytes(8, "big")
        )
        tsas.append(
            TimestampAuthority(
                tsa_id=tsa_id,
                backend=ts.backend,
                key_seed=key_seed,
                clock_offset=ts.clock_offset,
                step_after_issuances=ts.step_after_issuances,
                step_delta=ts.step_delta,
            )
        )
    store = TrustStore([t.identity for t in tsas])
    return tsas, store


def build_verifier(spec: ScenarioSpec,
                   tsas: Sequence[TimestampAuthority]) -> Verifier:
    nonce_seed = spec.simulation.seed ^ 0x9E3779B97F4A7C15
    return Verifier(
        tsas=tsas,
        nonce_source=NonceSource("simulation", nonce_seed),
        encoding=spec.verifier.encoding,
        starvation_budget=spec.verifier.starvation_budget,
    )


@dataclass
class StampResult:
    sim: Simulation
    proofs: List[FreshnessProof]
    tsas: List[TimestampAuthority]
    trust_store: TrustStore
    starved: bool = False


def run_stamp(spec: ScenarioSpec) -> StampResult:
    """Run the embedded verifier against a fresh simulation."""
    sim = Simulation(spec.simulation)
    view = ObserverView(sim)
    tsas, store = build_tsas(spec)
    verifier = build_verifier(spec, tsas)
    proofs: List[FreshnessProof] = []
    starved = False
    try:
        if spec.verifier.chained:
            proofs = verifier.run_chained(view, spec.verifier.rounds)
        else:
            for _ in range(spec.verifier.rounds):
                proofs.append(verifier.run_round(view))
    except CommitmentStarved:
        starved = True
    sim.finish()
    return StampResult(sim=sim, proofs=proofs, tsas=tsas,
                       trust_store=store, starved=starved)


def run_simulate(spec: ScenarioSpec) -> Simulation:
    """Run the bare network simulation for the configured run length."""
    sim = Simulation(spec.simulation)
    while len(sim.chain) - 1 < spec.simulation.run_length:
        sim.mine_next()
    sim.finish()
    return sim


def summarize(sim: Simulation) -> dict:
    """Counts for the CLI summary line; derived from the event log."""
    blocks = len(sim.chain) - 1
    violations = 0
    censored = 0
    for event in sim.events:
        if event.kind == "block_received":
            if not event.details.get("rule_valid") or not event.details.get(
                "deviation_ok"
            ):
                violations += 1
        elif event.kind == "tx_censored":
            censored += 1
    return {
        "blocks": blocks,
        "timestamp_violations": violations,
        "censored_tx_events": censored,
        "never_included": len(sim.never_included),
    }


def write_outputs(spec: ScenarioSpec, out_dir: Path, sim: Simulation,
                  proofs: Sequence[FreshnessProof] = (),
                  trust_store: Optional[TrustStore] = None) -> dict:
    """Write chain, events, trust store, and proof files under out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    chain_path = out_dir / spec.output_path("chain", "chain.jsonl")
    events_path = out_dir / spec.output_path("events", "events.jsonl")
    write_chain(chain_path, sim.chain)
    write_events(events_path, sim.sorted_events())
    written = {"chain": str(chain_path), "events": str(events_path)}
    if trust_store is not None:
        store_path = out_dir / spec.output_path("trust_store", "trust_store.json")
        trust_store.save(store_path)
        written["trust_store"] = str(store_path)
    if proofs:
        proofs_dir = out_dir / spec.output_path("proofs", "proofs")
        proofs_dir.mkdir(parents=True, exist_ok=True)
        proof_paths = []
        for i, proof in enumerate(proofs):
            path = proofs_dir / f"proof_{i:04d}.json"
            path.write_text(proof.to_json() + "\n", encoding="utf-8")
            proof_paths.append(str(path))
        written["proofs"] = proof_paths
    return written
